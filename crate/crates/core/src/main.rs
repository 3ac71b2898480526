use std::collections::BTreeMap;
use std::error::Error;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use slate_auction::allocator::{solve_with, SolveOptions, SolveResult};
use slate_auction::curves::{curves_for_all, AllocationCurve};
use slate_auction::harness::{self, EvalOptions, EvalReport, GenConfig};
use slate_auction::pricing::{quote, PriceQuote, Scheme, DEFAULT_ALPHA};
use slate_auction::AuctionInstance;

#[derive(Parser)]
#[command(name = "slate-auction", version, about = "Rich-ad slate allocation and pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus (newline-delimited JSON).
    Gen(GenArgs),
    /// Solve every instance in a corpus.
    Solve(SolveArgs),
    /// Per-advertiser allocation curves from each solve's search log.
    Curves(CurvesArgs),
    /// Price every shown advertiser.
    Price(PriceArgs),
    /// Compare heuristic and exact allocations.
    Eval(EvalArgs),
    /// Compare search-log prices with exact binary-search prices.
    PriceAccuracy(PriceAccuracyArgs),
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveFlags {
    /// Wall-clock budget per solve, in milliseconds.
    #[arg(long)]
    deadline_ms: Option<f64>,
    /// Accepted-swap budget per solve.
    #[arg(long, default_value_t = 10_000)]
    max_swaps: usize,
}

impl SolveFlags {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            max_swaps: self.max_swaps,
            deadline: self.deadline_ms.map(|ms| Duration::from_secs_f64(ms.max(0.0) / 1e3)),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Generator config as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n")]
    n_instances: Option<usize>,
    #[arg(long)]
    adlim: Option<usize>,
    #[arg(long)]
    candidates_max: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SolveArgs {
    corpus: PathBuf,
    #[command(flatten)]
    solve: SolveFlags,
    /// Include elapsed time in the stats.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CurvesArgs {
    corpus: PathBuf,
    #[command(flatten)]
    solve: SolveFlags,
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct PriceArgs {
    corpus: PathBuf,
    #[arg(long, default_value = "alpha")]
    scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[command(flatten)]
    solve: SolveFlags,
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EvalArgs {
    corpus: PathBuf,
    /// Ad-count limits to evaluate, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    adlims: Vec<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Add solve-time percentiles (makes the report run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 25)]
    oracle_limit: usize,
    #[command(flatten)]
    solve: SolveFlags,
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct PriceAccuracyArgs {
    corpus: PathBuf,
    #[arg(long, default_value = "alpha")]
    scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = 25)]
    oracle_limit: usize,
    #[command(flatten)]
    solve: SolveFlags,
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: Output,
}

type CliResult = Result<(), Box<dyn Error>>;

fn open(output: &Output) -> io::Result<Box<dyn Write>> {
    Ok(match &output.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json_line<T: Serialize>(w: &mut dyn Write, value: &T) -> CliResult {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct PlacedAd<'a> {
    id: &'a str,
    advertiser: &'a str,
    start: usize,
    height: usize,
    clicks: f64,
}

#[derive(Serialize)]
struct SolveStatsOut {
    swaps: usize,
    evaluated: usize,
    logged: usize,
    truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

#[derive(Serialize)]
struct SolveOut<'a> {
    instance: usize,
    objective: f64,
    slate: Vec<PlacedAd<'a>>,
    per_cardinality: BTreeMap<usize, f64>,
    stats: SolveStatsOut,
}

fn solve_out<'a>(index: usize, inst: &'a AuctionInstance, r: &SolveResult, timing: bool) -> SolveOut<'a> {
    SolveOut {
        instance: index,
        objective: r.best.objective,
        slate: r
            .best
            .placements
            .iter()
            .map(|p| {
                let c = inst.candidate(p.candidate);
                PlacedAd {
                    id: &c.id,
                    advertiser: &c.advertiser,
                    start: p.start,
                    height: c.height,
                    clicks: inst.clicks_at(p.candidate, p.start),
                }
            })
            .collect(),
        per_cardinality: r.per_cardinality.iter().map(|(k, s)| (*k, s.objective)).collect(),
        stats: SolveStatsOut {
            swaps: r.stats.swaps,
            evaluated: r.stats.evaluated,
            logged: r.log.len(),
            truncated: r.stats.truncated,
            elapsed_ms: timing.then(|| r.stats.elapsed.as_secs_f64() * 1e3),
        },
    }
}

fn cmd_gen(args: GenArgs) -> CliResult {
    let mut cfg: GenConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => GenConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_instances {
        cfg.n_instances = n;
    }
    if let Some(adlim) = args.adlim {
        cfg.adlim = adlim;
    }
    if let Some(max) = args.candidates_max {
        cfg.candidates_max = max;
        cfg.candidates_min = cfg.candidates_min.min(max);
    }
    let corpus = harness::generate(&cfg)?;
    let mut w = open(&args.output)?;
    harness::write_corpus(&mut w, &corpus)?;
    w.flush()?;
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> CliResult {
    let corpus = harness::read_corpus(&args.corpus)?;
    let opts = args.solve.options();
    let mut w = open(&args.output)?;
    for (i, inst) in corpus.iter().enumerate() {
        let r = solve_with(inst, &opts);
        write_json_line(&mut w, &solve_out(i, inst, &r, args.timing))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CurvesOut {
    instance: usize,
    curves: BTreeMap<String, AllocationCurve>,
}

fn cmd_curves(args: CurvesArgs) -> CliResult {
    let corpus = harness::read_corpus(&args.corpus)?;
    let opts = args.solve.options();
    let mut w = open(&args.output)?;
    let mut csv = args.csv.then(|| csv::Writer::from_writer(Vec::new()));
    if let Some(c) = csv.as_mut() {
        c.write_record(["instance", "advertiser", "segment", "tau", "alloc"])?;
    }
    for (i, inst) in corpus.iter().enumerate() {
        let r = solve_with(inst, &opts);
        let curves = curves_for_all(&r, inst)?;
        match csv.as_mut() {
            Some(c) => {
                for (adv, curve) in &curves {
                    for (j, (tau, x)) in curve.taus.iter().zip(&curve.allocs).enumerate() {
                        c.serialize((i, adv, j, tau, x))?;
                    }
                }
            }
            None => write_json_line(&mut w, &CurvesOut { instance: i, curves })?,
        }
    }
    if let Some(c) = csv {
        w.write_all(&c.into_inner()?)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct QuoteOut {
    instance: usize,
    advertiser: String,
    bid: f64,
    #[serde(flatten)]
    quote: PriceQuote,
}

fn cmd_price(args: PriceArgs) -> CliResult {
    let corpus = harness::read_corpus(&args.corpus)?;
    let opts = args.solve.options();
    let mut w = open(&args.output)?;
    let mut csv = args.csv.then(|| csv::Writer::from_writer(Vec::new()));
    if let Some(c) = csv.as_mut() {
        c.write_record(["instance", "advertiser", "bid", "scheme", "alpha", "per_click", "segment", "clicks"])?;
    }
    for (i, inst) in corpus.iter().enumerate() {
        let r = solve_with(inst, &opts);
        for (&adv, &x) in &r.best.clicks {
            if x <= 0.0 {
                continue;
            }
            let name = &inst.advertisers()[adv];
            let bid = inst.bids()[adv];
            let curve = slate_auction::curve_for(&r, inst, name)?;
            let q = quote(&curve, bid, args.scheme, args.alpha)?;
            match csv.as_mut() {
                Some(c) => c.serialize((
                    i,
                    name,
                    bid,
                    q.scheme.to_string(),
                    q.alpha,
                    q.per_click,
                    q.segment,
                    q.clicks,
                ))?,
                None => write_json_line(
                    &mut w,
                    &QuoteOut {
                        instance: i,
                        advertiser: name.clone(),
                        bid,
                        quote: q,
                    },
                )?,
            }
        }
    }
    if let Some(c) = csv {
        w.write_all(&c.into_inner()?)?;
    }
    w.flush()?;
    Ok(())
}

fn write_report(report: &EvalReport, as_csv: bool, output: &Output) -> CliResult {
    let mut w = open(output)?;
    if as_csv {
        let mut c = csv::Writer::from_writer(Vec::new());
        c.write_record(["section", "key", "value_a", "value_b"])?;
        for (adlim, s) in &report.allocation {
            c.serialize(("allocation", adlim, s.efficiency_rate, s.optimality_rate))?;
        }
        if let Some(p) = &report.pricing {
            for b in &p.ratio_hist {
                c.serialize(("ratio_hist", 0.5 * (b.lo + b.hi), b.count as f64, f64::NAN))?;
            }
            for pt in &p.err_cdf {
                c.serialize(("err_cdf", pt.threshold, pt.fraction, f64::NAN))?;
            }
        }
        if let Some(t) = &report.timing_ms {
            c.serialize(("timing_ms", "p50/p95", t.p50, t.p95))?;
            c.serialize(("timing_ms", "p99", t.p99, f64::NAN))?;
        }
        w.write_all(&c.into_inner()?)?;
    } else {
        serde_json::to_writer_pretty(&mut w, report)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult {
    let corpus = harness::read_corpus(&args.corpus)?;
    let opts = EvalOptions {
        jobs: args.jobs,
        timing: args.timing,
        solve: args.solve.options(),
        oracle: slate_auction::oracle::OracleOptions {
            max_candidates: args.oracle_limit,
        },
    };
    let report = harness::eval_allocation(&corpus, &args.adlims, &opts)?;
    write_report(&report, args.csv, &args.output)
}

fn cmd_price_accuracy(args: PriceAccuracyArgs) -> CliResult {
    let corpus = harness::read_corpus(&args.corpus)?;
    let opts = EvalOptions {
        jobs: args.jobs,
        solve: args.solve.options(),
        oracle: slate_auction::oracle::OracleOptions {
            max_candidates: args.oracle_limit,
        },
        ..EvalOptions::default()
    };
    let report = harness::eval_prices(&corpus, args.scheme, args.alpha, &opts)?;
    write_report(&report, args.csv, &args.output)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Price(a) => cmd_price(a),
        Command::Eval(a) => cmd_eval(a),
        Command::PriceAccuracy(a) => cmd_price_accuracy(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
