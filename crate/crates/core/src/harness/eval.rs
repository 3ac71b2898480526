//! Corpus-level comparison of the heuristic against the exact oracle.

use std::collections::BTreeMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use crate::allocator::{solve_with, SolveOptions};
use crate::curves::curve_for_index;
use crate::error::{EvalError, OracleError};
use crate::model::{AuctionInstance, EPS};
use crate::oracle::{exact_curve, exact_solve_with, CurveOptions, OracleOptions};
use crate::pricing::{quote, Scheme};

/// Denominator floor for relative price error.
/// Relative bisection tolerance for exact curves.
pub const EXACT_EPS: f64 = 1e-10;

pub const PRICE_FLOOR: f64 = 1e-6;
pub const HIST_WIDTH: f64 = 0.05;
pub const HIST_BINS: usize = 41;
pub const CDF_THRESHOLDS: [f64; 18] = [
    0.0, 0.001, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10, 0.15, 0.20, 0.30,
    0.50, 1.0, 2.0,
];

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    /// Collect solve-time percentiles. Off by default since timings differ run to run.
    pub timing: bool,
    pub solve: SolveOptions,
    pub oracle: OracleOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            jobs: 0,
            timing: false,
            solve: SolveOptions::default(),
            oracle: OracleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdlimStats {
    pub efficiency_rate: f64,
    pub optimality_rate: f64,
    pub instances: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfPoint {
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PricingStats {
    pub scheme: Scheme,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub quotes: usize,
    /// Exact price zero, approximate price positive.
    pub unbounded: usize,
    /// Ratios at or above the last histogram bin.
    pub overflow: usize,
    pub within_5pct: f64,
    pub within_15pct: f64,
    pub ratio_hist: Vec<HistBin>,
    pub err_cdf: Vec<CdfPoint>,
    pub skipped_instances: usize,
    pub curve_errors: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub allocation: BTreeMap<usize, AdlimStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pricing: Option<PricingStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<Timing>,
}

fn run_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Heuristic-to-optimal objective ratio; 1 when the optimum is the empty page.
pub fn efficiency_ratio(heuristic: f64, optimum: f64) -> f64 {
    if optimum <= EPS {
        1.0
    } else {
        heuristic / optimum
    }
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn eval_allocation(
    corpus: &[AuctionInstance],
    adlims: &[usize],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mut report = EvalReport::default();
    let mut times: Vec<f64> = Vec::new();
    for &adlim in adlims {
        let outcomes: Vec<Result<Option<(f64, Duration)>, EvalError>> = run_pool(opts.jobs, || {
            corpus
                .par_iter()
                .map(|inst| {
                    let inst = inst.with_adlim(adlim)?;
                    let optimum = match exact_solve_with(&inst, &opts.oracle) {
                        Ok(s) => s.objective,
                        Err(OracleError::TooLarge { .. }) => return Ok(None),
                        Err(e) => return Err(e.into()),
                    };
                    let r = solve_with(&inst, &opts.solve);
                    Ok(Some((efficiency_ratio(r.best.objective, optimum), r.stats.elapsed)))
                })
                .collect()
        })?;

        let mut ratios = Vec::with_capacity(outcomes.len());
        let mut skipped = 0;
        for o in outcomes {
            match o? {
                Some((ratio, elapsed)) => {
                    ratios.push(ratio);
                    times.push(elapsed.as_secs_f64() * 1e3);
                }
                None => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("adlim {adlim}: skipped {skipped} instances above the oracle limit");
        }
        let n = ratios.len();
        let (efficiency_rate, optimality_rate) = if n == 0 {
            (1.0, 1.0)
        } else {
            (
                ratios.iter().sum::<f64>() / n as f64,
                ratios.iter().filter(|&&r| r >= 1.0 - EPS).count() as f64 / n as f64,
            )
        };
        report.allocation.insert(
            adlim,
            AdlimStats {
                efficiency_rate,
                optimality_rate,
                instances: n,
                skipped,
            },
        );
    }
    if opts.timing {
        times.sort_by(f64::total_cmp);
        report.timing_ms = Some(Timing {
            p50: percentile(&times, 0.50),
            p95: percentile(&times, 0.95),
            p99: percentile(&times, 0.99),
        });
    }
    Ok(report)
}

/// One approximate/exact price pair for a winning advertiser.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PricePair {
    pub instance: usize,
    pub advertiser: String,
    pub approx: f64,
    pub exact: f64,
}

impl PricePair {
    pub fn relative_error(&self) -> f64 {
        (self.approx - self.exact).abs() / self.exact.max(PRICE_FLOOR)
    }

    /// `None` when the exact price is zero but the approximation is not.
    pub fn ratio(&self) -> Option<f64> {
        if self.exact <= 0.0 {
            (self.approx <= 0.0).then_some(1.0)
        } else {
            Some(self.approx / self.exact)
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PriceComparison {
    pub pairs: Vec<PricePair>,
    pub skipped_instances: usize,
    pub curve_errors: usize,
}

/// Prices from the heuristic's search-log curves next to prices from exact
/// curves, for every advertiser the heuristic shows.
pub fn compare_prices(
    corpus: &[AuctionInstance],
    scheme: Scheme,
    alpha: f64,
    opts: &EvalOptions,
) -> Result<PriceComparison, EvalError> {
    if scheme.uses_alpha() && !(alpha.is_finite() && alpha >= 0.0) {
        return Err(crate::error::ConfigError::BadAlpha(alpha).into());
    }
    let per_instance: Vec<Result<Option<(Vec<PricePair>, usize)>, EvalError>> =
        run_pool(opts.jobs, || {
            corpus
                .par_iter()
                .enumerate()
                .map(|(index, inst)| {
                    if inst.candidates().len() > opts.oracle.max_candidates {
                        return Ok(None);
                    }
                    let r = solve_with(inst, &opts.solve);
                    let bid_hi = 10.0 * inst.bids().iter().copied().fold(0.0, f64::max);
                    let curve_opts = CurveOptions {
                        bid_hi: (bid_hi > 0.0).then_some(bid_hi),
                        eps_bid: (bid_hi > 0.0).then_some(EXACT_EPS * bid_hi),
                        oracle: opts.oracle.clone(),
                    };
                    let mut pairs = Vec::new();
                    let mut errors = 0;
                    for (&adv, &x) in &r.best.clicks {
                        if x <= 0.0 {
                            continue;
                        }
                        let name = &inst.advertisers()[adv];
                        let bid = inst.bids()[adv];
                        let approx = curve_for_index(&r, inst, adv)?;
                        let exact = match exact_curve(inst, name, &curve_opts) {
                            Ok(c) => c,
                            Err(e) => {
                                log::warn!("instance {index}: {e}");
                                errors += 1;
                                continue;
                            }
                        };
                        pairs.push(PricePair {
                            instance: index,
                            advertiser: name.clone(),
                            approx: quote(&approx, bid, scheme, alpha)?.per_click,
                            exact: quote(&exact, bid, scheme, alpha)?.per_click,
                        });
                    }
                    Ok(Some((pairs, errors)))
                })
                .collect()
        })?;

    let mut out = PriceComparison::default();
    for r in per_instance {
        match r? {
            Some((pairs, errors)) => {
                out.pairs.extend(pairs);
                out.curve_errors += errors;
            }
            None => out.skipped_instances += 1,
        }
    }
    if out.skipped_instances > 0 {
        log::warn!(
            "skipped {} instances above the oracle limit",
            out.skipped_instances
        );
    }
    Ok(out)
}

pub fn summarize_prices(cmp: &PriceComparison, scheme: Scheme, alpha: f64) -> PricingStats {
    let n = cmp.pairs.len();
    let mut bins: Vec<HistBin> = (0..HIST_BINS)
        .map(|k| HistBin {
            lo: (2 * k) as f64 / 40.0 - 1.0 / 40.0,
            hi: (2 * k + 1) as f64 / 40.0,
            count: 0,
        })
        .collect();
    let mut unbounded = 0;
    let mut overflow = 0;
    let mut errs: Vec<f64> = Vec::with_capacity(n);
    for p in &cmp.pairs {
        errs.push(p.relative_error());
        match p.ratio() {
            None => unbounded += 1,
            Some(r) => {
                let k = (r / HIST_WIDTH + 0.5).floor().max(0.0) as usize;
                match bins.get_mut(k) {
                    Some(bin) => bin.count += 1,
                    None => overflow += 1,
                }
            }
        }
    }
    let frac = |t: f64| {
        if n == 0 {
            1.0
        } else {
            errs.iter().filter(|&&e| e <= t).count() as f64 / n as f64
        }
    };
    PricingStats {
        scheme,
        alpha: scheme.uses_alpha().then_some(alpha),
        quotes: n,
        unbounded,
        overflow,
        within_5pct: frac(0.05),
        within_15pct: frac(0.15),
        ratio_hist: bins,
        err_cdf: CDF_THRESHOLDS
            .iter()
            .map(|&threshold| CdfPoint {
                threshold,
                fraction: frac(threshold),
            })
            .collect(),
        skipped_instances: cmp.skipped_instances,
        curve_errors: cmp.curve_errors,
    }
}

pub fn eval_prices(
    corpus: &[AuctionInstance],
    scheme: Scheme,
    alpha: f64,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let cmp = compare_prices(corpus, scheme, alpha, opts)?;
    Ok(EvalReport {
        pricing: Some(summarize_prices(&cmp, scheme, alpha)),
        ..EvalReport::default()
    })
}
