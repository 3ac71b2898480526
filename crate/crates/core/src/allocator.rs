//! Greedy start plus 1-for-1 swap local search, run once per slate cardinality.
//!
//! Every feasible slate the search evaluates is recorded in a [`SearchLog`];
//! the curves module turns that log into per-advertiser allocation curves.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::model::{AuctionInstance, Slate, EPS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlateTerm {
    pub advertiser: usize,
    pub clicks: f64,
    pub cost: f64,
}

/// One evaluated slate, reduced to what allocation curves need.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogEntry {
    /// One term per placed ad, sorted by advertiser index.
    pub terms: Vec<SlateTerm>,
    pub objective: f64,
}

impl LogEntry {
    pub fn clicks_of(&self, advertiser: usize) -> f64 {
        self.term(advertiser).map_or(0.0, |t| t.clicks)
    }

    pub fn cost_of(&self, advertiser: usize) -> f64 {
        self.term(advertiser).map_or(0.0, |t| t.cost)
    }

    fn term(&self, advertiser: usize) -> Option<&SlateTerm> {
        self.terms
            .binary_search_by_key(&advertiser, |t| t.advertiser)
            .ok()
            .map(|i| &self.terms[i])
    }
}

/// Deduplicated record of every feasible slate evaluated during a solve.
#[derive(Clone, Debug, Default)]
pub struct SearchLog {
    entries: Vec<LogEntry>,
    seen: HashSet<Vec<u64>>,
}

impl SearchLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn signature(inst: &AuctionInstance, order: &[usize]) -> Vec<u64> {
        let mut line = 0u64;
        let mut sig: Vec<u64> = order
            .iter()
            .map(|&c| {
                let key = ((c as u64) << 32) | line;
                line += inst.height(c) as u64;
                key
            })
            .collect();
        sig.sort_unstable();
        sig
    }

    pub fn contains(&self, inst: &AuctionInstance, order: &[usize]) -> bool {
        self.seen.contains(&Self::signature(inst, order))
    }

    /// Records the stack `order` (assumed feasible) evaluated under `bids`.
    /// Returns false if the same placements were already logged.
    pub fn record(&mut self, inst: &AuctionInstance, bids: &[f64], order: &[usize]) -> bool {
        if !self.seen.insert(Self::signature(inst, order)) {
            return false;
        }
        let mut line = 0;
        let mut objective = 0.0;
        let mut terms: Vec<SlateTerm> = order
            .iter()
            .map(|&c| {
                let start = line;
                line += inst.height(c);
                objective += inst.score_at(bids, c, start);
                SlateTerm {
                    advertiser: inst.advertiser_of(c),
                    clicks: inst.clicks_at(c, start),
                    cost: inst.cost_at(c, start),
                }
            })
            .collect();
        terms.sort_unstable_by_key(|t| t.advertiser);
        self.entries.push(LogEntry { terms, objective });
        true
    }

    pub fn record_slate(&mut self, inst: &AuctionInstance, slate: &Slate) -> bool {
        self.record(inst, inst.bids(), &slate.order())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Accepted swaps allowed per instance, summed over all cardinalities.
    pub max_swaps: usize,
    /// Wall-clock budget for the whole solve.
    pub deadline: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_swaps: 10_000,
            deadline: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub swaps: usize,
    pub evaluated: usize,
    #[serde(serialize_with = "ser_ms")]
    pub elapsed: Duration,
    /// Set when the swap budget or deadline stopped the search early.
    pub truncated: bool,
}

fn ser_ms<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub best: Slate,
    /// Locally optimal (or, after truncation, best-so-far) slate per cardinality;
    /// entry 0 is the empty slate.
    pub per_cardinality: BTreeMap<usize, Slate>,
    pub log: SearchLog,
    pub stats: SolveStats,
}

/// Slate preference: higher objective, then fewer ads, then fewer lines.
pub(crate) fn prefer(cand: (f64, usize, usize), incumbent: (f64, usize, usize)) -> bool {
    prefer_within(cand, incumbent, EPS)
}

pub(crate) fn prefer_within(cand: (f64, usize, usize), incumbent: (f64, usize, usize), tol: f64) -> bool {
    if cand.0 > incumbent.0 + tol {
        return true;
    }
    if cand.0 < incumbent.0 - tol {
        return false;
    }
    (cand.1, cand.2) < (incumbent.1, incumbent.2)
}

/// Candidates by descending `bid * density`, ties by id.
pub(crate) fn rank_order(inst: &AuctionInstance, bids: &[f64]) -> Vec<usize> {
    let key = |c: usize| bids[inst.advertiser_of(c)] * inst.candidate(c).density;
    let mut order: Vec<usize> = (0..inst.candidates().len()).collect();
    order.sort_by(|&a, &b| {
        key(b)
            .total_cmp(&key(a))
            .then_with(|| inst.candidate(a).id.cmp(&inst.candidate(b).id))
    });
    order
}

/// Full greedy scan: every candidate in rank order that still fits, up to adlim.
fn greedy_scan(inst: &AuctionInstance, rank: &[usize], k: usize) -> Vec<usize> {
    let mut used = vec![false; inst.advertisers().len()];
    let mut lines = 0;
    let mut out = Vec::with_capacity(k);
    for &c in rank {
        if out.len() == k {
            break;
        }
        let adv = inst.advertiser_of(c);
        if used[adv] || lines + inst.height(c) > inst.page().h {
            continue;
        }
        used[adv] = true;
        lines += inst.height(c);
        out.push(c);
    }
    out
}

/// Greedy starting slate for cardinality `k`; may hold fewer than `k` ads.
pub fn greedy_init(inst: &AuctionInstance, k: usize) -> Slate {
    let k = k.min(inst.max_ads());
    let rank = rank_order(inst, inst.bids());
    let order = greedy_scan(inst, &rank, k);
    Slate::stack(inst, &order).expect("greedy scan only builds feasible stacks")
}

struct Budget {
    max_swaps: usize,
    deadline: Option<Instant>,
    swaps: usize,
    evaluated: usize,
    next_check: usize,
    exhausted: bool,
}

/// Evaluations between clock reads.
const CLOCK_STRIDE: usize = 16;

impl Budget {
    fn new(opts: &SolveOptions, started: Instant) -> Self {
        Budget {
            max_swaps: opts.max_swaps,
            deadline: opts.deadline.map(|d| started + d),
            swaps: 0,
            evaluated: 0,
            next_check: CLOCK_STRIDE,
            exhausted: false,
        }
    }

    fn fresh() -> Self {
        Budget::new(&SolveOptions::default(), Instant::now())
    }

    fn check_clock(&mut self) -> bool {
        self.next_check = self.evaluated + CLOCK_STRIDE;
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                self.exhausted = true;
            }
        }
        self.exhausted
    }
}

fn stack_value(inst: &AuctionInstance, bids: &[f64], order: &[usize]) -> f64 {
    let mut line = 0;
    let mut total = 0.0;
    for &c in order {
        total += inst.score_at(bids, c, line);
        line += inst.height(c);
    }
    total
}

/// Runs the swap loop in place on `order`. Returns when no 1-for-1 swap
/// improves the objective or the budget runs out.
fn swap_loop(
    inst: &AuctionInstance,
    rank: &[usize],
    order: &mut Vec<usize>,
    log: &mut SearchLog,
    budget: &mut Budget,
) {
    let bids = inst.bids();
    let h = inst.page().h;
    let mut in_slate = vec![false; inst.candidates().len()];
    let mut adv_used = vec![false; inst.advertisers().len()];

    'restart: loop {
        if budget.swaps >= budget.max_swaps {
            budget.exhausted = true;
        }
        if budget.exhausted || budget.check_clock() {
            return;
        }
        let x = stack_value(inst, bids, order);
        budget.evaluated += 1;
        log.record(inst, bids, order);

        for pos in 0..order.len() {
            let a = order.remove(pos);
            in_slate.iter_mut().for_each(|f| *f = false);
            adv_used.iter_mut().for_each(|f| *f = false);
            let mut lines = 0;
            for &c in order.iter() {
                in_slate[c] = true;
                adv_used[inst.advertiser_of(c)] = true;
                lines += inst.height(c);
            }

            for &b in rank {
                if in_slate[b] || adv_used[inst.advertiser_of(b)] || lines + inst.height(b) > h {
                    continue;
                }
                for idx in 0..=order.len() {
                    order.insert(idx, b);
                    let value = stack_value(inst, bids, order);
                    budget.evaluated += 1;
                    log.record(inst, bids, order);
                    if value > x + EPS {
                        budget.swaps += 1;
                        continue 'restart;
                    }
                    order.remove(idx);
                }
                if budget.evaluated >= budget.next_check && budget.check_clock() {
                    order.insert(pos, a);
                    return;
                }
            }
            order.insert(pos, a);
        }
        return;
    }
}

/// 1-for-1 swap local search from `start`, using the default budget.
pub fn local_search(start: &Slate, inst: &AuctionInstance, k: usize, log: &mut SearchLog) -> Slate {
    let rank = rank_order(inst, inst.bids());
    let mut order = start.order();
    debug_assert!(order.len() <= k);
    let mut budget = Budget::fresh();
    swap_loop(inst, &rank, &mut order, log, &mut budget);
    Slate::stack(inst, &order).expect("swaps preserve feasibility")
}

pub fn solve(inst: &AuctionInstance) -> SolveResult {
    solve_with(inst, &SolveOptions::default())
}

pub fn solve_with(inst: &AuctionInstance, opts: &SolveOptions) -> SolveResult {
    let started = Instant::now();
    let mut budget = Budget::new(opts, started);
    let mut log = SearchLog::new();
    log.record(inst, inst.bids(), &[]);

    let adlim = inst.max_ads();
    let rank = rank_order(inst, inst.bids());
    let scan = greedy_scan(inst, &rank, adlim);

    // Greedy starts for every cardinality are cheap; keeping them lets a
    // truncated solve still report a slate for each K.
    let mut per_k: Vec<Vec<usize>> = (1..=adlim)
        .map(|k| scan[..k.min(scan.len())].to_vec())
        .collect();

    let mut previous: Option<(Vec<usize>, Vec<usize>)> = None;
    for k in 1..=adlim {
        if budget.exhausted {
            break;
        }
        let start = per_k[k - 1].clone();
        // A short greedy start repeats the previous cardinality's search exactly.
        if let Some((prev_start, prev_end)) = &previous {
            if *prev_start == start {
                per_k[k - 1] = prev_end.clone();
                continue;
            }
        }
        let mut order = start.clone();
        swap_loop(inst, &rank, &mut order, &mut log, &mut budget);
        per_k[k - 1] = order.clone();
        previous = Some((start, order));
    }

    // K = 0 is the empty slate, chosen when every ad costs more than it earns.
    let mut per_cardinality = BTreeMap::from([(0, Slate::empty())]);
    let mut best = Slate::empty();
    for (k, order) in per_k.into_iter().enumerate() {
        let slate = Slate::stack(inst, &order).expect("search keeps stacks feasible");
        let key = |s: &Slate| (s.objective, s.len(), s.lines(inst));
        if prefer(key(&slate), key(&best)) {
            best = slate.clone();
        }
        per_cardinality.insert(k + 1, slate);
    }
    // The K=1 start always exists, so the chosen slate is in the log even after
    // truncation; this is a no-op otherwise.
    log.record_slate(inst, &best);

    SolveResult {
        best,
        per_cardinality,
        log,
        stats: SolveStats {
            swaps: budget.swaps,
            evaluated: budget.evaluated,
            elapsed: started.elapsed(),
            truncated: budget.exhausted,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{feasible, AdCandidate, Cost, PageConfig};

    fn ad(id: &str, adv: &str, height: usize, bid: f64, density: f64) -> AdCandidate {
        AdCandidate {
            id: id.into(),
            advertiser: adv.into(),
            height,
            bid,
            density,
            cost: Cost::Scalar(0.0),
        }
    }

    fn flat(h: usize, adlim: usize, loc: f64, ads: Vec<AdCandidate>) -> AuctionInstance {
        AuctionInstance::new(
            PageConfig {
                h,
                adlim,
                loc: vec![loc; h],
            },
            ads,
        )
        .unwrap()
    }

    fn fig2() -> AuctionInstance {
        flat(
            7,
            2,
            0.5,
            vec![
                ad("ad5", "A", 5, 2.0, 0.30),
                ad("ad4", "B", 4, 2.0, 0.29),
                ad("ad3", "C", 3, 2.0, 0.28),
            ],
        )
    }

    fn ids(inst: &AuctionInstance, s: &Slate) -> Vec<String> {
        s.placements
            .iter()
            .map(|p| inst.candidate(p.candidate).id.clone())
            .collect()
    }

    #[test]
    fn greedy_blocks_on_trap() {
        let inst = fig2();
        assert_eq!(ids(&inst, &greedy_init(&inst, 2)), ["ad5"]);
    }

    #[test]
    fn greedy_single_candidate() {
        let inst = flat(10, 3, 1.0, vec![ad("a", "x", 3, 1.0, 0.1)]);
        assert_eq!(ids(&inst, &greedy_init(&inst, 3)), ["a"]);
    }

    #[test]
    fn greedy_skips_second_variant() {
        let inst = flat(
            10,
            3,
            0.5,
            vec![
                ad("v1", "A", 3, 2.0, 0.20),
                ad("v2", "A", 4, 2.0, 0.15),
                ad("c", "B", 3, 1.0, 0.10),
            ],
        );
        assert_eq!(ids(&inst, &greedy_init(&inst, 2)), ["v1", "c"]);
    }

    #[test]
    fn greedy_ties_break_by_id() {
        let inst = flat(
            4,
            1,
            1.0,
            vec![ad("b", "y", 1, 1.0, 0.1), ad("a", "x", 1, 1.0, 0.1)],
        );
        assert_eq!(ids(&inst, &greedy_init(&inst, 1)), ["a"]);
    }

    #[test]
    fn local_search_stuck_on_trap() {
        let inst = fig2();
        let mut log = SearchLog::new();
        let start = greedy_init(&inst, 2);
        let out = local_search(&start, &inst, 2, &mut log);
        assert_eq!(ids(&inst, &out), ["ad5"]);
        assert!((out.objective - 1.5).abs() < EPS);
        let objs: Vec<f64> = log.entries().iter().map(|e| e.objective).collect();
        for expected in [1.5, 1.16, 0.84] {
            assert!(objs.iter().any(|o| (o - expected).abs() < 1e-9), "{expected} not probed");
        }
    }

    #[test]
    fn local_search_keeps_optimum_and_logs_neighbors() {
        let inst = flat(
            6,
            1,
            1.0,
            vec![
                ad("a", "x", 2, 3.0, 0.1),
                ad("b", "y", 2, 2.0, 0.1),
                ad("c", "z", 3, 1.0, 0.1),
            ],
        );
        let start = Slate::stack(&inst, &[0]).unwrap();
        let mut log = SearchLog::new();
        let out = local_search(&start, &inst, 1, &mut log);
        assert_eq!(out, start);
        for c in 0..3 {
            assert!(log.contains(&inst, &[c]));
        }
    }

    #[test]
    fn swap_of_bottom_ad_reaches_optimum() {
        // Greedy ranks ignore cost, so it stacks a over b; b's placement cost
        // makes swapping it for c strictly better.
        let inst = flat(
            8,
            2,
            1.0,
            vec![
                ad("a", "x", 4, 1.0, 0.10),
                AdCandidate {
                    cost: Cost::Scalar(0.3),
                    ..ad("b", "y", 4, 1.0, 0.09)
                },
                ad("c", "z", 2, 1.0, 0.085),
                ad("d", "w", 4, 0.1, 0.01),
            ],
        );
        let start = greedy_init(&inst, 2);
        assert_eq!(ids(&inst, &start), ["a", "b"]);
        let mut log = SearchLog::new();
        let out = local_search(&start, &inst, 2, &mut log);
        assert!(out.objective > start.objective);
        let exact = crate::oracle::exact_solve(&inst).unwrap();
        assert!((out.objective - exact.objective).abs() < 1e-9);
    }

    #[test]
    fn solve_trap_and_empty() {
        let inst = fig2();
        let r = solve(&inst);
        assert_eq!(ids(&inst, &r.best), ["ad5"]);
        assert!((r.best.objective - 1.5).abs() < EPS);
        assert!(!r.stats.truncated);
        assert_eq!(r.per_cardinality.len(), 3);

        let empty = flat(5, 3, 1.0, vec![]);
        let r = solve(&empty);
        assert!(r.best.is_empty());
        assert_eq!(r.best.objective, 0.0);
        assert_eq!(r.log.len(), 1);
    }

    #[test]
    fn unprofitable_ads_leave_the_page_empty() {
        let inst = flat(
            6,
            2,
            1.0,
            vec![AdCandidate {
                cost: Cost::Scalar(1.0),
                ..ad("a", "x", 2, 1.0, 0.1)
            }],
        );
        let r = solve(&inst);
        assert!(r.best.is_empty());
        assert!(r.per_cardinality[&1].objective < 0.0);
    }

    #[test]
    fn solve_single_advertiser_shows_best_variant() {
        let inst = AuctionInstance::new(
            PageConfig {
                h: 9,
                adlim: 3,
                loc: (0..9).map(|l| 0.8f64.powi(l)).collect(),
            },
            vec![
                ad("s", "A", 2, 1.5, 0.20),
                ad("m", "A", 4, 1.5, 0.12),
                ad("l", "A", 7, 1.5, 0.08),
            ],
        )
        .unwrap();
        let r = solve(&inst);
        assert_eq!(r.best.len(), 1);
        let brute = (0..3)
            .map(|c| Slate::stack(&inst, &[c]).unwrap().objective)
            .fold(0.0, f64::max);
        assert!((r.best.objective - brute).abs() < EPS);
    }

    #[test]
    fn huge_adlim_is_bounded_by_page_lines() {
        let inst = flat(
            4,
            usize::MAX / 2,
            0.5,
            vec![ad("a", "A", 1, 2.0, 0.3), ad("b", "B", 2, 1.0, 0.3)],
        );
        let r = solve(&inst);
        assert_eq!(r.per_cardinality.len(), 5);
        assert_eq!(r.best.len(), 2);
        assert_eq!(greedy_init(&inst, usize::MAX).len(), 2);
    }

    #[test]
    fn log_entries_are_consistent() {
        let inst = fig2();
        let r = solve(&inst);
        for e in r.log.entries() {
            let sum: f64 = e
                .terms
                .iter()
                .map(|t| t.clicks * inst.bids()[t.advertiser] - t.cost)
                .sum();
            assert!((sum - e.objective).abs() < 1e-9);
        }
        assert!(r.log.contains(&inst, &[]));
        assert!(r.log.contains(&inst, &r.best.order()));
    }

    #[test]
    fn zero_deadline_returns_feasible_truncated() {
        let inst = fig2();
        let r = solve_with(
            &inst,
            &SolveOptions {
                max_swaps: 10_000,
                deadline: Some(Duration::ZERO),
            },
        );
        assert!(r.stats.truncated);
        assert!(feasible(&r.best, &inst));
        assert!((r.best.objective - 1.5).abs() < EPS);
    }

    #[test]
    fn zero_swap_budget_keeps_greedy() {
        let inst = fig2();
        let r = solve_with(
            &inst,
            &SolveOptions {
                max_swaps: 0,
                deadline: None,
            },
        );
        assert!(r.stats.truncated);
        assert_eq!(r.best, greedy_init(&inst, 1));
    }
}
