//! Exact references for testing: exhaustive slate search, bid-space binary
//! search for allocation curves, and externality-based VCG prices.
//!
//! These search the same space as the allocator (gap-free stacks from line
//! 0) and are far too slow for the serving path.

use std::time::Duration;

use crate::allocator::{prefer_within, SearchLog, SolveResult, SolveStats};
use crate::curves::AllocationCurve;
use crate::error::OracleError;
use crate::model::{AuctionInstance, Slate};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOptions {
    /// Refuse instances with more candidates than this.
    pub max_candidates: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { max_candidates: 25 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveOptions {
    /// Upper end of the bid search. Defaults to 10x the largest bid.
    pub bid_hi: Option<f64>,
    /// Breakpoint resolution. Defaults to `1e-6 * bid_hi`.
    pub eps_bid: Option<f64>,
    pub oracle: OracleOptions,
}

fn guard(inst: &AuctionInstance, opts: &OracleOptions) -> Result<(), OracleError> {
    let n = inst.candidates().len();
    if n > opts.max_candidates {
        return Err(OracleError::TooLarge {
            candidates: n,
            limit: opts.max_candidates,
        });
    }
    Ok(())
}

/// Depth-first enumeration of ordered stacks with an optimistic-completion bound.
struct Search<'a> {
    inst: &'a AuctionInstance,
    bids: &'a [f64],
    h: usize,
    adlim: usize,
    /// `best_from[c][line]`: best nonnegative score of `c` starting at or below `line`.
    best_from: Vec<Vec<f64>>,
    order: Vec<usize>,
    used: Vec<bool>,
    best: Vec<usize>,
    best_key: (f64, usize, usize),
    top: Vec<f64>,
    /// Objective differences within `tol` count as ties.
    tol: f64,
}

impl<'a> Search<'a> {
    fn new(inst: &'a AuctionInstance, bids: &'a [f64], tol: f64) -> Self {
        let h = inst.page().h;
        let best_from = (0..inst.candidates().len())
            .map(|c| {
                let starts = h - inst.height(c) + 1;
                let mut v = vec![0.0; h + 1];
                for k in (0..starts).rev() {
                    v[k] = inst.score_at(bids, c, k).max(v[k + 1]);
                }
                v
            })
            .collect();
        Search {
            inst,
            bids,
            h,
            adlim: inst.max_ads(),
            best_from,
            order: Vec::new(),
            used: vec![false; inst.advertisers().len()],
            best: Vec::new(),
            best_key: (0.0, 0, 0),
            top: Vec::new(),
            tol,
        }
    }

    /// Upper bound on what the remaining lines and slots can still add.
    fn bound(&mut self, line: usize) -> f64 {
        let slots = self.adlim - self.order.len();
        let lines_left = (self.h - line) as f64;
        let mut rate: f64 = 0.0;
        self.top.clear();
        for c in 0..self.inst.candidates().len() {
            if self.used[self.inst.advertiser_of(c)] {
                continue;
            }
            let v = self.best_from[c][line];
            if v <= 0.0 {
                continue;
            }
            rate = rate.max(v / self.inst.height(c) as f64);
            if self.top.len() < slots {
                self.top.push(v);
                self.top.sort_unstable_by(|a, b| b.total_cmp(a));
            } else if v > *self.top.last().unwrap() {
                *self.top.last_mut().unwrap() = v;
                self.top.sort_unstable_by(|a, b| b.total_cmp(a));
            }
        }
        let by_slots: f64 = self.top.iter().sum();
        by_slots.min(rate * lines_left)
    }

    fn run(&mut self, line: usize, value: f64) {
        let key = (value, self.order.len(), line);
        if prefer_within(key, self.best_key, self.tol) {
            self.best_key = key;
            self.best.clone_from(&self.order);
        }
        if self.order.len() == self.adlim {
            return;
        }
        let slack = self.tol.max(1e-12 * self.best_key.0.abs());
        if value + self.bound(line) < self.best_key.0 - slack {
            return;
        }
        for c in 0..self.inst.candidates().len() {
            let adv = self.inst.advertiser_of(c);
            let height = self.inst.height(c);
            if self.used[adv] || line + height > self.h {
                continue;
            }
            self.used[adv] = true;
            self.order.push(c);
            self.run(line + height, value + self.inst.score_at(self.bids, c, line));
            self.order.pop();
            self.used[adv] = false;
        }
    }
}

/// Best stack, comparing objectives with the allocator's tolerance.
pub(crate) fn best_order(inst: &AuctionInstance, bids: &[f64]) -> Vec<usize> {
    best_order_within(inst, bids, crate::model::EPS)
}

fn best_order_within(inst: &AuctionInstance, bids: &[f64], tol: f64) -> Vec<usize> {
    let mut search = Search::new(inst, bids, tol);
    search.run(0, 0.0);
    search.best
}

/// Optimal slate over all gap-free stacks.
pub fn exact_solve(inst: &AuctionInstance) -> Result<Slate, OracleError> {
    exact_solve_with(inst, &OracleOptions::default())
}

pub fn exact_solve_with(inst: &AuctionInstance, opts: &OracleOptions) -> Result<Slate, OracleError> {
    guard(inst, opts)?;
    let order = best_order(inst, inst.bids());
    Ok(Slate::stack(inst, &order)?)
}

/// Every feasible stack, the empty one included, as a search log.
pub fn all_slates(inst: &AuctionInstance, opts: &OracleOptions) -> Result<SearchLog, OracleError> {
    guard(inst, opts)?;
    fn walk(inst: &AuctionInstance, order: &mut Vec<usize>, used: &mut [bool], line: usize, log: &mut SearchLog) {
        log.record(inst, inst.bids(), order);
        if order.len() == inst.max_ads() {
            return;
        }
        for c in 0..inst.candidates().len() {
            let adv = inst.advertiser_of(c);
            if used[adv] || line + inst.height(c) > inst.page().h {
                continue;
            }
            used[adv] = true;
            order.push(c);
            walk(inst, order, used, line + inst.height(c), log);
            order.pop();
            used[adv] = false;
        }
    }
    let mut log = SearchLog::new();
    let mut used = vec![false; inst.advertisers().len()];
    walk(inst, &mut Vec::new(), &mut used, 0, &mut log);
    Ok(log)
}

/// A solve result whose log holds every feasible slate, so curves built
/// from it are exact.
pub fn exhaustive_result(inst: &AuctionInstance, opts: &OracleOptions) -> Result<SolveResult, OracleError> {
    let log = all_slates(inst, opts)?;
    let best = exact_solve_with(inst, opts)?;
    Ok(SolveResult {
        per_cardinality: [(best.len().max(1), best.clone())].into_iter().collect(),
        best,
        log,
        stats: SolveStats {
            elapsed: Duration::ZERO,
            ..SolveStats::default()
        },
    })
}

fn default_bid_hi(inst: &AuctionInstance) -> f64 {
    let max_bid = inst.bids().iter().copied().fold(0.0, f64::max);
    if max_bid > 0.0 {
        10.0 * max_bid
    } else {
        1.0
    }
}

/// Exact allocation curve of `advertiser`, found by bisecting the bid range
/// between points where the optimal allocation differs.
pub fn exact_curve(
    inst: &AuctionInstance,
    advertiser: &str,
    opts: &CurveOptions,
) -> Result<AllocationCurve, OracleError> {
    guard(inst, &opts.oracle)?;
    let Some(adv) = inst.advertiser_index(advertiser) else {
        return Ok(AllocationCurve::zero());
    };
    let bid_hi = opts.bid_hi.unwrap_or_else(|| default_bid_hi(inst));
    let eps = opts.eps_bid.unwrap_or(1e-6 * bid_hi);

    let mut bids = inst.bids().to_vec();
    let mut clicks_at = |b: f64| -> f64 {
        bids[adv] = b;
        let order = best_order_within(inst, &bids, 0.0);
        let mut line = 0;
        for c in order {
            if inst.advertiser_of(c) == adv {
                return inst.clicks_at(c, line);
            }
            line += inst.height(c);
        }
        0.0
    };

    let x_lo = clicks_at(0.0);
    let x_hi = clicks_at(bid_hi);
    let mut breaks: Vec<(f64, f64)> = Vec::new();
    // Explicit stack of brackets, processed left to right.
    let mut stack = vec![(0.0, x_lo, bid_hi, x_hi)];
    while let Some((lo, xl, hi, xh)) = stack.pop() {
        if (xh - xl).abs() <= crate::curves::SLOPE_TOL {
            continue;
        }
        if xh < xl {
            return Err(OracleError::NonMonotone {
                advertiser: advertiser.to_owned(),
                bid: hi,
                from: xl,
                to: xh,
            });
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= eps {
            breaks.push((mid, xh));
            continue;
        }
        let xm = clicks_at(mid);
        stack.push((mid, xm, hi, xh));
        stack.push((lo, xl, mid, xm));
    }

    let mut curve = AllocationCurve {
        taus: vec![0.0],
        allocs: vec![x_lo],
    };
    for (tau, x) in breaks {
        // A breakpoint within resolution of zero is a tie at b = 0.
        if curve.taus.len() == 1 && tau <= eps {
            curve.allocs[0] = x;
            continue;
        }
        curve.taus.push(tau);
        curve.allocs.push(x);
    }
    Ok(curve)
}

/// VCG price per click from externalities: the drop in everyone else's
/// welfare caused by `advertiser`, divided by its clicks. The advertiser's own
/// placement cost is borne by others, matching the objective's decomposition.
pub fn vcg_externality(inst: &AuctionInstance, advertiser: &str) -> Result<f64, OracleError> {
    vcg_externality_with(inst, advertiser, &OracleOptions::default())
}

pub fn vcg_externality_with(
    inst: &AuctionInstance,
    advertiser: &str,
    opts: &OracleOptions,
) -> Result<f64, OracleError> {
    let with = exact_solve_with(inst, opts)?;
    let zero = || OracleError::ZeroClicks(advertiser.to_owned());
    let adv = inst.advertiser_index(advertiser).ok_or_else(zero)?;
    let x = with.clicks_of(adv);
    if x <= 0.0 {
        return Err(zero());
    }
    let others_with = with.objective - x * inst.bids()[adv];
    let others_without = exact_solve_with(&inst.without_advertiser(adv), opts)?.objective;
    Ok((others_without - others_with) / x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdCandidate, Cost, PageConfig};

    fn ad(id: &str, adv: &str, height: usize, bid: f64, density: f64, cost: f64) -> AdCandidate {
        AdCandidate {
            id: id.into(),
            advertiser: adv.into(),
            height,
            bid,
            density,
            cost: Cost::Scalar(cost),
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

    /// Plain enumeration of every ordered stack, no pruning.
    fn brute_force(inst: &AuctionInstance) -> f64 {
        all_slates(inst, &OracleOptions::default())
            .unwrap()
            .entries()
            .iter()
            .map(|e| e.objective)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn trap_optimum() {
        let inst = flat(
            7,
            2,
            0.5,
            vec![
                ad("ad5", "A", 5, 2.0, 0.30, 0.0),
                ad("ad4", "B", 4, 2.0, 0.29, 0.0),
                ad("ad3", "C", 3, 2.0, 0.28, 0.0),
            ],
        );
        let s = exact_solve(&inst).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
        let mut ids: Vec<&str> = s
            .placements
            .iter()
            .map(|p| inst.candidate(p.candidate).id.as_str())
            .collect();
        ids.sort();
        assert_eq!(ids, ["ad3", "ad4"]);
    }

    #[test]
    fn single_candidate_shown_iff_profitable() {
        let good = flat(3, 1, 1.0, vec![ad("a", "x", 1, 1.0, 0.2, 0.1)]);
        assert_eq!(exact_solve(&good).unwrap().len(), 1);
        let bad = flat(3, 1, 1.0, vec![ad("a", "x", 1, 1.0, 0.2, 0.3)]);
        assert!(exact_solve(&bad).unwrap().is_empty());
    }

    #[test]
    fn guard_refuses_large_instances() {
        let ads = (0..30)
            .map(|i| ad(&format!("a{i}"), &format!("x{i}"), 1, 1.0, 0.1, 0.0))
            .collect();
        let inst = flat(40, 3, 1.0, ads);
        assert!(matches!(
            exact_solve(&inst),
            Err(OracleError::TooLarge { candidates: 30, limit: 25 })
        ));
    }

    #[test]
    fn pruned_search_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.random_range(1..8);
            let h = rng.random_range(4..14);
            let loc: Vec<f64> = (0..h).map(|l| 0.9f64.powi(l as i32)).collect();
            let ads: Vec<AdCandidate> = (0..n)
                .map(|i| {
                    let adv = rng.random_range(0..n.max(2) - 1);
                    ad(
                        &format!("c{i}"),
                        &format!("a{adv}"),
                        rng.random_range(1..=h.min(6)),
                        1.0 + adv as f64,
                        rng.random_range(0.0..0.1),
                        rng.random_range(0.0..0.05),
                    )
                })
                .collect();
            let inst = AuctionInstance::new(
                PageConfig {
                    h,
                    adlim: rng.random_range(1..5),
                    loc,
                },
                ads,
            )
            .unwrap();
            let exact = exact_solve(&inst).unwrap().objective;
            assert!((exact - brute_force(&inst)).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_curve_single_candidate_step() {
        // Net value 0.4 b - 0.1 turns positive at b = 0.25.
        let inst = flat(3, 1, 1.0, vec![ad("a", "i", 1, 1.0, 0.4, 0.1)]);
        let c = exact_curve(&inst, "i", &CurveOptions::default()).unwrap();
        assert_eq!(c.allocs, vec![0.0, 0.4]);
        assert!((c.taus[1] - 0.25).abs() <= 1e-5);
        assert_eq!(
            exact_curve(&inst, "absent", &CurveOptions::default()).unwrap(),
            AllocationCurve::zero()
        );
    }

    #[test]
    fn zero_cost_ad_allocated_from_zero() {
        let inst = flat(3, 1, 1.0, vec![ad("a", "i", 1, 1.0, 0.4, 0.0)]);
        let c = exact_curve(&inst, "i", &CurveOptions::default()).unwrap();
        assert_eq!(c, AllocationCurve { taus: vec![0.0], allocs: vec![0.4] });
    }

    #[test]
    fn exact_curves_monotone_without_costs() {
        // Tiny bids make a bidder's whole contribution smaller than the
        // allocator's tie tolerance; the curve search must still see it.
        let cfg = crate::harness::GenConfig {
            cost: 0.0,
            n_instances: 12,
            candidates_max: 10,
            ..Default::default()
        };
        for inst in crate::harness::generate(&cfg).unwrap() {
            for adv in inst.advertisers() {
                let c = exact_curve(&inst, adv, &CurveOptions::default()).unwrap();
                assert!(c.is_nondecreasing(), "{adv}: {c:?}");
            }
        }
    }

    #[test]
    fn vcg_examples() {
        let solo = flat(3, 1, 1.0, vec![ad("a", "i", 1, 2.0, 0.3, 0.0)]);
        assert!(vcg_externality(&solo, "i").unwrap().abs() < 1e-12);

        let duel = flat(
            1,
            1,
            1.0,
            vec![ad("a", "i", 1, 3.0, 0.3, 0.0), ad("b", "j", 1, 2.0, 0.3, 0.0)],
        );
        assert!((vcg_externality(&duel, "i").unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            vcg_externality(&duel, "j"),
            Err(OracleError::ZeroClicks(_))
        ));
    }
}
