//! Allocation-curve estimation from a search log.
//!
//! Holding the other bids fixed, each logged slate contributes a line
//! `z + x * b` in the bidder's own bid `b`. The upper envelope of those lines
//! is the best objective reachable within the log, and its slope at `b` is the
//! estimated click allocation. The envelope is convex, so the estimated
//! allocation is nondecreasing no matter what the log contains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::allocator::{SearchLog, SolveResult};
use crate::error::CurveError;
use crate::model::AuctionInstance;
use crate::pricing::segment_of;

/// Slopes closer than this are treated as the same allocation.
pub const SLOPE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveLine {
    /// Click probability of the bidder in the slate.
    pub slope: f64,
    /// Objective of the slate with the bidder's own value term removed.
    pub intercept: f64,
}

impl ObjectiveLine {
    pub fn at(&self, bid: f64) -> f64 {
        self.intercept + self.slope * bid
    }
}

/// Stepped allocation curve: `allocs[j]` holds for `taus[j] <= b < taus[j + 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationCurve {
    pub taus: Vec<f64>,
    pub allocs: Vec<f64>,
}

impl AllocationCurve {
    pub fn zero() -> Self {
        AllocationCurve {
            taus: vec![0.0],
            allocs: vec![0.0],
        }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn alloc_at(&self, bid: f64) -> f64 {
        self.allocs[segment_of(self, bid)]
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.allocs.windows(2).all(|w| w[0] <= w[1]) && self.taus.windows(2).all(|w| w[0] <= w[1])
    }

    /// Drops breakpoints above `bid_hi`.
    pub fn truncated(&self, bid_hi: f64) -> AllocationCurve {
        let keep = self.taus.iter().take_while(|&&t| t <= bid_hi).count().max(1);
        AllocationCurve {
            taus: self.taus[..keep].to_vec(),
            allocs: self.allocs[..keep].to_vec(),
        }
    }

    /// Same step structure, with breakpoints within `tau_tol` and allocations
    /// within `alloc_tol`.
    pub fn matches(&self, other: &AllocationCurve, tau_tol: f64, alloc_tol: f64) -> bool {
        self.len() == other.len()
            && self
                .taus
                .iter()
                .zip(&other.taus)
                .all(|(a, b)| (a - b).abs() <= tau_tol)
            && self
                .allocs
                .iter()
                .zip(&other.allocs)
                .all(|(a, b)| (a - b).abs() <= alloc_tol)
    }
}

/// One line per logged slate for `advertiser`, under the given bids.
pub fn lines_for(log: &SearchLog, advertiser: usize, bids: &[f64]) -> Vec<ObjectiveLine> {
    log.entries()
        .iter()
        .map(|e| {
            let mut slope = 0.0;
            let mut intercept = 0.0;
            for t in &e.terms {
                if t.advertiser == advertiser {
                    slope = t.clicks;
                    intercept -= t.cost;
                } else {
                    intercept += t.clicks * bids[t.advertiser] - t.cost;
                }
            }
            ObjectiveLine { slope, intercept }
        })
        .collect()
}

/// Envelope lines over `b >= 0`, each paired with the bid where it takes over.
fn envelope(lines: &[ObjectiveLine]) -> Vec<(ObjectiveLine, f64)> {
    let Some(first) = lines.iter().copied().reduce(|best, l| {
        if l.intercept > best.intercept || (l.intercept == best.intercept && l.slope > best.slope) {
            l
        } else {
            best
        }
    }) else {
        return Vec::new();
    };

    let mut sorted: Vec<ObjectiveLine> = lines
        .iter()
        .copied()
        .filter(|l| l.slope > first.slope + SLOPE_TOL)
        .collect();
    sorted.sort_by(|a, b| a.slope.total_cmp(&b.slope));
    // Slopes within SLOPE_TOL of a group's first slope are one slope; keep the
    // largest intercept.
    let mut steeper: Vec<ObjectiveLine> = Vec::with_capacity(sorted.len());
    let mut group_slope = f64::NEG_INFINITY;
    for line in sorted {
        match steeper.last_mut() {
            Some(top) if line.slope - group_slope <= SLOPE_TOL => {
                if line.intercept > top.intercept {
                    *top = line;
                }
            }
            _ => {
                group_slope = line.slope;
                steeper.push(line);
            }
        }
    }

    let mut hull: Vec<(ObjectiveLine, f64)> = vec![(first, 0.0)];
    for line in steeper {
        loop {
            let (top, top_tau) = *hull.last().unwrap();
            let cross = (top.intercept - line.intercept) / (line.slope - top.slope);
            if cross <= top_tau {
                if hull.len() > 1 {
                    hull.pop();
                    continue;
                }
                // Overtakes the starting line at b = 0.
                hull[0] = (line, 0.0);
            } else {
                hull.push((line, cross));
            }
            break;
        }
    }
    hull
}

/// Convex upper envelope over `b >= 0`, read off as a stepped curve.
pub fn upper_envelope(lines: &[ObjectiveLine]) -> AllocationCurve {
    let hull = envelope(lines);
    if hull.is_empty() {
        return AllocationCurve::zero();
    }
    AllocationCurve {
        taus: hull.iter().map(|(_, t)| *t).collect(),
        allocs: hull.iter().map(|(l, _)| l.slope).collect(),
    }
}

/// Pointwise maximum of the lines at `bid`.
pub fn envelope_value(lines: &[ObjectiveLine], bid: f64) -> f64 {
    lines
        .iter()
        .map(|l| l.at(bid))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Estimated allocation curve of `advertiser`, checked against the chosen slate.
pub fn curve_for(
    result: &SolveResult,
    inst: &AuctionInstance,
    advertiser: &str,
) -> Result<AllocationCurve, CurveError> {
    let Some(adv) = inst.advertiser_index(advertiser) else {
        return Ok(AllocationCurve::zero());
    };
    curve_for_index(result, inst, adv)
}

pub(crate) fn curve_for_index(
    result: &SolveResult,
    inst: &AuctionInstance,
    adv: usize,
) -> Result<AllocationCurve, CurveError> {
    let bids = inst.bids();
    let bid = bids[adv];
    let lines = lines_for(&result.log, adv, bids);
    let hull = envelope(&lines);
    let curve = AllocationCurve {
        taus: hull.iter().map(|(_, t)| *t).collect(),
        allocs: hull.iter().map(|(l, _)| l.slope).collect(),
    };

    let inconsistent = |detail: String| CurveError::Inconsistent {
        advertiser: inst.advertisers()[adv].clone(),
        bid,
        detail,
    };
    let chosen_x = result.best.clicks_of(adv);
    let seg = segment_of(&curve, bid);
    let phi = hull[seg].0.at(bid);
    let tol = 1e-8 * (1.0 + phi.abs());
    if (phi - result.best.objective).abs() > tol {
        return Err(inconsistent(format!(
            "envelope value {phi} differs from chosen objective {}",
            result.best.objective
        )));
    }
    let dx = (curve.allocs[seg] - chosen_x).abs();
    if dx > SLOPE_TOL {
        // Only a tie at a breakpoint can leave the chosen slope off the envelope.
        let reach = 2.0 * tol / dx;
        if !curve.taus.iter().any(|t| (t - bid).abs() <= reach) {
            return Err(inconsistent(format!(
                "envelope allocation {} differs from chosen allocation {chosen_x}",
                curve.allocs[seg]
            )));
        }
    }
    Ok(curve)
}

/// Curves for every advertiser in the instance, keyed by advertiser id.
pub fn curves_for_all(
    result: &SolveResult,
    inst: &AuctionInstance,
) -> Result<BTreeMap<String, AllocationCurve>, CurveError> {
    (0..inst.advertisers().len())
        .map(|adv| Ok((inst.advertisers()[adv].clone(), curve_for_index(result, inst, adv)?)))
        .collect()
}
