#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use slate_auction::model::{AdCandidate, AuctionInstance, Cost, PageConfig};
use slate_auction::AllocationCurve;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[derive(Clone, Copy, Debug)]
pub struct SmallShape {
    pub max_candidates: usize,
    pub max_h: usize,
    pub max_adlim: usize,
    /// Location clickability never increases down the page.
    pub decreasing_loc: bool,
    /// Allow per-line cost vectors.
    pub per_line_costs: bool,
}

impl Default for SmallShape {
    fn default() -> Self {
        SmallShape {
            max_candidates: 6,
            max_h: 10,
            max_adlim: 3,
            decreasing_loc: false,
            per_line_costs: true,
        }
    }
}

/// A random instance small enough for exhaustive search.
pub fn small_instance(rng: &mut ChaCha8Rng, shape: SmallShape) -> AuctionInstance {
    let h = rng.random_range(3..=shape.max_h);
    let adlim = rng.random_range(1..=shape.max_adlim);
    let mut loc: Vec<f64> = (0..h).map(|_| rng.random_range(0.05..1.0)).collect();
    if shape.decreasing_loc {
        loc.sort_by(|a, b| b.total_cmp(a));
    }
    let n_adv = rng.random_range(1..=4);
    let bids: Vec<f64> = (0..n_adv)
        .map(|_| (rng.random_range(0.1f64..5.0) * 1e4).round() / 1e4)
        .collect();
    let n = rng.random_range(1..=shape.max_candidates);
    let candidates = (0..n)
        .map(|i| {
            let adv = rng.random_range(0..n_adv);
            let height = rng.random_range(1..=h.min(4));
            let cost = if shape.per_line_costs && rng.random_bool(0.3) {
                Cost::PerLine((0..h).map(|_| rng.random_range(0.0..0.05)).collect())
            } else if rng.random_bool(0.3) {
                Cost::Scalar(0.0)
            } else {
                Cost::Scalar(rng.random_range(0.0..0.05))
            };
            AdCandidate {
                id: format!("c{i}"),
                advertiser: format!("adv{adv}"),
                height,
                bid: bids[adv],
                density: rng.random_range(0.01..0.2),
                cost,
            }
        })
        .collect();
    AuctionInstance::new(PageConfig { h, adlim, loc }, candidates).expect("valid random instance")
}

/// A random nondecreasing step curve whose allocations grow by at least 1%
/// per step.
pub fn random_curve(rng: &mut ChaCha8Rng) -> AllocationCurve {
    let k = rng.random_range(1..=8);
    let mut taus = vec![0.0];
    let mut allocs = vec![if rng.random_bool(0.6) {
        0.0
    } else {
        rng.random_range(0.001..0.2)
    }];
    for _ in 1..k {
        let tau = taus.last().unwrap() + rng.random_range(0.01..2.0);
        let prev: f64 = *allocs.last().unwrap();
        let x = if prev == 0.0 {
            rng.random_range(0.001..0.2)
        } else {
            prev * (1.0 + rng.random_range(0.01..1.0))
        };
        taus.push(tau);
        allocs.push(x);
    }
    AllocationCurve { taus, allocs }
}
