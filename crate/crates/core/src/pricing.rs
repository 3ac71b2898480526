//! Per-click prices read off an allocation curve at the bidder's own bid.
//!
//! GSP charges the threshold of the current segment, VCG the area above the
//! curve divided by the allocation. The ROI-constrained and α-hybrid schemes
//! interpolate between the two: both equal VCG at α = 0 and approach GSP as α
//! grows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curves::AllocationCurve;
use crate::error::ConfigError;

pub const DEFAULT_ALPHA: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    First,
    Gsp,
    Vcg,
    Roi,
    AlphaHybrid,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::First,
        Scheme::Gsp,
        Scheme::Vcg,
        Scheme::Roi,
        Scheme::AlphaHybrid,
    ];

    pub fn uses_alpha(self) -> bool {
        matches!(self, Scheme::Roi | Scheme::AlphaHybrid)
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "first" => Ok(Scheme::First),
            "gsp" => Ok(Scheme::Gsp),
            "vcg" => Ok(Scheme::Vcg),
            "roi" => Ok(Scheme::Roi),
            "alpha" | "alpha_hybrid" | "alpha-hybrid" => Ok(Scheme::AlphaHybrid),
            _ => Err(ConfigError::UnknownScheme(s.to_owned())),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::First => "first",
            Scheme::Gsp => "gsp",
            Scheme::Vcg => "vcg",
            Scheme::Roi => "roi",
            Scheme::AlphaHybrid => "alpha_hybrid",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub scheme: Scheme,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub per_click: f64,
    pub segment: usize,
    pub clicks: f64,
}

/// Largest `j` with `taus[j] <= bid`.
pub fn segment_of(curve: &AllocationCurve, bid: f64) -> usize {
    curve.taus.partition_point(|&t| t <= bid).saturating_sub(1)
}

pub fn price_first(bid: f64) -> f64 {
    bid
}

pub fn price_gsp(curve: &AllocationCurve, bid: f64) -> f64 {
    let j = segment_of(curve, bid);
    if curve.allocs[j] <= 0.0 {
        return 0.0;
    }
    curve.taus[j]
}

pub fn price_vcg(curve: &AllocationCurve, bid: f64) -> f64 {
    let j = segment_of(curve, bid);
    let x = curve.allocs[j];
    if x <= 0.0 {
        return 0.0;
    }
    let area: f64 = (1..=j)
        .map(|m| curve.taus[m] * (curve.allocs[m] - curve.allocs[m - 1]))
        .sum();
    area / x
}

pub fn price_roi(curve: &AllocationCurve, bid: f64, alpha: f64) -> f64 {
    let j = segment_of(curve, bid);
    if curve.allocs[j] <= 0.0 {
        return 0.0;
    }
    let (taus, xs) = (&curve.taus, &curve.allocs);
    let mut price = 0.0;
    for m in 1..=j {
        if xs[m] <= 0.0 {
            continue;
        }
        let marginal = (xs[m] - xs[m - 1]) * (alpha + 1.0) * taus[m];
        price = taus[m].min((xs[m - 1] * price + marginal) / xs[m]);
    }
    price
}

pub fn price_alpha_hybrid(curve: &AllocationCurve, bid: f64, alpha: f64) -> f64 {
    let j = segment_of(curve, bid);
    let x = curve.allocs[j];
    if x <= 0.0 {
        return 0.0;
    }
    let (taus, xs) = (&curve.taus, &curve.allocs);
    let power = alpha + 1.0;
    // Factor out the largest product so the powers stay in [0, 1].
    let scale = (1..=j).map(|m| taus[m] * xs[m]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return 0.0;
    }
    let sum: f64 = (1..=j)
        .map(|m| {
            let hi = (taus[m] * xs[m] / scale).powf(power);
            let lo = (taus[m] * xs[m - 1] / scale).powf(power);
            hi - lo
        })
        .sum();
    scale * sum.max(0.0).powf(1.0 / power) / x
}

/// Dispatches to `scheme`, clamps to `[0, bid]` and records the segment.
pub fn quote(
    curve: &AllocationCurve,
    bid: f64,
    scheme: Scheme,
    alpha: f64,
) -> Result<PriceQuote, ConfigError> {
    if scheme.uses_alpha() && !(alpha.is_finite() && alpha >= 0.0) {
        return Err(ConfigError::BadAlpha(alpha));
    }
    let raw = match scheme {
        Scheme::First => price_first(bid),
        Scheme::Gsp => price_gsp(curve, bid),
        Scheme::Vcg => price_vcg(curve, bid),
        Scheme::Roi => price_roi(curve, bid, alpha),
        Scheme::AlphaHybrid => price_alpha_hybrid(curve, bid, alpha),
    };
    let segment = segment_of(curve, bid);
    Ok(PriceQuote {
        scheme,
        alpha: scheme.uses_alpha().then_some(alpha),
        per_click: raw.clamp(0.0, bid.max(0.0)),
        segment,
        clicks: curve.allocs[segment],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(taus: &[f64], allocs: &[f64]) -> AllocationCurve {
        AllocationCurve {
            taus: taus.to_vec(),
            allocs: allocs.to_vec(),
        }
    }

    fn near(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn segments() {
        let c = curve(&[0.0, 1.0, 3.0], &[0.0, 0.5, 1.0]);
        assert_eq!(segment_of(&c, 0.5), 0);
        assert_eq!(segment_of(&c, 1.0), 1);
        assert_eq!(segment_of(&c, 10.0), 2);
        assert_eq!(segment_of(&c, 0.0), 0);
    }

    #[test]
    fn first_price() {
        assert_eq!(price_first(0.0), 0.0);
        assert_eq!(price_first(2.5), 2.5);
    }

    #[test]
    fn gsp_examples() {
        let c = curve(&[0.0, 1.0, 3.0], &[0.0, 0.5, 1.0]);
        assert_eq!(price_gsp(&c, 2.0), 1.0);
        assert_eq!(price_gsp(&c, 0.7), 0.0);
        assert_eq!(price_gsp(&c, 3.0), 3.0);
    }

    #[test]
    fn vcg_examples() {
        let c = curve(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.0]);
        assert!(near(price_vcg(&c, 5.0), 1.5));
        let single = curve(&[0.0, 0.7], &[0.0, 0.3]);
        assert!(near(price_vcg(&single, 0.9), 0.7));
        assert_eq!(price_vcg(&single, 0.2), 0.0);
    }

    #[test]
    fn roi_examples() {
        let c = curve(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.0]);
        assert!(near(price_roi(&c, 1.5, 0.0), 1.0));
        assert!(near(price_roi(&c, 5.0, 0.0), 1.5));
        assert!(near(price_roi(&c, 5.0, 1e9), price_gsp(&c, 5.0)));

        // A tiny step that GSP would double the price for.
        let tiny = curve(&[0.0, 1.0, 2.0], &[0.0, 0.50, 0.51]);
        let p = price_roi(&tiny, 2.5, 1.0);
        assert!(near(p, 0.54 / 0.51), "{p}");
        assert_eq!(price_gsp(&tiny, 2.5), 2.0);
    }

    #[test]
    fn alpha_hybrid_examples() {
        let c = curve(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.0]);
        assert!(near(price_alpha_hybrid(&c, 5.0, 0.0), 1.5));
        assert!((price_alpha_hybrid(&c, 5.0, 1e3) - 2.0).abs() < 1e-4);
        let single = curve(&[0.0, 0.7], &[0.0, 0.3]);
        for alpha in [0.0, 0.5, 3.0, 1e3, 1e6] {
            assert!(near(price_alpha_hybrid(&single, 1.0, alpha), 0.7));
        }
    }

    #[test]
    fn quote_dispatch_and_clamp() {
        let c = curve(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.0]);
        let q = quote(&c, 2.5, Scheme::Gsp, 0.0).unwrap();
        assert_eq!((q.per_click, q.segment, q.clicks, q.alpha), (2.0, 2, 1.0, None));
        let q = quote(&c, 2.5, Scheme::Vcg, 0.0).unwrap();
        assert!(near(q.per_click, 1.5));
        let q = quote(&c, 2.5, Scheme::Roi, 0.0).unwrap();
        assert_eq!(q.alpha, Some(0.0));
        assert!(near(q.per_click, 1.5));
        assert!(quote(&c, 2.5, Scheme::AlphaHybrid, -1.0).is_err());
        assert_eq!(quote(&c, 0.5, Scheme::First, 0.0).unwrap().per_click, 0.5);
        assert!("bogus".parse::<Scheme>().is_err());
        assert_eq!("alpha".parse::<Scheme>().unwrap(), Scheme::AlphaHybrid);
    }

    #[test]
    fn positive_allocation_at_zero_bid() {
        // Clicks won for free cost nothing under every curve-based scheme.
        let c = curve(&[0.0, 2.0], &[0.2, 0.6]);
        assert_eq!(price_gsp(&c, 1.0), 0.0);
        assert_eq!(price_vcg(&c, 1.0), 0.0);
        assert!(near(price_vcg(&c, 3.0), 2.0 * 0.4 / 0.6));
        assert!(near(price_roi(&c, 3.0, 0.0), price_vcg(&c, 3.0)));
        assert!(near(price_alpha_hybrid(&c, 3.0, 0.0), price_vcg(&c, 3.0)));
    }

    fn arb_curve() -> impl Strategy<Value = AllocationCurve> {
        prop::collection::vec((0.01f64..2.0, 0.01f64..0.2), 1..8).prop_map(|steps| {
            let mut taus = vec![0.0];
            let mut allocs = vec![0.0];
            for (dt, dx) in steps {
                taus.push(taus.last().unwrap() + dt);
                allocs.push(allocs.last().unwrap() + dx);
            }
            AllocationCurve { taus, allocs }
        })
    }

    proptest! {
        #[test]
        fn scheme_ordering(c in arb_curve(), bid in 0.0f64..20.0, alpha in 0.0f64..20.0) {
            let vcg = price_vcg(&c, bid);
            let gsp = price_gsp(&c, bid);
            let roi = price_roi(&c, bid, alpha);
            let hyb = price_alpha_hybrid(&c, bid, alpha);
            prop_assert!(vcg <= roi + 1e-9 && roi <= gsp + 1e-9);
            prop_assert!(vcg <= hyb + 1e-9 && hyb <= gsp + 1e-9);
            prop_assert!(gsp <= bid);
        }

        #[test]
        fn prices_grow_with_bid(c in arb_curve(), b1 in 0.0f64..20.0, b2 in 0.0f64..20.0, alpha in 0.0f64..5.0) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(price_gsp(&c, lo) <= price_gsp(&c, hi));
            prop_assert!(price_vcg(&c, lo) <= price_vcg(&c, hi) + 1e-9);
            prop_assert!(price_roi(&c, lo, alpha) <= price_roi(&c, hi, alpha) + 1e-9);
            prop_assert!(price_alpha_hybrid(&c, lo, alpha) <= price_alpha_hybrid(&c, hi, alpha) + 1e-9);
        }

        #[test]
        fn hybrids_grow_with_alpha(c in arb_curve(), bid in 0.0f64..20.0, steps in prop::collection::vec(0.0f64..4.0, 1..8)) {
            let mut alpha = 0.0;
            let (mut roi, mut hyb) = (price_roi(&c, bid, 0.0), price_alpha_hybrid(&c, bid, 0.0));
            for step in steps {
                alpha += step;
                let (r, h) = (price_roi(&c, bid, alpha), price_alpha_hybrid(&c, bid, alpha));
                prop_assert!(r >= roi - 1e-9, "roi at alpha {}: {} < {}", alpha, r, roi);
                prop_assert!(h >= hyb - 1e-9, "hybrid at alpha {}: {} < {}", alpha, h, hyb);
                (roi, hyb) = (r, h);
            }
        }
    }
}
