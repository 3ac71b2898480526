//! Seeded synthetic corpora.
//!
//! Advertisers draw one lognormal bid and a quality factor, then contribute
//! one to `max_variants` ad variants of distinct heights. A variant of
//! height `h` has per-line density `base_density * quality * h^(gamma - 1)`,
//! so total clickability grows like `h^gamma`: taller ads earn more clicks but
//! fewer per line when `gamma < 1`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::{AdCandidate, AuctionInstance, Cost, PageConfig};

/// Smallest height in `height_weights`.
pub const MIN_HEIGHT: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_instances: usize,
    pub candidates_min: usize,
    pub candidates_max: usize,
    pub max_variants: usize,
    /// Relative weight of heights 3, 4, ..., 8.
    pub height_weights: [f64; 6],
    pub bid_mu: f64,
    pub bid_sigma: f64,
    pub base_density: f64,
    pub quality_sigma: f64,
    /// Exponent of total clickability in height; below 1 means diminishing returns.
    pub height_exponent: f64,
    /// Location clickability of line `l` is `loc_decay^l`.
    pub loc_decay: f64,
    pub cost: f64,
    pub h: usize,
    pub adlim: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            n_instances: 100,
            candidates_min: 4,
            candidates_max: 15,
            max_variants: 3,
            height_weights: [3.0, 3.0, 2.0, 2.0, 1.0, 1.0],
            bid_mu: 0.0,
            bid_sigma: 0.6,
            base_density: 0.03,
            quality_sigma: 0.4,
            height_exponent: 0.6,
            loc_decay: 0.92,
            cost: 0.01,
            h: 18,
            adlim: 5,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Generator(m.to_owned()));
        if self.candidates_min > self.candidates_max {
            return fail("candidates_min exceeds candidates_max");
        }
        if self.max_variants == 0 {
            return fail("max_variants must be at least 1");
        }
        if !(self.bid_sigma > 0.0 && self.bid_sigma.is_finite()) || !self.bid_mu.is_finite() {
            return fail("bid lognormal needs finite mu and sigma > 0");
        }
        if !(self.quality_sigma > 0.0 && self.quality_sigma.is_finite()) {
            return fail("quality_sigma must be > 0");
        }
        if !(self.base_density >= 0.0 && self.base_density.is_finite()) {
            return fail("base_density must be nonnegative");
        }
        if !(self.height_exponent > 0.0 && self.height_exponent <= 1.0) {
            return fail("height_exponent must lie in (0, 1]");
        }
        if !(self.loc_decay > 0.0 && self.loc_decay <= 1.0) {
            return fail("loc_decay must lie in (0, 1]");
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return fail("cost must be nonnegative");
        }
        if self.h == 0 || self.adlim == 0 {
            return fail("h and adlim must be positive");
        }
        if self.height_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return fail("height weights must be nonnegative");
        }
        let usable: f64 = self
            .height_weights
            .iter()
            .enumerate()
            .filter(|(i, _)| MIN_HEIGHT + i <= self.h)
            .map(|(_, w)| w)
            .sum();
        if usable <= 0.0 {
            return fail("no positive-weight height fits on the page");
        }
        Ok(())
    }
}

/// Generates `cfg.n_instances` instances; the same config always yields the
/// same corpus.
pub fn generate(cfg: &GenConfig) -> Result<Vec<AuctionInstance>, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let heights: Vec<usize> = (0..cfg.height_weights.len())
        .map(|i| MIN_HEIGHT + i)
        .filter(|&h| h <= cfg.h)
        .collect();
    let weights = WeightedIndex::new(&cfg.height_weights[..heights.len()])
        .map_err(|e| ConfigError::Generator(e.to_string()))?;
    let bids = LogNormal::new(cfg.bid_mu, cfg.bid_sigma)
        .map_err(|e| ConfigError::Generator(e.to_string()))?;
    let quality = LogNormal::new(0.0, cfg.quality_sigma)
        .map_err(|e| ConfigError::Generator(e.to_string()))?;
    let loc: Vec<f64> = (0..cfg.h).map(|l| cfg.loc_decay.powi(l as i32)).collect();

    (0..cfg.n_instances)
        .map(|_| {
            let target = rng.random_range(cfg.candidates_min..=cfg.candidates_max);
            let mut candidates = Vec::with_capacity(target);
            let mut adv = 0;
            while candidates.len() < target {
                let bid = round6(bids.sample(&mut rng));
                let q = quality.sample(&mut rng);
                let variants = rng
                    .random_range(1..=cfg.max_variants)
                    .min(target - candidates.len())
                    .min(heights.len());
                let mut chosen: Vec<usize> = Vec::with_capacity(variants);
                while chosen.len() < variants {
                    let h = heights[weights.sample(&mut rng)];
                    if !chosen.contains(&h) {
                        chosen.push(h);
                    }
                }
                chosen.shuffle(&mut rng);
                for (v, h) in chosen.into_iter().enumerate() {
                    let density =
                        cfg.base_density * q * (h as f64).powf(cfg.height_exponent - 1.0);
                    candidates.push(AdCandidate {
                        id: format!("a{adv}v{v}"),
                        advertiser: format!("a{adv}"),
                        height: h,
                        bid,
                        density: round6(density),
                        cost: Cost::Scalar(cfg.cost),
                    });
                }
                adv += 1;
            }
            AuctionInstance::new(
                PageConfig {
                    h: cfg.h,
                    adlim: cfg.adlim,
                    loc: loc.clone(),
                },
                candidates,
            )
            .map_err(|e| ConfigError::Generator(e.to_string()))
        })
        .collect()
}

/// Six decimals keep corpus files readable.
fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
