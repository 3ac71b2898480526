//! Page, candidate and slate types, the click model, and objective evaluation.
//!
//! Every slate is a gap-free stack starting at line 0: the start line of the
//! j-th placement is the summed height of the placements above it. The click
//! probability of candidate `a` starting at line `k` is
//! `density(a) * sum(loc[k..k + height(a)])`, clamped to 1.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Absolute tolerance for currency and probability comparisons.
pub const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageConfig {
    /// Total ad lines available.
    pub h: usize,
    /// Maximum number of ads on one slate.
    pub adlim: usize,
    /// Location clickability per line, index 0 is the top line.
    pub loc: Vec<f64>,
}

impl PageConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.h == 0 {
            return Err(ModelError::EmptyPage);
        }
        if self.adlim == 0 {
            return Err(ModelError::ZeroAdlim);
        }
        if self.loc.len() != self.h {
            return Err(ModelError::LocLength {
                expected: self.h,
                got: self.loc.len(),
            });
        }
        for (line, &value) in self.loc.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::BadLoc { line, value });
            }
        }
        Ok(())
    }
}

/// Placement cost `c_a(k)`: one constant for every start line, or one value per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cost {
    Scalar(f64),
    PerLine(Vec<f64>),
}

impl Default for Cost {
    fn default() -> Self {
        Cost::Scalar(0.0)
    }
}

impl Cost {
    pub fn at(&self, start: usize) -> f64 {
        match self {
            Cost::Scalar(c) => *c,
            Cost::PerLine(v) => v[start],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdCandidate {
    pub id: String,
    pub advertiser: String,
    pub height: usize,
    /// Value per click claimed by the advertiser.
    pub bid: f64,
    /// Click probability per unit of location clickability.
    pub density: f64,
    #[serde(default)]
    pub cost: Cost,
}

impl AdCandidate {
    fn validate(&self, page: &PageConfig) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::BadCandidate {
            id: self.id.clone(),
            reason,
        };
        if self.height == 0 {
            return Err(bad("height must be at least 1".into()));
        }
        if self.height > page.h {
            return Err(bad(format!(
                "height {} exceeds the {}-line page",
                self.height, page.h
            )));
        }
        if !(self.bid.is_finite() && self.bid >= 0.0) {
            return Err(bad(format!("bid {} must be nonnegative", self.bid)));
        }
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(bad(format!("density {} must be nonnegative", self.density)));
        }
        match &self.cost {
            Cost::Scalar(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(bad(format!("cost {c} must be nonnegative")));
                }
            }
            Cost::PerLine(v) => {
                if v.len() != page.h {
                    return Err(bad(format!(
                        "cost vector has {} entries, expected {}",
                        v.len(),
                        page.h
                    )));
                }
                if let Some(c) = v.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                    return Err(bad(format!("cost {c} must be nonnegative")));
                }
            }
        }
        Ok(())
    }
}

/// Click probability of `ad` placed with its first line at `start`.
pub fn click_prob(ad: &AdCandidate, start: usize, page: &PageConfig) -> Result<f64, ModelError> {
    if ad.height > page.h || start > page.h - ad.height {
        return Err(ModelError::PlacementInfeasible {
            id: ad.id.clone(),
            height: ad.height,
            start,
            lines: page.h,
        });
    }
    let reach: f64 = page.loc[start..start + ad.height].iter().sum();
    let p = ad.density * reach;
    if p > 1.0 {
        log::warn!(
            "click probability {p} of `{}` at line {start} clamped to 1",
            ad.id
        );
        return Ok(1.0);
    }
    Ok(p)
}

/// The on-disk shape of an instance, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub page: PageConfig,
    pub candidates: Vec<AdCandidate>,
}

/// A validated auction: page, candidate set, and per-placement tables.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct AuctionInstance {
    page: PageConfig,
    candidates: Vec<AdCandidate>,
    advertisers: Vec<String>,
    advertiser_of: Vec<usize>,
    bids: Vec<f64>,
    /// `clicks[c][k]` for every feasible start line `k` of candidate `c`.
    clicks: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
}

impl PartialEq for AuctionInstance {
    fn eq(&self, other: &Self) -> bool {
        self.page == other.page && self.candidates == other.candidates
    }
}

impl TryFrom<RawInstance> for AuctionInstance {
    type Error = ModelError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        AuctionInstance::new(raw.page, raw.candidates)
    }
}

impl From<AuctionInstance> for RawInstance {
    fn from(inst: AuctionInstance) -> Self {
        RawInstance {
            page: inst.page,
            candidates: inst.candidates,
        }
    }
}

impl AuctionInstance {
    pub fn new(page: PageConfig, candidates: Vec<AdCandidate>) -> Result<Self, ModelError> {
        page.validate()?;
        let mut ids = HashMap::with_capacity(candidates.len());
        for c in &candidates {
            c.validate(&page)?;
            if ids.insert(c.id.as_str(), ()).is_some() {
                return Err(ModelError::DuplicateId(c.id.clone()));
            }
        }

        let mut advertisers: Vec<String> = candidates.iter().map(|c| c.advertiser.clone()).collect();
        advertisers.sort();
        advertisers.dedup();
        let index: HashMap<&str, usize> = advertisers
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let advertiser_of: Vec<usize> = candidates
            .iter()
            .map(|c| index[c.advertiser.as_str()])
            .collect();

        let mut bids = vec![f64::NAN; advertisers.len()];
        for (c, &adv) in candidates.iter().zip(&advertiser_of) {
            if bids[adv].is_nan() {
                bids[adv] = c.bid;
            } else if bids[adv] != c.bid {
                return Err(ModelError::BidMismatch {
                    advertiser: c.advertiser.clone(),
                    first: bids[adv],
                    second: c.bid,
                });
            }
        }

        let mut clicks = Vec::with_capacity(candidates.len());
        let mut costs = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let starts = page.h - c.height + 1;
            let mut p = Vec::with_capacity(starts);
            let mut q = Vec::with_capacity(starts);
            for k in 0..starts {
                p.push(click_prob(c, k, &page)?);
                q.push(c.cost.at(k));
            }
            clicks.push(p);
            costs.push(q);
        }

        Ok(AuctionInstance {
            page,
            candidates,
            advertisers,
            advertiser_of,
            bids,
            clicks,
            costs,
        })
    }

    pub fn page(&self) -> &PageConfig {
        &self.page
    }

    pub fn candidates(&self) -> &[AdCandidate] {
        &self.candidates
    }

    pub fn candidate(&self, c: usize) -> &AdCandidate {
        &self.candidates[c]
    }

    /// Distinct advertiser ids, sorted. Advertiser indices refer to this list.
    pub fn advertisers(&self) -> &[String] {
        &self.advertisers
    }

    pub fn advertiser_index(&self, id: &str) -> Option<usize> {
        self.advertisers.binary_search_by(|a| a.as_str().cmp(id)).ok()
    }

    pub fn advertiser_of(&self, c: usize) -> usize {
        self.advertiser_of[c]
    }

    /// Bid of every advertiser, indexed like [`Self::advertisers`].
    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn height(&self, c: usize) -> usize {
        self.candidates[c].height
    }

    /// Precomputed `p_c(start)`. `start` must be feasible.
    pub fn clicks_at(&self, c: usize, start: usize) -> f64 {
        self.clicks[c][start]
    }

    pub fn cost_at(&self, c: usize, start: usize) -> f64 {
        self.costs[c][start]
    }

    /// `bid * p_c(start) - c_c(start)` under the given advertiser bids.
    pub fn score_at(&self, bids: &[f64], c: usize, start: usize) -> f64 {
        bids[self.advertiser_of[c]] * self.clicks[c][start] - self.costs[c][start]
    }

    /// Copy of the instance with one advertiser's bid replaced on all its candidates.
    pub fn with_bid(&self, advertiser: usize, bid: f64) -> AuctionInstance {
        let mut out = self.clone();
        out.bids[advertiser] = bid;
        for (c, cand) in out.candidates.iter_mut().enumerate() {
            if out.advertiser_of[c] == advertiser {
                cand.bid = bid;
            }
        }
        out
    }

    /// The instance with every candidate of `advertiser` removed.
    pub fn without_advertiser(&self, advertiser: usize) -> AuctionInstance {
        let candidates = self
            .candidates
            .iter()
            .zip(&self.advertiser_of)
            .filter(|(_, &a)| a != advertiser)
            .map(|(c, _)| c.clone())
            .collect();
        AuctionInstance::new(self.page.clone(), candidates)
            .expect("subset of a valid instance is valid")
    }

    /// Largest slate size that can occur: every ad takes at least one line.
    pub fn max_ads(&self) -> usize {
        self.page.adlim.min(self.page.h)
    }

    /// Copy with a different ad-count limit.
    pub fn with_adlim(&self, adlim: usize) -> Result<AuctionInstance, ModelError> {
        if adlim == 0 {
            return Err(ModelError::ZeroAdlim);
        }
        let mut out = self.clone();
        out.page.adlim = adlim;
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    /// Index into the instance's candidate list.
    pub candidate: usize,
    /// First line covered by the ad.
    pub start: usize,
}

/// An ordered stack of placed candidates with cached objective and clicks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Slate {
    pub placements: Vec<Placement>,
    pub objective: f64,
    /// Click probability per advertiser index; absent means zero.
    pub clicks: BTreeMap<usize, f64>,
}

impl Slate {
    pub fn empty() -> Self {
        Slate::default()
    }

    /// Stacks `order` top to bottom from line 0, failing on infeasibility.
    pub fn stack(inst: &AuctionInstance, order: &[usize]) -> Result<Slate, ModelError> {
        Slate::stack_with_bids(inst, inst.bids(), order)
    }

    pub(crate) fn stack_with_bids(
        inst: &AuctionInstance,
        bids: &[f64],
        order: &[usize],
    ) -> Result<Slate, ModelError> {
        let mut placements = Vec::with_capacity(order.len());
        let mut line = 0;
        for &c in order {
            if c >= inst.candidates.len() {
                return Err(ModelError::InfeasibleSlate(format!("no candidate #{c}")));
            }
            placements.push(Placement {
                candidate: c,
                start: line,
            });
            line += inst.height(c);
        }
        let mut slate = Slate {
            placements,
            ..Slate::default()
        };
        check_feasible(&slate, inst)?;
        for p in &slate.placements {
            slate
                .clicks
                .insert(inst.advertiser_of(p.candidate), inst.clicks_at(p.candidate, p.start));
            slate.objective += inst.score_at(bids, p.candidate, p.start);
        }
        Ok(slate)
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn order(&self) -> Vec<usize> {
        self.placements.iter().map(|p| p.candidate).collect()
    }

    pub fn lines(&self, inst: &AuctionInstance) -> usize {
        self.placements.iter().map(|p| inst.height(p.candidate)).sum()
    }

    pub fn clicks_of(&self, advertiser: usize) -> f64 {
        self.clicks.get(&advertiser).copied().unwrap_or(0.0)
    }
}

fn check_feasible(s: &Slate, inst: &AuctionInstance) -> Result<(), ModelError> {
    let page = inst.page();
    if s.placements.len() > page.adlim {
        return Err(ModelError::InfeasibleSlate(format!(
            "{} ads exceed adlim {}",
            s.placements.len(),
            page.adlim
        )));
    }
    let mut used = vec![false; inst.advertisers().len()];
    let mut line = 0;
    for p in &s.placements {
        if p.candidate >= inst.candidates().len() {
            return Err(ModelError::InfeasibleSlate(format!(
                "no candidate #{}",
                p.candidate
            )));
        }
        let adv = inst.advertiser_of(p.candidate);
        if std::mem::replace(&mut used[adv], true) {
            return Err(ModelError::InfeasibleSlate(format!(
                "advertiser `{}` appears twice",
                inst.advertisers()[adv]
            )));
        }
        if p.start != line {
            return Err(ModelError::InfeasibleSlate(format!(
                "`{}` starts at line {} instead of {line}",
                inst.candidate(p.candidate).id,
                p.start
            )));
        }
        line += inst.height(p.candidate);
    }
    if line > page.h {
        return Err(ModelError::InfeasibleSlate(format!(
            "{line} lines exceed page height {}",
            page.h
        )));
    }
    Ok(())
}

/// Advertiser uniqueness, stacking, total height and ad count all hold.
pub fn feasible(s: &Slate, inst: &AuctionInstance) -> bool {
    check_feasible(s, inst).is_ok()
}

/// Sum of `bid * p_a(k) - c_a(k)` over the slate's placements.
pub fn objective(s: &Slate, inst: &AuctionInstance) -> Result<f64, ModelError> {
    check_feasible(s, inst)?;
    Ok(s
        .placements
        .iter()
        .map(|p| inst.score_at(inst.bids(), p.candidate, p.start))
        .sum())
}
