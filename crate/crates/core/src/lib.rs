//! Rich-ad slate auctions.
//!
//! Ads of varying height compete for a fixed number of page lines. The
//! [`allocator`] picks a slate by greedy ranking followed by 1-for-1 swap local
//! search at every slate cardinality, logging every slate it evaluates.
//! [`curves`] turns that log into per-advertiser allocation curves, and
//! [`pricing`] reads first-price, GSP, VCG, ROI-constrained and α-hybrid
//! prices off those curves. [`oracle`] holds the exhaustive references used to
//! check all of the above, and [`harness`] generates corpora and evaluates the
//! heuristic against the oracle.

pub mod allocator;
pub mod curves;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod pricing;

pub use allocator::{solve, solve_with, SearchLog, SolveOptions, SolveResult};
pub use curves::{curve_for, AllocationCurve};
pub use model::{AdCandidate, AuctionInstance, Cost, PageConfig, Slate};
pub use pricing::{quote, PriceQuote, Scheme};
