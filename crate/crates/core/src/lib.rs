//! Age-standardized mortality-rate trends from deaths and population counts
//! by single year of age.
//!
//! A group's crude mortality rate can drift simply because the group's age
//! mix changes, even when nobody's age-specific risk moves. This crate
//! computes the series that separate those stories: crude rates, directly
//! standardized rates under interchangeable standard populations,
//! composition-only counterfactuals, and the decomposition of a trend into
//! its composition-driven share, with stratification by sex and region.
//!
//! Input is a rectangular table of deaths and population indexed by
//! (year, single year of age, stratum), parsed from the native CSV schema
//! or from tab-delimited mortality-database exports ([`ingest`]). The
//! [`synth`] module generates cohort-driven fixtures (including a baby-boom
//! preset) where the right answers are known by construction. The
//! [`cli`] module exposes everything as the `agestand` binary.
//!
//! All types are immutable after construction and all operations are pure,
//! so everything here is safe to use from multiple threads.

pub mod chart;
pub mod cli;
pub mod decompose;
mod error;
pub mod ingest;
pub mod standardize;
pub mod stratify;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    Adjustment, AgeBand, AgeSpecificRates, Cell, CountsTable, RateSeries, Sex, StandardPopulation,
    StratumKey,
};
