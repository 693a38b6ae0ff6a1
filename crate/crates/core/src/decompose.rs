//! Composition counterfactuals and trend decomposition.
//!
//! The counterfactual series freezes age-specific rates at a reference year
//! and lets the observed age composition vary, isolating the part of a crude
//! trend attributable to composition alone. `decompose_change` compares that
//! series to the crude series over an interval; `bias_report` quantifies how
//! far an unadjusted trend strays from an adjusted one.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::standardize::{adjusted_series, crude_rate, rates_for_year};
use crate::types::{Adjustment, AgeBand, CountsTable, RateSeries, StandardPopulation, StratumKey};

/// Crude changes smaller than this (on the rate-fraction scale) leave the
/// composition share undefined rather than dividing by numerical noise.
pub const DEFAULT_SHARE_EPSILON: f64 = 1e-15;

/// Crude change, composition-attributable change, and the share of the
/// crude change the composition explains, over one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub interval: (i32, i32),
    /// Year whose age-specific rates the counterfactual froze.
    pub ref_year: i32,
    /// crude(t1) - crude(t0), as a rate fraction.
    pub crude_change: f64,
    /// counterfactual(t1) - counterfactual(t0), as a rate fraction.
    pub composition_change: f64,
    /// composition_change / crude_change; `None` when |crude_change| is
    /// below the configured epsilon.
    pub share: Option<f64>,
}

/// Percent change of the crude and adjusted series over an interval, and
/// their gap in percentage points.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub interval: (i32, i32),
    /// Descriptor of the standard behind the adjusted series.
    pub standard: String,
    pub crude_trend_pct: f64,
    pub adjusted_trend_pct: f64,
    /// crude_trend_pct - adjusted_trend_pct.
    pub bias_pct_points: f64,
}

/// Rate series with age-specific rates frozen at `ref_year` and weights
/// tracking each year's actual age composition.
pub fn counterfactual_series(
    table: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
    ref_year: i32,
) -> Result<RateSeries> {
    table.check_band(band)?;
    table.check_year(ref_year)?;
    let frozen = rates_for_year(table, ref_year, band, stratum)?;
    let mut points = BTreeMap::new();
    for &year in table.years() {
        // at the reference year the weighted average collapses to the crude
        // rate algebraically; computing it that way keeps the anchor exact
        if year == ref_year {
            points.insert(year, crude_rate(table, year, band, stratum)?);
            continue;
        }
        let mut weighted = 0.0;
        let mut total = 0.0;
        for (age, rate) in frozen.iter() {
            let population = table.cell(year, age, stratum)?.population as f64;
            weighted += population * rate;
            total += population;
        }
        points.insert(year, weighted / total);
    }
    RateSeries::new(
        points,
        Adjustment::Counterfactual(ref_year),
        stratum.clone(),
    )
}

/// Split the crude change over (t0, t1) into its composition-driven part.
///
/// Endpoints may be given in either order (the deltas negate, the share is
/// unchanged); they must be distinct years of the table.
pub fn decompose_change(
    table: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
    t0: i32,
    t1: i32,
    ref_year: i32,
) -> Result<DecompositionResult> {
    decompose_change_with_epsilon(
        table,
        band,
        stratum,
        t0,
        t1,
        ref_year,
        DEFAULT_SHARE_EPSILON,
    )
}

/// As [`decompose_change`], with an explicit epsilon for the undefined-share
/// guard.
pub fn decompose_change_with_epsilon(
    table: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
    t0: i32,
    t1: i32,
    ref_year: i32,
    epsilon: f64,
) -> Result<DecompositionResult> {
    if t0 == t1 {
        return Err(Error::DegenerateInterval(t0));
    }
    table.check_year(t0)?;
    table.check_year(t1)?;
    let crude_change =
        crude_rate(table, t1, band, stratum)? - crude_rate(table, t0, band, stratum)?;
    let counterfactual = counterfactual_series(table, band, stratum, ref_year)?;
    let composition_change = counterfactual.get(t1).unwrap() - counterfactual.get(t0).unwrap();
    let share = (crude_change.abs() > epsilon).then(|| composition_change / crude_change);
    Ok(DecompositionResult {
        interval: (t0, t1),
        ref_year,
        crude_change,
        composition_change,
        share,
    })
}

/// Percent change of the crude and adjusted series over [t0, t1], measured
/// against the t0 value, plus their difference in percentage points.
pub fn bias_report(
    table: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
    std: &StandardPopulation,
    descriptor: &str,
    t0: i32,
    t1: i32,
) -> Result<BiasReport> {
    table.check_year(t0)?;
    table.check_year(t1)?;
    let crude0 = crude_rate(table, t0, band, stratum)?;
    let crude1 = crude_rate(table, t1, band, stratum)?;
    if crude0 <= 0.0 {
        return Err(Error::ZeroBaseline {
            series: "crude",
            year: t0,
        });
    }
    let adjusted = adjusted_series(table, band, stratum, std, descriptor)?;
    let adj0 = adjusted.get(t0).unwrap();
    let adj1 = adjusted.get(t1).unwrap();
    if adj0 <= 0.0 {
        return Err(Error::ZeroBaseline {
            series: "adjusted",
            year: t0,
        });
    }
    let crude_trend_pct = (crude1 - crude0) / crude0 * 100.0;
    let adjusted_trend_pct = (adj1 - adj0) / adj0 * 100.0;
    Ok(BiasReport {
        interval: (t0, t1),
        standard: descriptor.to_string(),
        crude_trend_pct,
        adjusted_trend_pct,
        bias_pct_points: crude_trend_pct - adjusted_trend_pct,
    })
}
