//! Rate and standardization arithmetic: age-specific rates, crude rates,
//! mean age, standard populations, and directly standardized series.
//!
//! Rates are dimensionless fractions (deaths per person-year) throughout;
//! conversion to deaths per 100,000 happens only at output boundaries.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{
    Adjustment, AgeBand, AgeSpecificRates, CountsTable, RateSeries, StandardPopulation, StratumKey,
};

/// Deaths over population for a single (year, age, stratum) cell.
pub fn age_specific_rate(
    table: &CountsTable,
    year: i32,
    age: u32,
    stratum: &StratumKey,
) -> Result<f64> {
    let cell = table.cell(year, age, stratum)?;
    Ok(cell.deaths as f64 / cell.population as f64)
}

/// Total deaths over total population across the band, no adjustment.
pub fn crude_rate(
    table: &CountsTable,
    year: i32,
    band: AgeBand,
    stratum: &StratumKey,
) -> Result<f64> {
    table.check_band(band)?;
    let mut deaths: u128 = 0;
    let mut population: u128 = 0;
    for age in band.ages() {
        let cell = table.cell(year, age, stratum)?;
        deaths += cell.deaths as u128;
        population += cell.population as u128;
    }
    Ok(deaths as f64 / population as f64)
}

/// Population-weighted mean age over the band, in years.
pub fn mean_age(
    table: &CountsTable,
    year: i32,
    band: AgeBand,
    stratum: &StratumKey,
) -> Result<f64> {
    table.check_band(band)?;
    let mut weighted: u128 = 0;
    let mut population: u128 = 0;
    for age in band.ages() {
        let cell = table.cell(year, age, stratum)?;
        weighted += age as u128 * cell.population as u128;
        population += cell.population as u128;
    }
    Ok(weighted as f64 / population as f64)
}

/// Per-age rates for one year and stratum.
pub fn rates_for_year(
    table: &CountsTable,
    year: i32,
    band: AgeBand,
    stratum: &StratumKey,
) -> Result<AgeSpecificRates> {
    table.check_band(band)?;
    let mut rates = Vec::with_capacity(band.width());
    for age in band.ages() {
        let cell = table.cell(year, age, stratum)?;
        rates.push(cell.deaths as f64 / cell.population as f64);
    }
    AgeSpecificRates::new(band, rates)
}

/// The hypothetical population with an equal number of people at each age.
pub fn uniform_standard(band: AgeBand) -> StandardPopulation {
    StandardPopulation::new(band, vec![1.0; band.width()])
        .expect("uniform weights are always valid")
}

/// Standard population taken from the age distribution observed in
/// `ref_year` for the given stratum.
pub fn standard_from_year(
    table: &CountsTable,
    ref_year: i32,
    band: AgeBand,
    stratum: &StratumKey,
) -> Result<StandardPopulation> {
    table.check_band(band)?;
    table.check_year(ref_year)?;
    let mut weights = Vec::with_capacity(band.width());
    for age in band.ages() {
        let cell = table.cell(ref_year, age, stratum)?;
        weights.push(cell.population as f64);
    }
    StandardPopulation::new(band, weights)
}

/// Weighted average of age-specific rates under the standard's weights.
///
/// Weights are normalized on the fly, so the result is invariant to
/// positive rescaling of the whole weight vector.
pub fn standardized_rate(rates: &AgeSpecificRates, std: &StandardPopulation) -> Result<f64> {
    if rates.band() != std.band() {
        return Err(Error::BandMismatch {
            rates: rates.band(),
            standard: std.band(),
        });
    }
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (r, w) in rates.values().iter().zip(std.values()) {
        weighted += w * r;
        total += w;
    }
    Ok(weighted / total)
}

/// One standardized rate per year of the table, under a fixed standard.
///
/// `descriptor` is recorded in the series metadata (`uniform`, `year:1999`, ...).
pub fn adjusted_series(
    table: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
    std: &StandardPopulation,
    descriptor: &str,
) -> Result<RateSeries> {
    table.check_band(band)?;
    table.check_stratum(stratum)?;
    let mut points = BTreeMap::new();
    for &year in table.years() {
        let rates = rates_for_year(table, year, band, stratum)?;
        points.insert(year, standardized_rate(&rates, std)?);
    }
    RateSeries::new(
        points,
        Adjustment::Standardized(descriptor.to_string()),
        stratum.clone(),
    )
}

/// Crude rate for every year of the table.
pub fn crude_series(
    table: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
) -> Result<RateSeries> {
    table.check_band(band)?;
    table.check_stratum(stratum)?;
    let mut points = BTreeMap::new();
    for &year in table.years() {
        points.insert(year, crude_rate(table, year, band, stratum)?);
    }
    RateSeries::new(points, Adjustment::Crude, stratum.clone())
}

/// Mean age for every year of the table, in years.
pub fn mean_age_series(
    table: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
) -> Result<BTreeMap<i32, f64>> {
    table.check_band(band)?;
    table.check_stratum(stratum)?;
    let mut points = BTreeMap::new();
    for &year in table.years() {
        points.insert(year, mean_age(table, year, band, stratum)?);
    }
    Ok(points)
}
