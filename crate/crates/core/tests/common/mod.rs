//! Shared test support: an independent direct-summation oracle and a
//! seeded random-table generator.
//!
//! The oracle works straight off raw (year, age) -> (deaths, population)
//! maps and deliberately takes different arithmetic routes than the library
//! (weights normalized before the dot product, plain f64 accumulation), so
//! agreement is evidence rather than tautology.
#![allow(dead_code)]

use std::collections::BTreeMap;

use agestand::types::{AgeBand, Cell, CountsTable, Sex, StratumKey};
use rand::Rng;

pub type RawCells = BTreeMap<(i32, u32), (u64, u64)>;

/// A random single-stratum table plus the raw cells it was built from.
pub struct RandomTable {
    pub band: AgeBand,
    pub years: Vec<i32>,
    pub cells: RawCells,
    pub stratum: StratumKey,
    pub table: CountsTable,
}

pub fn random_table<R: Rng>(
    rng: &mut R,
    max_ages: u32,
    max_years: usize,
    max_population: u64,
    equal_populations_across_ages: bool,
) -> RandomTable {
    let lo = rng.random_range(30..=70u32);
    let width = rng.random_range(1..=max_ages);
    let band = AgeBand::new(lo, lo + width - 1).unwrap();
    let first_year = rng.random_range(1950..=2010);
    let n_years = rng.random_range(1..=max_years);
    let years: Vec<i32> = (0..n_years).map(|i| first_year + i as i32).collect();
    let stratum = StratumKey::new(Sex::All);

    let mut cells = RawCells::new();
    for &year in &years {
        let shared_population = rng.random_range(1..=max_population);
        for age in band.ages() {
            let population = if equal_populations_across_ages {
                shared_population
            } else {
                rng.random_range(1..=max_population)
            };
            let deaths = rng.random_range(0..=population);
            cells.insert((year, age), (deaths, population));
        }
    }
    let table = CountsTable::from_cells(
        band,
        cells.iter().map(|(&(year, age), &(deaths, population))| {
            ((year, age, stratum.clone()), Cell { deaths, population })
        }),
    )
    .unwrap();
    RandomTable {
        band,
        years,
        cells,
        stratum,
        table,
    }
}

pub fn oracle_crude(cells: &RawCells, year: i32, band: AgeBand) -> f64 {
    let mut deaths = 0.0;
    let mut population = 0.0;
    for age in band.ages() {
        let (d, p) = cells[&(year, age)];
        deaths += d as f64;
        population += p as f64;
    }
    deaths / population
}

pub fn oracle_mean_age(cells: &RawCells, year: i32, band: AgeBand) -> f64 {
    let mut weighted = 0.0;
    let mut population = 0.0;
    for age in band.ages() {
        let (_, p) = cells[&(year, age)];
        weighted += age as f64 * p as f64;
        population += p as f64;
    }
    weighted / population
}

pub fn oracle_rates(cells: &RawCells, year: i32, band: AgeBand) -> Vec<f64> {
    band.ages()
        .map(|age| {
            let (d, p) = cells[&(year, age)];
            d as f64 / p as f64
        })
        .collect()
}

/// Weighted average with weights normalized first (the library normalizes
/// last).
pub fn oracle_standardized(rates: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    rates
        .iter()
        .zip(weights)
        .map(|(r, w)| (w / total) * r)
        .sum()
}

pub fn oracle_counterfactual(cells: &RawCells, year: i32, ref_year: i32, band: AgeBand) -> f64 {
    let frozen = oracle_rates(cells, ref_year, band);
    let weights: Vec<f64> = band
        .ages()
        .map(|age| cells[&(year, age)].1 as f64)
        .collect();
    oracle_standardized(&frozen, &weights)
}

pub struct OracleDecomposition {
    pub crude_change: f64,
    pub composition_change: f64,
    pub share: Option<f64>,
}

pub fn oracle_decompose(
    cells: &RawCells,
    band: AgeBand,
    t0: i32,
    t1: i32,
    ref_year: i32,
    epsilon: f64,
) -> OracleDecomposition {
    let crude_change = oracle_crude(cells, t1, band) - oracle_crude(cells, t0, band);
    let composition_change = oracle_counterfactual(cells, t1, ref_year, band)
        - oracle_counterfactual(cells, t0, ref_year, band);
    let share = (crude_change.abs() > epsilon).then(|| composition_change / crude_change);
    OracleDecomposition {
        crude_change,
        composition_change,
        share,
    }
}
