//! Immutable domain types: age bands, strata, the counts table, standard
//! populations, and rate series.
//!
//! All types validate their invariants at construction and never mutate
//! afterwards, so they are safe to share freely across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Inclusive range of single-year ages, e.g. 45-54.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgeBand {
    lo: u32,
    hi: u32,
}

impl AgeBand {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidBand { lo, hi });
        }
        Ok(AgeBand { lo, hi })
    }

    pub fn lo(self) -> u32 {
        self.lo
    }

    pub fn hi(self) -> u32 {
        self.hi
    }

    /// Number of single-year ages in the band (at least 1).
    pub fn width(self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn ages(self) -> impl Iterator<Item = u32> {
        self.lo..=self.hi
    }

    pub fn contains(self, age: u32) -> bool {
        self.lo <= age && age <= self.hi
    }

    pub fn covers(self, other: AgeBand) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Position of `age` within the band, if it falls inside.
    pub fn index_of(self, age: u32) -> Option<usize> {
        self.contains(age).then(|| (age - self.lo) as usize)
    }
}

impl Default for AgeBand {
    /// The middle-age band the tool was built around: 45-54.
    fn default() -> Self {
        AgeBand { lo: 45, hi: 54 }
    }
}

impl fmt::Display for AgeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for AgeBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("invalid band `{s}` (expected LO-HI)"));
        let (lo, hi) = s.split_once('-').ok_or_else(bad)?;
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        AgeBand::new(lo, hi)
    }
}

/// Sex dimension of a stratum. The declaration order fixes the sort order
/// used everywhere: female < male < all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sex {
    Female,
    Male,
    All,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
            Sex::All => "all",
        }
    }

    /// Case-insensitive parse; accepts the `f`/`m` abbreviations used by
    /// public mortality-database exports.
    pub fn parse_token(s: &str) -> Option<Sex> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Some(Sex::Female),
            "male" | "m" => Some(Sex::Male),
            "all" => Some(Sex::All),
            _ => None,
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A subpopulation slice: sex, optional region label, and room for future
/// dimensions. Ordering is sex first, then region (absent before present,
/// labels lexicographic).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StratumKey {
    pub sex: Sex,
    pub region: Option<String>,
    pub extra: BTreeMap<String, String>,
}

impl StratumKey {
    pub fn new(sex: Sex) -> Self {
        StratumKey {
            sex,
            region: None,
            extra: BTreeMap::new(),
        }
    }

    /// The single key every stratum projects to when nothing is grouped.
    pub fn aggregate() -> Self {
        StratumKey::new(Sex::All)
    }

    /// Attach a region label; the label must be nonempty after trimming.
    pub fn with_region(mut self, region: &str) -> Result<Self> {
        let trimmed = region.trim();
        if trimmed.is_empty() {
            return Err(Error::EmptyRegion);
        }
        self.region = Some(trimmed.to_string());
        Ok(self)
    }
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sex.as_str())?;
        if let Some(region) = &self.region {
            write!(f, ":{region}")?;
        }
        for (k, v) in &self.extra {
            write!(f, ":{k}={v}")?;
        }
        Ok(())
    }
}

/// Deaths and population for one (year, age, stratum) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub deaths: u64,
    pub population: u64,
}

/// Deaths and population counts indexed by (year, age, stratum).
///
/// The table is rectangular: every stratum present carries exactly one cell
/// for every (year, age) pair in `years x band`. Every cell has a positive
/// population and `deaths <= population`. These invariants are checked once
/// at construction; lookups never have to re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    band: AgeBand,
    years: Vec<i32>,
    strata: Vec<StratumKey>,
    // Dense per-stratum grid, year-major: idx = year_idx * band.width() + age_idx.
    grids: BTreeMap<StratumKey, Vec<Cell>>,
}

impl CountsTable {
    /// Build a table from raw cells, validating every invariant.
    ///
    /// Years are inferred from the cells; every stratum must then cover the
    /// full `years x band` cross product.
    pub fn from_cells<I>(band: AgeBand, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((i32, u32, StratumKey), Cell)>,
    {
        let mut staged: BTreeMap<StratumKey, BTreeMap<(i32, u32), Cell>> = BTreeMap::new();
        let mut years: Vec<i32> = Vec::new();
        for ((year, age, stratum), cell) in cells {
            if !band.contains(age) {
                return Err(Error::AgeOutsideBand { age, band });
            }
            if cell.population == 0 {
                return Err(Error::ZeroPopulation { year, age, stratum });
            }
            if cell.deaths > cell.population {
                return Err(Error::DeathsExceedPopulation {
                    year,
                    age,
                    stratum,
                    deaths: cell.deaths,
                    population: cell.population,
                });
            }
            if !years.contains(&year) {
                years.push(year);
            }
            let per_stratum = staged.entry(stratum.clone()).or_default();
            if per_stratum.insert((year, age), cell).is_some() {
                return Err(Error::DuplicateCell { year, age, stratum });
            }
        }
        if staged.is_empty() {
            return Err(Error::EmptyTable);
        }
        years.sort_unstable();

        let width = band.width();
        let mut grids = BTreeMap::new();
        for (stratum, per_stratum) in staged {
            let mut grid = Vec::with_capacity(years.len() * width);
            for &year in &years {
                for age in band.ages() {
                    let cell = per_stratum
                        .get(&(year, age))
                        .ok_or_else(|| Error::MissingCell {
                            year,
                            age,
                            stratum: stratum.clone(),
                        })?;
                    grid.push(*cell);
                }
            }
            grids.insert(stratum, grid);
        }
        let strata = grids.keys().cloned().collect();
        Ok(CountsTable {
            band,
            years,
            strata,
            grids,
        })
    }

    pub fn band(&self) -> AgeBand {
        self.band
    }

    /// Calendar years covered, sorted ascending.
    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }

    pub fn last_year(&self) -> i32 {
        *self.years.last().expect("table is never empty")
    }

    pub fn has_year(&self, year: i32) -> bool {
        self.years.binary_search(&year).is_ok()
    }

    /// Strata present, in deterministic sort order.
    pub fn strata(&self) -> &[StratumKey] {
        &self.strata
    }

    /// Look up one cell; missing cells are hard errors, never zeros.
    pub fn cell(&self, year: i32, age: u32, stratum: &StratumKey) -> Result<Cell> {
        let missing = || Error::MissingCell {
            year,
            age,
            stratum: stratum.clone(),
        };
        let year_idx = self.years.binary_search(&year).map_err(|_| missing())?;
        let age_idx = self.band.index_of(age).ok_or_else(missing)?;
        let grid = self.grids.get(stratum).ok_or_else(missing)?;
        Ok(grid[year_idx * self.band.width() + age_idx])
    }

    /// Iterate every cell in deterministic (stratum, year, age) order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (&StratumKey, i32, u32, Cell)> + '_ {
        let width = self.band.width();
        self.grids.iter().flat_map(move |(stratum, grid)| {
            self.years.iter().enumerate().flat_map(move |(yi, &year)| {
                self.band.ages().map(move |age| {
                    let idx = yi * width + self.band.index_of(age).unwrap();
                    (stratum, year, age, grid[idx])
                })
            })
        })
    }

    /// Check a requested analysis band against the table's coverage.
    pub fn check_band(&self, band: AgeBand) -> Result<()> {
        if self.band.covers(band) {
            Ok(())
        } else {
            Err(Error::BandOutOfRange {
                requested: band,
                available: self.band,
            })
        }
    }

    /// Check that a year exists in the table.
    pub fn check_year(&self, year: i32) -> Result<()> {
        if self.has_year(year) {
            Ok(())
        } else {
            Err(Error::UnknownYear(year))
        }
    }

    /// Check that a stratum exists in the table.
    pub fn check_stratum(&self, stratum: &StratumKey) -> Result<()> {
        if self.grids.contains_key(stratum) {
            Ok(())
        } else {
            Err(Error::UnknownStratum(stratum.clone()))
        }
    }
}

/// Per-age mortality rates for one year and stratum, as fractions in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AgeSpecificRates {
    band: AgeBand,
    rates: Vec<f64>,
}

impl AgeSpecificRates {
    pub fn new(band: AgeBand, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != band.width() {
            return Err(Error::WrongVectorLength {
                band,
                expected: band.width(),
                got: rates.len(),
            });
        }
        for &r in &rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::RateOutOfRange { year: 0, value: r });
            }
        }
        Ok(AgeSpecificRates { band, rates })
    }

    pub fn band(&self) -> AgeBand {
        self.band
    }

    pub fn rate(&self, age: u32) -> Option<f64> {
        self.band.index_of(age).map(|i| self.rates[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.rates
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.band.ages().zip(self.rates.iter().copied())
    }
}

/// Nonnegative age weights defining a standardization scheme.
///
/// Weights are stored exactly as given (a 1999 standard stays readable as
/// raw population counts); normalization happens inside
/// [`crate::standardize::standardized_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StandardPopulation {
    band: AgeBand,
    weights: Vec<f64>,
}

impl StandardPopulation {
    pub fn new(band: AgeBand, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != band.width() {
            return Err(Error::WrongVectorLength {
                band,
                expected: band.width(),
                got: weights.len(),
            });
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights);
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(Error::InvalidWeights);
        }
        Ok(StandardPopulation { band, weights })
    }

    pub fn band(&self) -> AgeBand {
        self.band
    }

    pub fn weight(&self, age: u32) -> Option<f64> {
        self.band.index_of(age).map(|i| self.weights[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }
}

/// How the values of a [`RateSeries`] were produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Adjustment {
    /// Pooled deaths over pooled population, no compositional adjustment.
    Crude,
    /// Direct standardization; carries the standard's descriptor
    /// (`uniform`, `year:1999`, ...).
    Standardized(String),
    /// Composition counterfactual with rates frozen at the given year.
    Counterfactual(i32),
}

impl fmt::Display for Adjustment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adjustment::Crude => f.write_str("crude"),
            Adjustment::Standardized(desc) => write!(f, "standardized:{desc}"),
            Adjustment::Counterfactual(year) => write!(f, "counterfactual:{year}"),
        }
    }
}

/// Per-year rates (fractions in [0, 1]) plus adjustment metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    points: BTreeMap<i32, f64>,
    adjustment: Adjustment,
    stratum: StratumKey,
}

// Weighted averages of in-range rates can stray past 1.0 by summation
// rounding; accept that sliver without clamping the stored value.
const RATE_SLACK: f64 = 1e-9;

impl RateSeries {
    pub fn new(
        points: BTreeMap<i32, f64>,
        adjustment: Adjustment,
        stratum: StratumKey,
    ) -> Result<Self> {
        for (&year, &rate) in &points {
            if !(0.0..=1.0 + RATE_SLACK).contains(&rate) {
                return Err(Error::RateOutOfRange { year, value: rate });
            }
        }
        Ok(RateSeries {
            points,
            adjustment,
            stratum,
        })
    }

    pub fn points(&self) -> &BTreeMap<i32, f64> {
        &self.points
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        self.points.get(&year).copied()
    }

    pub fn adjustment(&self) -> &Adjustment {
        &self.adjustment
    }

    pub fn stratum(&self) -> &StratumKey {
        &self.stratum
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.points.iter().map(|(&y, &r)| (y, r))
    }
}
