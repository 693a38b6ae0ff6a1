//! Synthetic cohort-driven populations with controlled rate schedules.
//!
//! Populations are pure cohort translation: the people born in year `c` are
//! `births(c)` strong at every age, with no attrition or migration, so
//! `population(a+1, t+1) = population(a, t)` exactly. That makes fixtures
//! where the aggregation bias is known by construction: with a constant rate
//! schedule, every standardized series is flat and any movement in the crude
//! series is composition alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::{AgeBand, Cell, CountsTable, Sex, StratumKey};

/// Denominator of the rate grid used by exact (no-rounding) death counts:
/// rates must be multiples of 1e-6, and cohort sizes are scaled by this
/// factor so every expected death count is an integer.
pub const EXACT_SCALE: u64 = 1_000_000;

// Populations must stay exactly representable as f64 (2^53).
const MAX_EXACT_POPULATION: u64 = 1 << 53;

/// Age-specific rate schedule over (age, year).
#[derive(Debug, Clone, PartialEq)]
pub enum RateSchedule {
    /// One rate per age, the same every year.
    Constant(Vec<f64>),
    /// Per-age base rates plus a per-year additive delta applied to every
    /// age, measured from the scenario's first year.
    LinearDrift { base: Vec<f64>, per_year_delta: f64 },
}

impl RateSchedule {
    fn base(&self) -> &[f64] {
        match self {
            RateSchedule::Constant(v) => v,
            RateSchedule::LinearDrift { base, .. } => base,
        }
    }

    /// Rate at (age, year); `first_year` anchors the drift.
    pub fn rate(&self, band: AgeBand, age: u32, year: i32, first_year: i32) -> Result<f64> {
        let idx = band
            .index_of(age)
            .ok_or(Error::AgeOutsideBand { age, band })?;
        Ok(match self {
            RateSchedule::Constant(v) => v[idx],
            RateSchedule::LinearDrift {
                base,
                per_year_delta,
            } => base[idx] + per_year_delta * (year - first_year) as f64,
        })
    }
}

/// How death counts are derived from expected values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Rounding {
    /// deaths = round-half-to-even(population * rate).
    #[default]
    HalfEven,
    /// Cohort sizes are scaled by [`EXACT_SCALE`] and rates constrained to
    /// the 1e-6 grid so deaths are exact; age-specific rates then reproduce
    /// the schedule bit-for-bit.
    Exact,
}

/// A complete description of a synthetic population.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub band: AgeBand,
    /// First and last calendar year of the generated table.
    pub years: (i32, i32),
    /// Cohort size by birth year; must cover every cohort visible in the
    /// `years x band` window.
    pub births: BTreeMap<i32, u64>,
    pub rate_schedule: RateSchedule,
    /// When set, the table carries female/male strata with cohorts split at
    /// this fraction female (rounded half-to-even at the births level).
    pub sex_split: Option<f64>,
    pub rounding: Rounding,
}

impl Scenario {
    /// Birth years visible anywhere in the `years x band` window.
    pub fn needed_cohorts(&self) -> std::ops::RangeInclusive<i32> {
        (self.years.0 - self.band.hi() as i32)..=(self.years.1 - self.band.lo() as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let (first, last) = self.years;
        if first > last {
            return Err(Error::Scenario(format!(
                "first year {first} exceeds last year {last}"
            )));
        }
        let base = self.rate_schedule.base();
        if base.len() != self.band.width() {
            return Err(Error::Scenario(format!(
                "rate schedule has {} entries for band {} ({} ages)",
                base.len(),
                self.band,
                self.band.width()
            )));
        }
        for cohort in self.needed_cohorts() {
            match self.births.get(&cohort) {
                None => {
                    return Err(Error::Scenario(format!(
                        "births missing for cohort year {cohort}"
                    )))
                }
                Some(0) => {
                    return Err(Error::Scenario(format!(
                        "births must be positive (cohort year {cohort})"
                    )))
                }
                Some(&b) => {
                    let cap = match self.rounding {
                        Rounding::HalfEven => MAX_EXACT_POPULATION,
                        Rounding::Exact => MAX_EXACT_POPULATION / EXACT_SCALE,
                    };
                    if b > cap {
                        return Err(Error::Scenario(format!(
                            "cohort {cohort} size {b} exceeds the supported maximum {cap}"
                        )));
                    }
                }
            }
        }
        // linear schedules attain their extremes at the window endpoints
        for &year in &[first, last] {
            for age in self.band.ages() {
                let rate = self.rate_schedule.rate(self.band, age, year, first)?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(Error::Scenario(format!(
                        "schedule rate {rate} at age {age}, year {year} outside [0, 1]"
                    )));
                }
                if self.rounding == Rounding::Exact {
                    exact_numerator(rate)?;
                }
            }
        }
        if let Some(split) = self.sex_split {
            if !(0.0..=1.0).contains(&split) {
                return Err(Error::Scenario(format!("sex_split {split} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Serialize to the flat key-value config format accepted by
    /// [`Scenario::from_config`]. Round-trips exactly.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "band = {}", self.band);
        let _ = writeln!(out, "years = {}-{}", self.years.0, self.years.1);
        let rounding = match self.rounding {
            Rounding::HalfEven => "half-even",
            Rounding::Exact => "exact",
        };
        let _ = writeln!(out, "rounding = {rounding}");
        match &self.rate_schedule {
            RateSchedule::Constant(base) => {
                let _ = writeln!(out, "rates = constant");
                let _ = writeln!(out, "rates.base = {}", join_floats(base));
            }
            RateSchedule::LinearDrift {
                base,
                per_year_delta,
            } => {
                let _ = writeln!(out, "rates = linear-drift");
                let _ = writeln!(out, "rates.base = {}", join_floats(base));
                let _ = writeln!(out, "rates.drift = {per_year_delta}");
            }
        }
        if let Some(split) = self.sex_split {
            let _ = writeln!(out, "sex_split = {split}");
        }
        for (year, births) in &self.births {
            let _ = writeln!(out, "births.{year} = {births}");
        }
        out
    }

    /// Parse the flat key-value config format.
    ///
    /// Grammar: one `key = value` per line; `#` starts a comment. Keys:
    /// `band` (LO-HI), `years` (FIRST-LAST), `rounding` (`half-even` |
    /// `exact`), `rates` (`constant` | `linear-drift`), `rates.base`
    /// (comma-separated fractions, one per age), `rates.drift` (per-year
    /// additive delta, linear-drift only), `sex_split` (optional fraction
    /// female), and `births.YYYY = N` (also `births.Y0-Y1 = N` to fill a
    /// range of cohort years).
    pub fn from_config(text: &str) -> Result<Self> {
        let mut band = None;
        let mut years = None;
        let mut rounding = Rounding::default();
        let mut kind: Option<String> = None;
        let mut base: Option<Vec<f64>> = None;
        let mut drift: Option<f64> = None;
        let mut sex_split = None;
        let mut births = BTreeMap::new();

        let fail = |line: usize, msg: String| Error::Scenario(format!("line {line}: {msg}"));

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(line_no, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "band" => {
                    band = Some(
                        value
                            .parse::<AgeBand>()
                            .map_err(|e| fail(line_no, e.to_string()))?,
                    );
                }
                "years" => {
                    let (a, b) = value
                        .split_once('-')
                        .ok_or_else(|| fail(line_no, format!("years `{value}` not FIRST-LAST")))?;
                    let first = a
                        .trim()
                        .parse::<i32>()
                        .map_err(|_| fail(line_no, format!("bad year `{}`", a.trim())))?;
                    let last = b
                        .trim()
                        .parse::<i32>()
                        .map_err(|_| fail(line_no, format!("bad year `{}`", b.trim())))?;
                    years = Some((first, last));
                }
                "rounding" => {
                    rounding = match value {
                        "half-even" => Rounding::HalfEven,
                        "exact" => Rounding::Exact,
                        other => {
                            return Err(fail(
                                line_no,
                                format!("rounding `{other}` is not half-even or exact"),
                            ))
                        }
                    };
                }
                "rates" => kind = Some(value.to_string()),
                "rates.base" => {
                    let mut parsed = Vec::new();
                    for piece in value.split(',') {
                        parsed.push(
                            piece.trim().parse::<f64>().map_err(|_| {
                                fail(line_no, format!("bad rate `{}`", piece.trim()))
                            })?,
                        );
                    }
                    base = Some(parsed);
                }
                "rates.drift" => {
                    drift = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| fail(line_no, format!("bad drift `{value}`")))?,
                    );
                }
                "sex_split" => {
                    sex_split = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| fail(line_no, format!("bad sex_split `{value}`")))?,
                    );
                }
                _ => match key.strip_prefix("births.") {
                    Some(which) => {
                        let count = value
                            .parse::<u64>()
                            .map_err(|_| fail(line_no, format!("bad births count `{value}`")))?;
                        let (from, to) = match which.split_once('-') {
                            Some((a, b)) => {
                                let from = a.trim().parse::<i32>().map_err(|_| {
                                    fail(line_no, format!("bad cohort year `{}`", a.trim()))
                                })?;
                                let to = b.trim().parse::<i32>().map_err(|_| {
                                    fail(line_no, format!("bad cohort year `{}`", b.trim()))
                                })?;
                                (from, to)
                            }
                            None => {
                                let year = which.trim().parse::<i32>().map_err(|_| {
                                    fail(line_no, format!("bad cohort year `{which}`"))
                                })?;
                                (year, year)
                            }
                        };
                        if from > to {
                            return Err(fail(line_no, format!("empty cohort range {from}-{to}")));
                        }
                        for year in from..=to {
                            births.insert(year, count);
                        }
                    }
                    None => return Err(fail(line_no, format!("unknown key `{key}`"))),
                },
            }
        }

        let band = band.ok_or_else(|| Error::Scenario("missing key `band`".to_string()))?;
        let years = years.ok_or_else(|| Error::Scenario("missing key `years`".to_string()))?;
        let base = base.ok_or_else(|| Error::Scenario("missing key `rates.base`".to_string()))?;
        let kind = kind.ok_or_else(|| Error::Scenario("missing key `rates`".to_string()))?;
        let rate_schedule = match kind.as_str() {
            "constant" => {
                if drift.is_some() {
                    return Err(Error::Scenario(
                        "rates.drift given for a constant schedule".to_string(),
                    ));
                }
                RateSchedule::Constant(base)
            }
            "linear-drift" => RateSchedule::LinearDrift {
                base,
                per_year_delta: drift.ok_or_else(|| {
                    Error::Scenario("linear-drift schedule needs rates.drift".to_string())
                })?,
            },
            other => {
                return Err(Error::Scenario(format!(
                    "rates `{other}` is not constant or linear-drift"
                )))
            }
        };
        let scenario = Scenario {
            band,
            years,
            births,
            rate_schedule,
            sex_split,
            rounding,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn exact_numerator(rate: f64) -> Result<u64> {
    let scaled = rate * EXACT_SCALE as f64;
    let n = scaled.round_ties_even();
    if (n / EXACT_SCALE as f64 - rate).abs() > 1e-12 {
        return Err(Error::Scenario(format!(
            "rate {rate} is not a multiple of 1e-6; exact rounding requires rates on that grid"
        )));
    }
    Ok(n as u64)
}

/// Generate the table described by a scenario.
pub fn synth_table(scenario: &Scenario) -> Result<CountsTable> {
    scenario.validate()?;
    let (first, last) = scenario.years;
    let band = scenario.band;

    let strata: Vec<(StratumKey, BTreeMap<i32, u64>)> = match scenario.sex_split {
        None => vec![(StratumKey::new(Sex::All), scenario.births.clone())],
        Some(split) => {
            let mut female = BTreeMap::new();
            let mut male = BTreeMap::new();
            for (&year, &births) in &scenario.births {
                let f = (births as f64 * split).round_ties_even() as u64;
                if f == 0 || f == births {
                    return Err(Error::Scenario(format!(
                        "sex_split {split} empties one sex for cohort {year}"
                    )));
                }
                female.insert(year, f);
                male.insert(year, births - f);
            }
            vec![
                (StratumKey::new(Sex::Female), female),
                (StratumKey::new(Sex::Male), male),
            ]
        }
    };

    let mut cells = Vec::new();
    for (key, births) in &strata {
        for year in first..=last {
            for age in band.ages() {
                let cohort = year - age as i32;
                let size = births[&cohort];
                let rate = scenario.rate_schedule.rate(band, age, year, first)?;
                let (population, deaths) = match scenario.rounding {
                    Rounding::HalfEven => (size, (size as f64 * rate).round_ties_even() as u64),
                    Rounding::Exact => (size * EXACT_SCALE, size * exact_numerator(rate)?),
                };
                cells.push(((year, age, key.clone()), Cell { deaths, population }));
            }
        }
    }
    CountsTable::from_cells(band, cells)
}

/// The canonical fixture: a 45-54 band over 1999-2013 with cohorts born
/// 1946-1964 elevated 1.5x over a flat baseline, and constant age-specific
/// rates rising with age. As the elevated cohorts move through the band the
/// group's mean age climbs and the crude rate climbs with it, while every
/// standardized series stays flat.
pub fn baby_boom_scenario() -> Scenario {
    let band = AgeBand::default();
    let mut births = BTreeMap::new();
    for year in 1945..=1968 {
        let size = if (1946..=1964).contains(&year) {
            150_000
        } else {
            100_000
        };
        births.insert(year, size);
    }
    let base: Vec<f64> = (0..band.width())
        .map(|i| (3_000 + 400 * i as u64) as f64 / EXACT_SCALE as f64)
        .collect();
    Scenario {
        band,
        years: (1999, 2013),
        births,
        rate_schedule: RateSchedule::Constant(base),
        sex_split: None,
        rounding: Rounding::HalfEven,
    }
}
