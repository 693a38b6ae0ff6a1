//! Per-stratum analysis pipeline: group a table by sex and/or region, then
//! compute crude, mean-age, adjusted, and counterfactual series plus
//! decompositions for every stratum independently.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::decompose::{
    bias_report, counterfactual_series, decompose_change_with_epsilon, BiasReport,
    DecompositionResult, DEFAULT_SHARE_EPSILON,
};
use crate::error::{Error, Result};
use crate::standardize::{crude_series, mean_age_series, standard_from_year, uniform_standard};
use crate::types::{AgeBand, Cell, CountsTable, RateSeries, Sex, StandardPopulation, StratumKey};

/// Which stratum dimensions to keep when grouping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupBy {
    pub sex: bool,
    pub region: bool,
}

impl GroupBy {
    pub const NONE: GroupBy = GroupBy {
        sex: false,
        region: false,
    };
}

impl FromStr for GroupBy {
    type Err = Error;

    /// Comma-separated subset of `sex,region`; the empty string selects the
    /// single aggregate stratum.
    fn from_str(s: &str) -> Result<Self> {
        let mut group_by = GroupBy::default();
        for part in s.split(',') {
            match part.trim().to_ascii_lowercase().as_str() {
                "" => {}
                "sex" => group_by.sex = true,
                "region" => group_by.region = true,
                _ => return Err(Error::InvalidGroupBy(s.to_string())),
            }
        }
        Ok(group_by)
    }
}

/// A year reference that can be pinned to the table's first or last year,
/// so one invocation works on any dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YearToken {
    First,
    Last,
    Literal(i32),
}

impl YearToken {
    pub fn resolve(self, table: &CountsTable) -> Result<i32> {
        let year = match self {
            YearToken::First => table.first_year(),
            YearToken::Last => table.last_year(),
            YearToken::Literal(y) => y,
        };
        if table.has_year(year) {
            Ok(year)
        } else {
            Err(Error::UnknownYear(year))
        }
    }
}

impl FromStr for YearToken {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "first" => Ok(YearToken::First),
            "last" => Ok(YearToken::Last),
            other => other
                .parse()
                .map(YearToken::Literal)
                .map_err(|_| Error::InvalidYearToken(s.to_string())),
        }
    }
}

/// A standardization scheme requested by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardSpec {
    Uniform,
    Year(YearToken),
}

impl StandardSpec {
    /// Resolved descriptor recorded in output metadata: `uniform` or
    /// `year:YYYY`.
    pub fn descriptor(self, table: &CountsTable) -> Result<String> {
        match self {
            StandardSpec::Uniform => Ok("uniform".to_string()),
            StandardSpec::Year(token) => Ok(format!("year:{}", token.resolve(table)?)),
        }
    }
}

impl FromStr for StandardSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "uniform" => Ok(StandardSpec::Uniform),
            "first" | "year:first" => Ok(StandardSpec::Year(YearToken::First)),
            "last" | "year:last" => Ok(StandardSpec::Year(YearToken::Last)),
            other => match other.strip_prefix("year:") {
                Some(year) => year
                    .trim()
                    .parse()
                    .map(|y| StandardSpec::Year(YearToken::Literal(y)))
                    .map_err(|_| Error::InvalidStandardToken(s.to_string())),
                None => Err(Error::InvalidStandardToken(s.to_string())),
            },
        }
    }
}

/// Whether year-based standards use each stratum's own age distribution or
/// the distribution pooled across sexes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SexStandard {
    #[default]
    Own,
    Pooled,
}

impl FromStr for SexStandard {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "own" => Ok(SexStandard::Own),
            "pooled" => Ok(SexStandard::Pooled),
            other => Err(Error::InvalidConfig(format!(
                "invalid sex-standard `{other}` (expected own or pooled)"
            ))),
        }
    }
}

/// Everything the pipeline needs to run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub band: AgeBand,
    /// Standards to adjust under; must be nonempty.
    pub standards: Vec<StandardSpec>,
    /// Reference year for the composition counterfactual.
    pub ref_year: YearToken,
    /// Intervals for decomposition and bias reporting.
    pub intervals: Vec<(YearToken, YearToken)>,
    pub group_by: GroupBy,
    pub sex_standard: SexStandard,
    pub share_epsilon: f64,
}

impl PipelineConfig {
    pub fn new(band: AgeBand) -> Self {
        PipelineConfig {
            band,
            standards: vec![StandardSpec::Uniform],
            ref_year: YearToken::Last,
            intervals: Vec::new(),
            group_by: GroupBy::default(),
            sex_standard: SexStandard::default(),
            share_epsilon: DEFAULT_SHARE_EPSILON,
        }
    }

    fn check(&self, table: &CountsTable) -> Result<()> {
        table.check_band(self.band)?;
        if self.standards.is_empty() {
            return Err(Error::InvalidConfig("no standards requested".to_string()));
        }
        for spec in &self.standards {
            if let StandardSpec::Year(token) = spec {
                token.resolve(table)?;
            }
        }
        self.ref_year.resolve(table)?;
        for &(t0, t1) in &self.intervals {
            let t0 = t0.resolve(table)?;
            let t1 = t1.resolve(table)?;
            if t0 >= t1 {
                return Err(Error::InvalidConfig(format!(
                    "interval start {t0} must precede end {t1}"
                )));
            }
        }
        Ok(())
    }
}

/// Everything computed for one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumOutput {
    pub crude: RateSeries,
    /// Mean age per year, in years.
    pub mean_age: BTreeMap<i32, f64>,
    /// One adjusted series per requested standard, in request order,
    /// keyed by resolved descriptor.
    pub adjusted: Vec<(String, RateSeries)>,
    pub counterfactual: RateSeries,
    pub decompositions: Vec<DecompositionResult>,
    pub bias: Vec<BiasReport>,
}

/// Pipeline output: one [`StratumOutput`] per stratum, in deterministic
/// stratum order.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedResult {
    pub band: AgeBand,
    pub ref_year: i32,
    pub strata: Vec<(StratumKey, StratumOutput)>,
}

impl StratifiedResult {
    pub fn get(&self, key: &StratumKey) -> Option<&StratumOutput> {
        self.strata
            .iter()
            .find_map(|(k, out)| (k == key).then_some(out))
    }
}

fn project_key(key: &StratumKey, group_by: GroupBy) -> StratumKey {
    StratumKey {
        sex: if group_by.sex { key.sex } else { Sex::All },
        region: if group_by.region {
            key.region.clone()
        } else {
            None
        },
        extra: BTreeMap::new(),
    }
}

/// Distinct strata after projecting onto the grouped dimensions, sorted
/// (sex: female < male < all; regions lexicographic, unlabeled first).
pub fn strata(table: &CountsTable, group_by: GroupBy) -> Result<Vec<StratumKey>> {
    if group_by.region && table.strata().iter().all(|k| k.region.is_none()) {
        return Err(Error::NoRegionLabels);
    }
    let keys: std::collections::BTreeSet<StratumKey> = table
        .strata()
        .iter()
        .map(|k| project_key(k, group_by))
        .collect();
    Ok(keys.into_iter().collect())
}

/// Pool the table's counts onto the projected strata.
///
/// Strata that are already aggregated along a dropped dimension (sex `all`
/// when sex is dropped, no region label when region is dropped) are taken
/// as the source's own aggregate and preferred over re-summing the
/// component strata, so components and their precomputed totals are never
/// added together.
pub fn aggregate(table: &CountsTable, group_by: GroupBy) -> Result<CountsTable> {
    if group_by.region && table.strata().iter().all(|k| k.region.is_none()) {
        return Err(Error::NoRegionLabels);
    }

    let mut pools: BTreeMap<StratumKey, Vec<&StratumKey>> = BTreeMap::new();
    for key in table.strata() {
        pools
            .entry(project_key(key, group_by))
            .or_default()
            .push(key);
    }

    let mut cells = Vec::new();
    for (projected, mut members) in pools {
        if !group_by.sex && members.iter().any(|k| k.sex == Sex::All) {
            members.retain(|k| k.sex == Sex::All);
        }
        if !group_by.region && members.iter().any(|k| k.region.is_none()) {
            members.retain(|k| k.region.is_none());
        }
        for &year in table.years() {
            for age in table.band().ages() {
                let mut deaths: u64 = 0;
                let mut population: u64 = 0;
                for member in &members {
                    let cell = table.cell(year, age, member)?;
                    deaths = deaths
                        .checked_add(cell.deaths)
                        .ok_or(Error::CountOverflow)?;
                    population = population
                        .checked_add(cell.population)
                        .ok_or(Error::CountOverflow)?;
                }
                cells.push(((year, age, projected.clone()), Cell { deaths, population }));
            }
        }
    }
    CountsTable::from_cells(table.band(), cells)
}

fn standard_for(
    spec: StandardSpec,
    grouped: &CountsTable,
    pooled: &CountsTable,
    band: AgeBand,
    stratum: &StratumKey,
    sex_standard: SexStandard,
) -> Result<(String, StandardPopulation)> {
    let descriptor = spec.descriptor(grouped)?;
    let std = match spec {
        StandardSpec::Uniform => uniform_standard(band),
        StandardSpec::Year(token) => {
            let year = token.resolve(grouped)?;
            match sex_standard {
                SexStandard::Own => standard_from_year(grouped, year, band, stratum)?,
                SexStandard::Pooled => {
                    let pooled_key = StratumKey {
                        sex: Sex::All,
                        region: stratum.region.clone(),
                        extra: BTreeMap::new(),
                    };
                    standard_from_year(pooled, year, band, &pooled_key)?
                }
            }
        }
    };
    Ok((descriptor, std))
}

/// Run the full analysis for every stratum selected by the config.
///
/// Strata are computed independently; output order is deterministic.
pub fn run_pipeline(table: &CountsTable, config: &PipelineConfig) -> Result<StratifiedResult> {
    config.check(table)?;
    let grouped = aggregate(table, config.group_by)?;
    // year-based standards under `pooled` come from the sex-aggregated table
    let pooled = match config.sex_standard {
        SexStandard::Own => grouped.clone(),
        SexStandard::Pooled => aggregate(
            table,
            GroupBy {
                sex: false,
                region: config.group_by.region,
            },
        )?,
    };
    let ref_year = config.ref_year.resolve(&grouped)?;
    let band = config.band;

    let mut outputs = Vec::with_capacity(grouped.strata().len());
    for stratum in grouped.strata() {
        let result: Result<StratumOutput> = (|| {
            let crude = crude_series(&grouped, band, stratum)?;
            let mean_age = mean_age_series(&grouped, band, stratum)?;
            let mut adjusted = Vec::with_capacity(config.standards.len());
            let mut standards = Vec::with_capacity(config.standards.len());
            for &spec in &config.standards {
                let (descriptor, std) =
                    standard_for(spec, &grouped, &pooled, band, stratum, config.sex_standard)?;
                let series = crate::standardize::adjusted_series(
                    &grouped,
                    band,
                    stratum,
                    &std,
                    &descriptor,
                )?;
                adjusted.push((descriptor.clone(), series));
                standards.push((descriptor, std));
            }
            let counterfactual = counterfactual_series(&grouped, band, stratum, ref_year)?;
            let mut decompositions = Vec::new();
            let mut bias = Vec::new();
            for &(t0, t1) in &config.intervals {
                let t0 = t0.resolve(&grouped)?;
                let t1 = t1.resolve(&grouped)?;
                decompositions.push(decompose_change_with_epsilon(
                    &grouped,
                    band,
                    stratum,
                    t0,
                    t1,
                    ref_year,
                    config.share_epsilon,
                )?);
                for (descriptor, std) in &standards {
                    bias.push(bias_report(
                        &grouped, band, stratum, std, descriptor, t0, t1,
                    )?);
                }
            }
            Ok(StratumOutput {
                crude,
                mean_age,
                adjusted,
                counterfactual,
                decompositions,
                bias,
            })
        })();
        outputs.push((stratum.clone(), result.map_err(|e| e.in_stratum(stratum))?));
    }
    Ok(StratifiedResult {
        band,
        ref_year,
        strata: outputs,
    })
}
