//! The `agestand` command-line surface.
//!
//! Subcommands read counts (native CSV or a tab-delimited export), run the
//! analysis pipeline, and emit tidy CSV plus optional SVG charts. Every
//! subcommand is deterministic: identical inputs and flags produce
//! byte-identical output.
//!
//! Exit codes: 0 success, 1 domain or validation error, 2 I/O or usage
//! error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, IsTerminal, Read, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::chart::{render_svg, ChartSeries, ChartSpec, YUnit};
use crate::error::{Error, Result};
use crate::ingest::{
    parse_counts_csv_checked, parse_wonder_export_checked, serialize_counts_csv, CsvOptions,
    WonderOptions,
};
use crate::stratify::{
    run_pipeline, GroupBy, PipelineConfig, SexStandard, StandardSpec, YearToken,
};
use crate::synth::{baby_boom_scenario, synth_table, Rounding, Scenario};
use crate::types::{AgeBand, CountsTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO_USAGE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "agestand",
    version,
    about = "Age-standardized mortality-rate trends from single-year-of-age counts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an input file and print the report
    Validate {
        #[command(flatten)]
        input: InputArgs,
        /// Require coverage of this band (LO-HI) in addition to the data's own
        #[arg(long)]
        band: Option<AgeBand>,
        /// Require coverage of this year range (FIRST-LAST)
        #[arg(long)]
        years: Option<String>,
    },
    /// Crude (unadjusted) rate series per stratum
    Crude {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Population-weighted mean age series per stratum
    MeanAge {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Directly standardized rate series under one or more standards
    Adjust {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        series: SeriesArgs,
        /// Standard population: uniform, first, last, or year:YYYY (repeatable)
        #[arg(long = "standard")]
        standards: Vec<String>,
        /// Age distribution behind year-based standards: own or pooled
        #[arg(long, default_value = "own")]
        sex_standard: String,
    },
    /// Crude series next to the composition counterfactual
    Counterfactual {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        series: SeriesArgs,
        /// Year whose age-specific rates the counterfactual freezes
        #[arg(long, default_value = "last")]
        ref_year: String,
    },
    /// Decomposition and bias report over an interval
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        /// Analysis band LO-HI (default: the table's full band)
        #[arg(long)]
        band: Option<AgeBand>,
        /// Comma-separated grouping dimensions: sex, region
        #[arg(long, default_value = "")]
        group_by: String,
        /// Interval start: first, last, or a year
        #[arg(long, default_value = "first")]
        from: String,
        /// Interval end
        #[arg(long, default_value = "last")]
        to: String,
        /// Year whose age-specific rates the counterfactual freezes
        #[arg(long, default_value = "last")]
        ref_year: String,
        /// Standard behind the bias columns (repeatable)
        #[arg(long = "standard")]
        standards: Vec<String>,
        /// Output CSV path; `-` writes stdout
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Generate a synthetic cohort-driven table
    Synth {
        /// Built-in scenario: baby-boom
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        /// Scenario config file
        #[arg(long)]
        scenario: Option<String>,
        /// Emit exact expected death counts instead of rounding
        #[arg(long)]
        exact: bool,
        /// Output CSV path; `-` writes stdout
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Native schema: year,age,sex,region,deaths,population
    Csv,
    /// Tab-delimited public-database export
    Wonder,
}

#[derive(Args)]
struct InputArgs {
    /// Input counts file; `-` reads stdin
    #[arg(default_value = "-")]
    input: String,
    /// Input format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Tolerate extra columns in native CSV input
    #[arg(long)]
    allow_extra_columns: bool,
    /// Sentinel token marking suppressed export counts (repeatable;
    /// default: Suppressed, Not Applicable)
    #[arg(long = "sentinel")]
    sentinels: Vec<String>,
}

#[derive(Args)]
struct SeriesArgs {
    /// Analysis band LO-HI (default: the table's full band)
    #[arg(long)]
    band: Option<AgeBand>,
    /// Comma-separated grouping dimensions: sex, region
    #[arg(long, default_value = "")]
    group_by: String,
    /// Output CSV path; `-` writes stdout
    #[arg(long, default_value = "-")]
    out: String,
    /// Optional SVG chart path; `-` writes stdout
    #[arg(long)]
    plot: Option<String>,
    /// Plot rates as raw fractions instead of per-100k
    #[arg(long)]
    fraction: bool,
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_IO_USAGE
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => EXIT_IO_USAGE,
                _ => EXIT_DOMAIN,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate { input, band, years } => cmd_validate(&input, band, years.as_deref()),
        Command::Crude { input, series } => cmd_crude(&input, &series),
        Command::MeanAge { input, series } => cmd_mean_age(&input, &series),
        Command::Adjust {
            input,
            series,
            standards,
            sex_standard,
        } => cmd_adjust(&input, &series, &standards, &sex_standard),
        Command::Counterfactual {
            input,
            series,
            ref_year,
        } => cmd_counterfactual(&input, &series, &ref_year),
        Command::Decompose {
            input,
            band,
            group_by,
            from,
            to,
            ref_year,
            standards,
            out,
        } => cmd_decompose(
            &input, band, &group_by, &from, &to, &ref_year, &standards, &out,
        ),
        Command::Synth {
            preset,
            scenario,
            exact,
            out,
        } => cmd_synth(preset.as_deref(), scenario.as_deref(), exact, &out),
    }
}

fn open_input(path: &str) -> Result<Box<dyn Read>> {
    if path == "-" {
        Ok(Box::new(io::stdin()))
    } else {
        Ok(Box::new(File::open(path)?))
    }
}

fn open_output(path: &str) -> Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(io::stdout()))
    } else {
        Ok(Box::new(File::create(path)?))
    }
}

fn color_enabled() -> bool {
    std::env::var_os("AGESTAND_NO_COLOR").is_none() && io::stdout().is_terminal()
}

fn parse_input(
    input: &InputArgs,
    expected_band: Option<AgeBand>,
    expected_years: Option<(i32, i32)>,
) -> Result<(Option<CountsTable>, crate::ingest::ValidationReport)> {
    let reader = open_input(&input.input)?;
    match input.format {
        Format::Csv => parse_counts_csv_checked(
            reader,
            &CsvOptions {
                allow_extra_columns: input.allow_extra_columns,
            },
            expected_band,
            expected_years,
        ),
        Format::Wonder => {
            let mut opts = WonderOptions::default();
            if !input.sentinels.is_empty() {
                opts.sentinels = input.sentinels.clone();
            }
            parse_wonder_export_checked(reader, &opts, expected_band, expected_years)
        }
    }
}

/// Load a table for analysis; validation errors are printed and fail with
/// a domain error.
fn load_table(input: &InputArgs) -> Result<CountsTable> {
    let (table, report) = parse_input(input, None, None)?;
    for warning in &report.warnings {
        eprintln!(
            "warning [{}] {}: {}",
            warning.rule, warning.location, warning.message
        );
    }
    match table {
        Some(table) => Ok(table),
        None => {
            eprint!("{}", report.render(false));
            Err(Error::InvalidInput(report.errors.len()))
        }
    }
}

fn parse_year_range(s: &str) -> Result<(i32, i32)> {
    let bad = || Error::InvalidConfig(format!("invalid year range `{s}` (expected FIRST-LAST)"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let first = a.trim().parse().map_err(|_| bad())?;
    let last = b.trim().parse().map_err(|_| bad())?;
    if first > last {
        return Err(bad());
    }
    Ok((first, last))
}

fn cmd_validate(input: &InputArgs, band: Option<AgeBand>, years: Option<&str>) -> Result<i32> {
    let years = years.map(parse_year_range).transpose()?;
    let (_, report) = parse_input(input, band, years)?;
    print!("{}", report.render(color_enabled()));
    Ok(if report.is_valid() {
        EXIT_OK
    } else {
        EXIT_DOMAIN
    })
}

/// Resolve the analysis band and build the base pipeline config.
fn base_config(
    table: &CountsTable,
    band: Option<AgeBand>,
    group_by: &str,
) -> Result<PipelineConfig> {
    let band = band.unwrap_or_else(|| table.band());
    table.check_band(band)?;
    let mut config = PipelineConfig::new(band);
    config.group_by = group_by.parse::<GroupBy>()?;
    Ok(config)
}

fn parse_standards(tokens: &[String]) -> Result<Vec<StandardSpec>> {
    if tokens.is_empty() {
        return Ok(vec![StandardSpec::Uniform]);
    }
    tokens.iter().map(|t| t.parse()).collect()
}

// Display formats: per-100k at one decimal (figure-style), fractions at
// eight significant digits (machine-precision escape hatch).
fn per100k(rate: f64) -> String {
    format!("{:.1}", rate * 100_000.0)
}

fn fraction(rate: f64) -> String {
    format!("{rate:.7e}")
}

fn years_value(v: f64) -> String {
    format!("{v:.4}")
}

fn pct(v: f64) -> String {
    format!("{v:.4}")
}

fn share_str(share: Option<f64>) -> String {
    match share {
        Some(v) => format!("{v:.6}"),
        None => "undefined".to_string(),
    }
}

fn csv_writer(out: &str) -> Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(open_output(out)?))
}

fn write_plot(path: &str, spec: &ChartSpec) -> Result<()> {
    let svg = render_svg(spec)?;
    let mut out = open_output(path)?;
    out.write_all(svg.as_bytes())?;
    Ok(())
}

fn y_unit(fraction_flag: bool) -> YUnit {
    if fraction_flag {
        YUnit::Fraction
    } else {
        YUnit::Per100k
    }
}

fn cmd_crude(input: &InputArgs, series: &SeriesArgs) -> Result<i32> {
    let table = load_table(input)?;
    let config = base_config(&table, series.band, &series.group_by)?;
    let result = run_pipeline(&table, &config)?;

    let mut w = csv_writer(&series.out)?;
    w.write_record(["stratum", "year", "rate_per100k", "rate_fraction"])
        .map_err(csv_io)?;
    for (stratum, output) in &result.strata {
        for (year, rate) in output.crude.iter() {
            w.write_record(&[
                stratum.to_string(),
                year.to_string(),
                per100k(rate),
                fraction(rate),
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;

    if let Some(plot) = &series.plot {
        let mut spec = ChartSpec::new("Crude mortality rate", y_unit(series.fraction));
        for (stratum, output) in &result.strata {
            spec.push(ChartSeries::from_rate_series(
                stratum.to_string(),
                &output.crude,
            ));
        }
        write_plot(plot, &spec)?;
    }
    Ok(EXIT_OK)
}

fn cmd_mean_age(input: &InputArgs, series: &SeriesArgs) -> Result<i32> {
    let table = load_table(input)?;
    let config = base_config(&table, series.band, &series.group_by)?;
    let result = run_pipeline(&table, &config)?;

    let mut w = csv_writer(&series.out)?;
    w.write_record(["stratum", "year", "mean_age_years"])
        .map_err(csv_io)?;
    for (stratum, output) in &result.strata {
        for (&year, &age) in &output.mean_age {
            w.write_record(&[stratum.to_string(), year.to_string(), years_value(age)])
                .map_err(csv_io)?;
        }
    }
    w.flush()?;

    if let Some(plot) = &series.plot {
        let mut spec = ChartSpec::new("Mean age", YUnit::Years);
        for (stratum, output) in &result.strata {
            spec.push(ChartSeries::new(
                stratum.to_string(),
                output.mean_age.iter().map(|(&y, &v)| (y, v)).collect(),
            ));
        }
        write_plot(plot, &spec)?;
    }
    Ok(EXIT_OK)
}

fn cmd_adjust(
    input: &InputArgs,
    series: &SeriesArgs,
    standards: &[String],
    sex_standard: &str,
) -> Result<i32> {
    let table = load_table(input)?;
    let mut config = base_config(&table, series.band, &series.group_by)?;
    config.standards = parse_standards(standards)?;
    config.sex_standard = sex_standard.parse::<SexStandard>()?;
    let result = run_pipeline(&table, &config)?;

    let mut w = csv_writer(&series.out)?;
    w.write_record([
        "stratum",
        "standard",
        "year",
        "rate_per100k",
        "rate_fraction",
    ])
    .map_err(csv_io)?;
    for (stratum, output) in &result.strata {
        for (descriptor, adjusted) in &output.adjusted {
            for (year, rate) in adjusted.iter() {
                w.write_record(&[
                    stratum.to_string(),
                    descriptor.clone(),
                    year.to_string(),
                    per100k(rate),
                    fraction(rate),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;

    if let Some(plot) = &series.plot {
        let single_stratum = result.strata.len() == 1;
        let single_standard = config.standards.len() == 1;
        let mut spec = ChartSpec::new("Age-adjusted mortality rate", y_unit(series.fraction));
        for (stratum, output) in &result.strata {
            for (descriptor, adjusted) in &output.adjusted {
                let label = if single_stratum {
                    descriptor.clone()
                } else if single_standard {
                    stratum.to_string()
                } else {
                    format!("{stratum} {descriptor}")
                };
                spec.push(ChartSeries::from_rate_series(label, adjusted));
            }
        }
        write_plot(plot, &spec)?;
    }
    Ok(EXIT_OK)
}

fn cmd_counterfactual(input: &InputArgs, series: &SeriesArgs, ref_year: &str) -> Result<i32> {
    let table = load_table(input)?;
    let mut config = base_config(&table, series.band, &series.group_by)?;
    config.ref_year = ref_year.parse::<YearToken>()?;
    let result = run_pipeline(&table, &config)?;

    let mut w = csv_writer(&series.out)?;
    w.write_record([
        "stratum",
        "year",
        "crude_per100k",
        "crude_fraction",
        "counterfactual_per100k",
        "counterfactual_fraction",
    ])
    .map_err(csv_io)?;
    for (stratum, output) in &result.strata {
        for (year, crude) in output.crude.iter() {
            let cf = output.counterfactual.get(year).unwrap();
            w.write_record(&[
                stratum.to_string(),
                year.to_string(),
                per100k(crude),
                fraction(crude),
                per100k(cf),
                fraction(cf),
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;

    if let Some(plot) = &series.plot {
        let single = result.strata.len() == 1;
        let mut spec = ChartSpec::new(
            format!(
                "Crude vs composition counterfactual (rates at {})",
                result.ref_year
            ),
            y_unit(series.fraction),
        );
        for (stratum, output) in &result.strata {
            let (crude_label, cf_label) = if single {
                ("crude".to_string(), "counterfactual".to_string())
            } else {
                (
                    format!("{stratum} crude"),
                    format!("{stratum} counterfactual"),
                )
            };
            spec.push(ChartSeries::from_rate_series(crude_label, &output.crude));
            spec.push(ChartSeries::from_rate_series(
                cf_label,
                &output.counterfactual,
            ));
        }
        write_plot(plot, &spec)?;
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_decompose(
    input: &InputArgs,
    band: Option<AgeBand>,
    group_by: &str,
    from: &str,
    to: &str,
    ref_year: &str,
    standards: &[String],
    out: &str,
) -> Result<i32> {
    let table = load_table(input)?;
    let mut config = base_config(&table, band, group_by)?;
    config.standards = parse_standards(standards)?;
    config.ref_year = ref_year.parse::<YearToken>()?;
    config.intervals = vec![(from.parse::<YearToken>()?, to.parse::<YearToken>()?)];
    let result = run_pipeline(&table, &config)?;

    let mut w = csv_writer(out)?;
    w.write_record([
        "stratum",
        "from",
        "to",
        "ref_year",
        "crude_change_per100k",
        "composition_change_per100k",
        "share",
        "standard",
        "crude_trend_pct",
        "adjusted_trend_pct",
        "bias_pct_points",
    ])
    .map_err(csv_io)?;
    let n_standards = config.standards.len();
    for (stratum, output) in &result.strata {
        for (i, decomposition) in output.decompositions.iter().enumerate() {
            for bias in &output.bias[i * n_standards..(i + 1) * n_standards] {
                w.write_record(&[
                    stratum.to_string(),
                    decomposition.interval.0.to_string(),
                    decomposition.interval.1.to_string(),
                    decomposition.ref_year.to_string(),
                    per100k(decomposition.crude_change),
                    per100k(decomposition.composition_change),
                    share_str(decomposition.share),
                    bias.standard.clone(),
                    pct(bias.crude_trend_pct),
                    pct(bias.adjusted_trend_pct),
                    pct(bias.bias_pct_points),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn cmd_synth(preset: Option<&str>, scenario: Option<&str>, exact: bool, out: &str) -> Result<i32> {
    let mut scenario = match (preset, scenario) {
        (Some(name), None) => match name {
            "baby-boom" => baby_boom_scenario(),
            other => {
                return Err(Error::Scenario(format!(
                    "unknown preset `{other}` (available: baby-boom)"
                )))
            }
        },
        (None, Some(path)) => {
            let mut text = String::new();
            open_input(path)?.read_to_string(&mut text)?;
            Scenario::from_config(&text)?
        }
        _ => {
            return Err(Error::Scenario(
                "exactly one of --preset or --scenario is required".to_string(),
            ))
        }
    };
    if exact {
        scenario.rounding = Rounding::Exact;
    }
    let table = synth_table(&scenario)?;
    let out = open_output(out)?;
    serialize_counts_csv(&table, out)?;
    Ok(EXIT_OK)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(io::Error::other(e))
}
