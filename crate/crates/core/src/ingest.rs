//! Parsing, validation, and serialization of count data.
//!
//! Two input formats are supported: the native comma-separated schema
//! (`year,age,sex,region,deaths,population`, RFC-4180 quoting) and
//! tab-delimited public mortality-database exports with a trailing notes
//! block and possibly suppressed cells. Both funnel through the same
//! validation pass; a [`CountsTable`] is built if and only if that pass
//! reports no errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;

use crate::error::{Error, Result};
use crate::types::{AgeBand, Cell, CountsTable, Sex, StratumKey};

/// One validation finding: where it happened, which rule fired, and a
/// human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub location: String,
    pub rule: &'static str,
    pub message: String,
}

impl Issue {
    fn new(location: impl Into<String>, rule: &'static str, message: impl Into<String>) -> Self {
        Issue {
            location: location.into(),
            rule,
            message: message.into(),
        }
    }
}

/// Outcome of validating an input stream.
///
/// A table is constructible if and only if `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub row_count: usize,
    pub strata_found: Vec<StratumKey>,
    pub year_range: Option<(i32, i32)>,
    pub ages_found: BTreeSet<u32>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, location: impl Into<String>, rule: &'static str, msg: impl Into<String>) {
        self.errors.push(Issue::new(location, rule, msg));
    }

    fn warn(&mut self, location: impl Into<String>, rule: &'static str, msg: impl Into<String>) {
        self.warnings.push(Issue::new(location, rule, msg));
    }

    /// Render the report as plain text, one finding per line, with a
    /// trailing summary. ANSI color is applied only when `color` is set.
    pub fn render(&self, color: bool) -> String {
        let (red, yellow, reset) = if color {
            ("\x1b[31m", "\x1b[33m", "\x1b[0m")
        } else {
            ("", "", "")
        };
        let mut out = String::new();
        for issue in &self.errors {
            let _ = writeln!(
                out,
                "{red}error{reset} [{}] {}: {}",
                issue.rule, issue.location, issue.message
            );
        }
        for issue in &self.warnings {
            let _ = writeln!(
                out,
                "{yellow}warning{reset} [{}] {}: {}",
                issue.rule, issue.location, issue.message
            );
        }
        let strata: Vec<String> = self.strata_found.iter().map(|s| s.to_string()).collect();
        let years = match self.year_range {
            Some((lo, hi)) => format!("{lo}-{hi}"),
            None => "none".to_string(),
        };
        let ages = match (self.ages_found.first(), self.ages_found.last()) {
            (Some(lo), Some(hi)) => format!("{lo}-{hi}"),
            _ => "none".to_string(),
        };
        let _ = writeln!(
            out,
            "{} rows, {} strata ({}), years {}, ages {}",
            self.row_count,
            self.strata_found.len(),
            strata.join(", "),
            years,
            ages
        );
        let _ = writeln!(
            out,
            "{} errors, {} warnings",
            self.errors.len(),
            self.warnings.len()
        );
        out
    }
}

/// A tokenized input row, ready for table-level validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub location: String,
    pub year: i32,
    pub age: u32,
    pub stratum: StratumKey,
    pub deaths: u64,
    pub population: u64,
}

/// Options for the native CSV parser.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Tolerate columns beyond the native schema (they are ignored with a
    /// warning) instead of rejecting the file.
    pub allow_extra_columns: bool,
}

/// Options for the export adapter.
#[derive(Debug, Clone)]
pub struct WonderOptions {
    /// Tokens that mark a suppressed count; matching rows are dropped with
    /// a warning.
    pub sentinels: Vec<String>,
}

impl Default for WonderOptions {
    fn default() -> Self {
        WonderOptions {
            sentinels: vec!["Suppressed".to_string(), "Not Applicable".to_string()],
        }
    }
}

const NATIVE_HEADER: [&str; 6] = ["year", "age", "sex", "region", "deaths", "population"];

/// Strict nonnegative integer parse: ASCII digits only, so thousands
/// separators, signs, and whitespace are all rejected.
fn parse_count(field: &str) -> Option<u64> {
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    field.parse().ok()
}

fn parse_year(field: &str) -> Option<i32> {
    parse_count(field).and_then(|v| i32::try_from(v).ok())
}

fn parse_age(field: &str) -> Option<u32> {
    parse_count(field).and_then(|v| u32::try_from(v).ok())
}

/// Parse the native CSV schema into a table plus a validation report.
///
/// The table is present exactly when the report carries no errors.
pub fn parse_counts_csv<R: io::Read>(
    reader: R,
    opts: &CsvOptions,
) -> Result<(Option<CountsTable>, ValidationReport)> {
    parse_counts_csv_checked(reader, opts, None, None)
}

/// As [`parse_counts_csv`], additionally checking coverage of a requested
/// band and year range.
pub fn parse_counts_csv_checked<R: io::Read>(
    reader: R,
    opts: &CsvOptions,
    expected_band: Option<AgeBand>,
    expected_years: Option<(i32, i32)>,
) -> Result<(Option<CountsTable>, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut rows = Vec::new();

    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = match csv_reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            report.error("header", "csv-syntax", e.to_string());
            return Ok((None, report));
        }
    };
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, name) in headers.iter().enumerate() {
        let key = name.trim().to_ascii_lowercase();
        if NATIVE_HEADER.contains(&key.as_str()) {
            if index.insert(key.clone(), i).is_some() {
                report.error("header", "header", format!("duplicate column `{key}`"));
            }
        } else if opts.allow_extra_columns {
            report.warn(
                "header",
                "extra-column",
                format!("ignoring column `{name}`"),
            );
        } else {
            report.error(
                "header",
                "extra-column",
                format!("unexpected column `{name}` (pass --allow-extra-columns to ignore)"),
            );
        }
    }
    for required in NATIVE_HEADER {
        if !index.contains_key(required) {
            report.error("header", "header", format!("missing column `{required}`"));
        }
    }
    if !report.errors.is_empty() {
        return Ok((None, report));
    }
    let col = |name: &str| index[name];

    for (record_idx, record) in csv_reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let location = match e.position() {
                    Some(p) => format!("line {}", p.line()),
                    None => format!("record {}", record_idx + 1),
                };
                report.error(location, "csv-syntax", e.to_string());
                continue;
            }
        };
        let location = match record.position() {
            Some(p) => format!("line {}", p.line()),
            None => format!("record {}", record_idx + 1),
        };
        tokenize_row(
            &mut report,
            &mut rows,
            &location,
            record.get(col("year")).unwrap_or(""),
            record.get(col("age")).unwrap_or(""),
            record.get(col("sex")).unwrap_or(""),
            record.get(col("region")).unwrap_or(""),
            record.get(col("deaths")).unwrap_or(""),
            record.get(col("population")).unwrap_or(""),
        );
    }

    let table = finish(&mut report, &rows, expected_band, expected_years);
    Ok((table, report))
}

#[allow(clippy::too_many_arguments)]
fn tokenize_row(
    report: &mut ValidationReport,
    rows: &mut Vec<RawRow>,
    location: &str,
    year: &str,
    age: &str,
    sex: &str,
    region: &str,
    deaths: &str,
    population: &str,
) {
    let mut ok = true;
    let year = parse_year(year.trim()).unwrap_or_else(|| {
        report.error(
            location,
            "numeric",
            format!("year `{}` is not a plain integer", year.trim()),
        );
        ok = false;
        0
    });
    let age = parse_age(age.trim()).unwrap_or_else(|| {
        report.error(
            location,
            "age-code",
            format!("age `{}` is not a plain integer", age.trim()),
        );
        ok = false;
        0
    });
    let sex = Sex::parse_token(sex).unwrap_or_else(|| {
        report.error(
            location,
            "sex-token",
            format!("sex `{}` is not one of female, male, all", sex.trim()),
        );
        ok = false;
        Sex::All
    });
    let deaths = parse_count(deaths.trim()).unwrap_or_else(|| {
        report.error(
            location,
            "numeric",
            format!(
                "deaths `{}` is not a plain nonnegative integer",
                deaths.trim()
            ),
        );
        ok = false;
        0
    });
    let population = parse_count(population.trim()).unwrap_or_else(|| {
        report.error(
            location,
            "numeric",
            format!(
                "population `{}` is not a plain nonnegative integer",
                population.trim()
            ),
        );
        ok = false;
        0
    });
    if !ok {
        return;
    }
    let mut stratum = StratumKey::new(sex);
    if !region.trim().is_empty() {
        stratum = stratum
            .with_region(region)
            .expect("nonempty after trim by construction");
    }
    rows.push(RawRow {
        location: location.to_string(),
        year,
        age,
        stratum,
        deaths,
        population,
    });
}

/// Table-level validation: cell invariants, duplicate keys, and rectangular
/// coverage of `years x band` for every stratum. Pure and idempotent.
pub fn validate(
    rows: &[RawRow],
    expected_band: Option<AgeBand>,
    expected_years: Option<(i32, i32)>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    validate_rows(&mut report, rows, expected_band, expected_years);
    report
}

const MAX_COVERAGE_ERRORS: usize = 100;

fn validate_rows(
    report: &mut ValidationReport,
    rows: &[RawRow],
    expected_band: Option<AgeBand>,
    expected_years: Option<(i32, i32)>,
) {
    report.row_count = rows.len();
    if rows.is_empty() {
        report.error("input", "empty", "no data rows");
        return;
    }

    let mut seen: BTreeMap<(i32, u32, &StratumKey), &str> = BTreeMap::new();
    let mut years: BTreeSet<i32> = BTreeSet::new();
    let mut ages: BTreeSet<u32> = BTreeSet::new();
    let mut strata: BTreeSet<&StratumKey> = BTreeSet::new();

    for row in rows {
        if row.population == 0 {
            report.error(
                &row.location,
                "positive-population",
                format!(
                    "population must be positive at ({}, {}, {})",
                    row.year, row.age, row.stratum
                ),
            );
        }
        if row.deaths > row.population {
            report.error(
                &row.location,
                "deaths-le-population",
                format!(
                    "deaths {} exceed population {} at ({}, {}, {})",
                    row.deaths, row.population, row.year, row.age, row.stratum
                ),
            );
        }
        if let Some(first) = seen.insert((row.year, row.age, &row.stratum), &row.location) {
            report.error(
                &row.location,
                "duplicate",
                format!(
                    "duplicate cell ({}, {}, {}); first seen at {first}",
                    row.year, row.age, row.stratum
                ),
            );
        }
        years.insert(row.year);
        ages.insert(row.age);
        strata.insert(&row.stratum);
    }

    if let Some((lo, hi)) = expected_years {
        years.extend(lo..=hi);
    }
    let band = expected_band.map_or_else(
        || {
            let lo = *ages.first().unwrap();
            let hi = *ages.last().unwrap();
            AgeBand::new(lo, hi).unwrap()
        },
        |b| {
            // inferred coverage must span both the data and the request
            let lo = b.lo().min(*ages.first().unwrap());
            let hi = b.hi().max(*ages.last().unwrap());
            AgeBand::new(lo, hi).unwrap()
        },
    );

    let mut missing = 0usize;
    for stratum in &strata {
        for &year in &years {
            for age in band.ages() {
                if !seen.contains_key(&(year, age, stratum)) {
                    missing += 1;
                    if missing <= MAX_COVERAGE_ERRORS {
                        report.error(
                            "coverage",
                            "coverage",
                            format!("missing cell (year {year}, age {age}, stratum {stratum})"),
                        );
                    }
                }
            }
        }
    }
    if missing > MAX_COVERAGE_ERRORS {
        report.error(
            "coverage",
            "coverage",
            format!(
                "... and {} more missing cells",
                missing - MAX_COVERAGE_ERRORS
            ),
        );
    }

    report.strata_found = strata.into_iter().cloned().collect();
    report.year_range = Some((*years.first().unwrap(), *years.last().unwrap()));
    report.ages_found = ages;
}

/// Run validation and, if clean, build the table.
pub fn build_table(
    rows: &[RawRow],
    expected_band: Option<AgeBand>,
    expected_years: Option<(i32, i32)>,
) -> (Option<CountsTable>, ValidationReport) {
    let mut report = ValidationReport::default();
    let table = finish(&mut report, rows, expected_band, expected_years);
    (table, report)
}

/// Validate tokenized rows and construct the table when the pass is clean.
fn finish(
    report: &mut ValidationReport,
    rows: &[RawRow],
    expected_band: Option<AgeBand>,
    expected_years: Option<(i32, i32)>,
) -> Option<CountsTable> {
    validate_rows(report, rows, expected_band, expected_years);
    if !report.is_valid() {
        return None;
    }
    let lo = *report.ages_found.first().unwrap();
    let hi = *report.ages_found.last().unwrap();
    let band = AgeBand::new(lo, hi).unwrap();
    let cells = rows.iter().map(|row| {
        (
            (row.year, row.age, row.stratum.clone()),
            Cell {
                deaths: row.deaths,
                population: row.population,
            },
        )
    });
    match CountsTable::from_cells(band, cells) {
        Ok(table) => Some(table),
        Err(e) => {
            report.error("input", "table", e.to_string());
            None
        }
    }
}

/// Normalize a header cell for name matching: lowercase, non-alphanumeric
/// runs collapsed to single spaces.
fn normalize_header(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut last_space = true;
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

fn find_column(headers: &[String], candidates: &[&str]) -> Option<usize> {
    for cand in candidates {
        if let Some(idx) = headers.iter().position(|h| h == cand) {
            return Some(idx);
        }
    }
    None
}

/// Parse a tab-delimited public-database export.
///
/// Columns are selected by case-insensitive header-name matching; the
/// trailing notes block (introduced by a line beginning `---` or a cell
/// literally `Notes`) is discarded; suppressed rows become warnings and are
/// excluded.
pub fn parse_wonder_export<R: io::Read>(
    reader: R,
    opts: &WonderOptions,
) -> Result<(Option<CountsTable>, ValidationReport)> {
    parse_wonder_export_checked(reader, opts, None, None)
}

/// As [`parse_wonder_export`], additionally checking coverage of a requested
/// band and year range.
pub fn parse_wonder_export_checked<R: io::Read>(
    mut reader: R,
    opts: &WonderOptions,
    expected_band: Option<AgeBand>,
    expected_years: Option<(i32, i32)>,
) -> Result<(Option<CountsTable>, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = match String::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => {
            report.error("input", "utf8", e.to_string());
            return Ok((None, report));
        }
    };

    // keep the header line; cut everything from the notes block on
    let mut kept = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i > 0 && is_notes_boundary(line) {
            break;
        }
        kept.push(line);
    }
    if kept.is_empty() {
        report.error("input", "empty", "no header line");
        return Ok((None, report));
    }

    let data = kept.join("\n").into_bytes();
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b'\t')
        .flexible(true)
        .from_reader(data.as_slice());

    let headers: Vec<String> = match csv_reader.headers() {
        Ok(h) => h.iter().map(normalize_header).collect(),
        Err(e) => {
            report.error("header", "csv-syntax", e.to_string());
            return Ok((None, report));
        }
    };

    let year_col = find_column(&headers, &["year code", "year"]);
    let age_col = find_column(
        &headers,
        &[
            "single year ages code",
            "single year age code",
            "single year ages",
            "single year age",
            "age code",
            "age",
        ],
    );
    let sex_col = find_column(&headers, &["gender", "gender code", "sex", "sex code"]);
    let region_col = find_column(
        &headers,
        &[
            "census region",
            "census region code",
            "region",
            "region code",
        ],
    );
    let deaths_col = find_column(&headers, &["deaths"]);
    let population_col = find_column(&headers, &["population"]);
    let notes_col = find_column(&headers, &["notes"]);

    for (name, col) in [
        ("year", year_col),
        ("single-year age", age_col),
        ("gender", sex_col),
        ("deaths", deaths_col),
        ("population", population_col),
    ] {
        if col.is_none() {
            report.error("header", "header", format!("column not found: {name}"));
        }
    }
    if !report.errors.is_empty() {
        return Ok((None, report));
    }
    let (year_col, age_col, sex_col) = (year_col.unwrap(), age_col.unwrap(), sex_col.unwrap());
    let (deaths_col, population_col) = (deaths_col.unwrap(), population_col.unwrap());

    let mut rows = Vec::new();
    for (record_idx, record) in csv_reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.error(
                    format!("record {}", record_idx + 1),
                    "csv-syntax",
                    e.to_string(),
                );
                continue;
            }
        };
        let location = match record.position() {
            Some(p) => format!("line {}", p.line()),
            None => format!("record {}", record_idx + 1),
        };
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        // aggregate rows carry a marker in the notes column; they duplicate
        // information already present in the data rows
        if let Some(nc) = notes_col {
            let marker = field(nc);
            if !marker.is_empty() {
                report.warn(
                    &location,
                    "aggregate-row",
                    format!("skipping `{marker}` row"),
                );
                continue;
            }
        }
        let deaths_field = field(deaths_col);
        let population_field = field(population_col);
        if let Some(tok) = [deaths_field, population_field]
            .iter()
            .find(|f| opts.sentinels.iter().any(|s| s == *f))
        {
            report.warn(
                &location,
                "suppressed",
                format!("count `{tok}` is suppressed; row excluded"),
            );
            continue;
        }
        let region = region_col.map(&field).unwrap_or("");
        tokenize_row(
            &mut report,
            &mut rows,
            &location,
            field(year_col),
            field(age_col),
            field(sex_col),
            region,
            deaths_field,
            population_field,
        );
    }

    let table = finish(&mut report, &rows, expected_band, expected_years);
    Ok((table, report))
}

fn is_notes_boundary(line: &str) -> bool {
    let trimmed = line.trim_start_matches('"').trim();
    if trimmed.starts_with("---") {
        return true;
    }
    line.split('\t')
        .any(|cell| cell.trim().trim_matches('"') == "Notes")
}

/// Write a table in the native CSV schema (LF line endings, RFC-4180
/// quoting), in deterministic (stratum, year, age) order.
pub fn serialize_counts_csv<W: io::Write>(table: &CountsTable, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(NATIVE_HEADER).map_err(into_io)?;
    for (stratum, year, age, cell) in table.iter_cells() {
        w.write_record(&[
            year.to_string(),
            age.to_string(),
            stratum.sex.to_string(),
            stratum.region.clone().unwrap_or_default(),
            cell.deaths.to_string(),
            cell.population.to_string(),
        ])
        .map_err(into_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Convenience wrapper around [`serialize_counts_csv`].
pub fn to_csv_string(table: &CountsTable) -> String {
    let mut buf = Vec::new();
    serialize_counts_csv(table, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serializer emits UTF-8")
}

fn into_io(e: csv::Error) -> Error {
    Error::Io(io::Error::other(e))
}
