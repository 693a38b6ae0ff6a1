//! C ABI for the agestand library.
//!
//! Tables are opaque handles created by the parse functions and released
//! with [`agestand_table_free`]. Every fallible call returns an
//! [`AgestandStatus`]; on failure a message is stashed per thread and
//! retrievable via [`agestand_last_error`].
//!
//! Strata are addressed by (sex, region): requesting `ALL` sex on a table
//! with female/male rows pools them, and a null region pools across
//! regions, matching the library's grouping semantics.

use std::cell::RefCell;
use std::ffi::{CStr, CString};

use libc::c_char;

use agestand::standardize::{
    adjusted_series, crude_rate, mean_age, standard_from_year, uniform_standard,
};
use agestand::stratify::{aggregate, GroupBy, StandardSpec};
use agestand::types::{AgeBand, CountsTable, RateSeries, Sex, StratumKey};
use agestand::Error;

/// Opaque handle to a parsed counts table.
pub struct AgestandTable {
    inner: CountsTable,
}

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgestandStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input failed parsing or validation; see agestand_last_error.
    ParseError = 3,
    /// A domain error (unknown year, band mismatch, ...); see
    /// agestand_last_error.
    DomainError = 4,
    /// The caller's buffer is too small; the required length was written
    /// to the length output.
    BufferTooSmall = 5,
}

/// Sex selector for stratum addressing.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgestandSex {
    Female = 0,
    Male = 1,
    All = 2,
}

impl From<AgestandSex> for Sex {
    fn from(sex: AgestandSex) -> Sex {
        match sex {
            AgestandSex::Female => Sex::Female,
            AgestandSex::Male => Sex::Male,
            AgestandSex::All => Sex::All,
        }
    }
}

/// Decomposition of a crude change into its composition-driven part.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AgestandDecomposition {
    pub crude_change: f64,
    pub composition_change: f64,
    /// composition_change / crude_change; meaningful only when
    /// `share_defined` is nonzero (it is NaN otherwise).
    pub share: f64,
    pub share_defined: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl AsRef<str>) {
    let message = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).unwrap_or_default();
    });
}

fn domain_error(e: &Error) -> AgestandStatus {
    set_error(e.to_string());
    AgestandStatus::DomainError
}

/// Version of the library, as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn agestand_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, as a freshly
/// allocated string. Release it with agestand_string_free. Never null.
#[unsafe(no_mangle)]
pub extern "C" fn agestand_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().clone().into_raw())
}

/// Release a string returned by agestand_last_error.
///
/// # Safety
/// `s` must be a pointer returned by this library and not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

unsafe fn parse_with<F>(
    data: *const u8,
    len: usize,
    out: *mut *mut AgestandTable,
    parse: F,
) -> AgestandStatus
where
    F: FnOnce(&[u8]) -> agestand::Result<(Option<CountsTable>, agestand::ingest::ValidationReport)>,
{
    if data.is_null() || out.is_null() {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    }
    let bytes = unsafe { std::slice::from_raw_parts(data, len) };
    match parse(bytes) {
        Ok((Some(table), _)) => {
            unsafe { *out = Box::into_raw(Box::new(AgestandTable { inner: table })) };
            AgestandStatus::Ok
        }
        Ok((None, report)) => {
            set_error(report.render(false));
            AgestandStatus::ParseError
        }
        Err(e) => {
            set_error(e.to_string());
            AgestandStatus::ParseError
        }
    }
}

/// Parse the native CSV schema (year,age,sex,region,deaths,population).
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be a valid
/// pointer. On `AGESTAND_STATUS_OK` the caller owns the handle written to
/// `*out` and must release it with agestand_table_free.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_table_from_csv(
    data: *const u8,
    len: usize,
    out: *mut *mut AgestandTable,
) -> AgestandStatus {
    unsafe {
        parse_with(data, len, out, |bytes| {
            agestand::ingest::parse_counts_csv(bytes, &agestand::ingest::CsvOptions::default())
        })
    }
}

/// Parse a tab-delimited public-database export.
///
/// # Safety
/// Same contract as agestand_table_from_csv.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_table_from_wonder(
    data: *const u8,
    len: usize,
    out: *mut *mut AgestandTable,
) -> AgestandStatus {
    unsafe {
        parse_with(data, len, out, |bytes| {
            agestand::ingest::parse_wonder_export(
                bytes,
                &agestand::ingest::WonderOptions::default(),
            )
        })
    }
}

/// Release a table handle. A null handle is a no-op.
///
/// # Safety
/// `table` must be a handle from a parse function, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_table_free(table: *mut AgestandTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

unsafe fn table_ref<'a>(table: *const AgestandTable) -> Option<&'a CountsTable> {
    unsafe { table.as_ref() }.map(|t| &t.inner)
}

/// First calendar year of the table; `*out` is untouched on error.
///
/// # Safety
/// `table` must be a live handle; `out` must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_table_first_year(
    table: *const AgestandTable,
    out: *mut i32,
) -> AgestandStatus {
    let (Some(table), false) = (unsafe { table_ref(table) }, out.is_null()) else {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    };
    unsafe { *out = table.first_year() };
    AgestandStatus::Ok
}

/// Last calendar year of the table.
///
/// # Safety
/// `table` must be a live handle; `out` must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_table_last_year(
    table: *const AgestandTable,
    out: *mut i32,
) -> AgestandStatus {
    let (Some(table), false) = (unsafe { table_ref(table) }, out.is_null()) else {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    };
    unsafe { *out = table.last_year() };
    AgestandStatus::Ok
}

/// Number of calendar years in the table.
///
/// # Safety
/// `table` must be a live handle; `out` must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_table_year_count(
    table: *const AgestandTable,
    out: *mut usize,
) -> AgestandStatus {
    let (Some(table), false) = (unsafe { table_ref(table) }, out.is_null()) else {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    };
    unsafe { *out = table.years().len() };
    AgestandStatus::Ok
}

/// Age band covered by the table.
///
/// # Safety
/// `table` must be a live handle; `lo` and `hi` must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_table_band(
    table: *const AgestandTable,
    lo: *mut u32,
    hi: *mut u32,
) -> AgestandStatus {
    let (Some(table), false) = (unsafe { table_ref(table) }, lo.is_null() || hi.is_null()) else {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    };
    unsafe {
        *lo = table.band().lo();
        *hi = table.band().hi();
    }
    AgestandStatus::Ok
}

struct Selection {
    table: CountsTable,
    stratum: StratumKey,
    band: AgeBand,
}

/// Pool the table onto the requested (sex, region) stratum and check the
/// requested band.
unsafe fn select(
    table: *const AgestandTable,
    band_lo: u32,
    band_hi: u32,
    sex: AgestandSex,
    region: *const c_char,
) -> Result<Selection, AgestandStatus> {
    let Some(table) = (unsafe { table_ref(table) }) else {
        set_error("null table handle");
        return Err(AgestandStatus::NullArgument);
    };
    let band = AgeBand::new(band_lo, band_hi).map_err(|e| domain_error(&e))?;
    table.check_band(band).map_err(|e| domain_error(&e))?;
    let region = if region.is_null() {
        None
    } else {
        match unsafe { CStr::from_ptr(region) }.to_str() {
            Ok(s) => Some(s.to_string()),
            Err(_) => {
                set_error("region is not valid UTF-8");
                return Err(AgestandStatus::InvalidUtf8);
            }
        }
    };
    let sex: Sex = sex.into();
    let group_by = GroupBy {
        sex: sex != Sex::All,
        region: region.is_some(),
    };
    let pooled = aggregate(table, group_by).map_err(|e| domain_error(&e))?;
    let mut stratum = StratumKey::new(sex);
    if let Some(region) = &region {
        stratum = stratum.with_region(region).map_err(|e| domain_error(&e))?;
    }
    pooled
        .check_stratum(&stratum)
        .map_err(|e| domain_error(&e))?;
    Ok(Selection {
        table: pooled,
        stratum,
        band,
    })
}

/// Crude rate (total deaths over total population) for one year, as a
/// fraction.
///
/// # Safety
/// `table` must be a live handle; `region` must be null or a
/// NUL-terminated string; `out` must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_crude_rate(
    table: *const AgestandTable,
    year: i32,
    band_lo: u32,
    band_hi: u32,
    sex: AgestandSex,
    region: *const c_char,
    out: *mut f64,
) -> AgestandStatus {
    if out.is_null() {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    }
    let selection = match unsafe { select(table, band_lo, band_hi, sex, region) } {
        Ok(s) => s,
        Err(status) => return status,
    };
    match crude_rate(&selection.table, year, selection.band, &selection.stratum) {
        Ok(value) => {
            unsafe { *out = value };
            AgestandStatus::Ok
        }
        Err(e) => domain_error(&e),
    }
}

/// Population-weighted mean age for one year, in years.
///
/// # Safety
/// Same contract as agestand_crude_rate.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn agestand_mean_age(
    table: *const AgestandTable,
    year: i32,
    band_lo: u32,
    band_hi: u32,
    sex: AgestandSex,
    region: *const c_char,
    out: *mut f64,
) -> AgestandStatus {
    if out.is_null() {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    }
    let selection = match unsafe { select(table, band_lo, band_hi, sex, region) } {
        Ok(s) => s,
        Err(status) => return status,
    };
    match mean_age(&selection.table, year, selection.band, &selection.stratum) {
        Ok(value) => {
            unsafe { *out = value };
            AgestandStatus::Ok
        }
        Err(e) => domain_error(&e),
    }
}

unsafe fn write_series(
    series: &RateSeries,
    years_out: *mut i32,
    rates_out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> AgestandStatus {
    if written.is_null() {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    }
    let needed = series.points().len();
    unsafe { *written = needed };
    if capacity < needed {
        set_error(format!("buffer holds {capacity} points, {needed} needed"));
        return AgestandStatus::BufferTooSmall;
    }
    if years_out.is_null() || rates_out.is_null() {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    }
    for (i, (year, rate)) in series.iter().enumerate() {
        unsafe {
            *years_out.add(i) = year;
            *rates_out.add(i) = rate;
        }
    }
    AgestandStatus::Ok
}

/// Directly standardized series under a standard named by token
/// (`uniform`, `first`, `last`, or `year:YYYY`).
///
/// Writes up to `capacity` (year, rate) pairs in year order and stores the
/// series length in `*written`. Call with `capacity` 0 to query the length
/// (returns `AGESTAND_STATUS_BUFFER_TOO_SMALL`).
///
/// # Safety
/// `table` must be a live handle; `standard` must be a NUL-terminated
/// string; `region` null or NUL-terminated; the output arrays must hold
/// `capacity` elements; `written` must be valid.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn agestand_adjusted_series(
    table: *const AgestandTable,
    band_lo: u32,
    band_hi: u32,
    sex: AgestandSex,
    region: *const c_char,
    standard: *const c_char,
    years_out: *mut i32,
    rates_out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> AgestandStatus {
    if standard.is_null() {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    }
    let Ok(token) = (unsafe { CStr::from_ptr(standard) }).to_str() else {
        set_error("standard token is not valid UTF-8");
        return AgestandStatus::InvalidUtf8;
    };
    let spec: StandardSpec = match token.parse() {
        Ok(spec) => spec,
        Err(e) => return domain_error(&e),
    };
    let selection = match unsafe { select(table, band_lo, band_hi, sex, region) } {
        Ok(s) => s,
        Err(status) => return status,
    };
    let result = (|| {
        let descriptor = spec.descriptor(&selection.table)?;
        let std = match spec {
            StandardSpec::Uniform => uniform_standard(selection.band),
            StandardSpec::Year(token) => {
                let year = token.resolve(&selection.table)?;
                standard_from_year(&selection.table, year, selection.band, &selection.stratum)?
            }
        };
        adjusted_series(
            &selection.table,
            selection.band,
            &selection.stratum,
            &std,
            &descriptor,
        )
    })();
    match result {
        Ok(series) => unsafe { write_series(&series, years_out, rates_out, capacity, written) },
        Err(e) => domain_error(&e),
    }
}

/// Composition-counterfactual series with rates frozen at `ref_year`.
/// Buffer contract as in agestand_adjusted_series.
///
/// # Safety
/// Same contract as agestand_adjusted_series.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn agestand_counterfactual_series(
    table: *const AgestandTable,
    band_lo: u32,
    band_hi: u32,
    sex: AgestandSex,
    region: *const c_char,
    ref_year: i32,
    years_out: *mut i32,
    rates_out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> AgestandStatus {
    let selection = match unsafe { select(table, band_lo, band_hi, sex, region) } {
        Ok(s) => s,
        Err(status) => return status,
    };
    match agestand::decompose::counterfactual_series(
        &selection.table,
        selection.band,
        &selection.stratum,
        ref_year,
    ) {
        Ok(series) => unsafe { write_series(&series, years_out, rates_out, capacity, written) },
        Err(e) => domain_error(&e),
    }
}

/// Decompose the crude change over (t0, t1) with rates frozen at
/// `ref_year`.
///
/// # Safety
/// `table` must be a live handle; `region` null or NUL-terminated; `out`
/// must be valid.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn agestand_decompose(
    table: *const AgestandTable,
    band_lo: u32,
    band_hi: u32,
    sex: AgestandSex,
    region: *const c_char,
    t0: i32,
    t1: i32,
    ref_year: i32,
    out: *mut AgestandDecomposition,
) -> AgestandStatus {
    if out.is_null() {
        set_error("null argument");
        return AgestandStatus::NullArgument;
    }
    let selection = match unsafe { select(table, band_lo, band_hi, sex, region) } {
        Ok(s) => s,
        Err(status) => return status,
    };
    match agestand::decompose::decompose_change(
        &selection.table,
        selection.band,
        &selection.stratum,
        t0,
        t1,
        ref_year,
    ) {
        Ok(result) => {
            unsafe {
                *out = AgestandDecomposition {
                    crude_change: result.crude_change,
                    composition_change: result.composition_change,
                    share: result.share.unwrap_or(f64::NAN),
                    share_defined: result.share.is_some() as u8,
                };
            }
            AgestandStatus::Ok
        }
        Err(e) => domain_error(&e),
    }
}
