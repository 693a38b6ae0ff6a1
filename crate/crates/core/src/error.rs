use crate::types::{AgeBand, StratumKey};

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid age band: lo {lo} exceeds hi {hi}")]
    InvalidBand { lo: u32, hi: u32 },

    #[error("band {requested} is not covered by the table band {available}")]
    BandOutOfRange {
        requested: AgeBand,
        available: AgeBand,
    },

    #[error("band mismatch: rates cover {rates}, standard covers {standard}")]
    BandMismatch { rates: AgeBand, standard: AgeBand },

    #[error("no cell for year {year}, age {age}, stratum {stratum}")]
    MissingCell {
        year: i32,
        age: u32,
        stratum: StratumKey,
    },

    #[error("duplicate cell for year {year}, age {age}, stratum {stratum}")]
    DuplicateCell {
        year: i32,
        age: u32,
        stratum: StratumKey,
    },

    #[error("zero population at year {year}, age {age}, stratum {stratum}")]
    ZeroPopulation {
        year: i32,
        age: u32,
        stratum: StratumKey,
    },

    #[error(
        "deaths {deaths} exceed population {population} at year {year}, age {age}, stratum {stratum}"
    )]
    DeathsExceedPopulation {
        year: i32,
        age: u32,
        stratum: StratumKey,
        deaths: u64,
        population: u64,
    },

    #[error("age {age} lies outside band {band}")]
    AgeOutsideBand { age: u32, band: AgeBand },

    #[error("year {0} not present in table")]
    UnknownYear(i32),

    #[error("stratum {0} not present in table")]
    UnknownStratum(StratumKey),

    #[error("table has no cells")]
    EmptyTable,

    #[error("count overflow while aggregating strata")]
    CountOverflow,

    #[error("rate {value} at year {year} outside [0, 1]")]
    RateOutOfRange { year: i32, value: f64 },

    #[error("weights must be nonnegative and sum to a positive value")]
    InvalidWeights,

    #[error("expected {expected} per-age values for band {band}, got {got}")]
    WrongVectorLength {
        band: AgeBand,
        expected: usize,
        got: usize,
    },

    #[error("table has no region labels; cannot group by region")]
    NoRegionLabels,

    #[error("region label is empty")]
    EmptyRegion,

    #[error("interval endpoints coincide: {0} given twice")]
    DegenerateInterval(i32),

    #[error("{series} value at year {year} is zero; percent change is undefined")]
    ZeroBaseline { series: &'static str, year: i32 },

    #[error("invalid standard token `{0}` (expected uniform, first, last, or year:YYYY)")]
    InvalidStandardToken(String),

    #[error("invalid year token `{0}` (expected first, last, or a calendar year)")]
    InvalidYearToken(String),

    #[error("invalid group-by spec `{0}` (expected a comma-separated subset of sex,region)")]
    InvalidGroupBy(String),

    #[error("pipeline config: {0}")]
    InvalidConfig(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("chart: {0}")]
    Chart(String),

    #[error("input failed validation with {0} error(s)")]
    InvalidInput(usize),

    #[error("stratum {stratum}: {source}")]
    InStratum {
        stratum: StratumKey,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Tag an error with the stratum the pipeline was working on.
    pub(crate) fn in_stratum(self, stratum: &StratumKey) -> Error {
        Error::InStratum {
            stratum: stratum.clone(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
