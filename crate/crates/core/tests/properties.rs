//! Property tests for the numerical invariants the library promises.

use agestand::decompose::{counterfactual_series, decompose_change};
use agestand::ingest::{parse_counts_csv, to_csv_string, CsvOptions};
use agestand::standardize::{
    adjusted_series, age_specific_rate, crude_rate, mean_age, rates_for_year, standard_from_year,
    standardized_rate, uniform_standard,
};
use agestand::types::{
    AgeBand, AgeSpecificRates, Cell, CountsTable, Sex, StandardPopulation, StratumKey,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn band_strategy(max_width: u32) -> impl Strategy<Value = AgeBand> {
    (30u32..=70, 1..=max_width).prop_map(|(lo, width)| AgeBand::new(lo, lo + width - 1).unwrap())
}

/// (deaths, population) with deaths <= population and population >= 1.
fn cell_strategy(max_population: u64) -> impl Strategy<Value = (u64, u64)> {
    (1..=max_population).prop_flat_map(|population| (0..=population, Just(population)))
}

#[derive(Debug, Clone)]
struct SmallTable {
    band: AgeBand,
    years: Vec<i32>,
    stratum: StratumKey,
    table: CountsTable,
}

fn small_table(max_width: u32, max_years: usize) -> impl Strategy<Value = SmallTable> {
    (band_strategy(max_width), 1..=max_years, 1980i32..2010).prop_flat_map(
        |(band, n_years, first_year)| {
            let n_cells = band.width() * n_years;
            proptest::collection::vec(cell_strategy(10_000), n_cells..=n_cells).prop_map(
                move |cells| {
                    let years: Vec<i32> = (0..n_years).map(|i| first_year + i as i32).collect();
                    let stratum = StratumKey::new(Sex::All);
                    let mut iter = cells.into_iter();
                    let mut table_cells = Vec::new();
                    for &year in &years {
                        for age in band.ages() {
                            let (deaths, population) = iter.next().unwrap();
                            table_cells
                                .push(((year, age, stratum.clone()), Cell { deaths, population }));
                        }
                    }
                    SmallTable {
                        band,
                        years,
                        stratum: stratum.clone(),
                        table: CountsTable::from_cells(band, table_cells).unwrap(),
                    }
                },
            )
        },
    )
}

fn rates_and_weights(max_width: u32) -> impl Strategy<Value = (AgeBand, Vec<f64>, Vec<f64>)> {
    band_strategy(max_width).prop_flat_map(|band| {
        let width = band.width();
        (
            Just(band),
            proptest::collection::vec(0.0f64..=1.0, width..=width),
            proptest::collection::vec(0.0f64..1000.0, width..=width)
                .prop_filter("weights must not be all ~zero", |w| {
                    w.iter().sum::<f64>() > 1e-6
                }),
        )
    })
}

proptest! {
    #[test]
    fn weight_scaling_invariance((band, rates, weights) in rates_and_weights(10),
                                 scale in 1e-3f64..1e3) {
        let rates = AgeSpecificRates::new(band, rates).unwrap();
        let std_raw = StandardPopulation::new(band, weights.clone()).unwrap();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let std_scaled = StandardPopulation::new(band, scaled).unwrap();
        let a = standardized_rate(&rates, &std_raw).unwrap();
        let b = standardized_rate(&rates, &std_scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn standardized_rate_bounded_by_extremes((band, rates, weights) in rates_and_weights(10)) {
        let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rates = AgeSpecificRates::new(band, rates).unwrap();
        let std = StandardPopulation::new(band, weights).unwrap();
        let value = standardized_rate(&rates, &std).unwrap();
        prop_assert!(value >= lo - 1e-12 && value <= hi + 1e-12, "{value} outside [{lo}, {hi}]");
    }

    #[test]
    fn width_one_band_collapses(t in small_table(1, 5), weight in 0.1f64..100.0) {
        let age = t.band.lo();
        for &year in &t.years {
            let specific = age_specific_rate(&t.table, year, age, &t.stratum).unwrap();
            let crude = crude_rate(&t.table, year, t.band, &t.stratum).unwrap();
            prop_assert_eq!(crude, specific);
            let rates = rates_for_year(&t.table, year, t.band, &t.stratum).unwrap();
            let std = StandardPopulation::new(t.band, vec![weight]).unwrap();
            let standardized = standardized_rate(&rates, &std).unwrap();
            prop_assert!((standardized - specific).abs() <= 1e-12);
        }
    }

    #[test]
    fn mean_age_stays_in_band(t in small_table(10, 8)) {
        for &year in &t.years {
            let m = mean_age(&t.table, year, t.band, &t.stratum).unwrap();
            prop_assert!(m >= t.band.lo() as f64 && m <= t.band.hi() as f64);
        }
    }

    #[test]
    fn uniform_population_equals_uniform_standard(
        band in band_strategy(10),
        populations in proptest::collection::vec(1u64..100_000, 1..8),
        seed in any::<u64>(),
    ) {
        // equal population at every age within a year
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let stratum = StratumKey::new(Sex::All);
        let mut cells = Vec::new();
        for (i, &population) in populations.iter().enumerate() {
            let year = 2000 + i as i32;
            for age in band.ages() {
                let deaths = rand::Rng::random_range(&mut rng, 0..=population);
                cells.push(((year, age, stratum.clone()), Cell { deaths, population }));
            }
        }
        let table = CountsTable::from_cells(band, cells).unwrap();
        let std = uniform_standard(band);
        for (i, _) in populations.iter().enumerate() {
            let year = 2000 + i as i32;
            let crude = crude_rate(&table, year, band, &stratum).unwrap();
            let rates = rates_for_year(&table, year, band, &stratum).unwrap();
            let adjusted = standardized_rate(&rates, &std).unwrap();
            prop_assert!((crude - adjusted).abs() <= 1e-12, "{crude} vs {adjusted}");
        }
    }

    #[test]
    fn year_standard_anchors_to_crude(t in small_table(8, 8), pick in any::<proptest::sample::Index>()) {
        let anchor = t.years[pick.index(t.years.len())];
        let std = standard_from_year(&t.table, anchor, t.band, &t.stratum).unwrap();
        let series = adjusted_series(&t.table, t.band, &t.stratum, &std, "year").unwrap();
        let crude = crude_rate(&t.table, anchor, t.band, &t.stratum).unwrap();
        prop_assert!((series.get(anchor).unwrap() - crude).abs() <= 1e-12);
    }

    #[test]
    fn counterfactual_anchors_exactly(t in small_table(8, 8), pick in any::<proptest::sample::Index>()) {
        let ref_year = t.years[pick.index(t.years.len())];
        let series = counterfactual_series(&t.table, t.band, &t.stratum, ref_year).unwrap();
        let crude = crude_rate(&t.table, ref_year, t.band, &t.stratum).unwrap();
        prop_assert_eq!(series.get(ref_year).unwrap(), crude);
    }

    #[test]
    fn constant_rates_make_counterfactual_equal_crude(
        band in band_strategy(6),
        populations in proptest::collection::vec(1u64..5_000, 2..6),
        numerator in 0u64..=100,
    ) {
        // every cell shares rate numerator/100 via deaths = pop * n / 100,
        // population chosen divisible by 100 so the rate is exact
        let stratum = StratumKey::new(Sex::All);
        let mut cells = Vec::new();
        for (i, &base) in populations.iter().enumerate() {
            let year = 2000 + i as i32;
            for (j, age) in band.ages().enumerate() {
                let population = (base + j as u64) * 100;
                let deaths = population / 100 * numerator;
                cells.push(((year, age, stratum.clone()), Cell { deaths, population }));
            }
        }
        let table = CountsTable::from_cells(band, cells).unwrap();
        let last = table.last_year();
        let series = counterfactual_series(&table, band, &stratum, last).unwrap();
        for &year in table.years() {
            let crude = crude_rate(&table, year, band, &stratum).unwrap();
            prop_assert!((series.get(year).unwrap() - crude).abs() <= 1e-12);
        }
    }

    #[test]
    fn decompose_is_antisymmetric(t in small_table(5, 6)) {
        prop_assume!(t.years.len() >= 2);
        let t0 = t.years[0];
        let t1 = *t.years.last().unwrap();
        let ref_year = t1;
        let forward = decompose_change(&t.table, t.band, &t.stratum, t0, t1, ref_year).unwrap();
        let backward = decompose_change(&t.table, t.band, &t.stratum, t1, t0, ref_year).unwrap();
        prop_assert_eq!(forward.crude_change, -backward.crude_change);
        prop_assert_eq!(forward.composition_change, -backward.composition_change);
        if let (Some(a), Some(b)) = (forward.share, backward.share) {
            prop_assert_eq!(a, b);
        } else {
            prop_assert_eq!(forward.share.is_none(), backward.share.is_none());
        }
    }

    #[test]
    fn share_invariant_under_population_scaling(t in small_table(5, 6), factor in 2u64..=50) {
        prop_assume!(t.years.len() >= 2);
        let t0 = t.years[0];
        let t1 = *t.years.last().unwrap();
        let c0 = crude_rate(&t.table, t0, t.band, &t.stratum).unwrap();
        let c1 = crude_rate(&t.table, t1, t.band, &t.stratum).unwrap();
        // avoid catastrophic cancellation in the denominator of the share
        prop_assume!((c1 - c0).abs() > 1e-3 * c0.max(c1).max(1e-12));

        let scaled_cells: Vec<_> = t
            .table
            .iter_cells()
            .map(|(stratum, year, age, cell)| {
                (
                    (year, age, stratum.clone()),
                    Cell {
                        deaths: cell.deaths,
                        population: cell.population * factor,
                    },
                )
            })
            .collect();
        let scaled = CountsTable::from_cells(t.band, scaled_cells).unwrap();
        let original = decompose_change(&t.table, t.band, &t.stratum, t0, t1, t1).unwrap();
        let rescaled = decompose_change(&scaled, t.band, &t.stratum, t0, t1, t1).unwrap();
        let (a, b) = (original.share.unwrap(), rescaled.share.unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn csv_round_trip_is_identity(
        t in small_table(6, 6),
        sex in prop_oneof![Just(Sex::Female), Just(Sex::Male), Just(Sex::All)],
        region in proptest::option::of("[a-z]{1,8}"),
    ) {
        // relabel the stratum to cover sexes and regions
        let mut key = StratumKey::new(sex);
        if let Some(region) = &region {
            key = key.with_region(region).unwrap();
        }
        let cells: Vec<_> = t
            .table
            .iter_cells()
            .map(|(_, year, age, cell)| ((year, age, key.clone()), cell))
            .collect();
        let table = CountsTable::from_cells(t.band, cells).unwrap();
        let text = to_csv_string(&table);
        let (parsed, report) = parse_counts_csv(text.as_bytes(), &CsvOptions::default()).unwrap();
        prop_assert!(report.is_valid(), "{report:?}");
        prop_assert_eq!(parsed.unwrap(), table);
    }

    #[test]
    fn parse_is_row_order_insensitive(t in small_table(5, 5), seed in any::<u64>()) {
        let text = to_csv_string(&t.table);
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        lines.shuffle(&mut rng);
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let (parsed, report) =
            parse_counts_csv(shuffled.as_bytes(), &CsvOptions::default()).unwrap();
        prop_assert!(report.is_valid());
        prop_assert_eq!(parsed.unwrap(), t.table.clone());
    }

    #[test]
    fn table_iff_no_errors(text in "[ -~\n]{0,300}") {
        // arbitrary printable input: the parser must uphold "table iff no
        // errors" and never panic
        let (table, report) = parse_counts_csv(text.as_bytes(), &CsvOptions::default()).unwrap();
        prop_assert_eq!(table.is_some(), report.is_valid());
    }
}

#[test]
fn stratum_independence_under_mutation() {
    // mutating other strata must leave a stratum's pipeline output
    // bitwise identical
    use agestand::stratify::{run_pipeline, GroupBy, PipelineConfig};

    let band = AgeBand::new(45, 46).unwrap();
    let f = StratumKey::new(Sex::Female);
    let m = StratumKey::new(Sex::Male);
    let base = vec![
        (
            (1999, 45, f.clone()),
            Cell {
                deaths: 3,
                population: 700,
            },
        ),
        (
            (1999, 46, f.clone()),
            Cell {
                deaths: 4,
                population: 650,
            },
        ),
        (
            (2000, 45, f.clone()),
            Cell {
                deaths: 5,
                population: 720,
            },
        ),
        (
            (2000, 46, f.clone()),
            Cell {
                deaths: 2,
                population: 640,
            },
        ),
        (
            (1999, 45, m.clone()),
            Cell {
                deaths: 9,
                population: 800,
            },
        ),
        (
            (1999, 46, m.clone()),
            Cell {
                deaths: 1,
                population: 810,
            },
        ),
        (
            (2000, 45, m.clone()),
            Cell {
                deaths: 7,
                population: 790,
            },
        ),
        (
            (2000, 46, m.clone()),
            Cell {
                deaths: 6,
                population: 805,
            },
        ),
    ];
    let mutated: Vec<_> = base
        .iter()
        .map(|((year, age, key), cell)| {
            let cell = if key.sex == Sex::Male {
                Cell {
                    deaths: cell.deaths + 1,
                    population: cell.population * 3,
                }
            } else {
                *cell
            };
            ((*year, *age, key.clone()), cell)
        })
        .collect();

    let table_a = CountsTable::from_cells(band, base).unwrap();
    let table_b = CountsTable::from_cells(band, mutated).unwrap();
    let mut config = PipelineConfig::new(band);
    config.group_by = GroupBy {
        sex: true,
        region: false,
    };
    let result_a = run_pipeline(&table_a, &config).unwrap();
    let result_b = run_pipeline(&table_b, &config).unwrap();
    assert_eq!(result_a.get(&f).unwrap(), result_b.get(&f).unwrap());
    assert_ne!(result_a.get(&m).unwrap(), result_b.get(&m).unwrap());
}
