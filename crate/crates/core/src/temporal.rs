//! Temporal binning and severity association testing.
//!
//! Events are cross-tabulated as an r×2 table of temporal category × severity,
//! tested for independence with Pearson's chi-square, and summarised with
//! Cramér's V. For a two-column table `V = sqrt(χ²/N)`.

use std::fmt;

use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EventRecord, Severity, StudyWindow};

/// Significance level used to annotate reports. It never changes a computed
/// value.
pub const ALPHA: f64 = 0.05;

/// Time-of-day period. Each period covers six hours starting at the lower
/// boundary: Night 00:00–05:59, Morning 06:00–11:59, Afternoon 12:00–17:59,
/// Evening 18:00–23:59.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Period {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl Period {
    pub const ALL: [Period; 4] = [Period::Morning, Period::Afternoon, Period::Evening, Period::Night];

    pub fn name(self) -> &'static str {
        match self {
            Period::Morning => "Morning",
            Period::Afternoon => "Afternoon",
            Period::Evening => "Evening",
            Period::Night => "Night",
        }
    }

    /// First minute of the day belonging to this period.
    pub fn start_minute(self) -> u32 {
        match self {
            Period::Night => 0,
            Period::Morning => 6 * 60,
            Period::Afternoon => 12 * 60,
            Period::Evening => 18 * 60,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn assign_period(timestamp: NaiveDateTime) -> Period {
    period_of_hour(timestamp.hour())
}

fn period_of_hour(hour: u32) -> Period {
    match hour {
        0..=5 => Period::Night,
        6..=11 => Period::Morning,
        12..=17 => Period::Afternoon,
        _ => Period::Evening,
    }
}

const WEEKDAYS: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

const MONTH_NAMES: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

/// Temporal factor with a fixed, ordered category set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemporalFactor {
    /// Four periods, r = 4.
    TimeOfDay,
    /// Monday..Sunday, r = 7.
    DayOfWeek,
    /// Calendar `(year, month)` pairs, in order.
    Month(Vec<(i32, u32)>),
}

impl TemporalFactor {
    /// Month factor over the calendar months touched by `window`.
    pub fn months_of(window: &StudyWindow) -> Self {
        TemporalFactor::Month(window.months())
    }

    pub fn name(&self) -> &'static str {
        match self {
            TemporalFactor::TimeOfDay => "time_of_day",
            TemporalFactor::DayOfWeek => "day_of_week",
            TemporalFactor::Month(_) => "month",
        }
    }

    pub fn n_categories(&self) -> usize {
        match self {
            TemporalFactor::TimeOfDay => 4,
            TemporalFactor::DayOfWeek => 7,
            TemporalFactor::Month(months) => months.len(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            TemporalFactor::TimeOfDay => Period::ALL.iter().map(|p| p.name().to_string()).collect(),
            TemporalFactor::DayOfWeek => WEEKDAYS.iter().map(|d| format!("{d:?}")).collect(),
            TemporalFactor::Month(months) => months
                .iter()
                .map(|&(y, m)| format!("{} {y}", MONTH_NAMES[(m - 1) as usize]))
                .collect(),
        }
    }

    /// Category index of `timestamp`, or `None` when it falls outside the
    /// factor's category set (a month not in the list).
    pub fn category_of(&self, timestamp: NaiveDateTime) -> Option<usize> {
        match self {
            TemporalFactor::TimeOfDay => {
                let p = assign_period(timestamp);
                Period::ALL.iter().position(|q| *q == p)
            }
            TemporalFactor::DayOfWeek => Some(timestamp.weekday().num_days_from_monday() as usize),
            TemporalFactor::Month(months) => months
                .iter()
                .position(|&(y, m)| y == timestamp.year() && m == timestamp.month()),
        }
    }
}

/// Observed counts, one row per temporal category, columns `[High, Low]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    row_labels: Vec<String>,
    observed: Vec<[u64; 2]>,
}

pub const HIGH: usize = 0;
pub const LOW: usize = 1;

impl ContingencyTable {
    pub fn new(row_labels: Vec<String>, observed: Vec<[u64; 2]>) -> Result<Self> {
        if row_labels.len() != observed.len() {
            return Err(Error::Config(format!(
                "{} labels for {} rows",
                row_labels.len(),
                observed.len()
            )));
        }
        if observed.is_empty() {
            return Err(Error::Data("contingency table has no rows".into()));
        }
        Ok(Self { row_labels, observed })
    }

    /// Unlabelled table from `[[high, low], ...]` rows.
    pub fn from_counts(observed: &[[u64; 2]]) -> Result<Self> {
        let labels = (1..=observed.len()).map(|i| i.to_string()).collect();
        Self::new(labels, observed.to_vec())
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn observed(&self) -> &[[u64; 2]] {
        &self.observed
    }

    pub fn n_rows(&self) -> usize {
        self.observed.len()
    }

    pub fn total(&self) -> u64 {
        self.observed.iter().map(|r| r[0] + r[1]).sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.observed.iter().map(|r| r[0] + r[1]).collect()
    }

    pub fn col_totals(&self) -> [u64; 2] {
        self.observed
            .iter()
            .fold([0, 0], |acc, r| [acc[0] + r[0], acc[1] + r[1]])
    }
}

/// Cross-tabulates events by `factor` and severity.
pub fn build_table(events: &[EventRecord], factor: &TemporalFactor) -> Result<ContingencyTable> {
    if events.is_empty() {
        return Err(Error::Data("no events to tabulate".into()));
    }
    let mut observed = vec![[0u64; 2]; factor.n_categories()];
    for e in events {
        let i = factor.category_of(e.timestamp).ok_or_else(|| {
            Error::Data(format!(
                "event {} at {} is outside the {} categories",
                e.id,
                e.timestamp,
                factor.name()
            ))
        })?;
        let j = match e.severity {
            Severity::High => HIGH,
            Severity::Low => LOW,
        };
        observed[i][j] += 1;
    }
    ContingencyTable::new(factor.labels(), observed)
}

/// `E_ij = row_i · col_j / N`.
pub fn expected_counts(table: &ContingencyTable) -> Result<Vec<[f64; 2]>> {
    let n = table.total();
    if n == 0 {
        return Err(Error::Data("contingency table is empty".into()));
    }
    let n = n as f64;
    let cols = table.col_totals();
    Ok(table
        .row_totals()
        .into_iter()
        .map(|r| [r as f64 * cols[0] as f64 / n, r as f64 * cols[1] as f64 / n])
        .collect())
}

/// Chi-square statistic without the p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareStat {
    pub chi2: f64,
    pub df: u32,
    pub n: u64,
}

/// Pearson chi-square statistic and `df = r − 1`. Any zero expected count
/// (an all-zero row or severity column) is a [`Error::DegenerateMargin`].
pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquareStat> {
    if table.n_rows() < 2 {
        return Err(Error::Data("chi-square needs at least two categories".into()));
    }
    let expected = expected_counts(table)?;
    let mut chi2 = 0.0;
    for (i, (obs, exp)) in table.observed().iter().zip(&expected).enumerate() {
        for j in 0..2 {
            if exp[j] <= 0.0 {
                let col = if j == HIGH { "High" } else { "Low" };
                return Err(Error::DegenerateMargin(format!(
                    "expected count is zero at ({}, {col})",
                    table.row_labels()[i]
                )));
            }
            let d = obs[j] as f64 - exp[j];
            chi2 += d * d / exp[j];
        }
    }
    Ok(ChiSquareStat {
        chi2,
        df: (table.n_rows() - 1) as u32,
        n: table.total(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub chi2: f64,
    pub df: u32,
    pub p_value: f64,
    pub cramers_v: f64,
    pub n: u64,
}

impl ChiSquareReport {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Full test: statistic, p-value and Cramér's V.
pub fn chi_square_test(table: &ContingencyTable) -> Result<ChiSquareReport> {
    let stat = chi_square(table)?;
    Ok(ChiSquareReport {
        chi2: stat.chi2,
        df: stat.df,
        p_value: chi2_sf(stat.chi2, stat.df)?,
        cramers_v: cramers_v(stat.chi2, stat.n)?,
        n: stat.n,
    })
}

/// Renders a p-value as in published tables: `<0.001` below that threshold,
/// otherwise three decimals.
pub fn format_p_value(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = z + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma `P(a, x)` by its power series.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma `Q(a, x)` by continued fraction
/// (modified Lentz).
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        (1.0 - gamma_p_series(a, x)).clamp(0.0, 1.0)
    } else {
        gamma_q_cf(a, x).clamp(0.0, 1.0)
    }
}

/// Chi-square survival function `P(X ≥ x)` with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: u32) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Data(format!("chi-square statistic must be finite, got {x}")));
    }
    if df == 0 {
        return Err(Error::Config("degrees of freedom must be at least 1".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0))
}

/// `V = sqrt(χ²/N)` for a two-column table.
pub fn cramers_v(chi2: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Data("Cramér's V needs a positive sample size".into()));
    }
    if chi2 < 0.0 || !chi2.is_finite() {
        return Err(Error::Data(format!(
            "chi-square must be finite and non-negative, got {chi2}"
        )));
    }
    Ok((chi2 / n as f64).sqrt())
}

/// Events per observed day; dates marked missing are excluded from the
/// denominator.
pub fn daily_mean(count: u64, window: &StudyWindow) -> Result<f64> {
    let days = window.observed_days();
    if days == 0 {
        return Err(Error::Data("study window has no observed days".into()));
    }
    Ok(count as f64 / days as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinShare {
    pub label: String,
    pub n_low: u64,
    pub n_high: u64,
    /// `100 · High / (High + Low)`, `None` for an empty bin.
    pub percent_high: Option<f64>,
}

impl BinShare {
    pub fn count(&self) -> u64 {
        self.n_low + self.n_high
    }
}

pub fn shares_from_table(table: &ContingencyTable) -> Vec<BinShare> {
    table
        .row_labels()
        .iter()
        .zip(table.observed())
        .map(|(label, o)| {
            let total = o[HIGH] + o[LOW];
            BinShare {
                label: label.clone(),
                n_low: o[LOW],
                n_high: o[HIGH],
                percent_high: (total > 0).then(|| 100.0 * o[HIGH] as f64 / total as f64),
            }
        })
        .collect()
}

/// Per-category counts and high-severity percentage.
pub fn severity_share_by_bin(events: &[EventRecord], factor: &TemporalFactor) -> Result<Vec<BinShare>> {
    if events.is_empty() {
        return Ok(factor
            .labels()
            .into_iter()
            .map(|label| BinShare {
                label,
                n_low: 0,
                n_high: 0,
                percent_high: None,
            })
            .collect());
    }
    Ok(shares_from_table(&build_table(events, factor)?))
}

/// Ratio of the Night high-severity share to the Afternoon share, from
/// time-of-day shares. `None` when either share is undefined or the
/// afternoon share is zero.
pub fn night_vs_afternoon_ratio(time_of_day: &[BinShare]) -> Option<f64> {
    let share = |p: Period| {
        time_of_day
            .iter()
            .find(|b| b.label == p.name())
            .and_then(|b| b.percent_high)
    };
    match (share(Period::Night), share(Period::Afternoon)) {
        (Some(night), Some(afternoon)) if afternoon > 0.0 => Some(night / afternoon),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Category;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn at(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, mo, d)
            .unwrap()
            .and_hms_opt(h, mi, 0)
            .unwrap()
    }

    fn ev(ts: NaiveDateTime, severity: Severity) -> EventRecord {
        EventRecord {
            id: ts.to_string(),
            timestamp: ts,
            lon: 0.0,
            lat: 0.0,
            category: Category::VehicleObject,
            severity,
        }
    }

    #[test]
    fn period_boundaries() {
        assert_eq!(assign_period(at(2025, 1, 1, 6, 0)), Period::Morning);
        assert_eq!(assign_period(at(2025, 1, 1, 0, 0)), Period::Night);
        assert_eq!(assign_period(at(2025, 1, 1, 5, 59)), Period::Night);
        assert_eq!(assign_period(at(2025, 1, 1, 11, 59)), Period::Morning);
        assert_eq!(assign_period(at(2025, 1, 1, 17, 59)), Period::Afternoon);
        assert_eq!(assign_period(at(2025, 1, 1, 18, 0)), Period::Evening);
        assert_eq!(assign_period(at(2025, 1, 1, 23, 59)), Period::Evening);
    }

    #[test]
    fn one_low_event_per_period() {
        let events: Vec<_> = [0, 6, 12, 18]
            .into_iter()
            .map(|h| ev(at(2025, 1, 1, h, 30), Severity::Low))
            .collect();
        let t = build_table(&events, &TemporalFactor::TimeOfDay).unwrap();
        assert_eq!(t.observed(), &[[0, 1], [0, 1], [0, 1], [0, 1]]);
        assert_eq!(t.row_labels(), &["Morning", "Afternoon", "Evening", "Night"]);
    }

    #[test]
    fn hand_tallied_table() {
        // 12 events: Morning H,L,L  Afternoon L,L,L,H  Evening H,H  Night H,L,H
        use Severity::{High as H, Low as L};
        let spec: [(u32, Severity); 12] = [
            (7, H),
            (8, L),
            (11, L),
            (12, L),
            (13, L),
            (15, L),
            (17, H),
            (18, H),
            (23, H),
            (0, H),
            (3, L),
            (5, H),
        ];
        let events: Vec<_> = spec.iter().map(|&(h, s)| ev(at(2025, 2, 3, h, 0), s)).collect();
        let t = build_table(&events, &TemporalFactor::TimeOfDay).unwrap();
        assert_eq!(t.observed(), &[[1, 2], [1, 3], [2, 0], [2, 1]]);
        assert_eq!(t.total(), 12);
    }

    #[test]
    fn day_of_week_and_month_tables() {
        // 2025-01-06 is a Monday
        let events = vec![
            ev(at(2025, 1, 6, 9, 0), Severity::High),
            ev(at(2025, 1, 12, 9, 0), Severity::Low),
            ev(at(2025, 2, 1, 9, 0), Severity::Low),
        ];
        let t = build_table(&events, &TemporalFactor::DayOfWeek).unwrap();
        assert_eq!(t.observed()[0], [1, 0]);
        assert_eq!(t.observed()[6], [0, 1]);
        assert_eq!(t.observed()[5], [0, 1]);

        let months = TemporalFactor::Month(vec![(2025, 1), (2025, 2)]);
        let t = build_table(&events, &months).unwrap();
        assert_eq!(t.observed(), &[[1, 1], [0, 1]]);
        assert_eq!(t.row_labels(), &["Jan 2025", "Feb 2025"]);

        let only_feb = TemporalFactor::Month(vec![(2025, 2)]);
        assert!(build_table(&events, &only_feb).is_err());
        assert!(build_table(&[], &TemporalFactor::TimeOfDay).is_err());
    }

    #[test]
    fn expected_uniform_and_hand_cases() {
        let t = ContingencyTable::from_counts(&[[10, 10], [10, 10]]).unwrap();
        assert_eq!(expected_counts(&t).unwrap(), vec![[10.0, 10.0], [10.0, 10.0]]);
        let t = ContingencyTable::from_counts(&[[20, 30], [30, 20]]).unwrap();
        assert_eq!(expected_counts(&t).unwrap(), vec![[25.0, 25.0], [25.0, 25.0]]);
    }

    #[test]
    fn chi_square_hand_case() {
        let t = ContingencyTable::from_counts(&[[20, 30], [30, 20]]).unwrap();
        let s = chi_square(&t).unwrap();
        assert_eq!(s.chi2, 4.0);
        assert_eq!(s.df, 1);
        assert_eq!(s.n, 100);
        let u = ContingencyTable::from_counts(&[[10, 10], [10, 10]]).unwrap();
        assert_eq!(chi_square(&u).unwrap().chi2, 0.0);
    }

    #[test]
    fn degenerate_margins_error() {
        let zero_row = ContingencyTable::from_counts(&[[5, 3], [0, 0], [2, 2]]).unwrap();
        assert!(matches!(chi_square(&zero_row), Err(Error::DegenerateMargin(_))));
        let no_high = ContingencyTable::from_counts(&[[0, 3], [0, 4]]).unwrap();
        assert!(matches!(chi_square(&no_high), Err(Error::DegenerateMargin(_))));
    }

    #[test]
    fn factor_degrees_of_freedom() {
        let w = StudyWindow::new(
            NaiveDate::from_ymd_opt(2024, 11, 5).unwrap(),
            NaiveDate::from_ymd_opt(2025, 6, 2).unwrap(),
            [],
        )
        .unwrap();
        assert_eq!(TemporalFactor::TimeOfDay.n_categories() - 1, 3);
        assert_eq!(TemporalFactor::DayOfWeek.n_categories() - 1, 6);
        assert_eq!(TemporalFactor::months_of(&w).n_categories() - 1, 7);
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.1) - 2.252_712_651_734_206).abs() < 1e-12);
    }

    #[test]
    fn chi2_sf_reference_points() {
        assert_eq!(chi2_sf(0.0, 4).unwrap(), 1.0);
        assert!((chi2_sf(3.841, 1).unwrap() - 0.05).abs() < 1e-3);
        assert!((chi2_sf(7.815, 3).unwrap() - 0.05).abs() < 1e-3);
        // df = 2 has the closed form exp(−x/2)
        for x in [0.1, 1.0, 5.0, 30.0] {
            assert!((chi2_sf(x, 2).unwrap() - (-x / 2.0f64).exp()).abs() < 1e-14);
        }
        assert!(chi2_sf(f64::NAN, 1).is_err());
        assert!(chi2_sf(f64::INFINITY, 1).is_err());
        assert!(chi2_sf(1.0, 0).is_err());
    }

    #[test]
    fn published_p_values() {
        assert!(chi2_sf(146.29, 3).unwrap() < 0.001);
        assert!(chi2_sf(45.89, 7).unwrap() < 0.001);
        let table = [(13.34, 6, 0.038), (0.72, 3, 0.869), (5.72, 6, 0.455), (2.96, 7, 0.888)];
        // the published statistics are themselves rounded to 2 decimals
        for (x, df, p) in table {
            assert!((chi2_sf(x, df).unwrap() - p).abs() < 1e-3, "({x}, {df})");
        }
    }

    #[test]
    fn p_value_formatting() {
        assert_eq!(format_p_value(1.6e-31), "<0.001");
        assert_eq!(format_p_value(0.0379), "0.038");
    }

    #[test]
    fn cramers_v_cases() {
        assert!((cramers_v(146.29, 33_480).unwrap() - 0.066).abs() < 1e-3);
        assert!((cramers_v(13.34, 33_480).unwrap() - 0.020).abs() < 1e-3);
        assert_eq!(cramers_v(0.0, 10).unwrap(), 0.0);
        assert!(cramers_v(1.0, 0).is_err());
        assert!(cramers_v(-1.0, 10).is_err());
    }

    #[test]
    fn daily_mean_cases() {
        let w = StudyWindow::new(
            NaiveDate::from_ymd_opt(2024, 11, 5).unwrap(),
            NaiveDate::from_ymd_opt(2025, 6, 2).unwrap(),
            [
                NaiveDate::from_ymd_opt(2024, 11, 9).unwrap(),
                NaiveDate::from_ymd_opt(2024, 11, 10).unwrap(),
            ],
        )
        .unwrap();
        assert!((daily_mean(33_480, &w).unwrap() - 160.96).abs() < 0.01);
        assert!((daily_mean(1_365, &w).unwrap() - 6.56).abs() < 0.01);
        assert_eq!(daily_mean(0, &w).unwrap(), 0.0);
    }

    #[test]
    fn severity_shares() {
        let mut events = vec![
            ev(at(2025, 1, 1, 1, 0), Severity::High),
            ev(at(2025, 1, 1, 2, 0), Severity::High),
            ev(at(2025, 1, 1, 3, 0), Severity::High),
            ev(at(2025, 1, 1, 4, 0), Severity::Low),
        ];
        events.push(ev(at(2025, 1, 1, 13, 0), Severity::Low));
        let s = severity_share_by_bin(&events, &TemporalFactor::TimeOfDay).unwrap();
        assert_eq!(s[3].percent_high, Some(75.0));
        assert_eq!(s[1].percent_high, Some(0.0));
        assert_eq!(s[0].percent_high, None);
        assert_eq!(s[2].count(), 0);
        assert_eq!(night_vs_afternoon_ratio(&s), None);
        events.push(ev(at(2025, 1, 1, 14, 0), Severity::High));
        let s = severity_share_by_bin(&events, &TemporalFactor::TimeOfDay).unwrap();
        assert_eq!(night_vs_afternoon_ratio(&s), Some(1.5));
    }

    #[test]
    fn hand_tallied_twenty_event_shares() {
        use Severity::{High as H, Low as L};
        // Mon..Sun tallies (High, Low): Mon 2/3, Tue 0/2, Wed 3/0, Thu 1/1, Fri 0/4, Sat 2/1, Sun 0/1
        let plan: [(u32, &[Severity]); 7] = [
            (6, &[H, H, L, L, L]),
            (7, &[L, L]),
            (8, &[H, H, H]),
            (9, &[H, L]),
            (10, &[L, L, L, L]),
            (11, &[H, H, L]),
            (12, &[L]),
        ];
        let events: Vec<_> = plan
            .iter()
            .flat_map(|(day, sev)| sev.iter().map(move |s| ev(at(2025, 1, *day, 10, 0), *s)))
            .collect();
        assert_eq!(events.len(), 20);
        let s = severity_share_by_bin(&events, &TemporalFactor::DayOfWeek).unwrap();
        let got: Vec<_> = s.iter().map(|b| (b.n_high, b.n_low, b.percent_high.unwrap())).collect();
        assert_eq!(
            got,
            vec![
                (2, 3, 40.0),
                (0, 2, 0.0),
                (3, 0, 100.0),
                (1, 1, 50.0),
                (0, 4, 0.0),
                (2, 1, 200.0 / 3.0),
                (0, 1, 0.0),
            ]
        );
    }

    proptest! {
        #[test]
        fn expected_margins_match(rows in prop::collection::vec((0u64..500, 0u64..500), 2..10)) {
            let counts: Vec<[u64; 2]> = rows.iter().map(|&(h, l)| [h, l]).collect();
            let t = ContingencyTable::from_counts(&counts).unwrap();
            prop_assume!(t.total() > 0);
            let e = expected_counts(&t).unwrap();
            let n = t.total() as f64;
            let sum: f64 = e.iter().map(|r| r[0] + r[1]).sum();
            prop_assert!((sum - n).abs() < 1e-9 * n.max(1.0));
            for (er, or) in e.iter().zip(t.row_totals()) {
                prop_assert!((er[0] + er[1] - or as f64).abs() < 1e-9 * n);
            }
            let cols = t.col_totals();
            for j in 0..2 {
                let s: f64 = e.iter().map(|r| r[j]).sum();
                prop_assert!((s - cols[j] as f64).abs() < 1e-9 * n);
            }
        }

        #[test]
        fn chi_square_row_permutation_and_scaling(
            rows in prop::collection::vec((1u64..300, 1u64..300), 2..9),
            c in 2u64..20,
            rot in 0usize..9,
        ) {
            let counts: Vec<[u64; 2]> = rows.iter().map(|&(h, l)| [h, l]).collect();
            let base = chi_square(&ContingencyTable::from_counts(&counts).unwrap()).unwrap().chi2;
            let mut permuted = counts.clone();
            let k = rot % permuted.len();
            permuted.rotate_left(k);
            permuted.reverse();
            let p = chi_square(&ContingencyTable::from_counts(&permuted).unwrap()).unwrap().chi2;
            prop_assert!((p - base).abs() <= 1e-9 * base.max(1.0));
            let scaled: Vec<[u64; 2]> = counts.iter().map(|r| [r[0] * c, r[1] * c]).collect();
            let s = chi_square(&ContingencyTable::from_counts(&scaled).unwrap()).unwrap().chi2;
            prop_assert!((s - c as f64 * base).abs() <= 1e-9 * (c as f64 * base).max(1.0));
        }

        #[test]
        fn chi2_sf_monotone(df in 1u32..40, a in 0.0..200.0f64, b in 0.0..200.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let pl = chi2_sf(lo, df).unwrap();
            let ph = chi2_sf(hi, df).unwrap();
            prop_assert!((0.0..=1.0).contains(&pl) && (0.0..=1.0).contains(&ph));
            prop_assert!(ph <= pl + 1e-15);
        }

        #[test]
        fn cramers_v_bounded_for_tables(rows in prop::collection::vec((1u64..300, 1u64..300), 2..9)) {
            let counts: Vec<[u64; 2]> = rows.iter().map(|&(h, l)| [h, l]).collect();
            let r = chi_square_test(&ContingencyTable::from_counts(&counts).unwrap()).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r.cramers_v));
            prop_assert!((r.cramers_v - (r.chi2 / r.n as f64).sqrt()).abs() < 1e-15);
        }
    }
}
