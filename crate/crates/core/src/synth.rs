//! Synthetic incident generation with planted clusters, and brute-force
//! oracles used to check the production statistics.
//!
//! # Random streams
//!
//! All randomness comes from PCG XSL-RR 128/64 (`Pcg64`) seeded with
//! `state = seed` and a stream selector: stream 0 draws background events,
//! stream `k + 1` draws cluster `k`, and stream `2^64` draws contamination
//! rows. A uniform `f64` is `(next_u64 >> 11) · 2^-53`. Per event the draws
//! are, in order: position (two uniforms, repeated on rejection for cluster
//! disks), observed date, period, minute within period, severity, category.
//! Background events come first, then each cluster in declaration order.

use std::io::Write;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand_core::Rng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, LonLat, EARTH_RADIUS_M};
use crate::hotspot::{GiStarResult, HotspotOutput};
use crate::ingest::{write_events, Boundary, Category, EventRecord, Severity, StudyWindow};
use crate::temporal::Period;

const CONTAMINATION_STREAM: u128 = 1 << 64;
const PERIOD_MINUTES: u32 = 360;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    fn validate(&self) -> Result<()> {
        let ok = self.min_lon < self.max_lon
            && self.min_lat < self.max_lat
            && self.min_lon >= -180.0
            && self.max_lon <= 180.0
            && self.min_lat >= -90.0
            && self.max_lat <= 90.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid bounding box {self:?}")))
        }
    }

    pub fn contains(&self, p: LonLat) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    pub fn to_boundary(&self) -> Result<Boundary> {
        Boundary::rectangle(
            LonLat::new(self.min_lon, self.min_lat),
            LonLat::new(self.max_lon, self.max_lat),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub lon: f64,
    pub lat: f64,
    pub radius_m: f64,
    pub n_events: usize,
    pub high_share: f64,
}

impl ClusterSpec {
    pub fn center(&self) -> LonLat {
        LonLat::new(self.lon, self.lat)
    }

    pub fn contains(&self, p: LonLat) -> bool {
        haversine_m(self.center(), p) <= self.radius_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryWeight {
    pub category: Category,
    pub weight: f64,
}

/// Collision subcategory mix in proportion to a large urban incident feed.
pub fn default_category_mix() -> Vec<CategoryWeight> {
    [
        (Category::VehicleObject, 17_149.0),
        (Category::VehicleVehicle, 6_901.0),
        (Category::Motorcycle, 3_555.0),
        (Category::Rollover, 2_271.0),
        (Category::HitAndRun, 1_423.0),
        (Category::Pedestrian, 1_367.0),
        (Category::Bicycle, 719.0),
        (Category::Animal, 158.0),
        (Category::SpecialVehicle, 61.0),
    ]
    .into_iter()
    .map(|(category, weight)| CategoryWeight { category, weight })
    .collect()
}

/// Extra rows that the cleaning stages are expected to remove.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Contamination {
    /// Rows that fail to parse.
    pub malformed: usize,
    /// Valid rows dated the day before the window.
    pub outside_window: usize,
    /// Exact copies of earlier rows (same id).
    pub duplicates: usize,
    /// In-window rows located outside the bounding box.
    pub outside_boundary: usize,
}

fn default_profile() -> [f64; 4] {
    [1.0; 4]
}

fn default_background_high_share() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScenario {
    pub seed: u64,
    pub n_background: usize,
    pub bbox: BoundingBox,
    #[serde(default)]
    pub clusters: Vec<ClusterSpec>,
    pub window: StudyWindow,
    #[serde(default = "default_background_high_share")]
    pub background_high_share: f64,
    /// Relative intensity of Morning, Afternoon, Evening, Night.
    #[serde(default = "default_profile")]
    pub temporal_profile: [f64; 4],
    /// Per-period High share for background events, overriding
    /// `background_high_share`.
    #[serde(default)]
    pub period_high_share: Option<[f64; 4]>,
    #[serde(default = "default_category_mix")]
    pub categories: Vec<CategoryWeight>,
    #[serde(default)]
    pub contamination: Contamination,
}

fn check_share(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn check_weights(name: &str, w: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for v in w {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::Config(format!("{name} weights must be finite and non-negative")));
        }
        total += v;
    }
    if total > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} weights must have a positive sum")))
    }
}

impl SynthScenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        check_share("background_high_share", self.background_high_share)?;
        check_weights("temporal_profile", self.temporal_profile)?;
        if let Some(shares) = self.period_high_share {
            for v in shares {
                check_share("period_high_share", v)?;
            }
        }
        check_weights("category", self.categories.iter().map(|c| c.weight))?;
        for (k, c) in self.clusters.iter().enumerate() {
            if c.radius_m <= 0.0 || !c.radius_m.is_finite() {
                return Err(Error::Config(format!("cluster {k}: radius must be positive")));
            }
            if !(-90.0..=90.0).contains(&c.lat) || !(-180.0..=180.0).contains(&c.lon) {
                return Err(Error::Config(format!("cluster {k}: centre out of range")));
            }
            check_share("cluster high_share", c.high_share)?;
        }
        Ok(())
    }

    pub fn n_events(&self) -> usize {
        self.n_background + self.clusters.iter().map(|c| c.n_events).sum::<usize>()
    }
}

struct Stream(Pcg64);

impl Stream {
    fn new(seed: u64, stream: u128) -> Self {
        Stream(Pcg64::new(u128::from(seed), stream))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

struct Drawer<'a> {
    scenario: &'a SynthScenario,
    dates: Vec<NaiveDate>,
    category_weights: Vec<f64>,
}

impl Drawer<'_> {
    fn timestamp(&self, rng: &mut Stream) -> (NaiveDateTime, Period) {
        let date = self.dates[rng.index(self.dates.len())];
        let period = Period::ALL[rng.weighted(&self.scenario.temporal_profile)];
        let minute = period.start_minute() + rng.index(PERIOD_MINUTES as usize) as u32;
        let ts = date.and_hms_opt(0, 0, 0).expect("midnight is valid") + Duration::minutes(i64::from(minute));
        (ts, period)
    }

    fn category(&self, rng: &mut Stream) -> Category {
        self.scenario.categories[rng.weighted(&self.category_weights)].category
    }

    fn severity(rng: &mut Stream, high_share: f64) -> Severity {
        if rng.bernoulli(high_share) {
            Severity::High
        } else {
            Severity::Low
        }
    }
}

/// Offsets `center` by `(dx, dy)` metres on the local tangent plane.
fn offset(center: LonLat, dx: f64, dy: f64) -> LonLat {
    let lat = center.lat + (dy / EARTH_RADIUS_M).to_degrees();
    let lon = center.lon + (dx / (EARTH_RADIUS_M * center.lat.to_radians().cos())).to_degrees();
    LonLat::new(lon, lat)
}

/// Generates the clean events of `scenario`. Deterministic in the scenario.
pub fn generate(scenario: &SynthScenario) -> Result<Vec<EventRecord>> {
    scenario.validate()?;
    let drawer = Drawer {
        scenario,
        dates: scenario.window.observed_dates(),
        category_weights: scenario.categories.iter().map(|c| c.weight).collect(),
    };
    let b = &scenario.bbox;
    let mut events = Vec::with_capacity(scenario.n_events());

    let mut rng = Stream::new(scenario.seed, 0);
    for i in 0..scenario.n_background {
        let lon = b.min_lon + rng.uniform() * (b.max_lon - b.min_lon);
        let lat = b.min_lat + rng.uniform() * (b.max_lat - b.min_lat);
        let (timestamp, period) = drawer.timestamp(&mut rng);
        let share = scenario
            .period_high_share
            .map_or(scenario.background_high_share, |s| s[period as usize]);
        let severity = Drawer::severity(&mut rng, share);
        events.push(EventRecord {
            id: format!("B{:07}", i + 1),
            timestamp,
            lon,
            lat,
            category: drawer.category(&mut rng),
            severity,
        });
    }

    for (k, cluster) in scenario.clusters.iter().enumerate() {
        let mut rng = Stream::new(scenario.seed, k as u128 + 1);
        for i in 0..cluster.n_events {
            let (u, v) = loop {
                let u = 2.0 * rng.uniform() - 1.0;
                let v = 2.0 * rng.uniform() - 1.0;
                if u * u + v * v <= 1.0 {
                    break (u, v);
                }
            };
            let p = offset(cluster.center(), u * cluster.radius_m, v * cluster.radius_m);
            let (timestamp, _) = drawer.timestamp(&mut rng);
            let severity = Drawer::severity(&mut rng, cluster.high_share);
            events.push(EventRecord {
                id: format!("C{}-{:07}", k + 1, i + 1),
                timestamp,
                lon: p.lon,
                lat: p.lat,
                category: drawer.category(&mut rng),
                severity,
            });
        }
    }
    Ok(events)
}

/// Expected row counts at each cleaning stage for a contaminated file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub rows: usize,
    pub malformed: usize,
    pub outside_window: usize,
    pub duplicates: usize,
    pub outside_boundary: usize,
    pub retained: usize,
}

/// Writes the scenario's events plus its contamination rows as CSV and
/// returns the expected stage counts. The boundary is the bounding box.
pub fn write_scenario_csv<W: Write>(mut sink: W, scenario: &SynthScenario) -> Result<SynthManifest> {
    let clean = generate(scenario)?;
    let c = scenario.contamination;
    if c.duplicates > 0 && clean.is_empty() {
        return Err(Error::Config("duplicates need at least one clean event".into()));
    }
    let mut rng = Stream::new(scenario.seed, CONTAMINATION_STREAM);
    let b = &scenario.bbox;
    let before_start = scenario.window.start().pred_opt().expect("date has a predecessor");
    let mut extra = Vec::new();
    for i in 0..c.outside_window {
        let lon = b.min_lon + rng.uniform() * (b.max_lon - b.min_lon);
        let lat = b.min_lat + rng.uniform() * (b.max_lat - b.min_lat);
        extra.push(EventRecord {
            id: format!("W{:07}", i + 1),
            timestamp: before_start.and_hms_opt(12, 0, 0).expect("valid time"),
            lon,
            lat,
            category: scenario.categories[0].category,
            severity: Severity::Low,
        });
    }
    for _ in 0..c.duplicates {
        extra.push(clean[rng.index(clean.len())].clone());
    }
    let width = b.max_lon - b.min_lon;
    for i in 0..c.outside_boundary {
        let lat = b.min_lat + rng.uniform() * (b.max_lat - b.min_lat);
        let lon = b.max_lon + width * (0.05 + 0.5 * rng.uniform());
        let date = scenario.window.observed_dates()[0];
        extra.push(EventRecord {
            id: format!("X{:07}", i + 1),
            timestamp: date.and_hms_opt(8, 30, 0).expect("valid time"),
            lon: lon.min(180.0),
            lat,
            category: scenario.categories[0].category,
            severity: Severity::Low,
        });
    }
    let mut all = clean;
    all.extend(extra);
    let mut buf = Vec::new();
    write_events(&mut buf, &all)?;
    sink.write_all(&buf)?;
    for i in 0..c.malformed {
        match i % 3 {
            0 => writeln!(
                sink,
                "M{:07},not-a-date,{},{},VehicleObject,Low",
                i + 1,
                b.min_lon,
                b.min_lat
            )?,
            1 => writeln!(
                sink,
                "M{:07},{} 10:00,{},95.0,VehicleObject,High",
                i + 1,
                scenario.window.start(),
                b.min_lon
            )?,
            _ => writeln!(
                sink,
                "M{:07},{} 10:00,{},{},Unknown,Medium",
                i + 1,
                scenario.window.start(),
                b.min_lon,
                b.min_lat
            )?,
        }
    }
    sink.flush()?;
    let retained = all.len() - c.outside_window - c.duplicates - c.outside_boundary;
    Ok(SynthManifest {
        rows: all.len() + c.malformed,
        malformed: c.malformed,
        outside_window: c.outside_window,
        duplicates: c.duplicates,
        outside_boundary: c.outside_boundary,
        retained,
    })
}

/// Dense all-pairs band weights: `w[i][j] = 1` iff the centres are within
/// `band`. No spatial index.
pub fn oracle_weights(centers: &[crate::geo::PlanarPoint], band: f64) -> Vec<Vec<f64>> {
    centers
        .iter()
        .map(|a| {
            centers
                .iter()
                .map(|b| {
                    let dx = a.x - b.x;
                    let dy = a.y - b.y;
                    if dx * dx + dy * dy <= band * band {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Direct transcription of the Gi* formula over a dense weight matrix.
pub fn oracle_gi_star(x: &[f64], w: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Data(format!("Gi* needs at least 2 features, got {n}")));
    }
    let nf = n as f64;
    let mut sum_x = 0.0;
    let mut sum_x2 = 0.0;
    for v in x {
        sum_x += v;
        sum_x2 += v * v;
    }
    let mean = sum_x / nf;
    let s2 = sum_x2 / nf - mean * mean;
    if x.iter().all(|v| *v == x[0]) || s2 <= 0.0 {
        return Ok(vec![0.0; n]);
    }
    let s = s2.sqrt();
    let mut z = Vec::with_capacity(n);
    for row in w {
        let mut wx = 0.0;
        let mut sw = 0.0;
        let mut sw2 = 0.0;
        for j in 0..n {
            wx += row[j] * x[j];
            sw += row[j];
            sw2 += row[j] * row[j];
        }
        let var = (nf * sw2 - sw * sw) / (nf - 1.0);
        z.push(if var <= 0.0 {
            0.0
        } else {
            (wx - mean * sw) / (s * var.sqrt())
        });
    }
    Ok(z)
}

fn gamma_half_integer(k: u32) -> f64 {
    // Γ(k/2) by Γ(a + 1) = a Γ(a) from Γ(1/2) = √π or Γ(1) = 1.
    let (mut a, mut g) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    let target = f64::from(k) / 2.0;
    while a < target {
        g *= a;
        a += 1.0;
    }
    g
}

/// Chi-square upper tail by trapezoid integration of the density over
/// `[x, x + 60·df]`. The integral is taken in `u = √t` with step 1e-3, which
/// removes the `t^(−1/2)` singularity at 0 for one degree of freedom.
pub fn oracle_chi2_p(x: f64, df: u32) -> f64 {
    assert!(df >= 1 && x >= 0.0);
    let k = f64::from(df);
    let norm = 2.0f64.powf(k / 2.0) * gamma_half_integer(df);
    let g = |u: f64| 2.0 * u.powf(k - 1.0) * (-u * u / 2.0).exp() / norm;
    let (a, b) = (x.sqrt(), (x + 60.0 * k).sqrt());
    let n = ((b - a) / 1e-3).ceil() as usize;
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (g(a) + g(b));
    for i in 1..n {
        acc += g(a + i as f64 * h);
    }
    (acc * h).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecallReport {
    pub recall: f64,
    pub false_positive_rate: f64,
    pub n_cluster_cells: usize,
    pub n_other_cells: usize,
}

/// Recall of Hot90-or-stronger cells among cells whose centres lie inside a
/// planted cluster disk, and the hot rate among the remaining cells.
pub fn recall_report(scenario: &SynthScenario, output: &HotspotOutput) -> Result<RecallReport> {
    if scenario.clusters.is_empty() {
        return Err(Error::Config("recall needs at least one planted cluster".into()));
    }
    let (mut hit, mut n_in, mut fp, mut n_out) = (0usize, 0usize, 0usize, 0usize);
    for r in output.records() {
        let c = LonLat::new(r.lon, r.lat);
        let hot = r.class.is_hot();
        if scenario.clusters.iter().any(|k| k.contains(c)) {
            n_in += 1;
            hit += usize::from(hot);
        } else {
            n_out += 1;
            fp += usize::from(hot);
        }
    }
    if n_in == 0 {
        return Err(Error::Data("no cell centre falls inside a cluster disk".into()));
    }
    Ok(RecallReport {
        recall: hit as f64 / n_in as f64,
        false_positive_rate: if n_out == 0 { 0.0 } else { fp as f64 / n_out as f64 },
        n_cluster_cells: n_in,
        n_other_cells: n_out,
    })
}

/// Fraction of features classified Hot90 or stronger.
pub fn hot_fraction(result: &GiStarResult) -> f64 {
    let hot = result.class.iter().filter(|c| c.is_hot()).count();
    hot as f64 / result.class.len().max(1) as f64
}

fn reference_window() -> StudyWindow {
    let d = |m, day| NaiveDate::from_ymd_opt(if m >= 11 { 2024 } else { 2025 }, m, day).expect("valid date");
    StudyWindow::new(d(11, 5), d(6, 2), [d(11, 9), d(11, 10)]).expect("valid window")
}

/// A 10 km square of uniform background with one dense high-severity cluster.
pub fn canonical_cluster_scenario() -> SynthScenario {
    SynthScenario {
        seed: 20_241_105,
        n_background: 2_000,
        bbox: BoundingBox {
            min_lon: 55.20,
            min_lat: 25.15,
            max_lon: 55.30,
            max_lat: 25.24,
        },
        clusters: vec![ClusterSpec {
            lon: 55.25,
            lat: 25.195,
            radius_m: 800.0,
            n_events: 600,
            high_share: 0.6,
        }],
        window: reference_window(),
        background_high_share: 0.2,
        temporal_profile: [1.0, 1.2, 1.1, 0.7],
        period_high_share: None,
        categories: default_category_mix(),
        contamination: Contamination::default(),
    }
}

/// Uniform background only, same extent as the canonical scenario.
pub fn null_scenario(seed: u64) -> SynthScenario {
    SynthScenario {
        seed,
        clusters: Vec::new(),
        ..canonical_cluster_scenario()
    }
}
