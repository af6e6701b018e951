//! Parsing, validation and cleaning of raw incident records.
//!
//! The cleaning stages are independent filters over `EventRecord` lists:
//! study-window filter, id deduplication, category selection and boundary
//! (point-in-polygon) filter. Each returns the kept and removed records so the
//! caller can report stage counts.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::LonLat;

/// Timestamp layout used when writing events.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M";

const ACCEPTED_TIMESTAMP_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%d/%m/%Y %H:%M",
    "%d/%m/%Y %H:%M:%S",
];

/// Incident subcategory. All variants except `NonCollision` are collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    VehicleObject,
    VehicleVehicle,
    Motorcycle,
    Rollover,
    HitAndRun,
    Pedestrian,
    Bicycle,
    Animal,
    SpecialVehicle,
    NonCollision,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::VehicleObject,
        Category::VehicleVehicle,
        Category::Motorcycle,
        Category::Rollover,
        Category::HitAndRun,
        Category::Pedestrian,
        Category::Bicycle,
        Category::Animal,
        Category::SpecialVehicle,
        Category::NonCollision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::VehicleObject => "VehicleObject",
            Category::VehicleVehicle => "VehicleVehicle",
            Category::Motorcycle => "Motorcycle",
            Category::Rollover => "Rollover",
            Category::HitAndRun => "HitAndRun",
            Category::Pedestrian => "Pedestrian",
            Category::Bicycle => "Bicycle",
            Category::Animal => "Animal",
            Category::SpecialVehicle => "SpecialVehicle",
            Category::NonCollision => "NonCollision",
        }
    }

    pub fn is_collision(self) -> bool {
        self != Category::NonCollision
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn normalize_label(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl FromStr for Category {
    type Err = String;

    /// Case-insensitive; separators (`_`, `-`, spaces) are ignored, so
    /// `vehicle-object` and `VEHICLE_OBJECT` both parse.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = normalize_label(s);
        Category::ALL
            .into_iter()
            .find(|c| normalize_label(c.name()) == key)
            .ok_or_else(|| format!("unknown category '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Low,
    High,
}

impl Severity {
    pub fn name(self) -> &'static str {
        match self {
            Severity::Low => "Low",
            Severity::High => "High",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match normalize_label(s).as_str() {
            "low" => Ok(Severity::Low),
            "high" => Ok(Severity::High),
            _ => Err(format!("unknown severity '{s}'")),
        }
    }
}

/// One geolocated, timestamped, severity-labelled incident.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub id: String,
    /// Local civil time, minute resolution. Never converted between zones.
    pub timestamp: NaiveDateTime,
    pub lon: f64,
    pub lat: f64,
    pub category: Category,
    pub severity: Severity,
}

impl EventRecord {
    pub fn location(&self) -> LonLat {
        LonLat::new(self.lon, self.lat)
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

/// Inclusive calendar-date study window with known data gaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct StudyWindow {
    start: NaiveDate,
    end: NaiveDate,
    missing: BTreeSet<NaiveDate>,
}

#[derive(Deserialize)]
struct RawWindow {
    start: NaiveDate,
    end: NaiveDate,
    #[serde(default)]
    missing: Vec<NaiveDate>,
}

impl TryFrom<RawWindow> for StudyWindow {
    type Error = Error;

    fn try_from(raw: RawWindow) -> Result<Self> {
        StudyWindow::new(raw.start, raw.end, raw.missing)
    }
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate, missing: impl IntoIterator<Item = NaiveDate>) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("window start {start} is after end {end}")));
        }
        let missing: BTreeSet<NaiveDate> = missing.into_iter().collect();
        if let Some(d) = missing.iter().find(|d| **d < start || **d > end) {
            return Err(Error::Config(format!(
                "missing date {d} lies outside window {start}..={end}"
            )));
        }
        let window = Self { start, end, missing };
        if window.observed_days() == 0 {
            return Err(Error::Config("study window has no observed days".into()));
        }
        Ok(window)
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn missing_dates(&self) -> &BTreeSet<NaiveDate> {
        &self.missing
    }

    /// Days in `[start, end]` including both ends.
    pub fn total_days(&self) -> u32 {
        ((self.end - self.start).num_days() + 1) as u32
    }

    pub fn observed_days(&self) -> u32 {
        self.total_days() - self.missing.len() as u32
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.start && date <= self.end
    }

    /// Dates in the window that are not marked missing, ascending.
    pub fn observed_dates(&self) -> Vec<NaiveDate> {
        self.start
            .iter_days()
            .take_while(|d| *d <= self.end)
            .filter(|d| !self.missing.contains(d))
            .collect()
    }

    /// Distinct `(year, month)` pairs touched by the window, ascending.
    pub fn months(&self) -> Vec<(i32, u32)> {
        let mut out: Vec<(i32, u32)> = Vec::new();
        let mut d = NaiveDate::from_ymd_opt(self.start.year(), self.start.month(), 1).expect("first of month is valid");
        while d <= self.end {
            out.push((d.year(), d.month()));
            d = if d.month() == 12 {
                NaiveDate::from_ymd_opt(d.year() + 1, 1, 1)
            } else {
                NaiveDate::from_ymd_opt(d.year(), d.month() + 1, 1)
            }
            .expect("first of month is valid");
        }
        out
    }
}

/// Input column names for each record field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub id: String,
    pub timestamp: String,
    pub lon: String,
    pub lat: String,
    pub category: String,
    pub severity: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            id: "id".into(),
            timestamp: "timestamp".into(),
            lon: "lon".into(),
            lat: "lat".into(),
            category: "category".into(),
            severity: "severity".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionKind {
    /// A field is missing or unparseable.
    Malformed,
    /// Coordinates parse but violate WGS84 ranges.
    InvalidCoordinate,
    /// Valid record removed by the boundary filter.
    OutsideBoundary,
}

impl RejectionKind {
    pub fn name(self) -> &'static str {
        match self {
            RejectionKind::Malformed => "malformed",
            RejectionKind::InvalidCoordinate => "invalid_coordinate",
            RejectionKind::OutsideBoundary => "outside_boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Line number in the source file (header is line 1).
    pub line: u64,
    pub id: Option<String>,
    pub kind: RejectionKind,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<EventRecord>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub columns: ColumnMapping,
    pub delimiter: u8,
    /// Extra chrono format tried before the built-in list.
    pub timestamp_format: Option<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            columns: ColumnMapping::default(),
            delimiter: b',',
            timestamp_format: None,
        }
    }
}

pub fn parse_timestamp(s: &str, extra_format: Option<&str>) -> Option<NaiveDateTime> {
    let s = s.trim();
    extra_format
        .into_iter()
        .chain(ACCEPTED_TIMESTAMP_FORMATS.iter().copied())
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
}

struct ColumnIndex {
    id: usize,
    timestamp: usize,
    lon: usize,
    lat: usize,
    category: usize,
    severity: usize,
}

impl ColumnIndex {
    fn resolve(header: &csv::StringRecord, map: &ColumnMapping) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        Ok(Self {
            id: find(&map.id)?,
            timestamp: find(&map.timestamp)?,
            lon: find(&map.lon)?,
            lat: find(&map.lat)?,
            category: find(&map.category)?,
            severity: find(&map.severity)?,
        })
    }
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &ColumnIndex,
    opts: &ParseOptions,
) -> std::result::Result<EventRecord, (RejectionKind, String)> {
    let malformed = |msg: String| (RejectionKind::Malformed, msg);
    let field = |i: usize, name: &str| {
        row.get(i)
            .map(str::trim)
            .ok_or_else(|| malformed(format!("missing field '{name}'")))
    };
    let id = field(cols.id, "id")?;
    if id.is_empty() {
        return Err(malformed("empty id".into()));
    }
    let ts_raw = field(cols.timestamp, "timestamp")?;
    let timestamp = parse_timestamp(ts_raw, opts.timestamp_format.as_deref())
        .ok_or_else(|| malformed(format!("unparseable timestamp '{ts_raw}'")))?;
    let number = |i: usize, name: &str| -> std::result::Result<f64, (RejectionKind, String)> {
        let raw = field(i, name)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| malformed(format!("unparseable {name} '{raw}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(malformed(format!("non-finite {name}")))
        }
    };
    let lon = number(cols.lon, "longitude")?;
    let lat = number(cols.lat, "latitude")?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err((RejectionKind::InvalidCoordinate, "latitude out of range".into()));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err((RejectionKind::InvalidCoordinate, "longitude out of range".into()));
    }
    let category = field(cols.category, "category")?.parse().map_err(malformed)?;
    let severity = field(cols.severity, "severity")?.parse().map_err(malformed)?;
    Ok(EventRecord {
        id: id.to_string(),
        timestamp,
        lon,
        lat,
        category,
        severity,
    })
}

/// Parses delimited text with a header row. Bad rows are collected as
/// rejections; only I/O failures and missing mapped columns are fatal.
pub fn parse_events<R: Read>(source: R, opts: &ParseOptions) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .flexible(true)
        .has_headers(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let cols = ColumnIndex::resolve(&header, &opts.columns)?;
    let mut out = ParseOutcome::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = reader.position().line() + 1;
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                out.rejections.push(Rejection {
                    line,
                    id: None,
                    kind: RejectionKind::Malformed,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        }
        let line = row.position().map_or(line, |p| p.line());
        match parse_row(&row, &cols, opts) {
            Ok(rec) => out.records.push(rec),
            Err((kind, reason)) => out.rejections.push(Rejection {
                line,
                id: row
                    .get(cols.id)
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from),
                kind,
                reason,
            }),
        }
    }
    Ok(out)
}

pub fn parse_events_path(path: &Path, opts: &ParseOptions) -> Result<ParseOutcome> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_events(std::io::BufReader::new(file), opts)
}

/// Result of a cleaning filter: `kept.len() + removed.len()` equals the input
/// length and both preserve input order.
#[derive(Debug, Clone, Default)]
pub struct Filtered {
    pub kept: Vec<EventRecord>,
    pub removed: Vec<EventRecord>,
}

impl Filtered {
    fn partition(events: Vec<EventRecord>, keep: impl Fn(&EventRecord) -> bool) -> Self {
        let (kept, removed) = events.into_iter().partition(|e| keep(e));
        Self { kept, removed }
    }
}

/// Keeps events dated within `[start, end]` (inclusive).
pub fn filter_window(events: Vec<EventRecord>, window: &StudyWindow) -> Filtered {
    Filtered::partition(events, |e| window.contains(e.date()))
}

/// Keeps the first record for every id.
pub fn dedupe(events: Vec<EventRecord>) -> Filtered {
    let mut seen = HashSet::new();
    let mut out = Filtered::default();
    for e in events {
        if seen.insert(e.id.clone()) {
            out.kept.push(e);
        } else {
            out.removed.push(e);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryFilter {
    /// Every record.
    #[default]
    All,
    /// Collision subcategories only (drops `NonCollision`).
    Collision,
    Pedestrian,
}

impl CategoryFilter {
    pub fn accepts(self, c: Category) -> bool {
        match self {
            CategoryFilter::All => true,
            CategoryFilter::Collision => c.is_collision(),
            CategoryFilter::Pedestrian => c == Category::Pedestrian,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CategoryFilter::All => "all",
            CategoryFilter::Collision => "collision",
            CategoryFilter::Pedestrian => "pedestrian",
        }
    }
}

impl FromStr for CategoryFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(CategoryFilter::All),
            "collision" | "collisions" => Ok(CategoryFilter::Collision),
            "pedestrian" => Ok(CategoryFilter::Pedestrian),
            other => Err(format!(
                "unknown category filter '{other}' (expected all|collision|pedestrian)"
            )),
        }
    }
}

pub fn filter_category(events: Vec<EventRecord>, filter: CategoryFilter) -> Filtered {
    Filtered::partition(events, |e| filter.accepts(e.category))
}

/// Polygon with one outer ring and optional holes, coordinates in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolygon {
    rings: Vec<Vec<LonLat>>,
}

// Distance in degrees (~0.1 mm) under which a point counts as on an edge.
const EDGE_TOLERANCE_DEG: f64 = 1e-9;

fn ring_area2(ring: &[LonLat]) -> f64 {
    ring.windows(2).map(|w| w[0].lon * w[1].lat - w[1].lon * w[0].lat).sum()
}

fn orientation(a: LonLat, b: LonLat, c: LonLat) -> f64 {
    (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
}

fn on_segment(a: LonLat, b: LonLat, p: LonLat) -> bool {
    p.lon >= a.lon.min(b.lon) && p.lon <= a.lon.max(b.lon) && p.lat >= a.lat.min(b.lat) && p.lat <= a.lat.max(b.lat)
}

fn segments_intersect(a: LonLat, b: LonLat, c: LonLat, d: LonLat) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn ring_self_intersects(ring: &[LonLat]) -> bool {
    let n = ring.len() - 1; // edges; ring is closed
    for i in 0..n {
        let (a, b) = (ring[i], ring[i + 1]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // first and last edge share the closing vertex
            }
            let (c, d) = (ring[j], ring[j + 1]);
            if a.lon.max(b.lon) < c.lon.min(d.lon)
                || c.lon.max(d.lon) < a.lon.min(b.lon)
                || a.lat.max(b.lat) < c.lat.min(d.lat)
                || c.lat.max(d.lat) < a.lat.min(b.lat)
            {
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

fn point_segment_distance(p: LonLat, a: LonLat, b: LonLat) -> f64 {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.lon + t * dx, a.lat + t * dy);
    ((p.lon - cx).powi(2) + (p.lat - cy).powi(2)).sqrt()
}

impl BoundaryPolygon {
    /// Validates ring closure, vertex count, outer-ring simplicity and
    /// non-zero area.
    pub fn new(rings: Vec<Vec<LonLat>>) -> Result<Self> {
        let Some(outer) = rings.first() else {
            return Err(Error::Config("polygon has no rings".into()));
        };
        for (k, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(Error::Config(format!(
                    "ring {k} has {} vertices, need at least 4",
                    ring.len()
                )));
            }
            if ring.first() != ring.last() {
                return Err(Error::Config(format!("ring {k} is not closed")));
            }
            if ring.iter().any(|p| !p.lon.is_finite() || !p.lat.is_finite()) {
                return Err(Error::Config(format!("ring {k} has non-finite coordinates")));
            }
        }
        let (mut w, mut h) = (0.0f64, 0.0f64);
        if let (Some(min_lon), Some(max_lon), Some(min_lat), Some(max_lat)) = (
            outer.iter().map(|p| p.lon).reduce(f64::min),
            outer.iter().map(|p| p.lon).reduce(f64::max),
            outer.iter().map(|p| p.lat).reduce(f64::min),
            outer.iter().map(|p| p.lat).reduce(f64::max),
        ) {
            w = max_lon - min_lon;
            h = max_lat - min_lat;
        }
        let area2 = ring_area2(outer).abs();
        if area2 <= 1e-12 * w * h || area2 == 0.0 {
            return Err(Error::Config("degenerate boundary polygon (zero area)".into()));
        }
        if ring_self_intersects(outer) {
            return Err(Error::Config("outer boundary ring self-intersects".into()));
        }
        Ok(Self { rings })
    }

    pub fn rings(&self) -> &[Vec<LonLat>] {
        &self.rings
    }

    /// Even-odd rule over all rings; points on any edge count as inside.
    pub fn contains(&self, p: LonLat) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if point_segment_distance(p, a, b) <= EDGE_TOLERANCE_DEG {
                    return true;
                }
                if (a.lat > p.lat) != (b.lat > p.lat) {
                    let x_cross = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
                    if p.lon < x_cross {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

/// Union of one or more polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    polygons: Vec<BoundaryPolygon>,
}

impl Boundary {
    pub fn new(polygons: Vec<BoundaryPolygon>) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::Config("boundary has no polygons".into()));
        }
        Ok(Self { polygons })
    }

    /// Axis-aligned rectangle.
    pub fn rectangle(min: LonLat, max: LonLat) -> Result<Self> {
        let ring = vec![
            LonLat::new(min.lon, min.lat),
            LonLat::new(max.lon, min.lat),
            LonLat::new(max.lon, max.lat),
            LonLat::new(min.lon, max.lat),
            LonLat::new(min.lon, min.lat),
        ];
        Self::new(vec![BoundaryPolygon::new(vec![ring])?])
    }

    pub fn polygons(&self) -> &[BoundaryPolygon] {
        &self.polygons
    }

    pub fn contains(&self, p: LonLat) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    /// Accepts a GeoJSON `Polygon` or `MultiPolygon` geometry, a `Feature`
    /// carrying one, or a `FeatureCollection` (union of its polygon features).
    pub fn from_geojson_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let mut polygons = Vec::new();
        collect_polygons(&value, &mut polygons)?;
        Self::new(polygons)
    }

    pub fn from_geojson_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_geojson_str(&text)
    }

    pub fn to_geojson(&self) -> Value {
        let coords: Vec<Value> = self
            .polygons
            .iter()
            .map(|poly| {
                Value::Array(
                    poly.rings
                        .iter()
                        .map(|r| Value::Array(r.iter().map(|p| serde_json::json!([p.lon, p.lat])).collect()))
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({
            "type": "Feature",
            "properties": {},
            "geometry": { "type": "MultiPolygon", "coordinates": coords },
        })
    }
}

fn geojson_err(msg: &str) -> Error {
    Error::Config(format!("boundary GeoJSON: {msg}"))
}

fn parse_ring(v: &Value) -> Result<Vec<LonLat>> {
    v.as_array()
        .ok_or_else(|| geojson_err("ring is not an array"))?
        .iter()
        .map(|pos| {
            let pos = pos.as_array().ok_or_else(|| geojson_err("position is not an array"))?;
            match (pos.first().and_then(Value::as_f64), pos.get(1).and_then(Value::as_f64)) {
                (Some(lon), Some(lat)) => Ok(LonLat::new(lon, lat)),
                _ => Err(geojson_err("position needs numeric lon, lat")),
            }
        })
        .collect()
}

fn parse_polygon(v: &Value) -> Result<BoundaryPolygon> {
    let rings = v
        .as_array()
        .ok_or_else(|| geojson_err("polygon coordinates are not an array"))?
        .iter()
        .map(parse_ring)
        .collect::<Result<Vec<_>>>()?;
    BoundaryPolygon::new(rings)
}

fn collect_polygons(v: &Value, out: &mut Vec<BoundaryPolygon>) -> Result<()> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| geojson_err("missing 'type'"))?;
    match kind {
        "FeatureCollection" => {
            let features = v
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| geojson_err("FeatureCollection without features"))?;
            for f in features {
                collect_polygons(f, out)?;
            }
        }
        "Feature" => {
            let geom = v
                .get("geometry")
                .ok_or_else(|| geojson_err("Feature without geometry"))?;
            if !geom.is_null() {
                collect_polygons(geom, out)?;
            }
        }
        "Polygon" => {
            out.push(parse_polygon(
                v.get("coordinates").ok_or_else(|| geojson_err("missing coordinates"))?,
            )?);
        }
        "MultiPolygon" => {
            let polys = v
                .get("coordinates")
                .and_then(Value::as_array)
                .ok_or_else(|| geojson_err("missing coordinates"))?;
            for p in polys {
                out.push(parse_polygon(p)?);
            }
        }
        other => return Err(geojson_err(&format!("unsupported geometry type '{other}'"))),
    }
    Ok(())
}

/// Keeps events inside the boundary. Membership tests run in parallel; output
/// order follows input order.
pub fn spatial_filter(events: Vec<EventRecord>, boundary: &Boundary) -> Filtered {
    let inside: Vec<bool> = events.par_iter().map(|e| boundary.contains(e.location())).collect();
    let mut out = Filtered::default();
    for (e, keep) in events.into_iter().zip(inside) {
        if keep {
            out.kept.push(e);
        } else {
            out.removed.push(e);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryShare {
    pub category: Category,
    pub count: usize,
    /// `100 · count / total`, unrounded.
    pub percent: f64,
}

/// Count and percentage per category present, ordered by count descending
/// (ties in declaration order). Empty input gives an empty table.
pub fn subcategory_shares(events: &[EventRecord]) -> Vec<CategoryShare> {
    let total = events.len();
    if total == 0 {
        return Vec::new();
    }
    let mut counts = [0usize; Category::ALL.len()];
    for e in events {
        counts[e.category as usize] += 1;
    }
    let mut shares: Vec<CategoryShare> = Category::ALL
        .into_iter()
        .zip(counts)
        .filter(|(_, n)| *n > 0)
        .map(|(category, count)| CategoryShare {
            category,
            count,
            percent: 100.0 * count as f64 / total as f64,
        })
        .collect();
    shares.sort_by(|a, b| b.count.cmp(&a.count).then(a.category.cmp(&b.category)));
    shares
}

/// Writes events with the default column names, comma-delimited.
pub fn write_events<W: Write>(sink: W, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let cols = ColumnMapping::default();
    w.write_record([
        &cols.id,
        &cols.timestamp,
        &cols.lon,
        &cols.lat,
        &cols.category,
        &cols.severity,
    ])?;
    for e in events {
        w.write_record([
            e.id.as_str(),
            &e.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            &e.lon.to_string(),
            &e.lat.to_string(),
            e.category.name(),
            e.severity.name(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rejections<W: Write>(sink: W, rejections: &[Rejection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["line", "id", "kind", "reason"])?;
    for r in rejections {
        w.write_record([
            r.line.to_string().as_str(),
            r.id.as_deref().unwrap_or(""),
            r.kind.name(),
            &r.reason,
        ])?;
    }
    w.flush()?;
    Ok(())
}
