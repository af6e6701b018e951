//! File-producing analysis stages: validate, temporal, hotspot, idw, report,
//! and synthetic data generation.
//!
//! Every stage writes only into the configured output directory. Stages after
//! `validate` read `clean_events.csv` from that directory; `report` reads the
//! outputs of the other stages and notes any that are missing.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::PlanarPoint;
use crate::hotspot::{hotspot_pipeline, write_cells, ConfidenceClass, HotspotParams};
use crate::ingest::{
    dedupe, filter_category, filter_window, parse_events_path, spatial_filter, subcategory_shares, write_events,
    write_rejections, Boundary, CategoryFilter, ColumnMapping, EventRecord, ParseOptions, StudyWindow,
};
use crate::interp::{idw_raster, write_anchor_sidecar, IdwParams};
use crate::synth::{write_scenario_csv, SynthScenario};
use crate::temporal::{
    build_table, chi_square_test, daily_mean, format_p_value, night_vs_afternoon_ratio, shares_from_table,
    TemporalFactor,
};

pub const CONFIG_ECHO: &str = "config.toml";
pub const CLEAN_EVENTS: &str = "clean_events.csv";
pub const REJECTIONS: &str = "rejections.csv";
pub const VALIDATE_SUMMARY: &str = "validate_summary.csv";
pub const SUBCATEGORY_SHARES: &str = "subcategory_shares.csv";
pub const TEMPORAL_STATS: &str = "temporal_stats.csv";
pub const TEMPORAL_SUMMARY: &str = "temporal_summary.csv";
pub const HOTSPOT_CELLS: &str = "hotspot_cells.csv";
pub const HOTSPOT_GEOJSON: &str = "hotspot_cells.geojson";
pub const IDW_RASTER: &str = "gi_star_idw.asc";
pub const IDW_ANCHOR: &str = "gi_star_idw.anchor.txt";
pub const REPORT: &str = "report.md";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    TimeOfDay,
    DayOfWeek,
    Month,
}

impl FactorKind {
    fn factor(self, window: &StudyWindow) -> TemporalFactor {
        match self {
            FactorKind::TimeOfDay => TemporalFactor::TimeOfDay,
            FactorKind::DayOfWeek => TemporalFactor::DayOfWeek,
            FactorKind::Month => TemporalFactor::months_of(window),
        }
    }
}

fn all_factors() -> Vec<FactorKind> {
    vec![FactorKind::TimeOfDay, FactorKind::DayOfWeek, FactorKind::Month]
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdwSettings {
    pub power: f64,
    pub neighbors: usize,
    pub max_search_radius: Option<f64>,
    /// Raster pixels per analysis cell edge.
    pub raster_factor: usize,
}

impl Default for IdwSettings {
    fn default() -> Self {
        let p = IdwParams::default();
        Self {
            power: p.power,
            neighbors: p.neighbors,
            max_search_radius: p.max_search_radius,
            raster_factor: 4,
        }
    }
}

impl IdwSettings {
    pub fn params(&self) -> IdwParams {
        IdwParams {
            power: self.power,
            neighbors: self.neighbors,
            max_search_radius: self.max_search_radius,
        }
    }
}

/// Analysis configuration. Relative paths in a config file are resolved
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub events: Option<PathBuf>,
    #[serde(default)]
    pub boundary: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub category: CategoryFilter,
    #[serde(default = "all_factors")]
    pub factors: Vec<FactorKind>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub timestamp_format: Option<String>,
    #[serde(default)]
    pub columns: ColumnMapping,
    /// Without a window every event is kept and daily means use the span of
    /// event dates.
    #[serde(default)]
    pub window: Option<StudyWindow>,
    #[serde(default)]
    pub hotspot: HotspotParams,
    #[serde(default)]
    pub idw: IdwSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            events: None,
            boundary: None,
            output_dir: None,
            category: CategoryFilter::default(),
            factors: all_factors(),
            delimiter: default_delimiter(),
            timestamp_format: None,
            columns: ColumnMapping::default(),
            window: None,
            hotspot: HotspotParams::default(),
            idw: IdwSettings::default(),
        }
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub events: Option<PathBuf>,
    pub boundary: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub category: Option<CategoryFilter>,
    pub cell_size: Option<f64>,
    pub band: Option<f64>,
    pub power: Option<f64>,
    pub neighbors: Option<usize>,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Reads `path` (if any), resolves its relative paths and applies
    /// `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let mut cfg = Self::from_toml_str(&text)?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.events = cfg.events.map(|e| resolve(base, e));
                cfg.boundary = cfg.boundary.map(|e| resolve(base, e));
                cfg.output_dir = cfg.output_dir.map(|e| resolve(base, e));
                cfg
            }
            None => Self::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.events {
            self.events = Some(v.clone());
        }
        if let Some(v) = &o.boundary {
            self.boundary = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = Some(v.clone());
        }
        if let Some(v) = o.category {
            self.category = v;
        }
        if let Some(v) = o.cell_size {
            self.hotspot.cell_size = v;
        }
        if let Some(v) = o.band {
            self.hotspot.band = v;
        }
        if let Some(v) = o.power {
            self.idw.power = v;
        }
        if let Some(v) = o.neighbors {
            self.idw.neighbors = v;
        }
    }

    /// Checks parameters and the output directory. Input paths are checked by
    /// the stages that read them.
    pub fn validate(&self) -> Result<()> {
        self.output_dir()?;
        let h = &self.hotspot;
        if h.cell_size <= 0.0 || !h.cell_size.is_finite() {
            return Err(Error::Config(format!(
                "cell size must be positive, got {}",
                h.cell_size
            )));
        }
        if h.band <= 0.0 || !h.band.is_finite() {
            return Err(Error::Config(format!("band must be positive, got {}", h.band)));
        }
        self.idw.params().validate()?;
        if self.idw.raster_factor == 0 {
            return Err(Error::Config("raster_factor must be at least 1".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!(
                "delimiter '{}' is not a single byte",
                self.delimiter
            )));
        }
        if self.factors.is_empty() {
            return Err(Error::Config("no temporal factors selected".into()));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given (--out or output_dir)".into()))
    }

    fn input_path<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<Option<&'a Path>> {
        match p.as_deref() {
            Some(path) if !path.is_file() => {
                Err(Error::Config(format!("{what} file {} does not exist", path.display())))
            }
            other => Ok(other),
        }
    }

    fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            columns: self.columns.clone(),
            delimiter: self.delimiter as u8,
            timestamp_format: self.timestamp_format.clone(),
        }
    }
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let out = cfg.output_dir()?.to_path_buf();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

/// Path as written in the config echo: relative to the output directory when
/// inside it, otherwise unchanged.
fn echo_path(p: &Path, out: &Path) -> PathBuf {
    match (fs::canonicalize(p), fs::canonicalize(out)) {
        (Ok(p), Ok(o)) => p.strip_prefix(&o).map(Path::to_path_buf).unwrap_or(p),
        _ => p.to_path_buf(),
    }
}

/// Writes the effective configuration, with every default filled in, into
/// the output directory. The output directory itself is omitted.
pub fn echo_config(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    let mut echo = cfg.clone();
    echo.output_dir = None;
    echo.events = cfg.events.as_deref().map(|p| echo_path(p, out));
    echo.boundary = cfg.boundary.as_deref().map(|p| echo_path(p, out));
    let text = toml::to_string(&echo).map_err(|e| Error::Config(format!("config echo: {e}")))?;
    write_text(&out.join(CONFIG_ECHO), &text)
}

/// Row counts through the cleaning stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidateSummary {
    pub parsed: usize,
    pub rejected_rows: usize,
    pub outside_window: usize,
    pub duplicates: usize,
    pub other_category: usize,
    pub outside_boundary: usize,
    pub retained: usize,
}

impl ValidateSummary {
    fn rows(&self) -> [(&'static str, usize); 8] {
        [
            ("input_rows", self.parsed + self.rejected_rows),
            ("rejected_rows", self.rejected_rows),
            ("parsed", self.parsed),
            ("outside_window", self.outside_window),
            ("duplicates", self.duplicates),
            ("other_category", self.other_category),
            ("outside_boundary", self.outside_boundary),
            ("retained", self.retained),
        ]
    }
}

/// Parse, window filter, dedupe, category filter, boundary filter.
pub fn clean(cfg: &RunConfig) -> Result<(Vec<EventRecord>, Vec<crate::ingest::Rejection>, ValidateSummary)> {
    let events_path = cfg
        .input_path(&cfg.events, "events")?
        .ok_or_else(|| Error::Config("no events file given (--input or events)".into()))?;
    let boundary = cfg
        .input_path(&cfg.boundary, "boundary")?
        .map(Boundary::from_geojson_path)
        .transpose()?;
    let parsed = parse_events_path(events_path, &cfg.parse_options())?;
    let mut s = ValidateSummary {
        parsed: parsed.records.len(),
        rejected_rows: parsed.rejections.len(),
        ..Default::default()
    };
    let mut events = parsed.records;
    if let Some(w) = &cfg.window {
        let f = filter_window(events, w);
        s.outside_window = f.removed.len();
        events = f.kept;
    }
    let f = dedupe(events);
    s.duplicates = f.removed.len();
    let f = filter_category(f.kept, cfg.category);
    s.other_category = f.removed.len();
    events = f.kept;
    if let Some(b) = &boundary {
        let f = spatial_filter(events, b);
        s.outside_boundary = f.removed.len();
        events = f.kept;
    }
    s.retained = events.len();
    Ok((events, parsed.rejections, s))
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidateSummary> {
    let out = prepare_out(cfg)?;
    let (events, rejections, summary) = clean(cfg)?;
    write_events(create_file(&out.join(CLEAN_EVENTS))?, &events)?;
    write_rejections(create_file(&out.join(REJECTIONS))?, &rejections)?;
    let mut w = csv::Writer::from_writer(create_file(&out.join(VALIDATE_SUMMARY))?);
    w.write_record(["stage", "count"])?;
    for (k, v) in summary.rows() {
        w.write_record([k, &v.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(create_file(&out.join(SUBCATEGORY_SHARES))?);
    w.write_record(["category", "count", "percent"])?;
    for s in subcategory_shares(&events) {
        w.write_record([s.category.name(), &s.count.to_string(), &format!("{:.2}", s.percent)])?;
    }
    w.flush()?;
    echo_config(cfg)?;
    Ok(summary)
}

fn load_clean(out: &Path) -> Result<Vec<EventRecord>> {
    let path = out.join(CLEAN_EVENTS);
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{} not found; run the validate stage first",
            path.display()
        )));
    }
    let parsed = parse_events_path(&path, &ParseOptions::default())?;
    if let Some(r) = parsed.rejections.first() {
        return Err(Error::Data(format!(
            "{}: line {}: {}",
            path.display(),
            r.line,
            r.reason
        )));
    }
    Ok(parsed.records)
}

/// The configured window, or the span of event dates when none is set.
fn effective_window(cfg: &RunConfig, events: &[EventRecord]) -> Result<StudyWindow> {
    if let Some(w) = &cfg.window {
        return Ok(w.clone());
    }
    let first = events.iter().map(EventRecord::date).min();
    let last = events.iter().map(EventRecord::date).max();
    match (first, last) {
        (Some(a), Some(b)) => StudyWindow::new(a, b, []),
        _ => Err(Error::Data("no events to analyse".into())),
    }
}

/// Outcome of one temporal factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorOutcome {
    pub factor: &'static str,
    pub report: Option<crate::temporal::ChiSquareReport>,
    pub warning: Option<String>,
}

pub fn cmd_temporal(cfg: &RunConfig) -> Result<Vec<FactorOutcome>> {
    let out = prepare_out(cfg)?;
    let events = load_clean(&out)?;
    if events.is_empty() {
        return Err(Error::Data("no events to analyse".into()));
    }
    let window = effective_window(cfg, &events)?;
    let mut outcomes = Vec::new();
    let mut stats = csv::Writer::from_writer(create_file(&out.join(TEMPORAL_STATS))?);
    stats.write_record(["factor", "chi2", "df", "p", "cramers_v", "n", "note"])?;
    let mut tod_shares = None;
    for kind in &cfg.factors {
        let factor = kind.factor(&window);
        let table = build_table(&events, &factor)?;
        let shares = shares_from_table(&table);
        let mut w = csv::Writer::from_writer(create_file(&out.join(format!("temporal_{}.csv", factor.name())))?);
        w.write_record(["category", "n_low", "n_high", "percent_high"])?;
        for s in &shares {
            let pct = s.percent_high.map_or(String::new(), |p| format!("{p:.2}"));
            w.write_record([s.label.as_str(), &s.n_low.to_string(), &s.n_high.to_string(), &pct])?;
        }
        w.flush()?;
        if *kind == FactorKind::TimeOfDay {
            tod_shares = Some(shares);
        }
        let outcome = match chi_square_test(&table) {
            Ok(r) => {
                stats.write_record([
                    factor.name(),
                    &r.chi2.to_string(),
                    &r.df.to_string(),
                    &r.p_value.to_string(),
                    &r.cramers_v.to_string(),
                    &r.n.to_string(),
                    "",
                ])?;
                FactorOutcome {
                    factor: factor.name(),
                    report: Some(r),
                    warning: None,
                }
            }
            Err(e) if e.is_data_error() => {
                let note = e.to_string();
                stats.write_record([factor.name(), "", "", "", "", &table.total().to_string(), &note])?;
                FactorOutcome {
                    factor: factor.name(),
                    report: None,
                    warning: Some(note),
                }
            }
            Err(e) => return Err(e),
        };
        outcomes.push(outcome);
    }
    stats.flush()?;

    let mut w = csv::Writer::from_writer(create_file(&out.join(TEMPORAL_SUMMARY))?);
    w.write_record(["metric", "value"])?;
    w.write_record(["n_events", &events.len().to_string()])?;
    w.write_record(["window_start", &window.start().to_string()])?;
    w.write_record(["window_end", &window.end().to_string()])?;
    w.write_record(["observed_days", &window.observed_days().to_string()])?;
    w.write_record([
        "daily_mean",
        &format!("{:.2}", daily_mean(events.len() as u64, &window)?),
    ])?;
    let ratio = tod_shares.as_deref().and_then(night_vs_afternoon_ratio);
    w.write_record([
        "night_vs_afternoon_high_share_ratio",
        &ratio.map_or(String::new(), |r| format!("{r:.4}")),
    ])?;
    w.flush()?;
    echo_config(cfg)?;
    Ok(outcomes)
}

fn hotspot_params(cfg: &RunConfig) -> HotspotParams {
    cfg.hotspot
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotspotSummary {
    pub tally: Vec<(ConfidenceClass, usize)>,
    /// Set when the band is shorter than the cell size.
    pub warning: Option<String>,
}

pub fn cmd_hotspot(cfg: &RunConfig) -> Result<HotspotSummary> {
    let out = prepare_out(cfg)?;
    let events = load_clean(&out)?;
    let h = hotspot_pipeline(&events, &hotspot_params(cfg))?;
    write_cells(create_file(&out.join(HOTSPOT_CELLS))?, &h.records())?;
    let mut f = create_file(&out.join(HOTSPOT_GEOJSON))?;
    serde_json::to_writer(&mut f, &h.to_geojson())?;
    writeln!(f)?;
    f.flush()?;
    echo_config(cfg)?;
    Ok(HotspotSummary {
        tally: h.result.tally(),
        warning: h.weights.warning.clone(),
    })
}

/// Interpolates the Gi* field at cell centres onto a raster
/// `raster_factor` times finer than the analysis grid.
pub fn cmd_idw(cfg: &RunConfig) -> Result<crate::interp::RasterGrid> {
    let out = prepare_out(cfg)?;
    let events = load_clean(&out)?;
    let h = hotspot_pipeline(&events, &hotspot_params(cfg))?;
    let spec = &h.cells.spec;
    let samples: Vec<(PlanarPoint, f64)> = (0..spec.n_cells())
        .map(|i| {
            let (c, r) = spec.col_row(i);
            (spec.cell_center(c, r), h.result.z[i])
        })
        .collect();
    let raster = idw_raster(&samples, &spec.refined(cfg.idw.raster_factor)?, &cfg.idw.params())?;
    let mut f = create_file(&out.join(IDW_RASTER))?;
    raster.write_ascii(&mut f)?;
    write_anchor_sidecar(create_file(&out.join(IDW_ANCHOR))?, &h.projection)?;
    echo_config(cfg)?;
    Ok(raster)
}

fn read_csv_rows(path: &Path) -> Result<Option<Vec<csv::StringRecord>>> {
    if !path.is_file() {
        return Ok(None);
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Some(rows))
}

fn not_run(doc: &mut String, stage: &str) {
    let _ = writeln!(doc, "_Stage not run: `{stage}` outputs were not found._\n");
}

/// Collates stage outputs into `report.md`. Missing inputs produce a notice
/// in the affected section.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let out = prepare_out(cfg)?;
    let mut doc = String::from("# Collision analysis report\n\n");

    doc.push_str("## Data cleaning\n\n");
    match read_csv_rows(&out.join(VALIDATE_SUMMARY))? {
        Some(rows) => {
            doc.push_str("| stage | count |\n|---|---:|\n");
            for r in rows {
                let _ = writeln!(doc, "| {} | {} |", &r[0], &r[1]);
            }
            doc.push('\n');
        }
        None => not_run(&mut doc, "validate"),
    }

    doc.push_str("## Subcategory shares\n\n");
    match read_csv_rows(&out.join(SUBCATEGORY_SHARES))? {
        Some(rows) => {
            doc.push_str("| category | count | % |\n|---|---:|---:|\n");
            let mut total = 0u64;
            for r in &rows {
                let _ = writeln!(doc, "| {} | {} | {} |", &r[0], &r[1], &r[2]);
                total += r[1].parse::<u64>().unwrap_or(0);
            }
            let _ = writeln!(doc, "| **Total** | {total} | 100.00 |\n");
        }
        None => not_run(&mut doc, "validate"),
    }

    doc.push_str("## Temporal association\n\n");
    match read_csv_rows(&out.join(TEMPORAL_STATS))? {
        Some(rows) => {
            doc.push_str("| factor | χ² (df) | p-value | Cramér's V | N |\n|---|---:|---:|---:|---:|\n");
            let mut notes = Vec::new();
            for r in rows {
                if r[1].is_empty() {
                    let _ = writeln!(doc, "| {} | n/a | n/a | n/a | {} |", &r[0], &r[5]);
                    notes.push(format!("{}: {}", &r[0], &r[6]));
                    continue;
                }
                let num = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
                let _ = writeln!(
                    doc,
                    "| {} | {:.2} ({}) | {} | {:.3} | {} |",
                    &r[0],
                    num(&r[1]),
                    &r[2],
                    format_p_value(num(&r[3])),
                    num(&r[4]),
                    &r[5]
                );
            }
            doc.push('\n');
            for n in notes {
                let _ = writeln!(doc, "- warning: {n}");
            }
            if let Some(rows) = read_csv_rows(&out.join(TEMPORAL_SUMMARY))? {
                for r in rows {
                    if !r[1].is_empty() {
                        let _ = writeln!(doc, "- {}: {}", &r[0], &r[1]);
                    }
                }
            }
            doc.push('\n');
        }
        None => not_run(&mut doc, "temporal"),
    }

    doc.push_str("## Hotspots\n\n");
    match read_csv_rows(&out.join(HOTSPOT_CELLS))? {
        Some(rows) => {
            let mut counts = [0usize; ConfidenceClass::ALL.len()];
            for r in &rows {
                let class: ConfidenceClass = r[9]
                    .parse()
                    .map_err(|e: String| Error::Data(format!("{HOTSPOT_CELLS}: {e}")))?;
                counts[ConfidenceClass::ALL.iter().position(|c| *c == class).unwrap_or(0)] += 1;
            }
            doc.push_str("| class | cells |\n|---|---:|\n");
            for (c, n) in ConfidenceClass::ALL.iter().zip(counts) {
                let _ = writeln!(doc, "| {} | {n} |", c.name());
            }
            let _ = writeln!(doc, "| **Total** | {} |\n", rows.len());
        }
        None => not_run(&mut doc, "hotspot"),
    }

    write_text(&out.join(REPORT), &doc)?;
    Ok(doc)
}

/// validate, temporal, hotspot, idw and report in sequence.
pub fn cmd_run(cfg: &RunConfig) -> Result<()> {
    cmd_validate(cfg)?;
    cmd_temporal(cfg)?;
    cmd_hotspot(cfg)?;
    cmd_idw(cfg)?;
    cmd_report(cfg)?;
    Ok(())
}

pub const SYNTH_EVENTS: &str = "events.csv";
pub const SYNTH_BOUNDARY: &str = "boundary.geojson";
pub const SYNTH_MANIFEST: &str = "manifest.json";
pub const SYNTH_SCENARIO: &str = "scenario.toml";
pub const SYNTH_RUN_CONFIG: &str = "run.toml";

/// Writes the scenario's events, boundary, expected stage counts, the
/// scenario itself and a ready-to-use run config into `dir`. The run config
/// points at the generated files and writes results into `dir/..`.
pub fn cmd_synth(scenario: &SynthScenario, dir: &Path) -> Result<crate::synth::SynthManifest> {
    scenario.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut f = create_file(&dir.join(SYNTH_EVENTS))?;
    let manifest = write_scenario_csv(&mut f, scenario)?;
    f.flush()?;
    let boundary = scenario.bbox.to_boundary()?;
    let text = serde_json::to_string(&boundary.to_geojson())?;
    write_text(&dir.join(SYNTH_BOUNDARY), &(text + "\n"))?;
    write_text(
        &dir.join(SYNTH_MANIFEST),
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;
    write_text(&dir.join(SYNTH_SCENARIO), &scenario.to_toml_string()?)?;
    let run = RunConfig {
        events: Some(SYNTH_EVENTS.into()),
        boundary: Some(SYNTH_BOUNDARY.into()),
        output_dir: Some("..".into()),
        window: Some(scenario.window.clone()),
        ..RunConfig::default()
    };
    let text = toml::to_string(&run).map_err(|e| Error::Config(format!("run config: {e}")))?;
    write_text(&dir.join(SYNTH_RUN_CONFIG), &text)?;
    Ok(manifest)
}

/// Generates `scenario` into `out/synth` and runs every stage on it with
/// results in `out`.
pub fn run_synthetic(scenario: &SynthScenario, out: &Path, overrides: &Overrides) -> Result<()> {
    let dir = out.join("synth");
    cmd_synth(scenario, &dir)?;
    let cfg = RunConfig::load(Some(&dir.join(SYNTH_RUN_CONFIG)), overrides)?;
    cmd_run(&cfg)
}
