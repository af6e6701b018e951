//! Severity-weighted Getis-Ord Gi* hotspot detection.
//!
//! Events are weighted by severity (Low = 1, High = 2), summed per square grid
//! cell, and every cell (empty ones included) becomes a spatial feature. Cell
//! neighbourhoods are fixed distance bands on cell centres with binary weights
//! and self-inclusion. For feature `i` with `k_i` neighbours out of `N`:
//!
//! ```text
//! z_i = (Σ_j w_ij x_j − x̄ k_i) / (S · sqrt((N k_i − k_i²) / (N − 1)))
//! S   = sqrt(Σ x_j² / N − x̄²)
//! ```
//!
//! With binary weights `Σ_j w_ij = Σ_j w_ij² = k_i`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::{cell_of, GridSpec, LonLat, PlanarPoint, Projection};
use crate::ingest::{EventRecord, Severity};
use crate::spatial_index::KdTree;

/// Default analysis cell edge, metres.
pub const DEFAULT_CELL_SIZE_M: f64 = 500.0;
/// Default neighbourhood band, metres.
pub const DEFAULT_BAND_M: f64 = 1_000.0;

/// Two-tailed standard-normal critical values for 90/95/99% confidence.
pub const Z_90: f64 = 1.645;
pub const Z_95: f64 = 1.960;
pub const Z_99: f64 = 2.576;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeverityWeight(u8);

impl SeverityWeight {
    pub fn value(self) -> u8 {
        self.0
    }
}

pub fn severity_weight(severity: Severity) -> SeverityWeight {
    match severity {
        Severity::Low => SeverityWeight(1),
        Severity::High => SeverityWeight(2),
    }
}

/// Severity-weighted values per grid cell, indexed like [`GridSpec::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub spec: GridSpec,
    pub x: Vec<f64>,
    pub n_events: Vec<u32>,
}

impl CellGrid {
    pub fn total_weight(&self) -> f64 {
        self.x.iter().sum()
    }

    pub fn non_empty(&self) -> usize {
        self.n_events.iter().filter(|n| **n > 0).count()
    }
}

/// Sums severity weights of `points` into the cells of `grid`.
pub fn aggregate_planar(points: &[(PlanarPoint, Severity)], grid: &GridSpec) -> Result<CellGrid> {
    let mut x = vec![0.0; grid.n_cells()];
    let mut n_events = vec![0u32; grid.n_cells()];
    for (p, s) in points {
        let (c, r) = cell_of(*p, grid)?;
        let i = grid.index(c, r);
        x[i] += f64::from(severity_weight(*s).value());
        n_events[i] += 1;
    }
    Ok(CellGrid {
        spec: *grid,
        x,
        n_events,
    })
}

/// Projects events with `projection` and aggregates them into `grid`.
pub fn aggregate(events: &[EventRecord], projection: &Projection, grid: &GridSpec) -> Result<CellGrid> {
    let points: Vec<_> = events
        .iter()
        .map(|e| (projection.forward(e.location()), e.severity))
        .collect();
    aggregate_planar(&points, grid)
}

/// Binary fixed-distance-band weights. `neighbors[i]` lists every feature
/// within the band of feature `i`, itself included, in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    pub neighbors: Vec<Vec<usize>>,
    pub band: f64,
    /// Set when the band is shorter than the feature spacing.
    pub warning: Option<String>,
}

impl SpatialWeights {
    pub fn n_features(&self) -> usize {
        self.neighbors.len()
    }
}

/// Distance-band weights between arbitrary feature locations, using a k-d
/// tree for the radius queries.
pub fn band_weights(points: &[PlanarPoint], band: f64) -> Result<SpatialWeights> {
    if band <= 0.0 || !band.is_finite() {
        return Err(Error::Config(format!("band must be positive, got {band}")));
    }
    let tree = KdTree::build(points);
    let band2 = band * band;
    let neighbors = points.par_iter().map(|p| tree.within(*p, band2)).collect();
    Ok(SpatialWeights {
        neighbors,
        band,
        warning: None,
    })
}

/// Distance-band weights between the cell centres of `grid`.
pub fn build_weights(grid: &GridSpec, band: f64) -> Result<SpatialWeights> {
    let mut w = band_weights(&grid.centers(), band)?;
    if band < grid.cell_size {
        w.warning = Some(format!(
            "band {band} m is shorter than the cell size {} m; every cell has only itself as neighbour",
            grid.cell_size
        ));
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfidenceClass {
    Hot99,
    Hot95,
    Hot90,
    NotSignificant,
    Cold90,
    Cold95,
    Cold99,
}

impl ConfidenceClass {
    pub const ALL: [ConfidenceClass; 7] = [
        ConfidenceClass::Hot99,
        ConfidenceClass::Hot95,
        ConfidenceClass::Hot90,
        ConfidenceClass::NotSignificant,
        ConfidenceClass::Cold90,
        ConfidenceClass::Cold95,
        ConfidenceClass::Cold99,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConfidenceClass::Hot99 => "Hot99",
            ConfidenceClass::Hot95 => "Hot95",
            ConfidenceClass::Hot90 => "Hot90",
            ConfidenceClass::NotSignificant => "NotSignificant",
            ConfidenceClass::Cold90 => "Cold90",
            ConfidenceClass::Cold95 => "Cold95",
            ConfidenceClass::Cold99 => "Cold99",
        }
    }

    pub fn is_hot(self) -> bool {
        matches!(
            self,
            ConfidenceClass::Hot90 | ConfidenceClass::Hot95 | ConfidenceClass::Hot99
        )
    }

    pub fn is_cold(self) -> bool {
        matches!(
            self,
            ConfidenceClass::Cold90 | ConfidenceClass::Cold95 | ConfidenceClass::Cold99
        )
    }

    /// Hot at 95% or stronger.
    pub fn is_hot95(self) -> bool {
        matches!(self, ConfidenceClass::Hot95 | ConfidenceClass::Hot99)
    }
}

impl fmt::Display for ConfidenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConfidenceClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ConfidenceClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown confidence class '{s}'"))
    }
}

/// Confidence class from the z-score thresholds 1.645 / 1.960 / 2.576.
pub fn classify(z: f64) -> ConfidenceClass {
    let a = z.abs();
    let level = if a >= Z_99 {
        3
    } else if a >= Z_95 {
        2
    } else if a >= Z_90 {
        1
    } else {
        0
    };
    match (level, z > 0.0) {
        (0, _) => ConfidenceClass::NotSignificant,
        (1, true) => ConfidenceClass::Hot90,
        (2, true) => ConfidenceClass::Hot95,
        (_, true) => ConfidenceClass::Hot99,
        (1, false) => ConfidenceClass::Cold90,
        (2, false) => ConfidenceClass::Cold95,
        (_, false) => ConfidenceClass::Cold99,
    }
}

/// Complementary error function, Chebyshev fit with fractional error below
/// 1.2e-7 everywhere (Numerical Recipes `erfcc`).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let ans = t * poly.exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-tailed p-value `2·(1 − Φ(|z|))`.
pub fn two_tailed_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GiStarResult {
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub class: Vec<ConfidenceClass>,
}

impl GiStarResult {
    fn from_z(z: Vec<f64>) -> Self {
        let p = z.iter().map(|z| two_tailed_p(*z)).collect();
        let class = z.iter().map(|z| classify(*z)).collect();
        Self { z, p, class }
    }

    pub fn tally(&self) -> Vec<(ConfidenceClass, usize)> {
        ConfidenceClass::ALL
            .into_iter()
            .map(|c| (c, self.class.iter().filter(|k| **k == c).count()))
            .collect()
    }
}

/// Relative threshold below which the spread `S` is treated as zero.
const FLAT_FIELD_REL: f64 = 1e-12;

/// Gi* z-scores for feature values `x` under `weights`.
///
/// Every z is 0 when all values are equal (S = 0), and a feature whose
/// variance term `N k − k²` is not positive (its band covers all features)
/// gets z = 0. The spread is computed from centred values, which is
/// algebraically identical to `sqrt(Σx²/N − x̄²)` and keeps z invariant under
/// a constant shift of `x`.
pub fn gi_star_values(x: &[f64], weights: &SpatialWeights) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Data(format!("Gi* needs at least 2 features, got {n}")));
    }
    if weights.n_features() != n {
        return Err(Error::Config(format!(
            "weights cover {} features but {n} values were given",
            weights.n_features()
        )));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let s = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf).sqrt();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s <= FLAT_FIELD_REL * scale || s == 0.0 {
        return Ok(vec![0.0; n]);
    }
    Ok(weights
        .neighbors
        .par_iter()
        .map(|nbrs| {
            let k = nbrs.len() as f64;
            let var = (nf * k - k * k) / (nf - 1.0);
            if var <= 0.0 {
                return 0.0;
            }
            let num: f64 = nbrs.iter().map(|&j| x[j] - mean).sum();
            num / (s * var.sqrt())
        })
        .collect())
}

pub fn gi_star(cells: &CellGrid, weights: &SpatialWeights) -> Result<GiStarResult> {
    Ok(GiStarResult::from_z(gi_star_values(&cells.x, weights)?))
}

/// Reclassifies with Benjamini-Hochberg false-discovery-rate control at each
/// confidence level: a feature keeps level `1 − α` only if its p-value is at or
/// below the BH critical p for `α`.
pub fn classify_fdr(result: &GiStarResult) -> Vec<ConfidenceClass> {
    let n = result.p.len();
    let mut sorted = result.p.clone();
    sorted.sort_by(f64::total_cmp);
    let critical = |alpha: f64| {
        sorted
            .iter()
            .enumerate()
            .rev()
            .find(|(k, p)| **p <= (*k + 1) as f64 * alpha / n as f64)
            .map(|(_, p)| *p)
            .unwrap_or(-1.0)
    };
    let (c90, c95, c99) = (critical(0.10), critical(0.05), critical(0.01));
    result
        .z
        .iter()
        .zip(&result.p)
        .map(|(&z, &p)| {
            let level = if p <= c99 {
                3
            } else if p <= c95 {
                2
            } else if p <= c90 {
                1
            } else {
                0
            };
            match (level, z > 0.0) {
                (0, _) => ConfidenceClass::NotSignificant,
                (1, true) => ConfidenceClass::Hot90,
                (2, true) => ConfidenceClass::Hot95,
                (_, true) => ConfidenceClass::Hot99,
                (1, false) => ConfidenceClass::Cold90,
                (2, false) => ConfidenceClass::Cold95,
                (_, false) => ConfidenceClass::Cold99,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotspotParams {
    pub cell_size: f64,
    pub band: f64,
    #[serde(default)]
    pub fdr: bool,
}

impl Default for HotspotParams {
    fn default() -> Self {
        Self {
            cell_size: DEFAULT_CELL_SIZE_M,
            band: DEFAULT_BAND_M,
            fdr: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HotspotOutput {
    pub projection: Projection,
    pub cells: CellGrid,
    pub weights: SpatialWeights,
    pub result: GiStarResult,
}

/// One output row per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: usize,
    pub col: usize,
    pub row: usize,
    pub lon: f64,
    pub lat: f64,
    pub x: f64,
    pub n_events: u32,
    pub z: f64,
    pub p: f64,
    pub class: ConfidenceClass,
}

impl HotspotOutput {
    pub fn records(&self) -> Vec<CellRecord> {
        let spec = &self.cells.spec;
        (0..spec.n_cells())
            .map(|i| {
                let (col, row) = spec.col_row(i);
                let c = self.projection.inverse(spec.cell_center(col, row));
                CellRecord {
                    cell: i,
                    col,
                    row,
                    lon: c.lon,
                    lat: c.lat,
                    x: self.cells.x[i],
                    n_events: self.cells.n_events[i],
                    z: self.result.z[i],
                    p: self.result.p[i],
                    class: self.result.class[i],
                }
            })
            .collect()
    }

    /// Cell polygons (corners inverse-projected to lon/lat) with properties
    /// `x, n_events, z, p, class`.
    pub fn to_geojson(&self) -> Value {
        let spec = &self.cells.spec;
        let features: Vec<Value> = self
            .records()
            .into_iter()
            .map(|r| {
                let x0 = spec.origin.x + r.col as f64 * spec.cell_size;
                let y0 = spec.origin.y + r.row as f64 * spec.cell_size;
                let corners = [
                    (x0, y0),
                    (x0 + spec.cell_size, y0),
                    (x0 + spec.cell_size, y0 + spec.cell_size),
                    (x0, y0 + spec.cell_size),
                    (x0, y0),
                ];
                let ring: Vec<Value> = corners
                    .iter()
                    .map(|&(x, y)| {
                        let LonLat { lon, lat } = self.projection.inverse(PlanarPoint::new(x, y));
                        json!([lon, lat])
                    })
                    .collect();
                json!({
                    "type": "Feature",
                    "id": r.cell,
                    "geometry": { "type": "Polygon", "coordinates": [ring] },
                    "properties": {
                        "col": r.col,
                        "row": r.row,
                        "x": r.x,
                        "n_events": r.n_events,
                        "z": r.z,
                        "p": r.p,
                        "class": r.class.name(),
                    },
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

/// Projection, gridding, aggregation, weights and Gi* in one call. The
/// projection is anchored at the mean event location.
pub fn hotspot_pipeline(events: &[EventRecord], params: &HotspotParams) -> Result<HotspotOutput> {
    if events.is_empty() {
        return Err(Error::Data("no events for hotspot analysis".into()));
    }
    let locations: Vec<LonLat> = events.iter().map(EventRecord::location).collect();
    let projection = Projection::fit(&locations)?;
    let planar: Vec<PlanarPoint> = locations.iter().map(|p| projection.forward(*p)).collect();
    let grid = crate::geo::build_grid(&planar, params.cell_size)?;
    let points: Vec<_> = planar.into_iter().zip(events.iter().map(|e| e.severity)).collect();
    let cells = aggregate_planar(&points, &grid)?;
    if cells.non_empty() < 2 {
        return Err(Error::Data(format!(
            "hotspot analysis needs at least 2 non-empty cells, got {}",
            cells.non_empty()
        )));
    }
    let weights = build_weights(&grid, params.band)?;
    let mut result = gi_star(&cells, &weights)?;
    if params.fdr {
        result.class = classify_fdr(&result);
    }
    Ok(HotspotOutput {
        projection,
        cells,
        weights,
        result,
    })
}

pub fn write_cells<W: Write>(sink: W, records: &[CellRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
