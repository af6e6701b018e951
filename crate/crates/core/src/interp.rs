//! Inverse distance weighted interpolation onto a raster, and the ESRI ASCII
//! grid format used to store it.
//!
//! `ẑ(s₀) = Σ z_k d_k^(−p) / Σ d_k^(−p)` over the `m` nearest samples. Samples
//! tied with the m-th distance are all included, so results do not depend on
//! sample order.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GridSpec, PlanarPoint, Projection};
use crate::spatial_index::KdTree;

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdwParams {
    pub power: f64,
    pub neighbors: usize,
    /// Metres; `None` searches without limit.
    pub max_search_radius: Option<f64>,
}

impl Default for IdwParams {
    fn default() -> Self {
        Self {
            power: 2.0,
            neighbors: 12,
            max_search_radius: None,
        }
    }
}

impl IdwParams {
    pub fn validate(&self) -> Result<()> {
        if self.power <= 0.0 || !self.power.is_finite() {
            return Err(Error::Config(format!("IDW power must be positive, got {}", self.power)));
        }
        if self.neighbors == 0 {
            return Err(Error::Config("IDW needs at least one neighbour".into()));
        }
        if let Some(r) = self.max_search_radius {
            if r <= 0.0 || !r.is_finite() {
                return Err(Error::Config(format!("search radius must be positive, got {r}")));
            }
        }
        Ok(())
    }

    fn radius2(&self) -> f64 {
        self.max_search_radius.map_or(f64::INFINITY, |r| r * r)
    }
}

/// Weighted mean of `neighbors` (`(sample index, dist2)` sorted by distance),
/// clamped to the range of the contributing values.
fn weighted_mean(neighbors: &[(usize, f64)], values: &[f64], power: f64) -> Option<f64> {
    let &(first, d2_min) = neighbors.first()?;
    if d2_min == 0.0 {
        return Some(values[first]);
    }
    // Weights relative to the nearest sample, (d_min / d_k)^p, avoid underflow
    // for large p or distances.
    let half_p = power / 2.0;
    let (mut num, mut den) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(k, d2) in neighbors {
        let w = (d2_min / d2).powf(half_p);
        let z = values[k];
        num += w * z;
        den += w;
        lo = lo.min(z);
        hi = hi.max(z);
    }
    Some((num / den).clamp(lo, hi))
}

/// IDW estimate at `s0` by direct scan of `samples`. `None` when no sample lies
/// within the search radius.
pub fn idw_at(s0: PlanarPoint, samples: &[(PlanarPoint, f64)], params: &IdwParams) -> Option<f64> {
    let r2 = params.radius2();
    let mut cands: Vec<(usize, f64)> = samples
        .iter()
        .enumerate()
        .map(|(i, (p, _))| (i, s0.dist2(p)))
        .filter(|(_, d2)| *d2 <= r2)
        .collect();
    cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if cands.len() > params.neighbors {
        let kth = cands[params.neighbors - 1].1;
        cands.retain(|c| c.1 <= kth);
    }
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    weighted_mean(&cands, &values, params.power)
}

/// Indexed IDW evaluator for many query points.
#[derive(Debug, Clone)]
pub struct IdwInterpolator {
    tree: KdTree,
    values: Vec<f64>,
    params: IdwParams,
}

impl IdwInterpolator {
    pub fn new(samples: &[(PlanarPoint, f64)], params: IdwParams) -> Result<Self> {
        params.validate()?;
        if samples.is_empty() {
            return Err(Error::Data("IDW needs at least one sample".into()));
        }
        if samples
            .iter()
            .any(|(p, v)| !p.x.is_finite() || !p.y.is_finite() || !v.is_finite())
        {
            return Err(Error::Data("IDW samples must be finite".into()));
        }
        let points: Vec<PlanarPoint> = samples.iter().map(|s| s.0).collect();
        Ok(Self {
            tree: KdTree::build(&points),
            values: samples.iter().map(|s| s.1).collect(),
            params,
        })
    }

    pub fn at(&self, s0: PlanarPoint) -> Option<f64> {
        let nbrs = self
            .tree
            .nearest_with_ties(s0, self.params.neighbors, self.params.radius2());
        weighted_mean(&nbrs, &self.values, self.params.power)
    }
}

/// Raster of interpolated values. `values` follow [`GridSpec::index`] order,
/// so row 0 is the southernmost row.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub nodata: f64,
}

impl RasterGrid {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.spec.index(col, row)]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata
    }

    /// Defined (non-nodata) values.
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| *v != self.nodata)
    }

    /// ESRI ASCII grid: six header lines, then rows from north to south.
    pub fn write_ascii<W: Write>(&self, mut sink: W) -> Result<()> {
        let s = &self.spec;
        writeln!(sink, "ncols {}", s.n_cols)?;
        writeln!(sink, "nrows {}", s.n_rows)?;
        writeln!(sink, "xllcorner {}", s.origin.x)?;
        writeln!(sink, "yllcorner {}", s.origin.y)?;
        writeln!(sink, "cellsize {}", s.cell_size)?;
        writeln!(sink, "NODATA_value {}", self.nodata)?;
        let mut line = String::new();
        for row in (0..s.n_rows).rev() {
            line.clear();
            for col in 0..s.n_cols {
                if col > 0 {
                    line.push(' ');
                }
                line.push_str(&self.get(col, row).to_string());
            }
            writeln!(sink, "{line}")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_ascii<R: BufRead>(source: R) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut values_north_first = Vec::new();
        let bad = |m: String| Error::Data(format!("ASCII grid: {m}"));
        for line in source.lines() {
            let line = line?;
            let mut parts = line.split_whitespace().peekable();
            let Some(first) = parts.peek().copied() else {
                continue;
            };
            if header.len() < 6 && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                let key = first.to_ascii_lowercase();
                parts.next();
                let val: f64 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(format!("bad header line '{line}'")))?;
                header.insert(key, val);
                continue;
            }
            for tok in parts {
                values_north_first.push(tok.parse::<f64>().map_err(|_| bad(format!("bad value '{tok}'")))?);
            }
        }
        let get = |k: &str| header.get(k).copied().ok_or_else(|| bad(format!("missing '{k}'")));
        let n_cols = get("ncols")? as usize;
        let n_rows = get("nrows")? as usize;
        let spec = GridSpec::new(
            PlanarPoint::new(get("xllcorner")?, get("yllcorner")?),
            get("cellsize")?,
            n_cols,
            n_rows,
        )?;
        let nodata = header.get("nodata_value").copied().unwrap_or(DEFAULT_NODATA);
        if values_north_first.len() != n_cols * n_rows {
            return Err(bad(format!(
                "expected {} values, found {}",
                n_cols * n_rows,
                values_north_first.len()
            )));
        }
        let mut values = vec![0.0; n_cols * n_rows];
        for (k, v) in values_north_first.into_iter().enumerate() {
            let (row_from_top, col) = (k / n_cols, k % n_cols);
            values[spec.index(col, n_rows - 1 - row_from_top)] = v;
        }
        Ok(Self { spec, values, nodata })
    }
}

/// Interpolates at every pixel centre of `raster_spec`. Pixels with no sample
/// in the search radius get `nodata`.
pub fn idw_raster(samples: &[(PlanarPoint, f64)], raster_spec: &GridSpec, params: &IdwParams) -> Result<RasterGrid> {
    let interp = IdwInterpolator::new(samples, *params)?;
    let values = (0..raster_spec.n_cells())
        .into_par_iter()
        .map(|i| {
            let (c, r) = raster_spec.col_row(i);
            interp.at(raster_spec.cell_center(c, r)).unwrap_or(DEFAULT_NODATA)
        })
        .collect();
    Ok(RasterGrid {
        spec: *raster_spec,
        values,
        nodata: DEFAULT_NODATA,
    })
}

/// Plain-text sidecar describing how raster coordinates map to lon/lat.
pub fn write_anchor_sidecar<W: Write>(mut sink: W, projection: &Projection) -> Result<()> {
    let a = projection.anchor();
    writeln!(sink, "projection local_equirectangular")?;
    writeln!(sink, "anchor_lon {}", a.lon)?;
    writeln!(sink, "anchor_lat {}", a.lat)?;
    writeln!(sink, "earth_radius_m {}", crate::geo::EARTH_RADIUS_M)?;
    writeln!(sink, "units metres")?;
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> PlanarPoint {
        PlanarPoint::new(x, y)
    }

    #[test]
    fn single_sample_is_constant() {
        let s = [(p(3.0, 4.0), 2.5)];
        for q in [p(0.0, 0.0), p(100.0, -7.0), p(3.0, 4.0)] {
            assert_eq!(idw_at(q, &s, &IdwParams::default()), Some(2.5));
        }
    }

    #[test]
    fn coincident_sample_is_exact() {
        let s = [(p(0.0, 0.0), 1.0), (p(1.0, 1.0), 7.0), (p(2.0, 0.0), -3.0)];
        assert_eq!(idw_at(p(1.0, 1.0), &s, &IdwParams::default()), Some(7.0));
    }

    #[test]
    fn equidistant_pair_gives_mean() {
        let s = [(p(-1.0, 0.0), 0.0), (p(1.0, 0.0), 10.0)];
        assert_eq!(idw_at(p(0.0, 5.0), &s, &IdwParams::default()), Some(5.0));
    }

    #[test]
    fn radius_limits_give_nodata() {
        let s = [(p(0.0, 0.0), 1.0)];
        let params = IdwParams {
            max_search_radius: Some(10.0),
            ..IdwParams::default()
        };
        assert_eq!(idw_at(p(20.0, 0.0), &s, &params), None);
        let spec = GridSpec::new(p(0.0, 0.0), 10.0, 3, 1).unwrap();
        let r = idw_raster(&s, &spec, &params).unwrap();
        assert_eq!(r.values[0], 1.0);
        assert!(r.is_nodata(r.values[2]));
    }

    #[test]
    fn ties_at_mth_distance_are_included() {
        // four samples at distance 1, m = 1: all four contribute
        let s = [
            (p(1.0, 0.0), 0.0),
            (p(-1.0, 0.0), 4.0),
            (p(0.0, 1.0), 8.0),
            (p(0.0, -1.0), 0.0),
        ];
        let params = IdwParams {
            neighbors: 1,
            ..IdwParams::default()
        };
        assert_eq!(idw_at(p(0.0, 0.0), &s, &params), Some(3.0));
        let interp = IdwInterpolator::new(&s, params).unwrap();
        assert_eq!(interp.at(p(0.0, 0.0)), Some(3.0));
    }

    #[test]
    fn invalid_params_rejected() {
        let s = [(p(0.0, 0.0), 1.0)];
        let spec = GridSpec::new(p(0.0, 0.0), 1.0, 1, 1).unwrap();
        let bad = IdwParams {
            power: 0.0,
            ..IdwParams::default()
        };
        assert!(idw_raster(&s, &spec, &bad).is_err());
        let bad = IdwParams {
            neighbors: 0,
            ..IdwParams::default()
        };
        assert!(idw_raster(&s, &spec, &bad).is_err());
        assert!(idw_raster(&[], &spec, &IdwParams::default()).is_err());
    }

    #[test]
    fn ascii_grid_layout_and_round_trip() {
        let spec = GridSpec::new(p(-100.0, 50.0), 25.0, 3, 2).unwrap();
        let r = RasterGrid {
            spec,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.5, DEFAULT_NODATA],
            nodata: DEFAULT_NODATA,
        };
        let mut buf = Vec::new();
        r.write_ascii(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines,
            [
                "ncols 3",
                "nrows 2",
                "xllcorner -100",
                "yllcorner 50",
                "cellsize 25",
                "NODATA_value -9999",
                "4 5.5 -9999",
                "1 2 3",
            ]
        );
        assert_eq!(RasterGrid::read_ascii(buf.as_slice()).unwrap(), r);
    }

    fn samples() -> impl Strategy<Value = Vec<(PlanarPoint, f64)>> {
        prop::collection::vec(((-500.0..500.0f64, -500.0..500.0f64), -5.0..5.0f64), 1..40)
            .prop_map(|v| v.into_iter().map(|((x, y), z)| (p(x, y), z)).collect())
    }

    proptest! {
        #[test]
        fn exact_at_sites_and_convex(s in samples(), qx in -600.0..600.0f64, qy in -600.0..600.0f64,
                                     m in 1usize..15, power in 0.5..4.0f64) {
            let params = IdwParams { power, neighbors: m, max_search_radius: None };
            let interp = IdwInterpolator::new(&s, params).unwrap();
            for (i, (site, z)) in s.iter().enumerate() {
                // the first sample at a site wins when sites coincide
                if s[..i].iter().all(|(q, _)| q != site) {
                    prop_assert_eq!(interp.at(*site), Some(*z));
                    prop_assert_eq!(idw_at(*site, &s, &params), Some(*z));
                }
            }
            let v = interp.at(p(qx, qy)).unwrap();
            let lo = s.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            let hi = s.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo && v <= hi);
            prop_assert_eq!(Some(v), idw_at(p(qx, qy), &s, &params));
        }

        #[test]
        fn translation_invariance(s in samples(), dx in -1e4..1e4f64, dy in -1e4..1e4f64) {
            let spec = GridSpec::new(p(-500.0, -500.0), 100.0, 10, 10).unwrap();
            let moved: Vec<_> = s.iter().map(|(q, z)| (p(q.x + dx, q.y + dy), *z)).collect();
            let moved_spec = GridSpec::new(p(-500.0 + dx, -500.0 + dy), 100.0, 10, 10).unwrap();
            let a = idw_raster(&s, &spec, &IdwParams::default()).unwrap();
            let b = idw_raster(&moved, &moved_spec, &IdwParams::default()).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn large_power_tends_to_nearest(s in samples(), qx in -600.0..600.0f64, qy in -600.0..600.0f64) {
            let q = p(qx, qy);
            let mut d: Vec<(f64, f64)> = s.iter().map(|(x, z)| (q.distance(x), *z)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            // generic configurations only: nearest clearly separated
            prop_assume!(d.len() == 1 || d[1].0 > 1.2 * d[0].0);
            let params = IdwParams { power: 50.0, neighbors: 12, max_search_radius: None };
            let v = idw_at(q, &s, &params).unwrap();
            prop_assert!((v - d[0].1).abs() < 1e-2);
        }
    }
}
