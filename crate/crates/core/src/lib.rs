//! Collision analysis toolkit.
//!
//! Cleans geolocated, timestamped, severity-labelled incident records and runs
//! three analyses over them:
//!
//! * temporal association between time bins and severity (chi-square test of
//!   independence with Cramér's V),
//! * severity-weighted Getis-Ord Gi* hotspot detection on a square grid,
//! * inverse distance weighted interpolation of the Gi* field onto a raster.
//!
//! The [`synth`] module generates seeded synthetic incident sets with planted
//! clusters and carries brute-force oracles used by the test suites. The
//! [`pipeline`] module sequences everything into file-producing stages.

pub mod error;
pub mod geo;
pub mod hotspot;
pub mod ingest;
pub mod interp;
pub mod pipeline;
pub mod spatial_index;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
pub use geo::{GridSpec, PlanarPoint, Projection};
pub use hotspot::{CellGrid, ConfidenceClass, GiStarResult, SpatialWeights};
pub use ingest::{Boundary, BoundaryPolygon, Category, EventRecord, Severity, StudyWindow};
pub use interp::{IdwParams, RasterGrid};
pub use temporal::{ChiSquareReport, ContingencyTable, Period, TemporalFactor};
