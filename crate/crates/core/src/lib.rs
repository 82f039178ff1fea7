//! Random walks and geodesic flow on `Z^d`-covers of finite-area hyperbolic
//! surfaces.
//!
//! The crate is layered: [`hyp2`] is the `PSL(2,R)` kernel, [`fuchsian`] builds
//! fundamental polygons and reduces points into them, [`cover`] tracks the
//! sheet index on a `Z^d`-cover, [`walk`] runs trajectories and [`stats`]
//! fits the limit laws.

pub mod cover;
pub mod fuchsian;
pub mod io;
pub mod hyp2;
pub mod stats;
pub mod walk;

pub use cover::{Cover, CoverError, CoverPoint, CoverSpec};
pub use fuchsian::{
    builtin_lattice, dirichlet_domain, CuspData, FundamentalPolygon, GeometryError,
    LatticePresentation, Letter, Preset, ReducedPoint, Surface, Word,
};
pub use hyp2::{
    BoundaryPoint, CartanCoords, GroupElement, HypError, IwasawaCoords, PointH, RunningProduct,
    UnitTangent,
};
pub use io::{LatticeAudit, LatticeFile, LineError};
pub use stats::{CauchyFit, DriftSummary, GaussianFit, HaarMean, RecurrenceReport, StatsError, Verdict};
pub use walk::{
    Checkpoints, CheckpointRecord, GeodesicConfig, Measure, MeasureSpec, StartMode, Trajectory,
    WalkConfig, WalkError, Walker,
};
