//! Ultrametric Möbius spaces and the trees that fill them.

pub mod antipodal;
pub mod boundary;
pub mod error;
pub mod filling;
pub mod io;
pub mod lifting;
pub mod metric;
pub mod moebius;
pub mod par;
pub mod random;
pub mod suite;

pub use boundary::BoundaryPoint;
pub use error::{Axiom, Error, Result};
pub use filling::{FillingTree, Geodesic, TreePoint};
pub use lifting::BoundaryMap;
pub use metric::{ExtReal, ExtendedMetricSpace, PointId, ProjectiveTriple, Tolerance};
pub use moebius::{Checks, PointMap, Sweep, SweepStats};
