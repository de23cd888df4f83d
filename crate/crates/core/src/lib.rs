//! Nearest singular pencils by Riemannian optimization over unitary factors.
//!
//! A pencil `A + λB` is singular exactly when some pair of unitary matrices
//! `(Q, Z)` makes `QAZ` and `QBZ` upper triangular with a common zero on the
//! diagonal. The distance to the nearest singular pencil is therefore the
//! minimum over `(Q, Z)` of the distance from `(QAZ, QBZ)` to the nearest
//! singular upper-triangular pencil, which this crate minimizes with a
//! trust-region method.
//!
//! Diagonal positions and minimal indices are 0-based throughout.

pub mod catalog;
pub mod driver;
pub mod error;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod objectives;
pub mod pencil;
pub mod schur;
pub mod trust_region;

pub use driver::{
    multistart, nearest_singular, nearest_singular_min_index, nearest_singular_smoothed,
    MultiStartMode, MultiStartReport, SolveResult, StartStrategy,
};
pub use error::{NspError, Result};
pub use manifold::{ManifoldPoint, MatPair};
pub use objectives::{Objective, ObjectiveEvaluation, Variant};
pub use pencil::{Field, Pencil, ResidualKind, TriangularProjection};
pub use trust_region::{minimize, SolverConfig, SolverStatus, SolverTrace};
