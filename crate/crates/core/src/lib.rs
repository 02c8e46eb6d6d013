//! Exact tropical and non-archimedean algebra for mirrors of 4-dimensional
//! symplectic cluster manifolds.

pub mod affine_base;
pub mod bv;
pub mod filtered;
pub mod laurent;
pub mod glued_mirror;
pub mod local_mirror;
pub mod novikov;
pub mod polygon;
pub mod rational;

pub use laurent::{LatticeSeries, LaurentError};
pub use novikov::{NovikovError, NovikovScalar, Valuation};
pub use polygon::{Halfspace, PolygonError, RationalPolygon};
pub use rational::{Point, Q};
pub use affine_base::{
    chart_transition, classify_small, decompose_admissible_intersection, shear_apply, AffineError, Chart,
    EigenrayDiagram, NodalPolygon, Node, NodeRef, Ray, Side, SmallType, StripData, TaggedHalfspace,
};
pub use bv::{bv_delta, contract_volume, BvError, DiffForm, PolyVector};
pub use filtered::{boundary_depth, diagonalize_valuation, max_torsion, ComplexError, FilteredComplex, NovMatrix};
pub use glued_mirror::{glue_sections, hartogs_extend, monodromy_transport, CoverElement, GlueError};
pub use local_mirror::{wall_cross_series, LocalError, Wall, WallSide};
