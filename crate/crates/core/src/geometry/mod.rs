//! Surface profiles, boundary curves and panel meshes.

mod curve;
mod mesh;
mod profile;

pub use curve::{
    build_curves, build_two_curves, Curve, CurveLabel, CurvePoint, CurveShape, Geometry,
};
pub(crate) use mesh::dyadic_breaks;
pub use mesh::{
    build_coarse_mesh, check_refinement_depth, refine_corner_mesh, MeshLevel, MeshNode, Panel,
    PanelMesh, PanelSet,
};
pub use profile::{quartic_bspline, spline_basis, ProfileKind, SplineBasis, SurfaceProfile};
