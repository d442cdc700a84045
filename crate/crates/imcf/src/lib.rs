//! Weak inverse mean curvature flow on spherically symmetric asymptotically
//! flat 3-manifolds.
//!
//! The crate implements, for warped-product metrics g = A(s) ds^2 + R(s)^2 g_{S^2}:
//!
//! - pointwise geometry of centered spheres (area, mean curvature, Hawking
//!   mass, enclosed volume, scalar curvature, ADM mass, decay checks) in
//!   [`geometry`];
//! - the exact weak flow of centered spheres, including minimizing-hull jump
//!   resolution and the volume reparametrization t(v), in [`flow`];
//! - the elliptic regularization of the level-set equation and its
//!   eps -> 0 continuation study in [`regsolver`];
//! - Hawking-mass-improved isoperimetric comparisons, a restricted
//!   isoperimetric-profile oracle, a rigidity probe and the minimal-surface
//!   area lower bound in [`isoperimetry`];
//! - file formats and run orchestration for the `imcf` binary in [`cli`].
//!
//! Every computation is deterministic: identical inputs produce bit-identical
//! outputs. See the `examples/` directory for one runnable example per major
//! capability.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod interp;
pub mod quad;
pub mod regsolver;

pub use error::{Error, Result};
pub use flow::{
    exact_flow, geroch_check, lipschitz_bound_check, minimizing_hull, volume_growth_check,
    FlowProfile, FlowSample, GerochReport, JumpEvent, LipschitzReport, VolumeGrowthReport,
};
pub use regsolver::{
    assemble_residual, convergence_study, discrete_residual, feasible_level, level_set_extract,
    solve_newton, subsolution_barrier, BarrierReport, ConvergenceReport, RegularizedProblem,
    SolverResult, StageRecord,
};
pub use geometry::{
    adm_mass, af_decay_check, build_glued_metric, make_preset, scalar_curvature, sphere_geometry,
    AFDecayReport, GluedMetricSpec, MetricConfig, RadialMetric, SphereGeometry,
};
