//! Every numerical threshold used by the library, in one place.

/// ‖QᵀQ − I‖_F for a frame.
pub const FRAME_ORTHONORMAL: f64 = 1e-12;
/// ‖P² − P‖_F and |tr P − k| for a projector.
pub const PROJECTOR: f64 = 1e-10;
/// Relative singular value cut-off defining numerical rank.
pub const SVD_RANK: f64 = 1e-12;
/// Relative pivot cut-off below which QR reports rank deficiency.
pub const QR_RANK: f64 = 1e-12;
/// Relative eigen-residual ‖Mv − λv‖ / ‖M‖_F.
pub const EIG_RESIDUAL: f64 = 1e-9;

/// Feasibility residual of a manifold point.
pub const FEASIBILITY: f64 = 1e-10;
/// Tangency residual, relative to 1 + ‖v‖.
pub const TANGENCY: f64 = 1e-10;
/// Looser tangency check applied to caller-supplied arguments.
pub const TANGENCY_INPUT: f64 = 1e-8;

/// range(P) ⊆ T_x M for a bundle state.
pub const BUNDLE_RANGE: f64 = 1e-9;
/// ‖VVᵀ − P‖_F for a cached frame.
pub const BUNDLE_FRAME: f64 = 1e-10;
/// Bundle tangency ‖Δ − (Δ_x + ÎI(δ, P))‖_F.
pub const BUNDLE_TANGENT: f64 = 1e-8;

/// Level-set Newton projection: residual target and iteration cap.
pub const LEVEL_SET_NEWTON: f64 = 1e-12;
pub const LEVEL_SET_MAX_ITERS: usize = 50;
/// Smallest singular value of ∇c relative to its largest.
pub const LEVEL_SET_REGULARITY: f64 = 1e-10;

/// Eigenvalues with |λ| < SPECTRUM · max|λ| are reported as degenerate.
pub const SPECTRUM: f64 = 1e-6;
/// Default Frobenius radius for matching a terminal to a catalog projector.
pub const CATALOG_MATCH: f64 = 1e-4;
/// Two configuration sums closer than this make the catalog ambiguous.
pub const CATALOG_SUMS: f64 = 1e-12;

/// Largest ambient dimension for which projector operators are materialized.
pub const DENSE_AMBIENT_MAX: usize = 1024;
