use thiserror::Error;

/// Errors produced by tensor, state, and estimator operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis} out of range for rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },

    #[error("axis length mismatch: {left} vs {right}")]
    AxisLengthMismatch { left: usize, right: usize },

    #[error("axis {axis} referenced more than once in contraction pairs")]
    RepeatedAxis { axis: usize },

    #[error("invalid permutation {perm:?} for rank-{rank} tensor")]
    InvalidPermutation { perm: Vec<usize>, rank: usize },

    #[error("reshape size mismatch: {from} elements vs {to}")]
    ReshapeSizeMismatch { from: usize, to: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("{what} index {index} out of range [1, {max}]")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("state norm {norm:.3e} below degeneracy threshold")]
    DegenerateNorm { norm: f64 },

    #[error("accept probability {p:.3e} too small: KL divergence diverges")]
    DivergentKl { p: f64 },

    #[error("system size guard exceeded: {detail}")]
    SizeGuard { detail: String },

    #[error("Weingarten function degenerate for N={n} < t={t}")]
    DegenerateRegime { n: usize, t: usize },

    #[error("representation vanishes: partition length {len} exceeds N={n}")]
    RepresentationVanishes { len: usize, n: usize },

    #[error("unsupported moment order t={t}")]
    UnsupportedMomentOrder { t: usize },

    #[error("gradient mode does not support this operation: {detail}")]
    UnsupportedGradMode { detail: &'static str },

    #[error("cannot fit decay: {detail}")]
    FitError { detail: String },

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
