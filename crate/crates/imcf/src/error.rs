//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("invalid metric data: {0}")]
    InvalidMetric(String),

    #[error("coordinate {s} outside metric domain [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },

    #[error("metric failed the asymptotic-flatness decay check: {0}")]
    NotAsymptoticallyFlat(String),

    #[error("mass extrapolation did not converge (tail spread {spread:.3e})")]
    ExtrapolationDiverged { spread: f64 },

    #[error("domain too short for the decay check: needs s_max >= 4*r_min, got r_min={r_min}, s_max={s_max}")]
    DomainTooShort { r_min: f64, s_max: f64 },

    #[error("glued transition band [{lo}, {hi}] is outside the inner metric domain")]
    TransitionOutsideDomain { lo: f64, hi: f64 },

    #[error("flow undefined: mean curvature {h:.3e} < 0 at s = {s}")]
    FlowUndefined { s: f64, h: f64 },

    #[error("area profile decreases toward the domain end; no minimizing hull in range (non-AF input)")]
    UnboundedAreaTail,

    #[error("volume {v} outside the sampled range [0, {max}]")]
    VolumeOutOfRange { v: f64, max: f64 },

    #[error("level {t} outside the solved range [0, {max}]")]
    LevelOutOfRange { t: f64, max: f64 },

    #[error("volume {v} is not attainable by the candidate region class")]
    UnattainableVolume { v: f64 },

    #[error("regularized problem is unsolvable: eps * volume = {lhs:.3e} exceeds the boundary area budget {rhs:.3e} (shrink L or eps)")]
    EpsilonTooLarge { lhs: f64, rhs: f64 },

    #[error("singular linearization at grid point {index}")]
    SingularLinearization { index: usize },

    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("stage {stage} of the continuation schedule failed to converge (residual {residual:.3e})")]
    StageDidNotConverge { stage: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
