use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at layer {layer}: expected {expected}, got {actual}")]
    Dimension { layer: usize, expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("class index {index} out of range for {classes} classes")]
    ClassIndex { index: usize, classes: usize },

    #[error("non-smooth surrogate required: {0}")]
    NonSmooth(&'static str),

    #[error("hessian guard exceeded: input dimension {dim} > {max}")]
    HessianGuard { dim: usize, max: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Some runs of a campaign failed; the artifacts that were written are
    /// incomplete.
    #[error("partial result: {0}")]
    Partial(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    #[error("undefined correlation: input has zero variance")]
    ZeroVariance,

    #[error("vanishing gradient: norm {norm:e} below threshold")]
    VanishingGradient { norm: f64 },

    #[error("matrix is not symmetric: max asymmetry {0:e}")]
    Asymmetric(f64),

    #[error(
        "non-finite loss at iteration {iteration} (beta {beta}): \
         map term {map_term}, output term {output_term}, image term {image_term}"
    )]
    NonFiniteLoss { iteration: usize, beta: f64, map_term: f64, output_term: f64, image_term: f64 },

    #[error("parse error at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
