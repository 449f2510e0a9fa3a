use thiserror::Error;

/// Errors produced by the measurement and statistics primitives.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("raster too small for a 3x3 stencil: {width}x{height}")]
    RasterTooSmall { width: usize, height: usize },

    #[error("bad blur kernel: size {size} (must be odd, >= 3), sigma {sigma} (must be > 0)")]
    BadKernel { size: usize, sigma: f64 },

    #[error("no pixel above the field-of-view threshold {threshold}")]
    EmptyFov { threshold: f64 },

    #[error("empty mask: {context}")]
    EmptyMask { context: &'static str },

    #[error("degenerate geometry: {context}")]
    DegenerateGeometry { context: String },

    #[error("bundle is not aligned: |fovea.y - od.y| = {offset:.3} px (must be < 0.5)")]
    NotAligned { offset: f64 },

    #[error("not a 1-px skeleton: solid 2x2 block at ({x}, {y})")]
    NotSkeleton { x: usize, y: usize },

    #[error("too few samples: group sizes {n_a} and {n_b} (need >= 2 each)")]
    TooFewSamples { n_a: usize, n_b: usize },

    #[error("zero pooled variance")]
    ZeroVariance,

    #[error("p-value {0} outside [0, 1]")]
    BadPValue(f64),

    #[error("degenerate contingency table: {context}")]
    DegenerateTable { context: String },

    #[error("need both classes present")]
    OneClassOnly,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("infeasible synthesis parameters: {context}")]
    InfeasibleParams { context: String },

    #[error("measuring {field}: {source}")]
    Metric {
        field: &'static str,
        #[source]
        source: Box<CoreError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl CoreError {
    /// Attach the measurement field name an error occurred under.
    pub fn for_field(self, field: &'static str) -> CoreError {
        CoreError::Metric {
            field,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
