use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spheres {i} and {j} intersect")]
    Overlap { i: usize, j: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("coefficient layout mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error(
        "mixed-sign dielectric constants: the square root of the scaled Dirichlet-to-Neumann map \
         does not exist unless every sphere lies on the same side of the background constant"
    )]
    MixedSign,

    #[error(
        "negative curvature p'Ap = {curvature:e} at iteration {iteration}: the symmetrised operator \
         is positive definite only when all sphere permittivities lie on the same side of the background"
    )]
    NotPositiveDefinite { curvature: f64, iteration: usize },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("malformed solution file: {0}")]
    Format(String),

    #[error("relative error undefined: reference normaliser is zero")]
    ZeroNormaliser,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
