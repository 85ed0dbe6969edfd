use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point has dimension {found}, space expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point has a non-finite coordinate")]
    NonFinite,

    #[error("`{op}` is not defined on a {kind} space")]
    WrongSpaceKind { op: &'static str, kind: String },

    #[error("side lengths ({d_xy}, {d_yz}, {d_zx}) violate the triangle inequality")]
    TriangleInequality { d_xy: f64, d_yz: f64, d_zx: f64 },

    #[error("ball sampler exceeded {attempts} rejections at radius {radius}")]
    RejectionCapExceeded { attempts: usize, radius: f64 },

    #[error("ball of radius {radius} contains no admissible point")]
    EmptyBall { radius: f64 },

    #[error("point at distance {distance} from the base lies outside the chart of radius {radius}")]
    ChartDomain { distance: f64, radius: f64 },

    #[error("no tangent reference for a {0} space")]
    NoTangentReference(String),

    #[error("need at least {needed} usable points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("every pair has zero source distance")]
    DegeneratePairs,

    #[error("map is undefined on support point {index}")]
    UndefinedMap { index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
