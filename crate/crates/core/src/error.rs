use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are grouped loosely by the stage that raises them; pipeline
/// failures wrap the original error in [`Error::Stage`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid representation: {0}")]
    RepresentationInvalid(String),

    #[error("incompatible representations: {0}")]
    IncompatibleRepresentation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("iteration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("target rotation number unreachable: {0}")]
    TargetUnreachable(String),

    #[error("family violates the twist condition: {0}")]
    NotATwistFamily(String),

    #[error("system may already be mode-locked (delta = {delta:e})")]
    PossiblyModeLocked { delta: f64 },

    #[error("composition drift {drift:e} exceeds tolerance")]
    CompositionDrift { drift: f64 },

    #[error("surgery boundary mismatch {mismatch:e}")]
    BoundaryMismatch { mismatch: f64 },

    #[error("surgery interval too wide: {width} > 1/{q}")]
    IntervalTooWide { width: f64, q: u64 },

    #[error("phase one incomplete: fibre {theta} still has identity fibre map")]
    Phase1Incomplete { theta: f64 },

    #[error("triangulation too coarse: max diameter {diam} >= bound {bound}")]
    GridTooCoarse { diam: f64, bound: f64 },

    #[error("could not separate vertex fibres after {attempts} jitter attempts")]
    SeedExhausted { attempts: usize },

    #[error("perturbation radius infeasible: {0}")]
    DeltaInfeasible(String),

    #[error("degenerate geometry: {0}")]
    GeometryDegenerate(String),

    #[error("genericity failed: {0}")]
    GenericityFailed(String),

    #[error("inconsistent zero-set arrangement: {0}")]
    ArrangementInconsistent(String),

    #[error("fibre at theta = {theta} carries a critical vertex")]
    CriticalFibre { theta: f64 },

    #[error("continuation diverged after {events} events")]
    ContinuationDiverged { events: usize },

    #[error("no repeated target within {limit} targets")]
    PigeonholeViolation { limit: usize },

    #[error("no further B- component on fibre {theta}")]
    FibreExhausted { theta: f64 },

    #[error("tilt too large: {0}")]
    TiltTooLarge(String),

    #[error("invalid annulus: {0}")]
    InvalidAnnulus(String),

    #[error("not certified: {family} gap {gap:e} at theta = {theta}")]
    NotCertified { family: String, gap: f64, theta: f64 },

    #[error("certification infeasible, binding constraint: {0}")]
    CertificationInfeasible(String),

    #[error("closeness precondition failed: {0}")]
    Radius(String),

    #[error("twist lost after splice: {0}")]
    TwistBroken(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
