use std::fmt;

use thiserror::Error;

/// Pipeline stage that produced an error, used to tag failures surfaced by
/// [`crate::pipeline::run_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Gradient,
    Pupil,
    Ellipse,
    Eyelids,
    Normalize,
    Encode,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Load => "load",
            Stage::Gradient => "gradient",
            Stage::Pupil => "pupil",
            Stage::Ellipse => "ellipse",
            Stage::Eyelids => "eyelids",
            Stage::Normalize => "normalize",
            Stage::Encode => "encode",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("image data length {actual} does not match {width}x{height}")]
    DataLength {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error("image too small for a 3x3 gradient: {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("no populated histogram bin in the dark band [0, {limit}]")]
    NoDarkPeak { limit: u8 },
    #[error("pupil mask is empty")]
    EmptyPupil,

    #[error("no edge points inside the iris search annulus")]
    EmptyAnnulus,
    #[error("no ellipse reached the accumulator threshold ({votes} < {threshold})")]
    NoEllipseFound { votes: u32, threshold: u32 },
    #[error("no parabola reached the accumulator threshold ({votes} < {threshold})")]
    NoParabolaFound { votes: u32, threshold: u32 },
    #[error("parabola axis is horizontal")]
    DegenerateAxis,
    #[error("accumulator peak {votes} below threshold {threshold}")]
    NotFound { votes: u32, threshold: u32 },

    #[error("iris geometry invalid: {0}")]
    GeometryInvalid(String),

    #[error("only {valid} of {total} window cells are unmasked")]
    InsufficientSupport { valid: usize, total: usize },
    #[error("strip occlusion {fraction:.3} exceeds gate {gate:.3}")]
    TooOccluded { fraction: f64, gate: f64 },
    #[error("code layout tiles {0} bits, expected 2048")]
    LayoutMismatch(usize),
    #[error("malformed iris code: {0}")]
    CodeFormat(String),

    #[error("only {0} jointly valid bits, at least 256 required")]
    InsufficientOverlap(usize),
    #[error("eyelid parabolas do not intersect")]
    NoIntersection,
    #[error("eyelid parabolas touch at a single point")]
    TangentLids,
    #[error("corner coincides with the rotation center")]
    CoincidentPoints,

    #[error("eye spec invalid: {0}")]
    SpecInvalid(String),

    #[error("{0}")]
    Config(String),
    #[error("need at least 30 scores per class, got {genuine} genuine / {impostor} impostor")]
    TooFewScores { genuine: usize, impostor: usize },
    #[error("genuine and impostor scores do not separate")]
    NoSeparation,
    #[error("subject {0:?} is not enrolled")]
    SubjectUnknown(String),
    #[error("capture {subject}/{capture} is already enrolled")]
    AlreadyEnrolled { subject: String, capture: String },
    #[error("template store corrupt: {0}")]
    StoreCorrupt(String),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips any stage tag and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// The stage tag, if this error came out of the full pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
