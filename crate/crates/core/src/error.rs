use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "wavelength {lambda_um} um is outside the validity window [{lo}, {hi}] um of {material}"
    )]
    WavelengthOutOfWindow {
        material: String,
        lambda_um: f64,
        lo: f64,
        hi: f64,
    },
    #[error("material {0} is isotropic; an extraordinary index was requested")]
    NotUniaxial(String),
    #[error("unknown material {0}")]
    UnknownMaterial(String),
    #[error("invalid material entry {name}: {reason}")]
    InvalidMaterial { name: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no phase-matching solution on [0, 90] deg: {0}")]
    NoPhaseMatching(String),
    #[error("unphysical emission angle: {0}")]
    UnphysicalAngle(String),
    #[error("rejection sampling exceeded {0} iterations for one event")]
    RejectionCap(usize),
    #[error("total internal reflection")]
    TotalInternalReflection,
    #[error("ray missed surface: {0}")]
    Miss(String),
    #[error("zero-length surface normal")]
    ZeroNormal,
    #[error("mean overlap magnitude {0} exceeds 1")]
    OverlapOutOfRange(f64),
    #[error("too few accepted events: {0}")]
    TooFewEvents(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Physics,
    Io,
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Config(_)
            | Error::Json(_)
            | Error::Toml(_)
            | Error::UnknownMaterial(_)
            | Error::InvalidMaterial { .. }
            | Error::InvalidArgument(_) => ErrorClass::Config,
            _ => ErrorClass::Physics,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Physics => 3,
            ErrorClass::Io => 4,
        }
    }
}
