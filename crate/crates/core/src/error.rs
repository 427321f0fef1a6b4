use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },
    #[error("input {height}x{width} is smaller than the {k}x{k} kernel")]
    InputTooSmall { height: usize, width: usize, k: usize },
    #[error("{what} ({value}) is not divisible by {divisor}")]
    NotDivisible {
        what: &'static str,
        value: usize,
        divisor: usize,
    },
    #[error("kernel size must be odd and >= 1, got {0}")]
    EvenKernel(usize),

    #[error("backward called without a forward cache")]
    MissingCache,
    #[error("forward cache does not match the current model parameters")]
    StaleCache,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("training diverged at epoch {epoch}: non-finite {what} loss")]
    Diverged { epoch: usize, what: &'static str },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic in model file")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file is truncated")]
    Truncated,

    #[error("bad netpbm magic (expected P5 or P6)")]
    PnmBadMagic,
    #[error("unsupported netpbm maxval {0} (only 255 is supported)")]
    PnmUnsupportedMaxval(u32),
    #[error("malformed netpbm header: {0}")]
    PnmHeader(String),
    #[error("netpbm raster truncated: expected {expected} bytes, found {found}")]
    PnmTruncated { expected: usize, found: usize },

    #[error("image {height}x{width} is smaller than the scale factor {r}")]
    ImageTooSmall { height: usize, width: usize, r: usize },
    #[error("low-resolution image {height}x{width} is smaller than the {patch}x{patch} patch")]
    PatchTooLarge {
        height: usize,
        width: usize,
        patch: usize,
    },
    #[error("no training patches in {}", .0.display())]
    NoTrainingPatches(PathBuf),
    #[error("no images found in {}", .0.display())]
    EmptyDirectory(PathBuf),

    #[error("shave {shave} is too large for a {height}x{width} plane")]
    OverShave {
        shave: usize,
        height: usize,
        width: usize,
    },
    #[error("paired t-test needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("paired t-test is undefined for zero-variance differences")]
    ZeroVariance,
    #[error("scale mismatch: model upscales by {model}, requested {requested}")]
    ScaleMismatch { model: usize, requested: usize },
    #[error("{0}")]
    MissingInput(String),

    #[error("malformed y4m header: {0}")]
    Y4mHeader(String),
    #[error("unsupported y4m chroma mode {0} (only 4:2:0 is supported)")]
    Y4mUnsupportedChroma(String),
    #[error("malformed y4m frame marker")]
    Y4mBadFrameMarker,
    #[error("y4m frame truncated: expected {expected} bytes, found {found}")]
    Y4mTruncatedFrame { expected: usize, found: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Process exit status for each error class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitClass {
    Config = 2,
    Data = 3,
    Numeric = 4,
    Internal = 5,
}

impl Error {
    pub fn class(&self) -> ExitClass {
        use Error::*;
        match self {
            Config(_) | InvalidConfig(_) | ScaleMismatch { .. } | MissingInput(_) | OverShave { .. } => {
                ExitClass::Config
            }
            BadMagic
            | UnsupportedVersion(_)
            | Truncated
            | InvalidModel(_)
            | PnmBadMagic
            | PnmUnsupportedMaxval(_)
            | PnmHeader(_)
            | PnmTruncated { .. }
            | ImageTooSmall { .. }
            | PatchTooLarge { .. }
            | NoTrainingPatches(_)
            | EmptyDirectory(_)
            | EmptyDataset
            | InputTooSmall { .. }
            | NotDivisible { .. }
            | Y4mHeader(_)
            | Y4mUnsupportedChroma(_)
            | Y4mBadFrameMarker
            | Y4mTruncatedFrame { .. }
            | File { .. }
            | Io(_) => ExitClass::Data,
            Diverged { .. } | TooFewSamples(_) | ZeroVariance => ExitClass::Numeric,
            InvalidShape(_) | ChannelMismatch { .. } | ShapeMismatch { .. } | EvenKernel(_) | MissingCache | StaleCache => {
                ExitClass::Internal
            }
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.class() as u8
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
