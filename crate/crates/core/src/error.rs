use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid streamline: {0}")]
    InvalidStreamline(String),
    #[error("tractogram contains no streamlines")]
    EmptyTractogram,
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("invalid voxel grid: {0}")]
    InvalidGrid(String),
    #[error("affine not invertible")]
    SingularAffine,
    #[error("voxel {0:?} is not part of the mask")]
    VoxelOutOfMask([usize; 3]),
    #[error("voxel {voxel:?} lies outside grid shape {shape:?}")]
    VoxelOutOfShape { voxel: [usize; 3], shape: [usize; 3] },
    #[error("ROI mask contains no voxels")]
    EmptyRoi,
    #[error("ROI set contains no masks")]
    EmptyRoiSet,

    #[error("cost matrix has no entries")]
    EmptyMatrix,
    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{rows}x{cols} matrix is too large for the brute-force oracle (limit 9 columns)")]
    TooLargeForOracle { rows: usize, cols: usize },

    #[error("voxel sets live on different grids")]
    GridMismatch,
    #[error("Dice coefficient undefined: both voxel sets are empty")]
    BothEmpty,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("bad magic {0:?}, expected \"BSEG\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("file truncated")]
    TruncatedFile,
    #[error("corrupt count: {0}")]
    CorruptCount(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate streamline id {0}")]
    DuplicateId(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
