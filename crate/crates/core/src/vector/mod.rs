//! Exact cosine-similarity vector index.

mod embedding;
mod index;
mod persist;
mod scan;

pub use embedding::{cosine_similarity, Embedding};
pub use index::{
    Chunk, ChunkId, ChunkMetadata, DuplicatePair, MetadataFilter, NewChunk, SearchHit, VectorIndex,
};
pub use scan::ScanMode;

#[derive(Debug, thiserror::Error)]
pub enum VectorError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector has zero norm")]
    ZeroNormVector,
    #[error("vector component {index} is not finite")]
    NonFinite { index: usize },
    #[error("vector has no components")]
    EmptyVector,
    #[error("chunk text is empty")]
    EmptyText,
    #[error("chunk id {0} already present")]
    DuplicateId(ChunkId),
    #[error("chunk id {id} is not greater than the last id {last}")]
    NonMonotonicId { id: ChunkId, last: ChunkId },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("index I/O failed: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("corrupt index file: {0}")]
    CorruptIndex(String),
}
