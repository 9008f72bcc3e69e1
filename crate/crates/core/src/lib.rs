pub mod ingest;
pub mod learning;
pub mod protocol;
pub mod provider;
pub mod rag;
pub mod storage;
pub mod types;
pub mod vector;

pub use ingest::Corpus;
pub use types::{ChunkKind, Difficulty};
