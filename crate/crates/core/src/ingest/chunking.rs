use std::ops::Range;

use serde::{Deserialize, Serialize};

pub const DEFAULT_CHUNK_SIZE: usize = 512;
pub const DEFAULT_OVERLAP: usize = 64;

/// Character-based chunking parameters; `overlap < chunk_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawChunkingConfig")]
pub struct ChunkingConfig {
    chunk_size: usize,
    overlap: usize,
}

#[derive(Deserialize)]
struct RawChunkingConfig {
    chunk_size: usize,
    overlap: usize,
}

impl TryFrom<RawChunkingConfig> for ChunkingConfig {
    type Error = InvalidChunking;

    fn try_from(raw: RawChunkingConfig) -> Result<Self, Self::Error> {
        ChunkingConfig::new(raw.chunk_size, raw.overlap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid chunking config: chunk_size {chunk_size}, overlap {overlap} (need 0 <= overlap < chunk_size)")]
pub struct InvalidChunking {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl ChunkingConfig {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, InvalidChunking> {
        if chunk_size == 0 || overlap >= chunk_size {
            return Err(InvalidChunking { chunk_size, overlap });
        }
        Ok(ChunkingConfig { chunk_size, overlap })
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig {
            chunk_size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

/// Character ranges of each segment: windows of `chunk_size` characters
/// advancing by `chunk_size - overlap`, the last one possibly shorter.
pub fn chunk_spans(char_count: usize, cfg: &ChunkingConfig) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    if char_count == 0 {
        return spans;
    }
    let step = cfg.chunk_size - cfg.overlap;
    let mut start = 0;
    loop {
        let end = (start + cfg.chunk_size).min(char_count);
        spans.push(start..end);
        if end == char_count {
            return spans;
        }
        start += step;
    }
}

/// Split `text` into overlapping segments counted in Unicode scalar values.
pub fn chunk_text(text: &str, cfg: &ChunkingConfig) -> Vec<String> {
    let offsets: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
    let byte_at = |c: usize| offsets.get(c).copied().unwrap_or(text.len());
    chunk_spans(offsets.len(), cfg)
        .into_iter()
        .map(|span| text[byte_at(span.start)..byte_at(span.end)].to_string())
        .collect()
}
