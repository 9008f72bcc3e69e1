use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::embedding::clamp_score;
use super::scan::{dot, dot_stored, Candidate, ScanMode, TopK};
use super::{Embedding, VectorError};
use crate::types::{normalize_topic, ChunkKind, Difficulty};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(pub u64);

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkMetadata {
    pub topic: String,
    pub difficulty: Difficulty,
    pub kind: ChunkKind,
    /// Free-form extras such as the intent tag or question id.
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl ChunkMetadata {
    pub fn new(topic: &str, difficulty: Difficulty, kind: ChunkKind) -> Self {
        ChunkMetadata {
            topic: normalize_topic(topic),
            difficulty,
            kind,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }
}

/// A chunk as handed to [`VectorIndex::insert`].
#[derive(Debug, Clone)]
pub struct NewChunk {
    /// Explicit id; must exceed every id already in the index.
    pub id: Option<ChunkId>,
    pub source_id: String,
    pub text: String,
    pub metadata: ChunkMetadata,
    pub embedding: Embedding,
}

impl NewChunk {
    pub fn new(
        source_id: impl Into<String>,
        text: impl Into<String>,
        metadata: ChunkMetadata,
        embedding: Embedding,
    ) -> Self {
        NewChunk {
            id: None,
            source_id: source_id.into(),
            text: text.into(),
            metadata,
            embedding,
        }
    }
}

/// A stored chunk. The embedding is kept L2-normalized in `f32`; the norm of
/// the vector as inserted is kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub id: ChunkId,
    pub source_id: String,
    pub text: String,
    pub metadata: ChunkMetadata,
    pub raw_norm: f64,
    pub(crate) unit: Vec<f32>,
}

impl Chunk {
    pub fn unit_vector(&self) -> &[f32] {
        &self.unit
    }

    pub fn is_zero_norm(&self) -> bool {
        self.raw_norm == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit {
    pub chunk_id: ChunkId,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuplicatePair {
    pub first: ChunkId,
    pub second: ChunkId,
    pub score: f64,
}

/// Conjunctive filter; an empty filter matches every chunk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetadataFilter {
    pub topic: Option<String>,
    pub difficulty: Option<Difficulty>,
    pub kind: Option<ChunkKind>,
}

impl MetadataFilter {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn topic(mut self, topic: &str) -> Self {
        self.topic = Some(normalize_topic(topic));
        self
    }

    pub fn difficulty(mut self, difficulty: Difficulty) -> Self {
        self.difficulty = Some(difficulty);
        self
    }

    pub fn kind(mut self, kind: ChunkKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn matches(&self, metadata: &ChunkMetadata) -> bool {
        self.topic
            .as_deref()
            .is_none_or(|t| normalize_topic(t) == metadata.topic)
            && self.difficulty.is_none_or(|d| d == metadata.difficulty)
            && self.kind.is_none_or(|k| k == metadata.kind)
    }
}

/// Exact cosine-similarity index over embedded chunks.
///
/// Ids are assigned in strictly increasing order and chunks are kept sorted
/// by id. Search is an exhaustive scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorIndex {
    dimension: Option<usize>,
    chunks: Vec<Chunk>,
    last_id: u64,
    zero_norm: usize,
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dimension(dimension: usize) -> Self {
        VectorIndex {
            dimension: (dimension > 0).then_some(dimension),
            ..Self::default()
        }
    }

    /// `None` until the first insert fixes it (unless configured up front).
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Number of stored chunks whose embedding was the zero vector. These
    /// are never returned by searches.
    pub fn zero_norm_count(&self) -> usize {
        self.zero_norm
    }

    pub fn last_id(&self) -> u64 {
        self.last_id
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn get(&self, id: ChunkId) -> Option<&Chunk> {
        self.chunks
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.chunks[i])
    }

    pub fn insert(&mut self, chunk: NewChunk) -> Result<ChunkId, VectorError> {
        let mut ids = self.insert_batch(vec![chunk])?;
        Ok(ids.remove(0))
    }

    /// Inserts every chunk or none of them.
    pub fn insert_batch(&mut self, chunks: Vec<NewChunk>) -> Result<Vec<ChunkId>, VectorError> {
        let mut dimension = self.dimension;
        let mut last = self.last_id;
        let mut planned = Vec::with_capacity(chunks.len());
        for chunk in &chunks {
            if chunk.text.trim().is_empty() {
                return Err(VectorError::EmptyText);
            }
            let found = chunk.embedding.dimension();
            match dimension {
                Some(expected) if expected != found => {
                    return Err(VectorError::DimensionMismatch { expected, found })
                }
                _ => dimension = Some(found),
            }
            let id = match chunk.id {
                Some(ChunkId(id)) => {
                    if self.get(ChunkId(id)).is_some() || planned.contains(&id) {
                        return Err(VectorError::DuplicateId(ChunkId(id)));
                    }
                    if id <= last {
                        return Err(VectorError::NonMonotonicId {
                            id: ChunkId(id),
                            last: ChunkId(last),
                        });
                    }
                    id
                }
                None => last + 1,
            };
            last = id;
            planned.push(id);
        }

        self.dimension = dimension;
        self.last_id = last;
        let mut assigned = Vec::with_capacity(chunks.len());
        for (chunk, id) in chunks.into_iter().zip(planned) {
            let raw_norm = chunk.embedding.norm();
            let unit: Vec<f32> = if raw_norm == 0.0 {
                self.zero_norm += 1;
                log::warn!(
                    "chunk {id} from '{}' has a zero-norm embedding; it will never match a query",
                    chunk.source_id
                );
                vec![0.0; chunk.embedding.dimension()]
            } else {
                chunk
                    .embedding
                    .values()
                    .iter()
                    .map(|v| (v / raw_norm) as f32)
                    .collect()
            };
            self.chunks.push(Chunk {
                id: ChunkId(id),
                source_id: chunk.source_id,
                text: chunk.text,
                metadata: chunk.metadata,
                raw_norm,
                unit,
            });
            assigned.push(ChunkId(id));
        }
        Ok(assigned)
    }

    pub fn knn_search(
        &self,
        query: &Embedding,
        k: usize,
        filter: &MetadataFilter,
    ) -> Result<Vec<SearchHit>, VectorError> {
        self.knn_search_with(ScanMode::default(), query, k, filter)
    }

    /// Top-`k` chunks matching `filter` by cosine similarity to `query`,
    /// best first; ties go to the lower chunk id.
    pub fn knn_search_with(
        &self,
        mode: ScanMode,
        query: &Embedding,
        k: usize,
        filter: &MetadataFilter,
    ) -> Result<Vec<SearchHit>, VectorError> {
        if k == 0 {
            return Err(VectorError::InvalidK);
        }
        let unit_query = query.normalized().ok_or(VectorError::ZeroNormVector)?;
        let Some(expected) = self.dimension else {
            return Ok(Vec::new());
        };
        if expected != query.dimension() {
            return Err(VectorError::DimensionMismatch {
                expected,
                found: query.dimension(),
            });
        }
        let q = unit_query.values();
        let score = |chunk: &Chunk| -> Option<Candidate> {
            (!chunk.is_zero_norm() && filter.matches(&chunk.metadata)).then(|| Candidate {
                score: clamp_score(dot(q, &chunk.unit)),
                id: chunk.id.0,
            })
        };

        let top = match mode {
            ScanMode::Sequential => {
                let mut top = TopK::new(k);
                self.chunks.iter().filter_map(score).for_each(|c| top.push(c));
                top
            }
            #[cfg(feature = "parallel")]
            ScanMode::Parallel => self
                .chunks
                .par_iter()
                .filter_map(score)
                .fold(
                    || TopK::new(k),
                    |mut top, c| {
                        top.push(c);
                        top
                    },
                )
                .reduce(|| TopK::new(k), TopK::merge),
        };

        Ok(top
            .into_sorted()
            .into_iter()
            .enumerate()
            .map(|(i, c)| SearchHit {
                chunk_id: ChunkId(c.id),
                score: c.score,
                rank: i + 1,
            })
            .collect())
    }

    pub fn find_duplicates(&self, threshold: f64) -> Result<Vec<DuplicatePair>, VectorError> {
        self.find_duplicates_with(ScanMode::default(), threshold)
    }

    /// Every unordered pair of chunks whose cosine similarity is at least
    /// `threshold`, reported once as `(lower id, higher id)` and sorted.
    pub fn find_duplicates_with(
        &self,
        mode: ScanMode,
        threshold: f64,
    ) -> Result<Vec<DuplicatePair>, VectorError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(VectorError::InvalidThreshold(threshold));
        }
        let chunks = &self.chunks;
        let pairs_from = |i: usize| -> Vec<DuplicatePair> {
            let a = &chunks[i];
            if a.is_zero_norm() {
                return Vec::new();
            }
            chunks[i + 1..]
                .iter()
                .filter(|b| !b.is_zero_norm())
                .filter_map(|b| {
                    let score = clamp_score(dot_stored(&a.unit, &b.unit));
                    (score >= threshold).then_some(DuplicatePair {
                        first: a.id,
                        second: b.id,
                        score,
                    })
                })
                .collect()
        };
        // Chunks are sorted by id, so iterating `i` in order yields pairs
        // already sorted by (first, second).
        let pairs = match mode {
            ScanMode::Sequential => (0..chunks.len()).flat_map(pairs_from).collect(),
            #[cfg(feature = "parallel")]
            ScanMode::Parallel => (0..chunks.len())
                .into_par_iter()
                .flat_map_iter(pairs_from)
                .collect(),
        };
        Ok(pairs)
    }

    pub(crate) fn from_parts(
        dimension: Option<usize>,
        last_id: u64,
        chunks: Vec<Chunk>,
    ) -> Self {
        let zero_norm = chunks.iter().filter(|c| c.is_zero_norm()).count();
        VectorIndex {
            dimension,
            chunks,
            last_id,
            zero_norm,
        }
    }
}
