//! Binary index file.
//!
//! ```text
//! header (64 bytes, little-endian)
//!   magic      [u8; 4]   "CPVX"
//!   version    u32       1
//!   dimension  u32       0 when not yet fixed
//!   count      u64       number of chunk records
//!   last_id    u64
//!   checksum   [u8; 32]  SHA-256 of the record section
//!   reserved   [u8; 4]
//! records, `count` times
//!   chunk_id   u64
//!   raw_norm   f64
//!   source_id  u32 length + UTF-8
//!   text       u32 length + UTF-8
//!   metadata   u32 entry count, then per entry: key, value (u32 length + UTF-8 each)
//!   embedding  `dimension` × f32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::index::{Chunk, ChunkId, ChunkMetadata, VectorIndex};
use super::VectorError;

const MAGIC: &[u8; 4] = b"CPVX";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 64;

const KEY_TOPIC: &str = "topic";
const KEY_DIFFICULTY: &str = "difficulty";
const KEY_KIND: &str = "kind";

impl VectorIndex {
    /// Writes the index to `path` via a temporary file and rename, so a
    /// reader never sees a half-written file.
    pub fn persist(&self, path: impl AsRef<Path>) -> Result<(), VectorError> {
        let path = path.as_ref();
        let bytes = self.to_bytes();
        let tmp = path.with_extension("tmp");
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(&bytes)?;
            file.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<VectorIndex, VectorError> {
        let bytes = fs::read(path)?;
        VectorIndex::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::new();
        for chunk in self.chunks() {
            body.extend_from_slice(&chunk.id.0.to_le_bytes());
            body.extend_from_slice(&chunk.raw_norm.to_le_bytes());
            put_str(&mut body, &chunk.source_id);
            put_str(&mut body, &chunk.text);
            let meta = &chunk.metadata;
            let entries: Vec<(&str, &str)> = [
                (KEY_TOPIC, meta.topic.as_str()),
                (KEY_DIFFICULTY, meta.difficulty.as_str()),
                (KEY_KIND, meta.kind.as_str()),
            ]
            .into_iter()
            .chain(meta.attributes.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .collect();
            body.extend_from_slice(&(entries.len() as u32).to_le_bytes());
            for (k, v) in entries {
                put_str(&mut body, k);
                put_str(&mut body, v);
            }
            for v in chunk.unit_vector() {
                body.extend_from_slice(&v.to_le_bytes());
            }
        }

        let mut out = Vec::with_capacity(HEADER_LEN + body.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dimension().unwrap_or(0) as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.last_id().to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&body));
        out.extend_from_slice(&[0u8; 4]);
        debug_assert_eq!(out.len(), HEADER_LEN);
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<VectorIndex, VectorError> {
        if bytes.len() < HEADER_LEN {
            return Err(corrupt("file shorter than header"));
        }
        let mut header = Reader::new(&bytes[..HEADER_LEN]);
        if header.take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = header.u32()?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let dimension = header.u32()? as usize;
        let count = header.u64()?;
        let last_id = header.u64()?;
        let checksum = header.take(32)?;

        let body = &bytes[HEADER_LEN..];
        if Sha256::digest(body).as_slice() != checksum {
            return Err(corrupt("checksum mismatch"));
        }

        let mut r = Reader::new(body);
        let mut chunks = Vec::with_capacity(count.min(1 << 20) as usize);
        let mut prev = 0u64;
        for _ in 0..count {
            let id = r.u64()?;
            if id <= prev && !chunks.is_empty() || id > last_id {
                return Err(corrupt(format!("chunk id {id} out of order")));
            }
            prev = id;
            let raw_norm = r.f64()?;
            let source_id = r.string()?;
            let text = r.string()?;
            let entries = r.u32()?;
            let mut topic = None;
            let mut difficulty = None;
            let mut kind = None;
            let mut attributes = std::collections::BTreeMap::new();
            for _ in 0..entries {
                let key = r.string()?;
                let value = r.string()?;
                match key.as_str() {
                    KEY_TOPIC => topic = Some(value),
                    KEY_DIFFICULTY => {
                        difficulty = Some(value.parse().map_err(|e| corrupt(format!("{e}")))?)
                    }
                    KEY_KIND => kind = Some(value.parse().map_err(|e| corrupt(format!("{e}")))?),
                    _ => {
                        attributes.insert(key, value);
                    }
                }
            }
            let (Some(topic), Some(difficulty), Some(kind)) = (topic, difficulty, kind) else {
                return Err(corrupt(format!("chunk {id} lacks required metadata")));
            };
            let mut unit = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                unit.push(r.f32()?);
            }
            chunks.push(Chunk {
                id: ChunkId(id),
                source_id,
                text,
                metadata: ChunkMetadata {
                    topic,
                    difficulty,
                    kind,
                    attributes,
                },
                raw_norm,
                unit,
            });
        }
        if !r.is_empty() {
            return Err(corrupt("trailing bytes after last record"));
        }
        if dimension == 0 && !chunks.is_empty() {
            return Err(corrupt("records present but dimension is zero"));
        }
        Ok(VectorIndex::from_parts(
            (dimension > 0).then_some(dimension),
            last_id,
            chunks,
        ))
    }
}

fn corrupt(reason: impl Into<String>) -> VectorError {
    VectorError::CorruptIndex(reason.into())
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], VectorError> {
        if self.buf.len() < n {
            return Err(corrupt("unexpected end of file"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], VectorError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, VectorError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, VectorError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32, VectorError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, VectorError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, VectorError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt("invalid UTF-8 in record"))
    }
}
