//! Namespaced key-value records plus append-only logs.
//!
//! [`FileStore`] keeps one file per record under `<root>/<namespace>/` and
//! replaces records by writing a temporary file and renaming it over the
//! old one, so a crash mid-write leaves the previous record intact. Logs
//! are newline-delimited files under `<root>/logs/`; a torn final line is
//! ignored on read.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("storage I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("stored record is not valid JSON: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("invalid storage name '{0}'")]
    InvalidName(String),
    #[error("log records must not contain newlines")]
    MultilineLogRecord,
}

pub trait Storage: Send + Sync {
    fn get(&self, namespace: &str, key: &str) -> Result<Option<Vec<u8>>, StorageError>;

    /// Atomically replaces the record.
    fn put(&self, namespace: &str, key: &str, value: &[u8]) -> Result<(), StorageError>;

    fn delete(&self, namespace: &str, key: &str) -> Result<bool, StorageError>;

    /// All keys of `namespace`, sorted.
    fn keys(&self, namespace: &str) -> Result<Vec<String>, StorageError>;

    fn append(&self, log: &str, record: &[u8]) -> Result<(), StorageError>;

    fn read_log(&self, log: &str) -> Result<Vec<Vec<u8>>, StorageError>;
}

impl dyn Storage + '_ {
    pub fn get_json<T: DeserializeOwned>(&self, namespace: &str, key: &str) -> Result<Option<T>, StorageError> {
        match self.get(namespace, key)? {
            Some(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            None => Ok(None),
        }
    }

    pub fn put_json<T: Serialize>(&self, namespace: &str, key: &str, value: &T) -> Result<(), StorageError> {
        self.put(namespace, key, &serde_json::to_vec_pretty(value)?)
    }

    pub fn append_json<T: Serialize>(&self, log: &str, value: &T) -> Result<(), StorageError> {
        self.append(log, &serde_json::to_vec(value)?)
    }
}

fn check_namespace(name: &str) -> Result<(), StorageError> {
    let ok = !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(StorageError::InvalidName(name.to_string()))
    }
}

/// Filename-safe form of a key: `[A-Za-z0-9_-]` kept, everything else `%XX`.
fn encode_key(key: &str) -> Result<String, StorageError> {
    if key.is_empty() {
        return Err(StorageError::InvalidName(key.to_string()));
    }
    let mut out = String::with_capacity(key.len());
    for b in key.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    Ok(out)
}

fn decode_key(name: &str) -> Option<String> {
    let bytes = name.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = name.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

const RECORD_EXT: &str = "rec";
const TMP_EXT: &str = "tmp";

/// Single-directory file store.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
    counter: AtomicU64,
    log_lock: Mutex<()>,
}

impl FileStore {
    /// Opens (creating if needed) the store at `root` and removes temporary
    /// files left behind by interrupted writes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if dir.is_dir() {
                for file in fs::read_dir(&dir)? {
                    let path = file?.path();
                    if path.extension().is_some_and(|e| e == TMP_EXT) {
                        let _ = fs::remove_file(&path);
                    }
                }
            }
        }
        Ok(FileStore {
            root,
            counter: AtomicU64::new(0),
            log_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_path(&self, namespace: &str, key: &str) -> Result<PathBuf, StorageError> {
        check_namespace(namespace)?;
        Ok(self
            .root
            .join(namespace)
            .join(format!("{}.{RECORD_EXT}", encode_key(key)?)))
    }

    /// First half of [`Storage::put`]: the new bytes land next to the record
    /// without replacing it.
    fn write_temp(&self, target: &Path, value: &[u8]) -> Result<PathBuf, StorageError> {
        let dir = target.parent().expect("record paths have a parent");
        fs::create_dir_all(dir)?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(
            ".{}-{}-{n}.{TMP_EXT}",
            target.file_stem().and_then(|s| s.to_str()).unwrap_or("record"),
            std::process::id()
        ));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(value)?;
        file.sync_all()?;
        Ok(tmp)
    }
}

impl Storage for FileStore {
    fn get(&self, namespace: &str, key: &str) -> Result<Option<Vec<u8>>, StorageError> {
        match fs::read(self.record_path(namespace, key)?) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn put(&self, namespace: &str, key: &str, value: &[u8]) -> Result<(), StorageError> {
        let target = self.record_path(namespace, key)?;
        let tmp = self.write_temp(&target, value)?;
        fs::rename(&tmp, &target)?;
        Ok(())
    }

    fn delete(&self, namespace: &str, key: &str) -> Result<bool, StorageError> {
        match fs::remove_file(self.record_path(namespace, key)?) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    fn keys(&self, namespace: &str) -> Result<Vec<String>, StorageError> {
        check_namespace(namespace)?;
        let dir = self.root.join(namespace);
        let entries = match fs::read_dir(&dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut keys = Vec::new();
        for entry in entries {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == RECORD_EXT) {
                if let Some(key) = path.file_stem().and_then(|s| s.to_str()).and_then(decode_key) {
                    keys.push(key);
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    fn append(&self, log: &str, record: &[u8]) -> Result<(), StorageError> {
        check_namespace(log)?;
        if record.contains(&b'\n') {
            return Err(StorageError::MultilineLogRecord);
        }
        let _guard = self.log_lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = self.root.join("logs");
        fs::create_dir_all(&dir)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(format!("{log}.log")))?;
        let mut line = Vec::with_capacity(record.len() + 1);
        line.extend_from_slice(record);
        line.push(b'\n');
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(())
    }

    fn read_log(&self, log: &str) -> Result<Vec<Vec<u8>>, StorageError> {
        check_namespace(log)?;
        let bytes = match fs::read(self.root.join("logs").join(format!("{log}.log"))) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let complete = match bytes.iter().rposition(|b| *b == b'\n') {
            Some(last) => &bytes[..=last],
            None => return Ok(Vec::new()),
        };
        Ok(complete
            .split(|b| *b == b'\n')
            .filter(|line| !line.is_empty())
            .map(<[u8]>::to_vec)
            .collect())
    }
}

/// In-process store for tests and ephemeral runs.
#[derive(Debug, Default)]
pub struct MemoryStore {
    records: RwLock<BTreeMap<(String, String), Vec<u8>>>,
    logs: RwLock<BTreeMap<String, Vec<Vec<u8>>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Storage for MemoryStore {
    fn get(&self, namespace: &str, key: &str) -> Result<Option<Vec<u8>>, StorageError> {
        check_namespace(namespace)?;
        let records = self.records.read().unwrap_or_else(|e| e.into_inner());
        Ok(records.get(&(namespace.to_string(), key.to_string())).cloned())
    }

    fn put(&self, namespace: &str, key: &str, value: &[u8]) -> Result<(), StorageError> {
        check_namespace(namespace)?;
        encode_key(key)?;
        let mut records = self.records.write().unwrap_or_else(|e| e.into_inner());
        records.insert((namespace.to_string(), key.to_string()), value.to_vec());
        Ok(())
    }

    fn delete(&self, namespace: &str, key: &str) -> Result<bool, StorageError> {
        check_namespace(namespace)?;
        let mut records = self.records.write().unwrap_or_else(|e| e.into_inner());
        Ok(records.remove(&(namespace.to_string(), key.to_string())).is_some())
    }

    fn keys(&self, namespace: &str) -> Result<Vec<String>, StorageError> {
        check_namespace(namespace)?;
        let records = self.records.read().unwrap_or_else(|e| e.into_inner());
        Ok(records
            .keys()
            .filter(|(ns, _)| ns == namespace)
            .map(|(_, k)| k.clone())
            .collect())
    }

    fn append(&self, log: &str, record: &[u8]) -> Result<(), StorageError> {
        check_namespace(log)?;
        if record.contains(&b'\n') {
            return Err(StorageError::MultilineLogRecord);
        }
        let mut logs = self.logs.write().unwrap_or_else(|e| e.into_inner());
        logs.entry(log.to_string()).or_default().push(record.to_vec());
        Ok(())
    }

    fn read_log(&self, log: &str) -> Result<Vec<Vec<u8>>, StorageError> {
        check_namespace(log)?;
        let logs = self.logs.read().unwrap_or_else(|e| e.into_inner());
        Ok(logs.get(log).cloned().unwrap_or_default())
    }
}
