//! Content-addressed store for expensive results.
//!
//! Each entry is one JSON file named by the SHA-256 of its canonical key
//! document (the full input configuration plus a code version string). The
//! payload carries its own checksum so tampering and truncation are caught.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, SystemTime};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cache serialization: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
    move |source| CacheError::Io { path: path.to_path_buf(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a serializable value's canonical JSON (object keys sorted).
pub fn content_hash<T: Serialize>(value: &T) -> Result<String, CacheError> {
    let v = serde_json::to_value(value)?;
    Ok(sha256_hex(canonical_json(&v).as_bytes()))
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<&String> = m.keys().collect();
                keys.sort();
                Value::Object(keys.into_iter().map(|k| (k.clone(), sorted(&m[k]))).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(v)).expect("values always serialize")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    key: String,
    namespace: String,
    inputs: Value,
    payload: Value,
    checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryInfo {
    pub key: String,
    pub namespace: String,
    pub bytes: u64,
    pub age_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub ok: usize,
    pub quarantined: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.quarantined.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eviction<'a> {
    OlderThan(Duration),
    Key(&'a str),
    All,
}

/// Directory-backed cache. Writes go through a temporary file and an
/// atomic rename under a process-wide lock.
#[derive(Debug)]
pub struct Cache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl Cache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir, write_lock: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn key_for(namespace: &str, inputs: &Value) -> String {
        sha256_hex(format!("{namespace}\n{}", canonical_json(inputs)).as_bytes())
    }

    /// Key under which `inputs` would be stored.
    pub fn key<T: Serialize>(namespace: &str, inputs: &T) -> Result<String, CacheError> {
        Ok(Self::key_for(namespace, &serde_json::to_value(inputs)?))
    }

    pub fn get<K: Serialize, V: DeserializeOwned>(&self, namespace: &str, inputs: &K) -> Result<Option<V>, CacheError> {
        let key = Self::key(namespace, inputs)?;
        let path = self.path_for(&key);
        if !path.exists() {
            return Ok(None);
        }
        match self.load_checked(&path) {
            Some(entry) if entry.key == key => Ok(serde_json::from_value(entry.payload).ok()),
            _ => {
                self.quarantine(&path)?;
                Ok(None)
            }
        }
    }

    pub fn put<K: Serialize, V: Serialize>(&self, namespace: &str, inputs: &K, payload: &V) -> Result<String, CacheError> {
        let inputs = serde_json::to_value(inputs)?;
        let payload = serde_json::to_value(payload)?;
        let key = Self::key_for(namespace, &inputs);
        let checksum = sha256_hex(canonical_json(&payload).as_bytes());
        let entry = Entry { key: key.clone(), namespace: namespace.to_string(), inputs, payload, checksum };
        let text = serde_json::to_string_pretty(&entry)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let tmp = self.dir.join(format!(".{key}.tmp"));
        {
            let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        let path = self.path_for(&key);
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(key)
    }

    fn load_checked(&self, path: &Path) -> Option<Entry> {
        let text = fs::read_to_string(path).ok()?;
        let entry: Entry = serde_json::from_str(&text).ok()?;
        let key_ok = Self::key_for(&entry.namespace, &entry.inputs) == entry.key;
        let sum_ok = sha256_hex(canonical_json(&entry.payload).as_bytes()) == entry.checksum;
        let name_ok = path.file_stem().and_then(|s| s.to_str()) == Some(entry.key.as_str());
        (key_ok && sum_ok && name_ok).then_some(entry)
    }

    fn quarantine(&self, path: &Path) -> Result<(), CacheError> {
        let qdir = self.dir.join("quarantine");
        fs::create_dir_all(&qdir).map_err(io_err(&qdir))?;
        let name = path.file_name().map(|n| n.to_owned()).unwrap_or_default();
        let target = qdir.join(name);
        log::warn!("quarantining corrupted cache entry {}", path.display());
        fs::rename(path, &target).map_err(io_err(path))
    }

    fn entry_paths(&self) -> Result<Vec<PathBuf>, CacheError> {
        let mut out = Vec::new();
        for e in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let p = e.map_err(io_err(&self.dir))?.path();
            let is_entry = p.extension().is_some_and(|x| x == "json")
                && !p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
            if p.is_file() && is_entry {
                out.push(p);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn list(&self) -> Result<Vec<EntryInfo>, CacheError> {
        let now = SystemTime::now();
        let mut out = Vec::new();
        for p in self.entry_paths()? {
            let meta = fs::metadata(&p).map_err(io_err(&p))?;
            let age = meta.modified().ok().and_then(|m| now.duration_since(m).ok()).unwrap_or_default();
            let namespace = fs::read_to_string(&p)
                .ok()
                .and_then(|t| serde_json::from_str::<Entry>(&t).ok())
                .map(|e| e.namespace)
                .unwrap_or_else(|| "?".into());
            out.push(EntryInfo {
                key: p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
                namespace,
                bytes: meta.len(),
                age_s: age.as_secs_f64(),
            });
        }
        Ok(out)
    }

    /// Re-hashes every entry; failures are moved to `quarantine/`.
    pub fn verify(&self) -> Result<VerifyReport, CacheError> {
        let mut report = VerifyReport::default();
        for p in self.entry_paths()? {
            report.checked += 1;
            if self.load_checked(&p).is_some() {
                report.ok += 1;
            } else {
                report.quarantined.push(p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string());
                self.quarantine(&p)?;
            }
        }
        Ok(report)
    }

    /// Removes matching entries and returns their keys; `dry_run` only lists them.
    pub fn evict(&self, rule: Eviction<'_>, dry_run: bool) -> Result<Vec<String>, CacheError> {
        let mut removed = Vec::new();
        for info in self.list()? {
            let hit = match rule {
                Eviction::All => true,
                Eviction::Key(k) => info.key == k || (k.len() >= 8 && info.key.starts_with(k)),
                Eviction::OlderThan(d) => info.age_s > d.as_secs_f64(),
            };
            if hit {
                if !dry_run {
                    let p = self.path_for(&info.key);
                    fs::remove_file(&p).map_err(io_err(&p))?;
                }
                removed.push(info.key);
            }
        }
        Ok(removed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        let key = cache.put("t", &("a", 1), &vec![1.0, 2.0]).unwrap();
        let got: Option<Vec<f64>> = cache.get("t", &("a", 1)).unwrap();
        assert_eq!(got, Some(vec![1.0, 2.0]));
        assert_eq!(cache.get::<_, Vec<f64>>("t", &("a", 2)).unwrap(), None);
        assert!(cache.verify().unwrap().passed());

        let path = dir.path().join(format!("{key}.json"));
        let text = fs::read_to_string(&path).unwrap().replace("2.0", "3.0");
        fs::write(&path, text).unwrap();
        let report = cache.verify().unwrap();
        assert_eq!(report.quarantined, vec![key.clone()]);
        assert!(dir.path().join("quarantine").join(format!("{key}.json")).exists());
        assert_eq!(cache.get::<_, Vec<f64>>("t", &("a", 1)).unwrap(), None);
    }

    #[test]
    fn eviction_respects_dry_run() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        cache.put("t", &1, &1).unwrap();
        cache.put("t", &2, &2).unwrap();
        let listed = cache.evict(Eviction::All, true).unwrap();
        assert_eq!(listed.len(), 2);
        assert_eq!(cache.list().unwrap().len(), 2);
        cache.evict(Eviction::All, false).unwrap();
        assert!(cache.list().unwrap().is_empty());
    }

    #[test]
    fn canonical_hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b":1,"a":2}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a":2,"b":1}"#).unwrap();
        assert_eq!(content_hash(&a).unwrap(), content_hash(&b).unwrap());
    }
}
