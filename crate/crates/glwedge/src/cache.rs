//! Write-once cache of 1D results, keyed by a content hash of the
//! parameter block. 2D results are never cached.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use glwedge_core::corner::ProfileProvider;
use glwedge_core::profile1d::{half_line_limit, optimize_alpha, HalfLineSummary, Params1D, Profile1D};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "GLWEDGE_CACHE";

/// Bumped whenever the stored layout or the solvers change.
const FORMAT: &str = "glwedge-cache-v1";

/// Hex SHA-256 of `kind` and the JSON form of `block`.
pub fn content_key<T: Serialize>(kind: &str, block: &T) -> String {
    let mut h = Sha256::new();
    h.update(FORMAT.as_bytes());
    h.update([0]);
    h.update(kind.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(block).expect("parameter blocks serialize"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct HalfLineKey<'a> {
    b: f64,
    schedule: &'a [f64],
    h: f64,
}

/// Profile and half-line cache with an in-memory layer and an optional
/// on-disk layer.
#[derive(Debug)]
pub struct ProfileCache {
    dir: Option<PathBuf>,
    /// Grid spacing of profiles requested through [`ProfileProvider`].
    pub h: f64,
    profiles: Mutex<BTreeMap<String, Profile1D>>,
    summaries: Mutex<BTreeMap<String, HalfLineSummary>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl ProfileCache {
    pub fn new(dir: Option<PathBuf>, h: f64) -> Self {
        Self {
            dir,
            h,
            profiles: Mutex::new(BTreeMap::new()),
            summaries: Mutex::new(BTreeMap::new()),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// `(disk hits, solves)` so far.
    pub fn stats(&self) -> (usize, usize) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn load<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let text = fs::read(self.path(key)?).ok()?;
        serde_json::from_slice(&text).ok()
    }

    /// Writes through a temporary file and a rename so readers never see a
    /// partial entry; an existing entry is left untouched.
    fn store<T: Serialize>(&self, key: &str, value: &T) {
        let (Some(dir), Some(path)) = (self.dir.as_ref(), self.path(key)) else { return };
        if path.exists() {
            return;
        }
        let result = fs::create_dir_all(dir).and_then(|_| {
            let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
            fs::write(&tmp, serde_json::to_vec(value).expect("cache values serialize"))?;
            fs::rename(&tmp, &path)
        });
        if let Err(e) = result {
            eprintln!("warning: could not write cache entry {}: {e}", path.display());
        }
    }

    fn lookup<T, F>(&self, memo: &Mutex<BTreeMap<String, T>>, key: String, solve: F) -> glwedge_core::Result<T>
    where
        T: Clone + Serialize + DeserializeOwned,
        F: FnOnce() -> glwedge_core::Result<T>,
    {
        if let Some(v) = memo.lock().expect("cache memo poisoned").get(&key) {
            return Ok(v.clone());
        }
        let value = match self.load::<T>(&key) {
            Some(v) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                v
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                let v = solve()?;
                self.store(&key, &v);
                v
            }
        };
        memo.lock().expect("cache memo poisoned").insert(key, value.clone());
        Ok(value)
    }

    /// Optimal-phase profile for `params`.
    pub fn solve(&self, params: &Params1D) -> glwedge_core::Result<Profile1D> {
        self.lookup(&self.profiles, content_key("profile1d", params), || optimize_alpha(params))
    }

    /// Half-line limit along `schedule` at spacing `h`.
    pub fn half_line(&self, b: f64, schedule: &[f64], h: f64) -> glwedge_core::Result<HalfLineSummary> {
        let key = content_key("half_line", &HalfLineKey { b, schedule, h });
        self.lookup(&self.summaries, key, || half_line_limit(b, schedule, h))
    }
}

impl ProfileProvider for ProfileCache {
    fn profile(&self, b: f64, ell: f64) -> glwedge_core::Result<Profile1D> {
        self.solve(&Params1D::with_spacing(b, 0.0, 0.0, ell, self.h)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_every_field() {
        let p = Params1D::flat(1.5, 12.0, 2401).unwrap();
        let k = content_key("profile1d", &p);
        assert_eq!(k.len(), 64);
        assert_eq!(k, content_key("profile1d", &p.clone()));
        assert_ne!(k, content_key("profile1d", &Params1D::flat(1.5, 12.0, 2402).unwrap()));
        assert_ne!(k, content_key("profile1d", &Params1D { theta0: 0.59, ..p.clone() }));
        assert_ne!(k, content_key("other", &p));
    }

    #[test]
    fn disk_entries_roundtrip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = Params1D::flat(1.5, 8.0, 401).unwrap();
        let first = ProfileCache::new(Some(dir.path().into()), 0.02);
        let a = first.solve(&p).unwrap();
        assert_eq!(first.stats(), (0, 1));
        let second = ProfileCache::new(Some(dir.path().into()), 0.02);
        let b = second.solve(&p).unwrap();
        assert_eq!(second.stats(), (1, 0));
        assert_eq!(a, b);
        // The in-memory layer answers repeated requests.
        second.solve(&p).unwrap();
        assert_eq!(second.stats(), (1, 0));
    }

    #[test]
    fn corrupt_entries_are_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let p = Params1D::flat(1.5, 8.0, 401).unwrap();
        fs::write(dir.path().join(format!("{}.json", content_key("profile1d", &p))), b"{").unwrap();
        let c = ProfileCache::new(Some(dir.path().into()), 0.02);
        assert!(c.solve(&p).is_ok());
        assert_eq!(c.stats(), (0, 1));
    }
}
