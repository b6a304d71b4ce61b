//! Schema library on disk: one `<id>.json` per schema plus a manifest of
//! versions. Every write goes to a temp file in the same directory and is
//! renamed into place, so a crash leaves either the old or the new file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use schemakit::schema::{Provenance, Schema};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = ".manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no schema `{0}`")]
    NotFound(String),
    #[error("version conflict on `{id}`: expected {expected:?}, current {current}")]
    Conflict {
        id: String,
        expected: Option<u64>,
        current: u64,
    },
    #[error(
        "invalid schema id `{0}`: use letters, digits, `.`, `_` or `-`, not starting with `.`"
    )]
    InvalidId(String),
    #[error(transparent)]
    Core(#[from] schemakit::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

type Result<T> = std::result::Result<T, StoreError>;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub version: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schemas: BTreeMap<String, ManifestEntry>,
    /// Last version of deleted schemas, so a re-created id keeps counting up.
    #[serde(default)]
    pub retired: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaSummary {
    pub id: String,
    pub name: String,
    pub version: u64,
    pub provenance: Provenance,
    pub n_steps: usize,
}

pub fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

fn write_atomic(dir: &Path, target: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp")
        .tempfile_in(dir)
        .map_err(io(dir))?;
    tmp.write_all(bytes).map_err(io(target))?;
    tmp.as_file().sync_all().map_err(io(target))?;
    tmp.persist(target).map_err(|e| StoreError::Io {
        path: target.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub struct LibraryStore {
    root: PathBuf,
    manifest: Mutex<Manifest>,
}

impl LibraryStore {
    /// Opens or creates a store. The manifest is reconciled with the schema
    /// files: entries without a file are dropped, files without an entry get
    /// version 1, and a missing manifest is rebuilt.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(io(&root))?;
        let manifest_path = root.join(MANIFEST);
        let stored: Manifest = match std::fs::read(&manifest_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_default(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(io(&manifest_path)(e)),
        };
        let mut rebuilt = Manifest {
            schemas: BTreeMap::new(),
            retired: stored.retired.clone(),
        };
        for schema in schemakit::schema::load_library(&root)? {
            let file = format!("{}.json", schema.id);
            let version = match stored.schemas.get(&schema.id) {
                Some(e) if e.file == file => e.version,
                _ => stored.retired.get(&schema.id).map_or(1, |v| v + 1),
            };
            rebuilt.retired.remove(&schema.id);
            rebuilt.schemas.insert(
                schema.id.clone(),
                ManifestEntry {
                    file,
                    version,
                    provenance: schema.provenance.clone(),
                },
            );
        }
        let store = LibraryStore {
            root,
            manifest: Mutex::new(Manifest::default()),
        };
        if rebuilt != stored {
            store.write_manifest(&rebuilt)?;
        }
        *store.manifest.lock().expect("fresh mutex") = rebuilt;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Manifest> {
        // A panic mid-write leaves the manifest as it was before the write.
        self.manifest.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn write_manifest(&self, m: &Manifest) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(m).expect("manifest serializes");
        write_atomic(&self.root, &self.root.join(MANIFEST), &bytes)
    }

    pub fn manifest(&self) -> Manifest {
        self.lock().clone()
    }

    pub fn version(&self, id: &str) -> Option<u64> {
        self.lock().schemas.get(id).map(|e| e.version)
    }

    pub fn list(&self) -> Result<Vec<SchemaSummary>> {
        let ids: Vec<String> = self.lock().schemas.keys().cloned().collect();
        ids.iter()
            .map(|id| {
                let (s, version) = self.get(id)?;
                Ok(SchemaSummary {
                    id: s.id,
                    name: s.name,
                    version,
                    provenance: s.provenance,
                    n_steps: s.steps.len(),
                })
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<(Schema, u64)> {
        let m = self.lock();
        let entry = m
            .schemas
            .get(id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        let path = self.root.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(io(&path))?;
        Ok((Schema::from_json(&bytes)?, entry.version))
    }

    /// Every schema, sorted by id, with its version.
    pub fn snapshot(&self) -> Result<Vec<(Schema, u64)>> {
        let ids: Vec<String> = self.lock().schemas.keys().cloned().collect();
        ids.iter().map(|id| self.get(id)).collect()
    }

    /// Creates or replaces a schema. `expected` is the version the caller
    /// last saw: `None` or `Some(0)` to create, the current version to
    /// replace. Returns the new version.
    pub fn put(&self, schema: &Schema, expected: Option<u64>) -> Result<u64> {
        check_id(&schema.id)?;
        let mut m = self.lock();
        let current = m.schemas.get(&schema.id).map_or(0, |e| e.version);
        if expected.unwrap_or(0) != current {
            return Err(StoreError::Conflict {
                id: schema.id.clone(),
                expected,
                current,
            });
        }
        let base = if current == 0 {
            m.retired.get(&schema.id).copied().unwrap_or(0)
        } else {
            current
        };
        let version = base + 1;
        let file = format!("{}.json", schema.id);
        write_atomic(&self.root, &self.root.join(&file), &schema.to_json())?;
        let mut next = m.clone();
        next.retired.remove(&schema.id);
        next.schemas.insert(
            schema.id.clone(),
            ManifestEntry {
                file,
                version,
                provenance: schema.provenance.clone(),
            },
        );
        self.write_manifest(&next)?;
        *m = next;
        Ok(version)
    }

    /// Removes a schema; `expected`, when given, must be its current version.
    pub fn delete(&self, id: &str, expected: Option<u64>) -> Result<()> {
        let mut m = self.lock();
        let entry = m
            .schemas
            .get(id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        if let Some(v) = expected.filter(|&v| v != entry.version) {
            return Err(StoreError::Conflict {
                id: id.to_string(),
                expected: Some(v),
                current: entry.version,
            });
        }
        let path = self.root.join(&entry.file);
        let mut next = m.clone();
        let old = next.schemas.remove(id).expect("entry checked above");
        next.retired.insert(id.to_string(), old.version);
        // Manifest first: a crash before the unlink leaves an orphan file
        // that the next open re-registers with a higher version.
        self.write_manifest(&next)?;
        match std::fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io(&path)(e)),
        }
        *m = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use schemakit::schema::Step;

    use super::*;

    fn schema(id: &str, name: &str) -> Schema {
        Schema {
            id: id.into(),
            name: name.into(),
            steps: vec![Step {
                id: "s1".into(),
                event_type: "Life.Die".into(),
                ..Step::default()
            }],
            ..Schema::default()
        }
    }

    #[test]
    fn versions_increase_and_stale_writes_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let store = LibraryStore::open(dir.path()).unwrap();
        assert_eq!(store.put(&schema("a", "one"), None).unwrap(), 1);
        assert!(matches!(
            store.put(&schema("a", "again"), None),
            Err(StoreError::Conflict { current: 1, .. })
        ));
        assert_eq!(store.put(&schema("a", "two"), Some(1)).unwrap(), 2);
        assert!(matches!(
            store.put(&schema("a", "stale"), Some(1)),
            Err(StoreError::Conflict { .. })
        ));
        let (s, v) = store.get("a").unwrap();
        assert_eq!((s.name.as_str(), v), ("two", 2));
        store.delete("a", Some(2)).unwrap();
        assert!(matches!(store.get("a"), Err(StoreError::NotFound(_))));
        // Re-creation continues the count.
        assert_eq!(store.put(&schema("a", "three"), None).unwrap(), 3);
    }

    #[test]
    fn reopening_keeps_versions_and_rebuilds_a_lost_manifest() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = LibraryStore::open(dir.path()).unwrap();
            store.put(&schema("a", "x"), None).unwrap();
            store.put(&schema("a", "y"), Some(1)).unwrap();
            store.put(&schema("b", "z"), None).unwrap();
        }
        let store = LibraryStore::open(dir.path()).unwrap();
        assert_eq!(store.version("a"), Some(2));
        std::fs::remove_file(dir.path().join(MANIFEST)).unwrap();
        let store = LibraryStore::open(dir.path()).unwrap();
        let ids: Vec<String> = store.list().unwrap().into_iter().map(|s| s.id).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(dir.path().join(MANIFEST).exists());
    }

    #[test]
    fn manifest_follows_the_files() {
        let dir = tempfile::tempdir().unwrap();
        let store = LibraryStore::open(dir.path()).unwrap();
        store.put(&schema("a", "x"), None).unwrap();
        store.put(&schema("b", "x"), None).unwrap();
        drop(store);
        // A file removed behind the store's back, and one added.
        std::fs::remove_file(dir.path().join("a.json")).unwrap();
        std::fs::write(dir.path().join("c.json"), schema("c", "x").to_json()).unwrap();
        let store = LibraryStore::open(dir.path()).unwrap();
        let m = store.manifest();
        assert_eq!(m.schemas.keys().collect::<Vec<_>>(), ["b", "c"]);
        assert_eq!(m.schemas["c"].version, 1);
        // Leftover temp files are ignored.
        std::fs::write(dir.path().join(".tmpXYZ"), b"partial").unwrap();
        assert!(LibraryStore::open(dir.path()).is_ok());
    }

    #[test]
    fn ids_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let store = LibraryStore::open(dir.path()).unwrap();
        for bad in ["", "../x", ".hidden", "a/b", "a b"] {
            assert!(
                matches!(
                    store.put(&schema(bad, "x"), None),
                    Err(StoreError::InvalidId(_))
                ),
                "{bad}"
            );
        }
    }
}
