//! One JSON file per entity under `sessions/` and `results/`, written by
//! atomic rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

pub const DATA_DIR_ENV: &str = "SEURAT_DATA_DIR";

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> std::io::Result<Store> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("sessions"))?;
        fs::create_dir_all(root.join("results"))?;
        Ok(Store { root })
    }

    /// `--data-dir`, else `$SEURAT_DATA_DIR`, else `./seurat-data`.
    pub fn default_root(flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("seurat-data"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, dir: &str, id: &str) -> Option<PathBuf> {
        valid_id(id).then(|| self.root.join(dir).join(format!("{id}.json")))
    }

    pub fn write<T: Serialize>(&self, dir: &str, id: &str, value: &T) -> std::io::Result<()> {
        let path = self
            .path(dir, id)
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "invalid id"))?;
        let bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        let tmp = path.with_extension(format!("json.tmp-{}", uuid::Uuid::new_v4().simple()));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, &path)
    }

    /// `Ok(None)` when absent or the id is not a valid file name.
    pub fn read<T: DeserializeOwned>(&self, dir: &str, id: &str) -> std::io::Result<Option<T>> {
        let Some(path) = self.path(dir, id) else {
            return Ok(None);
        };
        match fs::read(&path) {
            Ok(b) => serde_json::from_slice(&b).map(Some).map_err(std::io::Error::other),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn read_raw(&self, dir: &str, id: &str) -> std::io::Result<Option<Vec<u8>>> {
        let Some(path) = self.path(dir, id) else {
            return Ok(None);
        };
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_bad_ids() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        s.write("sessions", "abc-1", &vec![1, 2, 3]).unwrap();
        assert_eq!(s.read::<Vec<i32>>("sessions", "abc-1").unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(s.read::<Vec<i32>>("sessions", "missing").unwrap(), None);
        assert_eq!(s.read::<Vec<i32>>("sessions", "../x").unwrap(), None);
        assert!(s.write("sessions", "../x", &1).is_err());
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("sessions")).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
