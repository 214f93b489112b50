//! Content-addressed memo of task artifacts. Keys hash the tool version and the canonical
//! configuration, tolerances included.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tasks::Artifact;

pub const CACHE_ENV: &str = "EXWKB_CACHE_DIR";

fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

pub fn key(canonical_config: &str) -> String {
    sha256_hex(format!("exwkb {}\n{canonical_config}", env!("CARGO_PKG_VERSION")).as_bytes())
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    /// hash of the serialized artifact
    digest: String,
    artifact: String,
}

pub enum Lookup {
    Hit(Artifact),
    Miss,
    Corrupt(String),
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn from_env() -> Option<Cache> {
        std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(|d| Cache { dir: PathBuf::from(d) })
    }

    #[cfg(test)]
    pub fn at(dir: &std::path::Path) -> Cache {
        Cache { dir: dir.to_path_buf() }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Lookup {
        let Ok(text) = fs::read_to_string(self.path(key)) else {
            return Lookup::Miss;
        };
        let entry: Entry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => return Lookup::Corrupt(e.to_string()),
        };
        if entry.key != key || sha256_hex(entry.artifact.as_bytes()) != entry.digest {
            return Lookup::Corrupt("digest mismatch".to_string());
        }
        match serde_json::from_str(&entry.artifact) {
            Ok(a) => Lookup::Hit(a),
            Err(e) => Lookup::Corrupt(e.to_string()),
        }
    }

    pub fn put(&self, key: &str, artifact: &Artifact) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let text = serde_json::to_string(artifact)?;
        let entry = Entry { key: key.to_string(), digest: sha256_hex(text.as_bytes()), artifact: text };
        let tmp = self.dir.join(format!("{key}.json.tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&entry)?)?;
        fs::rename(tmp, self.path(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn artifact() -> Artifact {
        Artifact { result: json!({"value": [0.1, 1e-300]}), truncation_orders: [("n0".to_string(), 7)].into_iter().collect() }
    }

    #[test]
    fn round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::at(dir.path());
        let k = key("{\"task\":\"stokes\"}");
        assert!(matches!(c.get(&k), Lookup::Miss));
        c.put(&k, &artifact()).unwrap();
        match c.get(&k) {
            Lookup::Hit(a) => assert_eq!(a, artifact()),
            _ => panic!("expected a hit"),
        }
        let p = c.path(&k);
        let text = fs::read_to_string(&p).unwrap().replace("0.1", "0.2");
        fs::write(&p, text).unwrap();
        assert!(matches!(c.get(&k), Lookup::Corrupt(_)));
        fs::write(&p, "{not json").unwrap();
        assert!(matches!(c.get(&k), Lookup::Corrupt(_)));
    }

    #[test]
    fn key_depends_on_content() {
        assert_ne!(key("a"), key("b"));
        assert_eq!(key("a").len(), 64);
    }
}
