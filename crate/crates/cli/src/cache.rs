// SPDX-License-Identifier: MIT OR Apache-2.0

//! Snapshot cache layout and the provenance block stamped on every output.
//!
//! ```text
//! <cache>/manifest.json
//! <cache>/snapshot_<year>.json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use tradenet::{Bipartite, BipartiteSnapshot, Error};

use crate::CliError;

pub const MANIFEST_FORMAT: &str = "tradenet-cache/1";
const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub input_sha256: String,
    pub config: Value,
}

impl Provenance {
    pub fn new(config: Value, input_sha256: &str) -> Self {
        let canonical = serde_json::to_string(&config).expect("config serializes");
        Provenance {
            tool: "tradenet",
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(canonical.as_bytes()),
            input_sha256: input_sha256.to_owned(),
            config,
        }
    }

    /// `#`-prefixed header lines for delimited outputs.
    pub fn csv_header(&self) -> String {
        format!(
            "# {} {}\n# config_sha256: {}\n# input_sha256: {}\n# config: {}\n",
            self.tool,
            self.version,
            self.config_sha256,
            self.input_sha256,
            serde_json::to_string(&self.config).expect("config serializes")
        )
    }

    /// First line of a JSON-lines output.
    pub fn jsonl_header(&self) -> String {
        let mut line =
            serde_json::to_string(&serde_json::json!({ "provenance": self })).expect("provenance serializes");
        line.push('\n');
        line
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CachedYear {
    pub year: i32,
    pub file: String,
    pub sha256: String,
    pub countries: usize,
    pub raw_countries: usize,
    pub products: usize,
    pub links: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: Value,
    pub format: String,
    pub input_sha256: String,
    pub threshold: f64,
    pub snapshots: Vec<CachedYear>,
    /// Requested years with no records.
    pub absent: Vec<i32>,
}

pub fn snapshot_file(year: i32) -> String {
    format!("snapshot_{year}.json")
}

/// Writes `snapshot` into `dir` and returns its manifest entry.
pub fn store(dir: &Path, snapshot: &BipartiteSnapshot) -> Result<CachedYear, CliError> {
    let file = snapshot_file(snapshot.year());
    let path = dir.join(&file);
    snapshot.save(&path)?;
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(CachedYear {
        year: snapshot.year(),
        file,
        sha256: sha256_hex(&bytes),
        countries: snapshot.country_count(),
        raw_countries: snapshot.raw_country_count(),
        products: snapshot.product_count(),
        links: snapshot.link_count(),
    })
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let path = dir.join(MANIFEST);
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))
}

/// A previously ingested cache directory.
pub struct Cache {
    dir: PathBuf,
    pub manifest: Manifest,
}

impl Cache {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let bytes = std::fs::read(&path)
            .map_err(|e| CliError::Data(format!("{}: {e} (run `tradenet ingest` first)", path.display())))?;
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(CliError::Data(format!(
                "{}: unsupported cache format `{}`",
                path.display(),
                manifest.format
            )));
        }
        Ok(Cache {
            dir: dir.to_owned(),
            manifest,
        })
    }

    pub fn years(&self) -> Vec<i32> {
        self.manifest.snapshots.iter().map(|s| s.year).collect()
    }

    pub fn has(&self, year: i32) -> bool {
        self.manifest.snapshots.iter().any(|s| s.year == year)
    }

    /// Loads one year, checking the file against the manifest hash.
    pub fn load(&self, year: i32) -> Result<BipartiteSnapshot, CliError> {
        let entry = self
            .manifest
            .snapshots
            .iter()
            .find(|s| s.year == year)
            .ok_or(Error::MissingSnapshot(year))?;
        let path = self.dir.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(CliError::Data(format!(
                "{}: contents do not match the cache manifest",
                path.display()
            )));
        }
        Ok(BipartiteSnapshot::load(&path)?)
    }

    pub fn load_all(&self) -> Result<BTreeMap<i32, BipartiteSnapshot>, CliError> {
        self.years().into_iter().map(|y| Ok((y, self.load(y)?))).collect()
    }
}
