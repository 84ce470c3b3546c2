//! On-disk cache of solved exit times, enabled by `HKLAB_CACHE=<dir>`.
//! Entries are keyed by the graph's hash and the solver policy, so a cached
//! value is bit-identical to a fresh solve.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hklab::linalg::SolverPolicy;

use crate::{write_file, CliError, CliResult};

pub const CACHE_ENV: &str = "HKLAB_CACHE";

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    graph: String,
    solver: SolverPolicy,
    /// `(x, R, E(x, R))`.
    exit_times: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct ExitCache {
    path: PathBuf,
    graph: String,
    solver: SolverPolicy,
}

impl ExitCache {
    /// The cache for this graph and policy, if `HKLAB_CACHE` is set.
    pub fn from_env(graph_hash: &str, solver: SolverPolicy) -> Option<Self> {
        let dir = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty())?;
        Some(Self::in_dir(Path::new(&dir), graph_hash, solver))
    }

    pub fn in_dir(dir: &Path, graph_hash: &str, solver: SolverPolicy) -> Self {
        let policy = serde_json::to_string(&solver).expect("policy serialises");
        let key = Sha256::digest(format!("{graph_hash}/{policy}").as_bytes());
        Self {
            path: dir.join(format!("exit-{:x}.json", key)),
            graph: graph_hash.to_string(),
            solver,
        }
    }

    /// Cached entries; a missing or unreadable file yields none.
    pub fn load(&self) -> Vec<(usize, usize, f64)> {
        let Ok(text) = std::fs::read_to_string(&self.path) else {
            return Vec::new();
        };
        match serde_json::from_str::<CacheFile>(&text) {
            Ok(file) if file.graph == self.graph && file.solver == self.solver => file.exit_times,
            _ => {
                eprintln!("warning: ignoring stale cache {}", self.path.display());
                Vec::new()
            }
        }
    }

    pub fn store(&self, entries: Vec<(usize, usize, f64)>) -> CliResult<()> {
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        }
        let file = CacheFile {
            graph: self.graph.clone(),
            solver: self.solver,
            exit_times: entries,
        };
        let tmp = self.path.with_extension("json.tmp");
        write_file(&tmp, &serde_json::to_string(&file).expect("cache serialises"))?;
        std::fs::rename(&tmp, &self.path).map_err(|e| CliError::Io(self.path.clone(), e))
    }
}
