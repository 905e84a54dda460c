//! Output directories, artifact writing and run manifests.

use anyhow::{Context, Result};
use ricci_entropy::verify::SuiteReport;
use ricci_entropy::ScenarioConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const OUT_ENV: &str = "RENTROPY_OUT";

/// Where run directories go.
pub struct OutRoot {
    pub path: PathBuf,
    /// Set by `--out` or the environment; beats a scenario's own `output`.
    pub explicit: bool,
}

/// `--out`, else `$RENTROPY_OUT`, else `./runs`.
pub fn root(flag: Option<&Path>) -> OutRoot {
    match flag.map(Path::to_path_buf).or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
        Some(path) => OutRoot { path, explicit: true },
        None => OutRoot {
            path: PathBuf::from("runs"),
            explicit: false,
        },
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Reads and parses a scenario file; the raw bytes are kept for hashing.
pub fn load_config(path: &Path) -> Result<(ScenarioConfig, Vec<u8>)> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let sc: ScenarioConfig =
        serde_json::from_slice(&raw).with_context(|| format!("parsing {}", path.display()))?;
    sc.validate().with_context(|| format!("validating {}", path.display()))?;
    for id in &sc.checks {
        ricci_entropy::verify::suite(id)?;
    }
    Ok((sc, raw))
}

/// A run directory collecting written files for the manifest.
pub struct RunDir {
    pub path: PathBuf,
    pub files: Vec<String>,
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self> {
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(RunDir { path, files: Vec::new() })
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        self.write(rel, serde_json::to_vec_pretty(value)?)
    }

    pub fn write_with(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, buf)
    }

    /// Writes `suite.json` and every check artifact under `artifacts/<scenario>/<check>/`.
    pub fn write_suite(&mut self, report: &SuiteReport) -> Result<()> {
        let mut report = report.clone();
        for r in &mut report.reports {
            for a in &mut r.artifacts {
                let rel = format!("artifacts/{}/{}/{}", r.scenario, r.check_id, a.name);
                self.write(&rel, &a.csv)?;
                a.name = rel;
            }
        }
        self.write_json("suite.json", &report)
    }
}

/// Wall-clock timings by stage, in seconds.
#[derive(Default, Serialize)]
pub struct Timings(BTreeMap<String, f64>);

impl Timings {
    pub fn time<T>(&mut self, stage: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.insert(stage.into(), start.elapsed().as_secs_f64());
        out
    }
}

#[derive(Serialize)]
pub struct Versions {
    pub rentropy: &'static str,
    pub ricci_entropy: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
}

#[derive(Serialize)]
pub struct ConfigRecord {
    pub path: Option<String>,
    /// Hash of the file as read.
    pub sha256: Option<String>,
    /// Hash of the config with every default filled in.
    pub materialized_sha256: String,
    pub materialized: ScenarioConfig,
}

impl ConfigRecord {
    pub fn new(sc: &ScenarioConfig, path: Option<&Path>, raw: Option<&[u8]>) -> Result<Self> {
        Ok(ConfigRecord {
            path: path.map(|p| p.display().to_string()),
            sha256: raw.map(sha256),
            materialized_sha256: sha256(&serde_json::to_vec(sc)?),
            materialized: sc.clone(),
        })
    }
}

/// Enough to re-execute the run: arguments, materialized configs and versions.
#[derive(Serialize)]
pub struct Manifest {
    pub command: Vec<String>,
    pub started_unix: u64,
    pub versions: Versions,
    pub threads: usize,
    pub configs: Vec<ConfigRecord>,
    pub timings: Timings,
    pub files: Vec<String>,
    pub exit_code: u8,
}

impl Manifest {
    pub fn new(configs: Vec<ConfigRecord>) -> Self {
        Manifest {
            command: std::env::args().collect(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            versions: Versions {
                rentropy: env!("CARGO_PKG_VERSION"),
                ricci_entropy: ricci_entropy::VERSION,
                os: std::env::consts::OS,
                arch: std::env::consts::ARCH,
            },
            threads: rayon::current_num_threads(),
            configs,
            timings: Timings::default(),
            files: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn finish(mut self, dir: &mut RunDir, exit_code: u8) -> Result<()> {
        self.files = dir.files.clone();
        self.exit_code = exit_code;
        dir.write_json("manifest.json", &self)
    }
}

pub fn suite_status(report: &SuiteReport) -> crate::Status {
    if report.errors > 0 {
        crate::Status::Numerical
    } else if !report.pass {
        crate::Status::ChecksFailed
    } else {
        crate::Status::Ok
    }
}
