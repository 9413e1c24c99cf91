//! Run configuration and input loading.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use ifl_core::lattice::{BoundaryConditions, Domain, DomainSpec, Point};
use serde::Serialize;

/// Environment variable naming the fixture directory.
pub const FIXTURES_ENV: &str = "IFL_FIXTURES";

/// Everything a run depends on; written verbatim into every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub tol: f64,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub args: serde_json::Value,
}

/// Malformed or unreadable input; reported with exit status 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn fixtures_dir() -> PathBuf {
    match std::env::var_os(FIXTURES_ENV) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
            p.canonicalize().unwrap_or(p)
        }
    }
}

/// Fixture files in name order.
pub fn fixture_files() -> Result<Vec<PathBuf>> {
    let dir = fixtures_dir();
    let entries = std::fs::read_dir(&dir)
        .map_err(|e| InputError(format!("cannot read fixture directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(InputError(format!("no fixtures in {}", dir.display())).into());
    }
    Ok(files)
}

/// Reads a domain file; schema errors name the offending field path.
pub fn load_spec(path: &Path) -> Result<DomainSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read domain file {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        InputError(format!(
            "schema error in {} at `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
        .into()
    })
}

/// Where a lattice domain comes from.
#[derive(Args, Clone, Debug, Serialize)]
pub struct DomainArgs {
    /// Domain file (JSON with `rect` or `faces`, `arcs`, optional `mesh` and `a1`).
    #[arg(long, conflicts_with = "fixture")]
    pub domain: Option<PathBuf>,
    /// Name of a file in the fixture directory, without extension.
    #[arg(long)]
    pub fixture: Option<String>,
}

impl DomainArgs {
    pub fn path(&self) -> Result<PathBuf> {
        match (&self.domain, &self.fixture) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(name)) => Ok(fixtures_dir().join(format!("{name}.json"))),
            (None, None) => Err(InputError("one of --domain and --fixture is required".into()).into()),
        }
    }

    pub fn load(&self) -> Result<(PathBuf, DomainSpec)> {
        let path = self.path()?;
        let spec = load_spec(&path)?;
        Ok((path, spec))
    }
}

pub fn build(spec: &DomainSpec, path: &Path) -> Result<(Domain, BoundaryConditions)> {
    spec.build().with_context(|| format!("building {}", path.display()))
}

/// `x:y` lattice point.
pub fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(':').ok_or_else(|| format!("expected x:y, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<i32>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(x)?, p(y)?))
}

/// `re:im` complex number (a bare real is allowed).
pub fn parse_complex(s: &str) -> std::result::Result<(f64, f64), String> {
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    match s.split_once(':') {
        Some((re, im)) => Ok((p(re)?, p(im)?)),
        None => Ok((p(s)?, 0.0)),
    }
}

/// `WxH` rectangle size.
pub fn parse_rect(s: &str) -> std::result::Result<(i32, i32), String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<i32>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(w)?, p(h)?))
}

pub fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!(InputError(format!("--{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(InputError(msg.into()))
}
