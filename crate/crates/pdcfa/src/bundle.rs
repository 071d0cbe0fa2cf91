//! App bundles: a directory holding `manifest.json`, the program text and
//! optionally an API summary table.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use pdcfa_core::eps::{discover_entry_points, EpsError, Unit, UnitDecl};
use pdcfa_core::ir::{parse_program, ParseError, Program};
use pdcfa_core::report::{Predicate, PredicateError};
use pdcfa_core::taint::{ApiSummaryTable, SummaryParseError, DEFAULT_SUMMARIES};
use serde::Deserialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Manifest {
    pub app_name: String,
    /// Program file, relative to the bundle directory.
    pub program: String,
    /// Summary table file; the built-in Android table when absent.
    #[serde(default)]
    pub summaries: Option<String>,
    pub requested_permissions: Vec<String>,
    pub units: Vec<UnitDecl>,
    /// Conjoined with each other and with any command-line predicate.
    #[serde(default)]
    pub predicates: Vec<String>,
}

#[derive(Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub program: Program,
    pub summaries: ApiSummaryTable,
    pub units: Vec<Unit>,
    pub requested: BTreeSet<String>,
    pub predicate: Predicate,
    /// Input name → SHA-256 hex digest.
    pub digests: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}:{source}", path.display())]
    Program {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{}: {source}", path.display())]
    Summaries {
        path: PathBuf,
        #[source]
        source: SummaryParseError,
    },
    #[error("manifest: {0}")]
    Units(#[from] EpsError),
    #[error("manifest predicate {text:?}: {source}")]
    Predicate {
        text: String,
        #[source]
        source: PredicateError,
    },
    #[error("manifest: {0}")]
    Invalid(String),
}

pub fn digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rejects paths that would escape the bundle directory.
fn inner_path(dir: &Path, rel: &str) -> Result<PathBuf, BundleError> {
    let p = Path::new(rel);
    if rel.is_empty()
        || p.is_absolute()
        || p.components()
            .any(|c| matches!(c, std::path::Component::ParentDir))
    {
        return Err(BundleError::Invalid(format!(
            "path {rel:?} must be relative and stay inside the bundle"
        )));
    }
    Ok(dir.join(p))
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest, BundleError> {
    let m: Manifest = serde_json::from_str(text).map_err(|source| BundleError::Manifest {
        path: path.to_path_buf(),
        source,
    })?;
    if m.app_name.trim().is_empty() {
        return Err(BundleError::Invalid("appName is empty".into()));
    }
    let mut seen = BTreeSet::new();
    for perm in &m.requested_permissions {
        if perm.is_empty() || perm.contains(char::is_whitespace) {
            return Err(BundleError::Invalid(format!(
                "bad permission name {perm:?}"
            )));
        }
        if !seen.insert(perm) {
            return Err(BundleError::Invalid(format!(
                "permission {perm} requested twice"
            )));
        }
    }
    Ok(m)
}

/// Loads and cross-checks a bundle: the manifest's entry points must
/// resolve in the parsed program.
pub fn load_bundle(dir: &Path) -> Result<Bundle, BundleError> {
    let manifest_path = dir.join(MANIFEST);
    let manifest_text = read(&manifest_path)?;
    let manifest = parse_manifest(&manifest_text, &manifest_path)?;
    let mut digests = BTreeMap::new();
    digests.insert(MANIFEST.to_string(), digest(manifest_text.as_bytes()));

    let program_path = inner_path(dir, &manifest.program)?;
    let program_text = read(&program_path)?;
    let program = parse_program(&program_text).map_err(|source| BundleError::Program {
        path: program_path.clone(),
        source,
    })?;
    digests.insert(manifest.program.clone(), digest(program_text.as_bytes()));

    let summaries = match &manifest.summaries {
        Some(rel) => {
            let path = inner_path(dir, rel)?;
            let text = read(&path)?;
            digests.insert(rel.clone(), digest(text.as_bytes()));
            ApiSummaryTable::parse(&text)
                .map_err(|source| BundleError::Summaries { path, source })?
        }
        None => {
            digests.insert(
                "builtin:android.summaries".into(),
                digest(DEFAULT_SUMMARIES.as_bytes()),
            );
            ApiSummaryTable::android_default()
        }
    };

    let units = discover_entry_points(&program, &manifest.units)?;
    let mut predicate = Predicate::default();
    for text in &manifest.predicates {
        let p: Predicate = text.parse().map_err(|source| BundleError::Predicate {
            text: text.clone(),
            source,
        })?;
        predicate.atoms.extend(p.atoms);
    }
    Ok(Bundle {
        dir: dir.to_path_buf(),
        requested: manifest.requested_permissions.iter().cloned().collect(),
        manifest,
        program,
        summaries,
        units,
        predicate,
        digests,
    })
}
