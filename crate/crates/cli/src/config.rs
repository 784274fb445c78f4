use std::fs;
use std::path::{Path, PathBuf};

use hypkob::boundary::GraphParams;
use hypkob::complex::{Structure, StructureSpec};
use hypkob::domain::{CollarConfig, Domain, DomainSpec};
use hypkob::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of path-length quadrature.
    pub path: f64,
    /// Bound on `|J^2 + I|` accepted by `check`.
    pub structure: f64,
    /// Accepted `|rho|` for boundary images.
    pub boundary: f64,
    /// Floor on the contact singular value.
    pub contact_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            path: 1e-6,
            structure: 1e-10,
            boundary: 1e-8,
            contact_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub sampler: u64,
    pub pairs: u64,
    pub check: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            sampler: 7,
            pairs: 11,
            check: 0,
        }
    }
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            sampler: seed,
            pairs: seed,
            check: seed,
        }
    }
}

/// Run configuration as read from JSON. Relative paths are taken from the
/// directory of the configuration file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: PathBuf,
    pub structure: PathBuf,
    #[serde(default)]
    pub graph: GraphParams,
    #[serde(default)]
    pub collar: CollarConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub graph_cache: Option<PathBuf>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// A validated configuration with the loaded domain and structure.
#[derive(Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub domain: Domain,
    pub structure: Structure,
    /// SHA-256 of the configuration, domain and structure files.
    pub hash: String,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.path", t.path),
            ("tolerances.structure", t.structure),
            ("tolerances.boundary", t.boundary),
            ("tolerances.contact_floor", t.contact_floor),
            ("collar.safety_factor", self.collar.safety_factor),
            ("collar.tolerance", self.collar.tolerance),
            ("graph.anisotropy", self.graph.anisotropy),
            ("graph.contact_floor", self.graph.contact_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.graph.n_nodes < 2 || self.graph.k_neighbors == 0 {
            return Err(Error::Config("graph needs at least two nodes and one neighbour".into()));
        }
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<Loaded> {
    let bytes = read(path)?;
    let mut config: RunConfig = parse(path, &bytes)?;
    let base = path
        .canonicalize()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    config.domain = resolve(&base, &config.domain);
    config.structure = resolve(&base, &config.structure);
    config.output_dir = resolve(&base, &config.output_dir);
    config.graph_cache = config.graph_cache.as_deref().map(|p| resolve(&base, p));
    config.validate()?;

    let dbytes = read(&config.domain)?;
    let sbytes = read(&config.structure)?;
    let domain_spec: DomainSpec = parse(&config.domain, &dbytes)?;
    let structure_spec: StructureSpec = parse(&config.structure, &sbytes)?;
    let domain = Domain::from_spec(&domain_spec)?;
    let structure = Structure::from_spec(&structure_spec)?;
    if structure.dim() != domain.dim() {
        return Err(Error::Config(format!(
            "structure dimension {} does not match domain dimension {}",
            structure.dim(),
            domain.dim()
        )));
    }
    let mut h = Sha256::new();
    for part in [&bytes, &dbytes, &sbytes] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    Ok(Loaded {
        config,
        domain,
        structure,
        hash: hex::encode(h.finalize()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let c: RunConfig = serde_json::from_str(r#"{"domain": "d.json", "structure": "s.json"}"#).unwrap();
        assert_eq!(c.graph, GraphParams::default());
        assert_eq!(c.seeds, Seeds::default());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let c: RunConfig = serde_json::from_str(
            r#"{"domain": "d.json", "structure": "s.json", "tolerances": {"path": 0.0}}"#,
        )
        .unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: std::result::Result<RunConfig, _> =
            serde_json::from_str(r#"{"domain": "d.json", "structure": "s.json", "sed": 3}"#);
        assert!(r.is_err());
    }
}
