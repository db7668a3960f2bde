//! TOML document format for system specs.
//!
//! Documents are organized in 1-based per-species sections. Controls and
//! kernels may be omitted: a missing control block means a passive tracker
//! (zero gain, unit drive and decay, point kernel at zero) and a missing
//! kernel slot defaults to a point mass at delay zero. Parsing normalizes
//! everything through the kernel constructors, so two documents that
//! reorder keys or sections produce identical specs and identical hashes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kernel::{Kernel, KernelError};
use crate::model::{validate, ModelError, SystemSpec, Tabulated};

#[derive(Debug, Error)]
pub enum SchemaError {
    /// Syntax errors; the message carries line and column spans.
    #[error("TOML parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid document: {0}")]
    Document(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("spec failed validation:\n{0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    species: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SpeciesSection {
    b: f64,
    mu: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct InteractionSection {
    a: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ControlSection {
    c: f64,
    #[serde(default = "one")]
    d: f64,
    #[serde(default = "one")]
    e: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelDoc>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PerturbationSection {
    step: f64,
    values: Vec<f64>,
}

/// Kernel parameters as written in documents; building a [`Kernel`] routes
/// through the normalizing constructors.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelDoc {
    Point { atoms: Vec<AtomDoc> },
    Exponential { rate: f64 },
    Erlang { rate: f64, order: u32 },
    Table { step: f64, densities: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDoc {
    pub delay: f64,
    pub weight: f64,
}

impl KernelDoc {
    fn build(&self) -> Result<Kernel, KernelError> {
        match self {
            KernelDoc::Point { atoms } => {
                let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a.delay, a.weight)).collect();
                Kernel::point_mixture(&pairs)
            }
            KernelDoc::Exponential { rate } => Kernel::exponential(*rate),
            KernelDoc::Erlang { rate, order } => Kernel::erlang(*rate, *order),
            KernelDoc::Table { step, densities } => Kernel::table(*step, densities),
        }
    }

    fn from_kernel(kernel: &Kernel) -> KernelDoc {
        match kernel {
            Kernel::Point { atoms } => KernelDoc::Point {
                atoms: atoms
                    .iter()
                    .map(|a| AtomDoc {
                        delay: a.delay,
                        weight: a.weight,
                    })
                    .collect(),
            },
            Kernel::Exponential { rate } => KernelDoc::Exponential { rate: *rate },
            Kernel::Erlang { rate, order } => KernelDoc::Erlang {
                rate: *rate,
                order: *order,
            },
            Kernel::Table { step, densities } => KernelDoc::Table {
                step: *step,
                densities: densities.clone(),
            },
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<SystemSection>,
    species: BTreeMap<String, SpeciesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interaction: Option<InteractionSection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    controls: BTreeMap<String, ControlSection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    kernels: BTreeMap<String, BTreeMap<String, KernelDoc>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    perturbation: BTreeMap<String, PerturbationSection>,
}

fn parse_index(key: &str, n: usize, context: &str) -> Result<usize, SchemaError> {
    let index: usize = key.parse().map_err(|_| {
        SchemaError::Document(format!("{context} key '{key}' is not a 1-based index"))
    })?;
    if index == 0 || index > n {
        return Err(SchemaError::Document(format!(
            "{context} index {index} out of range 1..={n}"
        )));
    }
    Ok(index)
}

impl SpecDoc {
    fn build(&self) -> Result<SystemSpec, SchemaError> {
        let n = self.species.len();
        if n == 0 {
            return Err(SchemaError::Document(
                "document defines no [species.i] sections".into(),
            ));
        }
        if let Some(declared) = self.system.as_ref().and_then(|s| s.species) {
            if declared != n {
                return Err(SchemaError::Document(format!(
                    "[system] declares {declared} species but {n} sections are present"
                )));
            }
        }
        let mut b = vec![0.0; n];
        let mut mu = vec![0.0; n];
        let mut seen = vec![false; n];
        for (key, section) in &self.species {
            let index = parse_index(key, n, "species")?;
            b[index - 1] = section.b;
            mu[index - 1] = section.mu;
            seen[index - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(SchemaError::Document(format!(
                "species sections must cover 1..={n}; index {} is missing",
                missing + 1
            )));
        }

        let a = match &self.interaction {
            None => vec![vec![0.0; n]; n],
            Some(section) => {
                if section.a.len() != n || section.a.iter().any(|row| row.len() != n) {
                    return Err(SchemaError::Document(format!(
                        "interaction matrix must be {n}x{n}"
                    )));
                }
                section.a.clone()
            }
        };

        let delta_zero = Kernel::point(0.0).expect("zero delay is valid");
        let mut k = vec![delta_zero.clone(); n * n];
        for (row_key, row) in &self.kernels {
            let i = parse_index(row_key, n, "kernels")?;
            for (col_key, doc) in row {
                let j = parse_index(col_key, n, "kernels")?;
                k[(i - 1) * n + (j - 1)] = doc.build()?;
            }
        }

        let mut c = vec![0.0; n];
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; n];
        let mut g = vec![delta_zero; n];
        for (key, section) in &self.controls {
            let i = parse_index(key, n, "controls")? - 1;
            c[i] = section.c;
            d[i] = section.d;
            e[i] = section.e;
            if let Some(doc) = &section.kernel {
                g[i] = doc.build()?;
            }
        }

        let mut spec = SystemSpec::new(b, mu, a, k, c, d, e, g)?;
        for (key, section) in &self.perturbation {
            let i = parse_index(key, n, "perturbation")? - 1;
            spec.h[i] = Some(Tabulated {
                step: section.step,
                values: section.values.clone(),
            });
        }
        Ok(spec)
    }

    fn from_spec(spec: &SystemSpec) -> SpecDoc {
        let n = spec.n();
        let mut doc = SpecDoc {
            system: Some(SystemSection { species: Some(n) }),
            ..SpecDoc::default()
        };
        for i in 0..n {
            doc.species.insert(
                (i + 1).to_string(),
                SpeciesSection {
                    b: spec.b[i],
                    mu: spec.mu[i],
                },
            );
            doc.controls.insert(
                (i + 1).to_string(),
                ControlSection {
                    c: spec.c[i],
                    d: spec.d[i],
                    e: spec.e[i],
                    kernel: Some(KernelDoc::from_kernel(&spec.g[i])),
                },
            );
            let mut row = BTreeMap::new();
            for j in 0..n {
                row.insert(
                    (j + 1).to_string(),
                    KernelDoc::from_kernel(spec.kernel(i, j)),
                );
            }
            doc.kernels.insert((i + 1).to_string(), row);
            if let Some(tab) = &spec.h[i] {
                doc.perturbation.insert(
                    (i + 1).to_string(),
                    PerturbationSection {
                        step: tab.step,
                        values: tab.values.clone(),
                    },
                );
            }
        }
        doc.interaction = Some(InteractionSection { a: spec.a.clone() });
        doc
    }
}

/// Parse a document into a spec without semantic validation.
pub fn parse_spec(text: &str) -> Result<SystemSpec, SchemaError> {
    let doc: SpecDoc = toml::from_str(text)?;
    doc.build()
}

/// Parse and validate; the error carries the full violation report.
pub fn parse_validated(text: &str) -> Result<SystemSpec, SchemaError> {
    let spec = parse_spec(text)?;
    let report = validate(&spec);
    if !report.is_valid() {
        return Err(SchemaError::Validation(report.to_string()));
    }
    Ok(spec)
}

/// Read, parse and validate a spec file.
pub fn load_spec(path: impl AsRef<Path>) -> Result<SystemSpec, SchemaError> {
    let text = std::fs::read_to_string(path)?;
    parse_validated(&text)
}

/// Render a spec as a complete document (all kernel slots explicit).
pub fn to_toml(spec: &SystemSpec) -> String {
    toml::to_string(&SpecDoc::from_spec(spec)).expect("spec documents always serialize")
}

/// Canonical serialized form: field order is fixed by the spec structure,
/// so any two documents that parse to the same spec agree byte-for-byte.
pub fn canonical_json(spec: &SystemSpec) -> String {
    serde_json::to_string(spec).expect("specs always serialize")
}

/// Hex SHA-256 of the canonical form; stable under key and section
/// reordering of the source document.
pub fn spec_hash(spec: &SystemSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_json(spec).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
