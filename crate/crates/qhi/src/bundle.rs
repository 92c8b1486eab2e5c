//! JSON bundles: a triangulation with optional cocycle, Hamiltonian edges,
//! decorations and configuration overrides.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex3::{builtin, validate_triangulation, ComplexError, FacePairing, Triangulation};
use crate::decorations::{ChargeTriple, FlatteningTriple, GlobalCharge, GlobalFlattening};
use crate::idealizer::Cocycle;
use crate::moebius::Mobius;

/// Largest accepted |det - 1| of a cocycle matrix.
pub const DET_TOL: f64 = 1e-9;
/// Largest accepted face-condition residual of a loaded cocycle.
pub const FACE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("validation failed [{check}]: {detail}")]
    Validation { check: String, detail: String },
}

impl BundleError {
    fn check(check: &str, detail: impl Into<String>) -> Self {
        BundleError::Validation { check: check.into(), detail: detail.into() }
    }
}

impl From<ComplexError> for BundleError {
    fn from(e: ComplexError) -> Self {
        BundleError::check("triangulation", e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_limit: Option<usize>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CocycleEntry {
    edge: usize,
    matrix: [[f64; 2]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    name: String,
    num_vertices: usize,
    tetrahedra: Vec<[usize; 4]>,
    pairings: Vec<FacePairing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signs: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hamiltonian: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cocycle: Option<Vec<CocycleEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flattening: Option<Vec<[i64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    charge: Option<Vec<[i64; 3]>>,
    #[serde(default, skip_serializing_if = "is_default")]
    config: Config,
}

fn is_default(c: &Config) -> bool {
    *c == Config::default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub triangulation: Triangulation,
    pub cocycle: Option<Cocycle>,
    pub flattening: Option<GlobalFlattening>,
    pub charge: Option<GlobalCharge>,
    pub config: Config,
}

impl Bundle {
    pub fn new(triangulation: Triangulation) -> Self {
        Bundle { triangulation, cocycle: None, flattening: None, charge: None, config: Config::default() }
    }
}

pub fn builtin_bundle(name: &str) -> Result<Bundle, BundleError> {
    Ok(Bundle::new(builtin(name)?))
}

pub fn read_bundle(path: &Path) -> Result<Bundle, BundleError> {
    let text = std::fs::read_to_string(path).map_err(|source| BundleError::Io { path: path.display().to_string(), source })?;
    parse_bundle(&text)
}

pub fn parse_bundle(text: &str) -> Result<Bundle, BundleError> {
    let raw: BundleFile =
        serde_json::from_str(text).map_err(|e| BundleError::Syntax { line: e.line(), column: e.column(), msg: e.to_string() })?;
    for (i, t) in raw.tetrahedra.iter().enumerate() {
        if t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BundleError::check("tetrahedra", format!("tetrahedron {i} labels {t:?} are not strictly increasing")));
        }
    }
    let t = Triangulation::new(raw.name, raw.num_vertices, raw.tetrahedra, raw.pairings, raw.signs, raw.hamiltonian)?;
    let report = validate_triangulation(&t);
    if let Some(bad) = report.checks.iter().find(|c| !c.ok) {
        return Err(BundleError::check(&bad.name, bad.detail.clone()));
    }
    let n = t.tets.len();
    let num_edges = t.edges().len();
    let cocycle = match raw.cocycle {
        None => None,
        Some(entries) => {
            let mut values: Vec<Option<Mobius>> = vec![None; num_edges];
            for en in entries {
                if en.edge >= num_edges {
                    return Err(BundleError::check("cocycle", format!("edge {} does not exist ({} edges)", en.edge, num_edges)));
                }
                if values[en.edge].is_some() {
                    return Err(BundleError::check("cocycle", format!("edge {} given twice", en.edge)));
                }
                let [a, b, c, d] = en.matrix.map(|[re, im]| Complex64::new(re, im));
                let det = a * d - b * c;
                if (det - 1.0).norm() > DET_TOL || !det.re.is_finite() {
                    return Err(BundleError::check("cocycle determinant", format!("edge {}: det = {det}", en.edge)));
                }
                values[en.edge] = Some(Mobius { a, b, c, d });
            }
            if let Some(missing) = values.iter().position(Option::is_none) {
                return Err(BundleError::check("cocycle", format!("edge {missing} has no matrix")));
            }
            let z = Cocycle { values: values.into_iter().map(Option::unwrap).collect() };
            let (r, tet, face) = z.max_face_residual(&t).map_err(|e| BundleError::check("cocycle", e.to_string()))?;
            if r > FACE_TOL {
                return Err(BundleError::check("cocycle face condition", format!("tetrahedron {tet} face {face}: residual {r:.3e}")));
            }
            Some(z)
        }
    };
    let flattening = match raw.flattening {
        None => None,
        Some(f) if f.len() == n => Some(GlobalFlattening { triples: f.into_iter().map(FlatteningTriple).collect() }),
        Some(f) => return Err(BundleError::check("flattening", format!("{} triples for {n} tetrahedra", f.len()))),
    };
    let charge = match raw.charge {
        None => None,
        Some(c) if c.len() == n => Some(GlobalCharge { triples: c.into_iter().map(ChargeTriple).collect() }),
        Some(c) => return Err(BundleError::check("charge", format!("{} triples for {n} tetrahedra", c.len()))),
    };
    if let Some(cfg_n) = raw.config.n {
        if cfg_n < 3 || cfg_n % 2 == 0 {
            return Err(BundleError::check("config", format!("N = {cfg_n} must be odd and at least 3")));
        }
    }
    Ok(Bundle { triangulation: t, cocycle, flattening, charge, config: raw.config })
}

/// Pretty JSON that parses back to an identical bundle.
pub fn emit_bundle(b: &Bundle) -> String {
    let t = &b.triangulation;
    let raw = BundleFile {
        name: t.name.clone(),
        num_vertices: t.num_vertices,
        tetrahedra: t.tets.clone(),
        pairings: t.pairings.clone(),
        signs: Some(t.signs.clone()),
        hamiltonian: t.hamiltonian.clone(),
        cocycle: b.cocycle.as_ref().map(|z| {
            z.values
                .iter()
                .enumerate()
                .map(|(edge, m)| CocycleEntry { edge, matrix: m.entries().map(|c| [c.re, c.im]) })
                .collect()
        }),
        flattening: b.flattening.as_ref().map(|f| f.triples.iter().map(|x| x.0).collect()),
        charge: b.charge.as_ref().map(|c| c.triples.iter().map(|x| x.0).collect()),
        config: b.config.clone(),
    };
    serde_json::to_string_pretty(&raw).expect("bundle serializes")
}
