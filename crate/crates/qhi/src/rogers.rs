//! The dilogarithmic invariant: signed sums of lifted Rogers dilogarithms over
//! a flattened idealized triangulation, its link-sensitive variant and the
//! formal class export.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decorations::{is_global_flattening, ChargeTriple, FlatteningTriple, GlobalCharge, GlobalFlattening};
use crate::dilog::{congruent_mod, tet_rogers, DilogError, PI2_6};
use crate::idealizer::{holonomy, Cocycle, ITriangulation};
use crate::moebius::Mobius;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RogersError {
    #[error("flattening is not valid for this idealized triangulation")]
    InvalidFlattening,
    #[error("holonomy trace along the link is zero")]
    ZeroTrace,
    #[error("expected {expected} triples, got {got}")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Dilog(#[from] DilogError),
}

/// Tolerance used when checking a flattening before summing.
pub const FLATTENING_CHECK_TOL: f64 = 1e-7;

/// A complex value defined modulo a real period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantValue {
    pub value: Complex64,
    pub modulus: f64,
    pub name: String,
    pub decoration_hash: u64,
}

impl InvariantValue {
    pub fn congruent(&self, other: &InvariantValue, tol: f64) -> bool {
        congruent_mod(self.value, other.value, self.modulus, tol)
    }

    /// Representative with real part in [0, modulus).
    pub fn canonical(&self) -> Complex64 {
        let re = self.value.re.rem_euclid(self.modulus);
        let re = if (self.modulus - re).abs() < 1e-12 { 0.0 } else { re };
        Complex64::new(re, self.value.im)
    }
}

impl fmt::Display for InvariantValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.canonical();
        let tidy = |x: f64| if x.abs() < 5e-13 { 0.0 } else { x };
        write!(f, "{:.12} {:+.12}i mod pi^2/6", tidy(c.re), tidy(c.im))
    }
}

fn decoration_hash(name: &str, f: &[FlatteningTriple]) -> u64 {
    let mut h = DefaultHasher::new();
    name.hash(&mut h);
    f.hash(&mut h);
    h.finish()
}

/// Sum of *_b R(w, f) over all tetrahedra, reported modulo pi^2/6.
pub fn rogers_sum(ti: &ITriangulation, f: &GlobalFlattening) -> Result<InvariantValue, RogersError> {
    if f.triples.len() != ti.moduli.len() {
        return Err(RogersError::Shape { expected: ti.moduli.len(), got: f.triples.len() });
    }
    if !is_global_flattening(ti, f, FLATTENING_CHECK_TOL) {
        return Err(RogersError::InvalidFlattening);
    }
    let mut value = Complex64::new(0.0, 0.0);
    for (tet, (w, fl)) in ti.moduli.iter().zip(&f.triples).enumerate() {
        value += ti.base.signs[tet] as f64 * tet_rogers(w, fl)?;
    }
    Ok(InvariantValue { value, modulus: PI2_6, name: ti.base.name.clone(), decoration_hash: decoration_hash(&ti.base.name, &f.triples) })
}

/// The link-sensitive value and the holonomy representative it used.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRogers {
    pub value: InvariantValue,
    pub holonomy: Mobius,
    pub trace: Complex64,
}

/// rogers_sum + (i pi / 2) log Tr(holonomy along the loop), the loop given as
/// (edge id, traversed along its orientation) steps.
pub fn link_rogers(
    ti: &ITriangulation,
    f: &GlobalFlattening,
    z: &Cocycle,
    path: &[(usize, bool)],
) -> Result<LinkRogers, RogersError> {
    let mut value = rogers_sum(ti, f)?;
    let hol = holonomy(z, path);
    let trace = hol.trace();
    if trace.norm() < 1e-12 {
        return Err(RogersError::ZeroTrace);
    }
    value.value += Complex64::new(0.0, PI / 2.0) * trace.ln();
    Ok(LinkRogers { value, holonomy: hol, trace })
}

/// One signed generator of the formal class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormalEntry {
    pub sign: i8,
    pub w0: Complex64,
    pub triple: [i64; 3],
}

#[derive(Debug, Clone, Copy)]
pub enum Decoration<'a> {
    Flattening(&'a GlobalFlattening),
    Charge(&'a GlobalCharge),
}

fn entry_cmp(a: &FormalEntry, b: &FormalEntry) -> Ordering {
    a.sign
        .cmp(&b.sign)
        .then(a.w0.re.total_cmp(&b.w0.re))
        .then(a.w0.im.total_cmp(&b.w0.im))
        .then(a.triple.cmp(&b.triple))
}

/// Deterministically ordered list of (sign, w0, decoration) entries.
pub fn export_formal_class(ti: &ITriangulation, d: Decoration<'_>) -> Result<Vec<FormalEntry>, RogersError> {
    let triples: Vec<[i64; 3]> = match d {
        Decoration::Flattening(f) => f.triples.iter().map(|t: &FlatteningTriple| t.0).collect(),
        Decoration::Charge(c) => c.triples.iter().map(|t: &ChargeTriple| t.0).collect(),
    };
    if triples.len() != ti.moduli.len() {
        return Err(RogersError::Shape { expected: ti.moduli.len(), got: triples.len() });
    }
    let mut out: Vec<FormalEntry> = ti
        .moduli
        .iter()
        .zip(triples)
        .enumerate()
        .map(|(tet, (w, triple))| FormalEntry { sign: ti.base.signs[tet], w0: w.w[0], triple })
        .collect();
    out.sort_by(entry_cmp);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex3::builtin;
    use crate::decorations::{shift_flattening, solve_flattenings};
    use crate::idealizer::{idealize, perturb_to_idealizable, PERTURB_BUDGET};

    fn boundary(seed: u64) -> (ITriangulation, Cocycle) {
        let t = builtin("boundary_4_simplex_with_unknot").unwrap();
        let z = perturb_to_idealizable(&t, &Cocycle::trivial(10), seed, PERTURB_BUDGET).unwrap();
        (idealize(&t, &z).unwrap(), z)
    }

    #[test]
    fn trivial_character_vanishes() {
        let (ti, _) = boundary(1);
        let (f, basis) = solve_flattenings(&ti).unwrap();
        let r = rogers_sum(&ti, &f).unwrap();
        let zero = InvariantValue { value: Complex64::new(0.0, 0.0), ..r.clone() };
        assert!(r.congruent(&zero, 1e-8), "{r}");
        assert!(r.value.im.abs() < 1e-8);
        let r2 = rogers_sum(&ti, &shift_flattening(&f, &basis[0], 1)).unwrap();
        assert!(r.congruent(&r2, 1e-8));
    }

    #[test]
    fn link_variant_on_trivial_character() {
        let (ti, z) = boundary(2);
        let (f, _) = solve_flattenings(&ti).unwrap();
        let r = rogers_sum(&ti, &f).unwrap();
        let loop_path = [(0, true), (0, false)];
        let l = link_rogers(&ti, &f, &z, &loop_path).unwrap();
        let expect = r.value + Complex64::new(0.0, PI / 2.0) * 2f64.ln();
        assert!((l.value.value - expect).norm() < 1e-10);
    }

    #[test]
    fn zero_trace_rejected() {
        let (ti, _) = boundary(3);
        let (f, _) = solve_flattenings(&ti).unwrap();
        let s = Mobius::new(Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        let z = Cocycle { values: vec![s; 10] };
        assert_eq!(link_rogers(&ti, &f, &z, &[(0, true)]).unwrap_err(), RogersError::ZeroTrace);
    }

    #[test]
    fn export_is_canonical() {
        let (ti, _) = boundary(4);
        let (f, _) = solve_flattenings(&ti).unwrap();
        let e = export_formal_class(&ti, Decoration::Flattening(&f)).unwrap();
        assert_eq!(e.len(), 5);
        let mut rev = ti.clone();
        rev.base.signs.iter_mut().for_each(|s| *s = -*s);
        let er = export_formal_class(&rev, Decoration::Flattening(&f)).unwrap();
        let mut flipped: Vec<FormalEntry> = e.iter().map(|x| FormalEntry { sign: -x.sign, ..*x }).collect();
        flipped.sort_by(entry_cmp);
        assert_eq!(er, flipped);
    }

    #[test]
    fn canonical_representative() {
        let v = InvariantValue { value: Complex64::new(-0.1, 2.0), modulus: PI2_6, name: "x".into(), decoration_hash: 0 };
        assert!((v.canonical().re - (PI2_6 - 0.1)).abs() < 1e-12);
        assert!(v.to_string().ends_with("mod pi^2/6"));
    }
}
