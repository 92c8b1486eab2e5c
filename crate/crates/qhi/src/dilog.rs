//! Euler, Rogers and Bloch-Wigner dilogarithms, and the lifted Rogers
//! function on the abelian cover of C \ {0, 1}.
//!
//! All logarithms use the principal branch, arg in (-pi, pi].

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::decorations::FlatteningTriple;
use crate::idealizer::ModularTriple;

/// pi^2 / 6, the modulus of the dilogarithmic invariant.
pub const PI2_6: f64 = PI * PI / 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DilogError {
    #[error("argument {0} lies on the branch cut")]
    BranchCut(Complex64),
    #[error("function undefined at {0}")]
    Pole(Complex64),
    #[error("({w0}; {f0}, {f1}, {f2}) is not a flattening")]
    NotFlattening { w0: Complex64, f0: i64, f1: i64, f2: i64 },
    #[error("degenerate modulus {0}")]
    Degenerate(Complex64),
}

/// A point (x; p, q) of the abelian cover used by the lifted Rogers function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverPoint {
    pub x: Complex64,
    pub p: i64,
    pub q: i64,
}

impl CoverPoint {
    pub fn new(x: Complex64, p: i64, q: i64) -> Self {
        CoverPoint { x, p, q }
    }
}

// B_{2k} / (2k+1)!, k = 1..
const BERNOULLI_COEFFS: [f64; 22] = [
    2.7777777777777778e-2,
    -2.7777777777777778e-4,
    4.7241118669690098e-6,
    -9.1857730746619636e-8,
    1.8978869988970999e-9,
    -4.0647616451442255e-11,
    8.9216910204564526e-13,
    -1.9939295860721076e-14,
    4.5189800296199182e-16,
    -1.0356517612181247e-17,
    2.3952186210261867e-19,
    -5.5817858743250093e-21,
    1.3091507554183213e-22,
    -3.0874198024267403e-24,
    7.3159756527022034e-26,
    -1.7408456572340007e-27,
    4.1576356446138997e-29,
    -9.9621484882846221e-31,
    2.3940344248961653e-32,
    -5.7683473553673901e-34,
    1.393179479647008e-35,
    -3.3721219654850895e-37,
];

fn on_real_axis(z: Complex64) -> bool {
    z.im == 0.0
}

/// Direct power series, for |z| <= 1/2.
fn li2_series(z: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut pow = z;
    for n in 1..200 {
        let term = pow / (n * n) as f64;
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        pow *= z;
    }
    sum
}

/// Series in u = -log(1 - z); valid for |z| <= 1 and Re z <= 1/2.
fn li2_bernoulli(z: Complex64) -> Complex64 {
    let u = -(Complex64::new(1.0, 0.0) - z).ln();
    let u2 = u * u;
    let mut sum = u - u2 / 4.0;
    let mut pow = u * u2;
    for c in BERNOULLI_COEFFS {
        let term = pow * c;
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        pow *= u2;
    }
    sum
}

/// Euler dilogarithm on its principal branch (cut along (1, +inf)).
pub fn li2(z: Complex64) -> Result<Complex64, DilogError> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(DilogError::Pole(z));
    }
    if on_real_axis(z) && z.re > 1.0 {
        return Err(DilogError::BranchCut(z));
    }
    Ok(li2_unchecked(z))
}

fn li2_unchecked(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if z == Complex64::new(0.0, 0.0) {
        return z;
    }
    if z == one {
        return Complex64::new(PI2_6, 0.0);
    }
    let r = z.norm();
    if r <= 0.5 {
        return li2_series(z);
    }
    if r > 1.0 {
        // Li2(z) + Li2(1/z) = -pi^2/6 - log(-z)^2 / 2
        let l = (-z).ln();
        return -li2_unchecked(one / z) - PI2_6 - 0.5 * l * l;
    }
    if z.re > 0.5 {
        // Li2(z) + Li2(1-z) = pi^2/6 - log(z) log(1-z)
        let w = one - z;
        return -li2_unchecked(w) + PI2_6 - z.ln() * w.ln();
    }
    li2_bernoulli(z)
}

/// Rogers dilogarithm L(x) = -pi^2/6 + log(x)log(1-x)/2 + Li2(x) on the cut
/// plane C \ ((-inf, 0) u (1, +inf)), normalized so that L(1) = 0.
pub fn rogers_l(x: Complex64) -> Result<Complex64, DilogError> {
    if on_real_axis(x) && (x.re < 0.0 || x.re > 1.0) {
        return Err(DilogError::BranchCut(x));
    }
    let one = Complex64::new(1.0, 0.0);
    if x == one {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if x == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(-PI2_6, 0.0));
    }
    Ok(-PI2_6 + 0.5 * x.ln() * (one - x).ln() + li2_unchecked(x))
}

/// Bloch-Wigner function D2(z) = Im Li2(z) + arg(1 - z) log|z|.
pub fn bloch_wigner(z: Complex64) -> Result<f64, DilogError> {
    let one = Complex64::new(1.0, 0.0);
    if z == Complex64::new(0.0, 0.0) || z == one {
        return Err(DilogError::Pole(z));
    }
    if on_real_axis(z) {
        return Ok(0.0);
    }
    if z.norm() > 1.0 {
        // D2(1/z) = -D2(z), keeps the evaluation inside the unit disk
        let w = one / z;
        return Ok(-(li2_unchecked(w).im + (one - w).arg() * w.norm().ln()));
    }
    Ok(li2_unchecked(z).im + (one - z).arg() * z.norm().ln())
}

/// Lifted Rogers function R(x; p, q) = L(x) + (i pi / 2)(p log(1-x) + q log x).
///
/// Well defined modulo pi^2 on the cover; compare values with [`congruent_mod`].
pub fn lifted_rogers(pt: CoverPoint) -> Result<Complex64, DilogError> {
    let one = Complex64::new(1.0, 0.0);
    if pt.x == Complex64::new(0.0, 0.0) || pt.x == one {
        return Err(DilogError::Pole(pt.x));
    }
    let l = rogers_l(pt.x)?;
    let i_pi_2 = Complex64::new(0.0, PI / 2.0);
    Ok(l + i_pi_2 * ((pt.p as f64) * (one - pt.x).ln() + (pt.q as f64) * pt.x.ln()))
}

/// R(w0; f0, f1) for a flattened tetrahedron.
pub fn tet_rogers(w: &ModularTriple, f: &FlatteningTriple) -> Result<Complex64, DilogError> {
    if !crate::decorations::is_flattening_local(w, f, 1e-9) {
        return Err(DilogError::NotFlattening { w0: w.w[0], f0: f.0[0], f1: f.0[1], f2: f.0[2] });
    }
    lifted_rogers(CoverPoint::new(w.w[0], f.0[0], f.0[1]))
}

/// Signed hyperbolic volume contribution star_b * D2(w0).
pub fn tet_volume(w: &ModularTriple, star_b: i8) -> Result<f64, DilogError> {
    let w0 = w.w[0];
    if w0.im == 0.0 {
        return Err(DilogError::Degenerate(w0));
    }
    Ok(star_b as f64 * bloch_wigner(w0)?)
}

/// True iff a and b agree modulo `modulus` (real) within `tol`.
pub fn congruent_mod(a: Complex64, b: Complex64, modulus: f64, tol: f64) -> bool {
    let d = a - b;
    let k = d.re / modulus;
    d.im.abs() < tol && (k - k.round()).abs() < tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn li2_special_values() {
        assert_eq!(li2(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!((li2(c(1.0, 0.0)).unwrap().re - 1.6449340668482264).abs() < 1e-15);
        let half = li2(c(0.5, 0.0)).unwrap();
        let ln2 = 2f64.ln();
        assert!((half.re - (PI * PI / 12.0 - ln2 * ln2 / 2.0)).abs() < 1e-14);
        assert!(matches!(li2(c(2.0, 0.0)), Err(DilogError::BranchCut(_))));
    }

    #[test]
    fn branches_agree_across_region_boundaries() {
        // points just inside/outside each region switch must give continuous values
        for &(re, im) in &[(0.5, 0.0001), (0.3, 0.4), (-0.5, 0.866), (0.5, 0.8660254), (0.99, 0.2)] {
            let z = c(re, im);
            let a = li2(z).unwrap();
            let b = li2(z * (1.0 + 1e-12)).unwrap();
            assert!((a - b).norm() < 1e-9, "{z}");
        }
    }

    #[test]
    fn rogers_values() {
        assert_eq!(rogers_l(c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!((rogers_l(c(0.0, 0.0)).unwrap().re + PI2_6).abs() < 1e-15);
        assert!((rogers_l(c(0.5, 0.0)).unwrap().re + PI * PI / 12.0).abs() < 1e-14);
        assert!(rogers_l(c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn bloch_wigner_values() {
        assert_eq!(bloch_wigner(c(0.3, 0.0)).unwrap(), 0.0);
        assert!(bloch_wigner(c(1.0, 0.0)).is_err());
        assert!(bloch_wigner(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn lifted_rogers_examples() {
        let ln2 = 2f64.ln();
        let v = lifted_rogers(CoverPoint::new(c(0.5, 0.0), 2, 0)).unwrap();
        assert!((v - c(-PI * PI / 12.0, -PI * ln2)).norm() < 1e-13);
        let w = lifted_rogers(CoverPoint::new(c(0.5, 0.0), 0, 2)).unwrap();
        assert!((v - w).norm() < 1e-13);
    }

    #[test]
    fn congruence() {
        assert!(congruent_mod(c(0.0, 0.0), c(PI2_6, 0.0), PI2_6, 1e-12));
        assert!(!congruent_mod(c(0.0, 0.0), c(PI2_6 / 2.0, 0.0), PI2_6, 1e-12));
        assert!(congruent_mod(c(1.0, 2.0), c(1.0 + 5.0 * PI2_6, 2.0), PI2_6, 1e-12));
    }
}
