//! The cyclic quantum dilogarithm at an odd root of unity: the scalar
//! functions g, h, omega, [x] and delta, the R and R-bar tensors, charged
//! (symmetrized) tetrahedral tensors and the T, S matrices of its symmetries.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::decorations::ChargeTriple;
use crate::dilog::{li2, DilogError};
use crate::idealizer::ModularTriple;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("N must be odd and at least 3, got {0}")]
    BadOrder(usize),
    #[error("evaluation point {0} lies on a branch point")]
    OnCut(Complex64),
    #[error("argument must be nonzero")]
    Zero,
    #[error("non-finite value")]
    NonFinite,
    #[error("vanishing denominator in omega at j = {0}")]
    SingularOmega(usize),
    #[error("point is off the Fermat curve (residual {0:.3e})")]
    OffCurve(f64),
    #[error("charge triple {0:?} does not sum to 1")]
    BadCharge([i64; 3]),
    #[error("singular matrix")]
    Singular,
    #[error(transparent)]
    Dilog(#[from] DilogError),
}

/// N = 2p + 1, zeta = exp(2 i pi / N), and half = p + 1 standing for 1/2 mod N.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicParams {
    pub n: usize,
    pub p: usize,
    pub half: usize,
    pub zeta: Complex64,
    powers: Vec<Complex64>,
    g_one: Complex64,
}

impl CyclicParams {
    pub fn new(n: usize) -> Result<Self, QError> {
        if n < 3 || n % 2 == 0 {
            return Err(QError::BadOrder(n));
        }
        let powers: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect();
        let mut cp = CyclicParams { n, p: (n - 1) / 2, half: n.div_ceil(2), zeta: powers[1], powers, g_one: Complex64::new(1.0, 0.0) };
        cp.g_one = g_func(Complex64::new(1.0, 0.0), &cp)?;
        Ok(cp)
    }

    /// zeta^k for any integer k, read from an exact table.
    pub fn zeta_pow(&self, k: i64) -> Complex64 {
        self.powers[k.rem_euclid(self.n as i64) as usize]
    }

    /// k mod N as an index.
    pub fn modn(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    pub fn g_one(&self) -> Complex64 {
        self.g_one
    }

    /// nu = g(1) / |g(1)|.
    pub fn nu(&self) -> Complex64 {
        self.g_one / self.g_one.norm()
    }
}

/// Offsets tried, in order, for the cut direction of a logarithm whose
/// argument sits on the negative real axis.
const CUT_OFFSETS: [f64; 4] = [0.5, -0.5, 1.0, -1.0];
const CUT_CLEARANCE: f64 = 1e-9;

/// Logarithm with the standard branch, except that arguments within
/// `CUT_CLEARANCE` of the negative real axis use a rotated cut. Values off
/// the cut agree with the principal logarithm.
fn log_off_cut(u: Complex64) -> Result<Complex64, QError> {
    if !u.re.is_finite() || !u.im.is_finite() {
        return Err(QError::NonFinite);
    }
    if u.norm() == 0.0 {
        return Err(QError::OnCut(u));
    }
    let a = u.arg();
    if PI - a.abs() > CUT_CLEARANCE {
        return Ok(u.ln());
    }
    for eps in CUT_OFFSETS {
        let v = u * Complex64::from_polar(1.0, -eps);
        if PI - v.arg().abs() > CUT_CLEARANCE {
            return Ok(v.ln() + Complex64::new(0.0, eps));
        }
    }
    Err(QError::OnCut(u))
}

/// g(x) = prod_{j=1}^{N-1} (1 - x zeta^j)^{j/N}, principal powers.
pub fn g_func(x: Complex64, cp: &CyclicParams) -> Result<Complex64, QError> {
    let mut s = Complex64::new(0.0, 0.0);
    for j in 1..cp.n {
        let u = 1.0 - x * cp.zeta_pow(j as i64);
        if u.norm() < 1e-14 {
            return Err(QError::OnCut(x));
        }
        s += (j as f64 / cp.n as f64) * log_off_cut(u)?;
    }
    let v = s.exp();
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(QError::NonFinite);
    }
    Ok(v)
}

/// h(x) = x^{-p} g(x) / g(1).
pub fn h_func(x: Complex64, cp: &CyclicParams) -> Result<Complex64, QError> {
    if x.norm() == 0.0 {
        return Err(QError::Zero);
    }
    Ok((-(cp.p as f64) * log_off_cut(x)?).exp() * g_func(x, cp)? / cp.g_one)
}

/// A point (x, y, z) of the Fermat curve x^N + y^N = z^N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl CurvePoint {
    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        CurvePoint { x, y, z }
    }

    /// |x^N + y^N - z^N| relative to the largest term.
    pub fn residual(&self, cp: &CyclicParams) -> f64 {
        let n = cp.n as i32;
        let (a, b, c) = (self.x.powi(n), self.y.powi(n), self.z.powi(n));
        (a + b - c).norm() / a.norm().max(b.norm()).max(c.norm()).max(f64::MIN_POSITIVE)
    }

    /// The point (p1', p0', -p2') built from N-th roots of a p-vector.
    pub fn from_roots(r: [Complex64; 3]) -> Self {
        CurvePoint { x: r[1], y: r[0], z: -r[2] }
    }
}

/// omega(x, y, z | n) = prod_{j=1}^{n mod N} (y/z) / (1 - (x/z) zeta^j).
pub fn omega(pt: &CurvePoint, n: i64, cp: &CyclicParams) -> Result<Complex64, QError> {
    let m = cp.modn(n);
    let (r, t) = (pt.y / pt.z, pt.x / pt.z);
    let mut v = Complex64::new(1.0, 0.0);
    for j in 1..=m {
        let d = 1.0 - t * cp.zeta_pow(j as i64);
        if d.norm() < 1e-300 {
            return Err(QError::SingularOmega(j));
        }
        v *= r / d;
    }
    Ok(v)
}

/// [x] = (1 - x^N) / (N (1 - x)), equal to 1 at x = 1.
pub fn bracket(x: Complex64, cp: &CyclicParams) -> Complex64 {
    if (x - 1.0).norm() < 1e-14 {
        return Complex64::new(1.0, 0.0);
    }
    (1.0 - x.powi(cp.n as i32)) / (cp.n as f64 * (1.0 - x))
}

/// delta(n) = 1 iff n = 0 mod N.
pub fn delta(n: i64, cp: &CyclicParams) -> bool {
    cp.modn(n) == 0
}

/// Four-index tensor with entries T[a, b, c, d], a, b, c, d in 0..N.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl QTensor {
    pub fn zeros(n: usize) -> Self {
        QTensor { n, data: vec![Complex64::new(0.0, 0.0); n * n * n * n] }
    }

    pub fn index(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.n + b) * self.n + c) * self.n + d
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        self.data[self.index(a, b, c, d)]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: Complex64) {
        let i = self.index(a, b, c, d);
        self.data[i] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> QTensor {
        QTensor { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    fn from_fn(n: usize, f: impl Fn(usize, usize, usize, usize) -> Result<Complex64, QError> + Sync) -> Result<Self, QError> {
        let data: Result<Vec<Complex64>, QError> = (0..n * n * n * n)
            .into_par_iter()
            .map(|i| f(i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n))
            .collect();
        Ok(QTensor { n, data: data? })
    }

    /// B[a,b,c,d] = sum M0[a,i] M1[b,j] M2[c,k] M3[d,l] A[i,j,k,l].
    pub fn transform(&self, m: [&CMatrix; 4]) -> QTensor {
        let mut cur = self.clone();
        for (axis, mat) in m.iter().enumerate() {
            cur = cur.apply_axis(axis, mat);
        }
        cur
    }

    fn apply_axis(&self, axis: usize, m: &CMatrix) -> QTensor {
        let n = self.n;
        let mut out = QTensor::zeros(n);
        for i in 0..n * n * n * n {
            let mut idx = [i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n];
            let row = idx[axis];
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                idx[axis] = k;
                s += m.get(row, k) * self.get(idx[0], idx[1], idx[2], idx[3]);
            }
            out.data[i] = s;
        }
        out
    }

    /// out[i0,i1,i2,i3] = self[i_{axes[0]}, i_{axes[1]}, i_{axes[2]}, i_{axes[3]}].
    pub fn permute_axes(&self, axes: [usize; 4]) -> QTensor {
        let n = self.n;
        let mut out = QTensor::zeros(n);
        for i in 0..n * n * n * n {
            let idx = [i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n];
            out.data[i] = self.get(idx[axes[0]], idx[axes[1]], idx[axes[2]], idx[axes[3]]);
        }
        out
    }
}

/// R (direct) or R-bar (inverse) at a curve point.
pub fn r_matrix(pt: &CurvePoint, cp: &CyclicParams, inverse: bool) -> Result<QTensor, QError> {
    let n = cp.n;
    let hh = h_func(pt.z / pt.x, cp)?;
    let half = cp.half as i64;
    if !inverse {
        let om: Vec<Complex64> = (0..n as i64).map(|k| omega(pt, k, cp)).collect::<Result<_, _>>()?;
        QTensor::from_fn(n, |a, b, c, d| {
            let (a, b, c, d) = (a as i64, b as i64, c as i64, d as i64);
            if !delta(c + d - b, cp) {
                return Ok(Complex64::new(0.0, 0.0));
            }
            Ok(hh * cp.zeta_pow(a * d + half * a * a) * om[cp.modn(c - a)])
        })
    } else {
        let shifted = CurvePoint { x: pt.x / cp.zeta, ..*pt };
        let om: Vec<Complex64> = (0..n as i64).map(|k| omega(&shifted, k, cp)).collect::<Result<_, _>>()?;
        let pre = bracket(pt.x / pt.z, cp) / hh;
        QTensor::from_fn(n, |a, b, c, d| {
            let (a, b, c, d) = (a as i64, b as i64, c as i64, d as i64);
            if !delta(c + d - b, cp) {
                return Ok(Complex64::new(0.0, 0.0));
            }
            Ok(pre * cp.zeta_pow(-a * d - half * a * a) / om[cp.modn(c - a)])
        })
    }
}

/// Principal N-th roots of the normalized p-vector (w0 w2, -w0, 1).
pub fn principal_roots(w: &ModularTriple, cp: &CyclicParams) -> [Complex64; 3] {
    w.p_vector().map(|v| (v.ln() / cp.n as f64).exp())
}

/// Tensor of a tetrahedron: R at (p1', p0', -p2') if star_b = +1, R-bar otherwise.
pub fn tet_tensor(w: &ModularTriple, star_b: i8, cp: &CyclicParams) -> Result<QTensor, QError> {
    tet_tensor_roots(principal_roots(w, cp), star_b, cp)
}

pub fn tet_tensor_roots(roots: [Complex64; 3], star_b: i8, cp: &CyclicParams) -> Result<QTensor, QError> {
    r_matrix(&CurvePoint::from_roots(roots), cp, star_b < 0)
}

/// Charged tensor from chosen N-th roots p' of the p-vector.
pub fn sym_tensor_roots(roots: [Complex64; 3], star_b: i8, c: &ChargeTriple, cp: &CyclicParams) -> Result<QTensor, QError> {
    if c.0.iter().sum::<i64>() != 1 {
        return Err(QError::BadCharge(c.0));
    }
    let base = tet_tensor_roots(roots, star_b, cp)?;
    let n = cp.n;
    let half = cp.half as i64;
    let c0 = cp.modn(half * c.0[0]);
    let c1 = cp.modn(half * c.0[1]) as i64;
    let [p0, p1, p2] = roots;
    let inner = (-p1 / p2).powi(-c.0[1] as i32) * (-p2 / p0).powi(c.0[0] as i32);
    let pref = inner.powi(cp.p as i32);
    QTensor::from_fn(n, |a, b, cc, d| {
        let ph = cp.zeta_pow(c1 * (cc as i64 - a as i64));
        let (bb, ccc) = if star_b > 0 { ((b + n - c0) % n, (cc + n - c0) % n) } else { ((b + c0) % n, (cc + c0) % n) };
        Ok(pref * ph * base.get(a, bb, ccc, d))
    })
}

/// Charged tensor with principal roots of the p-vector of w.
pub fn sym_tensor(w: &ModularTriple, star_b: i8, c: &ChargeTriple, cp: &CyclicParams) -> Result<QTensor, QError> {
    sym_tensor_roots(principal_roots(w, cp), star_b, c, cp)
}

/// The p' roots of a tetrahedron from N-th roots of its six edge coordinates
/// (indexed by local edges (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)), with the sign
/// of each component fixed so that p'_j^N is proportional to the p-vector of w.
pub fn roots_from_edges(
    w: &ModularTriple,
    coords: [Complex64; 6],
    edge_roots: [Complex64; 6],
) -> Result<[Complex64; 3], QError> {
    let [c01, c02, c03, c12, c13, c23] = coords;
    let [r01, r02, r03, r12, r13, r23] = edge_roots;
    let q = [c01 * c23, c12 * c03, -(c02 * c13)];
    let mut pr = [r01 * r23, r12 * r03, -(r02 * r13)];
    let p = w.p_vector();
    if q.iter().any(|v| v.norm() == 0.0) {
        return Err(QError::Zero);
    }
    let base = p[0] / q[0];
    for j in 1..3 {
        let ratio = (p[j] / q[j]) / base;
        if ratio.re < 0.0 {
            pr[j] = -pr[j];
        }
    }
    Ok(pr)
}

/// Dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix { n, data: vec![Complex64::new(0.0, 0.0); n * n] };
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn mul(&self, o: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    data[i * n + j] += a * o.get(k, j);
                }
            }
        }
        CMatrix { n, data }
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        CMatrix { n, data: (0..n * n).map(|i| self.get(i % n, i / n).conj()).collect() }
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<CMatrix, QError> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = CMatrix::identity(n).data;
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm())).unwrap();
            if a[piv * n + col].norm() < 1e-14 {
                return Err(QError::Singular);
            }
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
                inv.swap(col * n + k, piv * n + k);
            }
            let d = a[col * n + col];
            for k in 0..n {
                a[col * n + k] /= d;
                inv[col * n + k] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * n + col];
                    for k in 0..n {
                        let (x, y) = (a[col * n + k], inv[col * n + k]);
                        a[r * n + k] -= f * x;
                        inv[r * n + k] -= f * y;
                    }
                }
            }
        }
        Ok(CMatrix { n, data: inv })
    }

    pub fn determinant(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm())).unwrap();
            if a[piv * n + col].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if piv != col {
                for k in 0..n {
                    a.swap(col * n + k, piv * n + k);
                }
                det = -det;
            }
            det *= a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for k in col..n {
                    let x = a[col * n + k];
                    a[r * n + k] -= f * x;
                }
            }
        }
        det
    }

    pub fn max_dist(&self, o: &CMatrix) -> f64 {
        self.data.iter().zip(&o.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// T[m,n] = nu zeta^{m^2/2} delta(m+n) and S[m,n] = zeta^{mn} / sqrt(N).
pub fn ts_matrices(cp: &CyclicParams) -> (CMatrix, CMatrix) {
    let n = cp.n;
    let nu = cp.nu();
    let mut t = CMatrix { n, data: vec![Complex64::new(0.0, 0.0); n * n] };
    let mut s = t.clone();
    let half = cp.half as i64;
    for m in 0..n {
        for k in 0..n {
            if (m + k) % n == 0 {
                t.data[m * n + k] = nu * cp.zeta_pow(half * (m * m) as i64);
            }
            s.data[m * n + k] = cp.zeta_pow((m * k) as i64) / (n as f64).sqrt();
        }
    }
    (t, s)
}

/// Whether a and b agree up to a factor +-zeta^k.
pub fn phase_equal(a: Complex64, b: Complex64, cp: &CyclicParams, tol: f64) -> Result<bool, QError> {
    if b.norm() == 0.0 {
        return Err(QError::Zero);
    }
    if (a.norm() - b.norm()).abs() / b.norm() >= tol {
        return Ok(false);
    }
    let k = (a / b).arg() * cp.n as f64 / PI;
    Ok((k - k.round()).abs() <= tol * cp.n as f64)
}

/// The ratio r with a = r b if the tensors are proportional within
/// `tol` relative to max |b|.
pub fn proportionality(a: &QTensor, b: &QTensor, tol: f64) -> Option<Complex64> {
    proportionality_slices(&a.data, &b.data, tol)
}

pub fn proportionality_slices(a: &[Complex64], b: &[Complex64], tol: f64) -> Option<Complex64> {
    let (imax, bmax) = b.iter().enumerate().map(|(i, z)| (i, z.norm())).max_by(|x, y| x.1.total_cmp(&y.1))?;
    if bmax == 0.0 || a.len() != b.len() {
        return None;
    }
    let r = a[imax] / b[imax];
    let dev = a.iter().zip(b).map(|(x, y)| (x - r * y).norm()).fold(0.0, f64::max);
    (dev <= tol * bmax.max(a.iter().map(|z| z.norm()).fold(0.0, f64::max))).then_some(r)
}

/// LHS / RHS of the large-N comparison
/// g(z/x) omega(x,y,z|n) ~ (y/z)^n exp[N/(2 i pi) (Li2((x/z) zeta^n) + (log(x/z))^2 - pi log(x/z) + pi^2)].
pub fn asymptotic_ratio(pt: &CurvePoint, n: i64, cp: &CyclicParams) -> Result<Complex64, QError> {
    let lhs = g_func(pt.z / pt.x, cp)? * omega(pt, n, cp)?;
    let t = pt.x / pt.z;
    let l = log_off_cut(t)?;
    let bracket_sum = li2(t * cp.zeta_pow(n))? + l * l - PI * l + PI * PI;
    let expo = Complex64::new(0.0, -(cp.n as f64) / (2.0 * PI)) * bracket_sum;
    let rhs = (pt.y / pt.z).powi(n as i32) * expo.exp();
    if rhs.norm() == 0.0 || !rhs.re.is_finite() {
        return Err(QError::NonFinite);
    }
    Ok(lhs / rhs)
}

/// The documented asymptotic family x = 1, z = 2, y = (2^N - 1)^{1/N} on the curve.
pub fn asymptotic_family_point(x: f64, z: f64, cp: &CyclicParams) -> CurvePoint {
    let nn = cp.n as f64;
    let y = ((z.powf(nn) - x.powf(nn)).ln() / nn).exp();
    CurvePoint::new(Complex64::new(x, 0.0), Complex64::new(y, 0.0), Complex64::new(z, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn params() {
        assert!(CyclicParams::new(4).is_err());
        assert!(CyclicParams::new(1).is_err());
        let p = CyclicParams::new(5).unwrap();
        assert_eq!((p.p, p.half), (2, 3));
        assert_eq!((2 * p.half) % p.n, 1);
        assert!((p.zeta.powi(5) - 1.0).norm() < 1e-14);
    }

    #[test]
    fn g_and_h_values() {
        let p = CyclicParams::new(3).unwrap();
        assert!((g_func(c(0.0, 0.0), &p).unwrap() - 1.0).norm() < 1e-15);
        assert!((p.g_one().norm() - 3f64.sqrt()).abs() < 1e-12);
        assert!((h_func(c(1.0, 0.0), &p).unwrap() - 1.0).norm() < 1e-14);
        assert_eq!(h_func(c(0.0, 0.0), &p), Err(QError::Zero));
        for n in [5, 7, 9] {
            let p = CyclicParams::new(n).unwrap();
            assert!((p.g_one().norm() - (n as f64).sqrt()).abs() < 1e-10);
        }
        let x = c(0.3, 0.0);
        let v = g_func(x, &p).unwrap() * g_func(x.conj(), &p).unwrap().conj();
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn omega_and_helpers() {
        let p = CyclicParams::new(3).unwrap();
        let pt = CurvePoint::new(c(0.4, 0.1), c(0.7, -0.2), c(1.0, 0.3));
        assert_eq!(omega(&pt, 0, &p).unwrap(), c(1.0, 0.0));
        let one = (pt.y / pt.z) / (1.0 - (pt.x / pt.z) * p.zeta);
        assert!((omega(&pt, 1, &p).unwrap() - one).norm() < 1e-15);
        assert_eq!(omega(&pt, 4, &p).unwrap(), omega(&pt, 1, &p).unwrap());
        assert!(delta(3, &p) && !delta(4, &p));
        assert_eq!(bracket(c(1.0, 0.0), &p), c(1.0, 0.0));
        assert!((bracket(c(2.0, 0.0), &p) - 7.0 / 3.0).norm() < 1e-14);
    }

    #[test]
    fn ts_properties() {
        for n in [3, 5] {
            let p = CyclicParams::new(n).unwrap();
            let (t, s) = ts_matrices(&p);
            assert!(s.mul(&s.adjoint()).max_dist(&CMatrix::identity(n)) < 1e-10);
            assert!((t.determinant().norm() - 1.0).abs() < 1e-10);
            assert!(t.inverse().is_ok());
            assert!((p.nu().norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_equality() {
        let p = CyclicParams::new(3).unwrap();
        assert!(phase_equal(c(1.0, 0.0), p.zeta, &p, 1e-9).unwrap());
        assert!(phase_equal(c(1.0, 0.0), -p.zeta * p.zeta, &p, 1e-9).unwrap());
        assert!(!phase_equal(c(1.0, 0.0), c(1.1, 0.0), &p, 1e-9).unwrap());
        assert!(phase_equal(c(1.0, 0.0), c(0.0, 0.0), &p, 1e-9).is_err());
    }

    #[test]
    fn charge_twist_values() {
        let p = CyclicParams::new(5).unwrap();
        assert_eq!(p.modn(p.half as i64), 3);
        assert_eq!(p.modn(-(p.half as i64)), 2);
    }

    #[test]
    fn cut_handling() {
        let p = CyclicParams::new(3).unwrap();
        // 1 - x zeta^j vanishes at x = zeta^{-j}
        assert!(matches!(g_func(p.zeta_pow(-1), &p), Err(QError::OnCut(_))));
        assert!(g_func(c(2.0, 0.0), &p).is_ok());
    }
}
