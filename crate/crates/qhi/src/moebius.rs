//! PSL(2,C) elements acting on the Riemann sphere.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobiusError {
    #[error("matrix is singular (det = {0})")]
    Singular(Complex64),
    #[error("non-finite matrix entry")]
    NonFinite,
}

/// A point of C u {inf}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Finite(Complex64),
    Infinity,
}

impl Point {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            Point::Finite(z) => Some(z),
            Point::Infinity => None,
        }
    }
}

impl From<Complex64> for Point {
    fn from(z: Complex64) -> Self {
        Point::Finite(z)
    }
}

/// A normalized 2x2 complex matrix [[a, b], [c, d]] of determinant 1,
/// representing an element of PSL(2,C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 4]", into = "[[f64; 2]; 4]")]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    /// Normalizes to det 1 and picks the sign making the first nonzero entry
    /// have argument in (-pi/2, pi/2].
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, MobiusError> {
        if [a, b, c, d].iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MobiusError::NonFinite);
        }
        let det = a * d - b * c;
        if det.norm() < 1e-300 {
            return Err(MobiusError::Singular(det));
        }
        let s = det.sqrt().inv();
        let mut m = Mobius { a: a * s, b: b * s, c: c * s, d: d * s };
        m.fix_sign();
        Ok(m)
    }

    /// Builds from entries already of determinant 1 (within `tol`), keeping them
    /// apart from the sign convention.
    pub fn from_det_one(entries: [Complex64; 4], tol: f64) -> Result<Self, MobiusError> {
        let [a, b, c, d] = entries;
        let det = a * d - b * c;
        if (det - 1.0).norm() > tol {
            return Err(MobiusError::Singular(det));
        }
        Mobius::new(a, b, c, d)
    }

    fn fix_sign(&mut self) {
        let lead = [self.a, self.b, self.c, self.d]
            .into_iter()
            .find(|z| z.norm() > 1e-300)
            .unwrap_or(self.a);
        let arg = lead.arg();
        let keep = arg > -std::f64::consts::FRAC_PI_2 && arg <= std::f64::consts::FRAC_PI_2;
        if !keep {
            self.a = -self.a;
            self.b = -self.b;
            self.c = -self.c;
            self.d = -self.d;
        }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mobius { a: one, b: zero, c: zero, d: one }
    }

    pub fn translation(t: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Mobius::new(one, t, Complex64::new(0.0, 0.0), one).expect("translation is invertible")
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        let mut m = Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a };
        m.fix_sign();
        m
    }

    /// Matrix product without the sign normalization (SL(2,C) product of the
    /// stored representatives).
    pub fn mul_raw(&self, o: &Mobius) -> Mobius {
        Mobius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn conj(&self) -> Mobius {
        let mut m = Mobius { a: self.a.conj(), b: self.b.conj(), c: self.c.conj(), d: self.d.conj() };
        m.fix_sign();
        m
    }

    pub fn act(&self, pt: Point) -> Point {
        mobius_act(self, pt)
    }
}

impl fmt::Display for Mobius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

impl TryFrom<[[f64; 2]; 4]> for Mobius {
    type Error = MobiusError;
    fn try_from(v: [[f64; 2]; 4]) -> Result<Self, Self::Error> {
        let e = v.map(|[re, im]| Complex64::new(re, im));
        Mobius::from_det_one(e, 1e-9)
    }
}

impl From<Mobius> for [[f64; 2]; 4] {
    fn from(m: Mobius) -> Self {
        m.entries().map(|z| [z.re, z.im])
    }
}

/// Matrix product, renormalized.
pub fn mobius_compose(m1: &Mobius, m2: &Mobius) -> Mobius {
    let p = m1.mul_raw(m2);
    Mobius::new(p.a, p.b, p.c, p.d).expect("product of invertible matrices")
}

/// (a pt + b) / (c pt + d) with the usual conventions at infinity.
pub fn mobius_act(m: &Mobius, pt: Point) -> Point {
    match pt {
        Point::Infinity => {
            if m.c.norm() == 0.0 {
                Point::Infinity
            } else {
                Point::Finite(m.a / m.c)
            }
        }
        Point::Finite(z) => {
            let den = m.c * z + m.d;
            if den.norm() == 0.0 {
                Point::Infinity
            } else {
                Point::Finite((m.a * z + m.b) / den)
            }
        }
    }
}

/// Equality in PSL(2,C): entrywise up to a global sign.
pub fn psl_equal(m1: &Mobius, m2: &Mobius, tol: f64) -> bool {
    let e1 = m1.entries();
    let e2 = m2.entries();
    let plus = e1.iter().zip(&e2).all(|(x, y)| (x - y).norm() < tol);
    let minus = e1.iter().zip(&e2).all(|(x, y)| (x + y).norm() < tol);
    plus || minus
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn compose_translations() {
        let t1 = Mobius::translation(c(1.0, 0.0));
        let t2 = mobius_compose(&t1, &t1);
        assert!(psl_equal(&t2, &Mobius::translation(c(2.0, 0.0)), 1e-14));
        let ti = Mobius::translation(c(0.0, 1.0));
        assert!(psl_equal(&mobius_compose(&t1, &ti), &Mobius::translation(c(1.0, 1.0)), 1e-14));
    }

    #[test]
    fn inverse_and_sign() {
        let m = Mobius::new(c(2.0, 1.0), c(0.5, 0.0), c(1.0, -1.0), c(3.0, 0.0)).unwrap();
        assert!((m.det() - 1.0).norm() < 1e-14);
        assert!(psl_equal(&mobius_compose(&m, &m.inverse()), &Mobius::identity(), 1e-12));
        let neg = Mobius { a: -m.a, b: -m.b, c: -m.c, d: -m.d };
        assert!(psl_equal(&m, &neg, 1e-15));
        assert!(!psl_equal(&Mobius::identity(), &Mobius::translation(c(1.0, 0.0)), 1e-9));
        // normalized sign: first entry has nonnegative real part
        let flipped = Mobius::new(-m.a, -m.b, -m.c, -m.d).unwrap();
        assert!(flipped.entries().iter().zip(m.entries()).all(|(x, y)| (x - y).norm() < 1e-15));
    }

    #[test]
    fn actions() {
        let t = Mobius::translation(c(1.0, 0.0));
        assert_eq!(mobius_act(&t, Point::Finite(c(0.0, 0.0))), Point::Finite(c(1.0, 0.0)));
        let s = Mobius::new(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(mobius_act(&s, Point::Finite(c(1.0, 0.0))), Point::Finite(c(-1.0, 0.0)));
        let l = Mobius::new(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert_eq!(mobius_act(&l, Point::Infinity), Point::Finite(c(1.0, 0.0)));
        assert_eq!(mobius_act(&s, Point::Finite(c(0.0, 0.0))), Point::Infinity);
    }

    #[test]
    fn serde_round_trip() {
        let m = Mobius::new(c(2.0, 1.0), c(0.5, 0.0), c(1.0, -1.0), c(3.0, 0.0)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: Mobius = serde_json::from_str(&s).unwrap();
        assert!(psl_equal(&m, &back, 1e-15));
        let bad = "[[2,0],[0,0],[0,0],[1,0]]";
        assert!(serde_json::from_str::<Mobius>(bad).is_err());
    }
}
