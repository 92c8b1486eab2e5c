//! Deterministic fixtures shared by the benchmarks.

use num_complex::Complex64;
use qhi::decorations::{solve_charges, solve_flattenings};
use qhi::idealizer::{idealize, perturb_to_idealizable, PERTURB_BUDGET};
use qhi::{apply_move, builtin, Cocycle, CurvePoint, CyclicParams, GlobalCharge, GlobalFlattening, ITriangulation, Move};

/// A decorated idealized triangulation ready for the invariants.
pub struct Fixture {
    pub ti: ITriangulation,
    pub flattening: GlobalFlattening,
    pub charge: GlobalCharge,
}

/// The unknot builtin after `extra` 2-3 moves, with a perturbed trivial character.
pub fn unknot_fixture(extra: usize, seed: u64) -> Fixture {
    let mut t = builtin("boundary_4_simplex_with_unknot").expect("builtin exists");
    for _ in 0..extra {
        let next = (0..t.pairings.len()).find_map(|face| apply_move(&t, Move::TwoThree { face }).ok());
        t = next.expect("some face admits a 2-3 move");
    }
    let z = perturb_to_idealizable(&t, &Cocycle::trivial(t.edges().len()), seed, PERTURB_BUDGET).expect("idealizable");
    let mut ti = idealize(&t, &z).expect("idealizes");
    ti.cocycle = Some(z);
    let (flattening, _) = solve_flattenings(&ti).expect("flattening exists");
    let (charge, _) = solve_charges(&t).expect("charge exists");
    Fixture { ti, flattening, charge }
}

/// A generic point on the curve x^N + y^N = z^N.
pub fn curve_point(cp: &CyclicParams) -> CurvePoint {
    let x = Complex64::new(0.7, 0.4);
    let z = Complex64::new(1.1, -0.3);
    let y = (z.powu(cp.n as u32) - x.powu(cp.n as u32)).powf(1.0 / cp.n as f64);
    CurvePoint::new(x, y, z)
}

/// Sample points for the dilogarithm kernels, covering all reflection branches.
pub fn dilog_samples() -> Vec<Complex64> {
    (0..64)
        .map(|k| {
            let t = k as f64 / 64.0 * std::f64::consts::TAU;
            Complex64::from_polar(0.2 + 2.5 * (k % 7) as f64 / 6.0, t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_consistent() {
        let f = unknot_fixture(1, 0);
        assert_eq!(f.ti.moduli.len(), 6);
        let cp = CyclicParams::new(5).unwrap();
        assert!(curve_point(&cp).residual(&cp) < 1e-10);
        assert!(dilog_samples().iter().all(|z| (z - 1.0).norm() > 1e-3 && z.norm() > 1e-3));
    }
}
