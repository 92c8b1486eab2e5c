use proptest::prelude::*;

use qhi::bundle::{builtin_bundle, emit_bundle, parse_bundle};
use qhi::decorations::{is_global_charge, shift_charge, shift_flattening, solve_charges, tet_flattening_sum};
use qhi::dilog::{bloch_wigner, tet_rogers};
use qhi::idealizer::{cross_ratio, perturb_to_idealizable, PERTURB_BUDGET};
use qhi::moebius::{Mobius, Point};
use qhi::qdilog::{omega, principal_roots, r_matrix};
use qhi::rogers::rogers_sum;
use qhi::verify::DecoratedState;
use qhi::{builtin, congruent_mod, Cocycle, Complex64, CurvePoint, CyclicParams, FlatteningTriple, ModularTriple, PI2_6};

const UNKNOT: &str = "boundary_4_simplex_with_unknot";

/// Complex numbers in [-3,3]^2 away from 0, 1 and the real axis.
fn generic() -> impl Strategy<Value = Complex64> {
    (-3.0f64..3.0, -3.0f64..3.0)
        .prop_map(|(re, im)| Complex64::new(re, im))
        .prop_filter("generic point", |z| z.norm() > 0.05 && (z - 1.0).norm() > 0.05 && z.im.abs() > 1e-3)
}

fn decorated(seed: u64) -> DecoratedState {
    let t = builtin(UNKNOT).unwrap();
    let z = perturb_to_idealizable(&t, &Cocycle::trivial(t.edges().len()), seed, PERTURB_BUDGET).unwrap();
    DecoratedState::new(&t, &z).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bloch_wigner_six_fold_symmetry(z in generic()) {
        let one = Complex64::new(1.0, 0.0);
        let d = bloch_wigner(z).unwrap();
        prop_assert!((bloch_wigner(one - one / z).unwrap() - d).abs() < 1e-10);
        prop_assert!((bloch_wigner(one / z).unwrap() + d).abs() < 1e-10);
        prop_assert!((bloch_wigner(z.conj()).unwrap() + d).abs() < 1e-10);
    }

    #[test]
    fn conjugate_tetrahedron_conjugates_rogers(z in generic(), f0 in -3i64..=3, f1 in -3i64..=3) {
        let w = ModularTriple::from_w0(z).unwrap();
        let f = FlatteningTriple([f0, f1, tet_flattening_sum(&w).unwrap() - f0 - f1]);
        let r = tet_rogers(&w, &f).unwrap();
        let rc = tet_rogers(&w.conj(), &FlatteningTriple(f.0.map(|x| -x))).unwrap();
        prop_assert!((rc - r.conj()).norm() < 1e-10);
    }

    #[test]
    fn cross_ratio_is_mobius_invariant(u in prop::array::uniform4(generic()), m in prop::array::uniform3(generic())) {
        let g = Mobius::new(m[0], m[1], m[2], Complex64::new(1.0, 0.0) + m[1] * m[2] / m[0]).unwrap();
        let moved: Vec<Complex64> = u.iter().map(|&x| match g.act(Point::Finite(x)) {
            Point::Finite(y) => y,
            Point::Infinity => x,
        }).collect();
        prop_assume!(moved.iter().all(|y| y.norm() < 1e6));
        let a = cross_ratio(u[0], u[1], u[2], u[3]).unwrap();
        let b = cross_ratio(moved[0], moved[1], moved[2], moved[3]).unwrap();
        prop_assert!((a.w[0] - b.w[0]).norm() < 1e-8 * a.w[0].norm().max(1.0));
    }

    #[test]
    fn omega_recurrence_wraps_on_the_curve(z in generic(), n in prop::sample::select(vec![3usize, 5, 7])) {
        let cp = CyclicParams::new(n).unwrap();
        let w = ModularTriple::from_w0(z).unwrap();
        let pt = CurvePoint::from_roots(principal_roots(&w, &cp));
        let (r, t) = (pt.y / pt.z, pt.x / pt.z);
        for k in 0..n as i64 {
            let lhs = omega(&pt, k + 1, &cp).unwrap() * (1.0 - t * cp.zeta_pow(k + 1));
            let rhs = omega(&pt, k, &cp).unwrap() * r;
            prop_assert!((lhs - rhs).norm() < 1e-9 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn r_matrix_inverse_contracts_to_identity(z in generic(), n in prop::sample::select(vec![3usize, 5])) {
        let cp = CyclicParams::new(n).unwrap();
        let pt = CurvePoint::from_roots(principal_roots(&ModularTriple::from_w0(z).unwrap(), &cp));
        let r = r_matrix(&pt, &cp, false).unwrap();
        let rb = r_matrix(&pt, &cp, true).unwrap();
        for (a, b, e, f) in index_quads(n) {
            let mut s = Complex64::new(0.0, 0.0);
            for c in 0..n {
                for d in 0..n {
                    s += r.get(a, b, c, d) * rb.get(e, f, c, d);
                }
            }
            let id = if a == e && b == f { 1.0 } else { 0.0 };
            prop_assert!((s - id).norm() < 1e-10);
        }
    }
}

fn index_quads(n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..n.pow(4)).map(move |i| (i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rogers_sum_ignores_flattening_lattice(seed in 0u64..1000, picks in prop::collection::vec((0usize..64, -3i64..=3), 1..6)) {
        let s = decorated(seed);
        let (f0, basis) = qhi::decorations::solve_flattenings(&s.ti).unwrap();
        let base = rogers_sum(&s.ti, &f0).unwrap().value;
        let mut f = f0;
        for (i, k) in picks {
            f = shift_flattening(&f, &basis[i % basis.len()], k);
        }
        prop_assert!(congruent_mod(rogers_sum(&s.ti, &f).unwrap().value, base, PI2_6, 1e-8));
    }

    #[test]
    fn charge_lattice_moves_stay_global(picks in prop::collection::vec((0usize..64, -3i64..=3), 1..8)) {
        let t = builtin(UNKNOT).unwrap();
        let (mut c, basis) = solve_charges(&t).unwrap();
        for (i, k) in picks {
            c = shift_charge(&c, &basis[i % basis.len()], k);
            prop_assert!(is_global_charge(&t, &c));
        }
    }

    #[test]
    fn decorated_bundle_round_trips(seed in 0u64..1000, n in prop::sample::select(vec![3usize, 5, 7])) {
        let s = decorated(seed);
        let mut b = builtin_bundle(UNKNOT).unwrap();
        b.cocycle = Some(s.cocycle().clone());
        b.flattening = s.flattening.clone();
        b.charge = s.charge.clone();
        b.config.seed = Some(seed);
        b.config.n = Some(n);
        let text = emit_bundle(&b);
        let again = parse_bundle(&text).unwrap();
        prop_assert_eq!(&again, &b);
        prop_assert_eq!(emit_bundle(&again), text);
    }
}
