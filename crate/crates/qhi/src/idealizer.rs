//! PSL(2,C) cocycles on branched triangulations, their idealization into
//! cross-ratio moduli, edge compatibility, and the transits of moduli and
//! cocycles along moves.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex3::{
    apply_move_traced, edge_slot, face_vertices, ComplexError, Move, MoveTrace, Triangulation,
    LOCAL_EDGES,
};
use crate::moebius::{mobius_act, mobius_compose, Mobius, MobiusError, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdealError {
    #[error("coincident ideal vertices")]
    Coincident,
    #[error("degenerate modulus {0} (real, 0 or 1)")]
    Degenerate(Complex64),
    #[error("tetrahedron {tet} is not idealizable: {reason}")]
    NotIdealizable { tet: usize, reason: String },
    #[error("cocycle has {got} values but the triangulation has {expected} edges")]
    CocycleShape { got: usize, expected: usize },
    #[error("cocycle condition fails on face {face} of tetrahedron {tet} (residual {residual:.3e})")]
    FaceCondition { tet: usize, face: usize, residual: f64 },
    #[error("edge compatibility fails on edge {edge} (deviation {deviation:.3e})")]
    Compatibility { edge: usize, deviation: f64 },
    #[error("the 2-3 transit needs distinct moduli on the two tetrahedra")]
    EqualModuli,
    #[error("the move needs a modulus for the new tetrahedra")]
    MissingModulus,
    #[error("supplied modulus {supplied} differs from the forced value {forced}")]
    ForcedModulus { supplied: Complex64, forced: Complex64 },
    #[error("moduli around the removed edge are inconsistent (deviation {0:.3e})")]
    Inconsistent(f64),
    #[error("triangulation is not closed")]
    NotClosed,
    #[error("no idealizable perturbation found within {0} attempts")]
    Budget(usize),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Mobius(#[from] MobiusError),
}

/// One PSL(2,C) value per quotient edge, read from the smaller to the larger
/// endpoint label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cocycle {
    pub values: Vec<Mobius>,
}

fn psl_distance(a: &Mobius, b: &Mobius) -> f64 {
    let (ea, eb) = (a.entries(), b.entries());
    let plus = ea.iter().zip(&eb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let minus = ea.iter().zip(&eb).map(|(x, y)| (x + y).norm()).fold(0.0, f64::max);
    plus.min(minus)
}

impl Cocycle {
    pub fn trivial(num_edges: usize) -> Self {
        Cocycle { values: vec![Mobius::identity(); num_edges] }
    }

    /// Largest face residual |z(e0) z(e1) - z(e2)| (up to sign), with its location.
    pub fn max_face_residual(&self, t: &Triangulation) -> Result<(f64, usize, usize), IdealError> {
        let e = t.edges();
        if self.values.len() != e.len() {
            return Err(IdealError::CocycleShape { got: self.values.len(), expected: e.len() });
        }
        let mut worst = (0.0, 0, 0);
        for tet in 0..t.tets.len() {
            for k in 0..4 {
                let [i, j, l] = face_vertices(k);
                let z0 = &self.values[e.edge(tet, i, j)];
                let z1 = &self.values[e.edge(tet, j, l)];
                let z2 = &self.values[e.edge(tet, i, l)];
                let r = psl_distance(&mobius_compose(z0, z1), z2);
                if r > worst.0 {
                    worst = (r, tet, k);
                }
            }
        }
        Ok(worst)
    }

    /// Fails with the worst face if some face condition is violated beyond `tol`.
    pub fn check(&self, t: &Triangulation, tol: f64) -> Result<(), IdealError> {
        let (r, tet, face) = self.max_face_residual(t)?;
        if r > tol {
            return Err(IdealError::FaceCondition { tet, face, residual: r });
        }
        Ok(())
    }

    /// Entrywise complex conjugate (the conjugate character).
    pub fn conj(&self) -> Cocycle {
        Cocycle { values: self.values.iter().map(|m| m.conj()).collect() }
    }

    /// Edge coordinates -b(z(e)), the determinants of consecutive lifted vertex
    /// vectors; these determine the N-th roots used by the quantum tensors.
    pub fn edge_coordinates(&self) -> Vec<Complex64> {
        self.values.iter().map(|m| -m.b).collect()
    }
}

/// Cross-ratio moduli (w0, w1, w2) of a branched ideal tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularTriple {
    pub w: [Complex64; 3],
    pub star_w: i8,
}

const DEGENERACY_TOL: f64 = 1e-12;

impl ModularTriple {
    /// The triple generated by w0 through w_{j+1} = 1/(1 - w_j).
    pub fn from_w0(w0: Complex64) -> Result<Self, IdealError> {
        let one = Complex64::new(1.0, 0.0);
        if !w0.re.is_finite() || !w0.im.is_finite() {
            return Err(IdealError::Degenerate(w0));
        }
        let scale = w0.norm().max(1.0);
        if w0.norm() < DEGENERACY_TOL || (w0 - one).norm() < DEGENERACY_TOL || w0.im.abs() <= DEGENERACY_TOL * scale {
            return Err(IdealError::Degenerate(w0));
        }
        let w1 = one / (one - w0);
        let w2 = one / (one - w1);
        Ok(ModularTriple { w: [w0, w1, w2], star_w: if w0.im > 0.0 { 1 } else { -1 } })
    }

    /// The triple whose slot `j` holds `v`.
    pub fn from_slot(j: usize, v: Complex64) -> Result<Self, IdealError> {
        let one = Complex64::new(1.0, 0.0);
        let w0 = match j {
            0 => v,
            // w1 = v, w2 = 1/(1-v), w0 = 1/(1-w2)
            1 => one / (one - one / (one - v)),
            2 => one / (one - v),
            _ => panic!("slot {j} out of range"),
        };
        ModularTriple::from_w0(w0)
    }

    /// Homogeneous coordinates with w_j = -p_{j+1}/p_{j+2}, normalized p2 = 1.
    pub fn p_vector(&self) -> [Complex64; 3] {
        let [w0, _, w2] = self.w;
        [w0 * w2, -w0, Complex64::new(1.0, 0.0)]
    }

    /// Deviation from w_{j+1} = 1/(1-w_j) and w0 w1 w2 = -1.
    pub fn residual(&self) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        let [w0, w1, w2] = self.w;
        let r = [
            (w1 - one / (one - w0)).norm(),
            (w2 - one / (one - w1)).norm(),
            (w0 - one / (one - w2)).norm(),
            (w0 * w1 * w2 + one).norm(),
        ];
        r.into_iter().fold(0.0, f64::max)
    }

    pub fn conj(&self) -> ModularTriple {
        ModularTriple { w: self.w.map(|z| z.conj()), star_w: -self.star_w }
    }
}

/// A triangulation with per-tetrahedron moduli, optionally remembering the
/// cocycle it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ITriangulation {
    pub base: Triangulation,
    pub moduli: Vec<ModularTriple>,
    pub cocycle: Option<Cocycle>,
}

impl ITriangulation {
    pub fn edge_coordinates(&self) -> Option<Vec<Complex64>> {
        self.cocycle.as_ref().map(|c| c.edge_coordinates())
    }
}

fn points_distinct(u: &[Complex64]) -> bool {
    let scale = u.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            if (u[i] - u[j]).norm() <= DEGENERACY_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// w0 = (u2 - u1)(u3 - u0) / ((u2 - u0)(u3 - u1)) and the induced triple.
pub fn cross_ratio(u0: Complex64, u1: Complex64, u2: Complex64, u3: Complex64) -> Result<ModularTriple, IdealError> {
    if !points_distinct(&[u0, u1, u2, u3]) {
        return Err(IdealError::Coincident);
    }
    ModularTriple::from_w0(((u2 - u1) * (u3 - u0)) / ((u2 - u0) * (u3 - u1)))
}

/// Ideal vertices u0..u3 of a tetrahedron: 0, z0(0), z0 z1(0), z0 z1 z0'(0).
pub fn ideal_points(t: &Triangulation, z: &Cocycle, tet: usize) -> Result<[Point; 4], IdealError> {
    let e = t.edges();
    if z.values.len() != e.len() {
        return Err(IdealError::CocycleShape { got: z.values.len(), expected: e.len() });
    }
    let z0 = z.values[e.edge(tet, 0, 1)];
    let z1 = z.values[e.edge(tet, 1, 2)];
    let z0p = z.values[e.edge(tet, 2, 3)];
    let g1 = z0;
    let g2 = mobius_compose(&g1, &z1);
    let g3 = mobius_compose(&g2, &z0p);
    let origin = Point::Finite(Complex64::new(0.0, 0.0));
    Ok([origin, mobius_act(&g1, origin), mobius_act(&g2, origin), mobius_act(&g3, origin)])
}

pub fn idealize_tet(t: &Triangulation, z: &Cocycle, tet: usize) -> Result<ModularTriple, IdealError> {
    let pts = ideal_points(t, z, tet)?;
    let mut u = [Complex64::new(0.0, 0.0); 4];
    for (k, p) in pts.iter().enumerate() {
        u[k] = p.finite().ok_or_else(|| IdealError::NotIdealizable { tet, reason: format!("u{k} is infinite") })?;
    }
    cross_ratio(u[0], u[1], u[2], u[3]).map_err(|err| IdealError::NotIdealizable { tet, reason: err.to_string() })
}

/// Tolerance for the compatibility check performed by the constructors.
pub const COMPAT_TOL: f64 = 1e-8;

pub fn idealize(t: &Triangulation, z: &Cocycle) -> Result<ITriangulation, IdealError> {
    let moduli = (0..t.tets.len()).map(|i| idealize_tet(t, z, i)).collect::<Result<Vec<_>, _>>()?;
    let ti = ITriangulation { base: t.clone(), moduli, cocycle: Some(z.clone()) };
    let report = check_edge_compatibility(&ti)?;
    if report.max_deviation > COMPAT_TOL {
        return Err(IdealError::Compatibility { edge: report.worst_edge, deviation: report.max_deviation });
    }
    Ok(ti)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatReport {
    /// |prod w^{*_b} - 1| per quotient edge
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub worst_edge: usize,
}

/// Products of the moduli around every edge, each raised to the branching sign.
pub fn check_edge_compatibility(ti: &ITriangulation) -> Result<CompatReport, IdealError> {
    let t = &ti.base;
    if t.pairings.len() * 2 != t.tets.len() * 4 {
        return Err(IdealError::NotClosed);
    }
    let e = t.edges();
    let mut prods = vec![Complex64::new(1.0, 0.0); e.len()];
    for (tet, classes) in e.class_of.iter().enumerate() {
        let s = t.signs[tet];
        for (le, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
            let w = ti.moduli[tet].w[edge_slot(i, j)];
            prods[classes[le]] *= if s > 0 { w } else { w.inv() };
        }
    }
    let deviations: Vec<f64> = prods.iter().map(|p| (p - 1.0).norm()).collect();
    let (worst_edge, max_deviation) =
        deviations.iter().copied().enumerate().fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    Ok(CompatReport { deviations, max_deviation, worst_edge })
}

fn perm_sign(p: &[usize; 4]) -> i8 {
    let mut s = 1;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// Checks that `p` is a permutation of {0,1,2,3} and returns its signature.
pub fn permutation_sign(p: &[usize; 4]) -> Option<i8> {
    let mut seen = [false; 4];
    for &x in p {
        if x > 3 || seen[x] {
            return None;
        }
        seen[x] = true;
    }
    Some(perm_sign(p))
}

/// Transport of moduli along a vertex permutation: the edge (a, b) of the
/// new tetrahedron carries the old value of (p(a), p(b)), raised to the
/// signature of p.
pub fn permute_tet(w: &ModularTriple, perm: [usize; 4]) -> ModularTriple {
    let eps = permutation_sign(&perm).expect("a permutation of 0..4");
    let mut nw = [Complex64::new(0.0, 0.0); 3];
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let v = w.w[edge_slot(perm[a], perm[b])];
        nw[edge_slot(a, b)] = if eps > 0 { v } else { v.inv() };
    }
    ModularTriple { w: nw, star_w: w.star_w * eps }
}

/// The standard 2-3 transit: moduli x, y of the two old tetrahedra (omitting
/// vertices 0 and 1 of five ordered points) give the moduli of the three new
/// ones (omitting vertices 2, 3, 4).
pub fn standard_2_3(x: Complex64, y: Complex64) -> Result<[Complex64; 3], IdealError> {
    if (x - y).norm() <= DEGENERACY_TOL * x.norm().max(1.0) {
        return Err(IdealError::EqualModuli);
    }
    let one = Complex64::new(1.0, 0.0);
    Ok([y / x, (one - x.inv()) / (one - y.inv()), (one - x) / (one - y)])
}

/// Position of the fourth point given the modulus and three known points.
fn solve_point(w0: Complex64, pts: [Option<Complex64>; 4], k: usize) -> Result<Complex64, IdealError> {
    // double transpositions preserve the cross-ratio; move slot k to slot 3
    let perm: [usize; 4] = match k {
        0 => [3, 2, 1, 0],
        1 => [2, 3, 0, 1],
        2 => [1, 0, 3, 2],
        _ => [0, 1, 2, 3],
    };
    let v: Vec<Complex64> = perm[..3].iter().map(|&i| pts[i].expect("known point")).collect();
    let num = w0 * (v[2] - v[0]) * v[1] - (v[2] - v[1]) * v[0];
    let den = w0 * (v[2] - v[0]) - (v[2] - v[1]);
    if den.norm() <= DEGENERACY_TOL * num.norm().max(1.0) {
        return Err(IdealError::Degenerate(w0));
    }
    Ok(num / den)
}

/// Develops the ideal vertices of a tetrahedron with three known vertices.
fn develop(labels: &[usize; 4], w: &ModularTriple, chart: &mut HashMap<usize, Complex64>) -> Result<(), IdealError> {
    let pts = labels.map(|l| chart.get(&l).copied());
    let unknown: Vec<usize> = (0..4).filter(|&k| pts[k].is_none()).collect();
    match unknown.as_slice() {
        [] => Ok(()),
        [k] => {
            let u = solve_point(w.w[0], pts, *k)?;
            chart.insert(labels[*k], u);
            Ok(())
        }
        _ => panic!("development needs three known vertices"),
    }
}

fn chart_modulus(labels: &[usize; 4], chart: &HashMap<usize, Complex64>) -> Result<ModularTriple, IdealError> {
    let u = labels.map(|l| chart[&l]);
    cross_ratio(u[0], u[1], u[2], u[3])
}

// generic position of the third chart point
const CHART_POINT: Complex64 = Complex64::new(-0.37, 1.23);

fn initial_chart(a: usize, b: usize, c: usize) -> HashMap<usize, Complex64> {
    HashMap::from([(a, Complex64::new(0.0, 0.0)), (b, Complex64::new(1.0, 0.0)), (c, CHART_POINT)])
}

/// Moduli of the three tetrahedra {x, y, d, e} (x, y in abc) replacing the
/// two tetrahedra abcd and abce, in the order of `new_tets`.
pub fn two_three_moduli(
    old: [(&[usize; 4], &ModularTriple); 2],
    abc: [usize; 3],
    new_tets: &[[usize; 4]],
) -> Result<Vec<ModularTriple>, IdealError> {
    let mut chart = initial_chart(abc[0], abc[1], abc[2]);
    develop(old[0].0, old[0].1, &mut chart)?;
    let before = chart.len();
    develop(old[1].0, old[1].1, &mut chart)?;
    if chart.len() == before {
        return Err(IdealError::EqualModuli);
    }
    let pts: Vec<Complex64> = chart.values().copied().collect();
    if !points_distinct(&pts) {
        return Err(IdealError::EqualModuli);
    }
    new_tets.iter().map(|l| chart_modulus(l, &chart)).collect()
}

/// Moduli of abcd and abce replacing the three tetrahedra around the edge de.
pub fn three_two_moduli(
    old: &[(&[usize; 4], &ModularTriple)],
    d: usize,
    e: usize,
    abc: [usize; 3],
    new_tets: &[[usize; 4]],
) -> Result<Vec<ModularTriple>, IdealError> {
    let [a, b, c] = abc;
    let mut chart = initial_chart(d, e, a);
    let find = |missing: usize| old.iter().find(|(l, _)| !l.contains(&missing)).expect("bipyramid");
    let (lc, wc) = find(c);
    develop(lc, wc, &mut chart)?;
    let (lb, wb) = find(b);
    develop(lb, wb, &mut chart)?;
    let (la, wa) = find(a);
    let check = chart_modulus(la, &chart)?;
    let dev = (check.w[0] - wa.w[0]).norm() / wa.w[0].norm().max(1.0);
    if dev > 1e-8 {
        return Err(IdealError::Inconsistent(dev));
    }
    new_tets.iter().map(|l| chart_modulus(l, &chart)).collect()
}

/// Moduli on the triangulation after `mv`. For 0-2 the modulus of the new
/// tetrahedra is forced by compatibility along the split edge; `new_modulus`
/// is then only checked. For bubble+ it is required.
pub fn moduli_transit(
    ti: &ITriangulation,
    mv: Move,
    new_modulus: Option<Complex64>,
) -> Result<(ITriangulation, MoveTrace), IdealError> {
    let old = &ti.base;
    let (nt, trace) = apply_move_traced(old, mv)?;
    let survivors = nt.tets.len() - trace.added.len();
    let mut moduli: Vec<Option<ModularTriple>> = vec![None; nt.tets.len()];
    for (o, m) in trace.tet_map.iter().enumerate() {
        if let Some(n) = m {
            moduli[*n] = Some(ti.moduli[o]);
        }
    }
    let new_labels: Vec<[usize; 4]> = trace.added.iter().map(|&i| nt.tets[i]).collect();
    match mv {
        Move::TwoThree { face } => {
            let p = old.pairings[face];
            let abc = old.face_labels(p.tet_a, p.face_a);
            let olds = [
                (&old.tets[p.tet_a], &ti.moduli[p.tet_a]),
                (&old.tets[p.tet_b], &ti.moduli[p.tet_b]),
            ];
            let ws = two_three_moduli(olds, abc, &new_labels)?;
            for (k, w) in ws.into_iter().enumerate() {
                moduli[survivors + k] = Some(w);
            }
        }
        Move::ThreeTwo { edge } => {
            let (d, e) = old.edges().endpoints[edge];
            let olds: Vec<(&[usize; 4], &ModularTriple)> =
                trace.removed.iter().map(|&r| (&old.tets[r], &ti.moduli[r])).collect();
            let mut abc: Vec<usize> = new_labels[0].iter().copied().filter(|&x| x != d).collect();
            abc.sort();
            let ws = three_two_moduli(&olds, d, e, [abc[0], abc[1], abc[2]], &new_labels)?;
            for (k, w) in ws.into_iter().enumerate() {
                moduli[survivors + k] = Some(w);
            }
        }
        Move::ZeroTwo { .. } => {
            let forced = forced_lune_modulus(&nt, &trace, &moduli)?;
            if let Some(s) = new_modulus {
                if (s - forced.w[0]).norm() > 1e-8 * forced.w[0].norm().max(1.0) {
                    return Err(IdealError::ForcedModulus { supplied: s, forced: forced.w[0] });
                }
            }
            moduli[survivors] = Some(forced);
            moduli[survivors + 1] = Some(forced);
        }
        Move::BubblePlus { .. } => {
            let w = ModularTriple::from_w0(new_modulus.ok_or(IdealError::MissingModulus)?)?;
            moduli[survivors] = Some(w);
            moduli[survivors + 1] = Some(w);
        }
        Move::TwoZero { .. } | Move::BubbleMinus { .. } => {}
    }
    let moduli: Vec<ModularTriple> = moduli.into_iter().map(|m| m.expect("every tetrahedron has moduli")).collect();
    let out = ITriangulation { base: nt, moduli, cocycle: None };
    let report = check_edge_compatibility(&out)?;
    if report.max_deviation > COMPAT_TOL {
        return Err(IdealError::Compatibility { edge: report.worst_edge, deviation: report.max_deviation });
    }
    Ok((out, trace))
}

/// Compatibility on each half of the split edge determines the common
/// modulus of the two lune tetrahedra.
fn forced_lune_modulus(
    nt: &Triangulation,
    trace: &MoveTrace,
    moduli: &[Option<ModularTriple>],
) -> Result<ModularTriple, IdealError> {
    let e = nt.edges();
    let cd = (0..e.len()).find(|&i| trace.edge_map[i].is_none()).expect("lune creates an edge");
    let mut forced = Vec::new();
    for &u in &trace.added {
        let le_cd = (0..6).find(|&le| e.class_of[u][le] == cd).expect("lune tetrahedron meets its edge");
        let (i, j) = LOCAL_EDGES[le_cd];
        let rest: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
        let ab = e.edge(u, rest[0], rest[1]);
        let mut prod = Complex64::new(1.0, 0.0);
        for &(tet, le) in &e.members[ab] {
            if tet == u {
                continue;
            }
            let m = moduli[tet].ok_or(IdealError::MissingModulus)?;
            let (a, b) = LOCAL_EDGES[le];
            let w = m.w[edge_slot(a, b)];
            prod *= if nt.signs[tet] > 0 { w } else { w.inv() };
        }
        let v = if nt.signs[u] > 0 { prod.inv() } else { prod };
        forced.push(ModularTriple::from_slot(edge_slot(rest[0], rest[1]), v)?);
    }
    let dev = (forced[0].w[0] - forced[1].w[0]).norm() / forced[0].w[0].norm().max(1.0);
    if dev > 1e-8 {
        return Err(IdealError::Inconsistent(dev));
    }
    Ok(forced[0])
}

/// Cocycle on the triangulation after `mv`. Edges that persist keep their
/// value; new edges are forced by face conditions, except for the edges of a
/// positive bubble where one value is free: `seed` if given, otherwise drawn
/// from a generator seeded with `rng_seed`.
pub fn cocycle_transit(
    t: &Triangulation,
    z: &Cocycle,
    mv: Move,
    seed: Option<Mobius>,
    rng_seed: u64,
) -> Result<(Triangulation, Cocycle, MoveTrace), IdealError> {
    z.check(t, 1e-8)?;
    let (nt, trace) = apply_move_traced(t, mv)?;
    let e = nt.edges();
    let mut vals: Vec<Option<Mobius>> = trace.edge_map.iter().map(|m| m.map(|o| z.values[o])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seed = seed;
    loop {
        let mut progress = true;
        while progress {
            progress = false;
            for tet in 0..nt.tets.len() {
                for k in 0..4 {
                    let [i, j, l] = face_vertices(k);
                    let ids = [e.edge(tet, i, j), e.edge(tet, j, l), e.edge(tet, i, l)];
                    let known: Vec<Option<Mobius>> = ids.iter().map(|&x| vals[x]).collect();
                    let missing = known.iter().filter(|v| v.is_none()).count();
                    if missing != 1 {
                        continue;
                    }
                    // z0 z1 = z2
                    let (slot, value) = match (known[0], known[1], known[2]) {
                        (None, Some(z1), Some(z2)) => (0, mobius_compose(&z2, &z1.inverse())),
                        (Some(z0), None, Some(z2)) => (1, mobius_compose(&z0.inverse(), &z2)),
                        (Some(z0), Some(z1), None) => (2, mobius_compose(&z0, &z1)),
                        _ => unreachable!(),
                    };
                    vals[ids[slot]] = Some(value);
                    progress = true;
                }
            }
        }
        match vals.iter().position(|v| v.is_none()) {
            None => break,
            Some(free) => {
                let v = match seed.take() {
                    Some(s) => s,
                    None => random_mobius(&mut rng)?,
                };
                vals[free] = Some(v);
            }
        }
    }
    let nz = Cocycle { values: vals.into_iter().map(|v| v.expect("all edges assigned")).collect() };
    nz.check(&nt, 1e-8)?;
    for tet in 0..nt.tets.len() {
        idealize_tet(&nt, &nz, tet)?;
    }
    Ok((nt, nz, trace))
}

/// Identity plus entries uniform in the unit disk, normalized to det 1.
fn random_mobius(rng: &mut ChaCha8Rng) -> Result<Mobius, MobiusError> {
    let mut disk = || loop {
        let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if x * x + y * y < 1.0 {
            return Complex64::new(x, y);
        }
    };
    let one = Complex64::new(1.0, 0.0);
    let (a, b, c, d) = (one + disk(), disk(), disk(), one + disk());
    Mobius::new(a, b, c, d)
}

/// Default number of perturbation attempts.
pub const PERTURB_BUDGET: usize = 100;

fn idealizable(t: &Triangulation, z: &Cocycle) -> bool {
    (0..t.tets.len()).all(|i| idealize_tet(t, z, i).is_ok())
}

/// Multiplies z by the coboundary of a random 0-cochain c, z'(xy) = c_x^{-1}
/// z(xy) c_y, until every tetrahedron is idealizable. An already idealizable
/// cocycle is returned unchanged.
pub fn perturb_to_idealizable(t: &Triangulation, z: &Cocycle, seed: u64, budget: usize) -> Result<Cocycle, IdealError> {
    z.check(t, 1e-8)?;
    if idealizable(t, z) {
        return Ok(z.clone());
    }
    let e = t.edges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let mut c = Vec::with_capacity(t.num_vertices);
        for _ in 0..t.num_vertices {
            c.push(random_mobius(&mut rng)?);
        }
        let values = (0..e.len())
            .map(|i| {
                let (x, y) = e.endpoints[i];
                mobius_compose(&mobius_compose(&c[x].inverse(), &z.values[i]), &c[y])
            })
            .collect();
        let nz = Cocycle { values };
        if idealizable(t, &nz) {
            return Ok(nz);
        }
    }
    Err(IdealError::Budget(budget))
}

/// Geometric iff the branching sign matches the sign of Im w.
pub fn is_geometric(w: &ModularTriple, star_b: i8) -> bool {
    w.star_w == star_b
}

/// The coboundary of a vertex cochain c: z(xy) = c_x^{-1} c_y.
pub fn coboundary(t: &Triangulation, c: &[Mobius]) -> Cocycle {
    let e = t.edges();
    Cocycle {
        values: e.endpoints.iter().map(|&(x, y)| mobius_compose(&c[x].inverse(), &c[y])).collect(),
    }
}

/// Product of the stored SL(2,C) representatives along a path of
/// (edge, forward) steps; backward steps use the exact matrix inverse.
pub fn holonomy(z: &Cocycle, path: &[(usize, bool)]) -> Mobius {
    path.iter().fold(Mobius::identity(), |acc, &(e, fwd)| {
        let v = z.values[e];
        let m = if fwd { v } else { Mobius { a: v.d, b: -v.b, c: -v.c, d: v.a } };
        acc.mul_raw(&m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex3::builtin;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cross_ratio_examples() {
        let w = cross_ratio(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0)).unwrap();
        assert!((w.w[0] - c(0.25, -0.25)).norm() < 1e-15);
        assert_eq!(w.star_w, -1);
        let w = cross_ratio(c(0.0, 0.0), c(2.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)).unwrap();
        assert!((w.w[0] - c(0.4, 0.2)).norm() < 1e-15);
        assert_eq!(w.star_w, 1);
        assert!(matches!(
            cross_ratio(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)),
            Err(IdealError::Degenerate(_))
        ));
        assert!(matches!(
            cross_ratio(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(3.0, 1.0)),
            Err(IdealError::Coincident)
        ));
    }

    #[test]
    fn triple_relations() {
        let w = ModularTriple::from_w0(c(0.75, -0.25)).unwrap();
        assert!((w.w[1] - c(2.0, -2.0)).norm() < 1e-14);
        assert!((w.w[2] - c(-0.2, -0.4)).norm() < 1e-14);
        assert!(w.residual() < 1e-14);
        let p = w.p_vector();
        assert!((p[0] + p[1] + p[2]).norm() < 1e-12);
        for j in 0..3 {
            let back = ModularTriple::from_slot(j, w.w[j]).unwrap();
            assert!((back.w[0] - w.w[0]).norm() < 1e-13);
        }
    }

    #[test]
    fn permutations_act() {
        let w = ModularTriple::from_w0(c(0.0, 1.0)).unwrap();
        assert_eq!(permute_tet(&w, [0, 1, 2, 3]), w);
        let t = permute_tet(&w, [1, 0, 2, 3]);
        assert!((t.w[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(t.star_w, -1);
        assert!(t.residual() < 1e-14);
        let r = permute_tet(&w, [1, 2, 0, 3]);
        assert_eq!(r.star_w, 1);
        let mut a = r.w.to_vec();
        let mut b = w.w.to_vec();
        a.sort_by(|x, y| x.re.total_cmp(&y.re));
        b.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert_eq!(a, b);
        assert!(permutation_sign(&[0, 0, 1, 2]).is_none());
    }

    #[test]
    fn standard_transit_values() {
        let out = standard_2_3(c(1.0, 1.0), c(0.0, 2.0)).unwrap();
        assert!((out[0] - c(1.0, 1.0)).norm() < 1e-15);
        assert!((out[1] - c(0.6, 0.2)).norm() < 1e-15);
        assert!((out[2] - c(0.4, -0.2)).norm() < 1e-15);
        assert!(matches!(standard_2_3(c(1.0, 1.0), c(1.0, 1.0)), Err(IdealError::EqualModuli)));
    }

    #[test]
    fn development_matches_standard_formula() {
        let u = [c(0.1, 0.2), c(1.3, -0.4), c(-0.7, 0.9), c(0.5, 1.7), c(-1.1, -0.6)];
        let tet = |omit: usize| -> [usize; 4] {
            let v: Vec<usize> = (0..5).filter(|&k| k != omit).collect();
            [v[0], v[1], v[2], v[3]]
        };
        let w = |l: [usize; 4]| cross_ratio(u[l[0]], u[l[1]], u[l[2]], u[l[3]]).unwrap();
        let (t0, t1) = (tet(0), tet(1));
        let (w0, w1) = (w(t0), w(t1));
        let news = [tet(2), tet(3), tet(4)];
        let got = two_three_moduli([(&t0, &w0), (&t1, &w1)], [2, 3, 4], &news).unwrap();
        let std = standard_2_3(w0.w[0], w1.w[0]).unwrap();
        for k in 0..3 {
            assert!((got[k].w[0] - std[k]).norm() < 1e-12);
            assert!((got[k].w[0] - w(news[k]).w[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn idealize_tet_example() {
        // single-tetrahedron data through a hand cocycle on the boundary complex
        let t = builtin("boundary_4_simplex").unwrap();
        let e = t.edges();
        let one = c(1.0, 0.0);
        let tr = |x: Complex64| Mobius::new(one, x, c(0.0, 0.0), one).unwrap();
        // translations form a cocycle: z(xy) = translation by (s_y - s_x)
        let s = [c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(2.0, 1.0), c(0.3, 0.8)];
        let z = Cocycle { values: e.endpoints.iter().map(|&(x, y)| tr(s[y] - s[x])).collect() };
        z.check(&t, 1e-12).unwrap();
        // tetrahedron 4 has vertices 0..3 with u = (0, 1, 2, 2 + i)
        let w = idealize_tet(&t, &z, 4).unwrap();
        assert!((w.w[0] - c(0.75, -0.25)).norm() < 1e-14);
        let triv = Cocycle::trivial(e.len());
        assert!(idealize(&t, &triv).is_err());
    }

    #[test]
    fn perturbation_idealizes() {
        let t = builtin("boundary_4_simplex").unwrap();
        let triv = Cocycle::trivial(t.edges().len());
        let z = perturb_to_idealizable(&t, &triv, 1, PERTURB_BUDGET).unwrap();
        let ti = idealize(&t, &z).unwrap();
        assert!(check_edge_compatibility(&ti).unwrap().max_deviation < 1e-9);
        assert!((0..5).any(|i| !is_geometric(&ti.moduli[i], t.signs[i])));
        assert_eq!(perturb_to_idealizable(&t, &z, 7, 0).unwrap(), z);
        assert!(matches!(perturb_to_idealizable(&t, &triv, 1, 0), Err(IdealError::Budget(0))));
    }

    #[test]
    fn geometric_sign() {
        let w = ModularTriple::from_w0(c(0.0, 1.0)).unwrap();
        assert!(is_geometric(&w, 1));
        let v = ModularTriple::from_w0(c(0.25, -0.25)).unwrap();
        assert!(!is_geometric(&v, 1));
        assert!(is_geometric(&v, -1));
    }
}
