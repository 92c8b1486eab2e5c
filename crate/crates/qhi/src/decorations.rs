//! Integer decorations of tetrahedra: flattenings (integer lifts of the
//! logarithms of the moduli) and charges (moduli-free triples relative to a
//! Hamiltonian subcomplex), their exact lattice solvers and transits.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex3::{edge_slot, EdgeData, Move, MoveTrace, Triangulation, LOCAL_EDGES};
use crate::idealizer::{moduli_transit, permutation_sign, IdealError, ITriangulation, ModularTriple};
use crate::lattice::{self, LatticeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlatteningTriple(pub [i64; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChargeTriple(pub [i64; 3]);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalFlattening {
    pub triples: Vec<FlatteningTriple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalCharge {
    pub triples: Vec<ChargeTriple>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecorError {
    #[error("integer system has no solution: {0}")]
    Infeasible(String),
    #[error("{what} is not an integer (defect {defect:.3e})")]
    Fractional { what: String, defect: f64 },
    #[error("Hamiltonian subcomplex required: {0}")]
    Hamiltonian(String),
    #[error("expected {expected} triples, got {got}")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Ideal(#[from] IdealError),
}

const INTEGRALITY_TOL: f64 = 1e-6;

fn near_integer(x: f64, what: impl Into<String>) -> Result<i64, DecorError> {
    let r = x.round();
    if (x - r).abs() > INTEGRALITY_TOL {
        return Err(DecorError::Fractional { what: what.into(), defect: (x - r).abs() });
    }
    Ok(r as i64)
}

/// l0 + l1 + l2 with log-branches l_j = log w_j + f_j i pi.
pub fn log_branch_sum(w: &ModularTriple, f: &FlatteningTriple) -> Complex64 {
    (0..3).map(|j| w.w[j].ln() + Complex64::new(0.0, PI * f.0[j] as f64)).sum()
}

pub fn is_flattening_local(w: &ModularTriple, f: &FlatteningTriple, tol: f64) -> bool {
    log_branch_sum(w, f).norm() < tol
}

/// The integer f0 + f1 + f2 forced on a tetrahedron by its moduli.
pub fn tet_flattening_sum(w: &ModularTriple) -> Result<i64, DecorError> {
    let s: Complex64 = w.w.iter().map(|z| z.ln()).sum();
    if s.re.abs() > INTEGRALITY_TOL {
        return Err(DecorError::Fractional { what: "log |w0 w1 w2|".into(), defect: s.re.abs() });
    }
    near_integer(-s.im / PI, "tetrahedron log sum / i pi")
}

/// Signed sums of log w around every edge.
fn edge_log_sums(ti: &ITriangulation, e: &EdgeData) -> Vec<Complex64> {
    let mut sums = vec![Complex64::new(0.0, 0.0); e.len()];
    for (tet, classes) in e.class_of.iter().enumerate() {
        let s = ti.base.signs[tet] as f64;
        for (le, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
            sums[classes[le]] += s * ti.moduli[tet].w[edge_slot(i, j)].ln();
        }
    }
    sums
}

/// Signed sums of log-branches around every edge; zero for a global flattening.
pub fn edge_branch_sums(ti: &ITriangulation, f: &GlobalFlattening) -> Vec<Complex64> {
    let e = ti.base.edges();
    let mut sums = edge_log_sums(ti, &e);
    for (tet, classes) in e.class_of.iter().enumerate() {
        let s = ti.base.signs[tet] as f64;
        for (le, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
            sums[classes[le]] += Complex64::new(0.0, s * PI * f.triples[tet].0[edge_slot(i, j)] as f64);
        }
    }
    sums
}

pub fn is_global_flattening(ti: &ITriangulation, f: &GlobalFlattening, tol: f64) -> bool {
    f.triples.len() == ti.moduli.len()
        && ti.moduli.iter().zip(&f.triples).all(|(w, t)| is_flattening_local(w, t, tol))
        && edge_branch_sums(ti, f).iter().all(|s| s.norm() < tol)
}

/// Neumann's edge vectors v_e(t, j) = C_e(t, j+1) - C_e(t, j-1), where
/// C_e(t, j) counts the abstract edges of t in slot j lying in e; with
/// `signed`, each tetrahedron's block is multiplied by its branching sign.
pub fn neumann_vectors(t: &Triangulation, signed: bool) -> Vec<Vec<i64>> {
    let e = t.edges();
    (0..e.len())
        .map(|edge| {
            let mut v = vec![0i64; 3 * t.tets.len()];
            for tet in 0..t.tets.len() {
                let c = e.slot_counts(tet, edge);
                let s = if signed { t.signs[tet] as i64 } else { 1 };
                for j in 0..3 {
                    v[3 * tet + j] = s * (c[(j + 1) % 3] - c[(j + 2) % 3]);
                }
            }
            v
        })
        .collect()
}

/// A base global flattening and the lattice of its class-preserving changes.
pub fn solve_flattenings(ti: &ITriangulation) -> Result<(GlobalFlattening, Vec<Vec<i64>>), DecorError> {
    let t = &ti.base;
    let n = t.tets.len();
    let e = t.edges();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (tet, w) in ti.moduli.iter().enumerate() {
        let mut r = vec![0i64; 3 * n];
        r[3 * tet..3 * tet + 3].copy_from_slice(&[1, 1, 1]);
        rows.push(r);
        rhs.push(tet_flattening_sum(w)?);
    }
    let logs = edge_log_sums(ti, &e);
    for edge in 0..e.len() {
        if logs[edge].re.abs() > 1e-6 {
            return Err(DecorError::Fractional { what: format!("log modulus around edge {edge}"), defect: logs[edge].re.abs() });
        }
        let mut r = vec![0i64; 3 * n];
        for &(tet, le) in &e.members[edge] {
            let (i, j) = LOCAL_EDGES[le];
            r[3 * tet + edge_slot(i, j)] += t.signs[tet] as i64;
        }
        rows.push(r);
        rhs.push(near_integer(-logs[edge].im / PI, format!("log sum around edge {edge} / i pi"))?);
    }
    let sol = lattice::solve(&rows, &rhs).map_err(|err| match err {
        LatticeError::Infeasible { row } => DecorError::Infeasible(format!("flattening equation {row}")),
        other => other.into(),
    })?;
    let x = lattice::short_solution(&sol);
    Ok((GlobalFlattening { triples: to_triples(&x).into_iter().map(FlatteningTriple).collect() }, neumann_vectors(t, false)))
}

fn to_triples(x: &[i64]) -> Vec<[i64; 3]> {
    x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn flatten_vec<T: Copy>(v: &[[T; 3]]) -> Vec<T> {
    v.iter().flat_map(|t| t.iter().copied()).collect()
}

/// base + k v for a lattice vector v.
pub fn shift_flattening(f: &GlobalFlattening, v: &[i64], k: i64) -> GlobalFlattening {
    let x: Vec<i64> = flatten_vec(&f.triples.iter().map(|t| t.0).collect::<Vec<_>>())
        .iter()
        .zip(v)
        .map(|(a, b)| a + k * b)
        .collect();
    GlobalFlattening { triples: to_triples(&x).into_iter().map(FlatteningTriple).collect() }
}

/// base + k v for a charge lattice vector v.
pub fn shift_charge(c: &GlobalCharge, v: &[i64], k: i64) -> GlobalCharge {
    let x: Vec<i64> = flatten_vec(&c.triples.iter().map(|t| t.0).collect::<Vec<_>>())
        .iter()
        .zip(v)
        .map(|(a, b)| a + k * b)
        .collect();
    GlobalCharge { triples: to_triples(&x).into_iter().map(ChargeTriple).collect() }
}

/// Transport of a flattening along a vertex permutation, matching
/// [`crate::idealizer::permute_tet`]: slots follow the edges and the values
/// are multiplied by the signature.
pub fn permute_flattening(f: &FlatteningTriple, perm: [usize; 4]) -> FlatteningTriple {
    let eps = permutation_sign(&perm).expect("a permutation of 0..4") as i64;
    let mut nf = [0i64; 3];
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        nf[edge_slot(a, b)] = eps * f.0[edge_slot(perm[a], perm[b])];
    }
    FlatteningTriple(nf)
}

/// Column layout of the unknowns of a transit: new tetrahedra sharing a
/// triple map to the same block.
fn transit_blocks(trace: &MoveTrace) -> (BTreeMap<usize, usize>, usize) {
    let shared = matches!(trace.mv, Move::ZeroTwo { .. } | Move::BubblePlus { .. });
    let mut block = BTreeMap::new();
    for (k, &t) in trace.added.iter().enumerate() {
        block.insert(t, if shared { 0 } else { k });
    }
    let nblocks = if trace.added.is_empty() { 0 } else if shared { 1 } else { trace.added.len() };
    (block, nblocks)
}

fn solve_local(rows: Vec<Vec<i64>>, rhs: Vec<i64>, what: &str) -> Result<Vec<i64>, DecorError> {
    if rows.first().is_none_or(|r| r.is_empty()) {
        return Ok(vec![]);
    }
    let sol = lattice::solve(&rows, &rhs).map_err(|err| match err {
        LatticeError::Infeasible { row } => DecorError::Infeasible(format!("{what} transit equation {row}")),
        other => other.into(),
    })?;
    Ok(lattice::short_solution(&sol))
}

/// Flattening on `new_ti`, reached from `f` by the move recorded in `trace`:
/// surviving tetrahedra keep their triples and the new ones get the minimal
/// norm integer solution of the local log-branch equations.
pub fn flattening_transit_to(
    new_ti: &ITriangulation,
    trace: &MoveTrace,
    f: &GlobalFlattening,
) -> Result<GlobalFlattening, DecorError> {
    let t = &new_ti.base;
    let mut triples: Vec<Option<FlatteningTriple>> = vec![None; t.tets.len()];
    for (o, m) in trace.tet_map.iter().enumerate() {
        if let Some(n) = m {
            triples[*n] = Some(f.triples[o]);
        }
    }
    let (block, nblocks) = transit_blocks(trace);
    let e = t.edges();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    if nblocks > 0 {
        let mut seen = BTreeSet::new();
        for &tet in &trace.added {
            if seen.insert(block[&tet]) {
                let mut r = vec![0i64; 3 * nblocks];
                r[3 * block[&tet]..3 * block[&tet] + 3].copy_from_slice(&[1, 1, 1]);
                rows.push(r);
                rhs.push(tet_flattening_sum(&new_ti.moduli[tet])?);
            }
        }
        let logs = edge_log_sums(new_ti, &e);
        for edge in 0..e.len() {
            if !e.members[edge].iter().any(|(tet, _)| block.contains_key(tet)) {
                continue;
            }
            let mut r = vec![0i64; 3 * nblocks];
            let mut known = 0i64;
            for &(tet, le) in &e.members[edge] {
                let (i, j) = LOCAL_EDGES[le];
                let s = t.signs[tet] as i64;
                let slot = edge_slot(i, j);
                match block.get(&tet) {
                    Some(&b) => r[3 * b + slot] += s,
                    None => known += s * triples[tet].expect("survivor").0[slot],
                }
            }
            rows.push(r);
            rhs.push(near_integer(-logs[edge].im / PI, format!("log sum around edge {edge} / i pi"))? - known);
        }
    }
    let x = solve_local(rows, rhs, "flattening")?;
    for &tet in &trace.added {
        let b = block[&tet];
        triples[tet] = Some(FlatteningTriple([x[3 * b], x[3 * b + 1], x[3 * b + 2]]));
    }
    Ok(GlobalFlattening { triples: triples.into_iter().map(|x| x.expect("assigned")).collect() })
}

/// Moduli transit followed by the log-branch transit.
pub fn flattening_transit(
    ti: &ITriangulation,
    f: &GlobalFlattening,
    mv: Move,
    new_modulus: Option<Complex64>,
) -> Result<(ITriangulation, GlobalFlattening, MoveTrace), DecorError> {
    let (nti, trace) = moduli_transit(ti, mv, new_modulus)?;
    let nf = flattening_transit_to(&nti, &trace, f)?;
    Ok((nti, nf, trace))
}

pub fn is_charge_local(c: &ChargeTriple) -> bool {
    c.0.iter().sum::<i64>() == 1
}

/// Unsigned charge sums around every edge.
pub fn edge_charge_sums(t: &Triangulation, c: &GlobalCharge) -> Vec<i64> {
    let e = t.edges();
    let mut sums = vec![0i64; e.len()];
    for (tet, classes) in e.class_of.iter().enumerate() {
        for (le, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
            sums[classes[le]] += c.triples[tet].0[edge_slot(i, j)];
        }
    }
    sums
}

fn hamiltonian_of(t: &Triangulation) -> Result<BTreeSet<usize>, DecorError> {
    let h = t.hamiltonian.as_ref().ok_or_else(|| DecorError::Hamiltonian("none given".into()))?;
    let e = t.edges();
    let mut covered = vec![false; t.num_vertices];
    for &id in h {
        let (a, b) = *e.endpoints.get(id).ok_or_else(|| DecorError::Hamiltonian(format!("edge id {id} out of range")))?;
        covered[a] = true;
        covered[b] = true;
    }
    if let Some(v) = covered.iter().position(|c| !c) {
        return Err(DecorError::Hamiltonian(format!("vertex {v} not in H")));
    }
    Ok(h.iter().copied().collect())
}

/// Target sum around an edge: 0 on H, 2 elsewhere.
fn charge_target(h: &BTreeSet<usize>, edge: usize) -> i64 {
    if h.contains(&edge) {
        0
    } else {
        2
    }
}

pub fn is_global_charge(t: &Triangulation, c: &GlobalCharge) -> bool {
    let Ok(h) = hamiltonian_of(t) else { return false };
    c.triples.len() == t.tets.len()
        && c.triples.iter().all(is_charge_local)
        && edge_charge_sums(t, c).iter().enumerate().all(|(e, &s)| s == charge_target(&h, e))
}

/// A base global charge for (T, H) and the lattice of its changes.
pub fn solve_charges(t: &Triangulation) -> Result<(GlobalCharge, Vec<Vec<i64>>), DecorError> {
    let h = hamiltonian_of(t)?;
    let n = t.tets.len();
    let e = t.edges();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for tet in 0..n {
        let mut r = vec![0i64; 3 * n];
        r[3 * tet..3 * tet + 3].copy_from_slice(&[1, 1, 1]);
        rows.push(r);
        rhs.push(1);
    }
    for edge in 0..e.len() {
        let mut r = vec![0i64; 3 * n];
        for &(tet, le) in &e.members[edge] {
            let (i, j) = LOCAL_EDGES[le];
            r[3 * tet + edge_slot(i, j)] += 1;
        }
        rows.push(r);
        rhs.push(charge_target(&h, edge));
    }
    let sol = lattice::solve(&rows, &rhs).map_err(|err| match err {
        LatticeError::Infeasible { row } => DecorError::Infeasible(format!("charge equation {row}")),
        other => other.into(),
    })?;
    let x = lattice::short_solution(&sol);
    Ok((GlobalCharge { triples: to_triples(&x).into_iter().map(ChargeTriple).collect() }, neumann_vectors(t, true)))
}

/// Charge on `new_t` reached from `c` by the move recorded in `trace`; new
/// tetrahedra get independent minimal norm triples.
pub fn charge_transit_to(new_t: &Triangulation, trace: &MoveTrace, c: &GlobalCharge) -> Result<GlobalCharge, DecorError> {
    let h = hamiltonian_of(new_t)?;
    let mut triples: Vec<Option<ChargeTriple>> = vec![None; new_t.tets.len()];
    for (o, m) in trace.tet_map.iter().enumerate() {
        if let Some(n) = m {
            triples[*n] = Some(c.triples[o]);
        }
    }
    let block: BTreeMap<usize, usize> = trace.added.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    let nb = block.len();
    let e = new_t.edges();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    if nb > 0 {
        for k in 0..nb {
            let mut r = vec![0i64; 3 * nb];
            r[3 * k..3 * k + 3].copy_from_slice(&[1, 1, 1]);
            rows.push(r);
            rhs.push(1);
        }
        for edge in 0..e.len() {
            if !e.members[edge].iter().any(|(tet, _)| block.contains_key(tet)) {
                continue;
            }
            let mut r = vec![0i64; 3 * nb];
            let mut known = 0;
            for &(tet, le) in &e.members[edge] {
                let (i, j) = LOCAL_EDGES[le];
                let slot = edge_slot(i, j);
                match block.get(&tet) {
                    Some(&b) => r[3 * b + slot] += 1,
                    None => known += triples[tet].expect("survivor").0[slot],
                }
            }
            rows.push(r);
            rhs.push(charge_target(&h, edge) - known);
        }
    }
    let x = solve_local(rows, rhs, "charge")?;
    for (&tet, &b) in &block {
        triples[tet] = Some(ChargeTriple([x[3 * b], x[3 * b + 1], x[3 * b + 2]]));
    }
    Ok(GlobalCharge { triples: triples.into_iter().map(|x| x.expect("assigned")).collect() })
}

/// Applies the move to the triangulation and transports the charge.
pub fn charge_transit(t: &Triangulation, c: &GlobalCharge, mv: Move) -> Result<(Triangulation, GlobalCharge, MoveTrace), DecorError> {
    let (nt, trace) = crate::complex3::apply_move_traced(t, mv).map_err(IdealError::from)?;
    let nc = charge_transit_to(&nt, &trace, c)?;
    Ok((nt, nc, trace))
}

/// A decorated tetrahedron of a local configuration whose edges are
/// identified by their endpoint labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTet<D> {
    pub labels: [usize; 4],
    pub sign: i8,
    pub data: D,
}

fn label_edges(labels: &[usize; 4]) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
    LOCAL_EDGES.iter().map(move |&(i, j)| ((labels[i], labels[j]), edge_slot(i, j)))
}

/// Log-branch transit on a local configuration: the new tetrahedra get
/// triples with the same signed log-branch sums as the old side on every
/// label pair they share, and zero on pairs only they contain.
pub fn local_flattening_transit(
    old: &[LocalTet<(ModularTriple, FlatteningTriple)>],
    new: &[LocalTet<ModularTriple>],
) -> Result<Vec<FlatteningTriple>, DecorError> {
    let nb = new.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (k, t) in new.iter().enumerate() {
        let mut r = vec![0i64; 3 * nb];
        r[3 * k..3 * k + 3].copy_from_slice(&[1, 1, 1]);
        rows.push(r);
        rhs.push(tet_flattening_sum(&t.data)?);
    }
    let mut old_sum: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for t in old {
        let (w, f) = t.data;
        for (pair, slot) in label_edges(&t.labels) {
            let lb = w.w[slot].ln() + Complex64::new(0.0, PI * f.0[slot] as f64);
            *old_sum.entry(pair).or_default() += t.sign as f64 * lb;
        }
    }
    let mut new_rows: BTreeMap<(usize, usize), (Vec<i64>, Complex64)> = BTreeMap::new();
    for (k, t) in new.iter().enumerate() {
        for (pair, slot) in label_edges(&t.labels) {
            let entry = new_rows.entry(pair).or_insert_with(|| (vec![0i64; 3 * nb], Complex64::new(0.0, 0.0)));
            entry.0[3 * k + slot] += t.sign as i64;
            entry.1 += t.sign as f64 * t.data.w[slot].ln();
        }
    }
    for (pair, (r, logs)) in new_rows {
        let target = old_sum.get(&pair).copied().unwrap_or_default();
        let d = (target - logs) / Complex64::new(0.0, PI);
        if d.im.abs() > INTEGRALITY_TOL {
            return Err(DecorError::Fractional { what: format!("log modulus on edge {pair:?}"), defect: d.im.abs() });
        }
        rows.push(r);
        rhs.push(near_integer(d.re, format!("log-branch defect on edge {pair:?}"))?);
    }
    let x = solve_local(rows, rhs, "flattening")?;
    Ok(to_triples(&x).into_iter().map(FlatteningTriple).collect())
}

/// Charge transit on a local configuration: equal unsigned sums on shared
/// label pairs and 2 on pairs only the new side contains.
pub fn local_charge_transit(old: &[LocalTet<ChargeTriple>], new: &[LocalTet<()>]) -> Result<Vec<ChargeTriple>, DecorError> {
    let nb = new.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..nb {
        let mut r = vec![0i64; 3 * nb];
        r[3 * k..3 * k + 3].copy_from_slice(&[1, 1, 1]);
        rows.push(r);
        rhs.push(1);
    }
    let mut old_sum: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for t in old {
        for (pair, slot) in label_edges(&t.labels) {
            *old_sum.entry(pair).or_default() += t.data.0[slot];
        }
    }
    let mut new_rows: BTreeMap<(usize, usize), Vec<i64>> = BTreeMap::new();
    for (k, t) in new.iter().enumerate() {
        for (pair, slot) in label_edges(&t.labels) {
            new_rows.entry(pair).or_insert_with(|| vec![0i64; 3 * nb])[3 * k + slot] += 1;
        }
    }
    for (pair, r) in new_rows {
        rows.push(r);
        rhs.push(old_sum.get(&pair).copied().unwrap_or(2));
    }
    let x = solve_local(rows, rhs, "charge")?;
    Ok(to_triples(&x).into_iter().map(ChargeTriple).collect())
}
