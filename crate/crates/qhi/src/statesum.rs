//! State sums over the dual 1-skeleton: the operator network of a closed
//! branched triangulation, greedy contraction plans, planned and brute-force
//! contraction, and the normalized invariant H_N.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex3::Triangulation;
use crate::decorations::GlobalCharge;
use crate::idealizer::{idealize, Cocycle, IdealError, ITriangulation};
use crate::qdilog::{
    phase_equal, roots_from_edges, principal_roots, sym_tensor_roots, tet_tensor_roots, CyclicParams, QError, QTensor,
};

/// Local face carried by each tensor axis: (alpha, beta, gamma, delta) are the
/// states on the faces opposite local vertices 3, 1, 2 and 0.
pub const INDEX_FACES: [usize; 4] = [3, 1, 2, 0];

/// Default bound on the entries of any intermediate tensor.
pub const DEFAULT_MEMORY_LIMIT: usize = 1 << 28;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateSumError {
    #[error("triangulation is not closed: face {face} of tetrahedron {tet} is unpaired")]
    NotClosed { tet: usize, face: usize },
    #[error("plan needs {needed} entries, above the memory limit {limit}")]
    MemoryLimit { needed: usize, limit: usize },
    #[error("plan does not match the graph: {0}")]
    PlanMismatch(String),
    #[error("expected {expected} tensors, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("brute force needs N^{arcs} states, too many")]
    TooManyStates { arcs: usize },
    #[error("cocycle required for edge-coordinate roots")]
    NoCocycle,
    #[error(transparent)]
    Quantum(#[from] QError),
    #[error(transparent)]
    Ideal(#[from] IdealError),
}

/// One arc of the dual graph, oriented from the tetrahedron where its face
/// is outgoing to the one where it is incoming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub from: (usize, usize),
    pub to: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualGraph {
    pub num_nodes: usize,
    pub arcs: Vec<Arc>,
    /// Arc id on each tensor axis of each node, in `INDEX_FACES` order.
    pub legs: Vec<[usize; 4]>,
    /// Whether face k of each node is incoming.
    pub incoming: Vec<[bool; 4]>,
}

/// Face k of a tetrahedron with branching sign s is incoming iff s (-1)^k = -1.
pub fn face_incoming(sign: i8, k: usize) -> bool {
    let o = if k % 2 == 0 { sign } else { -sign };
    o < 0
}

pub fn dual_graph(t: &Triangulation) -> Result<DualGraph, StateSumError> {
    let n = t.tets.len();
    let mut arcs = Vec::with_capacity(t.pairings.len());
    for p in &t.pairings {
        let [a, b] = p.sides();
        let (from, to) = if face_incoming(t.signs[a.0], a.1) { (b, a) } else { (a, b) };
        arcs.push(Arc { from, to });
    }
    let mut legs = vec![[0usize; 4]; n];
    let incoming: Vec<[bool; 4]> = (0..n).map(|tet| std::array::from_fn(|k| face_incoming(t.signs[tet], k))).collect();
    for (tet, l) in legs.iter_mut().enumerate() {
        for (axis, &k) in INDEX_FACES.iter().enumerate() {
            l[axis] = t.face_id(tet, k).ok_or(StateSumError::NotClosed { tet, face: k })?;
        }
    }
    Ok(DualGraph { num_nodes: n, arcs, legs, incoming })
}

/// One pairwise merge: operands are node ids (leaves 0..n, then one id per
/// previous step), `contracted` the arcs summed over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStep {
    pub a: usize,
    pub b: usize,
    pub contracted: Vec<usize>,
    pub result_legs: Vec<usize>,
    pub result_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionPlan {
    pub n: usize,
    /// Legs of each leaf after tracing arcs that join a node to itself.
    pub leaf_legs: Vec<Vec<usize>>,
    pub steps: Vec<MergeStep>,
    pub peak: usize,
}

fn size_of(n: usize, legs: usize) -> Option<usize> {
    n.checked_pow(legs as u32)
}

/// Legs appearing once, in first-appearance order.
fn open_legs(legs: &[usize]) -> Vec<usize> {
    legs.iter().copied().filter(|l| legs.iter().filter(|x| *x == l).count() == 1).collect()
}

fn merged_legs(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let shared: Vec<usize> = a.iter().copied().filter(|l| b.contains(l)).collect();
    let mut out: Vec<usize> = a.iter().copied().filter(|l| !shared.contains(l)).collect();
    out.extend(b.iter().copied().filter(|l| !shared.contains(l)));
    (shared, out)
}

/// Greedy ordering: repeatedly merge the pair of live tensors whose result
/// is smallest, preferring pairs that share an arc, ties to lower ids.
pub fn plan_contraction(g: &DualGraph, n: usize, memory_limit: usize) -> Result<ContractionPlan, StateSumError> {
    let leaf_legs: Vec<Vec<usize>> = g.legs.iter().map(|l| open_legs(l)).collect();
    let mut live: BTreeMap<usize, Vec<usize>> = leaf_legs.iter().cloned().enumerate().collect();
    let mut peak = size_of(n, 4).unwrap_or(usize::MAX);
    let mut steps = Vec::new();
    let mut next = g.num_nodes;
    while live.len() > 1 {
        let ids: Vec<usize> = live.keys().copied().collect();
        let mut best: Option<(bool, usize, usize, usize)> = None;
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let (shared, out) = merged_legs(&live[&a], &live[&b]);
                let cost = size_of(n, out.len()).unwrap_or(usize::MAX);
                let key = (shared.is_empty(), cost, a, b);
                if best.is_none_or(|bk| (key.0, key.1) < (bk.0, bk.1)) {
                    best = Some(key);
                }
            }
        }
        let (_, cost, a, b) = best.expect("at least two live tensors");
        let (shared, out) = merged_legs(&live[&a], &live[&b]);
        peak = peak.max(cost);
        live.remove(&a);
        live.remove(&b);
        live.insert(next, out.clone());
        steps.push(MergeStep { a, b, contracted: shared, result_legs: out, result_size: cost });
        next += 1;
    }
    if peak > memory_limit {
        return Err(StateSumError::MemoryLimit { needed: peak, limit: memory_limit });
    }
    Ok(ContractionPlan { n, leaf_legs, steps, peak })
}

/// Dense tensor with one axis of length N per leg, row-major.
#[derive(Debug, Clone)]
struct Dense {
    legs: Vec<usize>,
    data: Vec<Complex64>,
}

fn strides(n: usize, rank: usize) -> Vec<usize> {
    let mut s = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * n;
    }
    s
}

impl Dense {
    fn from_leaf(t: &QTensor, legs: [usize; 4]) -> Dense {
        let n = t.n;
        let open = open_legs(&legs);
        if open.len() == 4 {
            return Dense { legs: legs.to_vec(), data: t.data.clone() };
        }
        let st = strides(n, open.len());
        let mut data = vec![Complex64::new(0.0, 0.0); n.pow(open.len() as u32)];
        for (i, v) in t.data.iter().enumerate() {
            let idx = [i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n];
            let consistent = (0..4).all(|x| (0..4).all(|y| legs[x] != legs[y] || idx[x] == idx[y]));
            if !consistent {
                continue;
            }
            let mut pos = 0;
            for (k, l) in open.iter().enumerate() {
                let axis = legs.iter().position(|x| x == l).unwrap();
                pos += idx[axis] * st[k];
            }
            data[pos] += v;
        }
        Dense { legs: open, data }
    }

    /// Reorders axes to `order`.
    fn permuted(&self, order: &[usize], n: usize) -> Vec<Complex64> {
        if order == self.legs.as_slice() {
            return self.data.clone();
        }
        let rank = self.legs.len();
        let src = strides(n, rank);
        let map: Vec<usize> = order.iter().map(|l| src[self.legs.iter().position(|x| x == l).unwrap()]).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.data.len()];
        let mut idx = vec![0usize; rank];
        for o in out.iter_mut() {
            let off: usize = idx.iter().zip(&map).map(|(i, s)| i * s).sum();
            *o = self.data[off];
            for k in (0..rank).rev() {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    fn merge(&self, o: &Dense, shared: &[usize], out_legs: &[usize], n: usize) -> Dense {
        let a_free: Vec<usize> = self.legs.iter().copied().filter(|l| !shared.contains(l)).collect();
        let b_free: Vec<usize> = o.legs.iter().copied().filter(|l| !shared.contains(l)).collect();
        let mut a_order = a_free.clone();
        a_order.extend_from_slice(shared);
        let mut b_order = shared.to_vec();
        b_order.extend_from_slice(&b_free);
        let a = self.permuted(&a_order, n);
        let b = o.permuted(&b_order, n);
        let (rows, inner, cols) = (n.pow(a_free.len() as u32), n.pow(shared.len() as u32), n.pow(b_free.len() as u32));
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        data.par_chunks_mut(cols).enumerate().for_each(|(r, out)| {
            let arow = &a[r * inner..(r + 1) * inner];
            for (k, av) in arow.iter().enumerate() {
                if av.re == 0.0 && av.im == 0.0 {
                    continue;
                }
                let brow = &b[k * cols..(k + 1) * cols];
                for (o, bv) in out.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        });
        debug_assert_eq!(out_legs.len(), a_free.len() + b_free.len());
        Dense { legs: out_legs.to_vec(), data }
    }
}

/// Contraction strategy.
#[derive(Debug, Clone)]
pub enum Strategy {
    Planned(ContractionPlan),
    /// Depth-first enumeration of states, skipping branches once a completed
    /// tensor entry vanishes.
    BruteForce,
    /// Every state enumerated and every product formed.
    Plain,
}

/// States beyond this count are refused by the brute-force strategies.
pub const BRUTE_FORCE_MAX_STATES: u128 = 1 << 34;

/// Full contraction of one tensor per node along the arcs of `g`.
pub fn contract(g: &DualGraph, tensors: &[QTensor], strategy: &Strategy) -> Result<Complex64, StateSumError> {
    if tensors.len() != g.num_nodes {
        return Err(StateSumError::Shape { expected: g.num_nodes, got: tensors.len() });
    }
    let n = tensors.first().map_or(1, |t| t.n);
    match strategy {
        Strategy::Planned(plan) => contract_planned(g, tensors, plan, n),
        Strategy::BruteForce => brute_force(g, tensors, n, true),
        Strategy::Plain => brute_force(g, tensors, n, false),
    }
}

fn contract_planned(g: &DualGraph, tensors: &[QTensor], plan: &ContractionPlan, n: usize) -> Result<Complex64, StateSumError> {
    if plan.n != n || plan.leaf_legs.len() != g.num_nodes || plan.steps.len() + 1 != g.num_nodes.max(1) {
        return Err(StateSumError::PlanMismatch(format!("{} steps for {} nodes", plan.steps.len(), g.num_nodes)));
    }
    let mut store: Vec<Option<Dense>> = tensors.iter().zip(&g.legs).map(|(t, l)| Some(Dense::from_leaf(t, *l))).collect();
    for (i, leaf) in store.iter().enumerate() {
        if leaf.as_ref().unwrap().legs != plan.leaf_legs[i] {
            return Err(StateSumError::PlanMismatch(format!("leaf {i} legs differ")));
        }
    }
    for step in &plan.steps {
        let a = store.get_mut(step.a).and_then(Option::take);
        let b = store.get_mut(step.b).and_then(Option::take);
        let (Some(a), Some(b)) = (a, b) else {
            return Err(StateSumError::PlanMismatch(format!("operands {} and {} unavailable", step.a, step.b)));
        };
        store.push(Some(a.merge(&b, &step.contracted, &step.result_legs, n)));
    }
    let last = store.pop().flatten().ok_or_else(|| StateSumError::PlanMismatch("no result".into()))?;
    if !last.legs.is_empty() {
        return Err(StateSumError::PlanMismatch(format!("{} open legs remain", last.legs.len())));
    }
    Ok(last.data[0])
}

fn brute_force(g: &DualGraph, tensors: &[QTensor], n: usize, prune: bool) -> Result<Complex64, StateSumError> {
    let num_arcs = g.arcs.len();
    if (n as u128).checked_pow(num_arcs as u32).is_none_or(|s| s > BRUTE_FORCE_MAX_STATES) {
        return Err(StateSumError::TooManyStates { arcs: num_arcs });
    }
    // arcs in the order tetrahedra first touch them; completion lists per depth
    let mut order: Vec<usize> = Vec::new();
    for legs in &g.legs {
        for &l in legs {
            if !order.contains(&l) {
                order.push(l);
            }
        }
    }
    let depth_of: BTreeMap<usize, usize> = order.iter().enumerate().map(|(d, &a)| (a, d)).collect();
    let mut completes: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
    for (node, legs) in g.legs.iter().enumerate() {
        let d = legs.iter().map(|l| depth_of[l]).max().unwrap();
        completes[d].push(node);
    }
    let ctx = Dfs { g, tensors, n, order: &order, completes: &completes, prune };
    if order.is_empty() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    // the first arc's values are split across workers and summed in order
    let parts: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut state = vec![0usize; num_arcs];
            state[order[0]] = v;
            ctx.descend(&mut state, 0, Complex64::new(1.0, 0.0))
        })
        .collect();
    Ok(parts.into_iter().fold(Complex64::new(0.0, 0.0), |acc, x| acc + x))
}

struct Dfs<'a> {
    g: &'a DualGraph,
    tensors: &'a [QTensor],
    n: usize,
    order: &'a [usize],
    completes: &'a [Vec<usize>],
    prune: bool,
}

impl Dfs<'_> {
    fn descend(&self, state: &mut Vec<usize>, depth: usize, acc: Complex64) -> Complex64 {
        let mut acc = acc;
        for &node in &self.completes[depth] {
            let l = self.g.legs[node];
            acc *= self.tensors[node].get(state[l[0]], state[l[1]], state[l[2]], state[l[3]]);
        }
        if self.prune && acc.re == 0.0 && acc.im == 0.0 {
            return acc;
        }
        if depth + 1 == self.order.len() {
            return acc;
        }
        let arc = self.order[depth + 1];
        let mut sum = Complex64::new(0.0, 0.0);
        for v in 0..self.n {
            state[arc] = v;
            sum += self.descend(state, depth + 1, acc);
        }
        sum
    }
}

/// p' roots per tetrahedron from one principal N-th root per quotient edge
/// of the cocycle's edge coordinates.
pub fn edge_roots(ti: &ITriangulation, cp: &CyclicParams) -> Result<Vec<[Complex64; 3]>, StateSumError> {
    let coords = ti.edge_coordinates().ok_or(StateSumError::NoCocycle)?;
    let rho: Vec<Complex64> = coords.iter().map(|c| (c.ln() / cp.n as f64).exp()).collect();
    let e = ti.base.edges();
    (0..ti.base.tets.len())
        .map(|tet| {
            let ids: [usize; 6] = std::array::from_fn(|le| e.class_of[tet][le]);
            Ok(roots_from_edges(&ti.moduli[tet], ids.map(|i| coords[i]), ids.map(|i| rho[i]))?)
        })
        .collect()
}

/// Per-tetrahedron principal roots of the p-vectors.
pub fn principal_tet_roots(ti: &ITriangulation, cp: &CyclicParams) -> Vec<[Complex64; 3]> {
    ti.moduli.iter().map(|w| principal_roots(w, cp)).collect()
}

/// One tensor per tetrahedron: charged if a charge is given.
pub fn build_tensors(
    ti: &ITriangulation,
    roots: &[[Complex64; 3]],
    charge: Option<&GlobalCharge>,
    cp: &CyclicParams,
) -> Result<Vec<QTensor>, StateSumError> {
    (0..ti.base.tets.len())
        .map(|tet| {
            let s = ti.base.signs[tet];
            Ok(match charge {
                Some(c) => sym_tensor_roots(roots[tet], s, &c.triples[tet], cp)?,
                None => tet_tensor_roots(roots[tet], s, cp)?,
            })
        })
        .collect()
}

/// A state-sum value, defined up to a factor +-zeta^k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseClassValue {
    pub value: Complex64,
    pub n: usize,
}

impl PhaseClassValue {
    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }

    /// arg reduced modulo pi/N into [0, pi/N).
    pub fn arg_class(&self) -> f64 {
        let w = PI / self.n as f64;
        let r = self.value.arg().rem_euclid(w);
        if (w - r).abs() < 1e-12 {
            0.0
        } else {
            r
        }
    }

    pub fn phase_equal(&self, other: &PhaseClassValue, tol: f64) -> bool {
        let Ok(cp) = CyclicParams::new(self.n) else { return false };
        phase_equal(self.value, other.value, &cp, tol).unwrap_or(false)
    }
}

/// H_N = N^{-n0} times the charged contraction with edge-coordinate roots.
pub fn h_invariant(
    t: &Triangulation,
    z: &Cocycle,
    c: &GlobalCharge,
    cp: &CyclicParams,
    memory_limit: usize,
) -> Result<PhaseClassValue, StateSumError> {
    let mut ti = idealize(t, z)?;
    ti.cocycle = Some(z.clone());
    h_invariant_idealized(&ti, c, cp, memory_limit)
}

pub fn h_invariant_idealized(
    ti: &ITriangulation,
    c: &GlobalCharge,
    cp: &CyclicParams,
    memory_limit: usize,
) -> Result<PhaseClassValue, StateSumError> {
    let roots = edge_roots(ti, cp)?;
    let tensors = build_tensors(ti, &roots, Some(c), cp)?;
    let g = dual_graph(&ti.base)?;
    let plan = plan_contraction(&g, cp.n, memory_limit)?;
    let v = contract(&g, &tensors, &Strategy::Planned(plan))?;
    Ok(PhaseClassValue { value: v / (cp.n as f64).powi(ti.base.num_vertices as i32), n: cp.n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex3::{apply_move, builtin, Move};

    #[test]
    fn dual_graph_counts() {
        let t = builtin("boundary_4_simplex").unwrap();
        let g = dual_graph(&t).unwrap();
        assert_eq!((g.num_nodes, g.arcs.len()), (5, 10));
        for inc in &g.incoming {
            assert_eq!(inc.iter().filter(|x| **x).count(), 2);
        }
        for a in &g.arcs {
            assert!(g.incoming[a.to.0][a.to.1] && !g.incoming[a.from.0][a.from.1]);
        }
        let t2 = apply_move(&t, Move::TwoThree { face: 0 }).unwrap();
        let g2 = dual_graph(&t2).unwrap();
        assert_eq!((g2.num_nodes, g2.arcs.len()), (6, 12));
    }

    #[test]
    fn plan_limits() {
        let t = builtin("boundary_4_simplex").unwrap();
        let g = dual_graph(&t).unwrap();
        let plan = plan_contraction(&g, 3, DEFAULT_MEMORY_LIMIT).unwrap();
        assert!(plan.peak <= 3usize.pow(6), "{}", plan.peak);
        assert_eq!(plan.steps.len(), 4);
        assert!(plan.steps.last().unwrap().result_legs.is_empty());
        assert!(matches!(plan_contraction(&g, 3, 1), Err(StateSumError::MemoryLimit { .. })));
    }

    #[test]
    fn arg_class_reduction() {
        let v = PhaseClassValue { value: Complex64::from_polar(2.0, PI / 3.0 + 0.1), n: 3 };
        assert!((v.arg_class() - 0.1).abs() < 1e-12);
        assert_eq!(v.modulus(), 2.0);
    }
}
