//! Branched quasi-regular triangulations of closed oriented 3-manifolds.
//!
//! Vertices carry global integer labels and every tetrahedron lists its
//! four labels in increasing order; local vertex k is the k-th smallest.
//! The branching is the one induced by this total order. Face k of a
//! tetrahedron is the face opposite local vertex k. Glued faces carry the
//! same label triple and are identified in label order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Local edges in canonical order.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Index of the local edge {i, j} in [`LOCAL_EDGES`].
pub fn local_edge_index(i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    LOCAL_EDGES.iter().position(|&e| e == (i, j)).expect("distinct local vertices")
}

/// Modulus slot of the local edge {i, j}: 0 for e0 = v0v1 and its opposite
/// v2v3, 1 for e1 = v1v2 and v0v3, 2 for e2 = v0v2 and v1v3.
pub fn edge_slot(i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    match (i, j) {
        (0, 1) | (2, 3) => 0,
        (1, 2) | (0, 3) => 1,
        (0, 2) | (1, 3) => 2,
        _ => panic!("invalid local edge ({i}, {j})"),
    }
}

/// Local vertices of face k, increasing.
pub fn face_vertices(k: usize) -> [usize; 3] {
    match k {
        0 => [1, 2, 3],
        1 => [0, 2, 3],
        2 => [0, 1, 3],
        3 => [0, 1, 2],
        _ => panic!("face index {k} out of range"),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexError {
    #[error("unknown builtin triangulation `{0}`")]
    UnknownBuiltin(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("move would create a loop edge (quasi-regularity)")]
    QuasiRegularity,
    #[error("invalid move site: {0}")]
    BadSite(String),
    #[error("Hamiltonian constraint violated: {0}")]
    Hamiltonian(String),
    #[error("resulting triangulation is invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FacePairing {
    pub tet_a: usize,
    pub face_a: usize,
    pub tet_b: usize,
    pub face_b: usize,
}

impl FacePairing {
    pub fn new(tet_a: usize, face_a: usize, tet_b: usize, face_b: usize) -> Self {
        if (tet_a, face_a) <= (tet_b, face_b) {
            FacePairing { tet_a, face_a, tet_b, face_b }
        } else {
            FacePairing { tet_a: tet_b, face_a: face_b, tet_b: tet_a, face_b: face_a }
        }
    }

    pub fn sides(&self) -> [(usize, usize); 2] {
        [(self.tet_a, self.face_a), (self.tet_b, self.face_b)]
    }
}

/// Quotient edges: equivalence classes of abstract edges (tet, local edge).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeData {
    /// edge id of each abstract edge
    pub class_of: Vec<[usize; 6]>,
    /// abstract edges of each edge, sorted
    pub members: Vec<Vec<(usize, usize)>>,
    /// endpoint labels (smaller, larger)
    pub endpoints: Vec<(usize, usize)>,
}

impl EdgeData {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Edge id of the edge of tet `t` joining local vertices i and j.
    pub fn edge(&self, t: usize, i: usize, j: usize) -> usize {
        self.class_of[t][local_edge_index(i, j)]
    }

    /// Number of abstract edges of tet t lying in `edge`, per modulus slot.
    pub fn slot_counts(&self, t: usize, edge: usize) -> [i64; 3] {
        let mut c = [0i64; 3];
        for (le, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
            if self.class_of[t][le] == edge {
                c[edge_slot(i, j)] += 1;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub name: String,
    pub num_vertices: usize,
    pub tets: Vec<[usize; 4]>,
    pub pairings: Vec<FacePairing>,
    /// branching sign *_b of every tetrahedron relative to the global orientation
    pub signs: Vec<i8>,
    /// canonical edge ids of the Hamiltonian subcomplex
    pub hamiltonian: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub tetrahedra: usize,
    pub checks: Vec<Check>,
    pub signs: Vec<i8>,
}

impl ValidationReport {
    pub fn valid(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64 - self.tetrahedra as i64
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.ok).map(|c| format!("{}: {}", c.name, c.detail)).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "counts (V,E,F,T) = ({}, {}, {}, {})", self.vertices, self.edges, self.faces, self.tetrahedra)?;
        for c in &self.checks {
            writeln!(f, "{:<24} {}  {}", c.name, if c.ok { "pass" } else { "FAIL" }, c.detail)?;
        }
        Ok(())
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let nx = self.0[y];
            self.0[y] = r;
            y = nx;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl Triangulation {
    /// Assembles a triangulation, canonicalizing the pairing list. Signs are
    /// derived by propagation from tetrahedron 0 when not supplied. No
    /// validation beyond index ranges; see [`validate_triangulation`].
    pub fn new(
        name: impl Into<String>,
        num_vertices: usize,
        tets: Vec<[usize; 4]>,
        pairings: Vec<FacePairing>,
        signs: Option<Vec<i8>>,
        hamiltonian: Option<Vec<usize>>,
    ) -> Result<Self, ComplexError> {
        for p in &pairings {
            for (t, f) in p.sides() {
                if t >= tets.len() || f > 3 {
                    return Err(ComplexError::OutOfRange(format!("pairing side ({t}, {f})")));
                }
            }
        }
        let mut pairings: Vec<FacePairing> =
            pairings.into_iter().map(|p| FacePairing::new(p.tet_a, p.face_a, p.tet_b, p.face_b)).collect();
        pairings.sort();
        let signs = match signs {
            Some(s) => {
                if s.len() != tets.len() || s.iter().any(|&x| x != 1 && x != -1) {
                    return Err(ComplexError::OutOfRange("signs must be +-1 per tetrahedron".into()));
                }
                s
            }
            None => propagate_signs(tets.len(), &pairings),
        };
        Ok(Triangulation { name: name.into(), num_vertices, tets, pairings, signs, hamiltonian })
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    /// Global labels of face k of tet t.
    pub fn face_labels(&self, t: usize, k: usize) -> [usize; 3] {
        face_vertices(k).map(|i| self.tets[t][i])
    }

    /// Pairing id containing face (t, k), if any.
    pub fn face_id(&self, t: usize, k: usize) -> Option<usize> {
        self.pairings.iter().position(|p| p.sides().contains(&(t, k)))
    }

    /// The face glued to (t, k).
    pub fn partner(&self, t: usize, k: usize) -> Option<(usize, usize)> {
        self.pairings.iter().find_map(|p| {
            let [a, b] = p.sides();
            if a == (t, k) {
                Some(b)
            } else if b == (t, k) {
                Some(a)
            } else {
                None
            }
        })
    }

    fn partner_map(&self) -> HashMap<(usize, usize), (usize, usize)> {
        let mut m = HashMap::new();
        for p in &self.pairings {
            let [a, b] = p.sides();
            m.insert(a, b);
            m.insert(b, a);
        }
        m
    }

    /// Local index of label v in tet t.
    pub fn local_index(&self, t: usize, v: usize) -> Option<usize> {
        self.tets[t].iter().position(|&x| x == v)
    }

    /// Quotient edges by union-find over the face identifications.
    pub fn edges(&self) -> EdgeData {
        let n = self.tets.len();
        let mut uf = UnionFind::new(6 * n);
        for p in &self.pairings {
            let la = face_vertices(p.face_a);
            let lb = face_vertices(p.face_b);
            for x in 0..3 {
                for y in x + 1..3 {
                    let ea = 6 * p.tet_a + local_edge_index(la[x], la[y]);
                    let eb = 6 * p.tet_b + local_edge_index(lb[x], lb[y]);
                    uf.union(ea, eb);
                }
            }
        }
        // canonical ids: classes ordered by their smallest (tet, local edge)
        let mut id_of_root: HashMap<usize, usize> = HashMap::new();
        let mut class_of = vec![[0usize; 6]; n];
        let mut members: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut endpoints = Vec::new();
        for t in 0..n {
            for le in 0..6 {
                let r = uf.find(6 * t + le);
                let id = *id_of_root.entry(r).or_insert_with(|| {
                    members.push(Vec::new());
                    let (i, j) = LOCAL_EDGES[le];
                    endpoints.push((self.tets[t][i], self.tets[t][j]));
                    members.len() - 1
                });
                class_of[t][le] = id;
                members[id].push((t, le));
            }
        }
        EdgeData { class_of, members, endpoints }
    }

    pub fn hamiltonian_set(&self) -> BTreeSet<usize> {
        self.hamiltonian.iter().flatten().copied().collect()
    }
}

fn propagate_signs(n: usize, pairings: &[FacePairing]) -> Vec<i8> {
    let mut signs = vec![0i8; n];
    let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
    for p in pairings {
        adj[p.tet_a].push((p.face_a, p.tet_b, p.face_b));
        adj[p.tet_b].push((p.face_b, p.tet_a, p.face_a));
    }
    for start in 0..n {
        if signs[start] != 0 {
            continue;
        }
        signs[start] = 1;
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for &(f, u, g) in &adj[t] {
                if signs[u] == 0 {
                    // s_t (-1)^f = -s_u (-1)^g
                    let parity = if (f + g) % 2 == 0 { 1 } else { -1 };
                    signs[u] = -signs[t] * parity;
                    stack.push(u);
                }
            }
        }
    }
    signs
}

fn face_orientation(sign: i8, k: usize) -> i8 {
    if k % 2 == 0 {
        sign
    } else {
        -sign
    }
}

/// Combinatorial validation of a closed branched quasi-regular triangulation.
pub fn validate_triangulation(t: &Triangulation) -> ValidationReport {
    let n = t.tets.len();
    let mut checks = Vec::new();

    let bad_tets: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = t.tets[i];
            !(v[0] < v[1] && v[1] < v[2] && v[2] < v[3]) || v[3] >= t.num_vertices
        })
        .collect();
    checks.push(Check {
        name: "tetrahedra",
        ok: n > 0 && bad_tets.is_empty(),
        detail: if n == 0 {
            "no tetrahedra".into()
        } else if bad_tets.is_empty() {
            format!("{n} tetrahedra with increasing vertex labels")
        } else {
            format!("tetrahedra {bad_tets:?} lack 4 distinct increasing labels below {}", t.num_vertices)
        },
    });
    if !bad_tets.is_empty() {
        return ValidationReport {
            vertices: t.num_vertices,
            edges: 0,
            faces: t.pairings.len(),
            tetrahedra: n,
            checks,
            signs: t.signs.clone(),
        };
    }

    // pairings
    let mut used: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairing_problems = Vec::new();
    for (i, p) in t.pairings.iter().enumerate() {
        if (p.tet_a, p.face_a) == (p.tet_b, p.face_b) {
            pairing_problems.push(format!("pairing {i} glues a face to itself"));
        }
        if t.face_labels(p.tet_a, p.face_a) != t.face_labels(p.tet_b, p.face_b) {
            pairing_problems.push(format!(
                "pairing {i} joins faces with vertex triples {:?} and {:?}",
                t.face_labels(p.tet_a, p.face_a),
                t.face_labels(p.tet_b, p.face_b)
            ));
        }
        for s in p.sides() {
            if let Some(j) = used.insert(s, i) {
                pairing_problems.push(format!("face {s:?} appears in pairings {j} and {i}"));
            }
        }
    }
    checks.push(Check {
        name: "face pairings",
        ok: pairing_problems.is_empty(),
        detail: if pairing_problems.is_empty() { "consistent".into() } else { pairing_problems.join("; ") },
    });
    let unglued: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (0..4).map(move |k| (a, k))).filter(|s| !used.contains_key(s)).collect();
    checks.push(Check {
        name: "closed",
        ok: unglued.is_empty(),
        detail: if unglued.is_empty() {
            "every face is paired".into()
        } else {
            format!("{} unpaired faces, first {:?}", unglued.len(), unglued[0])
        },
    });

    // connectivity of the dual graph
    let mut uf = UnionFind::new(n);
    for p in &t.pairings {
        uf.union(p.tet_a, p.tet_b);
    }
    let components = (0..n).filter(|&i| uf.find(i) == i).count();
    checks.push(Check { name: "connected", ok: components == 1, detail: format!("{components} component(s)") });

    // orientation
    let sign_ok = t.signs.len() == n && t.signs.iter().all(|&s| s == 1 || s == -1);
    let bad_orient: Vec<usize> = if sign_ok {
        t.pairings
            .iter()
            .enumerate()
            .filter(|(_, p)| face_orientation(t.signs[p.tet_a], p.face_a) != -face_orientation(t.signs[p.tet_b], p.face_b))
            .map(|(i, _)| i)
            .collect()
    } else {
        vec![]
    };
    checks.push(Check {
        name: "oriented",
        ok: sign_ok && bad_orient.is_empty(),
        detail: if !sign_ok {
            "missing or malformed signs".into()
        } else if bad_orient.is_empty() {
            "gluings reverse the induced face orientations".into()
        } else {
            format!("orientation-preserving gluings {bad_orient:?}")
        },
    });

    let edges = t.edges();
    let loops = edges.endpoints.iter().filter(|(a, b)| a == b).count();
    checks.push(Check {
        name: "quasi-regular",
        ok: loops == 0,
        detail: format!("{} edges, {} with equal endpoints", edges.len(), loops),
    });

    // vertex links
    let mut link_problems = Vec::new();
    let partners = t.partner_map();
    for v in 0..t.num_vertices {
        let corners: Vec<(usize, usize)> =
            (0..n).filter_map(|a| t.local_index(a, v).map(|k| (a, k))).collect();
        if corners.is_empty() {
            link_problems.push(format!("vertex {v} unused"));
            continue;
        }
        let idx: HashMap<(usize, usize), usize> = corners.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut luf = UnionFind::new(corners.len());
        for &(a, k) in &corners {
            for f in (0..4).filter(|&f| f != k) {
                if let Some(&(b, g)) = partners.get(&(a, f)) {
                    if let Some(kb) = t.local_index(b, v) {
                        if kb != g {
                            luf.union(idx[&(a, k)], idx[&(b, kb)]);
                        }
                    }
                }
            }
        }
        let comps = (0..corners.len()).filter(|&i| luf.find(i) == i).count();
        let link_vertices: BTreeSet<usize> = corners
            .iter()
            .flat_map(|&(a, k)| (0..4).filter(move |&j| j != k).map(move |j| (a, k, j)))
            .map(|(a, k, j)| edges.edge(a, k, j))
            .collect();
        let chi = link_vertices.len() as i64 - (corners.len() as i64 * 3) / 2 + corners.len() as i64;
        if comps != 1 || chi != 2 {
            link_problems.push(format!("vertex {v}: link has {comps} component(s), Euler characteristic {chi}"));
        }
    }
    checks.push(Check {
        name: "vertex links",
        ok: link_problems.is_empty(),
        detail: if link_problems.is_empty() { "all spheres".into() } else { link_problems.join("; ") },
    });

    if let Some(h) = &t.hamiltonian {
        let mut problems = Vec::new();
        let mut covered = vec![false; t.num_vertices];
        for &e in h {
            if e >= edges.len() {
                problems.push(format!("edge id {e} out of range"));
            } else {
                let (a, b) = edges.endpoints[e];
                covered[a] = true;
                covered[b] = true;
            }
        }
        let missing: Vec<usize> = (0..t.num_vertices).filter(|&v| !covered[v]).collect();
        if !missing.is_empty() {
            problems.push(format!("vertices {missing:?} not in H"));
        }
        checks.push(Check {
            name: "hamiltonian",
            ok: problems.is_empty(),
            detail: if problems.is_empty() { format!("{} edges covering all vertices", h.len()) } else { problems.join("; ") },
        });
    }

    let report = ValidationReport {
        vertices: t.num_vertices,
        edges: edges.len(),
        faces: t.pairings.len(),
        tetrahedra: n,
        checks,
        signs: t.signs.clone(),
    };
    let chi = report.euler_characteristic();
    let mut report = report;
    report.checks.push(Check { name: "euler characteristic", ok: chi == 0, detail: format!("{chi}") });
    report
}

/// Names accepted by [`builtin`].
pub const BUILTINS: [&str; 2] = ["boundary_4_simplex", "boundary_4_simplex_with_unknot"];

/// Desk-scale test complexes.
pub fn builtin(name: &str) -> Result<Triangulation, ComplexError> {
    let boundary = || {
        let tets: Vec<[usize; 4]> = (0..5)
            .map(|i| {
                let v: Vec<usize> = (0..5).filter(|&k| k != i).collect();
                [v[0], v[1], v[2], v[3]]
            })
            .collect();
        let mut pairings = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                // the face {0..4} \ {i, j}: opposite j in tet i, opposite i in tet j
                pairings.push(FacePairing::new(i, j - 1, j, i));
            }
        }
        let signs = (0..5).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        (tets, pairings, signs)
    };
    match name {
        "boundary_4_simplex" => {
            let (tets, pairings, signs) = boundary();
            Triangulation::new(name, 5, tets, pairings, Some(signs), None)
        }
        "boundary_4_simplex_with_unknot" => {
            let (tets, pairings, signs) = boundary();
            let mut t = Triangulation::new(name, 5, tets, pairings, Some(signs), None)?;
            let e = t.edges();
            let cycle = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)];
            let h = cycle.iter().map(|p| e.endpoints.iter().position(|q| q == p).expect("edge exists")).collect();
            t.hamiltonian = Some(h);
            Ok(t)
        }
        other => Err(ComplexError::UnknownBuiltin(other.to_string())),
    }
}

/// Branching sign *_b of tetrahedron `t`.
pub fn tet_sign(t: &Triangulation, tet: usize) -> Result<i8, ComplexError> {
    t.signs.get(tet).copied().ok_or_else(|| ComplexError::OutOfRange(format!("tetrahedron {tet}")))
}

/// Same combinatorics with the opposite global orientation.
pub fn reverse_orientation(t: &Triangulation) -> Triangulation {
    let mut r = t.clone();
    r.signs.iter_mut().for_each(|s| *s = -*s);
    r
}

/// A local move together with its site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// 2 -> 3 across the face with the given id (pairing index).
    TwoThree { face: usize },
    /// 3 -> 2 removing an edge of valence 3.
    ThreeTwo { edge: usize },
    /// 0 -> 2 (lune) opening the two faces, which share an edge.
    ZeroTwo { face_a: usize, face_b: usize },
    /// 2 -> 0 removing the valence-2 edge between two tetrahedra with equal labels.
    TwoZero { edge: usize },
    /// Positive bubble on a face; the new vertex label is inserted at `position`
    /// of the total order (default: last).
    BubblePlus { face: usize, position: Option<usize> },
    /// Negative bubble removing a vertex whose star consists of two tetrahedra.
    BubbleMinus { vertex: usize },
}

impl Move {
    pub fn is_positive(&self) -> bool {
        matches!(self, Move::TwoThree { .. } | Move::ZeroTwo { .. } | Move::BubblePlus { .. })
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::TwoThree { face } => write!(f, "2-3 {face}"),
            Move::ThreeTwo { edge } => write!(f, "3-2 {edge}"),
            Move::ZeroTwo { face_a, face_b } => write!(f, "0-2 {face_a} {face_b}"),
            Move::TwoZero { edge } => write!(f, "2-0 {edge}"),
            Move::BubblePlus { face, position: Some(p) } => write!(f, "bubble+ {face} {p}"),
            Move::BubblePlus { face, position: None } => write!(f, "bubble+ {face}"),
            Move::BubbleMinus { vertex } => write!(f, "bubble- {vertex}"),
        }
    }
}

/// Bookkeeping connecting a triangulation before and after a move.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveTrace {
    pub mv: Move,
    /// old tet index -> new index, for surviving tetrahedra
    pub tet_map: Vec<Option<usize>>,
    /// indices (in the new triangulation) of the created tetrahedra
    pub added: Vec<usize>,
    /// old tetrahedra that disappeared
    pub removed: Vec<usize>,
    /// new edge id -> an old edge id it continues, if any
    pub edge_map: Vec<Option<usize>>,
    /// old vertex label -> new label
    pub relabel: Vec<Option<usize>>,
    /// label of the vertex created by a positive bubble
    pub new_vertex: Option<usize>,
}

type Slot = (usize, usize);

#[derive(Default)]
struct Surgery {
    removed: Vec<usize>,
    new_tets: Vec<[usize; 4]>,
    /// face of a removed tetrahedron -> the new face taking its place
    replace: HashMap<Slot, Slot>,
    /// face of a surviving tetrahedron, reglued to a new face
    attach: Vec<(Slot, Slot)>,
    /// two surviving faces glued together after their partners are removed
    merge: Vec<(Slot, Slot)>,
    internal: Vec<(Slot, Slot)>,
    relabel: Option<Vec<Option<usize>>>,
    num_vertices: Option<usize>,
}

enum Side {
    Old(Slot),
    New(Slot),
    Gone,
}

impl Surgery {
    fn finish(self, old: &Triangulation, mv: Move) -> Result<(Triangulation, MoveTrace), ComplexError> {
        let n_old = old.tets.len();
        let mut is_removed = vec![false; n_old];
        for &r in &self.removed {
            is_removed[r] = true;
        }
        let mut tet_map = vec![None; n_old];
        let mut next = 0;
        for t in 0..n_old {
            if !is_removed[t] {
                tet_map[t] = Some(next);
                next += 1;
            }
        }
        let survivors = next;
        let relabel: Vec<Option<usize>> = self.relabel.clone().unwrap_or_else(|| (0..old.num_vertices).map(Some).collect());
        let mut tets = Vec::with_capacity(survivors + self.new_tets.len());
        let mut signs = Vec::with_capacity(survivors + self.new_tets.len());
        for t in 0..n_old {
            if !is_removed[t] {
                let v = old.tets[t].map(|x| relabel[x].expect("surviving label"));
                tets.push(v);
                signs.push(old.signs[t]);
            }
        }
        let added: Vec<usize> = (survivors..survivors + self.new_tets.len()).collect();
        tets.extend(self.new_tets.iter().copied());
        signs.extend(std::iter::repeat_n(0i8, self.new_tets.len()));
        let newslot = |s: Slot| (survivors + s.0, s.1);

        let attached: HashMap<Slot, Slot> = self.attach.iter().copied().collect();
        let merged: HashMap<Slot, Slot> =
            self.merge.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        let resolve = |s: Slot| -> Side {
            if let Some(&nf) = self.replace.get(&s) {
                Side::New(nf)
            } else if is_removed[s.0] {
                Side::Gone
            } else {
                Side::Old((tet_map[s.0].expect("survivor"), s.1))
            }
        };
        let mut pairings = Vec::new();
        for p in &old.pairings {
            let [a, b] = p.sides();
            if attached.contains_key(&a) || attached.contains_key(&b) {
                if !(attached.contains_key(&a) && attached.contains_key(&b)) {
                    return Err(ComplexError::BadSite("cut face attached on one side only".into()));
                }
                continue;
            }
            let (ra, rb) = (resolve(a), resolve(b));
            let side = |r: &Side| match *r {
                Side::Old(s) => Some(s),
                Side::New(s) => Some(newslot(s)),
                Side::Gone => None,
            };
            match (side(&ra), side(&rb)) {
                (Some(x), Some(y)) => pairings.push(FacePairing::new(x.0, x.1, y.0, y.1)),
                (None, None) => {}
                (Some(_), None) | (None, Some(_)) => {
                    let surv = if matches!(ra, Side::Gone) { b } else { a };
                    if !merged.contains_key(&surv) {
                        return Err(ComplexError::BadSite(format!(
                            "face {surv:?} would be left unglued by the move"
                        )));
                    }
                }
            }
        }
        for &(a, b) in &self.merge {
            let (x, y) = (tet_map[a.0].expect("survivor"), tet_map[b.0].expect("survivor"));
            pairings.push(FacePairing::new(x, a.1, y, b.1));
        }
        for (&s, &nf) in &attached {
            let x = tet_map[s.0].expect("attached face survives");
            let y = newslot(nf);
            pairings.push(FacePairing::new(x, s.1, y.0, y.1));
        }
        for &(a, b) in &self.internal {
            let (x, y) = (newslot(a), newslot(b));
            pairings.push(FacePairing::new(x.0, x.1, y.0, y.1));
        }
        pairings.sort();

        // orientation of new tetrahedra: replaced faces keep their orientation,
        // glued faces get the opposite one
        let mut constraints: Vec<(usize, i8)> = Vec::new();
        for (&old_slot, &nf) in &self.replace {
            let o = face_orientation(old.signs[old_slot.0], old_slot.1);
            constraints.push((nf.0, if nf.1 % 2 == 0 { o } else { -o }));
        }
        for (&s, &nf) in &attached {
            let o = -face_orientation(old.signs[s.0], s.1);
            constraints.push((nf.0, if nf.1 % 2 == 0 { o } else { -o }));
        }
        for (i, sgn) in constraints {
            let slot = &mut signs[survivors + i];
            if *slot == 0 {
                *slot = sgn;
            } else if *slot != sgn {
                return Err(ComplexError::Invalid("inconsistent orientation of a new tetrahedron".into()));
            }
        }
        // remaining new tetrahedra get their sign through internal faces
        let mut changed = true;
        while changed {
            changed = false;
            for &(a, b) in &self.internal {
                let (sa, sb) = (signs[survivors + a.0], signs[survivors + b.0]);
                if sa != 0 && sb == 0 {
                    let o = -face_orientation(sa, a.1);
                    signs[survivors + b.0] = if b.1 % 2 == 0 { o } else { -o };
                    changed = true;
                } else if sb != 0 && sa == 0 {
                    let o = -face_orientation(sb, b.1);
                    signs[survivors + a.0] = if a.1 % 2 == 0 { o } else { -o };
                    changed = true;
                }
            }
        }
        if signs.iter().any(|&s| s == 0) {
            return Err(ComplexError::Invalid("orientation of a new tetrahedron is undetermined".into()));
        }

        let num_vertices = self.num_vertices.unwrap_or(old.num_vertices);
        let mut t = Triangulation {
            name: old.name.clone(),
            num_vertices,
            tets,
            pairings,
            signs,
            hamiltonian: None,
        };

        // edge continuation map
        let old_edges = old.edges();
        let new_edges = t.edges();
        let mut edge_map: Vec<Option<usize>> = vec![None; new_edges.len()];
        for (ne, members) in new_edges.members.iter().enumerate() {
            let mut cands: Vec<usize> = Vec::new();
            for &(nt, le) in members {
                if nt < survivors {
                    let ot = tet_map.iter().position(|&m| m == Some(nt)).expect("survivor preimage");
                    cands.push(old_edges.class_of[ot][le]);
                }
            }
            // edges on faces that replaced faces of removed tetrahedra
            for (&(ot, of), &(ni, nf)) in &self.replace {
                let (lo, ln) = (face_vertices(of), face_vertices(nf));
                for x in 0..3 {
                    for y in x + 1..3 {
                        if new_edges.class_of[survivors + ni][local_edge_index(ln[x], ln[y])] == ne {
                            cands.push(old_edges.class_of[ot][local_edge_index(lo[x], lo[y])]);
                        }
                    }
                }
            }
            edge_map[ne] = cands.into_iter().min();
        }
        t.hamiltonian = old.hamiltonian.as_ref().map(|h| {
            let hs: BTreeSet<usize> = h.iter().copied().collect();
            (0..new_edges.len()).filter(|&e| edge_map[e].is_some_and(|o| hs.contains(&o))).collect()
        });

        let new_vertex = if self.num_vertices.is_some_and(|nv| nv > old.num_vertices) {
            (0..num_vertices).find(|v| !relabel.contains(&Some(*v)))
        } else {
            None
        };
        let trace = MoveTrace { mv, tet_map, added, removed: self.removed.clone(), edge_map, relabel, new_vertex };
        Ok((t, trace))
    }
}

fn sorted4(mut v: [usize; 4]) -> [usize; 4] {
    v.sort();
    v
}

fn opp(tet: &[usize; 4], label: usize) -> usize {
    tet.iter().position(|&x| x == label).expect("label in tetrahedron")
}

fn pairing(t: &Triangulation, face: usize) -> Result<FacePairing, ComplexError> {
    t.pairings.get(face).copied().ok_or_else(|| ComplexError::BadSite(format!("face id {face} out of range")))
}

/// Applies a move, returning the new triangulation.
pub fn apply_move(t: &Triangulation, mv: Move) -> Result<Triangulation, ComplexError> {
    apply_move_traced(t, mv).map(|(n, _)| n)
}

/// Applies a move and returns the bookkeeping needed by the transits.
pub fn apply_move_traced(t: &Triangulation, mv: Move) -> Result<(Triangulation, MoveTrace), ComplexError> {
    let (mut new, trace) = match mv {
        Move::TwoThree { face } => two_three(t, face, mv)?,
        Move::ThreeTwo { edge } => three_two(t, edge, mv)?,
        Move::ZeroTwo { face_a, face_b } => zero_two(t, face_a, face_b, mv)?,
        Move::TwoZero { edge } => two_zero(t, edge, mv)?,
        Move::BubblePlus { face, position } => bubble_plus(t, face, position, mv)?,
        Move::BubbleMinus { vertex } => bubble_minus(t, vertex, mv)?,
    };
    new.hamiltonian = adjust_hamiltonian(t, &new, &trace)?;
    let report = validate_triangulation(&new);
    if !report.valid() {
        return Err(ComplexError::Invalid(report.failures().join("; ")));
    }
    Ok((new, trace))
}

fn two_three(t: &Triangulation, face: usize, mv: Move) -> Result<(Triangulation, MoveTrace), ComplexError> {
    let p = pairing(t, face)?;
    let (t1, f1, t2, f2) = (p.tet_a, p.face_a, p.tet_b, p.face_b);
    if t1 == t2 {
        return Err(ComplexError::BadSite("face glues a tetrahedron to itself".into()));
    }
    let abc = t.face_labels(t1, f1);
    let d = t.tets[t1][f1];
    let e = t.tets[t2][f2];
    if d == e {
        return Err(ComplexError::QuasiRegularity);
    }
    let mut s = Surgery { removed: vec![t1, t2], ..Default::default() };
    // new tetrahedron i omits abc[i]
    for (i, &z) in abc.iter().enumerate() {
        let others: Vec<usize> = abc.iter().copied().filter(|&x| x != z).collect();
        let nt = sorted4([others[0], others[1], d, e]);
        s.new_tets.push(nt);
        s.replace.insert((t1, opp(&t.tets[t1], z)), (i, opp(&nt, e)));
        s.replace.insert((t2, opp(&t.tets[t2], z)), (i, opp(&nt, d)));
    }
    for (i, &x) in abc.iter().enumerate() {
        // face {x, d, e} lies in the two new tetrahedra that contain x
        let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
        let (j, k) = (others[0], others[1]);
        s.internal.push(((j, opp(&s.new_tets[j], abc[k])), (k, opp(&s.new_tets[k], abc[j]))));
        let _ = x;
    }
    s.finish(t, mv)
}

fn three_two(t: &Triangulation, edge: usize, mv: Move) -> Result<(Triangulation, MoveTrace), ComplexError> {
    let ed = t.edges();
    if edge >= ed.len() {
        return Err(ComplexError::BadSite(format!("edge id {edge} out of range")));
    }
    let members = &ed.members[edge];
    let tets: BTreeSet<usize> = members.iter().map(|m| m.0).collect();
    if members.len() != 3 || tets.len() != 3 {
        return Err(ComplexError::BadSite(format!("edge {edge} has valence {} (need 3 distinct tetrahedra)", members.len())));
    }
    if t.hamiltonian_set().contains(&edge) {
        return Err(ComplexError::Hamiltonian("3-2 would remove an edge of H".into()));
    }
    let (d, e) = ed.endpoints[edge];
    let mut link: Vec<usize> = Vec::new();
    for &tt in &tets {
        link.extend(t.tets[tt].iter().copied().filter(|&x| x != d && x != e));
    }
    let mut uniq = link.clone();
    uniq.sort();
    uniq.dedup();
    if uniq.len() != 3 || uniq.iter().any(|u| link.iter().filter(|&&x| x == *u).count() != 2) {
        return Err(ComplexError::BadSite(format!("the star of edge {edge} is not a bipyramid")));
    }
    let abc = [uniq[0], uniq[1], uniq[2]];
    let ta = sorted4([abc[0], abc[1], abc[2], d]);
    let tb = sorted4([abc[0], abc[1], abc[2], e]);
    let mut s = Surgery { removed: tets.iter().copied().collect(), ..Default::default() };
    s.new_tets = vec![ta, tb];
    for &tt in &tets {
        let z = *abc.iter().find(|&&x| !t.tets[tt].contains(&x)).expect("one link vertex missing");
        s.replace.insert((tt, opp(&t.tets[tt], e)), (0, opp(&ta, z)));
        s.replace.insert((tt, opp(&t.tets[tt], d)), (1, opp(&tb, z)));
    }
    s.internal.push(((0, opp(&ta, d)), (1, opp(&tb, e))));
    s.finish(t, mv)
}

/// Abstract edges around an edge in cyclic order, as (tet, face entered,
/// face left, pairing id crossed when leaving).
fn edge_cycle(t: &Triangulation, ed: &EdgeData, edge: usize) -> Vec<(usize, usize, usize, usize)> {
    let (a, b) = ed.endpoints[edge];
    let (t0, le0) = ed.members[edge][0];
    let (i0, j0) = LOCAL_EDGES[le0];
    let others0: Vec<usize> = (0..4).filter(|&k| k != i0 && k != j0).collect();
    let mut cur = t0;
    let mut entered = others0[0];
    let mut out = Vec::new();
    let _ = (a, b);
    loop {
        // the other face of `cur` containing this abstract edge
        let la = t.local_index(cur, a).expect("endpoint");
        let lb = t.local_index(cur, b).expect("endpoint");
        let rest: Vec<usize> = (0..4).filter(|&k| k != la && k != lb).collect();
        let leave = if rest[0] == entered { rest[1] } else { rest[0] };
        let pid = t.face_id(cur, leave).expect("closed");
        let (nt, nf) = t.partner(cur, leave).expect("closed");
        out.push((cur, entered, leave, pid));
        cur = nt;
        entered = nf;
        if (cur, entered) == (t0, others0[0]) || out.len() > 6 * t.tets.len() {
            break;
        }
    }
    out
}

fn zero_two(t: &Triangulation, fa: usize, fb: usize, mv: Move) -> Result<(Triangulation, MoveTrace), ComplexError> {
    if fa == fb {
        return Err(ComplexError::BadSite("0-2 needs two distinct faces".into()));
    }
    let (p1, p2) = (pairing(t, fa)?, pairing(t, fb)?);
    let l1 = t.face_labels(p1.tet_a, p1.face_a);
    let l2 = t.face_labels(p2.tet_a, p2.face_a);
    let common: Vec<usize> = l1.iter().copied().filter(|x| l2.contains(x)).collect();
    if common.len() == 3 {
        return Err(ComplexError::QuasiRegularity);
    }
    if common.len() != 2 {
        return Err(ComplexError::BadSite("faces do not share an edge".into()));
    }
    let (a, b) = (common[0], common[1]);
    let c = *l1.iter().find(|x| !common.contains(x)).expect("third vertex");
    let d = *l2.iter().find(|x| !common.contains(x)).expect("third vertex");
    let ed = t.edges();
    let e1 = ed.edge(p1.tet_a, t.local_index(p1.tet_a, a).unwrap(), t.local_index(p1.tet_a, b).unwrap());
    let e2 = ed.edge(p2.tet_a, t.local_index(p2.tet_a, a).unwrap(), t.local_index(p2.tet_a, b).unwrap());
    if e1 != e2 {
        return Err(ComplexError::BadSite("faces do not share an edge".into()));
    }
    if t.hamiltonian_set().contains(&e1) {
        return Err(ComplexError::Hamiltonian("0-2 would split an edge of H".into()));
    }
    let cyc = edge_cycle(t, &ed, e1);
    let m = cyc.len();
    let i1 = cyc.iter().position(|s| s.3 == fa).ok_or_else(|| ComplexError::BadSite("face not around edge".into()))?;
    let i2 = cyc.iter().position(|s| s.3 == fb).ok_or_else(|| ComplexError::BadSite("face not around edge".into()))?;
    let u = sorted4([a, b, c, d]);
    let mut s = Surgery::default();
    s.new_tets = vec![u, u];
    // half one runs from after crossing i1 up to the crossing i2
    let h1_first = cyc[(i1 + 1) % m];
    let h1_last = cyc[i2];
    let h2_first = cyc[(i2 + 1) % m];
    let h2_last = cyc[i1];
    // the face with label c belongs to the first pairing, d to the second
    s.attach.push(((h1_first.0, h1_first.1), (0, opp(&u, d))));
    s.attach.push(((h1_last.0, h1_last.2), (0, opp(&u, c))));
    s.attach.push(((h2_first.0, h2_first.1), (1, opp(&u, c))));
    s.attach.push(((h2_last.0, h2_last.2), (1, opp(&u, d))));
    s.internal.push(((0, opp(&u, a)), (1, opp(&u, a))));
    s.internal.push(((0, opp(&u, b)), (1, opp(&u, b))));
    s.finish(t, mv)
}

fn two_zero(t: &Triangulation, edge: usize, mv: Move) -> Result<(Triangulation, MoveTrace), ComplexError> {
    let ed = t.edges();
    if edge >= ed.len() {
        return Err(ComplexError::BadSite(format!("edge id {edge} out of range")));
    }
    let members = &ed.members[edge];
    if members.len() != 2 || members[0].0 == members[1].0 {
        return Err(ComplexError::BadSite(format!("edge {edge} is not of valence 2 in two tetrahedra")));
    }
    let (u, v) = (members[0].0, members[1].0);
    if t.tets[u] != t.tets[v] {
        return Err(ComplexError::BadSite("the two tetrahedra have different vertices".into()));
    }
    let (c, d) = ed.endpoints[edge];
    let lab = t.tets[u];
    let ab: Vec<usize> = lab.iter().copied().filter(|&x| x != c && x != d).collect();
    let (a, b) = (ab[0], ab[1]);
    for x in [a, b] {
        if t.partner(u, opp(&lab, x)) != Some((v, opp(&lab, x))) {
            return Err(ComplexError::BadSite("faces around the edge are not glued in the lune pattern".into()));
        }
    }
    let h = t.hamiltonian_set();
    let ab_u = ed.edge(u, opp(&lab, a), opp(&lab, b));
    let ab_v = ed.edge(v, opp(&lab, a), opp(&lab, b));
    if h.contains(&edge) || h.contains(&ab_u) || h.contains(&ab_v) {
        return Err(ComplexError::Hamiltonian("2-0 would remove or merge edges of H".into()));
    }
    let mut s = Surgery { removed: vec![u, v], ..Default::default() };
    for x in [c, d] {
        let pu = t.partner(u, opp(&lab, x)).expect("closed");
        let pv = t.partner(v, opp(&lab, x)).expect("closed");
        if pu.0 == u || pu.0 == v || pv.0 == u || pv.0 == v {
            return Err(ComplexError::BadSite("the lune is glued to itself".into()));
        }
        s.merge.push((pu, pv));
    }
    s.finish(t, mv)
}

fn bubble_plus(
    t: &Triangulation,
    face: usize,
    position: Option<usize>,
    mv: Move,
) -> Result<(Triangulation, MoveTrace), ComplexError> {
    let p = pairing(t, face)?;
    let pos = position.unwrap_or(t.num_vertices);
    if pos > t.num_vertices {
        return Err(ComplexError::BadSite(format!("order position {pos} beyond {}", t.num_vertices)));
    }
    let relabel: Vec<Option<usize>> = (0..t.num_vertices).map(|x| Some(if x < pos { x } else { x + 1 })).collect();
    let abc = t.face_labels(p.tet_a, p.face_a).map(|x| relabel[x].unwrap());
    let nt = sorted4([abc[0], abc[1], abc[2], pos]);
    let mut s = Surgery {
        new_tets: vec![nt, nt],
        relabel: Some(relabel),
        num_vertices: Some(t.num_vertices + 1),
        ..Default::default()
    };
    s.attach.push(((p.tet_a, p.face_a), (0, opp(&nt, pos))));
    s.attach.push(((p.tet_b, p.face_b), (1, opp(&nt, pos))));
    for x in abc {
        s.internal.push(((0, opp(&nt, x)), (1, opp(&nt, x))));
    }
    s.finish(t, mv)
}

fn bubble_minus(t: &Triangulation, vertex: usize, mv: Move) -> Result<(Triangulation, MoveTrace), ComplexError> {
    if vertex >= t.num_vertices {
        return Err(ComplexError::BadSite(format!("vertex {vertex} out of range")));
    }
    let star: Vec<usize> = (0..t.tets.len()).filter(|&i| t.tets[i].contains(&vertex)).collect();
    if star.len() != 2 || t.tets[star[0]] != t.tets[star[1]] {
        return Err(ComplexError::BadSite(format!("vertex {vertex} is not the centre of a bubble")));
    }
    let (p, q) = (star[0], star[1]);
    let lab = t.tets[p];
    for &x in lab.iter().filter(|&&x| x != vertex) {
        if t.partner(p, opp(&lab, x)) != Some((q, opp(&lab, x))) {
            return Err(ComplexError::BadSite("bubble faces are not glued in the standard pattern".into()));
        }
    }
    let xp = t.partner(p, opp(&lab, vertex)).expect("closed");
    let xq = t.partner(q, opp(&lab, vertex)).expect("closed");
    if xp.0 == q || xp.0 == p || xq.0 == p || xq.0 == q {
        return Err(ComplexError::BadSite("removing the bubble leaves nothing".into()));
    }
    let relabel: Vec<Option<usize>> = (0..t.num_vertices)
        .map(|x| match x.cmp(&vertex) {
            std::cmp::Ordering::Less => Some(x),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(x - 1),
        })
        .collect();
    let s = Surgery {
        removed: vec![p, q],
        merge: vec![(xp, xq)],
        relabel: Some(relabel),
        num_vertices: Some(t.num_vertices - 1),
        ..Default::default()
    };
    s.finish(t, mv)
}

/// Hamiltonian bookkeeping specific to bubble moves (the generic edge
/// continuation handles the others).
fn adjust_hamiltonian(old: &Triangulation, new: &Triangulation, trace: &MoveTrace) -> Result<Option<Vec<usize>>, ComplexError> {
    let Some(old_h) = &old.hamiltonian else { return Ok(None) };
    let mut h: BTreeSet<usize> = new.hamiltonian.iter().flatten().copied().collect();
    let ne = new.edges();
    match trace.mv {
        Move::BubblePlus { face, .. } => {
            let p = old.pairings[face];
            let oe = old.edges();
            let lv = face_vertices(p.face_a);
            let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
            for x in 0..3 {
                for y in x + 1..3 {
                    let id = oe.edge(p.tet_a, lv[x], lv[y]);
                    if old_h.contains(&id) {
                        candidates.push((id, old.tets[p.tet_a][lv[x]], old.tets[p.tet_a][lv[y]]));
                    }
                }
            }
            let Some(&(old_id, x, y)) = candidates.iter().min() else {
                return Err(ComplexError::Hamiltonian("bubble+ face has no edge in H".into()));
            };
            let v = trace.new_vertex.expect("bubble creates a vertex");
            let (x, y) = (trace.relabel[x].unwrap(), trace.relabel[y].unwrap());
            let bubble = trace.added[0];
            let lt = new.tets[bubble];
            h.retain(|&e| trace.edge_map[e] != Some(old_id));
            h.insert(ne.edge(bubble, opp(&lt, x), opp(&lt, v)));
            h.insert(ne.edge(bubble, opp(&lt, y), opp(&lt, v)));
        }
        Move::BubbleMinus { vertex } => {
            let oe = old.edges();
            let at_v: Vec<usize> = old_h.iter().copied().filter(|&e| {
                let (a, b) = oe.endpoints[e];
                a == vertex || b == vertex
            }).collect();
            if at_v.len() != 2 {
                return Err(ComplexError::Hamiltonian(format!("vertex {vertex} meets {} edges of H, need 2", at_v.len())));
            }
            let ends: Vec<usize> = at_v
                .iter()
                .map(|&e| {
                    let (a, b) = oe.endpoints[e];
                    if a == vertex { b } else { a }
                })
                .map(|x| trace.relabel[x].unwrap())
                .collect();
            let (x, y) = (ends[0].min(ends[1]), ends[0].max(ends[1]));
            // the surviving face edge xy
            let mut found = None;
            for (t, tet) in new.tets.iter().enumerate() {
                if let (Some(i), Some(j)) = (opp_opt(tet, x), opp_opt(tet, y)) {
                    let id = ne.edge(t, i, j);
                    if trace.edge_map[id].is_some_and(|o| {
                        let (a, b) = oe.endpoints[o];
                        trace.relabel[a] == Some(x) && trace.relabel[b] == Some(y)
                    }) {
                        found = Some(id);
                        break;
                    }
                }
            }
            let id = found.ok_or_else(|| ComplexError::Hamiltonian("no edge closes H".into()))?;
            if h.contains(&id) {
                return Err(ComplexError::Hamiltonian("closing edge already in H".into()));
            }
            h.insert(id);
        }
        _ => {}
    }
    Ok(Some(h.into_iter().collect()))
}

fn opp_opt(tet: &[usize; 4], label: usize) -> Option<usize> {
    tet.iter().position(|&x| x == label)
}

/// Canonical form up to renumbering of tetrahedra with equal label sets:
/// sorted tetrahedra and the lexicographically least pairing list.
pub fn canonical_form(t: &Triangulation) -> (Vec<[usize; 4]>, Vec<FacePairing>, Vec<i8>) {
    let mut order: Vec<usize> = (0..t.tets.len()).collect();
    order.sort_by_key(|&i| (t.tets[i], t.signs[i]));
    // groups of identical (labels, sign)
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if t.tets[g[0]] == t.tets[i] && t.signs[g[0]] == t.signs[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut best: Option<Vec<FacePairing>> = None;
    let mut best_order = order.clone();
    let perms: Vec<Vec<Vec<usize>>> = groups.iter().map(|g| permutations(g)).collect();
    let total: usize = perms.iter().map(|p| p.len()).product();
    for mut idx in 0..total.min(40_320) {
        let mut ord = Vec::new();
        for p in &perms {
            ord.extend(p[idx % p.len()].iter().copied());
            idx /= p.len();
        }
        let mut pos = vec![0; t.tets.len()];
        for (k, &i) in ord.iter().enumerate() {
            pos[i] = k;
        }
        let mut ps: Vec<FacePairing> =
            t.pairings.iter().map(|p| FacePairing::new(pos[p.tet_a], p.face_a, pos[p.tet_b], p.face_b)).collect();
        ps.sort();
        if best.as_ref().is_none_or(|b| ps < *b) {
            best = Some(ps);
            best_order = ord;
        }
    }
    let tets = best_order.iter().map(|&i| t.tets[i]).collect();
    let signs = best_order.iter().map(|&i| t.signs[i]).collect();
    (tets, best.unwrap_or_default(), signs)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Equality up to renumbering of tetrahedra.
pub fn isomorphic(a: &Triangulation, b: &Triangulation) -> bool {
    a.num_vertices == b.num_vertices && canonical_form(a) == canonical_form(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_counts_and_signs() {
        let t = builtin("boundary_4_simplex").unwrap();
        let r = validate_triangulation(&t);
        assert!(r.valid(), "{r}");
        assert_eq!((r.vertices, r.edges, r.faces, r.tetrahedra), (5, 10, 10, 5));
        assert_eq!(t.signs, vec![1, -1, 1, -1, 1]);
        assert_eq!(t.signs.iter().map(|&s| s as i32).sum::<i32>(), 1);
        // propagation from tet 0 reproduces the alternating signs
        let derived = Triangulation::new("x", 5, t.tets.clone(), t.pairings.clone(), None, None).unwrap();
        assert_eq!(derived.signs, t.signs);
    }

    #[test]
    fn unknot_builtin() {
        let t = builtin("boundary_4_simplex_with_unknot").unwrap();
        let h = t.hamiltonian.clone().unwrap();
        assert_eq!(h.len(), 5);
        let e = t.edges();
        let mut covered: Vec<usize> = h.iter().flat_map(|&i| [e.endpoints[i].0, e.endpoints[i].1]).collect();
        covered.sort();
        covered.dedup();
        assert_eq!(covered, vec![0, 1, 2, 3, 4]);
        assert!(builtin("nonexistent").is_err());
    }

    #[test]
    fn invalid_inputs() {
        let single = Triangulation::new("one", 4, vec![[0, 1, 2, 3]], vec![], None, None).unwrap();
        let r = validate_triangulation(&single);
        assert!(!r.valid());
        assert!(r.failures().iter().any(|f| f.starts_with("closed")));
        // a tetrahedron with a repeated label is a folded edge
        let folded = Triangulation::new("fold", 3, vec![[0, 1, 1, 2]], vec![], None, None).unwrap();
        assert!(!validate_triangulation(&folded).valid());
    }

    #[test]
    fn reverse_flips_signs() {
        let t = builtin("boundary_4_simplex").unwrap();
        let r = reverse_orientation(&t);
        assert_eq!(r.signs, vec![-1, 1, -1, 1, -1]);
        assert_eq!(reverse_orientation(&r), t);
        assert!(validate_triangulation(&r).valid());
    }

    #[test]
    fn two_three_and_back() {
        let t = builtin("boundary_4_simplex").unwrap();
        let (n, tr) = apply_move_traced(&t, Move::TwoThree { face: 0 }).unwrap();
        let r = validate_triangulation(&n);
        assert!(r.valid(), "{r}");
        assert_eq!((r.tetrahedra, r.edges), (6, 11));
        let new_edge = tr.edge_map.iter().position(|m| m.is_none()).unwrap();
        let back = apply_move(&n, Move::ThreeTwo { edge: new_edge }).unwrap();
        assert!(isomorphic(&back, &t));
    }

    #[test]
    fn three_two_rejects_wrong_valence() {
        let t = builtin("boundary_4_simplex").unwrap();
        // every edge of the boundary of the 4-simplex has valence 3: each is a bipyramid
        // whose removal would glue two tets with equal labels; valence-4 edges must fail
        let n = apply_move(&t, Move::TwoThree { face: 0 }).unwrap();
        let e = n.edges();
        let v4 = (0..e.len()).find(|&i| e.members[i].len() == 4).unwrap();
        assert!(matches!(apply_move(&n, Move::ThreeTwo { edge: v4 }), Err(ComplexError::BadSite(_))));
    }

    #[test]
    fn bubble_round_trip() {
        let t = builtin("boundary_4_simplex").unwrap();
        let n = apply_move(&t, Move::BubblePlus { face: 3, position: None }).unwrap();
        let r = validate_triangulation(&n);
        assert!(r.valid(), "{r}");
        assert_eq!((r.vertices, r.tetrahedra), (6, 7));
        let back = apply_move(&n, Move::BubbleMinus { vertex: 5 }).unwrap();
        assert!(isomorphic(&back, &t));
        let mid = apply_move(&t, Move::BubblePlus { face: 3, position: Some(2) }).unwrap();
        assert!(validate_triangulation(&mid).valid());
        let back = apply_move(&mid, Move::BubbleMinus { vertex: 2 }).unwrap();
        assert!(isomorphic(&back, &t));
    }

    #[test]
    fn lune_round_trip() {
        let t = builtin("boundary_4_simplex").unwrap();
        // faces sharing an edge: pairings 0 and 1 of the sorted list
        let l0 = t.face_labels(t.pairings[0].tet_a, t.pairings[0].face_a);
        let l1 = t.face_labels(t.pairings[1].tet_a, t.pairings[1].face_a);
        assert_eq!(l0.iter().filter(|x| l1.contains(x)).count(), 2);
        let (n, tr) = apply_move_traced(&t, Move::ZeroTwo { face_a: 0, face_b: 1 }).unwrap();
        let r = validate_triangulation(&n);
        assert!(r.valid(), "{r}");
        assert_eq!((r.tetrahedra, r.edges), (7, 12));
        let cd = tr.edge_map.iter().position(|m| m.is_none()).unwrap();
        let back = apply_move(&n, Move::TwoZero { edge: cd }).unwrap();
        assert!(isomorphic(&back, &t));
    }

    #[test]
    fn hamiltonian_rules() {
        let t = builtin("boundary_4_simplex_with_unknot").unwrap();
        let n = apply_move(&t, Move::TwoThree { face: 0 }).unwrap();
        assert_eq!(n.hamiltonian.as_ref().unwrap().len(), 5);
        assert!(validate_triangulation(&n).valid());
        // bubble+ on a face with an H edge replaces it by two edges
        let face = (0..t.pairings.len())
            .find(|&f| {
                let p = t.pairings[f];
                let l = t.face_labels(p.tet_a, p.face_a);
                l.contains(&0) && l.contains(&1)
            })
            .unwrap();
        let b = apply_move(&t, Move::BubblePlus { face, position: None }).unwrap();
        assert_eq!(b.hamiltonian.as_ref().unwrap().len(), 6);
        assert!(validate_triangulation(&b).valid());
        let back = apply_move(&b, Move::BubbleMinus { vertex: 5 }).unwrap();
        assert_eq!(back.hamiltonian.as_ref().unwrap().len(), 5);
    }
}
