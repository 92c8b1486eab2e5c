//! Decorated transits and named invariance suites, shared by the command-line
//! front end and the integration tests.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::complex3::{apply_move_traced, builtin, ComplexError, Move, MoveTrace, Triangulation};
use crate::decorations::{
    charge_transit_to, flattening_transit_to, is_global_charge, is_global_flattening, shift_charge, shift_flattening,
    solve_charges, solve_flattenings, DecorError, GlobalCharge, GlobalFlattening,
};
use crate::dilog::{bloch_wigner, rogers_l, DilogError, PI2_6};
use crate::idealizer::{
    check_edge_compatibility, cocycle_transit, idealize, is_geometric, perturb_to_idealizable, Cocycle, IdealError,
    ITriangulation, ModularTriple, PERTURB_BUDGET,
};
use crate::qdilog::{r_matrix, CurvePoint, CyclicParams, QError};
use crate::rogers::{rogers_sum, InvariantValue, RogersError};
use crate::statesum::{
    build_tensors, contract, dual_graph, edge_roots, h_invariant_idealized, plan_contraction, PhaseClassValue,
    StateSumError, Strategy,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite `{0}`; known suites: {known}", known = SUITES.join(", "))]
    UnknownSuite(String),
    #[error("no applicable site for {0}")]
    NoSite(&'static str),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Ideal(#[from] IdealError),
    #[error(transparent)]
    Decor(#[from] DecorError),
    #[error(transparent)]
    Rogers(#[from] RogersError),
    #[error(transparent)]
    StateSum(#[from] StateSumError),
    #[error(transparent)]
    Quantum(#[from] QError),
    #[error(transparent)]
    Dilog(#[from] DilogError),
}

/// An idealized triangulation carrying its cocycle and optional decorations.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoratedState {
    pub ti: ITriangulation,
    pub flattening: Option<GlobalFlattening>,
    pub charge: Option<GlobalCharge>,
}

impl DecoratedState {
    /// Idealizes (t, z) and solves for a flattening, and for a charge when t
    /// has a Hamiltonian subcomplex.
    pub fn new(t: &Triangulation, z: &Cocycle) -> Result<Self, VerifyError> {
        let mut ti = idealize(t, z)?;
        ti.cocycle = Some(z.clone());
        let (f, _) = solve_flattenings(&ti)?;
        let charge = match t.hamiltonian {
            Some(_) => Some(solve_charges(t)?.0),
            None => None,
        };
        Ok(DecoratedState { ti, flattening: Some(f), charge })
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.ti.base
    }

    pub fn cocycle(&self) -> &Cocycle {
        self.ti.cocycle.as_ref().expect("decorated states carry a cocycle")
    }
}

/// The cocycle transit of `mv` with the induced moduli, flattening and
/// charge transits.
pub fn decorated_transit(s: &DecoratedState, mv: Move, rng_seed: u64) -> Result<(DecoratedState, MoveTrace), VerifyError> {
    let (nt, nz, trace) = cocycle_transit(&s.ti.base, s.cocycle(), mv, None, rng_seed)?;
    let mut ti = idealize(&nt, &nz)?;
    ti.cocycle = Some(nz);
    let flattening = match &s.flattening {
        Some(f) => Some(flattening_transit_to(&ti, &trace, f)?),
        None => None,
    };
    let charge = match &s.charge {
        Some(c) => Some(charge_transit_to(&nt, &trace, c)?),
        None => None,
    };
    Ok((DecoratedState { ti, flattening, charge }, trace))
}

/// New id of an old edge after a move, when it survives unsplit.
fn track_edge(old: usize, trace: &MoveTrace) -> Option<usize> {
    let hits: Vec<usize> = trace.edge_map.iter().enumerate().filter(|(_, m)| **m == Some(old)).map(|(i, _)| i).collect();
    (hits.len() == 1).then(|| hits[0])
}

fn first_applicable(t: &Triangulation, candidates: impl IntoIterator<Item = Move>) -> Option<Move> {
    candidates.into_iter().find(|mv| apply_move_traced(t, *mv).is_ok())
}

/// A mixed sequence of six transits: 2-3, 0-2, bubble+, bubble-, 2-0 and
/// 3-2, the last three undoing the first three. Returns every intermediate
/// state with the move that produced it.
pub fn mixed_transit_sequence(start: &DecoratedState, rng_seed: u64) -> Result<Vec<(Move, DecoratedState)>, VerifyError> {
    let mut out = Vec::new();
    let faces = |s: &DecoratedState| s.ti.base.pairings.len();

    let mv = first_applicable(&start.ti.base, (0..faces(start)).map(|face| Move::TwoThree { face })).ok_or(VerifyError::NoSite("2-3"))?;
    let (s1, tr1) = decorated_transit(start, mv, rng_seed)?;
    let mut e23 = tr1.edge_map.iter().position(Option::is_none).ok_or(VerifyError::NoSite("2-3 edge"))?;
    out.push((mv, s1.clone()));

    let n1 = faces(&s1);
    let cand: Vec<Move> = (0..n1).flat_map(|a| (a + 1..n1).map(move |b| Move::ZeroTwo { face_a: a, face_b: b })).collect();
    let mv = first_applicable(&s1.ti.base, cand).ok_or(VerifyError::NoSite("0-2"))?;
    let (s2, tr2) = decorated_transit(&s1, mv, rng_seed + 1)?;
    e23 = track_edge(e23, &tr2).ok_or(VerifyError::NoSite("tracked 2-3 edge"))?;
    let e2 = s2.ti.base.edges();
    let mut e02 = (0..e2.len())
        .find(|&id| e2.members[id].len() == 2 && e2.members[id].iter().all(|(t, _)| tr2.added.contains(t)))
        .ok_or(VerifyError::NoSite("0-2 edge"))?;
    out.push((mv, s2.clone()));

    let mv = first_applicable(&s2.ti.base, (0..faces(&s2)).map(|face| Move::BubblePlus { face, position: None }))
        .ok_or(VerifyError::NoSite("bubble+"))?;
    let (s3, tr3) = decorated_transit(&s2, mv, rng_seed + 2)?;
    let v = tr3.new_vertex.ok_or(VerifyError::NoSite("bubble vertex"))?;
    e23 = track_edge(e23, &tr3).ok_or(VerifyError::NoSite("tracked 2-3 edge"))?;
    e02 = track_edge(e02, &tr3).ok_or(VerifyError::NoSite("tracked 0-2 edge"))?;
    out.push((mv, s3.clone()));

    let mv = Move::BubbleMinus { vertex: v };
    let (s4, tr4) = decorated_transit(&s3, mv, rng_seed + 3)?;
    e23 = track_edge(e23, &tr4).ok_or(VerifyError::NoSite("tracked 2-3 edge"))?;
    e02 = track_edge(e02, &tr4).ok_or(VerifyError::NoSite("tracked 0-2 edge"))?;
    out.push((mv, s4.clone()));

    let mv = Move::TwoZero { edge: e02 };
    let (s5, tr5) = decorated_transit(&s4, mv, rng_seed + 4)?;
    e23 = track_edge(e23, &tr5).ok_or(VerifyError::NoSite("tracked 2-3 edge"))?;
    out.push((mv, s5.clone()));

    let mv = Move::ThreeTwo { edge: e23 };
    let (s6, _) = decorated_transit(&s5, mv, rng_seed + 5)?;
    out.push((mv, s6));
    Ok(out)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ScriptError {
    pub line: usize,
    pub msg: String,
}

/// Parses one move: `2-3 f`, `3-2 e`, `0-2 fa fb`, `2-0 e`, `bubble+ f [pos]`, `bubble- v`.
pub fn parse_move(text: &str) -> Result<Move, String> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    let nums: Result<Vec<usize>, String> =
        parts.iter().skip(1).map(|p| p.parse::<usize>().map_err(|_| format!("`{p}` is not a non-negative integer"))).collect();
    let nums = nums?;
    let arity = |k: std::ops::RangeInclusive<usize>| {
        if k.contains(&nums.len()) {
            Ok(())
        } else {
            Err(format!("`{}` takes {}..={} arguments, got {}", parts[0], k.start(), k.end(), nums.len()))
        }
    };
    match parts.first().copied() {
        Some("2-3") => arity(1..=1).map(|_| Move::TwoThree { face: nums[0] }),
        Some("3-2") => arity(1..=1).map(|_| Move::ThreeTwo { edge: nums[0] }),
        Some("0-2") => arity(2..=2).map(|_| Move::ZeroTwo { face_a: nums[0], face_b: nums[1] }),
        Some("2-0") => arity(1..=1).map(|_| Move::TwoZero { edge: nums[0] }),
        Some("bubble+") => arity(1..=2).map(|_| Move::BubblePlus { face: nums[0], position: nums.get(1).copied() }),
        Some("bubble-") => arity(1..=1).map(|_| Move::BubbleMinus { vertex: nums[0] }),
        Some(other) => Err(format!("unknown move `{other}`")),
        None => Err("empty move".into()),
    }
}

/// One move per line; blank lines and `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<Move>, ScriptError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_move(line).map_err(|msg| ScriptError { line: i + 1, msg })?);
    }
    Ok(out)
}

/// An idealizable trivial-character cocycle on a builtin triangulation.
pub fn trivial_character(t: &Triangulation, seed: u64) -> Result<Cocycle, VerifyError> {
    Ok(perturb_to_idealizable(t, &Cocycle::trivial(t.edges().len()), seed, PERTURB_BUDGET)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckResult {
    /// Passes when value <= tol.
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        CheckResult { name: name.into(), value, tol, pass: value <= tol }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        CheckResult { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tol: 1.0, pass: ok }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<44} value {:<12.4e} tol {:<10.1e} {}", self.name, self.value, self.tol, if self.pass { "PASS" } else { "FAIL" })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Overrides every check's own tolerance when set.
    pub tol: Option<f64>,
    pub memory_limit: usize,
    pub n: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0, tol: None, memory_limit: crate::statesum::DEFAULT_MEMORY_LIMIT, n: 3 }
    }
}

impl SuiteConfig {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

pub const SUITES: [&str; 7] = ["dilog", "s3", "transit", "flattening", "quantum", "contraction", "hn"];

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<SuiteReport, VerifyError> {
    let checks = match name {
        "dilog" => dilog_suite(cfg)?,
        "s3" => s3_suite(cfg)?,
        "transit" => transit_suite(cfg)?,
        "flattening" => flattening_suite(cfg)?,
        "quantum" => quantum_suite(cfg)?,
        "contraction" => contraction_suite(cfg)?,
        "hn" => hn_suite(cfg)?,
        other => return Err(VerifyError::UnknownSuite(other.into())),
    };
    Ok(SuiteReport { name: name.into(), checks })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A point of the box [-3,3]^2 away from 0 and 1.
fn random_generic(rng: &mut ChaCha8Rng) -> Complex64 {
    loop {
        let z = c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        if z.norm() > 0.05 && (z - 1.0).norm() > 0.05 && z.im.abs() > 1e-3 {
            return z;
        }
    }
}

/// Samples for the Schaeffer identity: Im y > 0 and x inside the triangle (0, 1, y).
pub fn schaeffer_sample(rng: &mut ChaCha8Rng) -> (Complex64, Complex64) {
    loop {
        let y = c(rng.random_range(-1.5..2.5), rng.random_range(0.05..2.0));
        let (a, b): (f64, f64) = (rng.random_range(0.02..0.98), rng.random_range(0.02..0.98));
        if a + b >= 0.98 {
            continue;
        }
        let x = a * c(1.0, 0.0) + b * y;
        if (x - y).norm() > 0.02 && x.norm() > 0.02 && (x - 1.0).norm() > 0.02 {
            return (x, y);
        }
    }
}

fn dilog_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut sym, mut five, mut schaeffer) = (0f64, 0f64, 0f64);
    for _ in 0..1000 {
        let w = ModularTriple::from_w0(random_generic(&mut rng))?;
        let d0 = bloch_wigner(w.w[0])?;
        for z in w.w {
            sym = sym.max((bloch_wigner(z)? - d0).abs()).max((bloch_wigner(z.inv())? + d0).abs());
        }
        let (x, y) = (random_generic(&mut rng), random_generic(&mut rng));
        let lhs = bloch_wigner(y)? + bloch_wigner((1.0 - x.inv()) / (1.0 - y.inv()))?;
        let rhs = bloch_wigner(x)? + bloch_wigner(y / x)? + bloch_wigner((1.0 - x) / (1.0 - y))?;
        five = five.max((lhs - rhs).abs());
        let (x, y) = schaeffer_sample(&mut rng);
        let r = rogers_l(x)? - rogers_l(y)? + rogers_l(y / x)? - rogers_l((1.0 - x.inv()) / (1.0 - y.inv()))?
            + rogers_l((1.0 - x) / (1.0 - y))?;
        schaeffer = schaeffer.max(r.norm());
    }
    Ok(vec![
        CheckResult::at_most("Bloch-Wigner six-fold symmetry", sym, cfg.tol(1e-10)),
        CheckResult::at_most("Bloch-Wigner five-term relation", five, cfg.tol(1e-10)),
        CheckResult::at_most("Rogers five-term relation on its domain", schaeffer, cfg.tol(1e-10)),
    ])
}

fn zero_value(like: &InvariantValue) -> InvariantValue {
    InvariantValue { value: c(0.0, 0.0), ..like.clone() }
}

/// Distance from a complex value to the lattice (pi^2/6) Z.
pub fn distance_mod(a: Complex64, b: Complex64, modulus: f64) -> f64 {
    let d = a - b;
    let k = (d.re / modulus).round();
    c(d.re - k * modulus, d.im).norm()
}

fn s3_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, VerifyError> {
    let t = builtin("boundary_4_simplex")?;
    let (mut worst_mod, mut worst_im, mut worst_compat) = (0f64, 0f64, 0f64);
    let mut nongeometric = true;
    for seed in 0..20 {
        let z = trivial_character(&t, cfg.seed + seed)?;
        let s = DecoratedState::new(&t, &z)?;
        let r = rogers_sum(&s.ti, s.flattening.as_ref().unwrap())?;
        worst_mod = worst_mod.max(distance_mod(r.value, zero_value(&r).value, PI2_6));
        worst_im = worst_im.max(r.value.im.abs());
        worst_compat = worst_compat.max(check_edge_compatibility(&s.ti)?.max_deviation);
        nongeometric &= s.ti.moduli.iter().zip(&t.signs).any(|(w, &sb)| !is_geometric(w, sb));
    }
    Ok(vec![
        CheckResult::at_most("R = 0 mod pi^2/6 (20 cocycles)", worst_mod, cfg.tol(1e-8)),
        CheckResult::at_most("|Im R| (20 cocycles)", worst_im, cfg.tol(1e-8)),
        CheckResult::at_most("edge compatibility", worst_compat, cfg.tol(1e-9)),
        CheckResult::flag("non-geometric tetrahedron present", nongeometric),
    ])
}

fn transit_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, VerifyError> {
    let t = builtin("boundary_4_simplex_with_unknot")?;
    let z = trivial_character(&t, cfg.seed)?;
    let start = DecoratedState::new(&t, &z)?;
    let seq = mixed_transit_sequence(&start, cfg.seed)?;
    let cp = CyclicParams::new(cfg.n)?;
    let r0 = rogers_sum(&start.ti, start.flattening.as_ref().unwrap())?;
    let h0 = h_invariant_idealized(&start.ti, start.charge.as_ref().unwrap(), &cp, cfg.memory_limit)?;
    let (mut dr, mut dim, mut dabs) = (0f64, 0f64, 0f64);
    let mut phase_ok = true;
    for (_, s) in &seq {
        let r = rogers_sum(&s.ti, s.flattening.as_ref().unwrap())?;
        dr = dr.max(distance_mod(r.value, r0.value, PI2_6));
        dim = dim.max((r.value.im - r0.value.im).abs());
        let h = h_invariant_idealized(&s.ti, s.charge.as_ref().unwrap(), &cp, cfg.memory_limit)?;
        dabs = dabs.max((h.modulus() - h0.modulus()).abs());
        phase_ok &= h.phase_equal(&h0, 1e-8);
    }
    Ok(vec![
        CheckResult::at_most(format!("R congruence over {} transits", seq.len()), dr, cfg.tol(1e-8)),
        CheckResult::at_most("Im R equality", dim, cfg.tol(1e-8)),
        CheckResult::at_most("|H_N| equality", dabs, cfg.tol(1e-8)),
        CheckResult::flag("H_N phase class preserved", phase_ok),
    ])
}

fn flattening_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, VerifyError> {
    let t = builtin("boundary_4_simplex")?;
    let z = trivial_character(&t, cfg.seed)?;
    let s = DecoratedState::new(&t, &z)?;
    let (f, basis) = solve_flattenings(&s.ti)?;
    let r0 = rogers_sum(&s.ti, &f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut worst, mut exact) = (0f64, true);
    for _ in 0..10 {
        let mut g = f.clone();
        for v in &basis {
            g = shift_flattening(&g, v, rng.random_range(-2..=2));
        }
        exact &= is_global_flattening(&s.ti, &g, 1e-9);
        worst = worst.max(distance_mod(rogers_sum(&s.ti, &g)?.value, r0.value, PI2_6));
    }
    Ok(vec![
        CheckResult::flag("perturbed flattenings satisfy constraints", exact),
        CheckResult::at_most("R congruence over 10 lattice moves", worst, cfg.tol(1e-8)),
    ])
}

fn quantum_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();
    for n in [3, 5, 7] {
        let cp = CyclicParams::new(n)?;
        let mut worst = 0f64;
        for _ in 0..50 {
            let w = ModularTriple::from_w0(random_generic(&mut rng))?;
            let pt = CurvePoint::from_roots(crate::qdilog::principal_roots(&w, &cp));
            worst = worst.max(inverse_defect(&r_matrix(&pt, &cp, false)?, &r_matrix(&pt, &cp, true)?));
        }
        checks.push(CheckResult::at_most(format!("R R-bar = identity, N = {n}"), worst, cfg.tol(1e-10)));
    }
    Ok(checks)
}

/// max |sum_{c,d} R[a,b,c,d] Rbar[e,f,c,d] - delta_ae delta_bf|.
pub fn inverse_defect(r: &crate::qdilog::QTensor, rb: &crate::qdilog::QTensor) -> f64 {
    let n = r.n;
    let mut worst = 0f64;
    for a in 0..n {
        for b in 0..n {
            for e in 0..n {
                for f in 0..n {
                    let mut s = c(0.0, 0.0);
                    for cc in 0..n {
                        for d in 0..n {
                            s += r.get(a, b, cc, d) * rb.get(e, f, cc, d);
                        }
                    }
                    let id = if a == e && b == f { 1.0 } else { 0.0 };
                    worst = worst.max((s - id).norm());
                }
            }
        }
    }
    worst
}

fn contraction_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, VerifyError> {
    let cp = CyclicParams::new(cfg.n)?;
    let t = builtin("boundary_4_simplex_with_unknot")?;
    let mut worst = 0f64;
    let mut count = 0;
    for k in 0..4u64 {
        let z = trivial_character(&t, cfg.seed + k)?;
        let s = DecoratedState::new(&t, &z)?;
        let mut states = vec![s.clone()];
        let (s1, _) = decorated_transit(&s, Move::TwoThree { face: k as usize }, cfg.seed + k)?;
        states.push(s1);
        for st in states {
            let g = dual_graph(&st.ti.base)?;
            let roots = edge_roots(&st.ti, &cp)?;
            let tensors = build_tensors(&st.ti, &roots, st.charge.as_ref(), &cp)?;
            let plan = plan_contraction(&g, cp.n, cfg.memory_limit)?;
            let a = contract(&g, &tensors, &Strategy::Planned(plan))?;
            let b = contract(&g, &tensors, &Strategy::BruteForce)?;
            worst = worst.max((a - b).norm() / b.norm().max(1e-300));
            count += 1;
        }
    }
    Ok(vec![CheckResult::at_most(format!("planned vs brute force ({count} complexes)"), worst, cfg.tol(1e-10))])
}

fn hn_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, VerifyError> {
    let cp = CyclicParams::new(cfg.n)?;
    let t = builtin("boundary_4_simplex_with_unknot")?;
    let z = trivial_character(&t, cfg.seed)?;
    let s = DecoratedState::new(&t, &z)?;
    let (c0, basis) = solve_charges(&t)?;
    let h0 = h_invariant_idealized(&s.ti, &c0, &cp, cfg.memory_limit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut dabs, mut phase, mut valid) = (0f64, true, true);
    for _ in 0..5 {
        let mut c = c0.clone();
        for v in &basis {
            c = shift_charge(&c, v, rng.random_range(-1..=1));
        }
        valid &= is_global_charge(&t, &c);
        let h: PhaseClassValue = h_invariant_idealized(&s.ti, &c, &cp, cfg.memory_limit)?;
        dabs = dabs.max((h.modulus() - h0.modulus()).abs());
        phase &= h.phase_equal(&h0, 1e-8);
    }
    Ok(vec![
        CheckResult::flag("perturbed charges satisfy constraints", valid),
        CheckResult::at_most("|H_N| over 5 charge-lattice moves", dabs, cfg.tol(1e-8)),
        CheckResult::flag("H_N phase class over charge-lattice moves", phase),
    ])
}
