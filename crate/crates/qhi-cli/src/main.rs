//! Command-line front end: bundle validation, idealization, decorations,
//! the dilogarithmic invariant, state sums, transit scripts and the named
//! verification suites.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qhi::bundle::{builtin_bundle, emit_bundle, read_bundle, Bundle, BundleError, FACE_TOL};
use qhi::complex3::{validate_triangulation, ComplexError, BUILTINS};
use qhi::decorations::{
    edge_branch_sums, edge_charge_sums, is_global_charge, is_global_flattening, solve_charges, solve_flattenings,
    DecorError,
};
use qhi::dilog::{tet_volume, DilogError};
use qhi::idealizer::{check_edge_compatibility, idealize, perturb_to_idealizable, IdealError, PERTURB_BUDGET};
use qhi::qdilog::{asymptotic_family_point, asymptotic_ratio, QError};
use qhi::rogers::{export_formal_class, link_rogers, rogers_sum, Decoration, RogersError};
use qhi::statesum::{h_invariant_idealized, PhaseClassValue, StateSumError, DEFAULT_MEMORY_LIMIT};
use qhi::verify::{
    decorated_transit, parse_script, run_suite, CheckResult, DecoratedState, SuiteConfig, VerifyError, SUITES,
};
use qhi::{Cocycle, Complex64, CyclicParams, ITriangulation, Triangulation};
use serde_json::{json, Value};

const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "qhi", version, about = "Dilogarithmic and quantum hyperbolic invariants of triangulated 3-manifolds")]
struct Cli {
    /// Numerical tolerance for checks [default: 1e-9, or the bundle's config]
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// RNG seed [default: 0, or the bundle's config]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest intermediate tensor size, in complex entries
    #[arg(long, global = true)]
    memory_limit: Option<usize>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a bundle
    Validate { bundle: String },
    /// List canonical edge ids with endpoints and valences
    Edges { bundle: String },
    /// Cross-ratio moduli of every tetrahedron and the edge compatibility check
    Idealize { bundle: String },
    /// Perturb the cocycle (trivial if absent) to an idealizable one
    Perturb {
        bundle: String,
        /// Write the perturbed bundle here instead of printing it
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve for (or check the bundle's) global flattening
    Flatten {
        bundle: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve for (or check the bundle's) global charge
    Charge {
        bundle: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// The dilogarithmic invariant mod pi^2/6
    Rogers {
        bundle: String,
        /// Closed edge path for the link-sensitive value, e.g. "0+,3-,5+"
        #[arg(long)]
        link: Option<String>,
    },
    /// The quantum hyperbolic state sum H_N
    Statesum {
        bundle: String,
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Apply a move script and check invariance after each move
    Transit {
        bundle: String,
        #[arg(long)]
        script: PathBuf,
        /// Also track H_N along the script
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a named invariance suite, or `all`
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
    },
    /// Large-N comparison of the quantum dilogarithm with its classical limit
    Asymptotics {
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        #[arg(long, default_value_t = 2.0)]
        z: f64,
        #[arg(long, default_value_t = 0)]
        n: i64,
        #[arg(long = "N-list", value_delimiter = ',', default_values_t = [51usize, 101, 201])]
        n_list: Vec<usize>,
    },
    /// Export the formal class as sorted (sign, w0, triple) entries
    ExportClass {
        bundle: String,
        #[arg(long, value_enum, default_value_t = DecorationKind::Flattening)]
        decoration: DecorationKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecorationKind {
    Flattening,
    Charge,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

macro_rules! validation_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}

macro_rules! numeric_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numeric(e.to_string())
            }
        }
    )*};
}

validation_errors!(ComplexError, DecorError);
numeric_errors!(IdealError, QError, DilogError, RogersError, StateSumError);

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::UnknownSuite(_) => CliError::Usage(e.to_string()),
            VerifyError::NoSite(_) | VerifyError::Complex(_) | VerifyError::Decor(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

/// Effective configuration after merging flags over bundle overrides.
#[derive(Debug, Clone, Copy)]
struct Settings {
    tol: f64,
    seed: u64,
    memory_limit: usize,
}

impl Settings {
    fn resolve(cli: &Cli, b: Option<&Bundle>) -> Self {
        let cfg = b.map(|b| b.config.clone()).unwrap_or_default();
        Settings {
            tol: cli.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL),
            seed: cli.seed.or(cfg.seed).unwrap_or(0),
            memory_limit: cli.memory_limit.or(cfg.memory_limit).unwrap_or(DEFAULT_MEMORY_LIMIT),
        }
    }
}

/// An ordered report: named fields followed by pass/fail checks.
struct Report {
    command: &'static str,
    config: Vec<(String, Value)>,
    fields: Vec<(String, String, Value)>,
    checks: Vec<CheckResult>,
}

impl Report {
    fn new(command: &'static str, s: &Settings) -> Self {
        let config = vec![
            ("seed".into(), json!(s.seed)),
            ("tol".into(), json!(s.tol)),
            ("memory_limit".into(), json!(s.memory_limit)),
        ];
        Report { command, config, fields: Vec::new(), checks: Vec::new() }
    }

    fn config(&mut self, key: &str, v: Value) {
        self.config.push((key.into(), v));
    }

    fn field(&mut self, key: impl Into<String>, text: impl Display, v: Value) {
        self.fields.push((key.into(), text.to_string(), v));
    }

    fn text(&mut self, key: impl Into<String>, text: impl Display) {
        let t = text.to_string();
        self.fields.push((key.into(), t.clone(), Value::String(t)));
    }

    fn check(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Text => {
                let mut out = format!("command: {}\n", self.command);
                for (k, v) in &self.config {
                    out += &format!("config.{k}: {}\n", plain(v));
                }
                for (k, t, _) in &self.fields {
                    out += &format!("{k}: {t}\n");
                }
                for c in &self.checks {
                    out += &format!("check {c}\n");
                }
                if !self.checks.is_empty() {
                    out += &format!("result: {}\n", if self.passed() { "PASS" } else { "FAIL" });
                }
                out
            }
            Format::Machine => {
                let config: serde_json::Map<String, Value> = self.config.iter().cloned().collect();
                let fields: serde_json::Map<String, Value> = self.fields.iter().map(|(k, _, v)| (k.clone(), v.clone())).collect();
                let checks: Vec<Value> = self
                    .checks
                    .iter()
                    .map(|c| json!({"name": c.name, "value": c.value, "tol": c.tol, "pass": c.pass}))
                    .collect();
                let v = json!({
                    "command": self.command,
                    "config": config,
                    "fields": fields,
                    "checks": checks,
                    "pass": self.passed(),
                });
                format!("{v}\n")
            }
        }
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn fmt_c(z: Complex64) -> String {
    let tidy = |x: f64| if x.abs() < 5e-13 { 0.0 } else { x };
    format!("{:.12} {:+.12}i", tidy(z.re), tidy(z.im))
}

fn json_c(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// `builtin:<name>` or a path to a JSON bundle.
fn load_bundle(src: &str) -> Result<Bundle, CliError> {
    match src.strip_prefix("builtin:") {
        Some(name) => builtin_bundle(name)
            .map_err(|e| CliError::Usage(format!("{e}; available: {}", BUILTINS.map(|b| format!("builtin:{b}")).join(", ")))),
        None => Ok(read_bundle(Path::new(src))?),
    }
}

fn need_cocycle(b: &Bundle) -> Result<&Cocycle, CliError> {
    b.cocycle
        .as_ref()
        .ok_or_else(|| CliError::Validation("bundle has no cocycle; produce one with `qhi perturb`".into()))
}

fn idealized(b: &Bundle) -> Result<ITriangulation, CliError> {
    let z = need_cocycle(b)?;
    let mut ti = idealize(&b.triangulation, z)?;
    ti.cocycle = Some(z.clone());
    Ok(ti)
}

fn n_params(n: Option<usize>, b: Option<&Bundle>) -> Result<CyclicParams, CliError> {
    let n = n
        .or(b.and_then(|b| b.config.n))
        .ok_or_else(|| CliError::Usage("--N <odd> is required (or set \"N\" in the bundle config)".into()))?;
    CyclicParams::new(n).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_or_print(b: &Bundle, output: Option<&Path>, report: &mut Report) -> Result<Option<String>, CliError> {
    let text = emit_bundle(b);
    match output {
        Some(p) => {
            std::fs::write(p, text + "\n").map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
            report.text("output", p.display());
            Ok(None)
        }
        None => Ok(Some(text + "\n")),
    }
}

fn phase_fields(r: &mut Report, prefix: &str, h: &PhaseClassValue) {
    r.field(format!("{prefix}.value"), fmt_c(h.value), json_c(h.value));
    r.field(format!("{prefix}.modulus"), format!("{:.12}", h.modulus()), json!(h.modulus()));
    r.field(
        format!("{prefix}.arg_mod_pi_over_N"),
        format!("{:.12} (mod pi/{})", h.arg_class(), h.n),
        json!(h.arg_class()),
    );
}

fn edge_label(t: &Triangulation, id: usize) -> String {
    let e = t.edges();
    let (a, b) = e.endpoints[id];
    format!("{a}-{b}")
}

fn parse_link(spec: &str) -> Result<Vec<(usize, bool)>, CliError> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (num, fwd) = match s.strip_suffix('-') {
                Some(n) => (n, false),
                None => (s.strip_suffix('+').unwrap_or(s), true),
            };
            num.parse::<usize>().map(|e| (e, fwd)).map_err(|_| CliError::Usage(format!("bad link step `{s}`; expected e.g. 3+ or 3-")))
        })
        .collect()
}

/// Runs the command; returns the report and, for bundle-producing commands
/// without --output, the bundle text to print instead.
fn run(cli: &Cli) -> Result<(Report, Option<String>), CliError> {
    match &cli.command {
        Command::Validate { bundle } => {
            let b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let t = &b.triangulation;
            let mut r = Report::new("validate", &s);
            let v = validate_triangulation(t);
            r.text("name", &t.name);
            r.field("counts", format!("V={} E={} F={} T={}", v.vertices, v.edges, v.faces, v.tetrahedra), json!([v.vertices, v.edges, v.faces, v.tetrahedra]));
            r.field("euler_characteristic", v.euler_characteristic(), json!(v.euler_characteristic()));
            r.field("signs", format!("{:?}", t.signs), json!(t.signs));
            if let Some(h) = &t.hamiltonian {
                r.field("hamiltonian", format!("{h:?}"), json!(h));
            }
            for c in &v.checks {
                r.check(CheckResult::flag(c.name, c.ok));
            }
            if let Some(z) = &b.cocycle {
                let (res, _, _) = z.max_face_residual(t)?;
                r.check(CheckResult::at_most("cocycle face condition", res, FACE_TOL));
                if let Some(f) = &b.flattening {
                    let ti = idealized(&b)?;
                    r.check(CheckResult::flag("flattening is global", is_global_flattening(&ti, f, s.tol.max(1e-9))));
                }
            }
            if let Some(c) = &b.charge {
                r.check(CheckResult::flag("charge is global", is_global_charge(t, c)));
            }
            Ok((r, None))
        }
        Command::Edges { bundle } => {
            let b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let t = &b.triangulation;
            let mut r = Report::new("edges", &s);
            let e = t.edges();
            let ham = t.hamiltonian_set();
            r.field("num_edges", e.len(), json!(e.len()));
            for id in 0..e.len() {
                let (a, bb) = e.endpoints[id];
                let h = ham.contains(&id);
                r.field(
                    format!("edge {id}"),
                    format!("{a}-{bb} valence {}{}", e.members[id].len(), if h { " hamiltonian" } else { "" }),
                    json!({"endpoints": [a, bb], "valence": e.members[id].len(), "hamiltonian": h}),
                );
            }
            Ok((r, None))
        }
        Command::Idealize { bundle } => {
            let b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let ti = idealized(&b)?;
            let mut r = Report::new("idealize", &s);
            let mut volume = 0.0;
            for (tet, w) in ti.moduli.iter().enumerate() {
                let sign = ti.base.signs[tet];
                volume += tet_volume(w, sign)?;
                let star_w = if w.w[0].im >= 0.0 { 1 } else { -1 };
                r.field(
                    format!("tet {tet}"),
                    format!("sign {sign:+} w0 {} w1 {} w2 {} star_w {star_w:+}", fmt_c(w.w[0]), fmt_c(w.w[1]), fmt_c(w.w[2])),
                    json!({"sign": sign, "w": w.w.map(json_c), "star_w": star_w}),
                );
            }
            r.field("volume", format!("{volume:.12}"), json!(volume));
            let compat = check_edge_compatibility(&ti)?;
            r.field("worst_edge", compat.worst_edge, json!(compat.worst_edge));
            r.check(CheckResult::at_most("edge compatibility", compat.max_deviation, s.tol.max(1e-12)));
            Ok((r, None))
        }
        Command::Perturb { bundle, output } => {
            let mut b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let t = &b.triangulation;
            let start = b.cocycle.clone().unwrap_or_else(|| Cocycle::trivial(t.edges().len()));
            let z = perturb_to_idealizable(t, &start, s.seed, PERTURB_BUDGET)?;
            let (res, _, _) = z.max_face_residual(t)?;
            b.cocycle = Some(z);
            b.flattening = None;
            b.config.seed = Some(s.seed);
            let mut r = Report::new("perturb", &s);
            r.check(CheckResult::at_most("cocycle face condition", res, FACE_TOL));
            let printed = write_or_print(&b, output.as_deref(), &mut r)?;
            Ok((r, printed))
        }
        Command::Flatten { bundle, output } => {
            let mut b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let ti = idealized(&b)?;
            let mut r = Report::new("flatten", &s);
            let f = match &b.flattening {
                Some(f) => {
                    r.text("source", "bundle");
                    f.clone()
                }
                None => {
                    let (f, basis) = solve_flattenings(&ti)?;
                    r.text("source", "solved");
                    r.field("lattice_rank", basis.len(), json!(basis.len()));
                    f
                }
            };
            for (tet, x) in f.triples.iter().enumerate() {
                r.field(format!("tet {tet}"), format!("{:?}", x.0), json!(x.0));
            }
            let worst = edge_branch_sums(&ti, &f).iter().map(|v| v.norm()).fold(0.0, f64::max);
            r.check(CheckResult::at_most("edge log-branch sums vanish", worst, s.tol.max(1e-9)));
            r.check(CheckResult::flag("flattening is global", is_global_flattening(&ti, &f, s.tol.max(1e-9))));
            b.flattening = Some(f);
            let printed = if output.is_some() { write_or_print(&b, output.as_deref(), &mut r)? } else { None };
            Ok((r, printed))
        }
        Command::Charge { bundle, output } => {
            let mut b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let t = &b.triangulation;
            let mut r = Report::new("charge", &s);
            let c = match &b.charge {
                Some(c) => {
                    r.text("source", "bundle");
                    c.clone()
                }
                None => {
                    let (c, basis) = solve_charges(t)?;
                    r.text("source", "solved");
                    r.field("lattice_rank", basis.len(), json!(basis.len()));
                    c
                }
            };
            for (tet, x) in c.triples.iter().enumerate() {
                r.field(format!("tet {tet}"), format!("{:?}", x.0), json!(x.0));
            }
            let sums = edge_charge_sums(t, &c);
            r.field("edge_sums", format!("{sums:?}"), json!(sums));
            r.check(CheckResult::flag("charge is global", is_global_charge(t, &c)));
            b.charge = Some(c);
            let printed = if output.is_some() { write_or_print(&b, output.as_deref(), &mut r)? } else { None };
            Ok((r, printed))
        }
        Command::Rogers { bundle, link } => {
            let b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let ti = idealized(&b)?;
            let mut r = Report::new("rogers", &s);
            let f = match &b.flattening {
                Some(f) => f.clone(),
                None => solve_flattenings(&ti)?.0,
            };
            let v = rogers_sum(&ti, &f)?;
            r.field("value", &v, json!({"re": v.canonical().re, "im": v.canonical().im, "modulus": "pi^2/6"}));
            r.field("decoration_hash", format!("{:016x}", v.decoration_hash), json!(format!("{:016x}", v.decoration_hash)));
            if let Some(spec) = link {
                let path = parse_link(spec)?;
                let ne = ti.base.edges().len();
                if let Some(&(bad, _)) = path.iter().find(|(e, _)| *e >= ne) {
                    return Err(CliError::Validation(format!("link edge {bad} does not exist ({ne} edges)")));
                }
                let route: Vec<String> = path.iter().map(|&(e, fwd)| format!("{}{}", edge_label(&ti.base, e), if fwd { "" } else { "'" })).collect();
                let l = link_rogers(&ti, &f, need_cocycle(&b)?, &path)?;
                r.text("link_path", route.join(" "));
                r.field("link_trace", fmt_c(l.trace), json_c(l.trace));
                r.field("link_value", &l.value, json!({"re": l.value.canonical().re, "im": l.value.canonical().im, "modulus": "pi^2/6"}));
            }
            Ok((r, None))
        }
        Command::Statesum { bundle, n } => {
            let b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let cp = n_params(*n, Some(&b))?;
            let ti = idealized(&b)?;
            let mut r = Report::new("statesum", &s);
            r.config("N", json!(cp.n));
            let c = match &b.charge {
                Some(c) => c.clone(),
                None => solve_charges(&b.triangulation)?.0,
            };
            if !is_global_charge(&b.triangulation, &c) {
                return Err(CliError::Validation("charge is not a global charge".into()));
            }
            let h = h_invariant_idealized(&ti, &c, &cp, s.memory_limit)?;
            phase_fields(&mut r, "H", &h);
            Ok((r, None))
        }
        Command::Transit { bundle, script, n, output } => {
            let b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let text = std::fs::read_to_string(script)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", script.display())))?;
            let moves = parse_script(&text).map_err(|e| CliError::Usage(format!("{}: {e}", script.display())))?;
            let cp = match n.or(b.config.n) {
                Some(_) => Some(n_params(*n, Some(&b))?),
                None => None,
            };
            let z = need_cocycle(&b)?;
            let mut state = DecoratedState::new(&b.triangulation, z)?;
            if let Some(f) = &b.flattening {
                state.flattening = Some(f.clone());
            }
            if let Some(c) = &b.charge {
                state.charge = Some(c.clone());
            }
            let mut r = Report::new("transit", &s);
            if let Some(cp) = &cp {
                r.config("N", json!(cp.n));
            }
            r.text("script", script.display());
            let f0 = state.flattening.clone().ok_or(CliError::Numeric("no flattening".into()))?;
            let r0 = rogers_sum(&state.ti, &f0)?;
            r.field("step 0", format!("start tets {} R {r0}", state.ti.moduli.len()), json!({"tets": state.ti.moduli.len(), "rogers": json_c(r0.value)}));
            let h_of = |st: &DecoratedState, cp: &CyclicParams| -> Result<Option<PhaseClassValue>, CliError> {
                match &st.charge {
                    Some(c) => Ok(Some(h_invariant_idealized(&st.ti, c, cp, s.memory_limit)?)),
                    None => Ok(None),
                }
            };
            let h0 = match &cp {
                Some(cp) => h_of(&state, cp)?,
                None => None,
            };
            if let Some(h) = &h0 {
                phase_fields(&mut r, "step 0.H", h);
            }
            for (i, mv) in moves.iter().enumerate() {
                let (next, _) = decorated_transit(&state, *mv, s.seed.wrapping_add(i as u64))
                    .map_err(|e| match e {
                        VerifyError::Complex(c) => CliError::Validation(format!("step {} ({mv}): {c}", i + 1)),
                        other => CliError::from(other),
                    })?;
                state = next;
                let f = state.flattening.as_ref().ok_or(CliError::Numeric("no flattening".into()))?;
                let ri = rogers_sum(&state.ti, f)?;
                r.field(
                    format!("step {}", i + 1),
                    format!("{mv} tets {} R {ri}", state.ti.moduli.len()),
                    json!({"move": mv.to_string(), "tets": state.ti.moduli.len(), "rogers": json_c(ri.value)}),
                );
                r.check(CheckResult::at_most(
                    format!("step {} R congruent", i + 1),
                    qhi::verify::distance_mod(ri.value, r0.value, ri.modulus),
                    s.tol.max(1e-9),
                ));
                if let (Some(cp), Some(h0)) = (&cp, &h0) {
                    if let Some(h) = h_of(&state, cp)? {
                        phase_fields(&mut r, &format!("step {}.H", i + 1), &h);
                        r.check(CheckResult::flag(format!("step {} H_N phase-equal", i + 1), h.phase_equal(h0, s.tol.max(1e-9))));
                    }
                }
            }
            let printed = match output {
                Some(_) => {
                    let mut nb = Bundle::new(state.ti.base.clone());
                    nb.cocycle = state.ti.cocycle.clone();
                    nb.flattening = state.flattening.clone();
                    nb.charge = state.charge.clone();
                    nb.config = b.config.clone();
                    write_or_print(&nb, output.as_deref(), &mut r)?
                }
                None => None,
            };
            Ok((r, printed))
        }
        Command::Verify { suite, n } => {
            let s = Settings::resolve(cli, None);
            let mut r = Report::new("verify", &s);
            r.config("N", json!(n));
            let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite.as_str()] };
            let cfg = SuiteConfig { seed: s.seed, tol: cli.tol, memory_limit: s.memory_limit, n: *n };
            for name in names {
                let rep = run_suite(name, &cfg)?;
                r.text(format!("suite {name}"), if rep.passed() { "PASS" } else { "FAIL" });
                for c in rep.checks {
                    r.check(CheckResult { name: format!("{name}: {}", c.name), ..c });
                }
            }
            Ok((r, None))
        }
        Command::Asymptotics { x, z, n, n_list } => {
            let s = Settings::resolve(cli, None);
            let mut r = Report::new("asymptotics", &s);
            r.config("x", json!(x));
            r.config("z", json!(z));
            r.config("n", json!(n));
            for &nn in n_list {
                let cp = CyclicParams::new(nn).map_err(|e| CliError::Usage(e.to_string()))?;
                let pt = asymptotic_family_point(*x, *z, &cp);
                let ratio = asymptotic_ratio(&pt, *n, &cp)?;
                r.field(
                    format!("N {nn}"),
                    format!("ratio {} |ratio| {:.6e} |ratio - 1| {:.6e}", fmt_c(ratio), ratio.norm(), (ratio - 1.0).norm()),
                    json!({"ratio": json_c(ratio), "abs": ratio.norm(), "distance_to_one": (ratio - 1.0).norm()}),
                );
            }
            Ok((r, None))
        }
        Command::ExportClass { bundle, decoration } => {
            let b = load_bundle(bundle)?;
            let s = Settings::resolve(cli, Some(&b));
            let ti = idealized(&b)?;
            let mut r = Report::new("export-class", &s);
            let entries = match decoration {
                DecorationKind::Flattening => {
                    let f = match &b.flattening {
                        Some(f) => f.clone(),
                        None => solve_flattenings(&ti)?.0,
                    };
                    export_formal_class(&ti, Decoration::Flattening(&f))?
                }
                DecorationKind::Charge => {
                    let c = match &b.charge {
                        Some(c) => c.clone(),
                        None => solve_charges(&b.triangulation)?.0,
                    };
                    export_formal_class(&ti, Decoration::Charge(&c))?
                }
            };
            for (i, e) in entries.iter().enumerate() {
                r.field(
                    format!("entry {i}"),
                    format!("{:+} {} {:?}", e.sign, fmt_c(e.w0), e.triple),
                    json!({"sign": e.sign, "w0": json_c(e.w0), "triple": e.triple}),
                );
            }
            Ok((r, None))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok((report, printed)) => {
            match printed {
                Some(bundle) => print!("{bundle}"),
                None => print!("{}", report.render(cli.format)),
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            match cli.format {
                Format::Text => eprintln!("error: {}", e.message()),
                Format::Machine => println!("{}", json!({"error": e.message(), "exit_code": e.code()})),
            }
            ExitCode::from(e.code())
        }
    }
}
