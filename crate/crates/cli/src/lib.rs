//! Config-driven scenarios over the `gerbelab` modules.
//!
//! A scenario file is a JSON object with a `kind` tag, an optional `seed`,
//! and the parameters of that kind (see `configs/README.md`). Running it
//! yields a [`Report`] with named checks and optional CSV tables.

use gerbelab::cech::{characteristic_class, derham_to_cech, good_cover_torus, GoodCover};
use gerbelab::complex::{build_torus_complex, integer_cohomology};
use gerbelab::connection::{point_gerbe_connection, validate_connection, GerbeConnection};
use gerbelab::equivalence::{
    abel_jacobi_difference, agreement_trials, circle_distance, holonomy_equivalent, linearly_equivalent,
    PointDivisor, EQUIVALENCE_TOL,
};
use gerbelab::hodge::FlatMetric;
use gerbelab::syz::{
    flat_cy::flat_cy_check, ma_residual, mirror_metric_check, ricci_tensor, solve_monge_ampere, HessianPotential,
    Scheme,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("numerical: {0}")]
    Numerical(#[from] gerbelab::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

fn schema(msg: impl Into<String>) -> RunError {
    RunError::Schema(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiSpec {
    /// `Σ cos·cos(2π k·x) + sin·sin(2π k·x)`.
    Fourier(Vec<FourierMode>),
    /// `amplitude · cos(2π x_axis)`.
    Cosine { amplitude: f64, axis: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub q: Vec<Vec<f64>>,
    pub resolution: usize,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub psi: Option<PsiSpec>,
}

impl PotentialSpec {
    fn build(&self) -> Result<HessianPotential, RunError> {
        let n = self.q.len();
        if !(2..=3).contains(&n) || self.q.iter().any(|r| r.len() != n) {
            return Err(schema("q must be a square 2×2 or 3×3 matrix"));
        }
        if self.resolution < 4 || self.resolution % 2 != 0 || self.resolution > 256 {
            return Err(schema("resolution must be even and in 4..=256"));
        }
        let q = DMatrix::from_fn(n, n, |i, j| self.q[i][j]);
        let psi: Box<dyn Fn(&[f64]) -> f64> = match &self.psi {
            None => Box::new(|_| 0.0),
            Some(PsiSpec::Cosine { amplitude, axis }) => {
                if *axis >= n {
                    return Err(schema(format!("axis {axis} out of range")));
                }
                let (a, ax) = (*amplitude, *axis);
                Box::new(move |x| a * (TAU * x[ax]).cos())
            }
            Some(PsiSpec::Fourier(modes)) => {
                if modes.iter().any(|m| m.k.len() != n) {
                    return Err(schema("every Fourier mode needs one wavenumber per axis"));
                }
                let modes = modes.clone();
                Box::new(move |x| {
                    modes
                        .iter()
                        .map(|m| {
                            let t = TAU * m.k.iter().zip(x).map(|(&k, &v)| k as f64 * v).sum::<f64>();
                            m.cos * t.cos() + m.sin * t.sin()
                        })
                        .sum()
                })
            }
        };
        HessianPotential::from_fn(q, self.resolution, self.scheme.unwrap_or(Scheme::Spectral), psi)
            .map_err(|e| schema(e.to_string()))
    }
}

/// A point with an integer multiplicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedPoint {
    pub at: [f64; 3],
    #[serde(default = "one")]
    pub mult: i64,
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorPair {
    pub p: Vec<WeightedPoint>,
    pub q: Vec<WeightedPoint>,
}

fn divisor(points: &[WeightedPoint]) -> PointDivisor {
    PointDivisor::new(points.iter().map(|w| (w.at, w.mult)).collect())
}

fn default_four() -> usize {
    4
}

fn default_ma_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Params {
    Cohomology {
        d: usize,
        n: usize,
    },
    GerbeClass {
        n: usize,
        /// Curvature `multiple · V`.
        multiple: i64,
    },
    PointGerbe {
        n: usize,
        point: [f64; 3],
    },
    LinearEquivalence {
        #[serde(default = "default_four")]
        n: usize,
        #[serde(default)]
        trials: usize,
        #[serde(default)]
        pairs: Vec<DivisorPair>,
        #[serde(default)]
        tol: Option<f64>,
    },
    SyzMirror {
        potential: PotentialSpec,
    },
    MaSolve {
        potential: PotentialSpec,
        #[serde(default = "default_ma_tol")]
        tol: f64,
    },
    FlatCy {
        n: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub seed: u64,
    pub params: Params,
}

impl Scenario {
    /// Parses and validates a scenario. `seed` sits beside the kind's own
    /// parameters.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        let obj = value.as_object_mut().ok_or_else(|| schema("scenario must be a JSON object"))?;
        let seed = match obj.remove("seed") {
            None => 0,
            Some(v) => v.as_u64().ok_or_else(|| schema("seed must be a non-negative integer"))?,
        };
        let params: Params = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
        let s = Scenario { seed, params };
        s.validate()?;
        Ok(s)
    }

    pub fn kind(&self) -> &'static str {
        match self.params {
            Params::Cohomology { .. } => "cohomology",
            Params::GerbeClass { .. } => "gerbe-class",
            Params::PointGerbe { .. } => "point-gerbe",
            Params::LinearEquivalence { .. } => "linear-equivalence",
            Params::SyzMirror { .. } => "syz-mirror",
            Params::MaSolve { .. } => "ma-solve",
            Params::FlatCy { .. } => "flat-cy",
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let torus = |n: usize, lo: usize, hi: usize| {
            if (lo..=hi).contains(&n) {
                Ok(())
            } else {
                Err(schema(format!("resolution n = {n} outside {lo}..={hi}")))
            }
        };
        match &self.params {
            Params::Cohomology { d, n } => {
                if !(1..=3).contains(d) {
                    return Err(schema("d must be 1, 2 or 3"));
                }
                torus(*n, 3, 12)
            }
            Params::GerbeClass { n, .. } => torus(*n, 3, 12),
            Params::PointGerbe { n, point } => {
                if point.iter().any(|v| !v.is_finite()) {
                    return Err(schema("point coordinates must be finite"));
                }
                torus(*n, 3, 12)
            }
            Params::LinearEquivalence { n, trials, pairs, tol } => {
                torus(*n, 3, 12)?;
                if *trials == 0 && pairs.is_empty() {
                    return Err(schema("give random trials, explicit pairs, or both"));
                }
                if tol.is_some_and(|t| !(t > 0.0 && t < 0.25)) {
                    return Err(schema("tol must lie in (0, 0.25)"));
                }
                for pair in pairs {
                    if pair.p.is_empty() || pair.q.is_empty() {
                        return Err(schema("divisors must be non-empty"));
                    }
                }
                Ok(())
            }
            Params::SyzMirror { potential } => potential.build().map(|_| ()),
            Params::MaSolve { potential, tol } => {
                if !(*tol > 0.0) {
                    return Err(schema("tol must be positive"));
                }
                potential.build().map(|_| ())
            }
            Params::FlatCy { n } => {
                if !(2..=3).contains(n) {
                    return Err(schema("flat-cy needs n = 2 or 3"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// `|value − target| ≤ tolerance`.
    Within { target: f64, tolerance: f64 },
    AtLeast(f64),
    AtMost(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, bound: Bound) -> Self {
        let pass = match bound {
            Bound::Within { target, tolerance } => (value - target).abs() <= tolerance,
            Bound::AtLeast(b) => value >= b,
            Bound::AtMost(b) => value <= b,
        };
        Check { name: name.into(), value, bound, pass }
    }

    fn exact(name: &str, value: f64, target: f64) -> Self {
        Check::new(name, value, Bound::Within { target, tolerance: 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    fn new(name: &str, header: &[&str]) -> Self {
        CsvTable { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Floats with 17 significant digits; integral columns stay integers.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| if v.fract() == 0.0 && v.abs() < 1e15 { format!("{v:.0}") } else { format!("{v:.16e}") })
                .collect();
            w.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: String,
    pub kind: String,
    pub scenario: Scenario,
    pub results: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// The only field that differs between identical runs.
    pub timing: Timing,
    #[serde(skip)]
    pub tables: Vec<CsvTable>,
}

impl Report {
    /// The report without its timing, for reproducibility comparisons.
    pub fn deterministic_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        v.as_object_mut().expect("object").remove("timing");
        v
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

struct Outcome {
    results: Value,
    checks: Vec<Check>,
    tables: Vec<CsvTable>,
}

fn torus3(n: usize) -> Result<(FlatMetric, GoodCover), RunError> {
    let x = Arc::new(build_torus_complex(3, n)?);
    Ok((FlatMetric::new(x.clone()), good_cover_torus(x)?))
}

fn binomial(d: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (d - i) / (i + 1))
}

fn cohomology(d: usize, n: usize) -> Result<Outcome, RunError> {
    let x = Arc::new(build_torus_complex(d, n)?);
    let cover = good_cover_torus(x.clone())?;
    let mut checks = Vec::new();
    let mut table = CsvTable::new("cohomology", &["degree", "betti", "torsion_count", "nerve_betti"]);
    let mut betti = Vec::new();
    for k in 0..=d {
        let h = integer_cohomology(&x, k)?;
        let nerve = cover.nerve().free_cohomology(k)?.len();
        checks.push(Check::exact(&format!("betti_{k}"), h.betti as f64, binomial(d, k) as f64));
        checks.push(Check::exact(&format!("torsion_{k}"), h.torsion.len() as f64, 0.0));
        checks.push(Check::exact(&format!("nerve_betti_{k}"), nerve as f64, binomial(d, k) as f64));
        table.rows.push(vec![k as f64, h.betti as f64, h.torsion.len() as f64, nerve as f64]);
        betti.push(h.betti);
    }
    Ok(Outcome { results: json!({ "betti": betti, "cover_sets": cover.set_count() }), checks, tables: vec![table] })
}

fn gerbe_class(n: usize, multiple: i64) -> Result<Outcome, RunError> {
    let (m, cover) = torus3(n)?;
    let g = m.volume().scaled(multiple as f64);
    let (cocycle, stair) = derham_to_cech(&cover, &g)?;
    let class = characteristic_class(&cover, &cocycle)?;
    let conn = GerbeConnection::from_curvature(&cover, &g)?;
    let diag = validate_connection(&cover, &conn);
    let checks = vec![
        Check::exact("class", class.free[0] as f64, multiple as f64),
        Check::new("period", stair.periods[0], Bound::Within { target: multiple as f64, tolerance: 1e-9 }),
        Check::new("connection_residual", diag.max_residual(), Bound::AtMost(1e-9)),
    ];
    let results = json!({
        "periods": stair.periods,
        "cech_periods": stair.cech_periods,
        "class": class.free,
        "connection_residual": diag.max_residual(),
    });
    Ok(Outcome { results, checks, tables: Vec::new() })
}

fn point_gerbe(n: usize, point: [f64; 3]) -> Result<Outcome, RunError> {
    let (m, cover) = torus3(n)?;
    let pg = point_gerbe_connection(&m, &cover, &point)?;
    let class = characteristic_class(&cover, &pg.connection.cocycle)?;
    let diag = validate_connection(&cover, &pg.connection);
    let checks = vec![
        Check::new("poisson_residual", pg.poisson_residual, Bound::AtMost(1e-10)),
        Check::new("sphere_integral", pg.sphere_integral, Bound::Within { target: -TAU, tolerance: 1e-6 }),
        Check::new("stokes_integral", pg.stokes_integral, Bound::Within { target: -TAU, tolerance: 1e-6 }),
        Check::exact("class", class.free[0] as f64, 1.0),
        Check::new("connection_residual", diag.max_residual(), Bound::AtMost(1e-8)),
    ];
    let x = m.complex();
    let mut table = CsvTable::new("potential", &["cell", "x1", "x2", "x3", "H"]);
    let h = 1.0 / n as f64;
    for (i, v) in pg.potential.values.iter().enumerate() {
        let t = x.grid().decode(3, i).1;
        table.rows.push(vec![i as f64, (t[0] as f64 + 0.5) * h, (t[1] as f64 + 0.5) * h, (t[2] as f64 + 0.5) * h, *v]);
    }
    let results = json!({
        "cell": pg.cell,
        "ball": pg.ball,
        "poisson_residual": pg.poisson_residual,
        "sphere_integral": pg.sphere_integral,
        "stokes_integral": pg.stokes_integral,
        "class": class.free,
    });
    Ok(Outcome { results, checks, tables: vec![table] })
}

fn linear_equivalence(n: usize, trials: usize, pairs: &[DivisorPair], tol: f64, seed: u64) -> Result<Outcome, RunError> {
    let (m, _) = torus3(n)?;
    let mut checks = Vec::new();
    let mut table = CsvTable::new(
        "trials",
        &["trial", "degree", "periods_equivalent", "current_equivalent", "w1", "w2", "w3", "class_error"],
    );
    let mut results = serde_json::Map::new();
    if trials > 0 {
        let ts = agreement_trials(&m, seed, trials, tol)?;
        let agree = ts.iter().filter(|t| t.agree()).count();
        let worst = ts.iter().map(|t| t.class_error).fold(0.0, f64::max);
        for (i, t) in ts.iter().enumerate() {
            let w = &t.periods.fractional;
            table.rows.push(vec![
                i as f64,
                t.p.degree() as f64,
                t.periods.equivalent as u8 as f64,
                t.current.equivalent as u8 as f64,
                w[0],
                w[1],
                w[2],
                t.class_error,
            ]);
        }
        checks.push(Check::exact("agreement", agree as f64, trials as f64));
        checks.push(Check::new("class_error", worst, Bound::AtMost(1e-6)));
        results.insert("agreement".into(), json!(format!("{agree}/{trials}")));
        results.insert("equivalent_trials".into(), json!(ts.iter().filter(|t| t.periods.equivalent).count()));
    }
    let mut explicit = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let (p, q) = (divisor(&pair.p), divisor(&pair.q));
        let a = linearly_equivalent(&m, &p, &q, tol)?;
        let b = holonomy_equivalent(&m, &p, &q, tol)?;
        let aj = abel_jacobi_difference(&m, &p, &q)?;
        let err = b.report.witness.iter().zip(&aj).map(|(&x, &y)| circle_distance(x, y)).fold(0.0, f64::max);
        checks.push(Check::exact(&format!("pair_{i}_agreement"), (a.verdict == b.report.verdict) as u8 as f64, 1.0));
        checks.push(Check::new(&format!("pair_{i}_class_error"), err, Bound::AtMost(1e-6)));
        explicit.push(json!({
            "verdict": a.verdict,
            "fractional": a.fractional,
            "holonomy_verdict": b.report.verdict,
            "holonomy_class": b.report.fractional,
            "decomposition_residual": b.decomposition.residual,
        }));
    }
    if !explicit.is_empty() {
        results.insert("pairs".into(), Value::Array(explicit));
    }
    results.insert("tolerance".into(), json!(tol));
    Ok(Outcome { results: Value::Object(results), checks, tables: vec![table] })
}

fn syz_mirror(spec: &PotentialSpec) -> Result<Outcome, RunError> {
    let phi = spec.build()?;
    let check = mirror_metric_check(&phi)?;
    let checks = vec![
        Check::new("involution_error", check.involution_error, Bound::AtMost(1e-8)),
        Check::new("hessian_inverse_error", check.hessian_inverse_error, Bound::AtMost(1e-6)),
        Check::new("pullback_error", check.pullback_error, Bound::AtMost(1e-6)),
    ];
    let n = phi.dim();
    let dual = &check.transform.dual;
    let mut header: Vec<String> = vec!["node".into()];
    header.extend((1..=n).map(|a| format!("xi{a}")));
    header.extend((1..=n).map(|a| format!("x{a}")));
    header.push("dual_psi".into());
    let mut table = CsvTable { name: "mirror".into(), header, rows: Vec::new() };
    for i in 0..dual.nodes() {
        let mut row = vec![i as f64];
        row.extend(dual.point(i).iter());
        row.extend(check.transform.preimages[i].iter());
        row.push(dual.psi[i]);
        table.rows.push(row);
    }
    let results = json!({
        "involution_error": check.involution_error,
        "hessian_inverse_error": check.hessian_inverse_error,
        "pullback_error": check.pullback_error,
        "dual_quadratic": dual.quad.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "dual_constant": dual.constant,
        "newton_iterations": check.transform.newton_iterations,
    });
    Ok(Outcome { results, checks, tables: vec![table] })
}

fn ma_solve(spec: &PotentialSpec, tol: f64) -> Result<Outcome, RunError> {
    let phi = spec.build()?;
    let sol = solve_monge_ampere(&phi, tol)?;
    let residual = ma_residual(&sol.potential);
    let ricci = ricci_tensor(&sol.potential)?;
    let mut checks = vec![
        Check::new("residual", residual.sup, Bound::AtMost(tol)),
        Check::new("ricci_norm", ricci.norm, Bound::AtMost(1e-8)),
    ];
    let order = sol.convergence_order();
    if let Some(o) = order {
        checks.push(Check::new("convergence_order", o, Bound::AtLeast(1.8)));
    }
    let n = phi.dim();
    let mut header: Vec<String> = vec!["node".into()];
    header.extend((1..=n).map(|a| format!("x{a}")));
    header.extend(["psi".into(), "det_residual".into()]);
    let mut field = CsvTable { name: "solution".into(), header, rows: Vec::new() };
    for i in 0..sol.potential.nodes() {
        let mut row = vec![i as f64];
        row.extend(sol.potential.point(i).iter());
        row.extend([sol.potential.psi[i], residual.field[i]]);
        field.rows.push(row);
    }
    let mut log = CsvTable::new("newton", &["step", "residual", "damping", "halvings", "gmres_iterations", "min_eigenvalue"]);
    for (k, s) in sol.log.iter().enumerate() {
        log.rows.push(vec![k as f64, s.residual, s.step, s.halvings as f64, s.gmres_iterations as f64, s.min_eigenvalue]);
    }
    let results = json!({
        "target": residual.target,
        "multiplier": sol.multiplier,
        "residual": residual.sup,
        "ricci_norm": ricci.norm,
        "convergence_order": order,
        "newton_log": sol.log,
    });
    Ok(Outcome { results, checks, tables: vec![field, log] })
}

fn flat_cy(n: usize) -> Outcome {
    let r = flat_cy_check(n);
    let flag = |name: &str, b: bool| Check::exact(name, b as u8 as f64, 1.0);
    let checks = vec![
        flag("nondegenerate", r.nondegenerate),
        flag("decomposable", r.decomposable),
        flag("nonvanishing", r.nonvanishing),
        flag("wedge_with_omega_vanishes", r.wedge_with_omega_vanishes),
        flag("top_degree_identity", r.top_degree_identity),
        flag("closed", r.closed),
        flag("type_n_0", r.type_n_0),
        flag("coordinate_plane_special_lagrangian", r.coordinate_plane.special_lagrangian()),
        flag("balanced_phases_special_lagrangian", r.balanced_phases.special_lagrangian()),
        flag("unbalanced_phases_detected", !r.unbalanced_phases.omega2_vanishes),
        flag("dual_identity", r.dual_identity),
        flag("lemma", r.lemma),
    ];
    Outcome { results: serde_json::to_value(&r).expect("serializable"), checks, tables: Vec::new() }
}

pub fn run_scenario(s: &Scenario, o: Overrides) -> Result<Report, RunError> {
    let start = Instant::now();
    let mut scenario = s.clone();
    if let Some(seed) = o.seed {
        scenario.seed = seed;
    }
    if let Some(t) = o.tol {
        if !(t > 0.0) {
            return Err(schema("--tol must be positive"));
        }
        match &mut scenario.params {
            Params::LinearEquivalence { tol, .. } => *tol = Some(t),
            Params::MaSolve { tol, .. } => *tol = t,
            _ => {}
        }
    }
    scenario.validate()?;
    let outcome = match &scenario.params {
        Params::Cohomology { d, n } => cohomology(*d, *n)?,
        Params::GerbeClass { n, multiple } => gerbe_class(*n, *multiple)?,
        Params::PointGerbe { n, point } => point_gerbe(*n, *point)?,
        Params::LinearEquivalence { n, trials, pairs, tol } => {
            linear_equivalence(*n, *trials, pairs, tol.unwrap_or(EQUIVALENCE_TOL), scenario.seed)?
        }
        Params::SyzMirror { potential } => syz_mirror(potential)?,
        Params::MaSolve { potential, tol } => ma_solve(potential, *tol)?,
        Params::FlatCy { n } => flat_cy(*n),
    };
    let passed = outcome.checks.iter().all(|c| c.pass);
    Ok(Report {
        version: VERSION.into(),
        kind: scenario.kind().into(),
        scenario,
        results: outcome.results,
        checks: outcome.checks,
        passed,
        timing: Timing { seconds: start.elapsed().as_secs_f64() },
        tables: outcome.tables,
    })
}
