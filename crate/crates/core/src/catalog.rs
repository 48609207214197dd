//! Scenario catalog with closed-form solutions, and convergence ladders.

use std::fmt;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use crate::constants::LipschitzProfile;
use crate::error::{invalid, Result};
use crate::fbsde::{solve_fbsde_via_bsvie, Coefficient, Coupling, FbsdeSpec, induced_bsvie_generator};
use crate::generator::{FreeTerm, FreeTermNode, GeneratorSpec, Measurability};
use crate::path_dependent::{solve_path_dependent, PathGeneratorSpec, PathInput, PathSegment};
use crate::regression::BasisConfig;
use crate::solver::{solve_type1, solve_type2, BsvieSolution, FrozenGenerator, SolverConfig};
use crate::stochastic::{BrownianEnsemble, TimeGrid};

/// Frozen scenario ids.
pub const SCENARIO_IDS: [&str; 5] = ["example-1.1", "example-4.2", "linear-zhat", "fbsde-sin", "adapted-linear"];

/// Coupling strength of `fbsde-sin`.
pub const FBSDE_SIN_KAPPA: f64 = 0.1;
/// Weight of `Z(s, t)` in `linear-zhat`.
pub const LINEAR_ZHAT_KAPPA: f64 = 0.2;

/// Solver route of a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    TypeOne,
    TypeTwo,
    PathDependent,
    Fbsde,
}

impl ScenarioKind {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::TypeOne => "type1",
            ScenarioKind::TypeTwo => "type2",
            ScenarioKind::PathDependent => "pathdep",
            ScenarioKind::Fbsde => "fbsde",
        }
    }
}

type YFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
type ZFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
type DiscreteFn = dyn Fn(&TimeGrid, usize, f64) -> f64 + Send + Sync;

/// Scalar solution of the form `Y(t) = y(t, W(t))`, `Z(t, s) = z(t, s)`.
#[derive(Clone)]
pub struct ExactSolution {
    y: Arc<YFn>,
    z: Arc<ZFn>,
    discrete: Option<Arc<DiscreteFn>>,
    /// Formulas hold for `t >= valid_from`.
    pub valid_from: f64,
}

impl ExactSolution {
    pub fn y(&self, t: f64, w: f64) -> f64 {
        (self.y)(t, w)
    }

    pub fn z(&self, t: f64, s: f64) -> f64 {
        (self.z)(t, s)
    }

    /// Exact value of the grid scheme at node `i`; the continuous solution when the scheme is exact.
    pub fn y_discrete(&self, grid: &TimeGrid, i: usize, w: f64) -> f64 {
        match &self.discrete {
            Some(f) => f(grid, i, w),
            None => self.y(grid.time(i), w),
        }
    }
}

/// Equation data plus its solver route.
#[derive(Clone)]
pub struct Scenario {
    pub id: String,
    pub horizon: f64,
    pub kind: ScenarioKind,
    pub psi: FreeTerm,
    pub generator: Option<GeneratorSpec>,
    pub path_generator: Option<PathGeneratorSpec>,
    pub fbsde: Option<FbsdeSpec>,
    pub exact: Option<ExactSolution>,
    pub description: &'static str,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("id", &self.id)
            .field("horizon", &self.horizon)
            .field("kind", &self.kind)
            .finish()
    }
}

fn terminal_w() -> FreeTerm {
    FreeTerm::new(1, FreeTermNode::Terminal, |_, e, out| out.copy_from_slice(e.w(e.grid().n_steps())))
}

fn example_1_1(t_end: f64) -> Scenario {
    let g = GeneratorSpec::new(
        "example-1.1",
        1,
        Measurability::Anticipating,
        LipschitzProfile::constant(t_end, [0.0; 4], [0.0; 4]),
        |inp, out| out.copy_from_slice(inp.ensemble.w(inp.ensemble.grid().n_steps())),
    );
    Scenario {
        id: "example-1.1".into(),
        horizon: t_end,
        kind: ScenarioKind::TypeOne,
        psi: FreeTerm::zero(1),
        generator: Some(g),
        path_generator: None,
        fbsde: None,
        exact: Some(ExactSolution {
            y: Arc::new(move |t, w| (t_end - t) * w),
            z: Arc::new(move |t, _| t_end - t),
            discrete: None,
            valid_from: 0.0,
        }),
        description: "g = W(T), psi = 0: Y(t) = (T - t) W(t), Z(t, s) = T - t",
    }
}

fn example_4_2() -> Scenario {
    // g(t, s, Y_s) = Y(min(s + 1, 2)); with T = 2 the lag is half the grid.
    let g = PathGeneratorSpec::new("example-4.2", 1, 1.0, |inp: &PathInput<'_>, out| {
        let n = inp.segment.end();
        let read = (inp.s_node + n / 2).min(n);
        out.copy_from_slice(inp.segment.at(read));
    })
    .with_lookahead(|s, n| (s + n / 2).min(n))
    .with_metadata("rho(r) = 0", "xi = 0");
    let y = |t: f64, w: f64| {
        if t >= 1.0 {
            (3.0 - t) * w
        } else {
            w * (2.0 + ((2.0 - t).powi(2) - 1.0) / 2.0)
        }
    };
    let z = |t: f64, s: f64| {
        if t >= 1.0 {
            3.0 - t
        } else {
            let a = t.max(s - 1.0);
            2.0 + ((2.0 - a).powi(2) - 1.0) / 2.0
        }
    };
    Scenario {
        id: "example-4.2".into(),
        horizon: 2.0,
        kind: ScenarioKind::PathDependent,
        psi: terminal_w(),
        generator: None,
        path_generator: Some(g),
        fbsde: None,
        exact: Some(ExactSolution {
            y: Arc::new(y),
            z: Arc::new(z),
            discrete: None,
            valid_from: 0.0,
        }),
        description: "psi = W(2), g = Y(min(s + 1, 2)) on [0, 2]: Y(t) = (3 - t) W(t) on [1, 2]",
    }
}

fn linear_zhat(t_end: f64) -> Scenario {
    let kappa = LINEAR_ZHAT_KAPPA;
    let g = GeneratorSpec::new(
        "linear-zhat",
        1,
        Measurability::Adapted,
        LipschitzProfile::adapted(t_end, 0.0, 0.0, kappa),
        move |inp, out| {
            for (o, z) in out.iter_mut().zip(inp.zhat) {
                *o = kappa * z;
            }
        },
    )
    .reads(false, false, true);
    Scenario {
        id: "linear-zhat".into(),
        horizon: t_end,
        kind: ScenarioKind::TypeTwo,
        psi: terminal_w(),
        generator: Some(g),
        path_generator: None,
        fbsde: None,
        exact: Some(ExactSolution {
            y: Arc::new(move |t, w| w + kappa * (t_end - t)),
            z: Arc::new(|_, _| 1.0),
            discrete: None,
            valid_from: 0.0,
        }),
        description: "psi = W(T), g = 0.2 Z(s, t): Y(t) = W(t) + 0.2 (T - t), Z = 1",
    }
}

/// Coefficients `a_i` of the grid scheme `Y_i = a_i (W_i + 1)` for `g = -y`.
fn adapted_linear_coefficients(grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut a = vec![0.0; n + 1];
    a[n] = 1.0;
    let mut tail = 0.0;
    for i in (0..n).rev() {
        a[i] = (1.0 - dt * tail) / (1.0 + dt);
        tail += a[i];
    }
    a
}

fn adapted_linear(t_end: f64) -> Scenario {
    let g = GeneratorSpec::new(
        "adapted-linear",
        1,
        Measurability::Adapted,
        LipschitzProfile::adapted(t_end, 1.0, 0.0, 0.0),
        |inp, out| {
            for (o, y) in out.iter_mut().zip(inp.y) {
                *o = -y;
            }
        },
    )
    .reads(true, false, false);
    let psi = FreeTerm::new(1, FreeTermNode::Parameter, |i, e, out| {
        for (o, w) in out.iter_mut().zip(e.w(i)) {
            *o = w + 1.0;
        }
    });
    Scenario {
        id: "adapted-linear".into(),
        horizon: t_end,
        kind: ScenarioKind::TypeOne,
        psi,
        generator: Some(g),
        path_generator: None,
        fbsde: None,
        exact: Some(ExactSolution {
            y: Arc::new(move |t, w| (t - t_end).exp() * (w + 1.0)),
            z: Arc::new(move |_, s| (s - t_end).exp() - 1.0),
            discrete: Some(Arc::new(|grid, i, w| adapted_linear_coefficients(grid)[i] * (w + 1.0))),
            valid_from: 0.0,
        }),
        description: "psi(t) = W(t) + 1, g = -y: Y(t) = exp(t - T) (W(t) + 1)",
    }
}

/// `x^t = 1`, `xi^t = sin(W(T))`, `b = kappa z`, `g = 0`.
pub fn fbsde_sin_spec(t_end: f64, kappa: f64) -> FbsdeSpec {
    FbsdeSpec::new(
        "fbsde-sin",
        1,
        t_end,
        |_, _, out| out.fill(1.0),
        Coupling::Terminal {
            eval: Arc::new(|_, e: &BrownianEnsemble, out: &mut [f64]| {
                for (o, w) in out.iter_mut().zip(e.w(e.grid().n_steps())) {
                    *o = w.sin();
                }
            }),
            bound: Some(1.0),
        },
        Coefficient::linear(kappa),
        Coefficient::zero(),
    )
}

fn fbsde_sin(t_end: f64) -> Result<Scenario> {
    let spec = fbsde_sin_spec(t_end, FBSDE_SIN_KAPPA);
    let (psi, g) = induced_bsvie_generator(&spec)?;
    Ok(Scenario {
        id: "fbsde-sin".into(),
        horizon: t_end,
        kind: ScenarioKind::Fbsde,
        psi,
        generator: Some(g),
        path_generator: None,
        fbsde: Some(spec),
        exact: None,
        description: "x = 1, xi = sin(W(T)), b = 0.1 z, g = 0",
    })
}

/// Looks up a catalog scenario; `horizon` overrides `T` where the scenario allows it.
pub fn scenario(id: &str, horizon: Option<f64>) -> Result<Scenario> {
    if let Some(t) = horizon {
        if !(t > 0.0 && t.is_finite()) {
            return invalid(format!("horizon must be positive, got {t}"));
        }
    }
    let t = horizon.unwrap_or(1.0);
    match id {
        "example-1.1" => Ok(example_1_1(t)),
        "example-4.2" => match horizon {
            Some(h) if (h - 2.0).abs() > 1e-12 => invalid("example-4.2 is posed on [0, 2]"),
            _ => Ok(example_4_2()),
        },
        "linear-zhat" => Ok(linear_zhat(t)),
        "fbsde-sin" => fbsde_sin(t),
        "adapted-linear" => Ok(adapted_linear(t)),
        other => invalid(format!("unknown scenario {other:?}; available: {}", SCENARIO_IDS.join(", "))),
    }
}

impl Scenario {
    /// `psi = 0`, `g = 0`.
    pub fn zero(horizon: f64) -> Self {
        Scenario {
            id: "zero".into(),
            horizon,
            kind: ScenarioKind::TypeOne,
            psi: FreeTerm::zero(1),
            generator: Some(GeneratorSpec::zero(1, horizon)),
            path_generator: None,
            fbsde: None,
            exact: Some(ExactSolution {
                y: Arc::new(|_, _| 0.0),
                z: Arc::new(|_, _| 0.0),
                discrete: None,
                valid_from: 0.0,
            }),
            description: "psi = 0, g = 0",
        }
    }

    pub fn generator_id(&self) -> String {
        match (&self.generator, &self.path_generator) {
            (Some(g), _) => g.id.clone(),
            (None, Some(g)) => g.id.clone(),
            _ => self.id.clone(),
        }
    }

    pub fn grid(&self, n_steps: usize) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, n_steps)
    }

    /// Solves on `ens` with the scenario's solver route.
    pub fn solve(&self, ens: &BrownianEnsemble, cfg: &SolverConfig) -> Result<BsvieSolution> {
        if (ens.grid().horizon() - self.horizon).abs() > 1e-12 {
            return invalid(format!(
                "ensemble horizon {} differs from scenario horizon {}",
                ens.grid().horizon(),
                self.horizon
            ));
        }
        match self.kind {
            ScenarioKind::TypeOne => solve_type1(ens, &self.psi, self.generator.as_ref().expect("generator"), cfg),
            ScenarioKind::TypeTwo => solve_type2(ens, &self.psi, self.generator.as_ref().expect("generator"), cfg),
            ScenarioKind::PathDependent => {
                solve_path_dependent(ens, &self.psi, self.path_generator.as_ref().expect("path generator"), cfg)
            }
            ScenarioKind::Fbsde => Ok(solve_fbsde_via_bsvie(ens, self.fbsde.as_ref().expect("fbsde spec"), cfg)?.1),
        }
    }

    /// Pathwise generator `g(t_i, s_k, ...)` along `sol`, given `Z(t_i, s_k)`.
    pub(crate) fn integrand<'a>(
        &'a self,
        sol: &'a BsvieSolution,
        ens: &'a BrownianEnsemble,
    ) -> Box<dyn Fn(usize, usize, &[f64], &mut [f64]) -> bool + Sync + 'a> {
        match (&self.generator, &self.path_generator) {
            (Some(g), _) => {
                let frozen = FrozenGenerator::new(ens, g, &sol.y, sol.z.triangle(), sol.z.square());
                Box::new(move |i, k, z, out| {
                    frozen.eval(i, k, Some(z), out);
                    true
                })
            }
            (None, Some(g)) => Box::new(move |i, k, z, out| {
                g.evaluate(
                    &PathInput {
                        t_node: i,
                        s_node: k,
                        ensemble: ens,
                        segment: PathSegment::new(&sol.y, k).expect("node in range"),
                        z: g.uses_z.then_some(z),
                    },
                    out,
                );
                true
            }),
            _ => Box::new(|_, _, _, _| false),
        }
    }
}

/// One rung of a refinement ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rung {
    pub n_steps: usize,
    pub n_paths: usize,
    pub degree: usize,
}

/// Quantity refined along a ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderAxis {
    Steps,
    Paths,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RungResult {
    pub rung: Rung,
    pub y_error: f64,
    pub z_error: Option<f64>,
    pub seconds: f64,
}

/// Errors per rung and the fitted log-log order against the refined quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub scenario: String,
    pub axis: LadderAxis,
    /// `exact`, `exact-discrete` or `finest-rung`.
    pub reference: String,
    pub replicates: usize,
    pub rungs: Vec<RungResult>,
    pub order: Option<f64>,
    pub r_squared: Option<f64>,
}

/// The reference grid of a steps ladder is this many times finer than its finest rung.
pub const TRUTH_REFINEMENT: usize = 4;

pub const CONVERGENCE_HEADER: &str = "rung,n_steps,n_paths,degree,y_error,z_error";

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{CONVERGENCE_HEADER}")?;
        for (k, r) in self.rungs.iter().enumerate() {
            let z = r.z_error.map(|v| format!("{v:.12e}")).unwrap_or_default();
            writeln!(
                out,
                "{k},{},{},{},{:.12e},{z}",
                r.rung.n_steps, r.rung.n_paths, r.rung.degree, r.y_error
            )?;
        }
        Ok(())
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rungs.windows(2).all(|w| w[1].y_error < w[0].y_error)
    }
}

/// Settings shared by all rungs.
#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub seed: u64,
    /// Independent ensembles averaged per rung (paths ladders).
    pub replicates: usize,
    pub solver: SolverConfig,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            replicates: 1,
            solver: SolverConfig::default(),
        }
    }
}

/// Least-squares slope and `R^2` of `ln y` against `ln x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, r2))
}

fn classify(ladder: &[Rung]) -> Result<LadderAxis> {
    if ladder.len() < 3 {
        return invalid("a convergence ladder needs at least 3 rungs");
    }
    let steps_up = ladder.windows(2).all(|w| w[1].n_steps > w[0].n_steps);
    let paths_same = ladder.windows(2).all(|w| w[1].n_paths == w[0].n_paths);
    let paths_up = ladder.windows(2).all(|w| w[1].n_paths > w[0].n_paths);
    let steps_same = ladder.windows(2).all(|w| w[1].n_steps == w[0].n_steps);
    if ladder.windows(2).any(|w| w[1].degree < w[0].degree) {
        return invalid("basis degree may not decrease along the ladder");
    }
    match (steps_up && paths_same, paths_up && steps_same) {
        (true, _) => Ok(LadderAxis::Steps),
        (_, true) => Ok(LadderAxis::Paths),
        _ => invalid("the ladder must refine either steps (fixed paths) or paths (fixed steps)"),
    }
}

fn rung_config(base: &SolverConfig, rung: &Rung) -> SolverConfig {
    SolverConfig {
        basis: BasisConfig {
            degree: rung.degree,
            ..base.basis
        },
        ..base.clone()
    }
}

/// Mean-square gap between the piecewise-constant extension of `y` and `target` on fine nodes.
fn piecewise_gap(
    fine: &BrownianEnsemble,
    factor: usize,
    y: &crate::stochastic::PathProcess,
    from_node: usize,
    target: &dyn Fn(usize, usize) -> f64,
) -> f64 {
    let n_fine = fine.grid().n_steps();
    let mut sq = 0.0;
    let mut count = 0usize;
    for f in from_node..=n_fine {
        let coarse = y.at(f / factor);
        for (p, v) in coarse.iter().enumerate() {
            sq += (v - target(f, p)).powi(2);
        }
        count += coarse.len();
    }
    sq / count.max(1) as f64
}

fn z_gap(ens: &BrownianEnsemble, sol: &BsvieSolution, exact: &ExactSolution, from_node: usize) -> f64 {
    let grid = *ens.grid();
    let n = grid.n_steps();
    let mut sq = 0.0;
    let mut count = 0usize;
    for i in from_node..n {
        for j in i + 1..=n {
            let v = sol.z.triangle().get(i, j).expect("cell").eval_vec(ens, j - 1, 1);
            let target = exact.z(grid.time(i), grid.time(j - 1));
            sq += v.iter().map(|x| (x - target).powi(2)).sum::<f64>();
            count += v.len();
        }
    }
    (sq / count.max(1) as f64).sqrt()
}

/// Runs `scenario` along `ladder` and fits the convergence order.
///
/// Step ladders share one Brownian ensemble simulated on a grid finer than every rung
/// and measure the piecewise-constant solution against the exact one on its nodes.
/// Path ladders average independent ensembles and compare with the exact grid scheme.
pub fn convergence_study(scenario: &Scenario, ladder: &[Rung], opts: &StudyOptions) -> Result<ConvergenceTable> {
    let axis = classify(ladder)?;
    if opts.replicates == 0 {
        return invalid("replicates must be positive");
    }
    let mut rungs = Vec::with_capacity(ladder.len());
    let reference;
    match axis {
        LadderAxis::Steps => {
            let finest = ladder.last().expect("nonempty").n_steps;
            if ladder.iter().any(|r| !finest.is_multiple_of(r.n_steps)) {
                return invalid("every rung's steps must divide the finest rung's steps");
            }
            let fine_grid = scenario.grid(finest * TRUTH_REFINEMENT)?;
            let mut acc_y = vec![0.0; ladder.len()];
            let mut acc_z = vec![0.0; ladder.len()];
            let mut secs = vec![0.0; ladder.len()];
            reference = if scenario.exact.is_some() { "exact" } else { "finest-rung" };
            for r in 0..opts.replicates {
                let fine = BrownianEnsemble::simulate(fine_grid, ladder[0].n_paths, opts.seed + r as u64)?;
                let mut sols = Vec::with_capacity(ladder.len());
                for (k, rung) in ladder.iter().enumerate() {
                    let factor = finest * TRUTH_REFINEMENT / rung.n_steps;
                    let ens = fine.coarsen(factor)?;
                    let start = Instant::now();
                    let sol = scenario.solve(&ens, &rung_config(&opts.solver, rung))?;
                    secs[k] += start.elapsed().as_secs_f64();
                    if let Some(ex) = &scenario.exact {
                        let from = fine_grid.node_of(ex.valid_from).unwrap_or(0);
                        let g = |f: usize, p: usize| ex.y(fine_grid.time(f), fine.w(f)[p]);
                        acc_y[k] += piecewise_gap(&fine, factor, &sol.y, from, &g);
                        let from_c = ens.grid().node_of(ex.valid_from).unwrap_or(0);
                        acc_z[k] += z_gap(&ens, &sol, ex, from_c).powi(2);
                    }
                    sols.push((factor, sol));
                }
                if scenario.exact.is_none() {
                    let (best_factor, best) = sols.last().expect("nonempty");
                    for (k, (factor, sol)) in sols.iter().enumerate() {
                        let g = |f: usize, p: usize| best.y.at(f / best_factor)[p];
                        acc_y[k] += piecewise_gap(&fine, *factor, &sol.y, 0, &g);
                    }
                }
            }
            let m = opts.replicates as f64;
            for (k, rung) in ladder.iter().enumerate() {
                rungs.push(RungResult {
                    rung: *rung,
                    y_error: (acc_y[k] / m).sqrt(),
                    z_error: scenario.exact.as_ref().map(|_| (acc_z[k] / m).sqrt()),
                    seconds: secs[k],
                });
            }
        }
        LadderAxis::Paths => {
            let ex = match &scenario.exact {
                Some(e) => e,
                None => return invalid("a paths ladder needs a scenario with a closed-form solution"),
            };
            reference = if ex.discrete.is_some() { "exact-discrete" } else { "exact" };
            let grid = scenario.grid(ladder[0].n_steps)?;
            let from = grid.node_of(ex.valid_from).unwrap_or(0);
            for (k, rung) in ladder.iter().enumerate() {
                let mut acc = 0.0;
                let start = Instant::now();
                for r in 0..opts.replicates {
                    let seed = opts.seed.wrapping_add((k * opts.replicates + r) as u64 * 7919);
                    let ens = BrownianEnsemble::simulate(grid, rung.n_paths, seed)?;
                    let sol = scenario.solve(&ens, &rung_config(&opts.solver, rung))?;
                    let mut sq = 0.0;
                    let mut count = 0usize;
                    for i in from..=grid.n_steps() {
                        for (v, w) in sol.y.at(i).iter().zip(ens.w(i)) {
                            sq += (v - ex.y_discrete(&grid, i, *w)).powi(2);
                        }
                        count += rung.n_paths;
                    }
                    acc += sq / count as f64;
                }
                rungs.push(RungResult {
                    rung: *rung,
                    y_error: (acc / opts.replicates as f64).sqrt(),
                    z_error: None,
                    seconds: start.elapsed().as_secs_f64(),
                });
            }
        }
    }
    let xs: Vec<f64> = rungs
        .iter()
        .map(|r| match axis {
            LadderAxis::Steps => r.rung.n_steps as f64,
            LadderAxis::Paths => r.rung.n_paths as f64,
        })
        .collect();
    let ys: Vec<f64> = rungs.iter().map(|r| r.y_error).collect();
    let fit = log_log_fit(&xs, &ys);
    Ok(ConvergenceTable {
        scenario: scenario.id.clone(),
        axis,
        reference: reference.into(),
        replicates: opts.replicates,
        rungs,
        order: fit.map(|f| f.0),
        r_squared: fit.map(|f| f.1),
    })
}
