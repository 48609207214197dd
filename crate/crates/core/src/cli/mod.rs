//! Command-line front end: catalog runs, certification, demonstrations and
//! convergence studies, each writing CSV output tagged with a run manifest.

mod config;
mod manifest;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

pub use config::{check_keys, parse_flat, parse_pairs, profile_from_table, read_flat, PROFILE_KEYS};
pub use manifest::{sibling, RunManifest};

use crate::catalog::{self, convergence_study, fbsde_sin_spec, Rung, Scenario, StudyOptions, FBSDE_SIN_KAPPA};
use crate::constants::certify;
use crate::error::{invalid, BsvieError, Result};
use crate::fbsde::solve_fbsde_via_bsvie;
use crate::par;
use crate::path_dependent::{demo_no_adapted_solution, solve_path_dependent, solve_path_dependent_with_z, DemoCase};
use crate::regression::BasisConfig;
use crate::solver::{solve_type1, solve_type2, BetaPolicy, BsvieSolution, SolverConfig};
use crate::stochastic::export::write_ensemble_csv;
use crate::stochastic::{BrownianEnsemble, Field};

pub const SOLUTION_HEADER: &str = "field,path,t_index,s_index,component,value";
pub const RESIDUAL_HEADER: &str = "node,rms,max_abs";
pub const TRIPLE_HEADER: &str = "t_index,path,node,x,y,z";

/// Exit status for a failed run.
pub fn exit_code(e: &BsvieError) -> i32 {
    match e {
        BsvieError::InvalidArgument(_) | BsvieError::Config(_) | BsvieError::Refused(_) => 2,
        BsvieError::CertificateRejected { .. } => 3,
        BsvieError::NonConvergence { .. } | BsvieError::SolverDivergence(_) => 4,
        _ => 1,
    }
}

#[derive(Parser, Debug)]
#[command(name = "bsvie", version, about = "Monte Carlo laboratory for backward stochastic Volterra integral equations")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a Brownian ensemble and export paths.
    Simulate(SimulateArgs),
    /// Solve a catalog scenario.
    Solve(SolveArgs),
    /// Certify a constant Lipschitz profile.
    Certify(CertifyArgs),
    /// Demonstrations.
    Demo {
        #[command(subcommand)]
        which: DemoCommand,
    },
    /// Error against refinement ladders.
    Convergence(ConvergenceArgs),
}

#[derive(Subcommand, Debug)]
pub enum DemoCommand {
    /// Best t-independent Z(s) against the BSVIE solution.
    Counterexample(DemoArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Paths written to the CSV.
    #[arg(long, default_value_t = 100)]
    pub export_paths: usize,
    #[arg(long, default_value = "brownian.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Default)]
pub struct SolveArgs {
    /// 1, 2, pathdep or fbsde.
    #[arg(long = "type")]
    pub kind: Option<String>,
    /// Catalog id.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// `auto` or a nonnegative number.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub max_picard: Option<usize>,
    #[arg(long)]
    pub delta_steps: Option<usize>,
    /// Warn instead of refusing when the certificate rejects the generator.
    #[arg(long)]
    pub no_strict: bool,
    /// Flat key-value file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// FBSDE family file (`kappa`, `horizon`).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub export_paths: Option<usize>,
    #[arg(long, default_value = "solution.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Inline `key=value` pairs, e.g. `lz0=0,ly1=1`.
    #[arg(long)]
    pub profile: Vec<String>,
    /// Flat key-value file; inline pairs override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// 1.1 or 4.2.
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value = "demo.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub scenario: String,
    /// `steps` or `paths`.
    #[arg(long, default_value = "steps")]
    pub axis: String,
    /// Comma-separated rung values along the axis.
    #[arg(long)]
    pub ladder: String,
    /// Paths per rung on a steps ladder.
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Steps per rung on a paths ladder.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value = "convergence.csv")]
    pub out: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads;
    if threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return 2;
    }
    match par::with_threads(threads, move || dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Demo {
            which: DemoCommand::Counterexample(a),
        } => demo(a),
        Command::Convergence(a) => convergence(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn print_report(lines: &[(String, String)]) {
    for (k, v) in lines {
        println!("{k} = {v}");
    }
}

fn simulate(a: SimulateArgs) -> Result<i32> {
    let mut m = RunManifest::new("simulate");
    m.set("seed", a.seed as i64);
    m.set("n_steps", a.steps as i64);
    m.set("n_paths", a.paths as i64);
    m.set("horizon", a.horizon);
    m.set("export_paths", a.export_paths as i64);
    let grid = crate::stochastic::TimeGrid::new(a.horizon, a.steps)?;
    let ens = m.phase("simulate", || BrownianEnsemble::simulate(grid, a.paths, a.seed))?;
    let mut w = create(&a.out)?;
    writeln!(w, "{}", m.csv_tag())?;
    m.phase("write", || write_ensemble_csv(&mut w, &ens, a.export_paths))?;
    w.flush()?;
    let mpath = m.write_beside(&a.out)?;
    print_report(&[
        ("csv".into(), a.out.display().to_string()),
        ("manifest".into(), mpath.display().to_string()),
    ]);
    Ok(0)
}

const SOLVE_KEYS: [&str; 14] = [
    "type", "generator", "paths", "steps", "seed", "horizon", "beta", "tol", "degree", "ridge", "max_picard",
    "delta_steps", "strict", "export_paths",
];

/// Solve settings after merging flags, config file and defaults.
#[derive(Clone, Debug)]
pub struct ResolvedSolve {
    pub kind: String,
    pub generator: String,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub horizon: Option<f64>,
    pub cfg: SolverConfig,
    pub export_paths: usize,
}

fn parse_beta(s: &str) -> Result<BetaPolicy> {
    if s == "auto" {
        return Ok(BetaPolicy::Auto);
    }
    match s.parse::<f64>() {
        Ok(b) => Ok(BetaPolicy::Fixed(b)),
        Err(_) => invalid(format!("beta must be `auto` or a number, got {s:?}")),
    }
}

/// Merges flags over the config file over defaults.
pub fn resolve_solve(a: &SolveArgs) -> Result<ResolvedSolve> {
    let file = match &a.config {
        Some(p) => read_flat(p)?,
        None => Table::new(),
    };
    check_keys(&file, &SOLVE_KEYS)?;
    let kind = a.kind.clone().or(config::get_str(&file, "type")?).unwrap_or_else(|| "1".into());
    if !["1", "2", "pathdep", "fbsde"].contains(&kind.as_str()) {
        return invalid(format!("--type must be 1, 2, pathdep or fbsde, got {kind:?}"));
    }
    let generator = match a.generator.clone().or(config::get_str(&file, "generator")?) {
        Some(g) => g,
        None if kind == "fbsde" => "fbsde-sin".into(),
        None => {
            return invalid(format!("missing --generator; available: {}", catalog::SCENARIO_IDS.join(", ")))
        }
    };
    let beta = match a.beta.clone().or(config::get_str(&file, "beta")?) {
        Some(s) => parse_beta(&s)?,
        None => BetaPolicy::Auto,
    };
    let strict = if a.no_strict { false } else { config::get_bool(&file, "strict")?.unwrap_or(true) };
    let cfg = SolverConfig {
        p: 2.0,
        beta,
        max_picard: a.max_picard.or(config::get_usize(&file, "max_picard")?).unwrap_or(50),
        tol: a.tol.or(config::get_f64(&file, "tol")?).unwrap_or(1e-4),
        delta_steps: a.delta_steps.or(config::get_usize(&file, "delta_steps")?),
        basis: BasisConfig {
            degree: a.degree.or(config::get_usize(&file, "degree")?).unwrap_or(3),
            ridge: a.ridge.or(config::get_f64(&file, "ridge")?).unwrap_or(1e-8),
        },
        strict,
    };
    cfg.validate()?;
    Ok(ResolvedSolve {
        kind,
        generator,
        paths: a.paths.or(config::get_usize(&file, "paths")?).unwrap_or(10_000),
        steps: a.steps.or(config::get_usize(&file, "steps")?).unwrap_or(50),
        seed: a.seed.or(config::get_usize(&file, "seed")?.map(|s| s as u64)).unwrap_or(1),
        horizon: a.horizon.or(config::get_f64(&file, "horizon")?),
        cfg,
        export_paths: a.export_paths.or(config::get_usize(&file, "export_paths")?).unwrap_or(100),
    })
}

fn record_solver(m: &mut RunManifest, cfg: &SolverConfig) {
    m.set(
        "beta",
        match cfg.beta {
            BetaPolicy::Auto => Value::String("auto".into()),
            BetaPolicy::Fixed(b) => Value::Float(b),
        },
    );
    m.set("tol", cfg.tol);
    m.set("max_picard", cfg.max_picard as i64);
    m.set(
        "delta_steps",
        match cfg.delta_steps {
            Some(d) => Value::Integer(d as i64),
            None => Value::String("auto".into()),
        },
    );
    m.set("degree", cfg.basis.degree as i64);
    m.set("ridge", cfg.basis.ridge);
    m.set("strict", cfg.strict);
    m.set("p", cfg.p);
}

/// Writes `Y` and `Z` for the first `export` paths.
pub fn write_solution_csv<W: Write>(w: &mut W, tag: &str, sol: &BsvieSolution, ens: &BrownianEnsemble, export: usize) -> Result<()> {
    writeln!(w, "{tag}")?;
    writeln!(w, "{SOLUTION_HEADER}")?;
    let n = ens.grid().n_steps();
    let dim = sol.y.dim();
    let m = export.min(ens.n_paths());
    let mut cells: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for i in 0..=n {
        for j in 1..=n {
            if let Some(cell) = sol.z.lookup(i, j) {
                let mut buf = vec![0.0; m * dim];
                cell.eval_range(ens, j - 1, dim, 0..m, &mut buf);
                cells.push((i, j, buf));
            }
        }
    }
    for p in 0..m {
        for i in 0..=n {
            for c in 0..dim {
                writeln!(w, "Y,{p},{i},{i},{c},{}", sol.y.value(p, i, c))?;
            }
        }
        for (i, j, vals) in &cells {
            for c in 0..dim {
                writeln!(w, "Z,{p},{i},{j},{c},{}", vals[p * dim + c])?;
            }
        }
    }
    Ok(())
}

fn write_residual_csv(path: &Path, tag: &str, sol: &BsvieSolution) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{tag}")?;
    writeln!(w, "{RESIDUAL_HEADER}")?;
    for r in &sol.residual {
        writeln!(w, "{},{},{}", r.node, r.rms, r.max_abs)?;
    }
    w.flush()?;
    Ok(())
}

fn fbsde_scenario(spec_path: Option<&Path>, horizon: Option<f64>, m: &mut RunManifest) -> Result<crate::fbsde::FbsdeSpec> {
    let table = match spec_path {
        Some(p) => read_flat(p)?,
        None => Table::new(),
    };
    check_keys(&table, &["scenario", "kappa", "horizon"])?;
    if let Some(s) = config::get_str(&table, "scenario")? {
        if s != "fbsde-sin" {
            return invalid(format!("FBSDE family {s:?} is not in the catalog; available: fbsde-sin"));
        }
    }
    let kappa = config::get_f64(&table, "kappa")?.unwrap_or(FBSDE_SIN_KAPPA);
    let t = config::get_f64(&table, "horizon")?.or(horizon).unwrap_or(1.0);
    if !(t > 0.0 && t.is_finite()) {
        return invalid("horizon must be positive");
    }
    m.set("fbsde_kappa", kappa);
    Ok(fbsde_sin_spec(t, kappa))
}

fn solve(a: SolveArgs) -> Result<i32> {
    let r = resolve_solve(&a)?;
    let mut m = RunManifest::new("solve");
    m.set("solver", r.kind.clone());
    m.set("generator", r.generator.clone());
    m.set("seed", r.seed as i64);
    m.set("n_steps", r.steps as i64);
    m.set("n_paths", r.paths as i64);
    m.set("export_paths", r.export_paths as i64);
    record_solver(&mut m, &r.cfg);

    let fb_spec = if r.kind == "fbsde" {
        if r.generator != "fbsde-sin" {
            return invalid(format!("--type fbsde needs an FBSDE family, got {:?}", r.generator));
        }
        Some(fbsde_scenario(a.spec.as_deref(), r.horizon, &mut m)?)
    } else {
        None
    };
    let sc: Scenario = catalog::scenario(&r.generator, fb_spec.as_ref().map(|s| s.horizon).or(r.horizon))?;
    m.set("horizon", sc.horizon);
    let grid = sc.grid(r.steps)?;
    let ens = m.phase("simulate", || BrownianEnsemble::simulate(grid, r.paths, r.seed))?;
    let cfg = &r.cfg;
    let mut fam = None;
    let sol = match r.kind.as_str() {
        "1" | "2" => {
            let Some(g) = sc.generator.as_ref() else {
                return invalid(format!("scenario {} is path-dependent; solve it with --type pathdep", sc.id));
            };
            m.phase("solve", || {
                if r.kind == "1" {
                    solve_type1(&ens, &sc.psi, g, cfg)
                } else {
                    solve_type2(&ens, &sc.psi, g, cfg)
                }
            })?
        }
        "pathdep" => {
            let Some(g) = sc.path_generator.as_ref() else {
                return invalid(format!("scenario {} has no path-dependent generator; use --type 1 or 2", sc.id));
            };
            m.phase("solve", || {
                if g.uses_z {
                    solve_path_dependent_with_z(&ens, &sc.psi, g, cfg)
                } else {
                    solve_path_dependent(&ens, &sc.psi, g, cfg)
                }
            })?
        }
        _ => {
            let spec = fb_spec.as_ref().expect("resolved above");
            let (f, s) = m.phase("solve", || solve_fbsde_via_bsvie(&ens, spec, cfg))?;
            fam = Some(f);
            s
        }
    };
    let tag = m.csv_tag();
    let mut w = create(&a.out)?;
    m.phase("write", || write_solution_csv(&mut w, &tag, &sol, &ens, r.export_paths))?;
    w.flush()?;
    let res_path = sibling(&a.out, "residual.csv");
    write_residual_csv(&res_path, &tag, &sol)?;
    let mut report = vec![
        ("solution_csv".to_string(), a.out.display().to_string()),
        ("residual_csv".into(), res_path.display().to_string()),
        ("picard_iterations".into(), sol.picard_history.len().to_string()),
        ("beta".into(), sol.beta.to_string()),
        ("max_residual_rms".into(), format!("{:.6e}", sol.max_residual_rms())),
    ];
    if let Some(c) = &sol.certificate {
        report.push(("certificate_margin".into(), c.margin.to_string()));
        report.push(("certified".into(), c.certified.to_string()));
    }
    if let Some(rec) = &sol.reconstruction_error {
        report.push(("max_reconstruction_error".into(), format!("{:.6e}", rec.iter().cloned().fold(0.0, f64::max))));
    }
    if let Some(f) = &fam {
        let n = ens.grid().n_steps();
        let tpath = sibling(&a.out, "triples.csv");
        let mut tw = create(&tpath)?;
        writeln!(tw, "{tag}")?;
        writeln!(tw, "{TRIPLE_HEADER}")?;
        let mm = r.export_paths.min(ens.n_paths());
        m.phase("triples", || -> Result<()> {
            for t in 0..n {
                let tr = f.triple(t);
                for p in 0..mm {
                    for k in t..=n {
                        let z = if k < n { tr.z.value(p, k, 0) } else { 0.0 };
                        writeln!(tw, "{t},{p},{k},{},{},{}", tr.x.value(p, k, 0), tr.y.value(p, k, 0), z)?;
                    }
                }
            }
            Ok(())
        })?;
        tw.flush()?;
        let coupling = f.terminal_coupling().into_iter().fold(0.0, f64::max);
        report.push(("triples_csv".into(), tpath.display().to_string()));
        report.push(("max_terminal_coupling".into(), format!("{coupling:.3e}")));
    }
    for wmsg in &sol.warnings {
        report.push(("warning".into(), wmsg.clone()));
    }
    let mpath = m.write_beside(&a.out)?;
    report.push(("manifest".into(), mpath.display().to_string()));
    print_report(&report);
    Ok(0)
}

fn certify_cmd(a: CertifyArgs) -> Result<i32> {
    let mut table = match &a.config {
        Some(p) => read_flat(p)?,
        None => Table::new(),
    };
    for (k, v) in parse_pairs(a.profile.iter().map(String::as_str))? {
        table.insert(k, v);
    }
    let (profile, hyp, resolved) = profile_from_table(&table)?;
    let cert = certify(&profile, hyp)?;
    let mut m = RunManifest::new("certify");
    m.extend(&resolved, "");
    let mut lines = vec![("manifest_sha256".to_string(), m.hash())];
    lines.extend(cert.report());
    print_report(&lines);
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        for (k, v) in &lines {
            writeln!(w, "{k} = {v}")?;
        }
        w.flush()?;
        m.write_beside(out)?;
    }
    Ok(if cert.certified { 0 } else { 3 })
}

fn demo(a: DemoArgs) -> Result<i32> {
    let case = DemoCase::parse(&a.case)?;
    let mut m = RunManifest::new("demo counterexample");
    m.set("case", case.label());
    m.set("seed", a.seed as i64);
    m.set("n_steps", a.steps as i64);
    m.set("n_paths", a.paths as i64);
    let cfg = SolverConfig {
        basis: BasisConfig::with_degree(a.degree),
        ..SolverConfig::default()
    };
    record_solver(&mut m, &cfg);
    let horizon = match case {
        DemoCase::Example11 => 1.0,
        DemoCase::Example42 => 2.0,
    };
    m.set("horizon", horizon);
    let grid = crate::stochastic::TimeGrid::new(horizon, a.steps)?;
    let ens = m.phase("simulate", || BrownianEnsemble::simulate(grid, a.paths, a.seed))?;
    let rep = m.phase("demo", || demo_no_adapted_solution(case, &ens, &cfg))?;
    let mut w = create(&a.out)?;
    writeln!(w, "{}", m.csv_tag())?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    let vpath = sibling(&a.out, "verdict");
    let mut vw = create(&vpath)?;
    let mut lines = vec![("manifest_sha256".to_string(), m.hash())];
    lines.extend(rep.report());
    for (k, v) in &lines {
        writeln!(vw, "{k} = {v}")?;
    }
    vw.flush()?;
    m.write_beside(&a.out)?;
    print_report(&lines);
    Ok(if rep.holds() { 0 } else { 1 })
}

fn parse_ladder(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<usize>().map_err(|_| BsvieError::InvalidArgument(format!("bad ladder entry {x:?}"))))
        .collect()
}

fn convergence(a: ConvergenceArgs) -> Result<i32> {
    let sc = if a.scenario == "zero" {
        Scenario::zero(1.0)
    } else {
        catalog::scenario(&a.scenario, None)?
    };
    let values = parse_ladder(&a.ladder)?;
    let ladder: Vec<Rung> = match a.axis.as_str() {
        "steps" => values
            .iter()
            .map(|&s| Rung {
                n_steps: s,
                n_paths: a.paths,
                degree: a.degree,
            })
            .collect(),
        "paths" => values
            .iter()
            .map(|&p| Rung {
                n_steps: a.steps,
                n_paths: p,
                degree: a.degree,
            })
            .collect(),
        other => return invalid(format!("--axis must be steps or paths, got {other:?}")),
    };
    let mut m = RunManifest::new("convergence");
    m.set("scenario", sc.id.clone());
    m.set("axis", a.axis.clone());
    m.set("ladder", a.ladder.clone());
    m.set("seed", a.seed as i64);
    m.set("replicates", a.replicates as i64);
    m.set("n_paths", a.paths as i64);
    m.set("n_steps", a.steps as i64);
    let opts = StudyOptions {
        seed: a.seed,
        replicates: a.replicates,
        solver: SolverConfig {
            basis: BasisConfig::with_degree(a.degree),
            ..SolverConfig::default()
        },
    };
    record_solver(&mut m, &opts.solver);
    let table = m.phase("study", || convergence_study(&sc, &ladder, &opts))?;
    let mut w = create(&a.out)?;
    writeln!(w, "{}", m.csv_tag())?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let mpath = m.write_beside(&a.out)?;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "none".into());
    print_report(&[
        ("csv".into(), a.out.display().to_string()),
        ("reference".into(), table.reference.clone()),
        ("order".into(), fmt_opt(table.order)),
        ("r_squared".into(), fmt_opt(table.r_squared)),
        ("strictly_decreasing".into(), table.strictly_decreasing().to_string()),
        ("manifest".into(), mpath.display().to_string()),
    ]);
    Ok(0)
}
