//! Command-line front end. `main` parses [`Cli`] and maps [`run`]'s result
//! to an exit code with [`exit_code`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, PacketConfig, RoupConfig, WalkConfig};
use crate::dirac::{convergence_study, gaussian_packet, solve_dirac, DiracCoefficients, SpinorField, StudyDomain};
use crate::error::{Error, Result};
use crate::fick::{fick_residual, heuristic_density, heuristic_nu, metric_from_density, simple_fick_rejection};
use crate::io::{config_hash, write_json_file, write_table_file};
use crate::kernels::Grid1D;
use crate::qwalk::{run_walk, total_probability};
use crate::roup::{default_dt, rescaled_profile, simulate_profiles, DensityProfile, RoupParams, TAIL_TOLERANCE};
use crate::verify::{Group, Verifier, VerifyConfig, ALL_CRITERIA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "relwalk", version, about = "Quantum walks, their Dirac limit and relativistic OU diffusion")]
pub struct Cli {
    /// TOML experiment file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the discrete walk from a Gaussian packet.
    Walk(WalkArgs),
    /// Solve the continuum Dirac equation for the same setup.
    Dirac(WalkArgs),
    /// Walk-to-Dirac error at a sequence of lattice spacings.
    Converge(ConvergeArgs),
    /// Relativistic OU density profiles.
    Roup(RoupArgs),
    /// Metric and Fick diagnostics from simulated profiles.
    Metric(MetricArgs),
    /// Closed-form early-time heuristic density.
    Heuristic(HeuristicArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    /// Lattice spacing ε.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Final time.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    /// Decreasing lattice spacings, comma separated.
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RoupArgs {
    #[arg(long = "Q", allow_negative_numbers = true, conflicts_with = "qs")]
    pub q: Option<f64>,
    /// Several Q values, comma separated.
    #[arg(long = "Qs", allow_negative_numbers = true, value_delimiter = ',')]
    pub qs: Option<Vec<f64>>,
    /// Output times, comma separated.
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',', conflicts_with = "t")]
    pub times: Option<Vec<f64>>,
    /// Single output time.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub p_points: Option<usize>,
    #[arg(long)]
    pub x_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    #[arg(long = "Q", allow_negative_numbers = true)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',', conflicts_with = "t")]
    pub times: Option<Vec<f64>>,
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub p_points: Option<usize>,
    #[arg(long)]
    pub x_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct HeuristicArgs {
    #[arg(long = "Q", allow_negative_numbers = true)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',', conflicts_with = "t")]
    pub times: Option<Vec<f64>>,
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Samples in ξ ∈ [−1, 1].
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Restrict to one group: walk, roup or fick.
    #[arg(long)]
    pub only: Option<String>,
    #[arg(long)]
    pub p_points: Option<usize>,
    #[arg(long)]
    pub x_points: Option<usize>,
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: Kind,
    /// Hash of the resolved config with `out` and `threads` cleared.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
    pub summary: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// `Some(false)` when `verify` ran and a criterion failed.
    pub verified: Option<bool>,
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.verified == Some(false) => EXIT_VERIFY,
        Ok(_) => EXIT_OK,
        Err(e) if e.is_config() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERICAL,
    }
}

/// Machine-readable error line for stderr.
pub fn error_json(err: &Error) -> String {
    let kind = if err.is_config() { "config" } else { "numerical" };
    json!({ "status": "error", "kind": kind, "message": err.to_string() }).to_string()
}

impl Command {
    pub fn kind(&self) -> Kind {
        match self {
            Command::Walk(_) => Kind::Walk,
            Command::Dirac(_) => Kind::Dirac,
            Command::Converge(_) => Kind::Converge,
            Command::Roup(_) => Kind::Roup,
            Command::Metric(_) => Kind::Metric,
            Command::Heuristic(_) => Kind::Heuristic,
            Command::Verify(_) => Kind::Verify,
        }
    }
}

fn set<T>(dst: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *dst = v;
    }
}

fn times_override(times: &Option<Vec<f64>>, t: Option<f64>) -> Option<Vec<f64>> {
    times.clone().or(t.map(|t| vec![t]))
}

/// Loads the config file (if any) and applies the flags.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.out, cli.out.clone());
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Walk(a) | Command::Dirac(a) => {
            set(&mut cfg.walk.epsilon, a.eps);
            set(&mut cfg.walk.t_final, a.t);
        }
        Command::Converge(a) => {
            set(&mut cfg.converge.eps, a.eps.clone());
            set(&mut cfg.converge.t_final, a.t);
        }
        Command::Roup(a) => {
            set(&mut cfg.roup.q, a.qs.clone().or(a.q.map(|q| vec![q])));
            set(&mut cfg.roup.times, times_override(&a.times, a.t));
            set(&mut cfg.roup.p_points, a.p_points);
            set(&mut cfg.roup.x_points, a.x_points);
        }
        Command::Metric(a) => {
            set(&mut cfg.metric.q, a.q.map(|q| vec![q]));
            set(&mut cfg.metric.times, times_override(&a.times, a.t));
            set(&mut cfg.metric.p_points, a.p_points);
            set(&mut cfg.metric.x_points, a.x_points);
        }
        Command::Heuristic(a) => {
            set(&mut cfg.heuristic.q, a.q);
            set(&mut cfg.heuristic.times, times_override(&a.times, a.t));
            set(&mut cfg.heuristic.points, a.points);
        }
        Command::Verify(a) => {
            if a.only.is_some() {
                cfg.verify.only = a.only.clone();
            }
            set(&mut cfg.verify.p_points, a.p_points);
            set(&mut cfg.verify.x_points, a.x_points);
        }
    }
    let kind = cli.command.kind();
    if cfg.kind.is_some_and(|k| k != kind) {
        // reports the mismatch
        cfg.validate(kind)?;
    }
    cfg.kind = Some(kind);
    Ok(cfg)
}

/// Resolves, validates and runs; writes `manifest.json` last.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let kind = cli.command.kind();
    let cfg = resolve_config(cli)?;
    cfg.validate(kind)?;
    if let Some(n) = cfg.threads {
        // Fails only if a pool already exists, e.g. a second run in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    let (summary, verified) = match kind {
        Kind::Walk => (run_walk_kind(&cfg.walk, &cfg.out, &mut files)?, None),
        Kind::Dirac => (run_dirac_kind(&cfg.walk, &cfg.out, &mut files)?, None),
        Kind::Converge => (run_converge(&cfg, &cfg.out, &mut files)?, None),
        Kind::Roup => (run_roup(&cfg.roup, &cfg.out, &mut files)?, None),
        Kind::Metric => (run_metric(&cfg.metric, &cfg.out, &mut files)?, None),
        Kind::Heuristic => (run_heuristic(&cfg, &cfg.out, &mut files)?, None),
        Kind::Verify => {
            let (summary, passed) = run_verify(&cfg, &cfg.out, &mut files)?;
            (summary, Some(passed))
        }
    };
    files.sort();
    let manifest = Manifest {
        tool: "relwalk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind,
        config_hash: config_hash(&ExperimentConfig { out: PathBuf::new(), threads: None, ..cfg.clone() }),
        config: cfg.clone(),
        files,
        summary,
    };
    write_json_file(&cfg.out.join("manifest.json"), &manifest)?;
    Ok(Outcome { out_dir: cfg.out.clone(), manifest, verified })
}

fn lattice_count(length: f64, step: f64) -> Result<usize> {
    let n = length / step;
    if (n - n.round()).abs() > 1e-9 * n {
        return Err(Error::DomainMismatch(format!("length {length} is not a multiple of ε = {step}")));
    }
    Ok(n.round() as usize)
}

fn initial_field(cfg: &WalkConfig) -> Result<SpinorField> {
    let n = lattice_count(cfg.length, cfg.epsilon)?;
    let p: &PacketConfig = &cfg.packet;
    Ok(SpinorField::sample(cfg.x_min, cfg.epsilon, n, 0.0, gaussian_packet(p.x0, p.sigma, p.k0, p.mix)))
}

fn write_bytes(dir: &Path, name: String, bytes: Vec<u8>, files: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(&name), bytes)?;
    files.push(name);
    Ok(())
}

fn run_walk_kind(cfg: &WalkConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let jet = cfg.jet.build();
    let initial = initial_field(cfg)?;
    let state = run_walk(&jet, cfg.epsilon, cfg.t_final, &initial)?;
    let mut buf = Vec::new();
    state.write_csv(&mut buf, true)?;
    write_bytes(out, format!("walk_T{}.csv", cfg.t_final), buf, files)?;
    let before: f64 = initial.psi_minus.iter().chain(&initial.psi_plus).map(|z| z.norm_sqr()).sum();
    let after = total_probability(&state);
    Ok(json!({
        "steps": state.step_index,
        "probability": after * cfg.epsilon,
        "probability_drift": (after - before).abs() / before,
    }))
}

fn run_dirac_kind(cfg: &WalkConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let coeffs = DiracCoefficients::from_jet(&cfg.jet.build());
    let initial = initial_field(cfg)?;
    let psi = solve_dirac(&coeffs, &initial, cfg.t_final, cfg.epsilon)?;
    let mut buf = Vec::new();
    psi.write_csv(&mut buf)?;
    write_bytes(out, format!("dirac_T{}.csv", cfg.t_final), buf, files)?;
    Ok(json!({ "l2_norm": psi.l2_norm(), "initial_l2_norm": initial.l2_norm() }))
}

fn run_converge(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let c = &cfg.converge;
    let p = &c.packet;
    let table = convergence_study(
        &c.jet.build(),
        gaussian_packet(p.x0, p.sigma, p.k0, p.mix),
        StudyDomain { x_min: c.x_min, length: c.length, refine: c.refine },
        c.t_final,
        &c.eps,
    )?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_bytes(out, "convergence.csv".into(), buf, files)?;
    Ok(json!({
        "errors": table.rows.iter().map(|r| r.error).collect::<Vec<_>>(),
        "orders": table.orders(),
    }))
}

/// One run per `(Q, T)`, each on the default domain for its own `T`.
/// Also returns the resolved grids and tolerances for the manifest.
fn profile_for(cfg: &RoupConfig, q: f64, t: f64) -> Result<(DensityProfile, Value)> {
    let dt = cfg.dt.unwrap_or_else(|| default_dt(t));
    let params = RoupParams::with_resolution(q, t, cfg.p_points, cfg.x_points, dt)?;
    let resolved = json!({
        "p_max": params.p_grid.upper(),
        "p_points": params.p_grid.count(),
        "x_min": params.x_grid.x_min(),
        "x_length": params.x_grid.length(),
        "x_points": params.x_grid.count(),
        "dt": params.dt,
        "tail_tolerance": TAIL_TOLERANCE,
        "max_phase_per_cell": params.max_phase_per_cell,
    });
    Ok((simulate_profiles(&params)?.remove(0), resolved))
}

fn run_roup(cfg: &RoupConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let mut rows = Vec::new();
    for &q in &cfg.q {
        for &t in &cfg.times {
            let (profile, resolved) = profile_for(cfg, q, t)?;
            let nu = rescaled_profile(&profile)?;
            let tag = if cfg.q.len() == 1 { format!("T{t}") } else { format!("Q{q}_T{t}") };
            let mut buf = Vec::new();
            nu.write_csv(&mut buf)?;
            write_bytes(out, format!("nu_profile_{tag}.csv"), buf, files)?;
            let mut buf = Vec::new();
            profile.write_csv(&mut buf)?;
            write_bytes(out, format!("density_{tag}.csv"), buf, files)?;
            rows.push(json!({
                "Q": q,
                "T": t,
                "mass": profile.mass(),
                "peak_xi": nu.peak(),
                "gaussian_l1": nu.gaussian_l1_distance(),
                "resolved": resolved,
            }));
        }
    }
    Ok(Value::Array(rows))
}

fn run_metric(cfg: &RoupConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let mut rows = Vec::new();
    for &q in &cfg.q {
        for &t in &cfg.times {
            let (profile, resolved) = profile_for(cfg, q, t)?;
            let metric = metric_from_density(&profile)?;
            let tag = if cfg.q.len() == 1 { format!("T{t}") } else { format!("Q{q}_T{t}") };
            let mut buf = Vec::new();
            metric.write_csv(&mut buf)?;
            write_bytes(out, format!("metric_{tag}.csv"), buf, files)?;
            let report = simple_fick_rejection(&profile);
            let name = format!("fick_rejection_{tag}.json");
            write_json_file(&out.join(&name), &report)?;
            files.push(name);
            let g0 = metric.g_at_xi(0.0);
            let ratio = match (metric.g_at_xi(0.95), g0) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                _ => None,
            };
            rows.push(json!({
                "Q": q,
                "T": t,
                "fick_residual": fick_residual(&profile, &metric)?,
                "g_ratio_xi0.95": ratio,
                "simple_fick_rejected": report.rejected,
                "resolved": resolved,
            }));
        }
    }
    Ok(Value::Array(rows))
}

fn run_heuristic(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let h = &cfg.heuristic;
    let grid = Grid1D::symmetric(1.0, h.points)?;
    let xi = grid.points();
    for &t in &h.times {
        let tt = vec![t; xi.len()];
        let n: Vec<f64> = xi.iter().map(|&s| heuristic_density(t, h.q * t * s, h.q)).collect();
        let nu: Vec<f64> = xi.iter().map(|&s| heuristic_nu(s, h.q)).collect();
        let name = format!("heuristic_T{t}.csv");
        write_table_file(&out.join(&name), &["T", "xi", "N_heuristic", "nu_heuristic"], &[&tt, &xi, &n, &nu])?;
        files.push(name);
    }
    let peak = crate::fick::heuristic_peak(h.q).ok();
    Ok(json!({ "Q": h.q, "peak_velocity": peak, "mass": crate::fick::heuristic_mass(h.q) }))
}

fn run_verify(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<String>) -> Result<(Value, bool)> {
    let ids: Vec<u32> = match &cfg.verify.only {
        Some(g) => Group::parse(g)?.ids().to_vec(),
        None => ALL_CRITERIA.to_vec(),
    };
    let verifier = Verifier::new(VerifyConfig {
        p_points: cfg.verify.p_points,
        x_points: cfg.verify.x_points,
        tolerances: cfg.tolerances.clone(),
        seed: cfg.verify.seed,
    });
    let mut criteria = Vec::new();
    for id in ids {
        let report = verifier.run(id);
        println!("{}", report.summary());
        criteria.push(report);
    }
    let passed = criteria.iter().all(|c| c.passed);
    let report = crate::verify::VerifyReport { version: env!("CARGO_PKG_VERSION").into(), criteria, passed };
    write_json_file(&out.join("verify_report.json"), &report)?;
    files.push("verify_report.json".into());
    let failed: Vec<u32> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    Ok((json!({ "passed": passed, "failed": failed }), passed))
}
