//! The acceptance suite, shared by `relwalk verify` and the `acceptance`
//! test target.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dirac::{convergence_study, gaussian_packet, solve_dirac, DiracCoefficients, SpinorField, StudyDomain};
use crate::error::{Error, Result};
use crate::fick::{
    fick_residual, galilean_ou_profile, galilean_variance, heuristic_nu, heuristic_peak, metric_from_density,
    simple_fick_rejection,
};
use crate::kernels::PeriodicGrid;
use crate::qwalk::{constant_field, step_walk, total_probability, CoinAngles, JetSpec, WalkState};
use crate::roup::{
    default_dt, juttner, rescaled_profile, DensityProfile, KineticSolver, RoupParams, DEFAULT_P_POINTS,
    DEFAULT_X_POINTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Relation::Below => measured < tolerance,
            Relation::Above => measured > tolerance,
            Relation::AtLeast => measured >= tolerance,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::Above => ">",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub key: String,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Wall time; left out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionReport {
    /// One line: `PASS [5] name: key=value<tol, ...`.
    pub fn summary(&self) -> String {
        let checks: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{}={:.6e} {} {:.3e}", c.key, c.measured, c.relation.symbol(), c.tolerance))
            .collect();
        format!(
            "{} [{}] {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            checks.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub version: String,
    pub criteria: Vec<CriterionReport>,
    pub passed: bool,
}

/// Criterion groups selectable with `--only`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Group {
    Walk,
    Roup,
    Fick,
}

impl Group {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "walk" => Ok(Group::Walk),
            "roup" => Ok(Group::Roup),
            "fick" => Ok(Group::Fick),
            other => Err(Error::Config(format!("unknown criterion group {other:?} (walk, roup, fick)"))),
        }
    }

    pub fn ids(self) -> &'static [u32] {
        match self {
            Group::Walk => &[1, 2, 3],
            Group::Roup => &[4, 5, 6, 7, 8],
            Group::Fick => &[9, 10, 11],
        }
    }
}

pub const ALL_CRITERIA: [u32; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub p_points: usize,
    pub x_points: usize,
    /// Replaces the tolerance of the check with this key.
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { p_points: DEFAULT_P_POINTS, x_points: DEFAULT_X_POINTS, tolerances: BTreeMap::new(), seed: 20_240_601 }
    }
}

/// ROUP density profiles shared between criteria.
pub struct Verifier {
    config: VerifyConfig,
    cache: Mutex<HashMap<(u64, u64), Arc<DensityProfile>>>,
}

struct Builder<'a> {
    config: &'a VerifyConfig,
    checks: Vec<Check>,
}

impl Builder<'_> {
    fn check(&mut self, key: &str, measured: f64, relation: Relation, tolerance: f64) {
        let tolerance = self.config.tolerances.get(key).copied().unwrap_or(tolerance);
        let passed = measured.is_finite() && relation.holds(measured, tolerance);
        self.checks.push(Check { key: key.to_string(), measured, relation, tolerance, passed });
    }
}

impl Verifier {
    pub fn new(config: VerifyConfig) -> Self {
        Self { config, cache: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> &VerifyConfig {
        &self.config
    }

    /// Density at `T` from a run with the default domain for that `T`.
    pub fn profile(&self, q: f64, t: f64) -> Result<Arc<DensityProfile>> {
        let key = (q.to_bits(), t.to_bits());
        if let Some(p) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let params = RoupParams::with_resolution(q, t, self.config.p_points, self.config.x_points, default_dt(t))?;
        let profile = Arc::new(crate::roup::simulate_profiles(&params)?.remove(0));
        self.cache.lock().expect("cache lock").insert(key, profile.clone());
        Ok(profile)
    }

    pub fn run(&self, id: u32) -> CriterionReport {
        let start = Instant::now();
        let mut b = Builder { config: &self.config, checks: Vec::new() };
        let (name, outcome) = match id {
            1 => ("walk unitarity", self.walk_unitarity(&mut b)),
            2 => ("continuum-limit convergence", self.continuum_convergence(&mut b)),
            3 => ("Dirac dispersion", self.dirac_dispersion(&mut b)),
            4 => ("Juttner stationarity", self.juttner_stationarity(&mut b)),
            5 => ("propagation peak", self.propagation_peak(&mut b)),
            6 => ("heuristic agreement", self.heuristic_agreement(&mut b)),
            7 => ("valley-to-Gaussian evolution", self.valley_to_gaussian(&mut b)),
            8 => ("continuity", self.continuity(&mut b)),
            9 => ("generalised Fick identity", self.generalised_fick(&mut b)),
            10 => ("Galilean limit", self.galilean_limit(&mut b)),
            11 => ("simple Fick rejection", self.simple_fick(&mut b)),
            _ => ("unknown criterion", Err(Error::Config(format!("no criterion {id}")))),
        };
        if let Err(e) = outcome {
            b.checks.push(Check {
                key: format!("error: {e}"),
                measured: f64::NAN,
                relation: Relation::Below,
                tolerance: f64::NAN,
                passed: false,
            });
        }
        let passed = !b.checks.is_empty() && b.checks.iter().all(|c| c.passed);
        CriterionReport { id, name: name.to_string(), checks: b.checks, passed, seconds: start.elapsed().as_secs_f64() }
    }

    pub fn run_all(&self, ids: &[u32]) -> VerifyReport {
        let criteria: Vec<CriterionReport> = ids.iter().map(|&id| self.run(id)).collect();
        let passed = criteria.iter().all(|c| c.passed);
        VerifyReport { version: env!("CARGO_PKG_VERSION").to_string(), criteria, passed }
    }

    fn walk_unitarity(&self, b: &mut Builder) -> Result<()> {
        const SITES: usize = 1024;
        const STEPS: usize = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        // Four low Fourier modes in (j, m) per angle.
        let mut coeffs = [[(0.0, 0.0, 0.0, 0.0); 4]; 4];
        for angle in coeffs.iter_mut() {
            for (k, c) in angle.iter_mut().enumerate() {
                *c = (rng.gen_range(-1.0..1.0), (k + 1) as f64, rng.gen_range(-0.01..0.01), rng.gen_range(0.0..2.0 * PI));
            }
        }
        let eval = |angle: usize, j: i64, m: i64| -> f64 {
            coeffs[angle]
                .iter()
                .map(|&(a, k, w, phase)| a * (2.0 * PI * k * m as f64 / SITES as f64 + w * j as f64 + phase).cos())
                .sum()
        };
        let field = |j: i64, m: i64| CoinAngles {
            theta: eval(0, j, m),
            xi: eval(1, j, m),
            zeta: eval(2, j, m),
            alpha: eval(3, j, m),
        };
        let mut minus: Vec<Complex64> = (0..SITES).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let mut plus: Vec<Complex64> = (0..SITES).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let norm = minus.iter().chain(&plus).map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        minus.iter_mut().chain(plus.iter_mut()).for_each(|v| *v /= norm);
        let mut state = WalkState::new(minus, plus, 0, 1.0, 1.0)?;
        let p0 = total_probability(&state);
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        for _ in 0..STEPS {
            state = step_walk(&state, &field);
            worst = worst.max((total_probability(&state) - p0).abs());
        }
        b.check("walk_probability_drift", worst, Relation::Below, 1e-10);
        b.check("walk_runtime_s", start.elapsed().as_secs_f64(), Relation::Below, 10.0);
        Ok(())
    }

    fn continuum_convergence(&self, b: &mut Builder) -> Result<()> {
        let jet = JetSpec::new(-FRAC_PI_2)
            .with_theta_bar(Arc::new(|_, x: f64| 0.3 * x.cos()))
            .with_xi_bar(constant_field(0.2))
            .with_alpha_bar(Arc::new(|t: f64, _| 0.1 * t.sin()));
        let start = Instant::now();
        let domain = StudyDomain { x_min: -10.0, length: 20.0, refine: 8 };
        let table = convergence_study(&jet, gaussian_packet(0.0, 1.0, 1.0, 0.6), domain, 1.0, &[0.1, 0.05, 0.025])?;
        let min_order = table.orders().into_iter().fold(f64::INFINITY, f64::min);
        b.check("convergence_min_order", min_order, Relation::AtLeast, 0.9);
        b.check("convergence_error_eps0.025", table.rows[2].error, Relation::Below, 1e-2);
        b.check("convergence_runtime_s", start.elapsed().as_secs_f64(), Relation::Below, 60.0);
        Ok(())
    }

    fn dirac_dispersion(&self, b: &mut Builder) -> Result<()> {
        // L = 2π holds integer wavenumbers; dx = dt forces M = round(L/1e-3).
        let m = 6283;
        let dt = 2.0 * PI / m as f64;
        let coeffs = DiracCoefficients { theta_bar: constant_field(1.0), ..DiracCoefficients::free() };
        let mass = 1.0;
        let mut worst: f64 = 0.0;
        for k in [1.0f64, 2.0, 4.0] {
            let omega = (k * k + mass * mass).sqrt();
            // Positive-frequency eigenvector of [[−k, 1], [1, k]].
            let (a, c) = (1.0, omega + k);
            let n = (a * a + c * c).sqrt();
            let (a, c) = (a / n, c / n);
            let wave = move |x: f64| {
                let e = Complex64::from_polar(1.0, k * x);
                (e * a, e * c)
            };
            let mut field = SpinorField::sample(0.0, dt, m, 0.0, wave);
            let reference = field.clone();
            let chunk = 100;
            let mut phase = 0.0;
            let mut prev = Complex64::new(1.0, 0.0);
            for _ in 0..10 {
                field = solve_dirac(&coeffs, &field, chunk as f64 * dt, dt)?;
                let overlap: Complex64 = reference
                    .psi_minus
                    .iter()
                    .zip(&reference.psi_plus)
                    .zip(field.psi_minus.iter().zip(&field.psi_plus))
                    .map(|((r0, r1), (f0, f1))| r0.conj() * f0 + r1.conj() * f1)
                    .sum::<Complex64>()
                    / m as f64;
                phase += (overlap / prev).arg();
                prev = overlap;
            }
            let measured = -phase / field.time;
            worst = worst.max((measured - omega).abs() / omega);
        }
        b.check("dispersion_relative_error", worst, Relation::Below, 1e-3);
        Ok(())
    }

    fn juttner_stationarity(&self, b: &mut Builder) -> Result<()> {
        let params = RoupParams::with_resolution(1.0, 10.0, self.config.p_points, self.config.x_points, default_dt(10.0))?;
        let f0 = juttner(&params.p_grid, 1.0)?;
        let solver = KineticSolver::new(params.p_grid, 1.0, params.dt)?;
        let mut mode: Vec<Complex64> = f0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        solver.evolve_mode(&mut mode, 0.0, params.steps_to(10.0))?;
        let drift: f64 = mode.iter().zip(&f0).map(|(a, b)| (a - b).norm()).sum();
        let total: f64 = f0.iter().sum();
        b.check("juttner_l1_drift", drift / total, Relation::Below, 1e-6);
        Ok(())
    }

    fn propagation_peak(&self, b: &mut Builder) -> Result<()> {
        let start = Instant::now();
        let peak = |t: f64| -> Result<f64> { Ok(rescaled_profile(&*self.profile(1.0, t)?)?.peak()) };
        let main = peak(0.5)?;
        b.check("peak_offset_T0.5", (main - 0.948).abs(), Relation::Below, 0.015);
        b.check("peak_T0.25_vs_T0.5", (peak(0.25)? - main).abs(), Relation::Below, 0.015);
        b.check("peak_T0.75_vs_T0.5", (peak(0.75)? - main).abs(), Relation::Below, 0.015);
        b.check("peak_runtime_s", start.elapsed().as_secs_f64(), Relation::Below, 300.0);
        Ok(())
    }

    fn heuristic_agreement(&self, b: &mut Builder) -> Result<()> {
        let nu = rescaled_profile(&*self.profile(1.0, 0.05)?)?;
        let h: Vec<f64> = nu.xi.iter().map(|&xi| heuristic_nu(xi, 1.0)).collect();
        let dxi = nu.xi[1] - nu.xi[0];
        let l1: f64 = nu.nu.iter().zip(&h).map(|(a, b)| (a - b).abs()).sum::<f64>() * dxi;
        b.check("heuristic_l1", l1, Relation::Below, 0.05);
        let exact = heuristic_peak(1.0)?;
        b.check("heuristic_peak_vs_0.9428", (exact - 0.9428).abs(), Relation::Below, 1e-4);
        let argmax = nu
            .xi
            .iter()
            .zip(&h)
            .filter(|(x, _)| **x > 0.0)
            .fold((0.0, f64::NEG_INFINITY), |a, (x, v)| if *v > a.1 { (*x, *v) } else { a })
            .0;
        b.check("heuristic_grid_peak_offset_over_dxi", (argmax - 0.9428).abs() / dxi, Relation::Below, 1.0);
        Ok(())
    }

    fn valley_to_gaussian(&self, b: &mut Builder) -> Result<()> {
        let profiles: Vec<_> = [0.5, 2.0, 10.0]
            .iter()
            .map(|&t| rescaled_profile(&*self.profile(1.0, t)?))
            .collect::<Result<_>>()?;
        let centre: Vec<f64> = profiles.iter().map(|p| p.value_at(0.0)).collect();
        b.check("nu0_increase_0.5_to_2", centre[1] - centre[0], Relation::Above, 0.0);
        b.check("nu0_increase_2_to_10", centre[2] - centre[1], Relation::Above, 0.0);
        let early = &profiles[0];
        b.check("valley_depth_T0.5", early.value_at(early.peak()) - centre[0], Relation::Above, 0.0);
        let d2 = profiles[1].gaussian_l1_distance();
        let d10 = profiles[2].gaussian_l1_distance();
        b.check("gaussian_l1_T10_minus_T2", d10 - d2, Relation::Below, 0.0);
        Ok(())
    }

    fn continuity(&self, b: &mut Builder) -> Result<()> {
        // Levels T − δ, T, T + δ with δ = ΔX, so the time and space
        // differences have the same stencil on the light-cone front.
        let cells_per_unit = 2 * self.config.x_points.div_ceil(7);
        let residual = |points: usize, per_unit: usize| -> Result<f64> {
            let delta = 1.0 / per_unit as f64;
            let grid = PeriodicGrid::centered(points as f64 * delta, points)?;
            let params = RoupParams::with_resolution(1.0, 1.0, self.config.p_points, points, delta / 8.0)?
                .with_x_grid(grid)
                .with_output_times(vec![1.0 - delta, 1.0, 1.0 + delta])?;
            crate::roup::continuity_residual(&crate::roup::simulate_profiles(&params)?)
        };
        let coarse = residual(self.config.x_points / 2, cells_per_unit / 2)?;
        let fine = residual(self.config.x_points, cells_per_unit)?;
        b.check("continuity_residual", fine, Relation::Below, 1e-2);
        b.check("continuity_refinement_ratio", fine / coarse, Relation::Below, 0.5);
        Ok(())
    }

    fn generalised_fick(&self, b: &mut Builder) -> Result<()> {
        for t in [1.0, 4.0, 10.0] {
            let profile = self.profile(1.0, t)?;
            let metric = metric_from_density(&profile)?;
            b.check(&format!("fick_residual_T{t}"), fick_residual(&profile, &metric)?, Relation::Below, 1e-2);
            let g0 = metric.g_at_xi(0.0).unwrap_or(f64::NAN);
            let edge = metric.g_at_xi(0.95).unwrap_or(f64::NAN).min(metric.g_at_xi(-0.95).unwrap_or(f64::NAN));
            b.check(&format!("g_ratio_xi0.95_T{t}"), edge / g0, Relation::Above, 10.0);
        }
        Ok(())
    }

    fn galilean_limit(&self, b: &mut Builder) -> Result<()> {
        let t = 10.0;
        let sigma = galilean_variance(t).sqrt();
        let fine = PeriodicGrid::centered(20.0 * sigma, 2048)?;
        let reference = galilean_ou_profile(t, &fine)?;
        b.check("galilean_h_flatness", metric_from_density(&reference)?.flatness(), Relation::Below, 1e-2);

        let q = 8.0;
        let profile = self.profile(q, t)?;
        let grid = PeriodicGrid::centered(profile.dx() * profile.x.len() as f64, profile.x.len())?;
        let gauss = galilean_ou_profile(t, &grid)?;
        let l1: f64 = profile.n.iter().zip(&gauss.n).map(|(a, b)| (a - b).abs()).sum::<f64>() * profile.dx();
        b.check("roup_q8_vs_ou_l1", l1, Relation::Below, 0.02);
        Ok(())
    }

    fn simple_fick(&self, b: &mut Builder) -> Result<()> {
        let report = simple_fick_rejection(&*self.profile(1.0, 0.5)?);
        b.check("density_maxima", report.peaks.len() as f64, Relation::AtLeast, 2.0);
        b.check("peak_current_ratio", report.ratio, Relation::Above, 1e-3);
        Ok(())
    }
}
