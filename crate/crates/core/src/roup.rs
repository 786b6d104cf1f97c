//! Relativistic Ornstein-Uhlenbeck process in one space dimension, solved
//! mode by mode in Fourier space.
//!
//! In dimensionless variables the phase-space density obeys
//! `∂_T F + ∂_X(v F) = L_Q F` with `v = P/Γ_Q(P)`, `Γ_Q = (1 + P²/Q²)^{1/2}`
//! and `L_Q F = ∂_P(v F) + ∂²_P F`. With the transform
//! `F̂(K) = (2π)^{-1/2} ∫ F e^{iKX} dX` each mode evolves independently:
//!
//! `∂_T F̂ = iK v F̂ + L_Q F̂`.
//!
//! Time stepping is a Strang splitting: the transport factor `e^{iKvΔT/2}`
//! is applied exactly, the generator with Crank-Nicolson. The generator is
//! discretised in flux form with exponentially fitted fluxes, so the
//! Jüttner distribution is an exact discrete fixed point and the trapezoid
//! mass is conserved to round-off.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{dft_inverse, pairwise_sum, quad, quad_weights, Grid1D, PeriodicGrid, TridiagFactor};

/// Jüttner tail at the edge of the momentum grid must be below this
/// fraction of the peak.
pub const TAIL_TOLERANCE: f64 = 1e-12;
/// Default depth of the momentum grid: `Q²(Γ(P_max) − 1) = 30`.
pub const DEFAULT_TAIL_EXPONENT: f64 = 30.0;
pub const DEFAULT_P_POINTS: usize = 2048;
pub const DEFAULT_X_POINTS: usize = 512;
/// Light cone plus 50% padding on each side.
pub const DEFAULT_DOMAIN_FACTOR: f64 = 3.0;
pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_MAX_DT: f64 = 5e-3;
/// Largest transport phase difference between neighbouring momentum cells
/// accepted in a single step.
pub const DEFAULT_MAX_PHASE_PER_CELL: f64 = 0.5;

/// `Q²(Γ_Q(P) − 1) = P²/(1 + Γ_Q(P))`, evaluated without cancellation.
pub fn juttner_exponent(p: f64, q: f64) -> f64 {
    let gamma = lorentz_factor(p, q);
    p * p / (1.0 + gamma)
}

pub fn lorentz_factor(p: f64, q: f64) -> f64 {
    (1.0 + (p / q).powi(2)).sqrt()
}

/// `P/Γ_Q(P)`.
pub fn velocity(p: f64, q: f64) -> f64 {
    p / lorentz_factor(p, q)
}

/// Momentum half-width at which the Jüttner tail is `e^{-exponent}`.
pub fn momentum_cutoff(q: f64, exponent: f64) -> f64 {
    let gamma = 1.0 + exponent / (q * q);
    q * (gamma * gamma - 1.0).sqrt()
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Config(format!("Q must be positive and finite, got {q}")));
    }
    Ok(())
}

fn check_symmetric(grid: &Grid1D) -> Result<()> {
    let scale = grid.upper().abs().max(grid.lower().abs());
    if (grid.upper() + grid.lower()).abs() > 1e-12 * scale {
        return Err(Error::InvalidGrid(format!(
            "momentum grid must be symmetric about 0, got [{}, {}]",
            grid.lower(),
            grid.upper()
        )));
    }
    Ok(())
}

/// Normalised Jüttner distribution `A·exp(−Q²Γ_Q(P))` on `p_grid`.
pub fn juttner(p_grid: &Grid1D, q: f64) -> Result<Vec<f64>> {
    check_q(q)?;
    check_symmetric(p_grid)?;
    let p_max = p_grid.upper();
    let ratio = (-juttner_exponent(p_max, q)).exp();
    if ratio > TAIL_TOLERANCE {
        return Err(Error::GridTooSmall { p_max, ratio });
    }
    let unnormalised: Vec<f64> = p_grid.points().iter().map(|&p| (-juttner_exponent(p, q)).exp()).collect();
    let mass = quad(p_grid, &unnormalised)?;
    Ok(unnormalised.iter().map(|v| v / mass).collect())
}

/// Tridiagonal matrix of the discrete generator `L_Q`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Generator {
    /// Vertex-centred finite volumes (half cells at both ends, zero flux
    /// through the outer faces). The face flux
    /// `G_{i+½} = (e^{δ/2}F_{i+1} − e^{−δ/2}F_i)/ΔP` with `δ = φ_{i+1} − φ_i`,
    /// `φ = Q²(Γ − 1)`, reduces to the central flux
    /// `v(F_i + F_{i+1})/2 + (F_{i+1} − F_i)/ΔP` up to O(ΔP²) and vanishes
    /// identically on `e^{−φ}`.
    pub fn new(p_grid: &Grid1D, q: f64) -> Result<Self> {
        check_q(q)?;
        let n = p_grid.count();
        let h = p_grid.spacing();
        let phi: Vec<f64> = p_grid.points().iter().map(|&p| juttner_exponent(p, q)).collect();
        let mut sub = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n - 1];
        for i in 0..n {
            let volume = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            let scale = 1.0 / (h * volume);
            if i + 1 < n {
                let half = 0.5 * (phi[i + 1] - phi[i]);
                sup[i] = half.exp() * scale;
                diag[i] -= (-half).exp() * scale;
            }
            if i > 0 {
                let half = 0.5 * (phi[i] - phi[i - 1]);
                sub[i - 1] = (-half).exp() * scale;
                diag[i] -= half.exp() * scale;
            }
        }
        Ok(Self { sub, diag, sup })
    }

    pub fn apply<T>(&self, f: &[T]) -> Vec<T>
    where
        T: crate::kernels::Scalar,
    {
        crate::kernels::tridiag_apply(&self.sub, &self.diag, &self.sup, f)
    }
}

/// `L_Q F` on `p_grid`.
pub fn apply_generator(values: &[f64], p_grid: &Grid1D, q: f64) -> Result<Vec<f64>> {
    if values.len() != p_grid.count() {
        return Err(Error::Contract(format!(
            "expected {} momentum samples, got {}",
            p_grid.count(),
            values.len()
        )));
    }
    Ok(Generator::new(p_grid, q)?.apply(values))
}

/// Per-mode integrator for a fixed momentum grid, `Q` and step.
#[derive(Debug, Clone)]
pub struct KineticSolver {
    q: f64,
    p_grid: Grid1D,
    dt: f64,
    velocity: Vec<f64>,
    generator: Generator,
    cn_lhs: TridiagFactor,
    max_phase_per_cell: f64,
    max_velocity_jump: f64,
}

impl KineticSolver {
    pub fn new(p_grid: Grid1D, q: f64, dt: f64) -> Result<Self> {
        check_q(q)?;
        check_symmetric(&p_grid)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let velocity: Vec<f64> = p_grid.points().iter().map(|&p| velocity(p, q)).collect();
        let generator = Generator::new(&p_grid, q)?;
        let half = 0.5 * dt;
        let lhs_sub: Vec<f64> = generator.sub.iter().map(|v| -half * v).collect();
        let lhs_sup: Vec<f64> = generator.sup.iter().map(|v| -half * v).collect();
        let lhs_diag: Vec<f64> = generator.diag.iter().map(|v| 1.0 - half * v).collect();
        let cn_lhs = TridiagFactor::new(&lhs_sub, &lhs_diag, &lhs_sup)?;
        let max_velocity_jump = velocity.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        Ok(Self {
            q,
            p_grid,
            dt,
            velocity,
            generator,
            cn_lhs,
            max_phase_per_cell: DEFAULT_MAX_PHASE_PER_CELL,
            max_velocity_jump,
        })
    }

    pub fn with_max_phase_per_cell(mut self, limit: f64) -> Self {
        self.max_phase_per_cell = limit;
        self
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn p_grid(&self) -> &Grid1D {
        &self.p_grid
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Transport phase difference between neighbouring momentum cells over
    /// one step. Splitting error and aliasing of the momentum oscillation
    /// are controlled by keeping it small.
    pub fn phase_per_cell(&self, k: f64) -> f64 {
        k.abs() * self.dt * self.max_velocity_jump
    }

    pub fn check_step(&self, k: f64) -> Result<()> {
        let estimate = self.phase_per_cell(k);
        if estimate > self.max_phase_per_cell {
            return Err(Error::StepRejected(format!(
                "K = {k}: transport phase {estimate:.3} rad per cell exceeds {} (reduce dt)",
                self.max_phase_per_cell
            )));
        }
        Ok(())
    }

    fn crank_nicolson(&self, f: &mut [Complex64]) {
        let lf = self.generator.apply(f);
        let half = 0.5 * self.dt;
        for (v, l) in f.iter_mut().zip(&lf) {
            *v += l * half;
        }
        self.cn_lhs
            .solve_in_place(f)
            .expect("right-hand side length matches the factorisation");
    }

    /// Advances one mode by `n_steps` steps.
    pub fn evolve_mode(&self, f: &mut [Complex64], k: f64, n_steps: usize) -> Result<()> {
        if f.len() != self.p_grid.count() {
            return Err(Error::Contract(format!(
                "mode has {} samples, momentum grid has {}",
                f.len(),
                self.p_grid.count()
            )));
        }
        self.check_step(k)?;
        if n_steps == 0 {
            return Ok(());
        }
        if k == 0.0 {
            for _ in 0..n_steps {
                self.crank_nicolson(f);
            }
            return Ok(());
        }
        let half: Vec<Complex64> = self
            .velocity
            .iter()
            .map(|&v| Complex64::from_polar(1.0, 0.5 * k * v * self.dt))
            .collect();
        let full: Vec<Complex64> = half.iter().map(|h| h * h).collect();
        mul_assign(f, &half);
        for step in 0..n_steps {
            self.crank_nicolson(f);
            mul_assign(f, if step + 1 == n_steps { &half } else { &full });
        }
        Ok(())
    }
}

fn mul_assign(f: &mut [Complex64], factors: &[Complex64]) {
    for (v, w) in f.iter_mut().zip(factors) {
        *v *= w;
    }
}

/// Free-streaming approximation `(2π)^{-1/2} F*(P) e^{iK v T}` valid while
/// the Jüttner distribution is unchanged by `L_Q`.
pub fn free_streaming_mode(juttner: &[f64], velocity: &[f64], k: f64, t: f64) -> Vec<Complex64> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    juttner
        .iter()
        .zip(velocity)
        .map(|(&f, &v)| Complex64::from_polar(norm * f, k * v * t))
        .collect()
}

/// Parameters of a full simulation.
#[derive(Debug, Clone)]
pub struct RoupParams {
    pub q: f64,
    pub p_grid: Grid1D,
    pub x_grid: PeriodicGrid,
    pub dt: f64,
    pub output_times: Vec<f64>,
    pub max_phase_per_cell: f64,
}

impl RoupParams {
    /// Default resolution for output times up to `t_final`.
    pub fn new(q: f64, t_final: f64) -> Result<Self> {
        Self::with_resolution(q, t_final, DEFAULT_P_POINTS, DEFAULT_X_POINTS, default_dt(t_final))
    }

    pub fn with_resolution(q: f64, t_final: f64, p_points: usize, x_points: usize, dt: f64) -> Result<Self> {
        check_q(q)?;
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::NonPositiveTime(t_final));
        }
        let p_grid = Grid1D::symmetric(momentum_cutoff(q, DEFAULT_TAIL_EXPONENT), p_points)?;
        let x_grid = PeriodicGrid::centered(DEFAULT_DOMAIN_FACTOR * q * t_final, x_points)?;
        let params = Self {
            q,
            p_grid,
            x_grid,
            dt,
            output_times: vec![t_final],
            max_phase_per_cell: DEFAULT_MAX_PHASE_PER_CELL,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_output_times(mut self, times: Vec<f64>) -> Result<Self> {
        self.output_times = times;
        self.validate()?;
        Ok(self)
    }

    pub fn with_x_grid(mut self, x_grid: PeriodicGrid) -> Self {
        self.x_grid = x_grid;
        self
    }

    pub fn t_final(&self) -> f64 {
        self.output_times.iter().copied().fold(0.0, f64::max)
    }

    /// Number of evolved modes `K_j = jΔK`, `j = 0..=M/2`.
    pub fn mode_count(&self) -> usize {
        self.x_grid.count() / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        check_symmetric(&self.p_grid)?;
        if !self.p_grid.count().is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "momentum grid count must be even, got {}",
                self.p_grid.count()
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.output_times.is_empty() {
            return Err(Error::Config("no output times".into()));
        }
        let mut previous = -1.0;
        for &t in &self.output_times {
            if !(t >= 0.0) || t <= previous {
                return Err(Error::Config("output times must be non-negative and increasing".into()));
            }
            crate::qwalk::whole_steps(t, self.dt)?;
            previous = t;
        }
        Ok(())
    }

    pub fn steps_to(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// `T_final/1000`, capped at 5e-3.
pub fn default_dt(t_final: f64) -> f64 {
    let dt = t_final / DEFAULT_STEPS as f64;
    if dt <= DEFAULT_MAX_DT {
        dt
    } else {
        t_final / (t_final / DEFAULT_MAX_DT).ceil()
    }
}

/// `F̂_Q(T, K_j, P)` for `K_j = jΔK`, `j = 0..=M/2`. Negative modes follow
/// from reality of `F`: `F̂(−K, P) = conj F̂(K, P)`.
#[derive(Debug, Clone)]
pub struct KineticState {
    pub q: f64,
    pub time: f64,
    pub p_grid: Grid1D,
    pub x_grid: PeriodicGrid,
    /// `modes[j][i] = F̂(K_j, P_i)`.
    pub modes: Vec<Vec<Complex64>>,
}

impl KineticState {
    /// `F*/√(2π)` in every mode.
    pub fn initial(params: &RoupParams) -> Result<Self> {
        let f0 = juttner(&params.p_grid, params.q)?;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let mode: Vec<Complex64> = f0.iter().map(|&v| Complex64::new(v * norm, 0.0)).collect();
        Ok(Self {
            q: params.q,
            time: 0.0,
            p_grid: params.p_grid,
            x_grid: params.x_grid.clone(),
            modes: vec![mode; params.mode_count()],
        })
    }

    pub fn k(&self, j: usize) -> f64 {
        j as f64 * self.x_grid.dk()
    }

    /// `√(2π) ∫ F̂(0, P) dP`, the total probability.
    pub fn mass(&self) -> f64 {
        let q = quad(&self.p_grid, &self.modes[0]).expect("mode length matches grid");
        q.re * (2.0 * std::f64::consts::PI).sqrt()
    }

    /// Largest `|Im F̂(0, P)|` relative to `max |F̂(0, P)|`; zero for real `F`.
    pub fn reality_defect(&self) -> f64 {
        let m = &self.modes[0];
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        m.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / scale.max(f64::MIN_POSITIVE)
    }

    /// Largest `|F̂(K, −P) − conj F̂(K, P)|` over modes, relative to the
    /// largest amplitude. Zero for an initial condition even in `(X, P)`.
    pub fn parity_defect(&self) -> f64 {
        let scale = self.modes[0].iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for mode in &self.modes {
            let n = mode.len();
            for i in 0..n {
                worst = worst.max((mode[n - 1 - i] - mode[i].conj()).norm());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    /// Full spectrum in FFT slot order for a per-mode scalar.
    fn spectrum(&self, per_mode: &[Complex64]) -> Vec<Complex64> {
        let m = self.x_grid.count();
        let half = m / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for (j, v) in per_mode.iter().enumerate().take(half) {
            out[j] = *v;
            if j > 0 {
                out[m - j] = v.conj();
            }
        }
        // ±K_Nyquist alias on the grid; keep the symmetric (real) part.
        out[half] = Complex64::new(per_mode[half].re, 0.0);
        out
    }
}

/// Evolves every mode from the Jüttner initial condition and returns the
/// state at each output time.
pub fn evolve_all(params: &RoupParams) -> Result<Vec<KineticState>> {
    params.validate()?;
    let solver = KineticSolver::new(params.p_grid, params.q, params.dt)?
        .with_max_phase_per_cell(params.max_phase_per_cell);
    let initial = KineticState::initial(params)?;
    let dk = params.x_grid.dk();
    // Reject before doing any work.
    solver.check_step(dk * (params.mode_count() - 1) as f64)?;
    let steps: Vec<usize> = params.output_times.iter().map(|&t| params.steps_to(t)).collect();

    let per_mode: Vec<Vec<Vec<Complex64>>> = initial
        .modes
        .par_iter()
        .enumerate()
        .map(|(j, start)| -> Result<Vec<Vec<Complex64>>> {
            let k = j as f64 * dk;
            let mut f = start.clone();
            let mut done = 0;
            let mut snapshots = Vec::with_capacity(steps.len());
            for &target in &steps {
                solver.evolve_mode(&mut f, k, target - done)?;
                done = target;
                snapshots.push(f.clone());
            }
            Ok(snapshots)
        })
        .collect::<Result<_>>()?;

    let mut states = Vec::with_capacity(steps.len());
    for (s, &t) in params.output_times.iter().enumerate() {
        states.push(KineticState {
            q: params.q,
            time: t,
            p_grid: params.p_grid,
            x_grid: params.x_grid.clone(),
            modes: per_mode.iter().map(|snaps| snaps[s].clone()).collect(),
        });
    }
    Ok(states)
}

/// Density `N_Q` and current `J_Q` on the periodic X grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub q: f64,
    pub time: f64,
    pub x: Vec<f64>,
    pub n: Vec<f64>,
    pub j: Vec<f64>,
}

impl DensityProfile {
    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.x[0], self.x[self.x.len() - 1], self.x.len()).expect("profile grid has >= 3 points")
    }

    /// Periodic trapezoid rule, `ΔX Σ N`.
    pub fn mass(&self) -> f64 {
        self.dx() * pairwise_sum(&self.n)
    }

    pub fn max_density(&self) -> f64 {
        self.n.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest density beyond `|X| > QT + margin`, relative to the peak.
    pub fn outside_light_cone(&self, margin: f64) -> f64 {
        let edge = self.q * self.time + margin;
        let peak = self.max_density();
        self.x
            .iter()
            .zip(&self.n)
            .filter(|(x, _)| x.abs() > edge)
            .map(|(_, n)| n.abs())
            .fold(0.0, f64::max)
            / peak
    }

    /// CSV with columns `T,X,N,J`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let t = vec![self.time; self.x.len()];
        crate::io::write_table(out, &["T", "X", "N", "J"], &[&t, &self.x, &self.n, &self.j])
    }
}

const RECONSTRUCTION_IMAG_TOLERANCE: f64 = 1e-8;
const REALITY_TOLERANCE: f64 = 1e-10;

fn real_part_checked(values: Vec<Complex64>, what: &str) -> Result<Vec<f64>> {
    let scale = values.iter().map(|v| v.re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let imag = values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if imag > RECONSTRUCTION_IMAG_TOLERANCE * scale {
        return Err(Error::SymmetryViolation(format!(
            "{what}: imaginary residue {imag:e} relative to {scale:e}"
        )));
    }
    Ok(values.into_iter().map(|v| v.re).collect())
}

/// `N = ∫F dP` and `J = ∫vF dP` in physical space.
///
/// The momentum quadrature is applied per mode before the inverse transform
/// (both are linear), which avoids one transform per momentum node.
pub fn reconstruct_density(state: &KineticState) -> Result<DensityProfile> {
    if state.reality_defect() > REALITY_TOLERANCE {
        return Err(Error::SymmetryViolation(format!(
            "K = 0 mode is not real (defect {:e})",
            state.reality_defect()
        )));
    }
    let v: Vec<f64> = state.p_grid.points().iter().map(|&p| velocity(p, state.q)).collect();
    let weights = quad_weights(&state.p_grid);
    let (n_hat, j_hat): (Vec<Complex64>, Vec<Complex64>) = state
        .modes
        .iter()
        .map(|mode| {
            let a: Vec<Complex64> = mode.iter().zip(&weights).map(|(f, w)| f * w).collect();
            let b: Vec<Complex64> = a.iter().zip(&v).map(|(f, v)| f * v).collect();
            (pairwise_sum(&a), pairwise_sum(&b))
        })
        .unzip();
    let n = dft_inverse(&state.x_grid, &state.spectrum(&n_hat))?;
    let j = dft_inverse(&state.x_grid, &state.spectrum(&j_hat))?;
    Ok(DensityProfile {
        q: state.q,
        time: state.time,
        x: state.x_grid.xs(),
        n: real_part_checked(n, "density")?,
        j: real_part_checked(j, "current")?,
    })
}

/// `F(T, X_m, P_i)` as `out[m][i]`.
pub fn reconstruct_phase_space(state: &KineticState) -> Result<Vec<Vec<f64>>> {
    let m = state.x_grid.count();
    let np = state.p_grid.count();
    let columns: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map(|i| {
            let per_mode: Vec<Complex64> = state.modes.iter().map(|mode| mode[i]).collect();
            let field = dft_inverse(&state.x_grid, &state.spectrum(&per_mode))?;
            real_part_checked(field, "phase-space density")
        })
        .collect::<Result<_>>()?;
    Ok((0..m).map(|x| columns.iter().map(|c| c[x]).collect()).collect())
}

/// `ν_Q(T, ξ) = QT·N_Q(T, QTξ)` against `ξ = X/(QT)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledProfile {
    pub q: f64,
    pub time: f64,
    pub xi: Vec<f64>,
    pub nu: Vec<f64>,
}

impl RescaledProfile {
    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.xi[0], self.xi[self.xi.len() - 1], self.xi.len()).expect("rescaled grid has >= 3 points")
    }

    pub fn mass(&self) -> f64 {
        (self.xi[1] - self.xi[0]) * pairwise_sum(&self.nu)
    }

    /// Linear interpolation of ν at `xi`.
    pub fn value_at(&self, xi: f64) -> f64 {
        interpolate(&self.xi, &self.nu, xi)
    }

    /// Location of the maximum over `ξ > 0`, refined by a parabola through
    /// the three samples around the discrete argmax.
    pub fn peak(&self) -> f64 {
        peak_location(&self.xi, &self.nu)
    }

    /// L¹ distance to the Gaussian with the same mass and second moment.
    pub fn gaussian_l1_distance(&self) -> f64 {
        let mass = pairwise_sum(&self.nu);
        let second: Vec<f64> = self.xi.iter().zip(&self.nu).map(|(x, n)| x * x * n).collect();
        let var = pairwise_sum(&second) / mass;
        let dxi = self.xi[1] - self.xi[0];
        let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
        let diff: Vec<f64> = self
            .xi
            .iter()
            .zip(&self.nu)
            .map(|(x, n)| (n - mass * dxi * norm * (-x * x / (2.0 * var)).exp()).abs())
            .collect();
        pairwise_sum(&diff) * dxi
    }

    /// CSV with columns `T,xi,nu`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let t = vec![self.time; self.xi.len()];
        crate::io::write_table(out, &["T", "xi", "nu"], &[&t, &self.xi, &self.nu])
    }
}

pub fn rescaled_profile(profile: &DensityProfile) -> Result<RescaledProfile> {
    if !(profile.time > 0.0) {
        return Err(Error::NonPositiveTime(profile.time));
    }
    let scale = profile.q * profile.time;
    Ok(RescaledProfile {
        q: profile.q,
        time: profile.time,
        xi: profile.x.iter().map(|x| x / scale).collect(),
        nu: profile.n.iter().map(|n| n * scale).collect(),
    })
}

/// Linear interpolation on ascending abscissae; clamps outside the range.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

/// Argmax over positive abscissae with quadratic refinement.
pub fn peak_location(xs: &[f64], ys: &[f64]) -> f64 {
    let (best, _) = xs
        .iter()
        .zip(ys)
        .enumerate()
        .filter(|(_, (x, _))| **x > 0.0)
        .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, (_, &y))| if y > acc.1 { (i, y) } else { acc });
    if best == usize::MAX {
        return f64::NAN;
    }
    if best == 0 || best + 1 >= xs.len() {
        return xs[best];
    }
    let (y0, y1, y2) = (ys[best - 1], ys[best], ys[best + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let h = xs[best + 1] - xs[best];
    if denom == 0.0 {
        return xs[best];
    }
    xs[best] + 0.5 * h * (y0 - y2) / denom
}

/// Normalised L² norm of `∂_T N + ∂_X J` at the interior time levels, using
/// centred differences in time and periodic centred differences in space.
pub fn continuity_residual(profiles: &[DensityProfile]) -> Result<f64> {
    if profiles.len() < 3 {
        return Err(Error::TooFewLevels(profiles.len()));
    }
    let mut residual = Vec::new();
    let mut flux = Vec::new();
    for w in profiles.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if a.x.len() != b.x.len() || b.x.len() != c.x.len() {
            return Err(Error::GridMismatch("profiles use different grids".into()));
        }
        let dt = c.time - a.time;
        let dx = b.dx();
        let n = b.x.len();
        for m in 0..n {
            let dn_dt = (c.n[m] - a.n[m]) / dt;
            let dj_dx = (b.j[(m + 1) % n] - b.j[(m + n - 1) % n]) / (2.0 * dx);
            residual.push((dn_dt + dj_dx).powi(2));
            flux.push(dj_dx * dj_dx);
        }
    }
    let denom = pairwise_sum(&flux).sqrt();
    if denom == 0.0 {
        return Ok(pairwise_sum(&residual).sqrt());
    }
    Ok(pairwise_sum(&residual).sqrt() / denom)
}

/// Convenience: evolve and reconstruct the density at each output time.
pub fn simulate_profiles(params: &RoupParams) -> Result<Vec<DensityProfile>> {
    evolve_all(params)?.iter().map(reconstruct_density).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p_grid(q: f64, n: usize) -> Grid1D {
        Grid1D::symmetric(momentum_cutoff(q, DEFAULT_TAIL_EXPONENT), n).unwrap()
    }

    /// `K₁(x) = ∫₀^∞ e^{−x cosh u} cosh u du`, trapezoid in `u` (converges
    /// geometrically for this analytic, rapidly decaying integrand).
    fn bessel_k1(x: f64) -> f64 {
        let h: f64 = 1e-3;
        let mut sum = 0.5 * (-x).exp();
        let mut u = h;
        loop {
            let term = (-x * u.cosh()).exp() * u.cosh();
            sum += term;
            if term < 1e-300 || u > 50.0 {
                break;
            }
            u += h;
        }
        sum * h
    }

    #[test]
    fn bessel_reference_value() {
        // Abramowitz & Stegun table 9.8: K₁(1) = 0.6019072301972346
        assert_abs_diff_eq!(bessel_k1(1.0), 0.601_907_230_197_234_6, epsilon = 1e-12);
    }

    #[test]
    fn juttner_even_and_normalised() {
        let g = p_grid(1.0, 2048);
        let f = juttner(&g, 1.0).unwrap();
        let n = f.len();
        for i in 0..n {
            assert_eq!(f[i], f[n - 1 - i]);
        }
        assert_abs_diff_eq!(quad(&g, &f).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn juttner_normalisation_matches_bessel_identity() {
        for q in [1.0, 0.7, 2.0] {
            let g = p_grid(q, 4096);
            let f = juttner(&g, q).unwrap();
            // A = F*(0)·e^{Q²} and A·2Q·K₁(Q²) = 1.
            let mid = f.len() / 2;
            let p0 = g.point(mid);
            let a = f[mid] * (juttner_exponent(p0, q) + q * q).exp();
            assert_abs_diff_eq!(a * 2.0 * q * bessel_k1(q * q), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn juttner_rejects_short_grid() {
        let g = Grid1D::symmetric(5.0, 256).unwrap();
        assert!(matches!(juttner(&g, 1.0), Err(Error::GridTooSmall { .. })));
        let lopsided = Grid1D::new(-30.0, 35.0, 256).unwrap();
        assert!(matches!(juttner(&lopsided, 1.0), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn generator_annihilates_juttner() {
        let g = p_grid(1.0, 2048);
        let f = juttner(&g, 1.0).unwrap();
        let lf = apply_generator(&f, &g, 1.0).unwrap();
        let peak = f.iter().copied().fold(0.0, f64::max);
        let worst = lf.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4 * peak, "residual {worst:e}");
    }

    #[test]
    fn generator_conserves_mass_on_constants() {
        let g = p_grid(1.0, 512);
        let lf = apply_generator(&vec![1.0; 512], &g, 1.0).unwrap();
        assert!(lf.iter().any(|v| v.abs() > 1e-3));
        assert!(quad(&g, &lf).unwrap().abs() < 1e-12);
    }

    #[test]
    fn generator_conserves_mass_on_arbitrary_data() {
        let g = p_grid(1.3, 300);
        let f: Vec<f64> = g.points().iter().map(|p| (p * 0.7).sin().abs() + 0.1 * p.cos()).collect();
        let lf = apply_generator(&f, &g, 1.3).unwrap();
        assert!(quad(&g, &lf).unwrap().abs() < 1e-12);
    }

    #[test]
    fn generator_reduces_to_central_differences() {
        // Exponential fitting only changes the flux at O(ΔP²).
        let q = 1.0;
        let g = p_grid(q, 4096);
        let f: Vec<f64> = g.points().iter().map(|p| (-(p * p) / 8.0).exp()).collect();
        let lf = apply_generator(&f, &g, q).unwrap();
        let h = g.spacing();
        let pts = g.points();
        let mut worst: f64 = 0.0;
        for i in 1..f.len() - 1 {
            let flux = |a: usize, b: usize| {
                let v = velocity(0.5 * (pts[a] + pts[b]), q);
                v * 0.5 * (f[a] + f[b]) + (f[b] - f[a]) / h
            };
            let central = (flux(i, i + 1) - flux(i - 1, i)) / h;
            worst = worst.max((central - lf[i]).abs());
        }
        assert!(worst < 1e-4, "{worst:e}");
    }

    #[test]
    fn galilean_surrogate_stationary() {
        let q = 1e3;
        let g = Grid1D::symmetric(momentum_cutoff(q, 30.0), 1024).unwrap();
        let f: Vec<f64> = g
            .points()
            .iter()
            .map(|p| (-0.5 * p * p).exp() / (2.0 * std::f64::consts::PI).sqrt())
            .collect();
        let lf = apply_generator(&f, &g, q).unwrap();
        let worst = lf.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst:e}");
    }

    #[test]
    fn k0_juttner_is_stationary() {
        let g = p_grid(1.0, 2048);
        let f = juttner(&g, 1.0).unwrap();
        let solver = KineticSolver::new(g, 1.0, 0.01).unwrap();
        let mut mode: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        solver.evolve_mode(&mut mode, 0.0, 1000).unwrap();
        let drift: f64 = mode.iter().zip(&f).map(|(a, b)| (a.re - b).abs() + a.im.abs()).sum();
        let total: f64 = f.iter().sum();
        assert!(drift / total < 1e-6, "{:e}", drift / total);
    }

    #[test]
    fn k0_shifted_juttner_relaxes_monotonically() {
        let q = 1.0;
        let g = p_grid(q, 1024);
        let target = juttner(&g, q).unwrap();
        let shifted_raw: Vec<f64> = g.points().iter().map(|&p| (-juttner_exponent(p - 1.0, q)).exp()).collect();
        let mass = quad(&g, &shifted_raw).unwrap();
        let mut mode: Vec<Complex64> = shifted_raw.iter().map(|v| Complex64::new(v / mass, 0.0)).collect();
        let solver = KineticSolver::new(g, q, 0.01).unwrap();
        let l1 = |m: &[Complex64]| {
            let d: Vec<f64> = m.iter().zip(&target).map(|(a, b)| (a.re - b).abs()).collect();
            quad(&g, &d).unwrap()
        };
        let mut prev = l1(&mode);
        let mass0 = quad(&g, &mode).unwrap().re;
        let start = prev;
        for _ in 0..50 {
            solver.evolve_mode(&mut mode, 0.0, 10).unwrap();
            let now = l1(&mode);
            assert!(now < prev, "{now} >= {prev}");
            prev = now;
        }
        assert!(prev < 0.2 * start, "{prev} from {start}");
        assert!((quad(&g, &mode).unwrap().re - mass0).abs() < 1e-10);
    }

    #[test]
    fn short_time_matches_free_streaming_at_second_order() {
        let q = 1.0;
        let g = p_grid(q, 2048);
        let f = juttner(&g, q).unwrap();
        let k = 3.0;
        let err = |t: f64| {
            let steps = 200;
            let solver = KineticSolver::new(g, q, t / steps as f64).unwrap();
            let mut mode = free_streaming_mode(&f, solver.velocity(), k, 0.0);
            solver.evolve_mode(&mut mode, k, steps).unwrap();
            let approx = free_streaming_mode(&f, solver.velocity(), k, t);
            let num: f64 = mode.iter().zip(&approx).map(|(a, b)| (a - b).norm()).sum();
            let den: f64 = approx.iter().map(|b| b.norm()).sum();
            num / den
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}, errors {e1:e} {e2:e}");
    }

    #[test]
    fn step_rejection_on_large_phase() {
        let g = p_grid(1.0, 256);
        let solver = KineticSolver::new(g, 1.0, 0.1).unwrap();
        let mut mode = vec![Complex64::new(1.0, 0.0); 256];
        assert!(matches!(solver.evolve_mode(&mut mode, 1e4, 1), Err(Error::StepRejected(_))));
    }

    fn small_params(q: f64, t: f64) -> RoupParams {
        RoupParams::with_resolution(q, t, 512, 128, t / 200.0).unwrap()
    }

    #[test]
    fn initial_state_modes_equal() {
        let p = small_params(1.0, 0.5);
        let s = KineticState::initial(&p).unwrap();
        assert_eq!(s.modes.len(), 65);
        assert!(s.modes.iter().all(|m| m == &s.modes[0]));
        assert_abs_diff_eq!(s.mass(), 1.0, epsilon = 1e-12);
        let profile = reconstruct_density(&s).unwrap();
        assert_abs_diff_eq!(profile.mass(), 1.0, epsilon = 1e-10);
        // Discrete delta at X = 0.
        let centre = profile.x.iter().position(|x| x.abs() < 1e-12).unwrap();
        assert_abs_diff_eq!(profile.n[centre] * profile.dx(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn evolution_preserves_mass_reality_and_parity() {
        let p = small_params(1.0, 0.5).with_output_times(vec![0.25, 0.5]).unwrap();
        let states = evolve_all(&p).unwrap();
        for s in &states {
            assert_abs_diff_eq!(s.mass(), 1.0, epsilon = 1e-10);
            assert!(s.reality_defect() < 1e-12);
            assert!(s.parity_defect() < 1e-10, "{:e}", s.parity_defect());
            let prof = reconstruct_density(s).unwrap();
            assert_abs_diff_eq!(prof.mass(), 1.0, epsilon = 1e-8);
        }
        let init = KineticState::initial(&p).unwrap();
        for (a, b) in states[1].modes[0].iter().zip(&init.modes[0]) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_space_reconstruction_agrees_with_moments() {
        let p = small_params(1.0, 0.5);
        let state = evolve_all(&p).unwrap().pop().unwrap();
        let profile = reconstruct_density(&state).unwrap();
        let f = reconstruct_phase_space(&state).unwrap();
        let v: Vec<f64> = p.p_grid.points().iter().map(|&pp| velocity(pp, 1.0)).collect();
        for m in (0..profile.x.len()).step_by(7) {
            let n = quad(&p.p_grid, &f[m]).unwrap();
            let vf: Vec<f64> = f[m].iter().zip(&v).map(|(a, b)| a * b).collect();
            let j = quad(&p.p_grid, &vf).unwrap();
            assert_abs_diff_eq!(n, profile.n[m], epsilon = 1e-10);
            assert_abs_diff_eq!(j, profile.j[m], epsilon = 1e-10);
        }
    }

    #[test]
    fn reconstruct_rejects_non_real_zero_mode() {
        let p = small_params(1.0, 0.5);
        let mut s = KineticState::initial(&p).unwrap();
        s.modes[0][100] += Complex64::new(0.0, 1.0);
        assert!(matches!(reconstruct_density(&s), Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn current_is_odd_and_density_even() {
        let p = small_params(1.0, 1.0);
        let prof = simulate_profiles(&p).unwrap().pop().unwrap();
        let n = prof.x.len();
        // slot 0 is X = −L/2, the mirror of slot m is n − m.
        for m in 1..n {
            assert_abs_diff_eq!(prof.n[m], prof.n[n - m], epsilon = 1e-12);
            assert_abs_diff_eq!(prof.j[m], -prof.j[n - m], epsilon = 1e-12);
        }
        // particles flow outward: J > 0 on the right.
        let right = prof.x.iter().position(|&x| x > 0.3).unwrap();
        assert!(prof.j[right] > 0.0);
    }

    #[test]
    fn rescaled_profile_basics() {
        let p = small_params(1.0, 0.5);
        let prof = simulate_profiles(&p).unwrap().pop().unwrap();
        let r = rescaled_profile(&prof).unwrap();
        assert_abs_diff_eq!(r.mass(), 1.0, epsilon = 1e-6);
        let mut zero = prof.clone();
        zero.time = 0.0;
        assert!(matches!(rescaled_profile(&zero), Err(Error::NonPositiveTime(_))));
    }

    #[test]
    fn peak_location_parabola() {
        let xs: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -(x - 0.537f64).powi(2)).collect();
        assert_abs_diff_eq!(peak_location(&xs, &ys), 0.537, epsilon = 1e-12);
    }

    #[test]
    fn continuity_residual_cases() {
        let base = DensityProfile { q: 1.0, time: 0.0, x: (0..16).map(|i| i as f64).collect(), n: vec![1.0; 16], j: vec![0.0; 16] };
        let levels: Vec<DensityProfile> = (0..3).map(|k| DensityProfile { time: k as f64, ..base.clone() }).collect();
        assert_eq!(continuity_residual(&levels).unwrap(), 0.0);
        assert!(matches!(continuity_residual(&levels[..2]), Err(Error::TooFewLevels(2))));

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<DensityProfile> = (0..3)
            .map(|k| DensityProfile {
                time: k as f64 * 0.1,
                n: (0..16).map(|_| rng.gen()).collect(),
                j: (0..16).map(|_| rng.gen()).collect(),
                ..base.clone()
            })
            .collect();
        assert!(continuity_residual(&noisy).unwrap() > 0.3);
    }

    #[test]
    fn default_dt_divides_t_final() {
        for t in [0.05, 0.5, 1.0, 10.0, 7.3] {
            let dt = default_dt(t);
            assert!(dt <= DEFAULT_MAX_DT + 1e-15);
            crate::qwalk::whole_steps(t, dt).unwrap();
        }
    }
}
