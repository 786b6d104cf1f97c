//! (1+1)D Dirac equation with electromagnetic coupling and a complex mass
//! matrix, written in null coordinates:
//!
//! ```text
//! ∂₋ψ⁻ = i(ᾱ + ξ̄)ψ⁻ + θ̄ e^{iζ₀} ψ⁺,    ∂₋ = ∂_T − ∂_X
//! ∂₊ψ⁺ = i(ᾱ − ξ̄)ψ⁺ − θ̄ e^{−iζ₀} ψ⁻,   ∂₊ = ∂_T + ∂_X
//! ```
//!
//! equivalently `(iγ⁰D₀ + iγ¹D₁ − M)Ψ = 0` with `γ⁰ = σ₁`, `γ¹ = iσ₂`,
//! `D_μ = ∂_μ − iA_μ`, `A₀ = ᾱ`, `A₁ = −ξ̄` and `M = diag(θ̄e^{−iμ}, θ̄e^{iμ})`,
//! `μ = π/2 + ζ₀`.
//!
//! The solver works on a characteristic-aligned periodic grid (`ΔX = ΔT`)
//! so transport is an exact one-cell shift per step. The pointwise coupling
//! is applied with its exact 2×2 exponential in a Strang splitting, with
//! coefficients sampled at the temporal midpoint of each step.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::pairwise_sum;
use crate::qwalk::{run_walk, whole_steps, zero_field, JetSpec, ScalarField};

pub type Matrix2 = [[Complex64; 2]; 2];

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Two-component spinor `(ψ⁻, ψ⁺)` on a uniform periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub psi_minus: Vec<Complex64>,
    pub psi_plus: Vec<Complex64>,
    pub x_min: f64,
    pub dx: f64,
    pub time: f64,
}

impl SpinorField {
    pub fn sample<F>(x_min: f64, dx: f64, count: usize, time: f64, f: F) -> Self
    where
        F: Fn(f64) -> (Complex64, Complex64),
    {
        let (psi_minus, psi_plus) = (0..count).map(|i| f(x_min + i as f64 * dx)).unzip();
        Self {
            psi_minus,
            psi_plus,
            x_min,
            dx,
            time,
        }
    }

    pub fn len(&self) -> usize {
        self.psi_minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi_minus.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn densities(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.psi_minus.iter().map(|v| v.norm_sqr()).collect(),
            self.psi_plus.iter().map(|v| v.norm_sqr()).collect(),
        )
    }

    /// Discrete L² norm `(Σ |ψ|² ΔX)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let (a, b) = self.densities();
        let total: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        (pairwise_sum(&total) * self.dx).sqrt()
    }

    /// Rescales both components so the L² norm is one.
    pub fn normalized(mut self) -> Self {
        let n = self.l2_norm();
        if n > 0.0 {
            self.psi_minus.iter_mut().for_each(|v| *v /= n);
            self.psi_plus.iter_mut().for_each(|v| *v /= n);
        }
        self
    }

    /// CSV with columns `T,X,rho_minus,rho_plus,rho`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let (a, b) = self.densities();
        let total: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let xs: Vec<f64> = (0..self.len()).map(|i| self.x(i)).collect();
        let ts = vec![self.time; self.len()];
        crate::io::write_table(out, &["T", "X", "rho_minus", "rho_plus", "rho"], &[&ts, &xs, &a, &b, &total])
    }
}

/// Potential `(A₀, A₁)` and mass amplitude over space-time.
#[derive(Clone)]
pub struct DiracCoefficients {
    /// `A₀ = ᾱ`.
    pub a0: ScalarField,
    /// `A₁ = −ξ̄`.
    pub a1: ScalarField,
    pub theta_bar: ScalarField,
    pub zeta0: f64,
}

impl fmt::Debug for DiracCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiracCoefficients")
            .field("zeta0", &self.zeta0)
            .finish_non_exhaustive()
    }
}

impl DiracCoefficients {
    pub fn free() -> Self {
        Self {
            a0: zero_field(),
            a1: zero_field(),
            theta_bar: zero_field(),
            zeta0: -FRAC_PI_2,
        }
    }

    /// Continuum coefficients of a walk jet.
    pub fn from_jet(jet: &JetSpec) -> Self {
        let xi = jet.xi_bar.clone();
        Self {
            a0: jet.alpha_bar.clone(),
            a1: std::sync::Arc::new(move |t, x| -xi(t, x)),
            theta_bar: jet.theta_bar.clone(),
            zeta0: jet.zeta0,
        }
    }

    pub fn mu(&self) -> f64 {
        FRAC_PI_2 + self.zeta0
    }

    /// Matrix `C` of the pointwise part `∂_T Ψ = ±∂_X Ψ + C Ψ`.
    pub fn coupling(&self, t: f64, x: f64) -> Matrix2 {
        coupling_matrix((self.a0)(t, x), (self.a1)(t, x), (self.theta_bar)(t, x), self.zeta0)
    }
}

/// `diag(m⁻, m⁺)` with `m± = θ̄ e^{±iμ}`, `μ = π/2 + ζ₀`.
pub fn mass_matrix(theta_bar: f64, zeta0: f64) -> Matrix2 {
    let mu = FRAC_PI_2 + zeta0;
    let zero = Complex64::new(0.0, 0.0);
    [
        [Complex64::from_polar(theta_bar, -mu), zero],
        [zero, Complex64::from_polar(theta_bar, mu)],
    ]
}

/// Dirac matrices of the representation `γ⁰ = σ₁`, `γ¹ = iσ₂`.
pub fn gamma_matrices() -> (Matrix2, Matrix2) {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    ([[zero, one], [one, zero]], [[zero, one], [-one, zero]])
}

fn coupling_matrix(a0: f64, a1: f64, theta_bar: f64, zeta0: f64) -> Matrix2 {
    // ᾱ + ξ̄ = A₀ − A₁ and ᾱ − ξ̄ = A₀ + A₁.
    let w = Complex64::from_polar(theta_bar, zeta0);
    [[I * (a0 - a1), w], [-w.conj(), I * (a0 + a1)]]
}

/// `exp(s·C)` for the anti-Hermitian coupling matrix `C`.
fn coupling_exp(c: &Matrix2, s: f64) -> Matrix2 {
    // C = i·a·1 + D, D = [[ib, w], [−w̄, −ib]], D² = −Ω²·1.
    let a = 0.5 * (c[0][0].im + c[1][1].im);
    let b = 0.5 * (c[0][0].im - c[1][1].im);
    let w = c[0][1];
    let omega = (b * b + w.norm_sqr()).sqrt();
    let cos = (omega * s).cos();
    let sinc = if omega * s.abs() < 1e-8 {
        s * (1.0 - (omega * s).powi(2) / 6.0)
    } else {
        (omega * s).sin() / omega
    };
    let phase = Complex64::from_polar(1.0, a * s);
    [
        [phase * Complex64::new(cos, b * sinc), phase * (w * sinc)],
        [phase * (-w.conj() * sinc), phase * Complex64::new(cos, -b * sinc)],
    ]
}

fn apply_coupling(coeffs: &DiracCoefficients, field: &mut SpinorField, t: f64, s: f64) {
    let x_min = field.x_min;
    let dx = field.dx;
    field
        .psi_minus
        .par_iter_mut()
        .zip(field.psi_plus.par_iter_mut())
        .enumerate()
        .with_min_len(512)
        .for_each(|(i, (m, p))| {
            let e = coupling_exp(&coeffs.coupling(t, x_min + i as f64 * dx), s);
            let (a, b) = (*m, *p);
            *m = e[0][0] * a + e[0][1] * b;
            *p = e[1][0] * a + e[1][1] * b;
        });
}

/// Integrates the continuum equations from `initial.time` to
/// `initial.time + t_final` with step `dt`. Requires `initial.dx == dt`.
pub fn solve_dirac(coeffs: &DiracCoefficients, initial: &SpinorField, t_final: f64, dt: f64) -> Result<SpinorField> {
    if !(dt > 0.0) || (initial.dx - dt).abs() > 1e-12 * dt {
        return Err(Error::Config(format!(
            "characteristic grid requires dx == dt, got dx = {} and dt = {dt}",
            initial.dx
        )));
    }
    if initial.psi_plus.len() != initial.psi_minus.len() || initial.len() < 2 {
        return Err(Error::Contract("spinor components must share a length >= 2".into()));
    }
    let steps = whole_steps(t_final, dt)?;
    let mut field = initial.clone();
    let t0 = initial.time;
    for n in 0..steps {
        let t_mid = t0 + (n as f64 + 0.5) * dt;
        apply_coupling(coeffs, &mut field, t_mid, 0.5 * dt);
        field.psi_minus.rotate_left(1);
        field.psi_plus.rotate_right(1);
        apply_coupling(coeffs, &mut field, t_mid, 0.5 * dt);
    }
    field.time = t0 + steps as f64 * dt;
    Ok(field)
}

/// One row of a walk-vs-Dirac convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub error: f64,
    /// `log(e_prev/e)/log(ε_prev/ε)` against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub reference_dt: f64,
    pub t_final: f64,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "epsilon,error,order")?;
        for r in &self.rows {
            let order = r.order.map(crate::io::fmt_f64).unwrap_or_default();
            writeln!(out, "{},{},{}", crate::io::fmt_f64(r.epsilon), crate::io::fmt_f64(r.error), order)?;
        }
        Ok(())
    }
}

/// Periodic domain and resolution for a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyDomain {
    pub x_min: f64,
    pub length: f64,
    /// The Dirac reference uses `dt = min(ε)/refine`.
    pub refine: usize,
}

fn lattice_count(length: f64, step: f64) -> Result<usize> {
    let n = length / step;
    if (n - n.round()).abs() > 1e-9 * n {
        return Err(Error::DomainMismatch(format!(
            "domain length {length} is not a multiple of the spacing {step}"
        )));
    }
    Ok(n.round() as usize)
}

/// Runs the walk of `jet` at each ε and measures the discrete L² distance at
/// `t_final` to a fine Dirac solution with the jet's continuum coefficients.
pub fn convergence_study<F>(
    jet: &JetSpec,
    initial: F,
    domain: StudyDomain,
    t_final: f64,
    eps_list: &[f64],
) -> Result<ConvergenceTable>
where
    F: Fn(f64) -> (Complex64, Complex64),
{
    if eps_list.is_empty() {
        return Err(Error::Config("empty epsilon list".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("epsilon list must be strictly decreasing".into()));
    }
    if domain.refine == 0 {
        return Err(Error::Config("refine must be positive".into()));
    }
    let dt_ref = eps_list[eps_list.len() - 1] / domain.refine as f64;
    let n_ref = lattice_count(domain.length, dt_ref)?;
    let offset = domain.x_min / dt_ref;
    if (offset - offset.round()).abs() > 1e-9 * offset.abs().max(1.0) {
        return Err(Error::DomainMismatch(format!(
            "x_min = {} is not on the reference lattice",
            domain.x_min
        )));
    }
    let coeffs = DiracCoefficients::from_jet(jet);
    let init_ref = SpinorField::sample(domain.x_min, dt_ref, n_ref, 0.0, &initial);
    let reference = solve_dirac(&coeffs, &init_ref, t_final, dt_ref)?;

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let ratio = eps / dt_ref;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::DomainMismatch(format!(
                "epsilon {eps} is not a multiple of the reference step {dt_ref}"
            )));
        }
        let stride = ratio.round() as usize;
        let n = lattice_count(domain.length, eps)?;
        let init = SpinorField::sample(domain.x_min, eps, n, 0.0, &initial);
        let walk = run_walk(jet, eps, t_final, &init)?;
        let sq: Vec<f64> = (0..n)
            .map(|i| {
                let r = i * stride;
                (walk.psi_minus[i] - reference.psi_minus[r]).norm_sqr()
                    + (walk.psi_plus[i] - reference.psi_plus[r]).norm_sqr()
            })
            .collect();
        let error = (pairwise_sum(&sq) * eps).sqrt();
        let order = rows.last().map(|prev| (prev.error / error).ln() / (prev.epsilon / eps).ln());
        rows.push(ConvergenceRow { epsilon: eps, error, order });
    }
    Ok(ConvergenceTable {
        rows,
        reference_dt: dt_ref,
        t_final,
    })
}

/// Gaussian packet `exp(−(X−x0)²/(4σ²))` split between the components with
/// weights `(cos φ, sin φ)`, times `e^{ik0 X}`.
pub fn gaussian_packet(x0: f64, sigma: f64, k0: f64, mix: f64) -> impl Fn(f64) -> (Complex64, Complex64) {
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    move |x| {
        let env = norm * (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
        let carrier = Complex64::from_polar(env, k0 * x);
        (carrier * mix.cos(), carrier * mix.sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qwalk::constant_field;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
        let mut out = [[c(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[r][k] += a[r][l] * b[l][k];
                }
            }
        }
        out
    }

    #[test]
    fn mass_matrix_cases() {
        let m = mass_matrix(0.7, -FRAC_PI_2);
        assert_abs_diff_eq!((m[0][0] - c(0.7, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((m[1][1] - c(0.7, 0.0)).norm(), 0.0, epsilon = 1e-15);
        // k = 1: common mass (−1)^k θ̄.
        let m = mass_matrix(0.7, FRAC_PI_2);
        assert_abs_diff_eq!((m[0][0] - c(-0.7, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((m[1][1] - c(-0.7, 0.0)).norm(), 0.0, epsilon = 1e-15);
        let m = mass_matrix(0.7, 0.0);
        assert_abs_diff_eq!((m[0][0] - c(0.0, -0.7)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((m[1][1] - c(0.0, 0.7)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((m[0][0] - m[1][1].conj()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gamma_matrices_satisfy_clifford_relation() {
        let (g0, g1) = gamma_matrices();
        let eta = [1.0, -1.0];
        let gs = [g0, g1];
        for a in 0..2 {
            for b in 0..2 {
                let ab = mat_mul(&gs[a], &gs[b]);
                let ba = mat_mul(&gs[b], &gs[a]);
                for r in 0..2 {
                    for k in 0..2 {
                        let expected = if a == b && r == k { 2.0 * eta[a] } else { 0.0 };
                        assert_abs_diff_eq!((ab[r][k] + ba[r][k] - c(expected, 0.0)).norm(), 0.0, epsilon = 1e-15);
                    }
                }
            }
        }
    }

    /// Solving the compact form for `∂_T Ψ` must reproduce the null-coordinate
    /// equations: `γ⁰ ∂_T Ψ = −γ¹∂_XΨ + i γ^μ A_μ Ψ − iMΨ`.
    #[test]
    fn compact_form_matches_null_equations() {
        let (g0, g1) = gamma_matrices();
        for &(a0, a1, th, z) in &[(0.3, -0.2, 0.8, 0.4), (-1.0, 0.5, 0.1, -FRAC_PI_2), (0.0, 0.0, 2.0, 3.0)] {
            let m = mass_matrix(th, z);
            // Pointwise part only (∂_X terms checked separately below).
            let mut rhs = [[c(0.0, 0.0); 2]; 2];
            for r in 0..2 {
                for k in 0..2 {
                    rhs[r][k] = I * (g0[r][k] * a0 + g1[r][k] * a1) - I * m[r][k];
                }
            }
            // γ⁰ = γ⁰⁻¹ = σ₁.
            let generator = mat_mul(&g0, &rhs);
            let ours = coupling_matrix(a0, a1, th, z);
            for r in 0..2 {
                for k in 0..2 {
                    assert_abs_diff_eq!((generator[r][k] - ours[r][k]).norm(), 0.0, epsilon = 1e-14);
                }
            }
            // Transport: −γ⁰γ¹ = diag(1, −1), i.e. ∂_T ψ⁻ = +∂_X ψ⁻.
            let t = mat_mul(&g0, &g1);
            assert_abs_diff_eq!((t[0][0] + c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!((t[1][1] - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn coupling_exp_matches_series() {
        let cm = coupling_matrix(0.4, -0.7, 1.3, 0.25);
        let s = 0.37;
        let mut term = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let mut sum = term;
        for n in 1..40 {
            term = mat_mul(&term, &cm);
            for r in 0..2 {
                for k in 0..2 {
                    term[r][k] *= s / n as f64;
                    sum[r][k] += term[r][k];
                }
            }
        }
        let e = coupling_exp(&cm, s);
        for r in 0..2 {
            for k in 0..2 {
                assert_abs_diff_eq!((e[r][k] - sum[r][k]).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    fn packet_field(x_min: f64, dx: f64, n: usize) -> SpinorField {
        SpinorField::sample(x_min, dx, n, 0.0, |x| {
            (c((-(x - 1.0).powi(2)).exp(), 0.2), c(0.5 * (-(x + 1.0).powi(2)).exp(), -0.1 * x))
        })
    }

    #[test]
    fn free_transport_along_characteristics() {
        let dt = 0.01;
        let init = packet_field(-5.0, dt, 1000);
        let out = solve_dirac(&DiracCoefficients::free(), &init, 0.5, dt).unwrap();
        for i in 0..1000 {
            assert_eq!(out.psi_minus[i], init.psi_minus[(i + 50) % 1000]);
            assert_eq!(out.psi_plus[i], init.psi_plus[(i + 1000 - 50) % 1000]);
        }
        assert_abs_diff_eq!(out.time, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_potential_is_a_global_phase() {
        let dt = 0.01;
        let a = 0.8;
        let init = packet_field(-5.0, dt, 1000);
        let coeffs = DiracCoefficients { a0: constant_field(a), ..DiracCoefficients::free() };
        let out = solve_dirac(&coeffs, &init, 1.0, dt).unwrap();
        let phase = Complex64::from_polar(1.0, a);
        for i in 0..1000 {
            assert!((out.psi_minus[i] - phase * init.psi_minus[(i + 100) % 1000]).norm() < 1e-12);
            assert!((out.psi_plus[i] - phase * init.psi_plus[(i + 900) % 1000]).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_characteristic_grid() {
        let init = packet_field(-5.0, 0.02, 500);
        assert!(matches!(
            solve_dirac(&DiracCoefficients::free(), &init, 1.0, 0.01),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn norm_conserved_with_general_coefficients() {
        let dt = 0.005;
        let init = packet_field(-10.0, dt, 4000).normalized();
        let coeffs = DiracCoefficients {
            a0: Arc::new(|t, x| 0.3 * (t + x).sin()),
            a1: Arc::new(|_, x| 0.5 * x.cos()),
            theta_bar: Arc::new(|t, x| 1.0 + 0.5 * (x - t).sin()),
            zeta0: 0.4,
        };
        let out = solve_dirac(&coeffs, &init, 2.0, dt).unwrap();
        assert!((out.l2_norm() - 1.0).abs() < 10.0 * dt * dt * 2.0);
    }

    #[test]
    fn support_spreads_at_most_one_cell_per_step() {
        let dt = 0.01;
        let n = 401;
        let mut init = SpinorField::sample(-2.0, dt, n, 0.0, |_| (c(0.0, 0.0), c(0.0, 0.0)));
        init.psi_minus[200] = c(1.0, 0.0);
        let coeffs = DiracCoefficients { theta_bar: constant_field(1.0), ..DiracCoefficients::free() };
        let out = solve_dirac(&coeffs, &init, 0.3, dt).unwrap();
        for i in 0..n {
            let rho = out.psi_minus[i].norm_sqr() + out.psi_plus[i].norm_sqr();
            if (i as i64 - 200).abs() > 30 {
                assert_eq!(rho, 0.0, "site {i}");
            }
        }
    }

    #[test]
    fn gauge_shift_leaves_densities_unchanged() {
        let dt = 0.01;
        let init = packet_field(-6.0, dt, 1200);
        let base = DiracCoefficients {
            a0: Arc::new(|t, x| 0.2 * (x * t).cos()),
            a1: constant_field(0.1),
            theta_bar: Arc::new(|_, x| 0.5 + 0.1 * x.sin()),
            zeta0: 0.3,
        };
        let a0 = base.a0.clone();
        let shifted = DiracCoefficients { a0: Arc::new(move |t, x| a0(t, x) + 1.7), ..base.clone() };
        let u = solve_dirac(&base, &init, 1.5, dt).unwrap();
        let v = solve_dirac(&shifted, &init, 1.5, dt).unwrap();
        let (ua, ub) = u.densities();
        let (va, vb) = v.densities();
        for i in 0..1200 {
            assert!((ua[i] - va[i]).abs() < 1e-12);
            assert!((ub[i] - vb[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn real_mass_parity_symmetry() {
        let dt = 0.01;
        let n = 1200;
        let x_min = -6.0;
        // symmetric data: ψ⁻(X) = ψ⁺(−X); the grid is symmetric about 0.
        let g = |x: f64| c((-(x - 0.7).powi(2)).exp(), 0.3 * (-(x * x)).exp());
        let mut init = SpinorField::sample(x_min, dt, n, 0.0, |x| (g(x), g(-x)));
        // index i ↔ n − i maps X → −X on this periodic grid
        init.psi_minus[0] = g(x_min);
        init.psi_plus[0] = g(-x_min);
        let coeffs = DiracCoefficients { theta_bar: constant_field(1.0), ..DiracCoefficients::free() };
        let out = solve_dirac(&coeffs, &init, 1.0, dt).unwrap();
        let (a, b) = out.densities();
        for i in 1..n {
            assert!((a[i] - b[n - i]).abs() < 1e-12, "i = {i}");
        }
    }

    #[test]
    fn zero_jet_convergence_is_exact() {
        let jet = JetSpec::new(-FRAC_PI_2);
        let table = convergence_study(
            &jet,
            gaussian_packet(0.0, 0.5, 0.0, 0.6),
            StudyDomain { x_min: -8.0, length: 16.0, refine: 4 },
            1.0,
            &[0.1, 0.05],
        )
        .unwrap();
        assert!(table.rows.iter().all(|r| r.error < 1e-12));
    }

    #[test]
    fn convergence_rejects_bad_inputs() {
        let jet = JetSpec::new(-FRAC_PI_2);
        let dom = StudyDomain { x_min: -8.0, length: 16.0, refine: 4 };
        let init = gaussian_packet(0.0, 0.5, 0.0, 0.6);
        assert!(matches!(convergence_study(&jet, &init, dom, 1.0, &[0.05, 0.1]), Err(Error::Config(_))));
        let odd = StudyDomain { length: 16.03, ..dom };
        assert!(matches!(convergence_study(&jet, &init, odd, 1.0, &[0.1, 0.05]), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn mass_jet_converges_first_order() {
        let jet = JetSpec::new(-FRAC_PI_2).with_theta_bar(constant_field(0.3));
        let table = convergence_study(
            &jet,
            gaussian_packet(0.0, 1.0, 0.0, 0.6),
            StudyDomain { x_min: -10.0, length: 20.0, refine: 8 },
            1.0,
            &[0.1, 0.05, 0.025],
        )
        .unwrap();
        for order in table.orders() {
            assert!(order >= 0.9, "{table:?}");
        }
        let r = table.rows[1].error / table.rows[2].error;
        assert!((r - 2.0).abs() < 0.5, "ratio {r}");
    }
}
