//! Discrete-time quantum walks on a periodic 1D lattice with time- and
//! space-dependent U(2) coins, and their realization from a first-order
//! expansion ("jet") of the coin angles in the step parameter ε.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dirac::SpinorField;
use crate::error::{Error, Result};
use crate::kernels::pairwise_sum;

/// Real field of dimensionless `(T, X)`.
pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// 2×2 complex matrix, row-major.
pub type Coin = [[Complex64; 2]; 2];

pub fn zero_field() -> ScalarField {
    Arc::new(|_, _| 0.0)
}

pub fn constant_field(value: f64) -> ScalarField {
    Arc::new(move |_, _| value)
}

/// The four coin angles at one lattice site.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoinAngles {
    pub theta: f64,
    pub xi: f64,
    pub zeta: f64,
    pub alpha: f64,
}

/// `e^{iα} [[e^{iξ} cosθ, e^{iζ} sinθ], [-e^{-iζ} sinθ, e^{-iξ} cosθ]]`.
///
/// Unitary for every real choice of angles; in SU(2) only when `α = pπ`.
pub fn build_coin(angles: &CoinAngles) -> Coin {
    let CoinAngles { theta, xi, zeta, alpha } = *angles;
    let (s, c) = theta.sin_cos();
    [
        [
            Complex64::from_polar(c, alpha + xi),
            Complex64::from_polar(s, alpha + zeta),
        ],
        [
            -Complex64::from_polar(s, alpha - zeta),
            Complex64::from_polar(c, alpha - xi),
        ],
    ]
}

/// Coin angles as a function of step index `j` and site index `m`.
pub trait AngleField: Sync {
    fn angles(&self, j: i64, m: i64) -> CoinAngles;
}

impl<F> AngleField for F
where
    F: Fn(i64, i64) -> CoinAngles + Sync,
{
    fn angles(&self, j: i64, m: i64) -> CoinAngles {
        self(j, m)
    }
}

/// A 1-jet of walks under the scaling `Δt = τε`, `Δx = λε` with all angle
/// exponents equal to one:
///
/// `θ = pπ + εθ̄`, `ξ = εξ̄`, `ζ = ζ₀ + εζ̄`, `α = pπ + εᾱ`.
///
/// `ξ₀ = 0` is structural. `ζ̄` is carried for completeness; it drops out of
/// the continuum equations at leading order.
#[derive(Clone)]
pub struct JetSpec {
    pub p: i64,
    pub zeta0: f64,
    pub theta_bar: ScalarField,
    pub xi_bar: ScalarField,
    pub alpha_bar: ScalarField,
    pub zeta_bar: ScalarField,
    pub tau: f64,
    pub lambda: f64,
}

impl fmt::Debug for JetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpec")
            .field("p", &self.p)
            .field("zeta0", &self.zeta0)
            .field("tau", &self.tau)
            .field("lambda", &self.lambda)
            .finish_non_exhaustive()
    }
}

impl Default for JetSpec {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl JetSpec {
    /// Jet with `p = 0`, the given `ζ₀` and all expansion fields zero.
    pub fn new(zeta0: f64) -> Self {
        Self {
            p: 0,
            zeta0,
            theta_bar: zero_field(),
            xi_bar: zero_field(),
            alpha_bar: zero_field(),
            zeta_bar: zero_field(),
            tau: 1.0,
            lambda: 1.0,
        }
    }

    pub fn with_p(mut self, p: i64) -> Self {
        self.p = p;
        self
    }

    pub fn with_theta_bar(mut self, f: ScalarField) -> Self {
        self.theta_bar = f;
        self
    }

    pub fn with_xi_bar(mut self, f: ScalarField) -> Self {
        self.xi_bar = f;
        self
    }

    pub fn with_alpha_bar(mut self, f: ScalarField) -> Self {
        self.alpha_bar = f;
        self
    }

    pub fn with_zeta_bar(mut self, f: ScalarField) -> Self {
        self.zeta_bar = f;
        self
    }

    pub fn with_scales(mut self, tau: f64, lambda: f64) -> Self {
        self.tau = tau;
        self.lambda = lambda;
        self
    }

    /// Angles of the ε → 0 limit: `(pπ, 0, ζ₀, pπ)`. The coin is the identity.
    pub fn limit_angles(&self) -> CoinAngles {
        let base = self.p as f64 * PI;
        CoinAngles {
            theta: base,
            xi: 0.0,
            zeta: self.zeta0,
            alpha: base,
        }
    }

    /// Angles at dimensionless `(T, X)` for step parameter `epsilon`.
    pub fn angles_at(&self, epsilon: f64, t: f64, x: f64) -> CoinAngles {
        let base = self.p as f64 * PI;
        CoinAngles {
            theta: base + epsilon * (self.theta_bar)(t, x),
            xi: epsilon * (self.xi_bar)(t, x),
            zeta: self.zeta0 + epsilon * (self.zeta_bar)(t, x),
            alpha: base + epsilon * (self.alpha_bar)(t, x),
        }
    }

    /// Largest second difference of the expansion fields over a probe box,
    /// divided by `h²`. A finite result for shrinking `h` is the C² spot
    /// check; non-finite values mean the field is not usable.
    pub fn smoothness_probe(&self, t_range: (f64, f64), x_range: (f64, f64), h: f64) -> f64 {
        let fields = [&self.theta_bar, &self.xi_bar, &self.alpha_bar, &self.zeta_bar];
        let samples = 9;
        let mut worst: f64 = 0.0;
        for a in 0..samples {
            for b in 0..samples {
                let t = t_range.0 + (t_range.1 - t_range.0) * a as f64 / (samples - 1) as f64;
                let x = x_range.0 + (x_range.1 - x_range.0) * b as f64 / (samples - 1) as f64;
                for f in fields {
                    let c = f(t, x);
                    let dtt = (f(t + h, x) - 2.0 * c + f(t - h, x)) / (h * h);
                    let dxx = (f(t, x + h) - 2.0 * c + f(t, x - h)) / (h * h);
                    worst = worst.max(dtt.abs()).max(dxx.abs());
                    if !dtt.is_finite() || !dxx.is_finite() {
                        return f64::INFINITY;
                    }
                }
            }
        }
        worst
    }
}

/// A jet sampled at a fixed ε: site `(j, m)` sits at `T = jε`, `X = mε`.
#[derive(Debug, Clone)]
pub struct JetRealization<'a> {
    jet: &'a JetSpec,
    epsilon: f64,
}

impl JetRealization<'_> {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl AngleField for JetRealization<'_> {
    fn angles(&self, j: i64, m: i64) -> CoinAngles {
        self.jet
            .angles_at(self.epsilon, j as f64 * self.epsilon, m as f64 * self.epsilon)
    }
}

pub fn realize_jet(jet: &JetSpec, epsilon: f64) -> Result<JetRealization<'_>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(JetRealization { jet, epsilon })
}

/// Walk amplitudes on a periodic ring of `M` sites labelled
/// `m = site_offset .. site_offset + M`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub psi_minus: Vec<Complex64>,
    pub psi_plus: Vec<Complex64>,
    pub step_index: i64,
    pub site_offset: i64,
    /// Time step `τε`.
    pub dt: f64,
    /// Lattice spacing `λε`.
    pub dx: f64,
}

impl WalkState {
    pub fn new(
        psi_minus: Vec<Complex64>,
        psi_plus: Vec<Complex64>,
        site_offset: i64,
        dt: f64,
        dx: f64,
    ) -> Result<Self> {
        if psi_minus.len() != psi_plus.len() {
            return Err(Error::Contract(format!(
                "spinor components differ in length: {} vs {}",
                psi_minus.len(),
                psi_plus.len()
            )));
        }
        if psi_minus.len() < 2 {
            return Err(Error::Contract("walk needs at least two sites".into()));
        }
        Ok(Self {
            psi_minus,
            psi_plus,
            step_index: 0,
            site_offset,
            dt,
            dx,
        })
    }

    /// Normalised excitation of a single site in one component.
    pub fn single_site(sites: usize, site_offset: i64, at: i64, plus: bool) -> Result<Self> {
        let mut minus = vec![Complex64::new(0.0, 0.0); sites];
        let mut pluss = minus.clone();
        let idx = usize::try_from(at - site_offset)
            .ok()
            .filter(|&i| i < sites)
            .ok_or_else(|| Error::Contract(format!("site {at} is outside the ring")))?;
        if plus {
            pluss[idx] = Complex64::new(1.0, 0.0);
        } else {
            minus[idx] = Complex64::new(1.0, 0.0);
        }
        Self::new(minus, pluss, site_offset, 1.0, 1.0)
    }

    pub fn sites(&self) -> usize {
        self.psi_minus.len()
    }

    pub fn site_label(&self, i: usize) -> i64 {
        self.site_offset + i as i64
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    /// Indices whose probability exceeds `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        (0..self.sites())
            .filter(|&i| self.psi_minus[i].norm_sqr() + self.psi_plus[i].norm_sqr() > threshold)
            .collect()
    }

    /// The state as a continuum spinor at dimensionless `T = jε`, `X = mε`.
    pub fn to_spinor(&self, epsilon: f64) -> SpinorField {
        SpinorField {
            psi_minus: self.psi_minus.clone(),
            psi_plus: self.psi_plus.clone(),
            x_min: self.site_offset as f64 * epsilon,
            dx: epsilon,
            time: self.step_index as f64 * epsilon,
        }
    }

    /// CSV with columns `j,m,re_minus,im_minus,re_plus,im_plus`.
    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "j,m,re_psi_minus,im_psi_minus,re_psi_plus,im_psi_plus")?;
        }
        for i in 0..self.sites() {
            let (a, b) = (self.psi_minus[i], self.psi_plus[i]);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.step_index,
                self.site_label(i),
                crate::io::fmt_f64(a.re),
                crate::io::fmt_f64(a.im),
                crate::io::fmt_f64(b.re),
                crate::io::fmt_f64(b.im),
            )?;
        }
        Ok(())
    }
}

/// `Σ_m |ψ⁻_m|² + |ψ⁺_m|²`.
pub fn total_probability(state: &WalkState) -> f64 {
    let densities: Vec<f64> = state
        .psi_minus
        .iter()
        .zip(&state.psi_plus)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .collect();
    pairwise_sum(&densities)
}

/// One step: `ψ_{j+1,m} = B(angles_{j,m}) · (ψ⁻_{j,m+1}, ψ⁺_{j,m-1})`.
pub fn step_walk<A: AngleField + ?Sized>(state: &WalkState, field: &A) -> WalkState {
    let n = state.sites();
    let j = state.step_index;
    let (minus, plus): (Vec<Complex64>, Vec<Complex64>) = (0..n)
        .into_par_iter()
        .with_min_len(512)
        .map(|i| {
            let b = build_coin(&field.angles(j, state.site_label(i)));
            let from_right = state.psi_minus[(i + 1) % n];
            let from_left = state.psi_plus[(i + n - 1) % n];
            (
                b[0][0] * from_right + b[0][1] * from_left,
                b[1][0] * from_right + b[1][1] * from_left,
            )
        })
        .unzip();
    WalkState {
        psi_minus: minus,
        psi_plus: plus,
        step_index: j + 1,
        ..*state
    }
}

/// Number of whole steps of size `step` in `t_final`.
pub(crate) fn whole_steps(t_final: f64, step: f64) -> Result<usize> {
    let ratio = t_final / step;
    let n = ratio.round();
    if !(t_final >= 0.0) || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::FractionalSteps { t_final, dt: step });
    }
    Ok(n as usize)
}

/// Runs the walk realised from `jet` at step `epsilon` until dimensionless
/// time `t_final`. The initial spinor must be sampled on the walk lattice
/// (`dx = ε`, `x_min` a multiple of ε).
pub fn run_walk(jet: &JetSpec, epsilon: f64, t_final: f64, initial: &SpinorField) -> Result<WalkState> {
    let field = realize_jet(jet, epsilon)?;
    let steps = whole_steps(t_final, epsilon)?;
    if (initial.dx - epsilon).abs() > 1e-12 * epsilon {
        return Err(Error::DomainMismatch(format!(
            "initial data spacing {} differs from epsilon {epsilon}",
            initial.dx
        )));
    }
    let offset = initial.x_min / epsilon;
    if (offset - offset.round()).abs() > 1e-9 {
        return Err(Error::DomainMismatch(format!(
            "x_min = {} is not a lattice site for epsilon {epsilon}",
            initial.x_min
        )));
    }
    let mut state = WalkState::new(
        initial.psi_minus.clone(),
        initial.psi_plus.clone(),
        offset.round() as i64,
        jet.tau * epsilon,
        jet.lambda * epsilon,
    )?;
    for _ in 0..steps {
        state = step_walk(&state, &field);
    }
    Ok(state)
}
