//! Short-time heuristic density, generalised Fick law and the diffusion
//! metric `g_Q = 1/h_Q` with `h_Q = I_Q/N_Q²`, `I_Q = −2∫ N_Q J_Q dY`.
//!
//! Sign convention: `J = −(1/√g) ∂_X(N/√g)`, equivalently
//! `(N/2) ∂_X h + h ∂_X N = −J`. This reduces to `J = −χ ∂_X N` in the
//! Galilean limit.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{cumquad, pairwise_sum, quad, Grid1D, PeriodicGrid};
use crate::roup::DensityProfile;

/// Density floor, relative to `max N`, below which `h` is not computed.
pub const DENSITY_FLOOR: f64 = 1e-6;

/// `γ_Q(V) = (1 − V²/Q²)^{−1/2}`.
pub fn velocity_lorentz_factor(v: f64, q: f64) -> f64 {
    1.0 / (1.0 - (v / q).powi(2)).sqrt()
}

/// `(1/(2πT)) γ³ e^{−Q²γ}` with `γ = γ_Q(X/T)`; zero on and outside the
/// light cone.
pub fn heuristic_density(t: f64, x: f64, q: f64) -> f64 {
    if !(t > 0.0) || (x / t).abs() >= q {
        return 0.0;
    }
    let gamma = velocity_lorentz_factor(x / t, q);
    gamma.powi(3) * (-q * q * gamma).exp() / (2.0 * std::f64::consts::PI * t)
}

/// Mass of [`heuristic_density`] over X, `Q K₁(Q²)/π`, independent of T.
pub fn heuristic_mass(q: f64) -> f64 {
    q * bessel_k1(q * q) / std::f64::consts::PI
}

/// [`heuristic_density`] scaled to unit mass. This is the exact free
/// streaming of the Jüttner distribution, `N = F*(γV)·γ³/T`.
pub fn heuristic_density_normalized(t: f64, x: f64, q: f64) -> f64 {
    heuristic_density(t, x, q) / heuristic_mass(q)
}

/// `|X/T|` at the interior maxima. `γ³e^{−Q²γ}` peaks at `γ = 3/Q²`, so
/// `V = Q(1 − Q⁴/9)^{1/2}`; this is `2√2/3` at `Q = 1`.
pub fn heuristic_peak(q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Config(format!("Q must be positive, got {q}")));
    }
    if q > 3f64.sqrt() {
        return Err(Error::NoInteriorPeak(q));
    }
    Ok(q * (1.0 - q.powi(4) / 9.0).sqrt())
}

/// `K₁(x) = ∫₀^∞ e^{−x cosh u} cosh u du`, trapezoid in `u`.
///
/// The integrand is analytic and decays double-exponentially, so the
/// trapezoid rule converges geometrically in the step.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 needs a positive argument");
    let h = 1.0 / 128.0;
    let mut terms = vec![0.5 * (-x).exp()];
    let mut k = 1;
    loop {
        let u = k as f64 * h;
        let c = u.cosh();
        let term = (-x * c).exp() * c;
        terms.push(term);
        if x * c > 745.0 {
            break;
        }
        k += 1;
    }
    pairwise_sum(&terms) * h
}

/// Heuristic density rescaled like `ν_Q`: `QT·N(T, QTξ)`, unit mass.
pub fn heuristic_nu(xi: f64, q: f64) -> f64 {
    // T cancels in the rescaling.
    heuristic_density_normalized(1.0, q * xi, q) * q
}

/// `h_Q`, `g_Q` on the profile's X grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricField {
    pub q: f64,
    pub time: f64,
    pub x: Vec<f64>,
    /// `I_Q = −2∫_{X_min}^X N J dY`.
    pub integral: Vec<f64>,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub valid: Vec<bool>,
}

impl MetricField {
    pub fn xi(&self) -> Vec<f64> {
        let scale = self.q * self.time;
        self.x.iter().map(|x| x / scale).collect()
    }

    /// `g` at `ξ`, linearly interpolated between valid samples; `None`
    /// if `ξ` is not inside the valid region.
    pub fn g_at_xi(&self, xi: f64) -> Option<f64> {
        let xs = self.xi();
        let i = xs.partition_point(|&v| v <= xi);
        if i == 0 || i >= xs.len() || !self.valid[i - 1] || !self.valid[i] {
            return None;
        }
        let w = (xi - xs[i - 1]) / (xs[i] - xs[i - 1]);
        Some(self.g[i - 1] * (1.0 - w) + self.g[i] * w)
    }

    /// Largest relative deviation of `h` from its mean on the valid region.
    pub fn flatness(&self) -> f64 {
        let hv: Vec<f64> = self.h.iter().zip(&self.valid).filter(|(_, v)| **v).map(|(h, _)| *h).collect();
        let mean = pairwise_sum(&hv) / hv.len() as f64;
        hv.iter().map(|h| (h - mean).abs()).fold(0.0, f64::max) / mean
    }

    /// CSV with columns `T,xi,g,h,sqrt_g,valid`; invalid rows carry NaN.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let t = vec![self.time; self.x.len()];
        let xi = self.xi();
        let mask = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&self.valid).map(|(a, ok)| if *ok { *a } else { f64::NAN }).collect()
        };
        let g = mask(&self.g);
        let h = mask(&self.h);
        let sqrt_g: Vec<f64> = g.iter().map(|v| v.sqrt()).collect();
        let valid: Vec<f64> = self.valid.iter().map(|v| if *v { 1.0 } else { 0.0 }).collect();
        crate::io::write_table(out, &["T", "xi", "g", "h", "sqrt_g", "valid"], &[&t, &xi, &g, &h, &sqrt_g, &valid])
    }
}

/// Tolerated negative excursion of `I`, relative to `max |I|`.
const SIGN_TOLERANCE: f64 = 1e-8;

/// `h = I/N²` where `N ≥ 10⁻⁶ max N`. Negative densities are clipped to 0.
pub fn metric_from_density(profile: &DensityProfile) -> Result<MetricField> {
    let grid = profile.grid();
    let n: Vec<f64> = profile.n.iter().map(|v| v.max(0.0)).collect();
    let nj: Vec<f64> = n.iter().zip(&profile.j).map(|(a, b)| -2.0 * a * b).collect();
    let integral = cumquad(&grid, &nj, true)?;
    let n_max = n.iter().copied().fold(0.0, f64::max);
    let i_max = integral.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = DENSITY_FLOOR * n_max;
    let mut h = vec![f64::NAN; n.len()];
    let mut g = vec![f64::NAN; n.len()];
    let mut valid = vec![false; n.len()];
    for m in 0..n.len() {
        if n[m] < floor {
            continue;
        }
        if integral[m] < -SIGN_TOLERANCE * i_max {
            return Err(Error::SignConvention { x: profile.x[m], value: integral[m] });
        }
        let hm = integral[m].max(0.0) / (n[m] * n[m]);
        h[m] = hm;
        g[m] = 1.0 / hm;
        valid[m] = hm > 0.0;
    }
    Ok(MetricField { q: profile.q, time: profile.time, x: profile.x.clone(), integral, h, g, valid })
}

/// `‖(N/2)∂_X h + h∂_X N + J‖₂ / ‖J‖₂` over interior points whose
/// neighbours are valid, centred differences.
pub fn fick_residual(profile: &DensityProfile, metric: &MetricField) -> Result<f64> {
    if profile.x.len() != metric.x.len() {
        return Err(Error::GridMismatch("metric and profile use different grids".into()));
    }
    let dx = profile.dx();
    let n = &profile.n;
    let mut res = Vec::new();
    let mut norm = Vec::new();
    for m in 1..n.len() - 1 {
        if !(metric.valid[m - 1] && metric.valid[m] && metric.valid[m + 1]) {
            continue;
        }
        let dh = (metric.h[m + 1] - metric.h[m - 1]) / (2.0 * dx);
        let dn = (n[m + 1] - n[m - 1]) / (2.0 * dx);
        let r = 0.5 * n[m] * dh + metric.h[m] * dn + profile.j[m];
        res.push(r * r);
        norm.push(profile.j[m] * profile.j[m]);
    }
    if res.is_empty() {
        return Err(Error::Contract("metric has no valid interior points".into()));
    }
    Ok((pairwise_sum(&res) / pairwise_sum(&norm)).sqrt())
}

/// Position variance of the Galilean OU process started at the origin with
/// thermal momentum: `s(T) = 2(T − 1 + e^{−T})`.
pub fn galilean_variance(t: f64) -> f64 {
    // Series near 0 avoids cancellation: s = T² − T³/3 + T⁴/12 − ...
    if t < 1e-3 {
        return t * t * (1.0 - t / 3.0 + t * t / 12.0 - t.powi(3) / 60.0);
    }
    2.0 * (t - 1.0 + (-t).exp())
}

/// `χ(T) = s′(T)/2 = 1 − e^{−T}`.
pub fn galilean_chi(t: f64) -> f64 {
    -(-t).exp_m1()
}

/// Gaussian density and current `J = −χ ∂_X N` of the Galilean limit.
pub fn galilean_ou_profile(t: f64, grid: &PeriodicGrid) -> Result<DensityProfile> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let s = galilean_variance(t);
    let chi = galilean_chi(t);
    let x = grid.xs();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s).sqrt();
    let n: Vec<f64> = x.iter().map(|x| norm * (-x * x / (2.0 * s)).exp()).collect();
    let j: Vec<f64> = x.iter().zip(&n).map(|(x, n)| chi * x / s * n).collect();
    Ok(DensityProfile { q: f64::INFINITY, time: t, x, n, j })
}

/// `∫|a − b|` on a shared grid.
pub fn l1_distance(grid: &Grid1D, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(a, b)| (a - b).abs()).collect();
    quad(grid, &d)
}

/// Current at a density maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakCurrent {
    pub x: f64,
    pub n: f64,
    pub j: f64,
}

/// Whether `J = −D ∂_X N` with finite D is compatible with the profile:
/// at a maximum of N the gradient vanishes, so J must vanish too.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleFickReport {
    pub q: f64,
    pub time: f64,
    pub peaks: Vec<PeakCurrent>,
    pub max_abs_j: f64,
    /// `max |J(peak)| / max |J|`.
    pub ratio: f64,
    pub threshold: f64,
    pub rejected: bool,
}

pub const SIMPLE_FICK_THRESHOLD: f64 = 1e-3;

/// Minimum prominence of a density maximum, relative to `max N`. Grid-scale
/// ringing from the truncated Fourier series stays well below this.
pub const PEAK_PROMINENCE: f64 = 1e-3;

/// Local maxima of N inside the light cone whose topographic prominence
/// exceeds [`PEAK_PROMINENCE`] of the global maximum.
pub fn density_maxima(profile: &DensityProfile) -> Vec<usize> {
    let n = &profile.n;
    let len = n.len();
    let threshold = PEAK_PROMINENCE * profile.max_density();
    let cone = profile.q * profile.time;
    (1..len - 1)
        .filter(|&m| profile.x[m].abs() < cone)
        .filter(|&m| n[m] >= n[m - 1] && n[m] > n[m + 1])
        .filter(|&m| {
            // lowest point on the way to higher ground on each side
            let mut left = n[m];
            let mut i = m;
            while i > 0 && n[i - 1] <= n[m] {
                i -= 1;
                left = left.min(n[i]);
            }
            let left_base = if i == 0 { left.min(n[0]) } else { left };
            let mut right = n[m];
            let mut k = m;
            while k + 1 < len && n[k + 1] <= n[m] {
                k += 1;
                right = right.min(n[k]);
            }
            n[m] - left_base.max(right) >= threshold
        })
        .collect()
}

pub fn simple_fick_rejection(profile: &DensityProfile) -> SimpleFickReport {
    let max_abs_j = profile.j.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let peaks: Vec<PeakCurrent> = density_maxima(profile)
        .into_iter()
        .map(|m| PeakCurrent { x: profile.x[m], n: profile.n[m], j: profile.j[m] })
        .collect();
    let worst = peaks.iter().map(|p| p.j.abs()).fold(0.0, f64::max);
    let ratio = if max_abs_j > 0.0 { worst / max_abs_j } else { 0.0 };
    SimpleFickReport {
        q: profile.q,
        time: profile.time,
        peaks,
        max_abs_j,
        ratio,
        threshold: SIMPLE_FICK_THRESHOLD,
        rejected: ratio > SIMPLE_FICK_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn heuristic_at_origin_and_parity() {
        for (t, q) in [(0.5, 1.0f64), (2.0, 1.3)] {
            let expect = (-q * q).exp() / (2.0 * std::f64::consts::PI * t);
            assert_abs_diff_eq!(heuristic_density(t, 0.0, q), expect, epsilon = 1e-15);
            for x in [0.1, 0.3, 0.45] {
                assert_eq!(heuristic_density(t, x, q), heuristic_density(t, -x, q));
            }
        }
        assert_eq!(heuristic_density(1.0, 1.0, 1.0), 0.0);
        assert_eq!(heuristic_density(1.0, 3.0, 1.0), 0.0);
    }

    #[test]
    fn heuristic_peak_values() {
        assert_abs_diff_eq!(heuristic_peak(1.0).unwrap(), 0.9428, epsilon = 1e-4);
        // not linear in Q away from Q = 1
        assert_abs_diff_eq!(heuristic_peak(0.5).unwrap(), 0.5 * (1.0 - 0.0625f64 / 9.0).sqrt(), epsilon = 1e-15);
        assert!(heuristic_peak(3f64.sqrt()).unwrap().abs() < 1e-7);
        assert!(matches!(heuristic_peak(2.0), Err(Error::NoInteriorPeak(_))));
    }

    #[test]
    fn heuristic_peak_matches_grid_search() {
        for q in [0.5, 1.0, 1.5] {
            let n = 200_001;
            let h = q / n as f64;
            let (best, _) = (1..n)
                .map(|i| i as f64 * h)
                .map(|v| (v, heuristic_density(1.0, v, q)))
                .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            assert!((best - heuristic_peak(q).unwrap()).abs() <= h, "Q = {q}");
        }
    }

    #[test]
    fn heuristic_light_cone_decay() {
        let peak = heuristic_density(1.0, heuristic_peak(1.0).unwrap(), 1.0);
        assert!(heuristic_density(1.0, 0.9995, 1.0) < 1e-6 * peak);
        // γ = 22.4 at 0.999: the ratio is about 1.6e-6.
        let r = heuristic_density(1.0, 0.999, 1.0) / peak;
        assert!(r > 1e-6 && r < 2e-6, "{r:e}");
    }

    #[test]
    fn bessel_values() {
        assert_abs_diff_eq!(bessel_k1(1.0), 0.601_907_230_197_234_6, epsilon = 1e-13);
        // K₁(2) = 0.13986588181652246, K₁(0.25) = 3.747025974440712
        assert_abs_diff_eq!(bessel_k1(2.0), 0.139_865_881_816_522_46, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_k1(0.25), 3.747_025_974_440_712, epsilon = 1e-12);
    }

    #[test]
    fn heuristic_mass_matches_quadrature() {
        for q in [0.8, 1.0, 1.4] {
            let g = Grid1D::new(-q, q, 400_001).unwrap();
            let v: Vec<f64> = g.points().iter().map(|&x| heuristic_density_normalized(1.0, x, q)).collect();
            assert_abs_diff_eq!(quad(&g, &v).unwrap(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn galilean_variance_limits() {
        assert_abs_diff_eq!(galilean_variance(1e-4), 1e-8 * (1.0 - 1e-4 / 3.0 + 1e-8 / 12.0), epsilon = 1e-20);
        assert_abs_diff_eq!(galilean_variance(2e-3), 2.0 * (2e-3 - 1.0 + (-2e-3f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(galilean_variance(50.0) / 100.0, 0.98, epsilon = 1e-12);
        assert_abs_diff_eq!(galilean_chi(1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn galilean_profile_properties() {
        let grid = PeriodicGrid::centered(60.0, 1024).unwrap();
        let p = galilean_ou_profile(4.0, &grid).unwrap();
        assert_abs_diff_eq!(p.mass(), 1.0, epsilon = 1e-10);
        let centre = grid.count() / 2;
        assert_eq!(p.x[centre], 0.0);
        assert_eq!(p.j[centre], 0.0);
        assert!(galilean_ou_profile(0.0, &grid).is_err());
    }

    #[test]
    fn galilean_metric_is_flat() {
        for t in [0.5, 2.0, 10.0] {
            let grid = PeriodicGrid::centered(20.0 * galilean_variance(t).sqrt(), 2048).unwrap();
            let p = galilean_ou_profile(t, &grid).unwrap();
            let m = metric_from_density(&p).unwrap();
            assert!(m.flatness() < 1e-2, "T = {t}: {}", m.flatness());
            let centre = grid.count() / 2;
            assert_abs_diff_eq!(m.h[centre], galilean_chi(t), epsilon = 1e-2 * galilean_chi(t));
        }
    }

    #[test]
    fn metric_identity_holds() {
        let grid = PeriodicGrid::centered(40.0, 2048).unwrap();
        let p = galilean_ou_profile(3.0, &grid).unwrap();
        let m = metric_from_density(&p).unwrap();
        // d/dX(N²h) = −2NJ, checked by centred differences.
        let dx = p.dx();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 1..p.x.len() - 1 {
            if !(m.valid[k - 1] && m.valid[k + 1]) {
                continue;
            }
            let lhs = (p.n[k + 1].powi(2) * m.h[k + 1] - p.n[k - 1].powi(2) * m.h[k - 1]) / (2.0 * dx);
            let rhs = -2.0 * p.n[k] * p.j[k];
            worst = worst.max((lhs - rhs).abs());
            scale = scale.max(rhs.abs());
        }
        assert!(worst < 1e-3 * scale, "{worst:e} vs {scale:e}");
        assert!(fick_residual(&p, &m).unwrap() < 1e-3);
    }

    #[test]
    fn metric_rejects_wrong_sign() {
        let grid = PeriodicGrid::centered(40.0, 512).unwrap();
        let mut p = galilean_ou_profile(3.0, &grid).unwrap();
        p.j.iter_mut().for_each(|j| *j = -*j);
        assert!(matches!(metric_from_density(&p), Err(Error::SignConvention { .. })));
    }

    #[test]
    fn simple_fick_not_rejected_for_gaussian() {
        let grid = PeriodicGrid::centered(40.0, 512).unwrap();
        let p = galilean_ou_profile(3.0, &grid).unwrap();
        let r = simple_fick_rejection(&p);
        assert_eq!(r.peaks.len(), 1);
        assert_eq!(r.peaks[0].x, 0.0);
        assert_eq!(r.peaks[0].j, 0.0);
        assert!(!r.rejected);
    }

    #[test]
    fn simple_fick_rejected_for_two_humps() {
        let grid = PeriodicGrid::centered(8.0, 512).unwrap();
        let x = grid.xs();
        let bump = |c: f64| x.iter().map(move |x| (-(x - c).powi(2) * 4.0).exp()).collect::<Vec<f64>>();
        let (a, b) = (bump(1.0), bump(-1.0));
        let n: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + b).collect();
        // outward flow that does not vanish at the humps
        let j: Vec<f64> = x.iter().zip(&n).map(|(x, n)| x * n).collect();
        let p = DensityProfile { q: 1.0, time: 2.0, x, n, j };
        let r = simple_fick_rejection(&p);
        assert_eq!(r.peaks.len(), 2);
        assert!(r.rejected);
    }
}
