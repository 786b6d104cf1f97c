//! Shared numerical kernels: uniform grids, quadrature, the spatial Fourier
//! transform pair, and tridiagonal solves.
//!
//! Fourier convention: `F̂(K) = (2π)^{-1/2} ∫ F(X) e^{+iKX} dX` and
//! `F(X) = (2π)^{-1/2} ∫ F̂(K) e^{-iKX} dK`, discretised on a periodic grid
//! with `K_j = 2πj/L`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::Zero;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Values the quadrature and tridiagonal kernels operate on.
pub trait Scalar:
    Copy
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
}

impl<T> Scalar for T where
    T: Copy
        + Zero
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<f64, Output = T>
        + Div<f64, Output = T>
        + Send
        + Sync
{
}

/// Uniform grid including both end points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    lower: f64,
    upper: f64,
    count: usize,
}

impl Grid1D {
    pub fn new(lower: f64, upper: f64, count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::InvalidGrid(format!("count must be >= 3, got {count}")));
        }
        if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
            return Err(Error::InvalidGrid(format!(
                "need finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper, count })
    }

    /// Grid symmetric about zero on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, count: usize) -> Result<Self> {
        Self::new(-half_width, half_width, count)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.count - 1) as f64
    }

    /// Measured from the midpoint, so a grid symmetric about zero has
    /// exactly antisymmetric points.
    pub fn point(&self, i: usize) -> f64 {
        if i == 0 {
            return self.lower;
        }
        if i + 1 == self.count {
            return self.upper;
        }
        let mid = 0.5 * (self.lower + self.upper);
        let offset = 2.0 * i as f64 - (self.count - 1) as f64;
        mid + offset * (0.5 * self.spacing())
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.count {
            return Err(Error::Contract(format!(
                "expected {} samples on the grid, got {len}",
                self.count
            )));
        }
        Ok(())
    }
}

/// Pairwise summation; error grows as O(log n) instead of O(n).
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Quadrature weights: composite Simpson for odd counts, trapezoid otherwise.
pub fn quad_weights(grid: &Grid1D) -> Vec<f64> {
    let n = grid.count();
    let h = grid.spacing();
    let mut w = vec![h; n];
    if n % 2 == 1 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i == 0 || i == n - 1 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
    } else {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Integral of `values` sampled on `grid`.
pub fn quad<T: Scalar>(grid: &Grid1D, values: &[T]) -> Result<T> {
    grid.check_len(values.len())?;
    let weights = quad_weights(grid);
    let terms: Vec<T> = values.iter().zip(&weights).map(|(&v, &w)| v * w).collect();
    Ok(pairwise_sum(&terms))
}

/// Running integral. With `from_lower` entry `i` holds `∫_{lower}^{x_i}`,
/// otherwise `∫_{x_i}^{upper}`.
///
/// Uses the same rule as [`quad`] so the complete integral agrees with it:
/// trapezoid panels for even counts, cumulative Simpson for odd counts (odd
/// nodes take a quadratic partial panel).
pub fn cumquad<T: Scalar>(grid: &Grid1D, values: &[T], from_lower: bool) -> Result<Vec<T>> {
    grid.check_len(values.len())?;
    if from_lower {
        Ok(cumulative(values, grid.spacing()))
    } else {
        let reversed: Vec<T> = values.iter().rev().copied().collect();
        let mut out = cumulative(&reversed, grid.spacing());
        out.reverse();
        Ok(out)
    }
}

fn cumulative<T: Scalar>(f: &[T], h: f64) -> Vec<T> {
    let n = f.len();
    let mut out = vec![T::zero(); n];
    if n.is_multiple_of(2) {
        let mut acc = T::zero();
        for i in 1..n {
            acc = acc + (f[i - 1] + f[i]) * (0.5 * h);
            out[i] = acc;
        }
        return out;
    }
    let mut acc = T::zero();
    let mut i = 0;
    while i + 2 < n {
        let (f0, f1, f2) = (f[i], f[i + 1], f[i + 2]);
        out[i + 1] = acc + (f0 * 5.0 + f1 * 8.0 - f2) * (h / 12.0);
        acc = acc + (f0 + f1 * 4.0 + f2) * (h / 3.0);
        out[i + 2] = acc;
        i += 2;
    }
    out
}

/// Periodic grid `X_m = x_min + m·L/M`, `m = 0..M`, with its conjugate
/// wavenumbers `K_j = 2πj/L` stored in FFT order (`0..M/2`, then negative).
#[derive(Clone)]
pub struct PeriodicGrid {
    x_min: f64,
    length: f64,
    count: usize,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("x_min", &self.x_min)
            .field("length", &self.length)
            .field("count", &self.count)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(x_min: f64, length: f64, count: usize) -> Result<Self> {
        if count < 4 || !count.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "periodic grid needs an even count >= 4, got {count}"
            )));
        }
        if !(length.is_finite() && length > 0.0 && x_min.is_finite()) {
            return Err(Error::InvalidGrid(format!("invalid periodic length {length}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            x_min,
            length,
            count,
            forward: planner.plan_fft_forward(count),
            backward: planner.plan_fft_inverse(count),
        })
    }

    /// Grid of length `L` centred on the origin (`x_min = -L/2`).
    pub fn centered(length: f64, count: usize) -> Result<Self> {
        Self::new(-0.5 * length, length, count)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length / self.count as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn x(&self, m: usize) -> f64 {
        self.x_min + m as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.count).map(|m| self.x(m)).collect()
    }

    /// Signed mode index of FFT slot `j`.
    pub fn mode_index(&self, j: usize) -> i64 {
        if j < self.count / 2 {
            j as i64
        } else {
            j as i64 - self.count as i64
        }
    }

    pub fn k(&self, j: usize) -> f64 {
        self.mode_index(j) as f64 * self.dk()
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.k(j)).collect()
    }

    /// FFT slot holding signed mode `index`.
    pub fn slot(&self, index: i64) -> usize {
        index.rem_euclid(self.count as i64) as usize
    }

    /// Largest resolved wavenumber, `π/ΔX`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }

    /// The samples as a closed [`Grid1D`] (first to last point).
    pub fn as_grid1d(&self) -> Grid1D {
        Grid1D {
            lower: self.x_min,
            upper: self.x_min + (self.count - 1) as f64 * self.dx(),
            count: self.count,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.count {
            return Err(Error::GridMismatch(format!(
                "periodic grid has {} points, got {len} samples",
                self.count
            )));
        }
        Ok(())
    }
}

/// `F̂(K_j) = (2π)^{-1/2} Σ_m F(X_m) e^{iK_j X_m} ΔX`.
pub fn dft_forward(grid: &PeriodicGrid, field: &[Complex64]) -> Result<Vec<Complex64>> {
    grid.check_len(field.len())?;
    let mut buf = field.to_vec();
    // e^{+2πijm/M} is rustfft's inverse direction.
    grid.backward.process(&mut buf);
    let scale = grid.dx() / (2.0 * PI).sqrt();
    for (j, v) in buf.iter_mut().enumerate() {
        *v *= Complex64::from_polar(scale, grid.k(j) * grid.x_min);
    }
    Ok(buf)
}

/// `F(X_m) = (2π)^{-1/2} Σ_j F̂(K_j) e^{-iK_j X_m} ΔK`.
pub fn dft_inverse(grid: &PeriodicGrid, modes: &[Complex64]) -> Result<Vec<Complex64>> {
    grid.check_len(modes.len())?;
    let mut buf: Vec<Complex64> = modes
        .iter()
        .enumerate()
        .map(|(j, &v)| v * Complex64::from_polar(1.0, -grid.k(j) * grid.x_min))
        .collect();
    grid.forward.process(&mut buf);
    let scale = grid.dk() / (2.0 * PI).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
    Ok(buf)
}

/// LU factors of a real tridiagonal matrix (Thomas algorithm), reusable
/// across right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    sub: Vec<f64>,
    /// Modified super-diagonal `c'_i`.
    sup_mod: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl TridiagFactor {
    /// `sub[i]` couples row `i + 1` to column `i`; `sup[i]` couples row `i`
    /// to column `i + 1`. Both have length `diag.len() - 1`.
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::Contract("empty tridiagonal system".into()));
        }
        if sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::Contract(format!(
                "off-diagonals must have length {}, got {} and {}",
                n - 1,
                sub.len(),
                sup.len()
            )));
        }
        let mut sup_mod = vec![0.0; n.saturating_sub(1)];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let pivot = if i == 0 {
                diag[0]
            } else {
                diag[i] - sub[i - 1] * prev_c
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { row: i });
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                prev_c = sup[i] * inv_pivot[i];
                sup_mod[i] = prev_c;
            }
        }
        Ok(Self {
            sub: sub.to_vec(),
            sup_mod,
            inv_pivot,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solves in place.
    pub fn solve_in_place<T: Scalar>(&self, rhs: &mut [T]) -> Result<()> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::Contract(format!(
                "right-hand side has length {}, system has {n}",
                rhs.len()
            )));
        }
        rhs[0] = rhs[0] * self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - rhs[i - 1] * self.sub[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - rhs[i + 1] * self.sup_mod[i];
        }
        Ok(())
    }
}

/// One-shot Thomas solve of `A x = rhs`.
pub fn tridiag_solve<T: Scalar>(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[T]) -> Result<Vec<T>> {
    let factor = TridiagFactor::new(sub, diag, sup)?;
    let mut x = rhs.to_vec();
    factor.solve_in_place(&mut x)?;
    Ok(x)
}

/// `y = A x` for the same storage layout as [`TridiagFactor::new`].
pub fn tridiag_apply<T: Scalar>(sub: &[f64], diag: &[f64], sup: &[f64], x: &[T]) -> Vec<T> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut y = x[i] * diag[i];
            if i > 0 {
                y = y + x[i - 1] * sub[i - 1];
            }
            if i + 1 < n {
                y = y + x[i + 1] * sup[i];
            }
            y
        })
        .collect()
}
