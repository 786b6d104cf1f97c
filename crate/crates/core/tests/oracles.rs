//! Library routines against independent reference computations.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use relwalk::fick::{galilean_chi, galilean_variance};
use relwalk::kernels::{dft_forward, tridiag_solve, PeriodicGrid};
use relwalk::qwalk::{build_coin, step_walk, total_probability, CoinAngles, WalkState};

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

proptest! {
    #[test]
    fn tridiagonal_matches_dense(
        n in 2usize..40,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || rand::Rng::gen_range(&mut rng, -1.0..1.0);
        let sub: Vec<f64> = (0..n - 1).map(|_| u()).collect();
        let sup: Vec<f64> = (0..n - 1).map(|_| u()).collect();
        let diag: Vec<f64> = (0..n).map(|_| 3.0 + u()).collect();
        let rhs: Vec<f64> = (0..n).map(|_| u()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = diag[i];
            if i + 1 < n {
                dense[i][i + 1] = sup[i];
                dense[i + 1][i] = sub[i];
            }
        }
        let x = tridiag_solve(&sub, &diag, &sup, &rhs).unwrap();
        let y = dense_solve(dense, rhs);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coin_is_unitary(theta in -7.0f64..7.0, xi in -7.0f64..7.0, zeta in -7.0f64..7.0, alpha in -7.0f64..7.0) {
        let b = build_coin(&CoinAngles { theta, xi, zeta, alpha });
        for i in 0..2 {
            for j in 0..2 {
                let s = b[0][i].conj() * b[0][j] + b[1][i].conj() * b[1][j];
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((s - expect).norm() < 1e-14);
            }
        }
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        prop_assert!((det - Complex64::from_polar(1.0, 2.0 * alpha)).norm() < 1e-14);
    }

    #[test]
    fn walk_conserves_probability(sites in 2usize..24, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex64::new(rand::Rng::gen_range(&mut rng, -1.0..1.0), rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let minus: Vec<Complex64> = (0..sites).map(|_| c()).collect();
        let plus: Vec<Complex64> = (0..sites).map(|_| c()).collect();
        let mut state = WalkState::new(minus, plus, -3, 1.0, 1.0).unwrap();
        let field = |j: i64, m: i64| CoinAngles {
            theta: 0.3 * j as f64 + 0.7 * m as f64,
            xi: (j * m) as f64,
            zeta: 0.1 * m as f64,
            alpha: 0.5,
        };
        let p0 = total_probability(&state);
        for _ in 0..50 {
            state = step_walk(&state, &field);
        }
        prop_assert!((total_probability(&state) - p0).abs() < 1e-12 * p0);
    }
}

#[test]
fn dft_matches_direct_sum() {
    let grid = PeriodicGrid::new(-2.5, 7.0, 24).unwrap();
    let field: Vec<Complex64> = (0..24).map(|m| Complex64::new((m as f64).sin(), (0.3 * m as f64).cos())).collect();
    let fast = dft_forward(&grid, &field).unwrap();
    let dx = 7.0 / 24.0;
    for j in 0..24 {
        let k = grid.k(j);
        let direct: Complex64 = (0..24)
            .map(|m| field[m] * Complex64::from_polar(dx / (2.0 * PI).sqrt(), k * (-2.5 + m as f64 * dx)))
            .sum();
        assert!((fast[j] - direct).norm() < 1e-12, "mode {j}");
    }
}

/// Stationary OU velocity `dV = −V dT + √2 dW` driving `dX = V dT`.
#[test]
fn galilean_moments_match_monte_carlo() {
    const PATHS: usize = 200_000;
    const H: f64 = 1e-2;
    let t_final = 2.0;
    let steps = (t_final / H) as usize;
    let decay = (-H).exp();
    let kick = (1.0 - decay * decay).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut sxx, mut sxv) = (0.0, 0.0);
    for _ in 0..PATHS {
        let mut v: f64 = StandardNormal.sample(&mut rng);
        let mut x = 0.0;
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v_next = decay * v + kick * z;
            x += 0.5 * H * (v + v_next);
            v = v_next;
        }
        sxx += x * x;
        sxv += x * v;
    }
    let var = sxx / PATHS as f64;
    let cov = sxv / PATHS as f64;
    // sampling error ~ √2·s/√N ≈ 5e-3 here; the time discretisation adds O(H²)
    assert!((var - galilean_variance(t_final)).abs() < 0.02, "var {var} vs {}", galilean_variance(t_final));
    assert!((cov - galilean_chi(t_final)).abs() < 0.01, "cov {cov} vs {}", galilean_chi(t_final));
}
