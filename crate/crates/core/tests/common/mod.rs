//! Test-side oracles that share no code with the Prüfer solvers.
#![allow(dead_code)]

use std::f64::consts::PI;

use spectra_core::{make_grid, preset_potential, Potential};

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `diag` and constant off-diagonal `off`, by Sturm sequence.
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let off2 = off * off;
    let mut d = 1.0;
    let mut count = 0;
    for (i, a) in diag.iter().enumerate() {
        d = if i == 0 { a - x } else { a - x - off2 / d };
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th eigenvalue (1-based) of the second-order finite-difference
/// Dirichlet operator `-u'' + q u` on `n` intervals of `(0, pi)`.
pub fn fd_eigenvalue(q: impl Fn(f64) -> f64, n: usize, k: usize) -> f64 {
    let h = PI / n as f64;
    let diag: Vec<f64> = (1..n).map(|i| 2.0 / (h * h) + q(i as f64 * h)).collect();
    let off = -1.0 / (h * h);
    let (mut lo, mut hi) = diag.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), a| {
        (l.min(a - 2.0 / (h * h)), u.max(a + 2.0 / (h * h)))
    });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(&diag, off, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Richardson extrapolation of [`fd_eigenvalue`] from `n` and `2n` intervals.
pub fn fd_eigenvalue_extrapolated(q: &Potential, n: usize, k: usize) -> f64 {
    let coarse = fd_eigenvalue(|x| q.eval(x), n, k);
    let fine = fd_eigenvalue(|x| q.eval(x), 2 * n, k);
    (4.0 * fine - coarse) / 3.0
}

/// Central difference of `f` at 0 with step `eps`.
pub fn central_difference(f: impl Fn(f64) -> f64, eps: f64) -> f64 {
    (f(eps) - f(-eps)) / (2.0 * eps)
}

pub fn standard_potentials() -> Vec<Potential> {
    let g = make_grid(2000).unwrap();
    let mut out = vec![
        preset_potential("zero", &[], g, None).unwrap(),
        preset_potential("cosine", &[2.0], g, None).unwrap(),
    ];
    for seed in [3, 7, 11] {
        out.push(preset_potential("random_fourier", &[5.0, 8.0], g, Some(seed)).unwrap());
    }
    out
}

pub fn describe(q: &Potential) -> String {
    match q.seed() {
        Some(s) => format!("{}(seed {s})", q.label()),
        None => q.label().to_string(),
    }
}
