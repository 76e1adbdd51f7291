//! Forward Sturm–Liouville solver for `-u'' + q(x) u = lambda u` on `(0, pi)`
//! with `u cos(alpha) + u' sin(alpha) = 0` at both ends.
//!
//! Eigenvalues are located through the Prüfer phase
//! `theta' = cos^2(theta) + (lambda - q) sin^2(theta)`, whose terminal value is
//! strictly increasing in `lambda` and equals the `k`-th boundary-compatible
//! phase exactly at `lambda_k`. Index targeting is therefore exact: the `k`-th
//! eigenvalue is the unique root of `theta(pi; lambda) - target(k)`.

use std::f64::consts::PI;

use crate::boundary::BoundaryAngle;
use crate::error::{Result, SpectraError};
use crate::grid::{l2_norm, GridFunction};
use crate::ode::{Control, Dopri5};
use crate::potential::Potential;
use crate::roots::brent;

/// Integrator tolerance for every linear (phase and eigenfunction) solve.
pub const ODE_TOL: f64 = 1e-12;

/// Default absolute eigenvalue tolerance at unit scale.
pub const LAMBDA_TOL: f64 = 1e-10;

/// Phase slack when counting crossings of multiples of `pi`.
const CROSSING_EPS: f64 = 1e-9;

const MAX_EXPANSIONS: usize = 60;

const NODE_FLOOR: f64 = 1e-9;

fn integrator() -> Dopri5 {
    Dopri5 {
        h_max: 0.05,
        ..Dopri5::with_tolerance(ODE_TOL)
    }
}

/// Terminal Prüfer phase for a trial `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTrace {
    pub lambda: f64,
    pub theta_end: f64,
    /// Interior zeros of the corresponding solution.
    pub crossings: usize,
    /// Always `false` for the linear problem.
    pub blowup: bool,
}

/// Number of multiples `m pi` (`m >= 1`) strictly below `theta`.
pub(crate) fn crossings_below(theta: f64) -> usize {
    let t = theta - CROSSING_EPS;
    if t <= PI {
        return 0;
    }
    ((t / PI).ceil() as usize).saturating_sub(1)
}

/// Integrates the Prüfer phase from `theta(0) = (-alpha) mod pi` to `x = pi`.
pub fn prufer_phase(q: &Potential, lambda: f64, alpha: BoundaryAngle) -> Result<PhaseTrace> {
    if !lambda.is_finite() {
        return Err(SpectraError::InvalidArgument(format!("lambda = {lambda}")));
    }
    let out = integrator().integrate(
        |x, y: &[f64; 1]| {
            let (s, c) = y[0].sin_cos();
            [c * c + (lambda - q.eval(x)) * s * s]
        },
        0.0,
        [alpha.initial_phase()],
        PI,
        |_| Control::Continue,
    )?;
    let theta_end = out.y[0];
    Ok(PhaseTrace {
        lambda,
        theta_end,
        crossings: crossings_below(theta_end),
        blowup: false,
    })
}

/// Maps a phase in `[0, pi]` for the ray `(sin t, cos t)` to the scaled
/// phase of the same ray, `tan(phi) = scale tan(t)`.
fn rescale_phase(t: f64, scale: f64) -> f64 {
    let (s, c) = t.sin_cos();
    (scale * s).atan2(c)
}

/// Signed distance of the terminal phase from the `k`-th target.
///
/// Root finding uses the scaled phase `phi' = S cos^2(phi) + (lambda - q) / S sin^2(phi)`
/// with `S^2 ~ lambda - mean(q)`. It crosses the same multiples of `pi` as the
/// plain phase and compares to the target in the same way, but is nearly
/// linear in `x` at large `lambda`.
fn phase_defect(q: &Potential, k: usize, alpha: BoundaryAngle, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(SpectraError::InvalidArgument(format!("lambda = {lambda}")));
    }
    let mean = crate::grid::integrate(q.samples()) / PI;
    let scale = (lambda - mean).max(1.0).sqrt();
    let inv = 1.0 / scale;
    let out = integrator().integrate(
        |x, y: &[f64; 1]| {
            let (s, c) = y[0].sin_cos();
            [scale * c * c + (lambda - q.eval(x)) * inv * s * s]
        },
        0.0,
        [rescale_phase(alpha.initial_phase(), scale)],
        PI,
        |_| Control::Continue,
    )?;
    let beta = alpha.target_phase(1);
    let target = alpha.target_phase(k) - beta + rescale_phase(beta, scale);
    Ok(out.y[0] - target)
}

fn check_index(k: usize) -> Result<()> {
    if k == 0 {
        return Err(SpectraError::InvalidArgument("eigenvalue index k must be >= 1".into()));
    }
    Ok(())
}

fn refine(
    q: &Potential,
    k: usize,
    alpha: BoundaryAngle,
    (lo, f_lo): (f64, f64),
    (hi, f_hi): (f64, f64),
    tol: f64,
) -> Result<f64> {
    let root = brent(|l| phase_defect(q, k, alpha, l), lo, hi, f_lo, f_hi, tol, 200)?;
    Ok(root.x)
}

/// The `k`-th eigenvalue (1-based) to absolute tolerance `tol`.
///
/// The initial bracket `[min q - 1, (k + 2)^2 + max q]` contains every
/// Dirichlet eigenvalue by the constant-shift bounds; it is doubled outward
/// (at most 60 times) for other boundary angles.
pub fn eigenvalue(q: &Potential, k: usize, alpha: BoundaryAngle, tol: f64) -> Result<f64> {
    check_index(k)?;
    if !(tol > 0.0) {
        return Err(SpectraError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut lo = q.min() - 1.0;
    let mut hi = ((k + 2) * (k + 2)) as f64 + q.max();
    let width = hi - lo;
    let mut f_lo = phase_defect(q, k, alpha, lo)?;
    let mut expansions = 0;
    while f_lo >= 0.0 {
        if expansions == MAX_EXPANSIONS {
            return Err(SpectraError::NoBracket { k, lo, hi });
        }
        lo -= width * 2f64.powi(expansions as i32);
        f_lo = phase_defect(q, k, alpha, lo)?;
        expansions += 1;
    }
    let mut f_hi = phase_defect(q, k, alpha, hi)?;
    expansions = 0;
    while f_hi <= 0.0 {
        if expansions == MAX_EXPANSIONS {
            return Err(SpectraError::NoBracket { k, lo, hi });
        }
        hi += width * 2f64.powi(expansions as i32);
        f_hi = phase_defect(q, k, alpha, hi)?;
        expansions += 1;
    }
    refine(q, k, alpha, (lo, f_lo), (hi, f_hi), tol)
}

/// Same as [`eigenvalue`] but brackets outward from a nearby `guess`.
///
/// Used by the optimizer, where successive potentials differ only slightly.
pub fn eigenvalue_near(q: &Potential, k: usize, alpha: BoundaryAngle, guess: f64, tol: f64) -> Result<f64> {
    check_index(k)?;
    if !guess.is_finite() {
        return eigenvalue(q, k, alpha, tol);
    }
    let f0 = phase_defect(q, k, alpha, guess)?;
    if f0 == 0.0 {
        return Ok(guess);
    }
    let dir = if f0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 1e-3 * guess.abs().max(1.0);
    let mut prev = (guess, f0);
    for _ in 0..MAX_EXPANSIONS {
        let l = guess + dir * step;
        let f = phase_defect(q, k, alpha, l)?;
        if f.signum() != f0.signum() {
            let (a, b) = if dir < 0.0 { ((l, f), prev) } else { (prev, (l, f)) };
            return refine(q, k, alpha, a, b, tol);
        }
        prev = (l, f);
        step *= 4.0;
    }
    eigenvalue(q, k, alpha, tol)
}

fn default_tol(scale: f64) -> f64 {
    LAMBDA_TOL * 0.1 * scale.abs().max(1.0)
}

/// An eigenvalue with its `L^2`-normalized eigenfunction.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub k: usize,
    pub lambda: f64,
    pub phi: GridFunction,
    /// Sign changes of `phi` above a relative floor of `1e-9`.
    pub node_count: usize,
    /// `L^2` norm of `-phi'' + (q - lambda) phi` on the interior nodes.
    pub residual: f64,
}

/// Samples the solution of `u'' = (q - lambda) u` started from the boundary
/// ray at one end. From the right end the problem is reflected, `t = pi - x`,
/// so the returned samples are indexed by `t`.
fn one_sided(q: &Potential, lambda: f64, alpha: BoundaryAngle, from_right: bool) -> Result<Vec<f64>> {
    let grid = q.grid();
    let mut values = Vec::with_capacity(grid.len());
    let (u0, du0) = alpha.initial_ray();
    // the right-end ray is the same as the left one; reflection flips u'
    let y0 = if from_right { [u0, -du0] } else { [u0, du0] };
    values.push(y0[0]);
    let mut next = 1;
    integrator().integrate(
        |t, y: &[f64; 2]| {
            let x = if from_right { PI - t } else { t };
            [y[1], (q.eval(x) - lambda) * y[0]]
        },
        0.0,
        y0,
        PI,
        |step| {
            while next <= grid.intervals() && grid.node(next) <= step.x1 {
                values.push(step.eval(grid.node(next))[0]);
                next += 1;
            }
            Control::Continue
        },
    )?;
    debug_assert_eq!(values.len(), grid.len());
    Ok(values)
}

/// Eigenfunction samples from shooting at both ends and matching.
///
/// A single sweep loses the solution wherever it decays in the sweep
/// direction (boundary-localized states). The sweeps are joined at the node
/// where both are largest relative to their own maxima.
pub(crate) fn linear_trajectory(q: &Potential, lambda: f64, alpha: BoundaryAngle) -> Result<Vec<f64>> {
    let left = one_sided(q, lambda, alpha, false)?;
    let mut right = one_sided(q, lambda, alpha, true)?;
    right.reverse();
    let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (pl, pr) = (peak(&left), peak(&right));
    let mut best = (0.0, 0);
    for i in 0..left.len() {
        let w = (left[i].abs() / pl).min(right[i].abs() / pr);
        if w > best.0 {
            best = (w, i);
        }
    }
    let m = best.1;
    if best.0 == 0.0 {
        return Ok(left);
    }
    let ratio = left[m] / right[m];
    Ok(left[..=m]
        .iter()
        .copied()
        .chain(right[m + 1..].iter().map(|v| v * ratio))
        .collect())
}

/// Flips `values` so the first sample above the noise floor is positive.
pub(crate) fn fix_sign(values: &mut [f64]) {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(first) = values.iter().find(|v| v.abs() > 1e-8 * scale) {
        if *first < 0.0 {
            values.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// Fourth-order central second difference at interior node `i` (`2 <= i <= n - 2`).
pub(crate) fn second_difference(u: &[f64], h: f64, i: usize) -> f64 {
    (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2]) / (12.0 * h * h)
}

fn linear_residual(q: &Potential, lambda: f64, phi: &[f64]) -> f64 {
    let grid = q.grid();
    let h = grid.spacing();
    let qv = q.values();
    let sum: f64 = (2..grid.intervals() - 1)
        .map(|i| {
            let r = -second_difference(phi, h, i) + (qv[i] - lambda) * phi[i];
            r * r
        })
        .sum();
    (sum * h).sqrt()
}

fn eigenpair_at(q: &Potential, k: usize, alpha: BoundaryAngle, lambda: f64) -> Result<Eigenpair> {
    let mut values = linear_trajectory(q, lambda, alpha)?;
    fix_sign(&mut values);
    let raw = GridFunction::new(q.grid(), values)?;
    let norm = l2_norm(&raw);
    let phi = raw.scale(1.0 / norm)?;
    let residual = linear_residual(q, lambda, phi.values());
    let node_count = crate::grid::count_sign_changes(phi.values(), NODE_FLOOR);
    Ok(Eigenpair {
        k,
        lambda,
        phi,
        node_count,
        residual,
    })
}

/// The `k`-th eigenpair with unit `L^2` norm and positive sign right of `x = 0`.
pub fn eigenfunction(q: &Potential, k: usize, alpha: BoundaryAngle) -> Result<Eigenpair> {
    let scale = q.max().abs().max(q.min().abs()) + ((k + 2) * (k + 2)) as f64;
    let lambda = eigenvalue(q, k, alpha, default_tol(scale))?;
    eigenpair_at(q, k, alpha, lambda)
}

/// Like [`eigenfunction`], warm-started from a nearby eigenvalue estimate.
pub fn eigenfunction_near(q: &Potential, k: usize, alpha: BoundaryAngle, guess: f64) -> Result<Eigenpair> {
    let lambda = eigenvalue_near(q, k, alpha, guess, default_tol(guess))?;
    eigenpair_at(q, k, alpha, lambda)
}

/// Eigenpairs `1..=k_max` in increasing order.
pub fn spectrum(q: &Potential, alpha: BoundaryAngle, k_max: usize) -> Result<Vec<Eigenpair>> {
    if k_max == 0 {
        return Err(SpectraError::InvalidArgument("k_max must be >= 1".into()));
    }
    (1..=k_max).map(|k| eigenfunction(q, k, alpha)).collect()
}

/// Density of the Fréchet derivative of `lambda_k` at `q`: with `‖phi_k‖ = 1`
/// the directional derivative along `h` is `l2_inner(phi_k^2, h)`.
pub fn eigenvalue_gradient(q: &Potential, k: usize, alpha: BoundaryAngle) -> Result<GridFunction> {
    let pair = eigenfunction(q, k, alpha)?;
    density(&pair)
}

/// `phi^2 / ‖phi‖^2` for an eigenpair.
pub fn density(pair: &Eigenpair) -> Result<GridFunction> {
    let norm2 = l2_norm(&pair.phi).powi(2);
    pair.phi.map(|v| v * v / norm2)
}
