//! Shooting for the cubic boundary value problem
//! `-u'' + q0(x) u = lambda u + delta u^3` on `(0, pi)` with the separated
//! boundary conditions, `delta = ±1`.
//!
//! Every shot starts on the left boundary ray, `(u, u')(0) = s (sin t0, cos t0)`,
//! so only the right condition remains. Along the trajectory we track the
//! continuous phase `theta = atan2(u, u')`. Exactly as for the linear Prüfer
//! phase, `theta` can only cross multiples of `pi` upward (there `theta' = 1`),
//! so a shot satisfies the right condition with exactly `m` interior zeros iff
//! its terminal phase equals the linear target phase of index `m + 1`. Roots
//! are bracketed and refined on that phase defect; the boundary defect
//! `u cos(alpha) + u' sin(alpha)` at `x = pi` is reported and checked.
//!
//! For `delta = -1` large shots blow up in finite `x`; a shot is stopped once
//! `|u|` reaches [`BLOWUP_CAP`] and its phase at that point is used as its
//! terminal phase, which keeps blow-up shots usable as bracket endpoints.
//! With `delta = +1` the cubic term is restoring and shots never blow up.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::boundary::BoundaryAngle;
use crate::eigen::{eigenvalue, fix_sign, second_difference, LAMBDA_TOL};
use crate::error::{Result, SpectraError};
use crate::grid::{count_sign_changes, l2_norm, GridFunction};
use crate::ode::{Control, Dopri5};
use crate::potential::Potential;
use crate::roots::brent;

/// `|u|` at which a trajectory is declared blown up.
pub const BLOWUP_CAP: f64 = 1e6;

/// Relative noise floor for zero-crossing node counts.
pub const NODE_FLOOR: f64 = 1e-9;

/// Largest accepted terminal boundary defect of a solution.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Minimum `L^2` distance between solutions reported as distinct.
pub const DISTINCT_TOL: f64 = 1e-4;

/// Integrator tolerance for nonlinear shots.
pub const SHOT_ODE_TOL: f64 = 1e-12;

fn check_delta(delta: i8) -> Result<()> {
    if delta != 1 && delta != -1 {
        return Err(SpectraError::InvalidArgument(format!("delta must be +1 or -1, got {delta}")));
    }
    Ok(())
}

/// `n` log-spaced magnitudes in `[lo, hi]` for each sign, in increasing order.
pub fn log_s_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let mags: Vec<f64> = (0..n)
        .map(|j| 10f64.powf(a + (b - a) * j as f64 / (n - 1).max(1) as f64))
        .collect();
    mags.iter().rev().map(|m| -m).chain(mags.iter().copied()).collect()
}

/// 61 log-spaced points per sign with `|s|` in `[1e-4, 1e3]`.
pub fn default_s_grid() -> Vec<f64> {
    log_s_grid(1e-4, 1e3, 61)
}

/// Outcome of one shot from the left boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotResult {
    pub s: f64,
    /// `u(pi) cos(alpha) + u'(pi) sin(alpha)`; signed infinity on blow-up.
    pub terminal_defect: f64,
    /// Unwrapped phase `atan2(u, u')` at `x = pi` (or at the blow-up point).
    pub terminal_phase: f64,
    /// Interior sign changes of the sampled trajectory.
    pub node_count: usize,
    pub blowup: bool,
    pub blowup_x: Option<f64>,
}

struct Trajectory {
    shot: ShotResult,
    samples: Vec<f64>,
}

fn integrate_shot(
    q0: &Potential,
    lambda: f64,
    delta: i8,
    alpha: BoundaryAngle,
    s: f64,
    ode_tol: f64,
) -> Result<Trajectory> {
    let grid = q0.grid();
    let (r0, dr0) = alpha.initial_ray();
    let y0 = [s * r0, s * dr0];
    let d = delta as f64;

    let mut samples = Vec::with_capacity(grid.len());
    samples.push(y0[0]);
    let mut next = 1;
    let mut raw_prev = y0[0].atan2(y0[1]);
    let mut phase = alpha.initial_phase();
    let mut blowup_x = None;

    // absolute tolerance follows the amplitude so tiny shots keep full relative accuracy
    let solver = Dopri5 {
        h_max: 0.05,
        atol: ode_tol * s.abs().min(1.0),
        ..Dopri5::with_tolerance(ode_tol)
    };
    let out = solver.integrate(
        |x, y: &[f64; 2]| [y[1], (q0.eval(x) - lambda) * y[0] - d * y[0] * y[0] * y[0]],
        0.0,
        y0,
        PI,
        |step| {
            while next <= grid.intervals() && grid.node(next) <= step.x1 {
                samples.push(step.eval(grid.node(next))[0]);
                next += 1;
            }
            let raw = step.y1[0].atan2(step.y1[1]);
            let mut delta_phase = raw - raw_prev;
            if delta_phase > PI {
                delta_phase -= 2.0 * PI;
            } else if delta_phase <= -PI {
                delta_phase += 2.0 * PI;
            }
            phase += delta_phase;
            raw_prev = raw;
            if step.y1[0].abs() >= BLOWUP_CAP {
                blowup_x = Some(step.x1);
                Control::Stop
            } else {
                Control::Continue
            }
        },
    )?;

    let [u, du] = out.y;
    let defect = alpha.defect(u, du);
    let blowup = out.stopped;
    let terminal_defect = if blowup {
        f64::INFINITY.copysign(defect)
    } else {
        defect
    };
    let shot = ShotResult {
        s,
        terminal_defect,
        terminal_phase: phase,
        node_count: count_sign_changes(&samples, NODE_FLOOR),
        blowup,
        blowup_x,
    };
    Ok(Trajectory { shot, samples })
}

/// One shot with amplitude `s != 0`.
pub fn shoot(q0: &Potential, lambda: f64, delta: i8, alpha: BoundaryAngle, s: f64) -> Result<ShotResult> {
    check_delta(delta)?;
    if s == 0.0 || !s.is_finite() {
        return Err(SpectraError::InvalidArgument(format!("shooting amplitude must be finite and non-zero, got {s}")));
    }
    Ok(integrate_shot(q0, lambda, delta, alpha, s, SHOT_ODE_TOL)?.shot)
}

/// A boundary-satisfying solution of the cubic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSolution {
    pub u: GridFunction,
    pub delta: i8,
    pub lambda: f64,
    pub node_count: usize,
    /// Canonical-sign amplitude of the initial ray.
    pub shoot_param: f64,
    /// `|u(pi) cos(alpha) + u'(pi) sin(alpha)|`.
    pub residual: f64,
}

impl NonlinearSolution {
    pub fn max_abs(&self) -> f64 {
        self.u.max_abs()
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.u)
    }

    /// Largest pointwise defect of `-u'' + (q0 - lambda) u - delta u^3` over
    /// the interior nodes, with `u''` from a fourth-order difference.
    pub fn ode_defect(&self, q0: &Potential) -> Result<f64> {
        let grid = self.u.grid();
        if grid != q0.grid() {
            return Err(SpectraError::GridMismatch {
                left: grid.intervals(),
                right: q0.grid().intervals(),
            });
        }
        let u = self.u.values();
        let q = q0.values();
        let h = grid.spacing();
        let d = self.delta as f64;
        Ok((2..grid.intervals() - 1)
            .map(|i| (-second_difference(u, h, i) + (q[i] - self.lambda) * u[i] - d * u[i].powi(3)).abs())
            .fold(0.0, f64::max))
    }
}

/// Shooting configuration.
#[derive(Debug, Clone)]
pub struct ShootingOptions {
    /// Amplitudes to scan. Only magnitudes matter for [`find_solution_with`]:
    /// `s` and `-s` give mirror-image trajectories.
    pub s_grid: Vec<f64>,
    pub ode_tol: f64,
    pub residual_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            s_grid: default_s_grid(),
            ode_tol: SHOT_ODE_TOL,
            residual_tol: RESIDUAL_TOL,
        }
    }
}

/// Evidence gathered by an unsuccessful search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NotFound {
    pub lambda: f64,
    pub delta: i8,
    pub k: usize,
    pub s_min: f64,
    pub s_max: f64,
    /// Shots per observed node count.
    pub node_histogram: BTreeMap<usize, usize>,
    /// Amplitudes whose shots could not be integrated.
    pub unresolved: Vec<f64>,
}

/// Solutions with the requested node count, smallest amplitude first.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub primary: NonlinearSolution,
    pub alternates: Vec<NonlinearSolution>,
    pub node_histogram: BTreeMap<usize, usize>,
    pub unresolved: Vec<f64>,
}

impl SolutionSet {
    pub fn all(&self) -> impl Iterator<Item = &NonlinearSolution> {
        std::iter::once(&self.primary).chain(self.alternates.iter())
    }
}

/// Result of [`find_solution`]. Not finding a solution is an outcome, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum Search {
    Found(SolutionSet),
    NotFound(NotFound),
}

impl Search {
    pub fn is_found(&self) -> bool {
        matches!(self, Search::Found(_))
    }

    pub fn solution(&self) -> Option<&NonlinearSolution> {
        match self {
            Search::Found(set) => Some(&set.primary),
            Search::NotFound(_) => None,
        }
    }

    pub fn into_set(self) -> Option<SolutionSet> {
        match self {
            Search::Found(set) => Some(set),
            Search::NotFound(_) => None,
        }
    }

    pub fn node_histogram(&self) -> &BTreeMap<usize, usize> {
        match self {
            Search::Found(set) => &set.node_histogram,
            Search::NotFound(nf) => &nf.node_histogram,
        }
    }
}

/// Shoots at every `s`. Shots the integrator cannot finish (very large
/// amplitudes oscillate too fast for the step budget) are returned separately.
fn shoot_all(
    q0: &Potential,
    lambda: f64,
    delta: i8,
    alpha: BoundaryAngle,
    s_values: &[f64],
    ode_tol: f64,
) -> Result<(Vec<ShotResult>, Vec<f64>)> {
    let mut shots = Vec::with_capacity(s_values.len());
    let mut unresolved = Vec::new();
    for &s in s_values {
        match integrate_shot(q0, lambda, delta, alpha, s, ode_tol) {
            Ok(t) => shots.push(t.shot),
            Err(SpectraError::Integrator { .. }) => unresolved.push(s),
            Err(e) => return Err(e),
        }
    }
    Ok((shots, unresolved))
}

/// Searches for a solution with exactly `k - 1` interior zeros.
pub fn find_solution(q0: &Potential, lambda: f64, delta: i8, k: usize, alpha: BoundaryAngle) -> Result<Search> {
    find_solution_with(q0, lambda, delta, k, alpha, &ShootingOptions::default())
}

/// [`find_solution`] with explicit shooting options.
///
/// Scans the magnitudes of `opts.s_grid`, brackets sign changes of the phase
/// defect `theta(pi; s) - target(k)`, refines each bracket with Brent's
/// method and keeps the roots whose boundary defect is below
/// `opts.residual_tol` and whose sampled trajectory has `k - 1` sign changes.
/// Several roots with the same node count may exist; the smallest `|s|` is
/// the primary solution and the rest are kept as alternates.
pub fn find_solution_with(
    q0: &Potential,
    lambda: f64,
    delta: i8,
    k: usize,
    alpha: BoundaryAngle,
    opts: &ShootingOptions,
) -> Result<Search> {
    check_delta(delta)?;
    if k == 0 {
        return Err(SpectraError::InvalidArgument("node index k must be >= 1".into()));
    }
    let mut mags: Vec<f64> = opts.s_grid.iter().map(|s| s.abs()).filter(|s| *s > 0.0).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    mags.dedup();
    if mags.len() < 2 {
        return Err(SpectraError::InvalidArgument("s grid needs at least two non-zero magnitudes".into()));
    }
    let target = alpha.target_phase(k);
    let (shots, unresolved) = shoot_all(q0, lambda, delta, alpha, &mags, opts.ode_tol)?;
    let mut histogram = BTreeMap::new();
    for shot in &shots {
        *histogram.entry(shot.node_count).or_insert(0) += 1;
    }

    let mut found: Vec<NonlinearSolution> = Vec::new();
    for pair in shots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ga, gb) = (a.terminal_phase - target, b.terminal_phase - target);
        if ga.signum() == gb.signum() && ga != 0.0 {
            continue;
        }
        let root = brent(
            |s| Ok(integrate_shot(q0, lambda, delta, alpha, s, opts.ode_tol)?.shot.terminal_phase - target),
            a.s,
            b.s,
            ga,
            gb,
            1e-15 * b.s,
            200,
        )?;
        let traj = integrate_shot(q0, lambda, delta, alpha, root.x, opts.ode_tol)?;
        let shot = traj.shot;
        if shot.blowup || shot.terminal_defect.abs() > opts.residual_tol || shot.node_count != k - 1 {
            continue;
        }
        let mut samples = traj.samples;
        let flipped = {
            let first = samples[..].to_vec();
            fix_sign(&mut samples);
            first != samples
        };
        let u = GridFunction::new(q0.grid(), samples)?;
        let candidate = NonlinearSolution {
            u,
            delta,
            lambda,
            node_count: shot.node_count,
            shoot_param: if flipped { -shot.s } else { shot.s },
            residual: shot.terminal_defect.abs(),
        };
        let duplicate = found
            .iter()
            .any(|f| f.u.l2_distance(&candidate.u).map(|d| d < DISTINCT_TOL).unwrap_or(false));
        if !duplicate {
            found.push(candidate);
        }
    }

    if found.is_empty() {
        return Ok(Search::NotFound(NotFound {
            lambda,
            delta,
            k,
            s_min: mags[0],
            s_max: mags[mags.len() - 1],
            node_histogram: histogram,
            unresolved,
        }));
    }
    let primary = found.remove(0);
    Ok(Search::Found(SolutionSet {
        primary,
        alternates: found,
        node_histogram: histogram,
        unresolved,
    }))
}

/// Adjacent same-sign shots whose terminal phases straddle the target of a
/// given node count, i.e. an interval of `s` containing a solution with that
/// many interior zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub s_lo: f64,
    pub s_hi: f64,
    pub node_count: usize,
}

/// Exhaustive shooting over an `s` grid, used to probe nonexistence regions.
///
/// A clear report is evidence over a finite grid, not a proof.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub lambda: f64,
    pub delta: i8,
    pub k: usize,
    pub shots: Vec<ShotResult>,
    pub brackets: Vec<Bracket>,
    /// Brackets whose node count the nonexistence statement excludes:
    /// at most `k - 1` zeros for `delta = +1`, at least `k - 1` for `delta = -1`.
    pub forbidden: Vec<Bracket>,
    pub node_histogram: BTreeMap<usize, usize>,
    /// Amplitudes whose shots could not be integrated; brackets span them.
    pub unresolved: Vec<f64>,
}

impl ScanReport {
    pub fn is_clear(&self) -> bool {
        self.forbidden.is_empty()
    }
}

/// Shoots at every `s` in `s_grid` and lists every phase bracket.
pub fn nonexistence_scan(
    q0: &Potential,
    lambda: f64,
    delta: i8,
    k: usize,
    alpha: BoundaryAngle,
    s_grid: &[f64],
) -> Result<ScanReport> {
    check_delta(delta)?;
    if k == 0 {
        return Err(SpectraError::InvalidArgument("node index k must be >= 1".into()));
    }
    let s_values: Vec<f64> = s_grid.iter().copied().filter(|s| *s != 0.0).collect();
    let (shots, unresolved) = shoot_all(q0, lambda, delta, alpha, &s_values, SHOT_ODE_TOL)?;
    let mut histogram = BTreeMap::new();
    for shot in &shots {
        *histogram.entry(shot.node_count).or_insert(0) += 1;
    }
    let mut brackets = Vec::new();
    for pair in shots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.s.signum() != b.s.signum() {
            continue;
        }
        let (lo, hi) = if a.terminal_phase <= b.terminal_phase {
            (a.terminal_phase, b.terminal_phase)
        } else {
            (b.terminal_phase, a.terminal_phase)
        };
        let mut m = 0;
        loop {
            let t = alpha.target_phase(m + 1);
            if t >= hi {
                break;
            }
            if t > lo {
                brackets.push(Bracket {
                    s_lo: a.s.min(b.s),
                    s_hi: a.s.max(b.s),
                    node_count: m,
                });
            }
            m += 1;
        }
    }
    let forbidden = brackets
        .iter()
        .copied()
        .filter(|b| if delta > 0 { b.node_count < k } else { b.node_count + 1 >= k })
        .collect();
    Ok(ScanReport {
        lambda,
        delta,
        k,
        shots,
        brackets,
        forbidden,
        node_histogram: histogram,
        unresolved,
    })
}

/// A solution branch: the sign of the cubic term and the number of interior zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Branch {
    pub delta: i8,
    pub nodes: usize,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "delta={:+} nodes={}", self.delta, self.nodes)
    }
}

/// All solution branches predicted by the nodal theory at a non-eigenvalue `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityReport {
    pub lambda: f64,
    /// Number of eigenvalues of `-d^2 + q0` below `lambda`.
    pub k: usize,
    pub solutions: Vec<NonlinearSolution>,
    /// Predicted branches with no solution found.
    pub gaps: Vec<Branch>,
}

impl MultiplicityReport {
    /// Smallest `L^2` distance between any two returned solutions.
    pub fn min_pairwise_distance(&self) -> Result<f64> {
        let mut best = f64::INFINITY;
        for (i, a) in self.solutions.iter().enumerate() {
            for b in &self.solutions[i + 1..] {
                best = best.min(a.u.l2_distance(&b.u)?);
            }
        }
        Ok(best)
    }
}

/// Solves for every branch at `lambda in (lambda_k, lambda_{k+1})`:
/// `delta = -1` with `0..k` zeros and `delta = +1` with `k..l_max` zeros.
pub fn multiplicity_scan(q0: &Potential, lambda: f64, alpha: BoundaryAngle, l_max: usize) -> Result<MultiplicityReport> {
    if l_max == 0 {
        return Err(SpectraError::InvalidArgument("l_max must be >= 1".into()));
    }
    let mut k = 0;
    loop {
        let ev = eigenvalue(q0, k + 1, alpha, LAMBDA_TOL)?;
        if (ev - lambda).abs() <= 1e-8 {
            return Err(SpectraError::InvalidArgument(format!(
                "lambda = {lambda} coincides with eigenvalue {} = {ev}",
                k + 1
            )));
        }
        if ev > lambda {
            break;
        }
        k += 1;
    }

    let mut solutions = Vec::new();
    let mut gaps = Vec::new();
    let branches = (1..=k).map(|l| (-1i8, l)).chain((k + 1..=l_max).map(|l| (1i8, l)));
    for (delta, l) in branches {
        match find_solution(q0, lambda, delta, l, alpha)? {
            Search::Found(set) => solutions.push(set.primary),
            Search::NotFound(_) => gaps.push(Branch { delta, nodes: l - 1 }),
        }
    }
    Ok(MultiplicityReport {
        lambda,
        k,
        solutions,
        gaps,
    })
}
