//! The one-parameter inverse optimization spectral problem: given `q0`, `k`
//! and a target `lambda_star`, find the potential `q_hat` closest to `q0` in
//! `L^2` whose `k`-th eigenvalue is `lambda_star`.
//!
//! Two independent routes are provided:
//!
//! * [`solve_explicit`] solves the cubic problem
//!   `-u'' + q0 u = lambda_star u + delta u^3` for its `(k - 1)`-node solution
//!   and sets `q_hat = q0 - delta u^2`, with `delta = +1` below `lambda_k(q0)`
//!   and `delta = -1` above it.
//! * [`solve_direct`] minimizes `‖q - q0‖^2` subject to `lambda_k(q) = lambda_star`
//!   over grid-sampled potentials with an augmented Lagrangian, using the
//!   eigenvalue gradient `phi_k(q)^2` for the constraint.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::BoundaryAngle;
use crate::eigen::{density, eigenfunction, eigenfunction_near, Eigenpair, LAMBDA_TOL};
use crate::error::{Result, SpectraError};
use crate::grid::{l2_inner, l2_norm, GridFunction};
use crate::nonlinear::{find_solution, Search, NODE_FLOOR};
use crate::potential::Potential;

/// Below this gap `|lambda_star - lambda_k(q0)|` the problem is trivial.
pub const TRIVIAL_GAP: f64 = 1e-10;

/// Constraint defect required of the direct route.
pub const CONSTRAINT_TOL: f64 = 1e-8;

/// Constraint defects below this are removed by Newton steps along `phi_k^2`
/// once the projected gradient is small.
const RESTORE_WINDOW: f64 = 1e-5;

/// Backtracking gives up after this many halvings; below that the decrease
/// test is dominated by eigenvalue round-off.
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Explicit,
    Direct,
}

/// A solution of the inverse problem from either route.
#[derive(Debug, Clone)]
pub struct InverseResult {
    pub q_hat: Potential,
    pub k: usize,
    pub lambda_star: f64,
    /// `‖q0 - q_hat‖^2`.
    pub distance: f64,
    /// `+1`, `-1`, or `0` in the trivial case.
    pub delta: i8,
    /// Multiplier in `q_hat = q0 - nu phi_k(q_hat)^2`.
    pub nu: f64,
    /// `|nu|^(1/2) phi_k(q_hat)`, absent in the trivial case.
    pub u_hat: Option<GridFunction>,
    pub route: Route,
    pub converged: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl InverseResult {
    fn trivial(q0: &Potential, k: usize, lambda_star: f64, route: Route) -> Self {
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("constraint_defect".to_string(), 0.0);
        InverseResult {
            q_hat: Potential::new(q0.samples().clone(), "q_hat").with_seed(q0.seed()),
            k,
            lambda_star,
            distance: 0.0,
            delta: 0,
            nu: 0.0,
            u_hat: None,
            route,
            converged: true,
            diagnostics,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.delta == 0
    }
}

/// `Q(q) = ‖q0 - q‖^2`.
pub fn objective(q0: &Potential, q: &Potential) -> Result<f64> {
    Ok(q0.samples().l2_distance(q.samples())?.powi(2))
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(SpectraError::InvalidArgument("eigenvalue index k must be >= 1".into()));
    }
    Ok(())
}

/// Builds `q_hat` from the nonlinear solution with `k - 1` zeros.
///
/// When several such solutions are found the one giving the smallest
/// distance is returned; the count is recorded as `candidates`.
pub fn solve_explicit(q0: &Potential, k: usize, lambda_star: f64, alpha: BoundaryAngle) -> Result<InverseResult> {
    check_k(k)?;
    let base = eigenfunction(q0, k, alpha)?.lambda;
    if (lambda_star - base).abs() <= TRIVIAL_GAP {
        return Ok(InverseResult::trivial(q0, k, lambda_star, Route::Explicit));
    }
    let delta: i8 = if lambda_star < base { 1 } else { -1 };
    let set = match find_solution(q0, lambda_star, delta, k, alpha)? {
        Search::Found(set) => set,
        Search::NotFound(_) => {
            return Err(SpectraError::NoNonlinearSolution {
                lambda: lambda_star,
                delta,
                nodes: k - 1,
            })
        }
    };

    let d = delta as f64;
    let mut best: Option<(f64, GridFunction, GridFunction, f64)> = None;
    let mut candidates = 0;
    for sol in set.all() {
        candidates += 1;
        let q_hat = q0.samples().zip_with(&sol.u, |q, u| q - d * u * u)?;
        let dist = q0.samples().l2_distance(&q_hat)?.powi(2);
        if best.as_ref().is_none_or(|b| dist < b.0) {
            best = Some((dist, q_hat, sol.u.clone(), sol.residual));
        }
    }
    let (distance, q_hat, u_hat, bc_residual) = best.expect("at least one solution");

    let q_hat = Potential::new(q_hat, "q_hat");
    let check = eigenfunction_near(&q_hat, k, alpha, lambda_star)?;
    let formula_defect = q_hat
        .values()
        .iter()
        .zip(q0.values())
        .zip(u_hat.values())
        .map(|((qh, q), u)| (qh - q + d * u * u).abs())
        .fold(0.0, f64::max);
    let nu = d * l2_norm(&u_hat).powi(2);

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("eigenvalue_defect".to_string(), (check.lambda - lambda_star).abs());
    diagnostics.insert("formula_defect".to_string(), formula_defect);
    diagnostics.insert("bc_residual".to_string(), bc_residual);
    diagnostics.insert("u_hat_nodes".to_string(), u_hat.sign_changes(NODE_FLOOR) as f64);
    diagnostics.insert("candidates".to_string(), candidates as f64);
    diagnostics.insert("lambda_k_q0".to_string(), base);

    Ok(InverseResult {
        q_hat,
        k,
        lambda_star,
        distance,
        delta,
        nu,
        u_hat: Some(u_hat),
        route: Route::Explicit,
        converged: true,
        diagnostics,
    })
}

/// Inner step-size rule for the direct route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Constant step `t / (1 + rho ‖phi_k^2‖^2 / 2)`, i.e. `t` in units of the
    /// current penalty curvature.
    Fixed(f64),
    /// Barzilai–Borwein trial step with nonmonotone Armijo backtracking.
    Backtracking,
}

/// Augmented Lagrangian settings for [`solve_direct`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerOptions {
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub max_outer: usize,
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub max_inner: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            penalty_init: 10.0,
            penalty_growth: 10.0,
            max_outer: 8,
            grad_tol: 1e-6,
            step_rule: StepRule::Backtracking,
            max_inner: 2000,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SpectraError::InvalidArgument(m.to_string()));
        if !(self.penalty_init > 0.0) {
            return bad("penalty_init must be positive");
        }
        if !(self.penalty_growth > 1.0) {
            return bad("penalty_growth must exceed 1");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration limits must be positive");
        }
        if let StepRule::Fixed(t) = self.step_rule {
            if !(t > 0.0) {
                return bad("fixed step must be positive");
            }
        }
        Ok(())
    }
}

/// Objective, constraint and gradients at one iterate.
struct Evaluation {
    q: GridFunction,
    pair: Eigenpair,
    /// `phi_k^2`
    dens: GridFunction,
    /// `lambda_k(q) - lambda_star`
    c: f64,
    /// `‖q - q0‖^2`
    obj: f64,
}

struct Problem<'a> {
    q0: &'a Potential,
    k: usize,
    lambda_star: f64,
    alpha: BoundaryAngle,
    evals: usize,
}

impl Problem<'_> {
    fn eval(&mut self, q: GridFunction, guess: f64) -> Result<Evaluation> {
        self.evals += 1;
        let pot = Potential::new(q.clone(), "q");
        let pair = eigenfunction_near(&pot, self.k, self.alpha, guess)?;
        let dens = density(&pair)?;
        let c = pair.lambda - self.lambda_star;
        let obj = self.q0.samples().l2_distance(&q)?.powi(2);
        Ok(Evaluation { q, pair, dens, c, obj })
    }
}

fn lagrangian(e: &Evaluation, mu: f64, rho: f64) -> f64 {
    e.obj - mu * e.c + 0.5 * rho * e.c * e.c
}

fn lagrangian_gradient(q0: &Potential, e: &Evaluation, mu: f64, rho: f64) -> Result<GridFunction> {
    let w = -mu + rho * e.c;
    let diff = e.q.sub(q0.samples())?;
    diff.zip_with(&e.dens, |d, p| 2.0 * d + w * p)
}

/// `2 (q - q0)` with its component along `phi_k^2` removed.
fn projected_gradient(q0: &Potential, e: &Evaluation) -> Result<GridFunction> {
    let g = e.q.sub(q0.samples())?.scale(2.0)?;
    let coef = l2_inner(&g, &e.dens)? / l2_inner(&e.dens, &e.dens)?;
    g.zip_with(&e.dens, |a, b| a - coef * b)
}

fn axpy(x: &GridFunction, t: f64, d: &GridFunction) -> Result<GridFunction> {
    x.zip_with(d, |a, b| a + t * b)
}

/// Minimizes `‖q - q0‖^2` subject to `lambda_k(q) = lambda_star` directly.
///
/// Outer loop: multiplier update `mu <- mu - rho c`, with the penalty `rho`
/// multiplied by `penalty_growth` whenever the constraint defect fails to
/// shrink by a factor of ten. Inner loop: gradient descent on the augmented
/// Lagrangian. Small residual constraint defects are removed by Newton steps
/// along `phi_k^2` before the convergence test. Converged when `|c| <= 1e-8` and the projected gradient of the
/// objective is below `grad_tol`; otherwise the last iterate is returned with
/// `converged = false`.
pub fn solve_direct(
    q0: &Potential,
    k: usize,
    lambda_star: f64,
    alpha: BoundaryAngle,
    opts: &OptimizerOptions,
) -> Result<InverseResult> {
    check_k(k)?;
    opts.validate()?;
    let mut prob = Problem {
        q0,
        k,
        lambda_star,
        alpha,
        evals: 0,
    };
    let start = eigenfunction(q0, k, alpha)?;
    if (start.lambda - lambda_star).abs() <= TRIVIAL_GAP {
        return Ok(InverseResult::trivial(q0, k, lambda_star, Route::Direct));
    }

    let mut cur = prob.eval(q0.samples().clone(), start.lambda)?;
    let mut mu = 0.0;
    let mut rho = opts.penalty_init;
    let mut outer = 0;
    let mut inner_total = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;

    while outer < opts.max_outer {
        outer += 1;
        let c_before = cur.c;
        let mut history: VecDeque<f64> = VecDeque::with_capacity(5);
        let mut grad = lagrangian_gradient(q0, &cur, mu, rho)?;
        let mut prev: Option<(GridFunction, GridFunction)> = None;
        let mut step = 1.0 / (2.0 + rho * l2_inner(&cur.dens, &cur.dens)?);

        for _ in 0..opts.max_inner {
            let gnorm = l2_norm(&grad);
            if gnorm <= 0.5 * opts.grad_tol {
                break;
            }
            inner_total += 1;
            let value = lagrangian(&cur, mu, rho);
            if history.len() == 5 {
                history.pop_front();
            }
            history.push_back(value);
            let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);

            let next = match opts.step_rule {
                StepRule::Fixed(t) => {
                    let t = t / (1.0 + 0.5 * rho * l2_inner(&cur.dens, &cur.dens)?);
                    prob.eval(axpy(&cur.q, -t, &grad)?, cur.pair.lambda)?
                }
                StepRule::Backtracking => {
                    if let Some((dq, dg)) = &prev {
                        let sy = l2_inner(dq, dg)?;
                        if sy > 0.0 {
                            step = (l2_inner(dq, dq)? / sy).clamp(1e-6, 1e3);
                        }
                    }
                    let mut trial_step = step;
                    let mut accepted = None;
                    for _ in 0..MAX_HALVINGS {
                        let trial = prob.eval(axpy(&cur.q, -trial_step, &grad)?, cur.pair.lambda)?;
                        if lagrangian(&trial, mu, rho) <= reference - 1e-4 * trial_step * gnorm * gnorm {
                            accepted = Some(trial);
                            break;
                        }
                        trial_step *= 0.5;
                    }
                    match accepted {
                        Some(t) => t,
                        None => break,
                    }
                }
            };
            let next_grad = lagrangian_gradient(q0, &next, mu, rho)?;
            prev = Some((next.q.sub(&cur.q)?, next_grad.sub(&grad)?));
            cur = next;
            grad = next_grad;
        }

        kkt = l2_norm(&projected_gradient(q0, &cur)?);
        if cur.c.abs() > CONSTRAINT_TOL && cur.c.abs() <= RESTORE_WINDOW && kkt <= opts.grad_tol {
            let dens_sq = l2_inner(&cur.dens, &cur.dens)?;
            for _ in 0..5 {
                let shift = cur.c / dens_sq;
                let next = axpy(&cur.q, -shift, &cur.dens)?;
                cur = prob.eval(next, cur.pair.lambda)?;
                if cur.c.abs() <= 0.1 * CONSTRAINT_TOL {
                    break;
                }
            }
            kkt = l2_norm(&projected_gradient(q0, &cur)?);
        }
        if cur.c.abs() <= CONSTRAINT_TOL && kkt <= opts.grad_tol {
            converged = true;
            break;
        }
        mu -= rho * cur.c;
        if cur.c.abs() > 0.1 * c_before.abs() {
            rho *= opts.penalty_growth;
        }
    }

    let q_hat = Potential::new(cur.q.clone(), "q_hat");
    let diff = q0.samples().sub(&cur.q)?;
    let nu = l2_inner(&diff, &cur.dens)? / l2_inner(&cur.dens, &cur.dens)?;
    let delta: i8 = if nu > 0.0 { 1 } else { -1 };
    let u_hat = cur.pair.phi.scale(nu.abs().sqrt())?;

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("constraint_defect".to_string(), cur.c.abs());
    diagnostics.insert("kkt_residual".to_string(), kkt);
    diagnostics.insert("outer_iters".to_string(), outer as f64);
    diagnostics.insert("inner_iters".to_string(), inner_total as f64);
    diagnostics.insert("eigen_solves".to_string(), prob.evals as f64);
    diagnostics.insert("penalty".to_string(), rho);
    diagnostics.insert("multiplier".to_string(), mu);

    Ok(InverseResult {
        q_hat,
        k,
        lambda_star,
        distance: cur.obj,
        delta,
        nu,
        u_hat: Some(u_hat),
        route: Route::Direct,
        converged,
        diagnostics,
    })
}

/// Collinearity defect between `q0 - q_hat` and `phi_k(q_hat)^2`, after
/// normalizing both in `L^2` and choosing the better sign.
pub fn optimality_residual(q0: &Potential, result: &InverseResult, alpha: BoundaryAngle) -> Result<f64> {
    if result.delta == 0 {
        return Err(SpectraError::InvalidArgument(
            "optimality residual is undefined for the trivial result".into(),
        ));
    }
    let diff = q0.samples().sub(result.q_hat.samples())?;
    let dn = l2_norm(&diff);
    if dn == 0.0 {
        return Err(SpectraError::InvalidArgument("q_hat coincides with q0".into()));
    }
    let pair = eigenfunction_near(&result.q_hat, result.k, alpha, result.lambda_star)?;
    let sq = pair.phi.map(|v| v * v)?;
    let sn = l2_norm(&sq);
    let plus = diff.zip_with(&sq, |a, b| a / dn - b / sn)?;
    let minus = diff.zip_with(&sq, |a, b| a / dn + b / sn)?;
    Ok(l2_norm(&plus).min(l2_norm(&minus)))
}

/// `true` iff `u_hat` and `phi_k(q_hat)` both have exactly `k - 1` interior zeros.
/// Vacuously true for the trivial result.
pub fn verify_nodal(result: &InverseResult, alpha: BoundaryAngle) -> Result<bool> {
    let Some(u_hat) = &result.u_hat else {
        return Ok(true);
    };
    let want = result.k - 1;
    if u_hat.sign_changes(NODE_FLOOR) != want {
        return Ok(false);
    }
    let pair = eigenfunction_near(&result.q_hat, result.k, alpha, result.lambda_star)?;
    Ok(pair.node_count == want)
}

/// Newton iteration along `phi_k(q)^2` until `|lambda_k(q) - lambda_star| <= tol`.
pub fn restore_feasibility(
    q: &Potential,
    k: usize,
    lambda_star: f64,
    alpha: BoundaryAngle,
    tol: f64,
) -> Result<Potential> {
    check_k(k)?;
    let mut cur = q.clone();
    let mut guess = lambda_star;
    for _ in 0..50 {
        let pair = eigenfunction_near(&cur, k, alpha, guess)?;
        let c = pair.lambda - lambda_star;
        if c.abs() <= tol {
            return Ok(cur);
        }
        let dens = density(&pair)?;
        let scale = c / l2_inner(&dens, &dens)?;
        let next = cur.samples().zip_with(&dens, |a, b| a - scale * b)?;
        cur = Potential::new(next, q.label()).with_seed(q.seed());
        guess = lambda_star;
    }
    Err(SpectraError::InvalidArgument(format!(
        "feasibility restoration for lambda_{k} = {lambda_star} did not converge"
    )))
}

/// A feasible neighbour of `q_hat`: a random kick of size `eps` orthogonal to
/// `phi_k(q_hat)^2`, pulled back onto `lambda_k = lambda_star`.
pub fn tangential_probe(
    result: &InverseResult,
    alpha: BoundaryAngle,
    seed: u64,
    eps: f64,
) -> Result<Potential> {
    let q_hat = &result.q_hat;
    let grid = q_hat.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (1..=6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let raw = GridFunction::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * ((j + 1) as f64 * x + phase).cos())
            .sum()
    })?;
    let pair = eigenfunction_near(q_hat, result.k, alpha, result.lambda_star)?;
    let dens = density(&pair)?;
    let coef = l2_inner(&raw, &dens)? / l2_inner(&dens, &dens)?;
    let tangent = raw.zip_with(&dens, |a, b| a - coef * b)?;
    let tangent = tangent.scale(eps / l2_norm(&tangent))?;
    let kicked = Potential::new(q_hat.samples().add(&tangent)?, "probe");
    restore_feasibility(&kicked, result.k, result.lambda_star, alpha, LAMBDA_TOL)
}
