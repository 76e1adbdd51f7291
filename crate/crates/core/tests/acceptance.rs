//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use spectra_core::eigen::eigenfunction_near;
use spectra_core::inverse::{optimality_residual, solve_direct, solve_explicit, InverseResult, OptimizerOptions};
use spectra_core::nonlinear::{default_s_grid, find_solution, multiplicity_scan, nonexistence_scan, NODE_FLOOR};
use spectra_core::{
    eigenvalue, eigenvalue_gradient, l2_inner, l2_norm, make_grid, preset_potential, BoundaryAngle, GridFunction,
    Potential,
};

use common::{central_difference, describe, fd_eigenvalue_extrapolated, standard_potentials};

type Check = Result<String, String>;

fn dirichlet() -> BoundaryAngle {
    BoundaryAngle::dirichlet()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn linear_spectrum() -> Check {
    let q = Potential::zero(make_grid(2000).unwrap());
    let mut worst: f64 = 0.0;
    for k in 1..=10 {
        let l = eigenvalue(&q, k, dirichlet(), 1e-12).map_err(|e| e.to_string())?;
        worst = worst.max((l - (k * k) as f64).abs());
    }
    ensure(worst <= 1e-8, || format!("max |lambda_k - k^2| = {worst:.3e}"))?;
    Ok(format!("max |lambda_k - k^2| = {worst:.2e}"))
}

fn gradient_check() -> Check {
    let g = make_grid(2000).unwrap();
    let b = dirichlet();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let k = 1 + (i % 3) as usize;
        let q = preset_potential("random_fourier", &[5.0, 8.0], g, Some(100 + i)).unwrap();
        let h = preset_potential("random_fourier", &[1.0, 6.0], g, Some(200 + i)).unwrap();
        let grad = eigenvalue_gradient(&q, k, b).map_err(|e| e.to_string())?;
        let formula = l2_inner(&grad, h.samples()).unwrap();
        let lam = |t: f64| {
            let shifted = Potential::new(q.samples().zip_with(h.samples(), |a, c| a + t * c).unwrap(), "q+th");
            eigenvalue(&shifted, k, b, 1e-13).unwrap()
        };
        let fd = central_difference(lam, 1e-4);
        let rel = (fd - formula).abs() / formula.abs();
        worst = worst.max(rel);
    }
    ensure(worst <= 1e-4, || format!("worst relative error {worst:.3e}"))?;

    let q = preset_potential("random_fourier", &[5.0, 8.0], g, Some(1)).unwrap();
    let ones = GridFunction::constant(g, 1.0).unwrap();
    let mut worst_const: f64 = 0.0;
    for k in 1..=3 {
        let grad = eigenvalue_gradient(&q, k, b).map_err(|e| e.to_string())?;
        worst_const = worst_const.max((l2_inner(&grad, &ones).unwrap() - 1.0).abs());
    }
    ensure(worst_const <= 1e-8, || format!("constant direction off by {worst_const:.3e}"))?;
    Ok(format!(
        "20 triples, worst relative error {worst:.2e}; constant direction within {worst_const:.1e}"
    ))
}

struct Instance {
    q0: Potential,
    k: usize,
    base: f64,
    lambda_star: f64,
    explicit: InverseResult,
    direct: InverseResult,
}

fn instances() -> Result<Vec<Instance>, String> {
    let b = dirichlet();
    let mut out = Vec::new();
    for q0 in standard_potentials() {
        for k in 1..=2 {
            let base = eigenvalue(&q0, k, b, 1e-12).map_err(|e| e.to_string())?;
            for shift in [-1.0, 1.0] {
                let lambda_star = base + shift;
                let tag = format!("{} k={k} lambda*={lambda_star:.4}", describe(&q0));
                let explicit = solve_explicit(&q0, k, lambda_star, b).map_err(|e| format!("{tag}: {e}"))?;
                let direct = solve_direct(&q0, k, lambda_star, b, &OptimizerOptions::default())
                    .map_err(|e| format!("{tag}: {e}"))?;
                out.push(Instance {
                    q0: q0.clone(),
                    k,
                    base,
                    lambda_star,
                    explicit,
                    direct,
                });
            }
        }
    }
    Ok(out)
}

fn tag(inst: &Instance) -> String {
    format!("{} k={} lambda*={:.4}", describe(&inst.q0), inst.k, inst.lambda_star)
}

fn round_trip(set: &[Instance]) -> Check {
    let b = dirichlet();
    let (mut eig, mut formula): (f64, f64) = (0.0, 0.0);
    for inst in set {
        let r = &inst.explicit;
        let t = tag(inst);
        let pair = eigenfunction_near(&r.q_hat, inst.k, b, inst.lambda_star).map_err(|e| e.to_string())?;
        let defect = (pair.lambda - inst.lambda_star).abs();
        ensure(defect <= 1e-6, || format!("{t}: |lambda_k(q_hat) - lambda*| = {defect:.3e}"))?;
        eig = eig.max(defect);
        let u = r.u_hat.as_ref().ok_or_else(|| format!("{t}: missing u_hat"))?;
        let nodes = u.sign_changes(NODE_FLOOR);
        ensure(nodes == inst.k - 1, || format!("{t}: u_hat has {nodes} zeros"))?;
        let want = if inst.lambda_star < inst.base { 1 } else { -1 };
        ensure(r.delta == want, || format!("{t}: delta = {}", r.delta))?;
        let d = r.delta as f64;
        let identity = (0..u.values().len())
            .map(|i| (r.q_hat.values()[i] - inst.q0.values()[i] + d * u.values()[i].powi(2)).abs())
            .fold(0.0, f64::max);
        ensure(identity <= 1e-6, || format!("{t}: formula identity off by {identity:.3e}"))?;
        formula = formula.max(identity);
    }
    Ok(format!(
        "{} instances, eigenvalue defect <= {eig:.1e}, formula identity <= {formula:.1e}",
        set.len()
    ))
}

fn route_agreement(set: &[Instance]) -> Check {
    let (mut dq, mut dist): (f64, f64) = (0.0, 0.0);
    for inst in set {
        let t = tag(inst);
        ensure(inst.direct.converged, || format!("{t}: direct route did not converge"))?;
        let obj = (inst.direct.distance - inst.explicit.distance).abs();
        let gap = inst.direct.q_hat.samples().l2_distance(inst.explicit.q_hat.samples()).unwrap();
        ensure(obj <= 1e-4, || format!("{t}: |Q_direct - Q_explicit| = {obj:.3e}"))?;
        ensure(gap <= 1e-3, || format!("{t}: ‖q_direct - q_explicit‖ = {gap:.3e}"))?;
        dq = dq.max(obj);
        dist = dist.max(gap);
    }
    Ok(format!("max |dQ| = {dq:.1e}, max ‖dq_hat‖ = {dist:.1e}"))
}

fn collinearity(set: &[Instance]) -> Check {
    let b = dirichlet();
    let (mut ex, mut di): (f64, f64) = (0.0, 0.0);
    for inst in set {
        let t = tag(inst);
        let re = optimality_residual(&inst.q0, &inst.explicit, b).map_err(|e| e.to_string())?;
        let rd = optimality_residual(&inst.q0, &inst.direct, b).map_err(|e| e.to_string())?;
        ensure(re <= 1e-6, || format!("{t}: explicit residual {re:.3e}"))?;
        ensure(rd <= 1e-3, || format!("{t}: direct residual {rd:.3e}"))?;
        ex = ex.max(re);
        di = di.max(rd);
    }
    Ok(format!("explicit <= {ex:.1e}, direct <= {di:.1e}"))
}

fn nonexistence() -> Check {
    let g = make_grid(2000).unwrap();
    let b = dirichlet();
    let grid = default_s_grid();
    let pots = [
        Potential::zero(g),
        preset_potential("random_fourier", &[5.0, 8.0], g, Some(3)).unwrap(),
    ];
    let mut scans = 0;
    let mut brackets = 0;
    for q0 in &pots {
        for k in 1..=2 {
            let base = eigenvalue(q0, k, b, 1e-12).map_err(|e| e.to_string())?;
            for (delta, lambdas) in [(1i8, [base, base + 0.5]), (-1i8, [base, base - 0.5])] {
                for lambda in lambdas {
                    let report = nonexistence_scan(q0, lambda, delta, k, b, &grid).map_err(|e| e.to_string())?;
                    ensure(report.is_clear(), || {
                        format!(
                            "{} k={k} delta={delta:+} lambda={lambda:.4}: forbidden brackets {:?}",
                            describe(q0),
                            report.forbidden
                        )
                    })?;
                    scans += 1;
                    brackets += report.brackets.len();
                }
            }
        }
    }
    Ok(format!(
        "{scans} scans x {} shots, no forbidden bracket ({brackets} allowed brackets seen)",
        grid.len()
    ))
}

fn multiplicity() -> Check {
    let q0 = Potential::zero(make_grid(2000).unwrap());
    let report = multiplicity_scan(&q0, 5.0, dirichlet(), 5).map_err(|e| e.to_string())?;
    ensure(report.gaps.is_empty(), || format!("missing branches {:?}", report.gaps))?;
    let mut soft: Vec<usize> = Vec::new();
    let mut hard: Vec<usize> = Vec::new();
    for s in &report.solutions {
        if s.delta < 0 {
            soft.push(s.node_count);
        } else {
            hard.push(s.node_count);
        }
    }
    soft.sort_unstable();
    hard.sort_unstable();
    ensure(soft == [0, 1] && hard == [2, 3, 4], || {
        format!("node counts delta=-1 {soft:?}, delta=+1 {hard:?}")
    })?;
    let d = report.min_pairwise_distance().unwrap();
    ensure(d >= 1e-4, || format!("two solutions only {d:.3e} apart"))?;
    Ok(format!("delta=-1 nodes {soft:?}, delta=+1 nodes {hard:?}, min distance {d:.3}"))
}

fn trivial_case() -> Check {
    let b = dirichlet();
    let mut count = 0;
    for q0 in standard_potentials() {
        for k in 1..=2 {
            let l = eigenvalue(&q0, k, b, 1e-12).map_err(|e| e.to_string())?;
            let e = solve_explicit(&q0, k, l, b).map_err(|e| e.to_string())?;
            let d = solve_direct(&q0, k, l, b, &OptimizerOptions::default()).map_err(|e| e.to_string())?;
            for r in [&e, &d] {
                ensure(r.distance.abs() <= 1e-12, || {
                    format!("{} k={k} {:?}: distance {:.3e}", describe(&q0), r.route, r.distance)
                })?;
            }
            count += 1;
        }
    }
    Ok(format!("{count} instances, distance 0 on both routes"))
}

fn bifurcation() -> Check {
    let q0 = Potential::zero(make_grid(2000).unwrap());
    let mut amps = Vec::new();
    for lambda in [1.5, 1.25, 1.1, 1.01] {
        let set = find_solution(&q0, lambda, -1, 1, dirichlet())
            .map_err(|e| e.to_string())?
            .into_set()
            .ok_or_else(|| format!("no solution at lambda={lambda}"))?;
        amps.push((lambda, set.primary.max_abs()));
    }
    let decreasing = amps.windows(2).all(|w| w[1].1 < w[0].1);
    ensure(decreasing, || format!("amplitudes not decreasing: {amps:?}"))?;
    // small-amplitude branch: lambda - 1 ~ (3/4) a^2
    let (l, a) = amps[3];
    let ratio = a / (4.0 * (l - 1.0) / 3.0).sqrt();
    ensure((ratio - 1.0).abs() < 0.05, || format!("amplitude {a:.4e} at lambda={l}, ratio {ratio:.4}"))?;
    let list: Vec<String> = amps.iter().map(|(l, a)| format!("{l}:{a:.4}")).collect();
    Ok(format!("‖u‖_inf {}", list.join(" > ")))
}

fn oracle_agreement() -> Check {
    let g = make_grid(2000).unwrap();
    let b = dirichlet();
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let q = preset_potential("random_fourier", &[5.0, 8.0], g, Some(seed)).unwrap();
        for k in 1..=5 {
            let prufer = eigenvalue(&q, k, b, 1e-12).map_err(|e| e.to_string())?;
            let fd = fd_eigenvalue_extrapolated(&q, 2000, k);
            let err = (prufer - fd).abs();
            ensure(err <= 1e-5, || format!("seed {seed} k={k}: |prufer - fd| = {err:.3e}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("5 potentials x k<=5, max difference {worst:.2e}"))
}

fn lower_bound() -> Check {
    let g = make_grid(2000).unwrap();
    let b = dirichlet();
    let mut lowest = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    for seed in 0..50u64 {
        let q = preset_potential("random_fourier", &[10.0, 12.0], g, Some(1000 + seed)).unwrap();
        let norm = l2_norm(q.samples());
        ensure(norm <= 10.0, || format!("seed {seed}: ‖q‖ = {norm}"))?;
        max_norm = max_norm.max(norm);
        let l1 = eigenvalue(&q, 1, b, 1e-12).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(l1.is_finite(), || format!("seed {seed}: lambda_1 = {l1}"))?;
        // min q <= lambda_1 <= Rayleigh quotient of sin x
        let s2 = GridFunction::from_fn(g, |x| x.sin().powi(2)).unwrap();
        let upper = 1.0 + 2.0 / std::f64::consts::PI * l2_inner(&s2, q.samples()).unwrap();
        ensure(l1 >= q.min() && l1 <= upper + 1e-9, || {
            format!("seed {seed}: lambda_1 = {l1} outside [{}, {upper}]", q.min())
        })?;
        lowest = lowest.min(l1);
    }
    Ok(format!("50 potentials (‖q‖ <= {max_norm:.2}), all lambda_1 >= {lowest:.4}"))
}

fn main() -> ExitCode {
    let set_start = Instant::now();
    let set = instances();
    let set = &set;
    let set_time = set_start.elapsed();

    let shared = |f: fn(&[Instance]) -> Check| -> Box<dyn Fn() -> Check + '_> {
        Box::new(move || match set {
            Ok(s) => f(s),
            Err(e) => Err(e.clone()),
        })
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("linear spectrum", Box::new(linear_spectrum)),
        ("eigenvalue gradient", Box::new(gradient_check)),
        ("explicit round trip", shared(round_trip)),
        ("route agreement", shared(route_agreement)),
        ("collinearity", shared(collinearity)),
        ("nonexistence scans", Box::new(nonexistence)),
        ("multiplicity at lambda=5", Box::new(multiplicity)),
        ("trivial case", Box::new(trivial_case)),
        ("bifurcation from lambda_1", Box::new(bifurcation)),
        ("finite-difference oracle", Box::new(oracle_agreement)),
        ("lambda_1 lower bound", Box::new(lower_bound)),
    ];

    println!("instance set for criteria 3-5 solved in {:.2?}", set_time);
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
