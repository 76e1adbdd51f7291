//! Potentials `q(x)` on `[0, pi]` and their preset generators.
//!
//! A potential is stored as node samples; the ODE integrators evaluate it
//! between nodes through a natural cubic spline of those samples.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpectraError};
use crate::grid::{l2_norm, Grid, GridFunction};

/// Preset names accepted by [`preset_potential`].
pub const PRESETS: [&str; 5] = ["zero", "constant", "cosine", "piecewise_step", "random_fourier"];

/// A sampled potential together with its interpolating spline.
#[derive(Clone)]
pub struct Potential {
    f: GridFunction,
    label: String,
    seed: Option<u64>,
    // second derivatives of the natural cubic spline through the samples
    curvature: Vec<f64>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("label", &self.label)
            .field("seed", &self.seed)
            .field("intervals", &self.f.grid().intervals())
            .finish()
    }
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.label == other.label && self.seed == other.seed
    }
}

impl Potential {
    pub fn new(f: GridFunction, label: impl Into<String>) -> Self {
        let curvature = natural_spline_curvature(f.values(), f.grid().spacing());
        Potential {
            f,
            label: label.into(),
            seed: None,
            curvature,
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn zero(grid: Grid) -> Self {
        Potential::new(GridFunction::constant(grid, 0.0).expect("finite"), "zero")
    }

    pub fn samples(&self) -> &GridFunction {
        &self.f
    }

    pub fn values(&self) -> &[f64] {
        self.f.values()
    }

    pub fn grid(&self) -> Grid {
        self.f.grid()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn min(&self) -> f64 {
        self.f.min()
    }

    pub fn max(&self) -> f64 {
        self.f.max()
    }

    /// `q + c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Ok(Potential::new(self.f.map(|v| v + c)?, format!("{}{:+}", self.label, c)).with_seed(self.seed))
    }

    /// Spline value at `x in [0, pi]`.
    pub fn eval(&self, x: f64) -> f64 {
        let grid = self.f.grid();
        let h = grid.spacing();
        let (i, dx) = grid.locate(x);
        let y = self.f.values();
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        let slope = (y[i + 1] - y[i]) / h - h * (2.0 * m0 + m1) / 6.0;
        y[i] + dx * (slope + dx * (0.5 * m0 + dx * (m1 - m0) / (6.0 * h)))
    }
}

/// Second derivatives of the natural cubic spline on a uniform mesh.
fn natural_spline_curvature(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len() - 1;
    let mut m = vec![0.0; n + 1];
    if n < 2 {
        return m;
    }
    // M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2, M_0 = M_n = 0
    let rhs: Vec<f64> = (1..n)
        .map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h))
        .collect();
    let size = n - 1;
    let mut c = vec![0.0; size];
    let mut d = vec![0.0; size];
    c[0] = 1.0 / 4.0;
    d[0] = rhs[0] / 4.0;
    for i in 1..size {
        let denom = 4.0 - c[i - 1];
        c[i] = 1.0 / denom;
        d[i] = (rhs[i] - d[i - 1]) / denom;
    }
    m[size] = d[size - 1];
    for i in (0..size - 1).rev() {
        m[i + 1] = d[i] - c[i] * m[i + 2];
    }
    m
}

fn expect_params(name: &str, params: &[f64], allowed: &[usize]) -> Result<()> {
    if !allowed.contains(&params.len()) {
        return Err(SpectraError::BadParams {
            name: name.to_string(),
            reason: format!("expected {allowed:?} parameters, got {}", params.len()),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(SpectraError::BadParams {
            name: name.to_string(),
            reason: "parameters must be finite".into(),
        });
    }
    Ok(())
}

/// Builds one of the named preset potentials.
///
/// | name             | params                         | q(x)                                   |
/// |------------------|--------------------------------|----------------------------------------|
/// | `zero`           | `[]`                           | 0                                      |
/// | `constant`       | `[c]`                          | c                                      |
/// | `cosine`         | `[a]` or `[a, m]` (m = 2)      | a cos(m x)                             |
/// | `piecewise_step` | `[x_break, left, right]`       | left for x < x_break, right otherwise  |
/// | `random_fourier` | `[bound]` or `[bound, modes]`  | seeded sine series, `‖q‖ <= bound`     |
///
/// `random_fourier` uses `modes = 8` when omitted and `seed = 0` when no
/// seed is given; the same `(params, seed)` always yields identical samples.
pub fn preset_potential(name: &str, params: &[f64], grid: Grid, seed: Option<u64>) -> Result<Potential> {
    let f = match name {
        "zero" => {
            expect_params(name, params, &[0])?;
            GridFunction::constant(grid, 0.0)?
        }
        "constant" => {
            expect_params(name, params, &[1])?;
            GridFunction::constant(grid, params[0])?
        }
        "cosine" => {
            expect_params(name, params, &[1, 2])?;
            let a = params[0];
            let m = params.get(1).copied().unwrap_or(2.0);
            GridFunction::from_fn(grid, |x| a * (m * x).cos())?
        }
        "piecewise_step" => {
            expect_params(name, params, &[3])?;
            let (xb, left, right) = (params[0], params[1], params[2]);
            if !(0.0..=PI).contains(&xb) {
                return Err(SpectraError::BadParams {
                    name: name.into(),
                    reason: format!("break point {xb} outside [0, pi]"),
                });
            }
            GridFunction::from_fn(grid, |x| if x < xb { left } else { right })?
        }
        "random_fourier" => {
            expect_params(name, params, &[1, 2])?;
            let bound = params[0];
            let modes = params.get(1).copied().unwrap_or(8.0);
            if bound < 0.0 || modes < 1.0 || modes.fract() != 0.0 || modes > 64.0 {
                return Err(SpectraError::BadParams {
                    name: name.into(),
                    reason: "need bound >= 0 and an integer mode count in 1..=64".into(),
                });
            }
            random_fourier(grid, bound, modes as usize, seed.unwrap_or(0))?
        }
        other => return Err(SpectraError::UnknownPreset(other.to_string())),
    };
    let label = if params.is_empty() {
        name.to_string()
    } else {
        let p: Vec<String> = params.iter().map(|p| p.to_string()).collect();
        format!("{name}[{}]", p.join(","))
    };
    let seed = if name == "random_fourier" { Some(seed.unwrap_or(0)) } else { seed };
    Ok(Potential::new(f, label).with_seed(seed))
}

fn random_fourier(grid: Grid, bound: f64, modes: usize, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (1..=modes)
        .map(|j| rng.gen_range(-1.0..1.0) / j as f64)
        .collect();
    let radius = bound * rng.gen_range(0.5..1.0);
    let raw = GridFunction::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * ((j + 1) as f64 * x).sin())
            .sum()
    })?;
    let norm = l2_norm(&raw);
    if norm == 0.0 {
        return Ok(raw);
    }
    raw.scale(radius / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(2000).unwrap()
    }

    #[test]
    fn simple_presets() {
        let z = preset_potential("zero", &[], grid(), None).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let c = preset_potential("constant", &[5.0], grid(), None).unwrap();
        assert!(c.values().iter().all(|&v| v == 5.0));
        assert_eq!(c.eval(1.234), 5.0);
        let s = preset_potential("piecewise_step", &[1.0, -2.0, 3.0], grid(), None).unwrap();
        assert_eq!(s.values()[0], -2.0);
        assert_eq!(*s.values().last().unwrap(), 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            preset_potential("gaussian", &[], grid(), None),
            Err(SpectraError::UnknownPreset(_))
        ));
        assert!(matches!(
            preset_potential("constant", &[], grid(), None),
            Err(SpectraError::BadParams { .. })
        ));
        assert!(preset_potential("random_fourier", &[10.0, 2.5], grid(), Some(1)).is_err());
        assert!(preset_potential("piecewise_step", &[5.0, 0.0, 1.0], grid(), None).is_err());
    }

    #[test]
    fn random_fourier_is_deterministic_and_bounded() {
        let a = preset_potential("random_fourier", &[10.0, 8.0], grid(), Some(7)).unwrap();
        let b = preset_potential("random_fourier", &[10.0, 8.0], grid(), Some(7)).unwrap();
        let c = preset_potential("random_fourier", &[10.0, 8.0], grid(), Some(8)).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert!(l2_norm(a.samples()) <= 10.0 + 1e-12);
        assert!(l2_norm(a.samples()) >= 5.0 - 1e-12);
        assert_eq!(a.seed(), Some(7));
    }

    #[test]
    fn spline_interpolates_nodes_and_smooth_functions() {
        let q = preset_potential("cosine", &[2.0, 2.0], grid(), None).unwrap();
        let g = q.grid();
        for i in [0, 1, 17, 1000, 1999, 2000] {
            assert!((q.eval(g.node(i)) - q.values()[i]).abs() < 1e-13);
        }
        let mut worst: f64 = 0.0;
        for j in 0..997 {
            let x = 0.1 + j as f64 * 0.003;
            worst = worst.max((q.eval(x) - 2.0 * (2.0 * x).cos()).abs());
        }
        assert!(worst < 1e-10, "interior spline error {worst}");
    }

    #[test]
    fn shift_adds_constant() {
        let q = preset_potential("cosine", &[1.0], grid(), None).unwrap();
        let s = q.shifted(3.0).unwrap();
        assert!((s.eval(0.77) - q.eval(0.77) - 3.0).abs() < 1e-13);
    }
}
