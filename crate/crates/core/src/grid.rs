//! Uniform grids on `[0, pi]`, sampled functions and composite Simpson quadrature.
//!
//! Every function the solvers exchange (potentials, eigenfunctions, nonlinear
//! solutions) is a [`GridFunction`]: its values at the `n + 1` nodes of a
//! [`Grid`]. Inner products and norms are the `L^2(0, pi)` ones, evaluated
//! with composite Simpson (falling back to a trailing 3/8 panel when `n` is odd).

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};

/// Smallest admissible number of intervals.
pub const MIN_INTERVALS: usize = 16;

/// Grid size used by default throughout the crate.
pub const DEFAULT_INTERVALS: usize = 2000;

/// Uniform partition of `[0, pi]` into `n` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_INTERVALS {
            return Err(SpectraError::GridTooCoarse { n, min: MIN_INTERVALS });
        }
        Ok(Grid { n })
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        PI / self.n as f64
    }

    /// The `i`-th node. The last node is exactly `pi`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n);
        if i == self.n {
            PI
        } else {
            i as f64 * PI / self.n as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.node(i))
    }

    /// Quadrature weight of node `i` (composite Simpson, 3/8 tail for odd `n`).
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        let n = self.n;
        let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
        let mut w = 0.0;
        if i <= simpson_end {
            w += if i == 0 || i == simpson_end {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
        if n % 2 == 1 && i >= simpson_end {
            w += match i - simpson_end {
                0 | 3 => 3.0 * h / 8.0,
                _ => 9.0 * h / 8.0,
            };
        }
        w
    }

    /// Index of the interval containing `x` together with the local offset `x - x_i`.
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.spacing();
        let i = ((x / h).floor().max(0.0) as usize).min(self.n - 1);
        (i, x - i as f64 * h)
    }
}

/// Convenience wrapper around [`Grid::new`].
pub fn make_grid(n: usize) -> Result<Grid> {
    Grid::new(n)
}

/// A real function sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SpectraError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectraError::NonFinite { index });
        }
        Ok(GridFunction { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        GridFunction::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination with another function on the same grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridFunction::new(self.grid, values)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_i |f_i - g_i|`.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        check_same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `L^2` distance `||f - g||`.
    pub fn l2_distance(&self, other: &GridFunction) -> Result<f64> {
        Ok(l2_norm(&self.sub(other)?))
    }

    /// Number of sign changes between samples, ignoring samples whose magnitude
    /// is below `rel_floor * max|f|`.
    pub fn sign_changes(&self, rel_floor: f64) -> usize {
        count_sign_changes(&self.values, rel_floor)
    }

    /// Linear interpolation of the samples at `x` (clamped to `[0, pi]`).
    pub fn interpolate(&self, x: f64) -> f64 {
        let (i, dx) = self.grid.locate(x.clamp(0.0, PI));
        let t = dx / self.grid.spacing();
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Writes `x,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,value")?;
        for (x, v) in self.grid.nodes().zip(&self.values) {
            writeln!(w, "{},{}", fmt_f64(x), fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Reads an `x,value` CSV and resamples it onto `grid`.
    ///
    /// When the file's abscissae coincide with the grid nodes the values are
    /// taken verbatim; otherwise they are interpolated linearly (constant
    /// extrapolation outside the sampled range).
    pub fn read_csv<R: BufRead>(reader: R, grid: Grid) -> Result<Self> {
        let (xs, vs) = read_xy_csv(reader)?;
        let matches = xs.len() == grid.len()
            && xs
                .iter()
                .zip(grid.nodes())
                .all(|(a, b)| (a - b).abs() <= 1e-12);
        if matches {
            return GridFunction::new(grid, vs);
        }
        GridFunction::from_fn(grid, |x| interp_sorted(&xs, &vs, x))
    }
}

/// Full-precision float formatting used for every CSV artifact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_xy_csv<R: BufRead>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| SpectraError::Csv("empty file".into()))??;
    if header.trim() != "x,value" {
        return Err(SpectraError::Csv(format!("unexpected header `{}`", header.trim())));
    }
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            let s = s.ok_or_else(|| SpectraError::Csv(format!("line {}: missing field", lineno + 2)))?;
            s.trim()
                .parse::<f64>()
                .map_err(|e| SpectraError::Csv(format!("line {}: {e}", lineno + 2)))
        };
        let x = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(SpectraError::Csv(format!("line {}: too many fields", lineno + 2)));
        }
        if let Some(&last) = xs.last() {
            if x <= last {
                return Err(SpectraError::Csv(format!(
                    "line {}: abscissae must be strictly increasing",
                    lineno + 2
                )));
            }
        }
        xs.push(x);
        vs.push(v);
    }
    if xs.len() < 2 {
        return Err(SpectraError::Csv("need at least two rows".into()));
    }
    Ok((xs, vs))
}

fn interp_sorted(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return vs[0];
    }
    if x >= xs[xs.len() - 1] {
        return vs[vs.len() - 1];
    }
    let j = xs.partition_point(|&t| t <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    vs[j - 1] * (1.0 - t) + vs[j] * t
}

pub(crate) fn count_sign_changes(values: &[f64], rel_floor: f64) -> usize {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = rel_floor * scale;
    let mut last_sign = 0.0;
    let mut changes = 0;
    for &v in values {
        if v.abs() <= floor {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            changes += 1;
        }
        last_sign = s;
    }
    changes
}

fn check_same_grid(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.grid != g.grid {
        return Err(SpectraError::GridMismatch {
            left: f.grid.n,
            right: g.grid.n,
        });
    }
    Ok(())
}

/// `L^2(0, pi)` inner product by composite Simpson quadrature.
pub fn l2_inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    check_same_grid(f, g)?;
    let grid = f.grid;
    Ok(f
        .values
        .iter()
        .zip(&g.values)
        .enumerate()
        .map(|(i, (a, b))| grid.weight(i) * a * b)
        .sum())
}

/// `L^2(0, pi)` norm.
pub fn l2_norm(f: &GridFunction) -> f64 {
    let grid = f.grid;
    f.values
        .iter()
        .enumerate()
        .map(|(i, v)| grid.weight(i) * v * v)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// Simpson integral of a grid function.
pub fn integrate(f: &GridFunction) -> f64 {
    let grid = f.grid;
    f.values
        .iter()
        .enumerate()
        .map(|(i, v)| grid.weight(i) * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(Grid::new(n).unwrap(), f).unwrap()
    }

    #[test]
    fn rejects_coarse_grids() {
        assert_eq!(
            Grid::new(4),
            Err(SpectraError::GridTooCoarse { n: 4, min: 16 })
        );
        assert!(Grid::new(16).is_ok());
    }

    #[test]
    fn nodes_are_uniform_and_hit_the_ends() {
        for n in [16, 17, 2000] {
            let g = Grid::new(n).unwrap();
            let nodes: Vec<f64> = g.nodes().collect();
            assert_eq!(nodes.len(), n + 1);
            assert_eq!(nodes[0], 0.0);
            assert_eq!(nodes[n], PI);
            for w in nodes.windows(2) {
                assert!(w[1] > w[0]);
                assert!((w[1] - w[0] - PI / n as f64).abs() <= 1e-14);
            }
        }
        let g = Grid::new(2000).unwrap();
        assert!((g.spacing() - PI / 2000.0).abs() < 1e-18);
        let g16 = Grid::new(16).unwrap();
        assert!((g16.node(1) - PI / 16.0).abs() < 1e-16);
    }

    #[test]
    fn weights_sum_to_pi() {
        for n in [16, 17, 31, 2000] {
            let g = Grid::new(n).unwrap();
            let total: f64 = (0..=n).map(|i| g.weight(i)).sum();
            assert!((total - PI).abs() < 1e-13, "n = {n}: {total}");
        }
    }

    #[test]
    fn inner_products_of_modes() {
        let s1 = sampled(2000, f64::sin);
        let s2 = sampled(2000, |x| (2.0 * x).sin());
        let one = sampled(2000, |_| 1.0);
        assert!((l2_inner(&s1, &s1).unwrap() - PI / 2.0).abs() < 1e-10);
        assert!((l2_inner(&one, &one).unwrap() - PI).abs() < 1e-12);
        assert!(l2_inner(&s1, &s2).unwrap().abs() < 1e-10);
        assert!((l2_norm(&s1) - (PI / 2.0).sqrt()).abs() < 1e-10);
        assert_eq!(l2_norm(&sampled(64, |_| 0.0)), 0.0);
        assert!((l2_norm(&sampled(64, |_| 3.0)) - 3.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_for_cubics() {
        // int_0^pi x^p dx = pi^(p+1) / (p+1)
        for n in [16, 17, 40, 41] {
            for p in 0..=3 {
                let f = sampled(n, |x| x.powi(p));
                let exact = PI.powi(p + 1) / (p + 1) as f64;
                assert!((integrate(&f) - exact).abs() < 1e-12 * exact.max(1.0), "n={n} p={p}");
            }
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let f = |x: f64| (3.0 * x).cos() * x.exp();
        let err = |n: usize| {
            let a = sampled(n, f);
            let b = sampled(n, |_| 1.0);
            // int e^x cos 3x = e^x (cos 3x + 3 sin 3x) / 10
            let exact = (PI.exp() * (3.0 * PI).cos() - 1.0) / 10.0;
            (l2_inner(&a, &b).unwrap() - exact).abs()
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = sampled(16, f64::sin);
        let b = sampled(32, f64::sin);
        assert!(matches!(l2_inner(&a, &b), Err(SpectraError::GridMismatch { .. })));
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = Grid::new(16).unwrap();
        let mut v = vec![0.0; 17];
        v[3] = f64::NAN;
        assert_eq!(GridFunction::new(g, v), Err(SpectraError::NonFinite { index: 3 }));
    }

    #[test]
    fn csv_roundtrip_same_grid_is_exact() {
        let f = sampled(100, |x| (x * 1.7).sin() + 0.1 * x);
        let text = f.to_csv_string();
        assert!(text.starts_with("x,value\n"));
        let back = GridFunction::read_csv(text.as_bytes(), f.grid()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_resamples_onto_other_grid() {
        let f = sampled(200, |x| 2.0 * x + 1.0);
        let g = Grid::new(64).unwrap();
        let back = GridFunction::read_csv(f.to_csv_string().as_bytes(), g).unwrap();
        let expect = GridFunction::from_fn(g, |x| 2.0 * x + 1.0).unwrap();
        assert!(back.sup_distance(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let g = Grid::new(16).unwrap();
        assert!(GridFunction::read_csv("t,y\n0,1\n1,2\n".as_bytes(), g).is_err());
    }

    #[test]
    fn sign_changes_skip_noise() {
        let f = sampled(400, |x| (3.0 * x).sin());
        assert_eq!(f.sign_changes(1e-9), 2);
    }
}
