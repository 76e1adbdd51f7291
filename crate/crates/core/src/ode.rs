//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The observer callback sees every accepted step together with its dense
//! interpolant, which is how the solvers sample trajectories on a grid, track
//! the unwrapped phase and stop early on blow-up.

use crate::error::{Result, SpectraError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// What the observer wants after seeing a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// An accepted step `[x0, x1]` with its continuous extension.
pub struct Step<const N: usize> {
    pub x0: f64,
    pub x1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 4],
}

impl<const N: usize> Step<N> {
    /// Dense-output value at `x in [x0, x1]`.
    pub fn eval(&self, x: f64) -> [f64; N] {
        let h = self.x1 - self.x0;
        let t = if h == 0.0 { 1.0 } else { (x - self.x0) / h };
        let t1 = 1.0 - t;
        let [r2, r3, r4, r5] = &self.cont;
        std::array::from_fn(|i| self.y0[i] + t * (r2[i] + t1 * (r3[i] + t * (r4[i] + t1 * r5[i]))))
    }
}

/// Final state of an integration.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub x: f64,
    pub y: [f64; N],
    pub steps: usize,
    /// `true` if the observer stopped the integration before `x_end`.
    pub stopped: bool,
}

/// Adaptive Dormand–Prince 5(4) settings.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: 0.1,
            max_steps: 200_000,
        }
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

impl Dopri5 {
    pub fn with_tolerance(tol: f64) -> Self {
        Dopri5 {
            rtol: tol,
            atol: tol,
            ..Dopri5::default()
        }
    }

    fn err_norm<const N: usize>(&self, e: &[f64; N], y0: &[f64; N], y1: &[f64; N]) -> f64 {
        let s: f64 = (0..N)
            .map(|i| {
                let sc = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
                (e[i] / sc).powi(2)
            })
            .sum();
        (s / N as f64).sqrt()
    }

    fn initial_step<const N: usize, F>(&self, f: &mut F, x0: f64, y0: &[f64; N], f0: &[f64; N], span: f64) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let d0 = self.err_norm(y0, y0, y0);
        let d1 = self.err_norm(f0, y0, y0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span).min(self.h_max);
        let y1 = axpy(y0, h0, &[(1.0, f0)]);
        let f1 = f(x0 + h0, &y1);
        let df: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
        let d2 = self.err_norm(&df, y0, y0) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(self.h_max)
    }

    /// Integrates `y' = f(x, y)` from `x0` to `x_end > x0`.
    pub fn integrate<const N: usize, F, O>(
        &self,
        mut f: F,
        x0: f64,
        y0: [f64; N],
        x_end: f64,
        mut observe: O,
    ) -> Result<Outcome<N>>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        O: FnMut(&Step<N>) -> Control,
    {
        let span = x_end - x0;
        if span <= 0.0 {
            return Ok(Outcome {
                x: x0,
                y: y0,
                steps: 0,
                stopped: false,
            });
        }
        let mut x = x0;
        let mut y = y0;
        let mut k1 = f(x, &y);
        let mut h = self.initial_step(&mut f, x, &y, &k1, span);
        let mut steps = 0;
        let mut last_rejected = false;

        loop {
            if steps >= self.max_steps {
                return Err(SpectraError::Integrator {
                    x,
                    reason: format!("exceeded {} steps", self.max_steps),
                });
            }
            if h < 1e-14 * x.abs().max(1.0) {
                return Err(SpectraError::Integrator {
                    x,
                    reason: "step size underflow".into(),
                });
            }
            let last = x + h >= x_end;
            if last {
                h = x_end - x;
            }

            let k2 = f(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = f(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(x + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                x + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                x + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(x + h, &y_new);
            steps += 1;

            let e: [f64; N] = std::array::from_fn(|i| {
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            });
            let err = self.err_norm(&e, &y, &y_new);
            if !err.is_finite() {
                h *= 0.2;
                last_rejected = true;
                continue;
            }
            let fac = (0.9 * err.max(1e-12).powf(-0.2)).clamp(0.2, 10.0);

            if err <= 1.0 {
                let x_new = if last { x_end } else { x + h };
                let diff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
                let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - diff[i]);
                let r4: [f64; N] = std::array::from_fn(|i| diff[i] - h * k7[i] - bspl[i]);
                let r5: [f64; N] = std::array::from_fn(|i| {
                    h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                });
                let step = Step {
                    x0: x,
                    x1: x_new,
                    y0: y,
                    y1: y_new,
                    cont: [diff, bspl, r4, r5],
                };
                let control = observe(&step);
                x = x_new;
                y = y_new;
                k1 = k7;
                if control == Control::Stop {
                    return Ok(Outcome {
                        x,
                        y,
                        steps,
                        stopped: true,
                    });
                }
                if last {
                    return Ok(Outcome {
                        x,
                        y,
                        steps,
                        stopped: false,
                    });
                }
                h = if last_rejected { h * fac.min(1.0) } else { h * fac };
                h = h.min(self.h_max);
                last_rejected = false;
            } else {
                h *= fac.min(1.0);
                last_rejected = true;
            }
        }
    }
}
