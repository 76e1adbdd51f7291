//! Bracketed scalar root finding (Brent's method).

use crate::error::{Result, SpectraError};

/// A converged root and the function value there.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Finds a zero of `f` in `[a, b]` given `f(a)` and `f(b)` of opposite sign.
///
/// Stops once the bracket is narrower than `xtol` (plus a few ulps of `x`), or
/// `f` is exactly zero. The returned point is the bracket end with the smaller `|f|`.
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64, max_iter: usize) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(SpectraError::InvalidArgument(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for it in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Root { x: b, fx: fb, iterations: it });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Ok(Root { x: b, fx: fb, iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let r = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-14, 100).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
        assert!(r.iterations < 20);
    }

    #[test]
    fn handles_discontinuous_sign_change() {
        let f = |x: f64| Ok(if x < 0.3 { -1.0 } else { 1.0 });
        let r = brent(f, 0.0, 1.0, -1.0, 1.0, 1e-12, 200).unwrap();
        assert!((r.x - 0.3).abs() < 1e-11);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 2.0, 2.0, 1e-12, 10).is_err());
    }
}
