use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};

/// Angle `alpha` of the separated boundary condition
/// `u cos(alpha) + u' sin(alpha) = 0`, imposed at both `x = 0` and `x = pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAngle(f64);

impl BoundaryAngle {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..PI).contains(&alpha) {
            return Err(SpectraError::InvalidAngle(alpha));
        }
        Ok(BoundaryAngle(alpha))
    }

    /// Dirichlet conditions, `alpha = 0`.
    pub fn dirichlet() -> Self {
        BoundaryAngle(0.0)
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// Prüfer phase of the boundary ray at `x = 0`, in `[0, pi)`.
    pub fn initial_phase(self) -> f64 {
        if self.0 == 0.0 {
            0.0
        } else {
            PI - self.0
        }
    }

    /// Terminal phase of the `k`-th eigenfunction: the `k`-th positive value
    /// congruent to `-alpha` modulo `pi`.
    pub fn target_phase(self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let beta = if self.0 == 0.0 { PI } else { PI - self.0 };
        (k - 1) as f64 * PI + beta
    }

    /// Unit initial data `(u(0), u'(0))` on the boundary ray with `u > 0` just right of 0.
    pub fn initial_ray(self) -> (f64, f64) {
        let t = self.initial_phase();
        (t.sin(), t.cos())
    }

    /// Boundary defect `u cos(alpha) + u' sin(alpha)`.
    pub fn defect(self, u: f64, du: f64) -> f64 {
        u * self.0.cos() + du * self.0.sin()
    }
}

impl Default for BoundaryAngle {
    fn default() -> Self {
        BoundaryAngle::dirichlet()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_range() {
        assert!(BoundaryAngle::new(0.0).is_ok());
        assert!(BoundaryAngle::new(3.0).is_ok());
        assert!(BoundaryAngle::new(PI).is_err());
        assert!(BoundaryAngle::new(-0.1).is_err());
        assert!(BoundaryAngle::new(f64::NAN).is_err());
    }

    #[test]
    fn initial_ray_satisfies_left_condition() {
        for a in [0.0, 0.3, PI / 2.0, 2.5] {
            let b = BoundaryAngle::new(a).unwrap();
            let (u, du) = b.initial_ray();
            assert!(b.defect(u, du).abs() < 1e-15);
            // Pointing into u > 0 for small x > 0.
            assert!(u > 0.0 || (u == 0.0 && du > 0.0));
        }
    }

    #[test]
    fn targets_are_congruent_to_minus_alpha() {
        for a in [0.0, 0.7, 2.0] {
            let b = BoundaryAngle::new(a).unwrap();
            for k in 1..5 {
                let t = b.target_phase(k);
                assert!(t > 0.0);
                let r = (t + a).rem_euclid(PI);
                assert!(r < 1e-12 || (PI - r) < 1e-12);
            }
        }
        assert!((BoundaryAngle::dirichlet().target_phase(3) - 3.0 * PI).abs() < 1e-15);
    }
}
