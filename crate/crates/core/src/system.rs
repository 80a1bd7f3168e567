//! Skew products `(theta, x) -> (theta + omega, F_theta(x))` and their fibre iterates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{shift_base, TranslationField};
use crate::rational::{BaseRotation, Rational};
use crate::triangulation::circle_dist;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QpfSystem {
    pub omega: BaseRotation,
    pub field: TranslationField,
}

impl QpfSystem {
    pub fn new(omega: BaseRotation, field: TranslationField) -> Result<Self> {
        field.validate()?;
        Ok(QpfSystem { omega, field })
    }

    /// Construct without validating the field (caller guarantees admissibility).
    pub fn new_unchecked(omega: BaseRotation, field: TranslationField) -> Self {
        QpfSystem { omega, field }
    }

    pub fn rational(&self) -> Option<Rational> {
        self.omega.as_rational()
    }

    /// `theta + n*omega` mod 1; exact residue arithmetic for rational bases.
    #[inline]
    pub fn base_point(&self, theta: f64, n: i64) -> f64 {
        match self.omega {
            BaseRotation::Rational { value } => shift_base(theta, value, n),
            BaseRotation::Irrational { value } => {
                let s = (n as f64 * value).rem_euclid(1.0);
                (theta + s).rem_euclid(1.0)
            }
        }
    }

    /// `F^n_theta(x)` for any signed `n`.
    pub fn fibre_apply(&self, theta: f64, x: f64, n: i64) -> f64 {
        let mut y = x;
        if n >= 0 {
            for k in 0..n {
                y = self.field.apply(self.base_point(theta, k), y);
            }
        } else {
            for k in 1..=(-n) {
                y = self.field.apply_inv(self.base_point(theta, -k), y);
            }
        }
        y
    }

    /// `F^q_theta(x)` for a rational base `p/q`.
    pub fn fq(&self, theta: f64, x: f64) -> Result<f64> {
        let r = self.omega.require_rational()?;
        Ok(self.fibre_apply(theta, x, r.denom()))
    }

    /// Normalised `q`-fold displacement `F^q_theta(x) - x - m0`.
    pub fn phi_q(&self, theta: f64, x: f64, m0: i64) -> Result<f64> {
        Ok(self.fq(theta, x)? - x - m0 as f64)
    }

    /// Checked inverse identity `F^{-1}_{theta+omega}(F_theta(x)) = x`.
    pub fn check_inverse(&self, theta: f64, x: f64, tol: f64) -> Result<()> {
        let y = self.field.apply(theta, x);
        let back = self.field.apply_inv(theta, y);
        if (back - x).abs() > tol {
            return Err(Error::CompositionDrift { drift: (back - x).abs() });
        }
        Ok(())
    }
}

/// Lift metric `max(d(f,g), d(f^{-1}, g^{-1}))`, sampled on an `n x n` grid.
pub fn lift_distance(a: &QpfSystem, b: &QpfSystem, n: usize) -> f64 {
    let mut d = circle_dist(a.omega.value(), b.omega.value());
    for i in 0..n {
        let th = i as f64 / n as f64;
        let tha = a.base_point(th, -1);
        let thb = b.base_point(th, -1);
        for j in 0..n {
            let x = j as f64 / n as f64;
            d = d.max((a.field.apply(th, x) - b.field.apply(th, x)).abs());
            d = d.max((a.field.apply_inv(tha, x) - b.field.apply_inv(thb, x)).abs());
        }
    }
    d
}
