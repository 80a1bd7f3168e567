//! Rotation numbers of circle-homeomorphism lifts and fibred rotation numbers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::BaseRotation;
use crate::system::QpfSystem;

/// A rotation-number estimate with the elementary `2/n` error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotnumEstimate {
    pub value: f64,
    pub half_width: f64,
    pub iterations: u64,
    pub per_theta_spread: f64,
    /// False when the requested half-width could not be reached within budget.
    pub certified: bool,
}

const RIGID_PROBES: [f64; 7] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 0.137, 0.5, 0.771, 0.9183];

/// Orbit displacement `G^n(x0) - x0` for a degree-one lift, reducing mod 1 as it goes.
pub fn displacement(g: &impl Fn(f64) -> f64, x0: f64, n: u64) -> f64 {
    let mut x = x0;
    let mut wraps = 0.0f64;
    for _ in 0..n {
        let y = g(x);
        let k = y.floor();
        wraps += k;
        x = y - k;
    }
    wraps + x - x0
}

/// Rotation number of a lift `G` of an orientation-preserving circle homeomorphism.
///
/// Constant displacement is detected on a fixed probe set and reported exactly.
/// Otherwise the orbit of 0 is iterated until `2/n <= target_halfwidth` or
/// `n = n_max`; orbits of `1/3` and `2/3` are used as a consistency check.
pub fn rotation_number_circle(g: impl Fn(f64) -> f64, n_max: u64, target_halfwidth: f64) -> RotnumEstimate {
    let d0 = g(0.0);
    let rigid = RIGID_PROBES
        .iter()
        .all(|&x| ((g(x) - x) - d0).abs() <= 4.0 * f64::EPSILON * (1.0 + d0.abs()));
    if rigid {
        return RotnumEstimate {
            value: d0,
            half_width: 0.0,
            iterations: 1,
            per_theta_spread: 0.0,
            certified: true,
        };
    }
    let n_max = n_max.max(1);
    let wanted = if target_halfwidth > 0.0 {
        (2.0 / target_halfwidth).ceil().max(1.0)
    } else {
        f64::INFINITY
    };
    let (n, certified) = if wanted <= n_max as f64 {
        (wanted as u64, true)
    } else {
        (n_max, target_halfwidth <= 0.0)
    };
    let v: Vec<f64> = [0.0, 1.0 / 3.0, 2.0 / 3.0]
        .iter()
        .map(|&x| displacement(&g, x, n) / n as f64)
        .collect();
    let spread = v.iter().fold(0.0f64, |m, &a| m.max((a - v[0]).abs()));
    RotnumEstimate {
        value: v[0],
        half_width: 2.0 / n as f64,
        iterations: n,
        per_theta_spread: spread,
        certified,
    }
}

fn field_is_rigid(sys: &QpfSystem) -> Option<f64> {
    let c = sys.field.phi(0.0, 0.0);
    for &t in &RIGID_PROBES {
        for &x in &RIGID_PROBES {
            if sys.field.phi(t, x) != c {
                return None;
            }
        }
    }
    Some(c)
}

/// Fibred rotation number starting from the fibre over `theta0`.
///
/// For `omega = p/q` this is `(1/q) rho(F^q_theta0)`, with `n_max` counting
/// base steps. For irrational `omega` the orbit of `x = 0` is followed for
/// `n_max` steps from each of `theta_samples` fibres and the spread reported.
pub fn fibred_rotation_number(sys: &QpfSystem, theta0: f64, n_max: u64, theta_samples: usize) -> RotnumEstimate {
    if let Some(c) = field_is_rigid(sys) {
        return RotnumEstimate {
            value: c,
            half_width: 0.0,
            iterations: 1,
            per_theta_spread: 0.0,
            certified: true,
        };
    }
    let samples = theta_samples.max(1);
    match sys.omega {
        BaseRotation::Rational { value: r } => {
            let q = r.denom();
            let n = (n_max / q as u64).max(1);
            let at = |th: f64| {
                let e = rotation_number_circle(|x| sys.fibre_apply(th, x, q), n, 0.0);
                (e.value / q as f64, e.half_width / q as f64, e.iterations)
            };
            let (value, hw, it) = at(theta0);
            let mut spread: f64 = 0.0;
            for j in 1..samples {
                let v = at(theta0 + j as f64 / samples as f64).0;
                spread = spread.max((v - value).abs());
            }
            RotnumEstimate {
                value,
                half_width: hw,
                iterations: it * q as u64,
                per_theta_spread: spread,
                certified: true,
            }
        }
        BaseRotation::Irrational { .. } => {
            let n = n_max.max(1);
            let orbit = |th: f64| -> f64 {
                let mut x = 0.0f64;
                let mut wraps = 0.0f64;
                for k in 0..n as i64 {
                    let y = sys.field.apply(sys.base_point(th, k), x);
                    let f = y.floor();
                    wraps += f;
                    x = y - f;
                }
                (wraps + x) / n as f64
            };
            let value = orbit(theta0);
            let mut spread: f64 = 0.0;
            for j in 1..samples {
                spread = spread.max((orbit(theta0 + j as f64 / samples as f64) - value).abs());
            }
            RotnumEstimate {
                value,
                half_width: (2.0 / n as f64).max(spread),
                iterations: n,
                per_theta_spread: spread,
                certified: true,
            }
        }
    }
}

/// First indices `(m0, n0)` (1-based) from which the sampled finite-time
/// displacement `(F^m_{n,theta}(x) - x)/m` stays within `eps` of the limit's
/// rotation number, for all `m0 <= m <= m_max` and all later systems.
///
/// Sampled diagnostic only.
pub fn uniform_convergence_probe(
    sys_seq: &[QpfSystem],
    limit: &QpfSystem,
    eps: f64,
    m_max: usize,
) -> Result<(usize, usize)> {
    if sys_seq.is_empty() {
        return Err(Error::Domain("empty system sequence".into()));
    }
    let rho = fibred_rotation_number(limit, 0.0, 100_000, 4).value;
    let grid = 6usize;
    // m0 for each system: first m after which all m' <= m_max pass
    let m0_of = |sys: &QpfSystem| -> Option<usize> {
        let mut worst = vec![0.0f64; m_max + 1];
        for a in 0..grid {
            for b in 0..grid {
                let th = a as f64 / grid as f64;
                let x0 = b as f64 / grid as f64;
                let mut x = x0;
                for m in 1..=m_max {
                    x = sys.field.apply(sys.base_point(th, m as i64 - 1), x);
                    let e = ((x - x0) / m as f64 - rho).abs();
                    worst[m] = worst[m].max(e);
                }
            }
        }
        let mut first = None;
        for m in (1..=m_max).rev() {
            if worst[m] < eps {
                first = Some(m);
            } else {
                break;
            }
        }
        first
    };
    let m0s: Vec<Option<usize>> = sys_seq.iter().map(m0_of).collect();
    let mut n0 = None;
    for i in (0..m0s.len()).rev() {
        if m0s[i].is_some() {
            n0 = Some(i);
        } else {
            break;
        }
    }
    let n0 = n0.ok_or_else(|| Error::BudgetExceeded(format!("no uniform bound within m <= {m_max}")))?;
    let m0 = m0s[n0..].iter().map(|m| m.unwrap()).max().unwrap();
    Ok((m0, n0 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TranslationField;
    use crate::rational::{convergents, GOLDEN_MEAN};
    use std::f64::consts::PI;

    #[test]
    fn rigid_is_exact() {
        let e = rotation_number_circle(|x| x + 0.377, 1000, 1e-3);
        assert_eq!(e.value, 0.377);
        assert_eq!(e.half_width, 0.0);
    }

    #[test]
    fn unforced_arnold_fixed_point() {
        let k = 0.5;
        let e = rotation_number_circle(|x| x + k / (2.0 * PI) * (2.0 * PI * x).sin(), 10_000, 0.0);
        assert!(e.value.abs() <= e.half_width);
    }

    #[test]
    fn displacement_bound_between_base_points() {
        let g = |x: f64| x + 0.31 + 0.12 * (2.0 * PI * x).sin();
        let e = rotation_number_circle(g, 5000, 0.0);
        assert!(e.per_theta_spread <= 2.0 / e.iterations as f64);
    }

    #[test]
    fn fibred_constant_and_rational() {
        let s = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.3)).unwrap();
        assert_eq!(fibred_rotation_number(&s, 0.0, 100, 3).value, 0.3);
        let s = QpfSystem::new(BaseRotation::rational(1, 2).unwrap(), TranslationField::constant(0.25)).unwrap();
        assert_eq!(fibred_rotation_number(&s, 0.1, 100, 3).value, 0.25);
    }

    #[test]
    fn forcing_alone_averages_out() {
        // Birkhoff-sum oracle: sum of b sin(2 pi (theta + k omega)) over 1e6 terms
        let b = 0.1;
        let n = 1_000_000u64;
        let mut s = 0.0;
        for k in 0..n {
            s += b * (2.0 * PI * (k as f64 * GOLDEN_MEAN).rem_euclid(1.0)).sin();
        }
        let oracle = s / n as f64;
        let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(0.0, 0.0, b)).unwrap();
        let e = fibred_rotation_number(&sys, 0.0, 200_000, 2);
        assert!(oracle.abs() < 1e-5);
        assert!((e.value - oracle).abs() < 1e-4);
    }

    #[test]
    fn probe_constants_converge_immediately() {
        let seq: Vec<QpfSystem> = convergents(GOLDEN_MEAN, 100)
            .into_iter()
            .map(|r| QpfSystem::new(BaseRotation::Rational { value: r }, TranslationField::constant(0.2)).unwrap())
            .collect();
        let lim = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.2)).unwrap();
        assert_eq!(uniform_convergence_probe(&seq, &lim, 1e-9, 50).unwrap(), (1, 1));
    }

    #[test]
    fn probe_arnold_reports_finite_indices() {
        let field = TranslationField::arnold(0.2, 0.5, 0.1);
        let seq: Vec<QpfSystem> = convergents(GOLDEN_MEAN, 400)
            .into_iter()
            .map(|r| QpfSystem::new(BaseRotation::Rational { value: r }, field.clone()).unwrap())
            .collect();
        let lim = QpfSystem::new(BaseRotation::golden(), field).unwrap();
        let (m0, n0) = uniform_convergence_probe(&seq, &lim, 1e-2, 2000).unwrap();
        assert!(m0 >= 1 && n0 >= 1 && n0 <= seq.len());
        // vacuous tolerance
        assert_eq!(uniform_convergence_probe(&seq, &lim, 10.0, 20).unwrap(), (1, 1));
    }
}
