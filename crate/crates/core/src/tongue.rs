//! Arnold-tongue boundaries of twist families and base rationalization.
//!
//! A lift `G` has integer rotation number `m0` iff `G(x) - x - m0` has a zero,
//! so both tongue boundaries reduce to monotone 1-D root finding on the
//! displacement extrema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ThetaProfile, TranslationField};
use crate::parallel::par_map;
use crate::rational::{convergents, BaseRotation, Rational};
use crate::rotation::{fibred_rotation_number, RotnumEstimate};
use crate::system::QpfSystem;

/// Grid resolution for displacement extrema of non-PL lifts.
pub const EXTREMUM_GRID: usize = 4096;
const MAX_Q: i64 = 1_000_000;

/// A one-parameter family `tau -> G_{alpha,tau}` of circle-homeomorphism lifts.
pub trait LiftFamily: Sync {
    fn eval(&self, alpha: f64, tau: f64, x: f64) -> f64;

    /// Every `x` in `[0,1)` where `G_{alpha,tau}` may fail to be affine, when known.
    fn breakpoints(&self, _alpha: f64, _tau: f64) -> Option<Vec<f64>> {
        None
    }
}

/// Family given by a closure `(alpha, tau, x) -> G`.
pub struct FnFamily<F>(pub F);

impl<F: Fn(f64, f64, f64) -> f64 + Sync> LiftFamily for FnFamily<F> {
    fn eval(&self, alpha: f64, tau: f64, x: f64) -> f64 {
        (self.0)(alpha, tau, x)
    }
}

/// `G_{tau,theta} = R_tau o F_{theta+(q-1)p/q} o ... o R_tau o F_theta` for a rational base.
pub struct StepFamily<'a> {
    pub sys: &'a QpfSystem,
    pub omega: Rational,
}

impl<'a> StepFamily<'a> {
    pub fn new(sys: &'a QpfSystem) -> Result<Self> {
        Ok(StepFamily {
            sys,
            omega: sys.omega.require_rational()?,
        })
    }
}

impl LiftFamily for StepFamily<'_> {
    fn eval(&self, theta: f64, tau: f64, x: f64) -> f64 {
        let mut y = x;
        for k in 0..self.omega.denom() {
            y = self.sys.field.apply(self.sys.base_point(theta, k), y) + tau;
        }
        y
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TongueBoundary {
    pub target: Rational,
    pub alphas: Vec<f64>,
    pub tau_minus: Vec<f64>,
    pub tau_plus: Vec<f64>,
    pub bisection_tol: f64,
}

impl TongueBoundary {
    /// CSV with header `alpha,tau_minus,tau_plus`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,tau_minus,tau_plus\n");
        for i in 0..self.alphas.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                self.alphas[i], self.tau_minus[i], self.tau_plus[i]
            ));
        }
        s
    }
}

/// `(min, max)` of `G(x) - x` over the circle.
pub fn displacement_extrema(fam: &dyn LiftFamily, alpha: f64, tau: f64) -> (f64, f64) {
    let d = |x: f64| fam.eval(alpha, tau, x) - x;
    if let Some(bp) = fam.breakpoints(alpha, tau) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in bp.into_iter().chain([0.0]) {
            let v = d(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        return (lo, hi);
    }
    let n = EXTREMUM_GRID;
    let h = 1.0 / n as f64;
    let (mut imin, mut imax) = (0usize, 0usize);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let v = d(i as f64 * h);
        if v < vmin {
            vmin = v;
            imin = i;
        }
        if v > vmax {
            vmax = v;
            imax = i;
        }
    }
    let lo = golden_refine(&d, imin as f64 * h, h, 1.0).min(vmin);
    let hi = golden_refine(&d, imax as f64 * h, h, -1.0).max(vmax);
    (lo, hi)
}

// minimises sign*d on [c-h, c+h]; returns d at the best point
fn golden_refine(d: &impl Fn(f64) -> f64, c: f64, h: f64, sign: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (c - h, c + h);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = sign * d(x1);
    let mut f2 = sign * d(x2);
    for _ in 0..48 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = sign * d(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = sign * d(x2);
        }
    }
    sign * f1.min(f2)
}

/// Root of a nondecreasing `m` with `m(a) <= 0 < m(b)`, to bracket width `tol`.
///
/// Illinois false position with a squeeze step toward the opposite end,
/// falling back to bisection. Returns the final bracket.
fn monotone_root(m: impl Fn(f64) -> f64, br: Bracket, tol: f64) -> (f64, f64) {
    let Bracket { mut a, mut b, mut fa, mut fb } = br;
    let mut side = 0i8;
    let mut iter = 0;
    while b - a > tol && iter < 400 {
        iter += 1;
        let w = b - a;
        let mut r = if iter % 4 == 0 || fb <= fa {
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        if !(r > a && r < b) {
            r = 0.5 * (a + b);
        }
        let fr = m(r);
        if fr <= 0.0 {
            a = r;
            fa = fr;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
            let s = r + 0.5 * tol;
            if s < b {
                let fs = m(s);
                if fs > 0.0 {
                    b = s;
                    fb = fs;
                } else {
                    a = s;
                    fa = fs;
                }
            }
        } else {
            b = r;
            fb = fr;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
            let s = r - 0.5 * tol;
            if s > a {
                let fs = m(s);
                if fs <= 0.0 {
                    a = s;
                    fa = fs;
                } else {
                    b = s;
                    fb = fs;
                }
            }
        }
        if b - a > 0.75 * w && iter % 4 == 3 {
            let c = 0.5 * (a + b);
            let fc = m(c);
            if fc <= 0.0 {
                a = c;
                fa = fc;
            } else {
                b = c;
                fb = fc;
            }
        }
    }
    (a, b)
}

struct Bracket {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
}

fn bracket(m: &impl Fn(f64) -> f64, guess: Option<f64>) -> Result<Bracket> {
    if let Some(g) = guess {
        let mut w = 1e-4;
        while w < 1.0 {
            let (a, b) = (g - w, g + w);
            let fa = m(a);
            if fa <= 0.0 {
                let fb = m(b);
                if fb > 0.0 {
                    return Ok(Bracket { a, b, fa, fb });
                }
            }
            w *= 16.0;
        }
    }
    let mut w = 1.0;
    while w <= 1024.0 {
        let (fa, fb) = (m(-w), m(w));
        if fa <= 0.0 && fb > 0.0 {
            return Ok(Bracket { a: -w, b: w, fa, fb });
        }
        w *= 2.0;
    }
    Err(Error::TargetUnreachable(
        "no sign change of the displacement extremum in the tau bracket".into(),
    ))
}

fn check_twist(fam: &dyn LiftFamily, alpha: f64, lo: f64, hi: f64) -> Result<()> {
    for j in 0..16 {
        let x = j as f64 / 16.0;
        if !(fam.eval(alpha, hi, x) > fam.eval(alpha, lo, x)) {
            return Err(Error::NotATwistFamily(format!(
                "G(alpha={alpha}, tau={hi}) does not exceed G(alpha={alpha}, tau={lo}) at x={x}"
            )));
        }
    }
    Ok(())
}

/// Tongue boundaries `tau_minus(alpha) <= tau_plus(alpha)` for the integer target `m0`.
///
/// The alpha grid is split into contiguous blocks across workers; inside a
/// block each root is bracketed from its neighbour's value.
pub fn tongue_boundary(fam: &dyn LiftFamily, alphas: &[f64], m0: i64, tol: f64) -> Result<TongueBoundary> {
    let target = m0 as f64;
    let blocks: Vec<&[f64]> = alphas.chunks(alphas.len().div_ceil(crate::parallel::threads()).max(1)).collect();
    let rows = par_map(&blocks, |block| -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(block.len());
        let mut prev: Option<(f64, f64)> = None;
        for &alpha in block.iter() {
            let mmin = |t: f64| displacement_extrema(fam, alpha, t).0 - target;
            let mmax = |t: f64| displacement_extrema(fam, alpha, t).1 - target;
            let br = bracket(&mmin, prev.map(|p| p.1))?;
            if prev.is_none() {
                check_twist(fam, alpha, br.a, br.b)?;
            }
            let (p0, p1) = monotone_root(mmin, br, tol);
            let (n0, n1) = monotone_root(mmax, bracket(&mmax, prev.map(|p| p.0))?, tol);
            let (tm, tp) = (0.5 * (n0 + n1), 0.5 * (p0 + p1));
            prev = Some((tm, tp));
            out.push((tm.min(tp), tp));
        }
        Ok(out)
    });
    let mut tau_minus = Vec::with_capacity(alphas.len());
    let mut tau_plus = Vec::with_capacity(alphas.len());
    for r in rows {
        for (m, p) in r? {
            tau_minus.push(m);
            tau_plus.push(p);
        }
    }
    Ok(TongueBoundary {
        target: Rational::integer(m0),
        alphas: alphas.to_vec(),
        tau_minus,
        tau_plus,
        bisection_tol: tol,
    })
}

/// Tuning knobs of the base rationalization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RationalizeOptions {
    /// Base steps used by every rotation-number estimate.
    pub probe_iterations: u64,
    /// Number of `theta` samples per period `1/q` for the tongue boundaries.
    pub n_theta: usize,
    pub tol: f64,
    /// Where the applied correction sits inside the tongue: 0 is `tau_minus`, 1 is `tau_plus`.
    pub tongue_position: f64,
}

impl Default for RationalizeOptions {
    fn default() -> Self {
        RationalizeOptions {
            probe_iterations: 20_000,
            n_theta: 256,
            tol: 1e-12,
            tongue_position: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RationalizationResult {
    pub p_over_q: Rational,
    pub m0: i64,
    /// Correction added to the lift; `1/q`-periodic.
    pub tau_plus_field: ThetaProfile,
    pub delta: f64,
    pub epsilon_used: f64,
    pub rho_estimate: RotnumEstimate,
    pub boundary: TongueBoundary,
    pub tongue_position: f64,
}

impl RationalizationResult {
    /// The rationalized system `(p/q, Phi + tau(theta))`.
    pub fn system(&self, sys: &QpfSystem) -> QpfSystem {
        QpfSystem::new_unchecked(
            BaseRotation::Rational { value: self.p_over_q },
            TranslationField::corrected(sys.field.clone(), self.tau_plus_field.clone()),
        )
    }

    /// Sup of the applied correction over its knots.
    pub fn correction_size(&self) -> f64 {
        self.tau_plus_field.sup_abs()
    }
}

fn shifted(sys: &QpfSystem, omega: BaseRotation, tau: f64) -> QpfSystem {
    let field = if tau == 0.0 {
        sys.field.clone()
    } else {
        TranslationField::corrected(sys.field.clone(), ThetaProfile::constant(tau))
    };
    QpfSystem::new_unchecked(omega, field)
}

/// Replace the base rotation by a convergent `p/q` and add a `1/q`-periodic
/// correction so that every fibre has rotation number `m0/q`.
pub fn rationalize_base(sys: &QpfSystem, eps: f64, opts: &RationalizeOptions) -> Result<RationalizationResult> {
    let omega = match sys.omega {
        BaseRotation::Irrational { value } => value,
        BaseRotation::Rational { .. } => {
            return Err(Error::Domain("rationalization needs a nominally irrational base".into()))
        }
    };
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0,1), got {eps}")));
    }
    let n = opts.probe_iterations;
    let est = |s: &QpfSystem, th: f64| fibred_rotation_number(s, th, n, 4);
    let e0 = est(sys, 0.0);
    let em = est(&shifted(sys, sys.omega, -eps), 0.0);
    let ep = est(&shifted(sys, sys.omega, eps), 0.0);
    let delta_raw = (e0.value - em.value - e0.half_width - em.half_width)
        .min(ep.value - e0.value - e0.half_width - ep.half_width);
    if delta_raw <= 1e-9 {
        return Err(Error::PossiblyModeLocked { delta: delta_raw });
    }
    // keep the defining inequalities strict
    let delta = delta_raw * (1.0 - 1e-6);

    let thetas = [0.0, 0.25, 0.5, 0.75];
    let mut chosen = None;
    for c in convergents(omega, MAX_Q) {
        let q = c.denom();
        if q < 2 || 1.0 / (q as f64) >= delta / 2.0 {
            continue;
        }
        let base = BaseRotation::Rational { value: c };
        let ok = [(-eps, &em), (0.0, &e0), (eps, &ep)].iter().all(|(tau, irr)| {
            let s = shifted(sys, base, *tau);
            thetas.iter().all(|&th| {
                let r = est(&s, th);
                (r.value - irr.value).abs() + r.half_width + irr.half_width < delta / 2.0
            })
        });
        if ok {
            chosen = Some(c);
            break;
        }
    }
    let pq = chosen.ok_or_else(|| {
        Error::BudgetExceeded(format!("no convergent with q <= {MAX_Q} passes the proximity test"))
    })?;
    let q = pq.denom();
    let m0 = (e0.value * q as f64).round() as i64;

    let rsys = QpfSystem::new_unchecked(BaseRotation::Rational { value: pq }, sys.field.clone());
    let fam = StepFamily::new(&rsys)?;
    let nt = opts.n_theta.max(1);
    let period = 1.0 / q as f64;
    let alphas: Vec<f64> = (0..nt).map(|i| i as f64 * period / nt as f64).collect();
    let boundary = tongue_boundary(&fam, &alphas, m0, opts.tol)?;

    let pos = opts.tongue_position.clamp(0.0, 1.0);
    let per: Vec<f64> = boundary
        .tau_minus
        .iter()
        .zip(&boundary.tau_plus)
        .map(|(a, b)| a + pos * (b - a))
        .collect();
    if let Some(bad) = per.iter().find(|t| t.abs() >= eps) {
        return Err(Error::TargetUnreachable(format!(
            "tongue correction {bad} is not below epsilon {eps}"
        )));
    }
    let total = nt * q as usize;
    let knots: Vec<f64> = (0..total).map(|i| i as f64 / total as f64).collect();
    let values: Vec<f64> = (0..total).map(|i| per[i % nt]).collect();
    Ok(RationalizationResult {
        p_over_q: pq,
        m0,
        tau_plus_field: ThetaProfile::new(knots, values)?,
        delta,
        epsilon_used: eps,
        rho_estimate: e0,
        boundary,
        tongue_position: pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn arnold_family(k: f64) -> FnFamily<impl Fn(f64, f64, f64) -> f64 + Sync> {
        FnFamily(move |_a: f64, t: f64, x: f64| x + t + k / (2.0 * PI) * (2.0 * PI * x).sin())
    }

    #[test]
    fn unforced_arnold_tongue() {
        for k in [0.25, 0.5] {
            let b = tongue_boundary(&arnold_family(k), &[0.0], 0, 1e-10).unwrap();
            let w = k / (2.0 * PI);
            assert!((b.tau_plus[0] - w).abs() < 1e-6);
            assert!((b.tau_minus[0] + w).abs() < 1e-6);
        }
    }

    #[test]
    fn rigid_tongue_is_a_point() {
        let b = tongue_boundary(&arnold_family(0.0), &[0.0, 0.5], 0, 1e-10).unwrap();
        for i in 0..2 {
            assert!(b.tau_minus[i].abs() < 1e-10 && b.tau_plus[i].abs() < 1e-10);
        }
    }

    #[test]
    fn bracket_invariant_holds() {
        let fam = arnold_family(0.5);
        let tol = 1e-8;
        let b = tongue_boundary(&fam, &[0.0], 0, tol).unwrap();
        let tp = b.tau_plus[0];
        assert!(displacement_extrema(&fam, 0.0, tp + tol).0 > 0.0);
        assert!(displacement_extrema(&fam, 0.0, tp - tol).0 <= 0.0);
        let tm = b.tau_minus[0];
        assert!(displacement_extrema(&fam, 0.0, tm + tol).1 > 0.0);
        assert!(displacement_extrema(&fam, 0.0, tm - tol).1 <= 0.0);
    }

    #[test]
    fn decreasing_family_is_rejected() {
        let fam = FnFamily(|_a: f64, t: f64, x: f64| x - t);
        assert!(matches!(
            tongue_boundary(&fam, &[0.0], 0, 1e-8),
            Err(Error::TargetUnreachable(_)) | Err(Error::NotATwistFamily(_))
        ));
    }

    #[test]
    fn rigid_golden_rationalizes_to_21() {
        let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.25)).unwrap();
        let opts = RationalizeOptions {
            n_theta: 8,
            ..Default::default()
        };
        let r = rationalize_base(&sys, 0.1, &opts).unwrap();
        assert_eq!((r.p_over_q.numer(), r.p_over_q.denom(), r.m0), (13, 21, 5));
        let want = 5.0 / 21.0 - 0.25;
        assert!((r.tau_plus_field.eval(0.3) - want).abs() < 1e-9);
        let rs = r.system(&sys);
        for j in 0..5 {
            let th = j as f64 / 5.0;
            assert!((rs.fibre_apply(th, 0.4, 21) - 0.4 - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_epsilon_is_possibly_locked() {
        let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.25)).unwrap();
        assert!(matches!(
            rationalize_base(&sys, 1e-12, &RationalizeOptions::default()),
            Err(Error::PossiblyModeLocked { .. })
        ));
    }

    #[test]
    fn step_family_is_periodic_in_theta() {
        let base = QpfSystem::new(BaseRotation::rational(2, 5).unwrap(), TranslationField::arnold(0.1, 0.6, 0.2)).unwrap();
        let fam = StepFamily::new(&base).unwrap();
        let alphas: Vec<f64> = (0..5).map(|j| 0.03 + j as f64 / 5.0).collect();
        let b = tongue_boundary(&fam, &alphas, 1, 1e-10).unwrap();
        for j in 1..5 {
            assert!((b.tau_plus[j] - b.tau_plus[0]).abs() < 1e-6, "{:?}", b.tau_plus);
            assert!((b.tau_minus[j] - b.tau_minus[0]).abs() < 1e-6);
        }
    }
}
