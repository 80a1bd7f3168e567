//! Certificates that an annulus between two graphs is mapped strictly inside
//! itself by an iterate of a forced circle map.
//!
//! For PWA fields the image of a PL boundary curve is again PL and is computed
//! exactly: every segment is split where its current image crosses a triangle
//! edge before the next step is applied. Gaps between PL graphs are minimised
//! over their merged breakpoints.

use serde::{Deserialize, Serialize};

use crate::curves::{tilt_resolvable, tilt_verticals, ClosedCurve, CurvePair};
use crate::error::{Error, Result};
use crate::field::TranslationField;
use crate::partition::SNAP;
use crate::rational::BaseRotation;
use crate::system::QpfSystem;
use crate::triangulation::PwaField;

pub const CERTIFICATE_VERSION: u32 = 1;
pub const DEFAULT_MIN_MARGIN: f64 = 1e-7;
/// Knot spacing used when the field is not PWA and images are only sampled.
pub const SAMPLE_SPACING: f64 = 1.0 / 4096.0;
/// Tolerance when re-verifying a stored margin.
pub const REVERIFY_TOL: f64 = 1e-12;
/// Smallest shift tried by [`pick_shift`] is `2^-MAX_SHIFT_EXP`.
pub const MAX_SHIFT_EXP: u32 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapFamily {
    /// Image of the lower boundary above the lower boundary.
    Lower,
    /// Image of the upper boundary below the upper boundary.
    Upper,
    /// The band and its integer translates are pairwise disjoint.
    Band,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub family: GapFamily,
    pub min_gap: f64,
    /// Lifted abscissa where the minimum is attained.
    pub theta: f64,
}

/// Raw result of pushing both boundaries forward.
#[derive(Clone, Debug)]
pub struct AnnulusCheck {
    pub margin: f64,
    pub checks: Vec<GapCheck>,
    pub exact: bool,
    pub sigma: f64,
    /// Integer subtracted from the fibre lift of the iterate.
    pub x_lift: i64,
    pub image_plus: ClosedCurve,
    pub image_minus: ClosedCurve,
}

impl AnnulusCheck {
    fn binding(&self) -> GapCheck {
        *self
            .checks
            .iter()
            .filter(|c| c.family != GapFamily::Band)
            .min_by(|a, b| a.min_gap.total_cmp(&b.min_gap))
            .unwrap()
    }
}

/// `omega' = p/q + s/2` with `s = 2^-shift_exp`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedBase {
    pub p: i64,
    pub q: i64,
    pub shift_exp: u32,
    pub s: f64,
    pub omega_prime: f64,
}

impl ShiftedBase {
    pub fn new(p: i64, q: i64, shift_exp: u32) -> Self {
        let s = (-(shift_exp as f64)).exp2();
        ShiftedBase {
            p,
            q,
            shift_exp,
            s,
            omega_prime: p as f64 / q as f64 + s / 2.0,
        }
    }
}

/// `(x_lift + (m/k) sigma) / iterate`: the band drifts by `m/k` per unit of
/// base advance while the fibre lift advances by `x_lift` per iterate block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimedRotation {
    pub x_lift: i64,
    pub iterate: i64,
    pub k: i64,
    pub m: i64,
    pub sigma: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LockCertificate {
    pub version: u32,
    pub system: QpfSystem,
    pub iterate: i64,
    /// Integer subtracted from `iterate * omega` in the base lift.
    pub theta_lift: i64,
    /// Integer subtracted from the fibre lift of the iterate.
    pub x_lift: i64,
    pub gamma_plus: ClosedCurve,
    pub gamma_minus: ClosedCurve,
    pub margin: f64,
    pub min_margin: f64,
    /// False when the field is not PWA and images were sampled.
    pub exact: bool,
    pub claimed_rotation: ClaimedRotation,
    pub check_log: Vec<GapCheck>,
    #[serde(default)]
    pub shift: Option<ShiftedBase>,
    /// Lift distance from the input system, when produced by the pipeline.
    #[serde(default)]
    pub perturbation: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl LockCertificate {
    /// Recompute every gap from the stored system and curves.
    pub fn reverify(&self) -> Result<AnnulusCheck> {
        if self.version != CERTIFICATE_VERSION {
            return Err(Error::InvalidAnnulus(format!("unsupported certificate version {}", self.version)));
        }
        let chk = check_annulus(
            &self.system,
            self.iterate,
            self.theta_lift,
            Some(self.x_lift),
            &self.gamma_plus,
            &self.gamma_minus,
        )?;
        if (chk.margin - self.margin).abs() > REVERIFY_TOL {
            return Err(Error::InvalidAnnulus(format!(
                "stored margin {:e} but recomputed {:e}",
                self.margin, chk.margin
            )));
        }
        if chk.margin <= self.min_margin {
            let b = chk.binding();
            return Err(Error::NotCertified {
                family: format!("{:?}", b.family).to_lowercase(),
                gap: b.min_gap,
                theta: b.theta,
            });
        }
        Ok(chk)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Base displacement `iterate * omega - theta_lift`, exact for rational bases.
fn sigma_of(sys: &QpfSystem, iterate: i64, theta_lift: i64) -> f64 {
    match sys.omega {
        BaseRotation::Rational { value } => {
            let num = iterate as i128 * value.numer() as i128 - theta_lift as i128 * value.denom() as i128;
            num as f64 / value.denom() as f64
        }
        BaseRotation::Irrational { value } => iterate as f64 * value - theta_lift as f64,
    }
}

/// One step of the skew product on a PL curve through a PWA field, splitting
/// segments at triangle edges so that the result is the exact image.
fn step_pwa(field: &PwaField, offset: f64, w: f64, pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let tri = &field.tri;
    let mut out = Vec::with_capacity(pts.len() + pts.len() / 4);
    let mut ivs: Vec<(f64, f64, usize, [f64; 2])> = Vec::new();
    let mut bps: Vec<f64> = Vec::new();
    let map = |z: [f64; 2], t: usize, sh: [f64; 2]| {
        let k = field.coeffs(t);
        [z[0] + w, z[1] + k[0] + k[1] * (z[0] - sh[0]) + k[2] * (z[1] - sh[1]) + offset]
    };
    let map_any = |z: [f64; 2]| [z[0] + w, z[1] + field.eval(z[0], z[1]) + offset];
    let n = pts.len();
    for i in 0..n.saturating_sub(1) {
        let (p, q) = (pts[i], pts[i + 1]);
        let d = [q[0] - p[0], q[1] - p[1]];
        if d[0] == 0.0 && d[1] == 0.0 {
            continue;
        }
        ivs.clear();
        let (tlo, thi) = (p[0].min(q[0]), p[0].max(q[0]));
        let (xlo, xhi) = (p[1].min(q[1]), p[1].max(q[1]));
        for (t, sh) in tri.candidates(tlo, thi, xlo, xhi) {
            let tp = &tri.triangles[t].pts;
            let v = [
                [tp[0][0] + sh[0], tp[0][1] + sh[1]],
                [tp[1][0] + sh[0], tp[1][1] + sh[1]],
                [tp[2][0] + sh[0], tp[2][1] + sh[1]],
            ];
            let area = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
            let o = area.signum();
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                let ee = [b[0] - a[0], b[1] - a[1]];
                let tol = SNAP * ee[0].hypot(ee[1]);
                let h0 = o * (ee[0] * (p[1] - a[1]) - ee[1] * (p[0] - a[0]));
                let h1 = o * (ee[0] * (q[1] - a[1]) - ee[1] * (q[0] - a[0]));
                let dh = h1 - h0;
                if h0.min(h1) >= -tol || dh.abs() <= f64::EPSILON * (h0.abs() + h1.abs()) {
                    if h0.max(h1) < -tol {
                        hi = -1.0;
                    }
                    continue;
                }
                // exact crossing; the tolerance only decides inclusion
                let ts = -h0 / dh;
                if dh > 0.0 {
                    lo = lo.max(ts);
                } else {
                    hi = hi.min(ts);
                }
            }
            if hi - lo > 1e-13 {
                ivs.push((lo, hi, t, sh));
            }
        }
        let at = |u: f64| [p[0] + u * d[0], p[1] + u * d[1]];
        let find = |u: f64| ivs.iter().find(|iv| iv.0 <= u && u <= iv.1);
        bps.clear();
        bps.push(0.0);
        for iv in &ivs {
            for u in [iv.0, iv.1] {
                if u > 0.0 && u < 1.0 {
                    bps.push(u);
                }
            }
        }
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|b, a| *b - *a < 1e-12);
        bps.push(1.0);
        for j in 0..bps.len() - 1 {
            let (ua, ub) = (bps[j], bps[j + 1]);
            let iv = find(0.5 * (ua + ub));
            let img = |u: f64| match iv {
                Some(&(_, _, t, sh)) => map(at(u), t, sh),
                None => map_any(at(u)),
            };
            out.push(img(ua));
            if i == n - 2 && j == bps.len() - 2 {
                out.push(img(1.0));
            }
        }
    }
    if n == 1 {
        out.push(map_any(pts[0]));
    }
    out
}

fn refine(knots: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    let mut out = vec![knots[0]];
    for w in knots.windows(2) {
        let n = ((w[1][0] - w[0][0]) / h).ceil().max(1.0) as usize;
        for i in 1..=n {
            let u = i as f64 / n as f64;
            out.push([w[0][0] + u * (w[1][0] - w[0][0]), w[0][1] + u * (w[1][1] - w[0][1])]);
        }
    }
    out
}

/// Image of a closed graph under the lifted `iterate`-th power, with fibre lift 0.
fn image_curve(sys: &QpfSystem, iterate: i64, sigma: f64, c: &ClosedCurve) -> (ClosedCurve, bool) {
    let w = sys.omega.value();
    let (mut pts, exact) = match &sys.field {
        TranslationField::Pwa { field, lift_offset } => {
            let mut pts = c.knots.clone();
            for _ in 0..iterate {
                pts = step_pwa(field, *lift_offset as f64, w, &pts);
            }
            (pts, true)
        }
        f => {
            let mut pts = refine(&c.knots, SAMPLE_SPACING);
            for _ in 0..iterate {
                for p in pts.iter_mut() {
                    *p = [p[0] + w, f.apply(p[0], p[1])];
                }
            }
            (pts, false)
        }
    };
    let back = iterate as f64 * w - sigma;
    for p in pts.iter_mut() {
        p[0] -= back;
    }
    // images of a graph stay graphs; drop knots that collapsed in rounding
    let mut knots: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for p in pts {
        if knots.last().is_none_or(|l: &[f64; 2]| p[0] > l[0]) {
            knots.push(p);
        }
    }
    let last = knots.len() - 1;
    knots[last][0] = knots[0][0] + c.k as f64;
    (ClosedCurve { knots, k: c.k, m: c.m }, exact)
}

fn merged(a: &ClosedCurve, b: &ClosedCurve, lo: f64, hi: f64) -> Vec<f64> {
    let mut ts = a.breakpoints(lo, hi);
    ts.extend(b.breakpoints(lo, hi));
    ts.push(lo);
    ts.push(hi);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Smallest value of `upper - lower` over one period.
fn min_gap(family: GapFamily, upper: &ClosedCurve, lower: &ClosedCurve, lo: f64, k: i64) -> GapCheck {
    let mut best = GapCheck {
        family,
        min_gap: f64::INFINITY,
        theta: lo,
    };
    for t in merged(upper, lower, lo, lo + k as f64) {
        let g = upper.eval(t) - lower.eval(t);
        if g < best.min_gap {
            best.min_gap = g;
            best.theta = t;
        }
    }
    best
}

/// Separation between the band and its integer translates.
fn band_check(gp: &ClosedCurve, gm: &ClosedCurve) -> GapCheck {
    let k = gp.k;
    let a = gp.theta0();
    let mut best = GapCheck {
        family: GapFamily::Band,
        min_gap: f64::INFINITY,
        theta: a,
    };
    for j in 0..k {
        let jf = j as f64;
        let mut ts = merged(gp, gm, a, a + k as f64);
        ts.extend(merged(gp, gm, a - jf, a + k as f64 - jf).into_iter().map(|t| t + jf));
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut level: Option<f64> = None;
        for t in ts {
            let (lo, hi) = (gp.eval(t), gm.eval(t));
            let (lo_o, hi_o) = (gp.eval(t - jf), gm.eval(t - jf));
            // translate n sits below, translate n + 1 above
            let (n, g) = if j == 0 {
                (0.0, (hi - lo).min(lo + 1.0 - hi))
            } else {
                let n = (lo - hi_o).floor();
                (n, (lo - (hi_o + n)).min(lo_o + n + 1.0 - hi).min(hi - lo))
            };
            let g = if level.is_some_and(|l| l != n) { -1.0 } else { g };
            level = Some(n);
            if g < best.min_gap {
                best.min_gap = g;
                best.theta = t;
            }
        }
    }
    best
}

/// Push both boundaries forward and measure all gaps. `x_lift = None` picks
/// the integer closest to the mean displacement at the first knot.
pub fn check_annulus(
    sys: &QpfSystem,
    iterate: i64,
    theta_lift: i64,
    x_lift: Option<i64>,
    gamma_plus: &ClosedCurve,
    gamma_minus: &ClosedCurve,
) -> Result<AnnulusCheck> {
    if iterate < 1 {
        return Err(Error::Domain(format!("iterate must be >= 1, got {iterate}")));
    }
    if (gamma_plus.k, gamma_plus.m) != (gamma_minus.k, gamma_minus.m) || gamma_plus.k < 1 {
        return Err(Error::InvalidAnnulus(format!(
            "homotopy classes ({}, {}) and ({}, {}) differ",
            gamma_plus.k, gamma_plus.m, gamma_minus.k, gamma_minus.m
        )));
    }
    if !gamma_plus.is_graph() || !gamma_minus.is_graph() {
        return Err(Error::InvalidAnnulus("boundary curves must be graphs".into()));
    }
    let band = band_check(gamma_plus, gamma_minus);
    if !(band.min_gap > 0.0) {
        return Err(Error::InvalidAnnulus(format!(
            "band overlaps a translate near theta = {} (gap {:e})",
            band.theta, band.min_gap
        )));
    }
    let sigma = sigma_of(sys, iterate, theta_lift);
    let (mut ip, exact) = image_curve(sys, iterate, sigma, gamma_plus);
    let (mut im, _) = image_curve(sys, iterate, sigma, gamma_minus);
    let a = gamma_plus.theta0();
    let n = x_lift.unwrap_or_else(|| {
        let d = 0.5 * (ip.eval(a) - gamma_plus.eval(a) + im.eval(a) - gamma_minus.eval(a));
        d.round() as i64
    });
    for p in ip.knots.iter_mut().chain(im.knots.iter_mut()) {
        p[1] -= n as f64;
    }
    let lower = min_gap(GapFamily::Lower, &ip, gamma_plus, a, gamma_plus.k);
    let upper = min_gap(GapFamily::Upper, gamma_minus, &im, a, gamma_plus.k);
    Ok(AnnulusCheck {
        margin: lower.min_gap.min(upper.min_gap),
        checks: vec![lower, upper, band],
        exact,
        sigma,
        x_lift: n,
        image_plus: ip,
        image_minus: im,
    })
}

fn certificate_from(
    sys: &QpfSystem,
    iterate: i64,
    theta_lift: i64,
    gamma_plus: &ClosedCurve,
    gamma_minus: &ClosedCurve,
    chk: AnnulusCheck,
    min_margin: f64,
) -> Result<LockCertificate> {
    if !(chk.margin > min_margin) {
        let b = chk.binding();
        return Err(Error::NotCertified {
            family: format!("{:?}", b.family).to_lowercase(),
            gap: b.min_gap,
            theta: b.theta,
        });
    }
    let (k, m) = (gamma_plus.k, gamma_plus.m);
    let x_lift = chk.x_lift;
    let value = (x_lift as f64 + m as f64 / k as f64 * chk.sigma) / iterate as f64;
    Ok(LockCertificate {
        version: CERTIFICATE_VERSION,
        system: sys.clone(),
        iterate,
        theta_lift,
        x_lift,
        gamma_plus: gamma_plus.clone(),
        gamma_minus: gamma_minus.clone(),
        margin: chk.margin,
        min_margin,
        exact: chk.exact,
        claimed_rotation: ClaimedRotation {
            x_lift,
            iterate,
            k,
            m,
            sigma: chk.sigma,
            value,
        },
        check_log: chk.checks,
        shift: None,
        perturbation: None,
        seed: None,
    })
}

/// Certify that the annulus from `gamma_plus` up to `gamma_minus` is mapped
/// strictly inside itself by the `p`-th iterate (nearest-rotation lifts).
pub fn certify_annulus(
    sys: &QpfSystem,
    p: i64,
    gamma_plus: &ClosedCurve,
    gamma_minus: &ClosedCurve,
    min_margin: f64,
) -> Result<LockCertificate> {
    let theta_lift = match sys.omega {
        BaseRotation::Rational { value } => {
            let num = p as i128 * value.numer() as i128;
            let d = value.denom() as i128;
            ((2 * num + d).div_euclid(2 * d)) as i64
        }
        BaseRotation::Irrational { value } => (p as f64 * value).round() as i64,
    };
    let chk = check_annulus(sys, p, theta_lift, None, gamma_plus, gamma_minus)?;
    certificate_from(sys, p, theta_lift, gamma_plus, gamma_minus, chk, min_margin)
}

/// Outcome of [`pick_shift`].
#[derive(Clone, Debug)]
pub struct ShiftPick {
    pub shift: ShiftedBase,
    pub pair: CurvePair,
    pub certificate: LockCertificate,
    /// Shifts tried before success.
    pub attempts: usize,
}

/// Try one shift `s = 2^-shift_exp` for a pair built from the rational system
/// `sys` (base `p/q`, fibre lift `m0`).
pub fn certify_shift(
    sys: &QpfSystem,
    m0: i64,
    pair: &CurvePair,
    shift_exp: u32,
    min_margin: f64,
) -> Result<ShiftPick> {
    let r = sys.omega.require_rational()?;
    let (p, q) = (r.numer(), r.denom());
    let shift = ShiftedBase::new(p, q, shift_exp);
    let infeasible = |what: String| Error::CertificationInfeasible(format!("s = 2^-{shift_exp}: {what}"));
    let tilted = tilt_verticals(pair, shift.s, q).map_err(|e| infeasible(e.to_string()))?;
    let shifted = QpfSystem::new_unchecked(BaseRotation::irrational(shift.omega_prime), sys.field.clone());
    let chk = check_annulus(&shifted, q, p, Some(m0), &tilted.gamma_plus, &tilted.gamma_minus)
        .map_err(|e| infeasible(e.to_string()))?;
    let mut cert = certificate_from(
        &shifted,
        q,
        p,
        &tilted.gamma_plus,
        &tilted.gamma_minus,
        chk,
        min_margin,
    )
    .map_err(|e| infeasible(e.to_string()))?;
    cert.shift = Some(shift);
    Ok(ShiftPick {
        shift,
        pair: tilted,
        certificate: cert,
        attempts: 1,
    })
}

/// Exponent step between shifts tried by [`pick_shift`].
pub const SHIFT_STRIDE: u32 = 4;

/// Shrink `s = 2^-j` from a clearance-based start, `SHIFT_STRIDE` exponents at
/// a time, until the shifted system certifies.
pub fn pick_shift(sys: &QpfSystem, m0: i64, pair: &CurvePair, min_margin: f64) -> Result<ShiftPick> {
    let q = sys.omega.require_rational()?.denom();
    let c = pair.clearance.min(pair.epsilon).max(f64::MIN_POSITIVE);
    let j0 = ((q as f64 / c).log2().ceil().max(1.0) as u32).min(MAX_SHIFT_EXP);
    let mut last = None;
    let mut attempts = 0;
    for j in (j0..=MAX_SHIFT_EXP).step_by(SHIFT_STRIDE as usize) {
        if !pair.verticals.is_empty() && !tilt_resolvable(pair, 0.5f64.powi(j as i32), q) {
            break;
        }
        attempts += 1;
        match certify_shift(sys, m0, pair, j, min_margin) {
            Ok(mut pick) => {
                pick.attempts = attempts;
                return Ok(pick);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(Error::CertificationInfeasible(format!(
        "no shift from 2^-{j0} down to float resolution certifies; last failure: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Boundaries `g -+ half_width` around the forward image of the circle `x = x0`
/// after `n_iter` steps, sampled at `n_knots` abscissae.
pub fn attracting_annulus(
    sys: &QpfSystem,
    x0: f64,
    n_knots: usize,
    n_iter: i64,
    half_width: f64,
) -> Result<(ClosedCurve, ClosedCurve)> {
    if n_knots < 2 || !(half_width > 0.0 && half_width < 0.5) {
        return Err(Error::Domain("need n_knots >= 2 and half_width in (0, 1/2)".into()));
    }
    let mut g: Vec<f64> = (0..n_knots)
        .map(|i| {
            let th = i as f64 / n_knots as f64;
            sys.fibre_apply(sys.base_point(th, -n_iter), x0, n_iter)
        })
        .collect();
    let shift = g[0].floor();
    for v in g.iter_mut() {
        *v -= shift;
    }
    g.push(g[0]);
    let knots = |d: f64| {
        g.iter()
            .enumerate()
            .map(|(i, &v)| [i as f64 / n_knots as f64, v + d])
            .collect::<Vec<_>>()
    };
    Ok((
        ClosedCurve {
            knots: knots(-half_width),
            k: 1,
            m: 0,
        },
        ClosedCurve {
            knots: knots(half_width),
            k: 1,
            m: 0,
        },
    ))
}
