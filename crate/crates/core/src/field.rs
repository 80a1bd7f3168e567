//! Translation fields: lifts `Phi` of fibre displacements `x -> x + Phi(theta, x)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::triangulation::PwaField;

const INVERSE_TOL: f64 = 1e-14;

/// Closed-form families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `tau + (k/2pi) sin(2pi x) + b sin(2pi theta)`.
    Arnold { tau: f64, k: f64, b: f64 },
}

impl ClosedForm {
    pub fn arnold(tau: f64, k: f64, b: f64) -> Self {
        ClosedForm::Arnold { tau, k, b }
    }

    pub fn constant(c: f64) -> Self {
        ClosedForm::Arnold { tau: c, k: 0.0, b: 0.0 }
    }

    #[inline]
    pub fn eval(&self, theta: f64, x: f64) -> f64 {
        match *self {
            ClosedForm::Arnold { tau, k, b } => {
                let mut v = tau;
                if k != 0.0 {
                    v += k / (2.0 * PI) * (2.0 * PI * x).sin();
                }
                if b != 0.0 {
                    v += b * (2.0 * PI * theta).sin();
                }
                v
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ClosedForm::Arnold { tau, k, b } => {
                let r = k.abs() / (2.0 * PI) + b.abs();
                (tau - r, tau + r)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClosedForm::Arnold { tau, k, b } => {
                if !(tau.is_finite() && k.is_finite() && b.is_finite()) {
                    return Err(Error::RepresentationInvalid("non-finite parameter".into()));
                }
                if k.abs() >= 1.0 {
                    return Err(Error::RepresentationInvalid(format!(
                        "Arnold family needs |K| < 1, got {k}"
                    )));
                }
                Ok(())
            }
        }
    }

    fn is_x_independent(&self) -> bool {
        matches!(*self, ClosedForm::Arnold { k, .. } if k == 0.0)
    }
}

/// A periodic piecewise-linear function of `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaProfile {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl ThetaProfile {
    /// Knots are reduced mod 1 and sorted; duplicate knots are rejected.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.is_empty() {
            return Err(Error::RepresentationInvalid("profile needs matching non-empty knots/values".into()));
        }
        let mut kv: Vec<(f64, f64)> = knots
            .into_iter()
            .map(|k| k.rem_euclid(1.0))
            .zip(values)
            .collect();
        kv.sort_by(|a, b| a.0.total_cmp(&b.0));
        if kv.windows(2).any(|w| w[1].0 - w[0].0 <= 0.0) {
            return Err(Error::RepresentationInvalid("repeated profile knot".into()));
        }
        if kv.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::RepresentationInvalid("non-finite profile value".into()));
        }
        Ok(ThetaProfile {
            knots: kv.iter().map(|p| p.0).collect(),
            values: kv.iter().map(|p| p.1).collect(),
        })
    }

    pub fn constant(c: f64) -> Self {
        ThetaProfile {
            knots: vec![0.0],
            values: vec![c],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Trapezoid of height `h`: zero outside `[start, start+len]`, linear ramps
    /// of width `ramp` at both ends, `h` in between.
    pub fn trapezoid(start: f64, len: f64, ramp: f64, h: f64) -> Result<Self> {
        if !(len > 0.0 && len < 1.0 && ramp > 0.0 && 2.0 * ramp <= len) {
            return Err(Error::Domain(format!("bad trapezoid len={len} ramp={ramp}")));
        }
        let mut knots = vec![start, start + ramp];
        let mut values = vec![0.0, h];
        if 2.0 * ramp < len {
            knots.push(start + len - ramp);
            values.push(h);
        }
        knots.push(start + len);
        values.push(0.0);
        Self::new(knots, values)
    }

    /// PL interpolant of samples taken at the given (distinct mod 1) abscissae.
    pub fn from_samples(thetas: &[f64], values: &[f64]) -> Result<Self> {
        Self::new(thetas.to_vec(), values.to_vec())
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let n = self.knots.len();
        if n == 1 {
            return self.values[0];
        }
        let t = theta.rem_euclid(1.0);
        let k = self.knots.partition_point(|&k| k <= t);
        let (a, b, va, vb) = if k == 0 || k == n {
            let (a, va) = (self.knots[n - 1], self.values[n - 1]);
            let (b, vb) = (self.knots[0] + 1.0, self.values[0]);
            (a, b, va, vb)
        } else {
            (self.knots[k - 1], self.knots[k], self.values[k - 1], self.values[k])
        };
        let tt = if k == 0 { t + 1.0 } else { t };
        va + (vb - va) * (tt - a) / (b - a)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Tent train in `x` with `lobes` humps per unit, values in `[0, 1]`.
#[inline]
pub fn tent(x: f64, lobes: u32) -> f64 {
    let u = (x * lobes as f64).rem_euclid(1.0);
    1.0 - (2.0 * u - 1.0).abs()
}

/// What the `q`-fold fibre maps should become on the surgery interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurgeryTarget {
    /// `Psi = Phi^q + c(theta)`.
    Shift { profile: ThetaProfile },
    /// `Psi = Phi^q + w(theta) * amplitude * tent(x) - offset(theta)`.
    Bump {
        weight: ThetaProfile,
        amplitude: f64,
        lobes: u32,
        offset: ThetaProfile,
    },
}

/// Interval surgery: on `[start, start+len)` the new fibre map is
/// `(F^{q-1}_{theta+omega})^{-1} o G_theta`, with `G_theta(x) = x + Psi(theta, x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Surgery {
    pub base: TranslationField,
    pub omega: Rational,
    pub start: f64,
    pub len: f64,
    pub target: SurgeryTarget,
}

impl Surgery {
    #[inline]
    pub fn contains(&self, theta: f64) -> bool {
        (theta - self.start).rem_euclid(1.0) < self.len
    }

    #[inline]
    fn base_point(&self, theta: f64, k: i64) -> f64 {
        shift_base(theta, self.omega, k)
    }

    /// Target q-fold lift `G_theta(x)`.
    pub fn target_map(&self, theta: f64, x: f64) -> f64 {
        let fq = self.base_q(theta, x);
        match &self.target {
            SurgeryTarget::Shift { profile } => fq + profile.eval(theta),
            SurgeryTarget::Bump {
                weight,
                amplitude,
                lobes,
                offset,
            } => fq + weight.eval(theta) * amplitude * tent(x, *lobes) - offset.eval(theta),
        }
    }

    fn target_inverse(&self, theta: f64, y: f64) -> f64 {
        match &self.target {
            SurgeryTarget::Shift { profile } => self.base_q_inv(theta, y - profile.eval(theta)),
            SurgeryTarget::Bump { .. } => monotone_inverse(|x| self.target_map(theta, x), y),
        }
    }

    fn base_q(&self, theta: f64, x: f64) -> f64 {
        let q = self.omega.denom();
        let mut y = x;
        for k in 0..q {
            y = self.base.apply(self.base_point(theta, k), y);
        }
        y
    }

    fn base_q_inv(&self, theta: f64, y: f64) -> f64 {
        let q = self.omega.denom();
        let mut x = y;
        for k in (0..q).rev() {
            x = self.base.apply_inv(self.base_point(theta, k), x);
        }
        x
    }

    fn apply(&self, theta: f64, x: f64) -> f64 {
        if !self.contains(theta) {
            return self.base.apply(theta, x);
        }
        let q = self.omega.denom();
        let mut z = self.target_map(theta, x);
        for k in (1..q).rev() {
            z = self.base.apply_inv(self.base_point(theta, k), z);
        }
        z
    }

    fn apply_inv(&self, theta: f64, y: f64) -> f64 {
        if !self.contains(theta) {
            return self.base.apply_inv(theta, y);
        }
        let q = self.omega.denom();
        let mut z = y;
        for k in 1..q {
            z = self.base.apply(self.base_point(theta, k), z);
        }
        self.target_inverse(theta, z)
    }
}

/// `theta + k*omega` reduced mod 1, with the rational step taken exactly.
#[inline]
pub fn shift_base(theta: f64, omega: Rational, k: i64) -> f64 {
    let q = omega.denom();
    let r = (k as i128 * omega.numer() as i128).rem_euclid(q as i128) as f64;
    (theta + r / q as f64).rem_euclid(1.0)
}

/// Inverse of an increasing map `g` with `g(x) - x` bounded, by bracketing and bisection.
pub fn monotone_inverse(g: impl Fn(f64) -> f64, y: f64) -> f64 {
    let mut w = 1.0;
    let (mut a, mut b) = (y - w, y + w);
    while g(a) > y {
        w *= 2.0;
        a = y - w;
    }
    w = 1.0;
    while g(b) < y {
        w *= 2.0;
        b = y + w;
    }
    while b - a > INVERSE_TOL * (1.0 + y.abs()) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// An element of the space of admissible translation fields with a chosen lift.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranslationField {
    ClosedForm {
        #[serde(flatten)]
        family: ClosedForm,
        #[serde(default)]
        lift_offset: i64,
    },
    Pwa {
        #[serde(flatten)]
        field: Arc<PwaField>,
        #[serde(default)]
        lift_offset: i64,
    },
    /// `base + shift(theta)`.
    Corrected {
        base: Arc<TranslationField>,
        shift: ThetaProfile,
    },
    Surgered {
        surgery: Arc<Surgery>,
    },
    /// `(1-t) Phi_a + t (Phi_b + shift)`, for pairs with no common compact form.
    Blend {
        a: Arc<TranslationField>,
        b: Arc<TranslationField>,
        t: f64,
        #[serde(default)]
        shift: i64,
    },
}

impl From<ClosedForm> for TranslationField {
    fn from(family: ClosedForm) -> Self {
        TranslationField::ClosedForm {
            family,
            lift_offset: 0,
        }
    }
}

impl From<PwaField> for TranslationField {
    fn from(f: PwaField) -> Self {
        TranslationField::Pwa {
            field: Arc::new(f),
            lift_offset: 0,
        }
    }
}

impl TranslationField {
    pub fn constant(c: f64) -> Self {
        ClosedForm::constant(c).into()
    }

    pub fn arnold(tau: f64, k: f64, b: f64) -> Self {
        ClosedForm::arnold(tau, k, b).into()
    }

    pub fn corrected(base: TranslationField, shift: ThetaProfile) -> Self {
        TranslationField::Corrected {
            base: Arc::new(base),
            shift,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TranslationField::ClosedForm { .. } => "closed_form",
            TranslationField::Pwa { .. } => "pwa",
            TranslationField::Corrected { .. } => "corrected",
            TranslationField::Surgered { .. } => "surgered",
            TranslationField::Blend { .. } => "blend",
        }
    }

    pub fn as_pwa(&self) -> Option<&PwaField> {
        match self {
            TranslationField::Pwa { field, .. } => Some(field),
            _ => None,
        }
    }

    /// The lift `Phi(theta, x)`.
    pub fn phi(&self, theta: f64, x: f64) -> f64 {
        match self {
            TranslationField::ClosedForm { family, lift_offset } => {
                family.eval(theta, x) + *lift_offset as f64
            }
            TranslationField::Pwa { field, lift_offset } => field.eval(theta, x) + *lift_offset as f64,
            TranslationField::Corrected { base, shift } => base.phi(theta, x) + shift.eval(theta),
            TranslationField::Surgered { surgery } => surgery.apply(theta, x) - x,
            TranslationField::Blend { a, b, t, shift } => {
                (1.0 - t) * a.phi(theta, x) + t * (b.phi(theta, x) + *shift as f64)
            }
        }
    }

    /// The fibre map lift `F_theta(x) = x + Phi(theta, x)`.
    #[inline]
    pub fn apply(&self, theta: f64, x: f64) -> f64 {
        match self {
            TranslationField::Surgered { surgery } => surgery.apply(theta, x),
            _ => x + self.phi(theta, x),
        }
    }

    /// Inverse of the fibre map over `theta`.
    pub fn apply_inv(&self, theta: f64, y: f64) -> f64 {
        match self {
            TranslationField::ClosedForm { family, lift_offset } => {
                let yy = y - *lift_offset as f64;
                if family.is_x_independent() {
                    return yy - family.eval(theta, 0.0);
                }
                let (lo, hi) = family.bounds();
                bisect_increasing(|x| x + family.eval(theta, x), yy, yy - hi, yy - lo)
            }
            TranslationField::Pwa { field, lift_offset } => {
                field.fibre_inverse(theta, y - *lift_offset as f64)
            }
            TranslationField::Corrected { base, shift } => base.apply_inv(theta, y - shift.eval(theta)),
            TranslationField::Surgered { surgery } => surgery.apply_inv(theta, y),
            TranslationField::Blend { .. } => {
                let (lo, hi) = self.bounds();
                bisect_increasing(|x| self.apply(theta, x), y, y - hi, y - lo)
            }
        }
    }

    /// Crude bounds on `Phi`; exact for closed forms and PWA fields.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            TranslationField::ClosedForm { family, lift_offset } => {
                let (lo, hi) = family.bounds();
                (lo + *lift_offset as f64, hi + *lift_offset as f64)
            }
            TranslationField::Pwa { field, lift_offset } => {
                let (lo, hi) = field.value_range();
                (lo + *lift_offset as f64, hi + *lift_offset as f64)
            }
            TranslationField::Corrected { base, shift } => {
                let (lo, hi) = base.bounds();
                let (a, b) = shift.range();
                (lo + a, hi + b)
            }
            TranslationField::Surgered { .. } => self.sampled_bounds(64),
            TranslationField::Blend { a, b, t, shift } => {
                let (la, ha) = a.bounds();
                let (lb, hb) = b.bounds();
                let s = *shift as f64;
                ((1.0 - t) * la + t * (lb + s), (1.0 - t) * ha + t * (hb + s))
            }
        }
    }

    fn sampled_bounds(&self, n: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                let v = self.phi(i as f64 / n as f64, j as f64 / n as f64);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Check that every fibre map is an orientation-preserving homeomorphism.
    ///
    /// Exact for closed forms and PWA fields; sampled on a grid otherwise.
    pub fn validate(&self) -> Result<()> {
        match self {
            TranslationField::ClosedForm { family, .. } => family.validate(),
            TranslationField::Pwa { field, .. } => field.validate(),
            TranslationField::Corrected { base, .. } => base.validate(),
            TranslationField::Surgered { .. } => self.validate_sampled(128, 512),
            // convex combinations of increasing maps are increasing
            TranslationField::Blend { a, b, t, .. } => {
                if !(0.0..=1.0).contains(t) {
                    return Err(Error::RepresentationInvalid(format!("blend weight {t} outside [0,1]")));
                }
                a.validate()?;
                b.validate()
            }
        }
    }

    pub fn validate_sampled(&self, n_theta: usize, n_x: usize) -> Result<()> {
        for i in 0..n_theta {
            let th = i as f64 / n_theta as f64;
            let mut prev = self.apply(th, 0.0);
            for j in 1..=n_x {
                let x = j as f64 / n_x as f64;
                let y = self.apply(th, x);
                if !(y > prev) {
                    return Err(Error::RepresentationInvalid(format!(
                        "fibre map over theta={th} not increasing near x={x}"
                    )));
                }
                prev = y;
            }
        }
        Ok(())
    }

    /// `x`-breakpoints of the fibre map over `theta`, when it is piecewise linear.
    pub fn fibre_breakpoints(&self, theta: f64) -> Option<Vec<f64>> {
        match self {
            TranslationField::Pwa { field, .. } => Some(field.tri.fibre_breakpoints(theta)),
            TranslationField::Corrected { base, .. } => base.fibre_breakpoints(theta),
            _ => None,
        }
    }

    /// Sup of `|Phi_a - Phi_b|` over an `n x n` grid.
    pub fn sup_distance(&self, other: &TranslationField, n: usize) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (th, x) = (i as f64 / n as f64, j as f64 / n as f64);
                d = d.max((self.phi(th, x) - other.phi(th, x)).abs());
            }
        }
        d
    }

    /// Convex interpolation of lifts, `(1-t) Phi + t (Phi_hat + n)`, where the
    /// integer `n` pairs the lifts so that they are uniformly close.
    pub fn interpolate(a: &TranslationField, b: &TranslationField, t: f64) -> Result<TranslationField> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("interpolation parameter {t} outside [0,1]")));
        }
        match (a, b) {
            (
                TranslationField::ClosedForm {
                    family: ClosedForm::Arnold { tau: ta, k: ka, b: ba },
                    lift_offset: la,
                },
                TranslationField::ClosedForm {
                    family: ClosedForm::Arnold { tau: tb, k: kb, b: bb },
                    lift_offset: lb,
                },
            ) => {
                let n = pairing_shift(a, b, 64)?;
                let pa = ta + *la as f64;
                let pb = tb + *lb as f64 + n as f64;
                if t == 0.0 {
                    return Ok(a.clone());
                }
                if t == 1.0 && n == 0 {
                    return Ok(b.clone());
                }
                Ok(TranslationField::arnold(
                    (1.0 - t) * pa + t * pb,
                    (1.0 - t) * ka + t * kb,
                    (1.0 - t) * ba + t * bb,
                ))
            }
            (
                TranslationField::Pwa { field: fa, lift_offset: la },
                TranslationField::Pwa { field: fb, lift_offset: lb },
            ) => {
                if !Arc::ptr_eq(&fa.tri, &fb.tri)
                    && serde_json::to_string(&*fa.tri).ok() != serde_json::to_string(&*fb.tri).ok()
                {
                    return Err(Error::IncompatibleRepresentation(
                        "PWA fields live on different triangulations".into(),
                    ));
                }
                let n = pairing_shift(a, b, 0)?;
                if t == 0.0 {
                    return Ok(a.clone());
                }
                let shift_b = (*lb + n - *la) as f64;
                let values = fa
                    .values()
                    .iter()
                    .zip(fb.values())
                    .map(|(&va, &vb)| (1.0 - t) * va + t * (vb + shift_b))
                    .collect();
                Ok(TranslationField::Pwa {
                    field: Arc::new(PwaField::new(fa.tri.clone(), values)?),
                    lift_offset: *la,
                })
            }
            _ => Err(Error::IncompatibleRepresentation(format!(
                "cannot interpolate {} with {}",
                a.kind_name(),
                b.kind_name()
            ))),
        }
    }

    /// `(1-t) Phi_a + t Phi_b` on the stored lifts, without pairing. Arnold pairs and
    /// PWA pairs on one triangulation stay compact; anything else becomes a
    /// [`TranslationField::Blend`]. `t = 0` and `t = 1` return the endpoints as is.
    pub fn convex_lift(a: &TranslationField, b: &TranslationField, t: f64) -> Result<TranslationField> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("interpolation parameter {t} outside [0,1]")));
        }
        if t == 0.0 {
            return Ok(a.clone());
        }
        if t == 1.0 {
            return Ok(b.clone());
        }
        match (a, b) {
            (
                TranslationField::ClosedForm {
                    family: ClosedForm::Arnold { tau: ta, k: ka, b: ba },
                    lift_offset: la,
                },
                TranslationField::ClosedForm {
                    family: ClosedForm::Arnold { tau: tb, k: kb, b: bb },
                    lift_offset: lb,
                },
            ) => Ok(TranslationField::arnold(
                (1.0 - t) * (ta + *la as f64) + t * (tb + *lb as f64),
                (1.0 - t) * ka + t * kb,
                (1.0 - t) * ba + t * bb,
            )),
            (
                TranslationField::Pwa { field: fa, lift_offset: la },
                TranslationField::Pwa { field: fb, lift_offset: lb },
            ) if Arc::ptr_eq(&fa.tri, &fb.tri) => {
                let shift_b = (*lb - *la) as f64;
                let values = fa
                    .values()
                    .iter()
                    .zip(fb.values())
                    .map(|(&va, &vb)| (1.0 - t) * va + t * (vb + shift_b))
                    .collect();
                Ok(TranslationField::Pwa {
                    field: Arc::new(PwaField::new(fa.tri.clone(), values)?),
                    lift_offset: *la,
                })
            }
            _ => Ok(TranslationField::Blend {
                a: Arc::new(a.clone()),
                b: Arc::new(b.clone()),
                t,
                shift: 0,
            }),
        }
    }

    /// The same fibre maps with the lift moved by the integer `n`.
    pub fn shift_lift(&self, n: i64) -> TranslationField {
        match self {
            TranslationField::ClosedForm { family, lift_offset } => TranslationField::ClosedForm {
                family: family.clone(),
                lift_offset: lift_offset + n,
            },
            TranslationField::Pwa { field, lift_offset } => TranslationField::Pwa {
                field: field.clone(),
                lift_offset: lift_offset + n,
            },
            _ if n == 0 => self.clone(),
            _ => TranslationField::corrected(self.clone(), ThetaProfile::constant(n as f64)),
        }
    }

    /// Tabulate onto a regular PWA grid.
    pub fn tabulate(&self, n_theta: usize, n_x: usize) -> Result<TranslationField> {
        let tri = Arc::new(crate::triangulation::Triangulation::regular(n_theta, n_x)?);
        let f = PwaField::sample(tri, |th, x| self.phi(th, x))?;
        Ok(f.into())
    }
}

/// Integer `n` minimising `sup |Phi_b + n - Phi_a|`; errors if the paired
/// distance is not below 1/2. `grid = 0` compares PWA vertex values exactly.
pub fn pairing_shift(a: &TranslationField, b: &TranslationField, grid: usize) -> Result<i64> {
    let diffs: Vec<f64> = match (a, b, grid) {
        (TranslationField::Pwa { field: fa, lift_offset: la }, TranslationField::Pwa { field: fb, lift_offset: lb }, 0) => fa
            .values()
            .iter()
            .zip(fb.values())
            .map(|(&va, &vb)| vb + *lb as f64 - va - *la as f64)
            .collect(),
        _ => {
            let n = grid.max(8);
            let mut d = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let (th, x) = (i as f64 / n as f64, j as f64 / n as f64);
                    d.push(b.phi(th, x) - a.phi(th, x));
                }
            }
            d
        }
    };
    let (lo, hi) = diffs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let n = -(0.5 * (lo + hi)).round();
    let dist = (lo + n).abs().max((hi + n).abs());
    if dist >= 0.5 {
        return Err(Error::Domain(format!(
            "fields are {dist} apart; lift pairing needs distance < 1/2"
        )));
    }
    Ok(n as i64)
}

fn bisect_increasing(g: impl Fn(f64) -> f64, y: f64, mut a: f64, mut b: f64) -> f64 {
    while b - a > INVERSE_TOL {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangulation::Triangulation;

    #[test]
    fn arnold_inverse_roundtrip() {
        let f = TranslationField::arnold(0.2, 0.9, 0.1);
        for i in 0..40 {
            let th = i as f64 * 0.037;
            let x = i as f64 * 0.11 - 2.0;
            let y = f.apply(th, x);
            assert!((f.apply_inv(th, y) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_one() {
        let f = TranslationField::arnold(0.3, 0.5, 0.2);
        for i in 0..20 {
            let (th, x) = (i as f64 * 0.05, i as f64 * 0.07);
            assert!((f.apply(th, x + 1.0) - f.apply(th, x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arnold_needs_small_k() {
        assert!(TranslationField::arnold(0.0, 1.0, 0.0).validate().is_err());
        assert!(TranslationField::arnold(0.0, 0.99, 0.3).validate().is_ok());
    }

    #[test]
    fn profile_trapezoid_and_wrap() {
        let p = ThetaProfile::trapezoid(0.9, 0.4, 0.1, 2.0).unwrap();
        assert_eq!(p.eval(0.9), 0.0);
        assert!((p.eval(0.95) - 1.0).abs() < 1e-12);
        assert_eq!(p.eval(0.05), 2.0);
        assert!((p.eval(0.25) - 1.0).abs() < 1e-12);
        assert_eq!(p.eval(0.5), 0.0);
    }

    #[test]
    fn interpolate_constants() {
        let a = TranslationField::constant(0.1);
        let b = TranslationField::constant(0.3);
        let m = TranslationField::interpolate(&a, &b, 0.5).unwrap();
        assert!((m.phi(0.3, 0.7) - 0.2).abs() < 1e-15);
        let e = TranslationField::interpolate(&a, &b, 1.0).unwrap();
        assert_eq!(e.phi(0.1, 0.1), b.phi(0.1, 0.1));
        // lift pairing: 0.1 and 1.2 are 0.1 apart as circle-valued fields
        let c = TranslationField::constant(1.2);
        let m = TranslationField::interpolate(&a, &c, 0.5).unwrap();
        assert!((m.phi(0.0, 0.0) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn interpolate_rejects_mixed() {
        let tri = Arc::new(Triangulation::regular(4, 4).unwrap());
        let p: TranslationField = PwaField::sample(tri, |_, _| 0.1).unwrap().into();
        let c = TranslationField::constant(0.1);
        assert!(matches!(
            TranslationField::interpolate(&p, &c, 0.5),
            Err(Error::IncompatibleRepresentation(_))
        ));
    }

    #[test]
    fn json_roundtrip() {
        let f = TranslationField::arnold(0.25, 0.5, 0.1);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains(r#""kind":"closed_form""#));
        assert!(s.contains(r#""family":"arnold""#));
        let g: TranslationField = serde_json::from_str(&s).unwrap();
        assert_eq!(g.phi(0.3, 0.4), f.phi(0.3, 0.4));

        let tri = Arc::new(Triangulation::jittered(5, 5, 0.05, 2).unwrap());
        let p: TranslationField = PwaField::sample(tri, |th, x| 0.1 * th + 0.05 * x).unwrap().into();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains(r#""kind":"pwa""#));
        let g: TranslationField = serde_json::from_str(&s).unwrap();
        assert_eq!(g.phi(0.31, 0.42), p.phi(0.31, 0.42));
    }

    #[test]
    fn blend_of_mixed_kinds_inverts_and_serializes() {
        let a = TranslationField::arnold(0.1, 0.6, 0.2);
        let tri = Arc::new(Triangulation::regular(8, 8).unwrap());
        let b: TranslationField = PwaField::sample(tri, |th, x| 0.2 + 0.1 * (x + th)).unwrap().into();
        let c = TranslationField::convex_lift(&a, &b, 0.3).unwrap();
        assert_eq!(c.kind_name(), "blend");
        c.validate().unwrap();
        for (th, x) in [(0.0, 0.0), (0.3, 0.77), (0.91, 0.12)] {
            let want = 0.7 * a.phi(th, x) + 0.3 * b.phi(th, x);
            assert!((c.phi(th, x) - want).abs() < 1e-15);
            assert!((c.apply_inv(th, c.apply(th, x)) - x).abs() < 1e-10);
        }
        let back: TranslationField = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back.phi(0.4, 0.6), c.phi(0.4, 0.6));
        assert_eq!(TranslationField::convex_lift(&a, &b, 0.0).unwrap().kind_name(), "closed_form");
    }
}
