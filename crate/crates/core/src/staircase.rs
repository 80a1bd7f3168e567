//! One-parameter twist families: rotation-number sweeps, plateau detection and
//! the splice that threads a chosen system into a family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{pairing_shift, TranslationField};
use crate::parallel::par_map;
use crate::pipeline::certify_directly;
use crate::rational::{nearby_rational, BaseRotation, Rational};
use crate::rotation::fibred_rotation_number;
use crate::system::{lift_distance, QpfSystem};

/// Grid used by the twist check on each fibre square.
pub const TWIST_GRID: usize = 16;

/// Plateaus need more than this many grid cells before they are sent to the certifier.
pub const CONFIRM_MIN_CELLS: usize = 3;

/// How `tau` selects a field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyMembers {
    /// `tau + (k / 2pi) sin 2pi x + b sin 2pi theta`.
    Arnold { k: f64, b: f64 },
    /// Lifts at increasing grid values of `tau`, convex in `tau` between them.
    Tabulated {
        taus: Vec<f64>,
        fields: Vec<TranslationField>,
    },
    /// `outer` off `[a, b]`; `phi_a -> f_hat -> phi_b` by convex lift combination on it.
    Spliced {
        outer: Box<FamilyMembers>,
        a: f64,
        tau_n: f64,
        b: f64,
        phi_a: TranslationField,
        f_hat: TranslationField,
        phi_b: TranslationField,
    },
}

impl FamilyMembers {
    fn field_at(&self, tau: f64) -> Result<TranslationField> {
        match self {
            FamilyMembers::Arnold { k, b } => Ok(TranslationField::arnold(tau, *k, *b)),
            FamilyMembers::Tabulated { taus, fields } => {
                let n = taus.len();
                if n == 0 || !(tau >= taus[0] && tau <= taus[n - 1]) {
                    return Err(Error::Domain(format!("tau = {tau} outside the tabulated range")));
                }
                let i = taus.partition_point(|&t| t <= tau).clamp(1, n) - 1;
                if i + 1 == n || taus[i] == tau {
                    return Ok(fields[i].clone());
                }
                let t = (tau - taus[i]) / (taus[i + 1] - taus[i]);
                TranslationField::convex_lift(&fields[i], &fields[i + 1], t)
            }
            FamilyMembers::Spliced {
                outer,
                a,
                tau_n,
                b,
                phi_a,
                f_hat,
                phi_b,
            } => {
                if tau < *a || tau > *b {
                    outer.field_at(tau)
                } else if tau <= *tau_n {
                    TranslationField::convex_lift(phi_a, f_hat, ((tau - a) / (tau_n - a)).clamp(0.0, 1.0))
                } else {
                    TranslationField::convex_lift(f_hat, phi_b, ((tau - tau_n) / (b - tau_n)).clamp(0.0, 1.0))
                }
            }
        }
    }
}

/// A family `tau -> (omega, phi_tau)` whose lifts increase strictly in `tau`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwistFamily {
    pub omega: BaseRotation,
    pub members: FamilyMembers,
}

impl TwistFamily {
    pub fn arnold(omega: BaseRotation, k: f64, b: f64) -> Self {
        TwistFamily {
            omega,
            members: FamilyMembers::Arnold { k, b },
        }
    }

    /// A tabulated family; `taus` must increase strictly.
    pub fn tabulated(omega: BaseRotation, taus: Vec<f64>, fields: Vec<TranslationField>) -> Result<Self> {
        if taus.len() < 2 || taus.len() != fields.len() {
            return Err(Error::Domain("need at least two tau values, one field each".into()));
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("tabulated tau values must increase strictly".into()));
        }
        Ok(TwistFamily {
            omega,
            members: FamilyMembers::Tabulated { taus, fields },
        })
    }

    /// The same family stored by its members at `taus`.
    pub fn tabulate(&self, taus: &[f64]) -> Result<Self> {
        let fields = taus.iter().map(|&t| self.field_at(t)).collect::<Result<Vec<_>>>()?;
        TwistFamily::tabulated(self.omega, taus.to_vec(), fields)
    }

    pub fn field_at(&self, tau: f64) -> Result<TranslationField> {
        self.members.field_at(tau)
    }

    pub fn system_at(&self, tau: f64) -> Result<QpfSystem> {
        QpfSystem::new(self.omega, self.field_at(tau)?)
    }

    /// Strict increase of `tau -> Phi_tau(theta, x)` between consecutive `taus`,
    /// on an `n x n` grid of each fibre square.
    pub fn check_twist(&self, taus: &[f64], n: usize) -> Result<()> {
        let fields = taus.iter().map(|&t| self.field_at(t)).collect::<Result<Vec<_>>>()?;
        for (w, f) in taus.windows(2).zip(fields.windows(2)) {
            if !(w[1] > w[0]) {
                return Err(Error::Domain("twist samples must increase strictly".into()));
            }
            for i in 0..n {
                for j in 0..n {
                    let (th, x) = (i as f64 / n as f64, j as f64 / n as f64);
                    let (lo, hi) = (f[0].phi(th, x), f[1].phi(th, x));
                    if !(hi > lo) {
                        return Err(Error::NotATwistFamily(format!(
                            "Phi does not increase from tau = {} to {} at (theta, x) = ({th}, {x})",
                            w[0], w[1]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sup over `taus` and an `n x n` grid of the lift distance between two families.
pub fn family_distance(a: &TwistFamily, b: &TwistFamily, taus: &[f64], n: usize) -> Result<f64> {
    let mut d: f64 = 0.0;
    for &t in taus {
        d = d.max(lift_distance(&a.system_at(t)?, &b.system_at(t)?, n));
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaircaseSample {
    pub tau: f64,
    pub rho: f64,
    pub half_width: f64,
}

/// `level = (p + l omega) / q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaRelation {
    pub p: i64,
    pub l: i64,
    pub q: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfirmation {
    pub tau: f64,
    pub level: f64,
    pub margin: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub tau_lo: f64,
    pub tau_hi: f64,
    /// Index range into the samples, inclusive.
    pub first: usize,
    pub last: usize,
    pub level: f64,
    pub rational: Option<Rational>,
    pub omega_relation: Option<OmegaRelation>,
    #[serde(default)]
    pub confirmation: Option<PlateauConfirmation>,
}

impl Plateau {
    pub fn width(&self) -> f64 {
        self.tau_hi - self.tau_lo
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StaircaseData {
    pub omega: BaseRotation,
    pub n_max: u64,
    pub samples: Vec<StaircaseSample>,
    pub plateaus: Vec<Plateau>,
}

impl StaircaseData {
    pub fn max_half_width(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.half_width))
    }

    /// First pair breaking `rho_{i+1} >= rho_i - 2 max half-width`, if any.
    pub fn monotonicity_violation(&self) -> Option<usize> {
        let slack = 2.0 * self.max_half_width();
        self.samples.windows(2).position(|w| w[1].rho < w[0].rho - slack)
    }
}

/// Default level tolerance: the estimates cannot be sharper than their half-widths.
pub fn default_level_tol(data: &StaircaseData) -> f64 {
    (2.0 * data.max_half_width()).max(1e-12)
}

/// Fibred rotation numbers along `taus`, one worker per sample.
pub fn sweep_family(family: &TwistFamily, taus: &[f64], n_max: u64) -> Result<StaircaseData> {
    if taus.is_empty() {
        return Err(Error::Domain("empty tau grid".into()));
    }
    family.check_twist(taus, TWIST_GRID)?;
    let samples = par_map(taus, |&tau| -> Result<StaircaseSample> {
        let sys = family.system_at(tau)?;
        let e = fibred_rotation_number(&sys, 0.0, n_max, 4);
        Ok(StaircaseSample {
            tau,
            rho: e.value,
            half_width: e.half_width.max(e.per_theta_spread),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut data = StaircaseData {
        omega: family.omega,
        n_max,
        samples,
        plateaus: Vec::new(),
    };
    if let Some(i) = data.monotonicity_violation() {
        let (a, b) = (data.samples[i], data.samples[i + 1]);
        return Err(Error::NotATwistFamily(format!(
            "rotation number drops from {} at tau = {} to {} at tau = {}",
            a.rho, a.tau, b.rho, b.tau
        )));
    }
    data.plateaus = detect_plateaus(&data, default_level_tol(&data));
    Ok(data)
}

/// Maximal runs of at least two consecutive samples whose estimates lie within
/// `level_tol` of each other and whose half-width intervals share a point.
pub fn detect_plateaus(data: &StaircaseData, level_tol: f64) -> Vec<Plateau> {
    let s = &data.samples;
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let (mut lo, mut hi) = (s[i].rho, s[i].rho);
        let (mut cap_lo, mut cap_hi) = (s[i].rho - s[i].half_width, s[i].rho + s[i].half_width);
        let mut j = i;
        while j + 1 < s.len() {
            let n = &s[j + 1];
            let (nlo, nhi) = (lo.min(n.rho), hi.max(n.rho));
            let (clo, chi) = (cap_lo.max(n.rho - n.half_width), cap_hi.min(n.rho + n.half_width));
            if nhi - nlo > level_tol || clo > chi {
                break;
            }
            (lo, hi, cap_lo, cap_hi) = (nlo, nhi, clo, chi);
            j += 1;
        }
        if j > i {
            let level = 0.5 * (cap_lo + cap_hi);
            out.push(Plateau {
                tau_lo: s[i].tau,
                tau_hi: s[j].tau,
                first: i,
                last: j,
                level,
                rational: nearby_rational(level, level_tol.max(1e-12), 64),
                omega_relation: omega_relation(level, data.omega.value(), level_tol.max(1e-12), 8, 16),
                confirmation: None,
            });
        }
        i = j + 1;
    }
    out
}

/// Smallest `q`, then smallest `|l|`, with `|level - (p + l omega)/q| <= tol`.
pub fn omega_relation(level: f64, omega: f64, tol: f64, l_max: i64, q_max: i64) -> Option<OmegaRelation> {
    for q in 1..=q_max {
        for l_abs in 0..=l_max {
            for l in [l_abs, -l_abs] {
                let p = (level * q as f64 - l as f64 * omega).round();
                if ((p + l as f64 * omega) / q as f64 - level).abs() <= tol {
                    return Some(OmegaRelation { p: p as i64, l, q });
                }
                if l_abs == 0 {
                    break;
                }
            }
        }
    }
    None
}

/// Try to certify the member at the midpoint of every plateau wider than
/// [`CONFIRM_MIN_CELLS`] grid cells. Failures leave `confirmation` empty.
pub fn confirm_plateaus(family: &TwistFamily, data: &mut StaircaseData, min_margin: f64) -> Result<usize> {
    let mut confirmed = 0;
    for p in data.plateaus.iter_mut() {
        if p.last - p.first <= CONFIRM_MIN_CELLS {
            continue;
        }
        let tau = data.samples[(p.first + p.last) / 2].tau;
        let sys = family.system_at(tau)?;
        if let Ok(cert) = certify_directly(&sys, min_margin) {
            p.confirmation = Some(PlateauConfirmation {
                tau,
                level: cert.claimed_rotation.value,
                margin: cert.margin,
                exact: cert.exact,
            });
            confirmed += 1;
        }
    }
    Ok(confirmed)
}

/// Thread `f_hat` into the family at `tau_n`: members off `[a, b]` keep their
/// fields, on `[a, tau_n]` and `[tau_n, b]` they are convex lift combinations
/// through `f_hat`, and every member takes the base of `f_hat`.
pub fn interpolate_family(
    family: &TwistFamily,
    tau_n: f64,
    f_hat: &QpfSystem,
    interval: [f64; 2],
    eps: f64,
) -> Result<TwistFamily> {
    let [a, b] = interval;
    if !(a < tau_n && tau_n < b) || !(eps > 0.0) {
        return Err(Error::Domain(format!(
            "need a < tau_n < b and eps > 0, got [{a}, {b}], tau_n = {tau_n}, eps = {eps}"
        )));
    }
    let radius = eps / 3.0;
    let old_n = family.system_at(tau_n)?;
    let shift = pairing_shift(&old_n.field, &f_hat.field, 64).map_err(|e| Error::Radius(e.to_string()))?;
    let hat = QpfSystem::new_unchecked(f_hat.omega, f_hat.field.shift_lift(shift));
    let d_hat = lift_distance(&hat, &old_n, 64);
    if !(d_hat < radius) {
        return Err(Error::Radius(format!("f_hat is {d_hat:e} from f_tau_n, need < {radius:e}")));
    }
    let probes: Vec<f64> = (0..=16).map(|i| a + (b - a) * i as f64 / 16.0).collect();
    for &t in &probes {
        let d = lift_distance(&family.system_at(t)?, &old_n, 64);
        if !(d < radius) {
            return Err(Error::Radius(format!("f_tau at tau = {t} is {d:e} from f_tau_n, need < {radius:e}")));
        }
    }
    let out = TwistFamily {
        omega: f_hat.omega,
        members: FamilyMembers::Spliced {
            outer: Box::new(family.members.clone()),
            a,
            tau_n,
            b,
            phi_a: family.field_at(a)?,
            f_hat: hat.field,
            phi_b: family.field_at(b)?,
        },
    };
    let w = b - a;
    let mut twist_taus: Vec<f64> = (0..=48).map(|i| a - w / 4.0 + 1.5 * w * i as f64 / 48.0).collect();
    twist_taus.extend([a, tau_n, b]);
    twist_taus.sort_by(f64::total_cmp);
    twist_taus.dedup();
    out.check_twist(&twist_taus, TWIST_GRID).map_err(|e| match e {
        Error::NotATwistFamily(m) => Error::TwistBroken(m),
        other => other,
    })?;
    let d = family_distance(&out, family, &twist_taus, 32)?;
    if !(d <= eps) {
        return Err(Error::Radius(format!("spliced family is {d:e} from the original, need <= {eps:e}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangulation::{PwaField, Triangulation};
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    fn step_data(levels: &[(f64, usize)]) -> StaircaseData {
        let mut samples = Vec::new();
        for &(rho, count) in levels {
            for _ in 0..count {
                let tau = samples.len() as f64 * 0.1;
                samples.push(StaircaseSample { tau, rho, half_width: 0.0 });
            }
        }
        StaircaseData {
            omega: BaseRotation::golden(),
            n_max: 0,
            samples,
            plateaus: Vec::new(),
        }
    }

    /// Rotation number of `x + tau + (k/2pi) sin 2pi x` is zero exactly when a
    /// fixed point exists, i.e. for `|tau| <= k / 2pi`.
    fn analytic_zero_plateau(k: f64) -> (f64, f64) {
        (-k / (2.0 * PI), k / (2.0 * PI))
    }

    #[test]
    fn rigid_family_is_the_diagonal() {
        let fam = TwistFamily::arnold(BaseRotation::golden(), 0.0, 0.0);
        let taus = grid(-0.3, 0.3, 24);
        let data = sweep_family(&fam, &taus, 1000).unwrap();
        for s in &data.samples {
            assert_eq!(s.rho, s.tau);
            assert_eq!(s.half_width, 0.0);
        }
        assert!(data.plateaus.is_empty());
        assert!(detect_plateaus(&data, 1e-3).is_empty());
    }

    #[test]
    fn step_data_gives_exact_plateaus() {
        let data = step_data(&[(0.0, 4), (0.1, 1), (0.25, 3), (0.3, 1)]);
        let p = detect_plateaus(&data, 1e-9);
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].first, p[0].last), (0, 3));
        assert_eq!((p[1].first, p[1].last), (5, 7));
        assert_eq!(p[0].tau_lo, 0.0);
        assert_eq!(p[1].tau_hi, 0.7000000000000001);
        assert_eq!(p[1].level, 0.25);
        assert_eq!(p[1].rational, Some(Rational::new(1, 4).unwrap()));
    }

    #[test]
    fn unforced_arnold_plateau_matches_fixed_point_interval() {
        let k = 0.5;
        let fam = TwistFamily::arnold(BaseRotation::golden(), k, 0.0);
        let taus = grid(-0.2, 0.2, 200);
        let h = 0.4 / 200.0;
        let data = sweep_family(&fam, &taus, 4000).unwrap();
        let tol = default_level_tol(&data);
        let zero = data
            .plateaus
            .iter()
            .find(|p| p.level.abs() <= tol)
            .expect("plateau at rho = 0");
        let (lo, hi) = analytic_zero_plateau(k);
        assert!((zero.tau_lo - lo).abs() <= h + tol, "{} vs {lo}", zero.tau_lo);
        assert!((zero.tau_hi - hi).abs() <= h + tol, "{} vs {hi}", zero.tau_hi);
        assert!((zero.width() - k / PI).abs() <= 2.0 * (h + tol));
        assert_eq!(zero.omega_relation, Some(OmegaRelation { p: 0, l: 0, q: 1 }));
    }

    #[test]
    fn plateau_shrinks_with_k() {
        let mut widths = Vec::new();
        for k in [0.4, 0.2, 0.05] {
            let fam = TwistFamily::arnold(BaseRotation::golden(), k, 0.0);
            let data = sweep_family(&fam, &grid(-0.1, 0.1, 100), 3000).unwrap();
            let tol = default_level_tol(&data);
            let w = data
                .plateaus
                .iter()
                .filter(|p| p.level.abs() <= tol)
                .map(Plateau::width)
                .fold(0.0, f64::max);
            assert!((w - k / PI).abs() <= 2.0 * (0.002 + tol), "k = {k}: {w}");
            widths.push(w);
        }
        assert!(widths.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn confirmed_plateau_level_agrees() {
        let fam = TwistFamily::arnold(BaseRotation::golden(), 0.5, 0.0);
        let mut data = sweep_family(&fam, &grid(-0.1, 0.1, 20), 2000).unwrap();
        assert_eq!(confirm_plateaus(&fam, &mut data, 1e-9).unwrap(), 1);
        let p = &data.plateaus[0];
        let c = p.confirmation.as_ref().unwrap();
        assert_eq!(c.level, 0.0);
        for s in &data.samples[p.first..=p.last] {
            assert!((s.rho - c.level).abs() <= s.half_width);
        }
    }

    #[test]
    fn decreasing_family_is_rejected() {
        let fields = vec![TranslationField::constant(0.2), TranslationField::constant(0.1)];
        let fam = TwistFamily::tabulated(BaseRotation::golden(), vec![0.0, 1.0], fields).unwrap();
        let err = sweep_family(&fam, &[0.0, 0.5, 1.0], 100).unwrap_err();
        assert!(matches!(err, Error::NotATwistFamily(_)));
    }

    #[test]
    fn tabulated_family_reproduces_arnold() {
        let fam = TwistFamily::arnold(BaseRotation::golden(), 0.6, 0.2);
        let tab = fam.tabulate(&grid(-0.5, 0.5, 10)).unwrap();
        let json = serde_json::to_string(&tab).unwrap();
        let back: TwistFamily = serde_json::from_str(&json).unwrap();
        let taus = grid(-0.5, 0.5, 37);
        assert!(family_distance(&fam, &back, &taus, 16).unwrap() < 1e-12);
        let a = sweep_family(&tab, &taus, 500).unwrap();
        let b = sweep_family(&back, &taus, 500).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    fn arnold_sys(omega: BaseRotation, tau: f64, k: f64, b: f64) -> QpfSystem {
        QpfSystem::new(omega, TranslationField::arnold(tau, k, b)).unwrap()
    }

    #[test]
    fn splice_with_the_member_itself_keeps_the_family() {
        let fam = TwistFamily::arnold(BaseRotation::golden(), 0.5, 0.1);
        let hat_omega = BaseRotation::rational(8, 13).unwrap();
        let f_hat = arnold_sys(hat_omega, 0.1, 0.5, 0.1);
        let out = interpolate_family(&fam, 0.1, &f_hat, [0.05, 0.15], 0.3).unwrap();
        let base_swapped = TwistFamily::arnold(hat_omega, 0.5, 0.1);
        let taus = grid(-0.2, 0.4, 60);
        assert!(family_distance(&out, &base_swapped, &taus, 16).unwrap() < 1e-12);
    }

    #[test]
    fn splice_endpoints_and_closeness() {
        let fam = TwistFamily::arnold(BaseRotation::golden(), 0.5, 0.1);
        let hat_omega = BaseRotation::rational(5, 8).unwrap();
        let eps = 0.15;
        // a PWA system near the member at tau_n, so the splice mixes kinds
        let tri = Arc::new(Triangulation::regular(16, 16).unwrap());
        let target = TranslationField::arnold(0.2 + 0.01, 0.5, 0.1);
        let pwa = PwaField::sample(tri, |th, x| target.phi(th, x)).unwrap();
        let f_hat = QpfSystem::new(hat_omega, pwa.into()).unwrap();
        let (a, b) = (0.19, 0.22);
        let out = interpolate_family(&fam, 0.2, &f_hat, [a, b], eps).unwrap();
        assert_eq!(out.omega, hat_omega);
        let at_a = out.system_at(a).unwrap();
        assert_eq!(at_a.omega, hat_omega);
        assert_eq!(at_a.field.sup_distance(&fam.field_at(a).unwrap(), 32), 0.0);
        assert_eq!(out.field_at(0.2).unwrap().sup_distance(&f_hat.field, 32), 0.0);
        assert_eq!(out.field_at(b).unwrap().sup_distance(&fam.field_at(b).unwrap(), 32), 0.0);
        // grid oracle over (tau, theta, x)
        let mut d: f64 = 0.0;
        for t in grid(0.1, 0.3, 40) {
            let (new, old) = (out.system_at(t).unwrap(), fam.system_at(t).unwrap());
            let dw = (new.omega.value() - old.omega.value()).abs();
            d = d.max(dw + new.field.sup_distance(&old.field, 24));
        }
        assert!(d <= eps, "{d}");
        // continuity across the junctions
        for c in [a, 0.2, b] {
            let jump = |h: f64| {
                out.field_at(c - h)
                    .unwrap()
                    .sup_distance(&out.field_at(c + h).unwrap(), 16)
            };
            assert!(jump(1e-6) < jump(1e-4));
            assert!(jump(1e-6) < 1e-3);
        }
    }

    #[test]
    fn far_system_is_a_radius_error() {
        let fam = TwistFamily::arnold(BaseRotation::golden(), 0.5, 0.1);
        let f_hat = arnold_sys(BaseRotation::golden(), 0.3, 0.5, 0.1);
        let err = interpolate_family(&fam, 0.1, &f_hat, [0.05, 0.15], 0.3).unwrap_err();
        assert!(matches!(err, Error::Radius(_)));
    }

    #[test]
    fn splice_through_a_flat_member_breaks_the_twist() {
        // f_hat sits below phi_a on part of the square, so [a, tau_n] runs downhill there
        let fam = TwistFamily::arnold(BaseRotation::golden(), 0.3, 0.0);
        let f_hat = arnold_sys(BaseRotation::golden(), 0.1, 0.3, 0.02);
        let err = interpolate_family(&fam, 0.1, &f_hat, [0.09, 0.15], 0.3).unwrap_err();
        assert!(matches!(err, Error::TwistBroken(_)), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sweeps_are_monotone(k in 0.0f64..0.9, b in 0.0f64..0.3, lo in -0.5f64..0.0) {
            let fam = TwistFamily::arnold(BaseRotation::golden(), k, b);
            let data = sweep_family(&fam, &grid(lo, lo + 0.5, 12), 400).unwrap();
            prop_assert!(data.monotonicity_violation().is_none());
        }

        #[test]
        fn plateaus_are_disjoint_and_tight(levels in prop::collection::vec((0u8..4, 1usize..5), 1..8)) {
            let steps: Vec<(f64, usize)> = levels.iter().map(|&(l, c)| (l as f64 * 0.25, c)).collect();
            let data = step_data(&steps);
            let p = detect_plateaus(&data, 1e-9);
            for w in p.windows(2) {
                prop_assert!(w[0].last < w[1].first);
            }
            for q in &p {
                prop_assert!(q.last > q.first);
                let s = &data.samples[q.first..=q.last];
                prop_assert!(s.iter().all(|x| x.rho == q.level));
                // maximal: neighbours have other levels
                if q.first > 0 { prop_assert!(data.samples[q.first - 1].rho != q.level); }
                if q.last + 1 < data.samples.len() { prop_assert!(data.samples[q.last + 1].rho != q.level); }
            }
        }
    }
}
