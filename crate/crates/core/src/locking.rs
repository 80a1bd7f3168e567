//! Making every `q`-fold fibre map mode-locked by interval surgeries.
//!
//! Fibres over `theta` and `theta + j/q` carry conjugate `q`-fold maps, so a
//! surgery on one base interval of length `1/q` is transported to the whole
//! circle for free.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Surgery, SurgeryTarget, ThetaProfile, TranslationField};
use crate::parallel::par_map;
use crate::rational::Rational;
use crate::system::{lift_distance, QpfSystem};

/// `gamma_plus = sup_x Phi^q`, `gamma_minus = -inf_x Phi^q` on a theta grid,
/// with `Phi^q(theta, x) = F^q_theta(x) - x - m0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FibreSignProfile {
    pub m0: i64,
    pub theta_grid: Vec<f64>,
    pub gamma_plus: Vec<f64>,
    pub gamma_minus: Vec<f64>,
}

impl FibreSignProfile {
    pub fn scan(sys: &QpfSystem, m0: i64, thetas: &[f64], n_x: usize) -> Result<Self> {
        let q = sys.omega.require_rational()?.denom();
        let rows = par_map(thetas, |&th| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for j in 0..n_x {
                let x = j as f64 / n_x as f64;
                let v = sys.fibre_apply(th, x, q) - x - m0 as f64;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (hi, -lo)
        });
        Ok(FibreSignProfile {
            m0,
            theta_grid: thetas.to_vec(),
            gamma_plus: rows.iter().map(|r| r.0).collect(),
            gamma_minus: rows.iter().map(|r| r.1).collect(),
        })
    }

    /// Smallest `min(gamma_plus, gamma_minus)` over the grid.
    pub fn min_margin(&self) -> f64 {
        self.gamma_plus
            .iter()
            .zip(&self.gamma_minus)
            .fold(f64::INFINITY, |m, (a, b)| m.min(a.min(*b)))
    }

    pub fn all_locked(&self, margin: f64) -> bool {
        self.min_margin() > margin
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,gamma_plus,gamma_minus\n");
        for i in 0..self.theta_grid.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                self.theta_grid[i], self.gamma_plus[i], self.gamma_minus[i]
            ));
        }
        s
    }
}

/// `h = f^{js}_theta` with `s p - k q = 1`; conjugates `f^q_theta` to `f^q_{theta+j/q}`.
#[derive(Clone, Debug)]
pub struct Conjugacy {
    pub theta: f64,
    pub j: i64,
    pub steps: i64,
}

impl Conjugacy {
    pub fn apply(&self, sys: &QpfSystem, x: f64) -> f64 {
        sys.fibre_apply(self.theta, x, self.steps)
    }
}

pub fn conjugacy_witness(sys: &QpfSystem, theta: f64, j: i64) -> Result<Conjugacy> {
    let r = sys.omega.require_rational()?;
    let q = r.denom();
    if q < 2 || j < 1 || j >= q {
        return Err(Error::Domain(format!("conjugacy index j={j} outside [1, {}]", q - 1)));
    }
    let (s, _) = r.bezout()?;
    let c = Conjugacy { theta, j, steps: j * s };
    let theta_j = sys.base_point(theta, c.steps);
    let mut drift: f64 = 0.0;
    for i in 0..32 {
        let x = i as f64 / 32.0;
        let lhs = sys.fibre_apply(theta_j, c.apply(sys, x), q);
        let rhs = c.apply(sys, sys.fibre_apply(theta, x, q));
        drift = drift.max((lhs - rhs).abs());
    }
    if drift > 1e-9 {
        return Err(Error::CompositionDrift { drift });
    }
    Ok(c)
}

/// Result of one surgery with its measured lift distance to the input.
#[derive(Clone, Debug)]
pub struct SurgeryOutcome {
    pub system: QpfSystem,
    pub perturbation: f64,
}

/// Replace `f^q` by the target on `[start, start+len)` and leave `f` alone elsewhere.
pub fn interval_surgery(sys: &QpfSystem, start: f64, len: f64, target: SurgeryTarget) -> Result<SurgeryOutcome> {
    let omega = sys.omega.require_rational()?;
    let q = omega.denom();
    if len > 1.0 / q as f64 + 1e-15 || len <= 0.0 {
        return Err(Error::IntervalTooWide { width: len, q: q as u64 });
    }
    let surgery = Surgery {
        base: sys.field.clone(),
        omega,
        start: start.rem_euclid(1.0),
        len,
        target,
    };
    let n = 16;
    // boundary agreement, at both ends of I
    let mut mismatch: f64 = 0.0;
    for th in [start, start + len] {
        for i in 0..n {
            let x = i as f64 / n as f64;
            let want = sys.fibre_apply(th, x, q);
            mismatch = mismatch.max((surgery.target_map(th, x) - want).abs());
        }
    }
    if mismatch > 1e-9 {
        return Err(Error::BoundaryMismatch { mismatch });
    }
    // the target must be a homeomorphism on every fibre of I
    for i in 0..64 {
        let th = start + len * i as f64 / 64.0;
        let mut prev = surgery.target_map(th, 0.0);
        for k in 1..=512 {
            let y = surgery.target_map(th, k as f64 / 512.0);
            if !(y > prev) {
                return Err(Error::RepresentationInvalid(format!(
                    "surgery target not increasing over theta={th}"
                )));
            }
            prev = y;
        }
    }
    let out = QpfSystem::new_unchecked(
        sys.omega,
        TranslationField::Surgered {
            surgery: Arc::new(surgery.clone()),
        },
    );
    let mut drift: f64 = 0.0;
    for i in 0..n {
        let th = start + len * (i as f64 + 0.5) / n as f64;
        for k in 0..n {
            let x = k as f64 / n as f64;
            drift = drift.max((out.fibre_apply(th, x, q) - surgery.target_map(th, x)).abs());
        }
    }
    if drift > 1e-9 {
        return Err(Error::CompositionDrift { drift });
    }
    let perturbation = lift_distance(sys, &out, 128);
    Ok(SurgeryOutcome { system: out, perturbation })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LockOptions {
    /// Averaging weight of the sign-balancing shifts, in `[0, 1/2)`.
    pub zeta: f64,
    /// Theta samples per period `1/q` in the fibre scans.
    pub n_theta: usize,
    pub n_x: usize,
    /// Fibres with `max |Phi^q| < id_threshold` count as identity fibres.
    pub id_threshold: f64,
    /// Bump height; `None` picks it from `epsilon` and `q`.
    pub amplitude: Option<f64>,
    /// Re-tabulate the field on a regular PWA grid after each surgery.
    pub materialize: bool,
}

impl Default for LockOptions {
    fn default() -> Self {
        LockOptions {
            zeta: 0.25,
            n_theta: 256,
            n_x: 1024,
            id_threshold: 1e-7,
            amplitude: None,
            materialize: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurgeryRecord {
    pub phase: u8,
    pub start: f64,
    pub len: f64,
    pub perturbation: f64,
}

#[derive(Clone, Debug)]
pub struct LockResult {
    pub system: QpfSystem,
    pub m0: i64,
    pub before: FibreSignProfile,
    pub after: FibreSignProfile,
    /// Lift distance between input and output, sampled on a 128 x 128 grid.
    pub perturbation: f64,
    pub surgeries: Vec<SurgeryRecord>,
    /// Set when the perturbation budget could not be met.
    pub over_budget: bool,
}

fn period_grid(q: i64, n: usize, start: f64) -> Vec<f64> {
    let l = 1.0 / q as f64;
    (0..n).map(|i| start + l * i as f64 / n as f64).collect()
}

fn materialize(sys: QpfSystem, q: i64, on: bool) -> Result<QpfSystem> {
    if !on {
        return Ok(sys);
    }
    let n_theta = (4 * q as usize) * 256usize.div_ceil(4 * q as usize);
    let n_x = 256usize.max(32 * q as usize);
    let field = sys.field.tabulate(n_theta, n_x)?;
    field.validate()?;
    Ok(QpfSystem::new_unchecked(sys.omega, field))
}

/// Maximal runs of flagged samples on a circular grid, as `(first, count)`.
fn circular_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let n = flags.len();
    if flags.iter().all(|&f| f) {
        return vec![(0, n)];
    }
    let Some(gap) = flags.iter().position(|&f| !f) else { return vec![] };
    let mut runs = Vec::new();
    let mut i = 0;
    while i < n {
        let idx = (gap + i) % n;
        if flags[idx] {
            let mut len = 0;
            while i < n && flags[(gap + i) % n] {
                len += 1;
                i += 1;
            }
            runs.push((idx, len));
        } else {
            i += 1;
        }
    }
    runs
}

/// Base arcs `(start, len)`, each of length at most `1/q`, covering the identity fibres.
fn identity_cover(profile: &FibreSignProfile, q: i64, threshold: f64) -> Vec<(f64, f64)> {
    let n = profile.theta_grid.len();
    let l = 1.0 / q as f64;
    let h = l / n as f64;
    let flags: Vec<bool> = (0..n)
        .map(|i| profile.gamma_plus[i].max(profile.gamma_minus[i]) < threshold)
        .collect();
    let mut arcs = Vec::new();
    for (first, count) in circular_runs(&flags) {
        let len = (count + 2) as f64 * h;
        if count == n || len > 0.75 * l {
            arcs.push((0.0, 0.75 * l));
            arcs.push((0.5 * l, 0.75 * l));
            return arcs;
        }
        arcs.push((profile.theta_grid[first] - h, len));
    }
    arcs
}

fn bump_surgery(sys: &QpfSystem, q: i64, m0: i64, start: f64, len: f64, amp: f64, opts: &LockOptions) -> Result<SurgeryOutcome> {
    let ramp = (len / 8.0).min(len / 2.0);
    let weight = ThetaProfile::trapezoid(start, len, ramp, 1.0)?;
    let lobes = q as u32;
    let k = 64;
    let thetas: Vec<f64> = (0..=k).map(|i| start + len * i as f64 / k as f64).collect();
    let offs = par_map(&thetas, |&th| {
        let w = weight.eval(th);
        if w == 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..opts.n_x {
            let x = j as f64 / opts.n_x as f64;
            let g = sys.fibre_apply(th, x, q) - x - m0 as f64 + w * amp * crate::field::tent(x, lobes);
            lo = lo.min(g);
            hi = hi.max(g);
        }
        0.0f64.clamp(lo, hi)
    });
    let offset = ThetaProfile::from_samples(&thetas, &offs)?;
    interval_surgery(
        sys,
        start,
        len,
        SurgeryTarget::Bump {
            weight,
            amplitude: amp,
            lobes,
            offset,
        },
    )
}

fn shift_surgery(sys: &QpfSystem, m0: i64, start: f64, len: f64, core: f64, zeta: f64, opts: &LockOptions) -> Result<SurgeryOutcome> {
    let ramp = (len - core) / 2.0;
    let lambda = ThetaProfile::trapezoid(start, len, ramp, 1.0)?;
    let k = 64;
    let thetas: Vec<f64> = (0..=k).map(|i| start + len * i as f64 / k as f64).collect();
    let prof = FibreSignProfile::scan(sys, m0, &thetas, opts.n_x)?;
    let c: Vec<f64> = (0..=k)
        .map(|i| zeta * lambda.eval(thetas[i]) * (prof.gamma_minus[i] - prof.gamma_plus[i]))
        .collect();
    let profile = ThetaProfile::from_samples(&thetas, &c)?;
    interval_surgery(sys, start, len, SurgeryTarget::Shift { profile })
}

/// Two-phase surgery giving every fibre both signs of `Phi^q`.
///
/// Phase 1 puts tent bumps on the identity fibres; phase 2 shifts `Phi^q`
/// by `zeta * lambda * (gamma_minus - gamma_plus)` on two overlapping base
/// intervals whose translates cover the circle.
pub fn lock_all_fibres(sys: &QpfSystem, m0: i64, eps: f64, opts: &LockOptions) -> Result<LockResult> {
    let omega: Rational = sys.omega.require_rational()?;
    let q = omega.denom();
    let grid = period_grid(q, opts.n_theta, 0.0);
    let before = FibreSignProfile::scan(sys, m0, &grid, opts.n_x)?;
    if before.all_locked(opts.id_threshold) {
        return Ok(LockResult {
            system: sys.clone(),
            m0,
            after: before.clone(),
            before,
            perturbation: 0.0,
            surgeries: vec![],
            over_budget: false,
        });
    }
    let mut amp = opts.amplitude.unwrap_or((eps / 8.0).min(0.25 / q as f64));
    let mut best: Option<LockResult> = None;
    for _attempt in 0..6 {
        match lock_attempt(sys, q, m0, amp, &before, &grid, opts) {
            Ok((out, surgeries)) => {
                let perturbation = lift_distance(sys, &out, 128);
                let after = FibreSignProfile::scan(&out, m0, &grid, opts.n_x)?;
                let res = LockResult {
                    system: out,
                    m0,
                    before: before.clone(),
                    after,
                    perturbation,
                    surgeries,
                    over_budget: perturbation >= eps,
                };
                if !res.over_budget {
                    return Ok(res);
                }
                best = Some(res);
            }
            Err(Error::RepresentationInvalid(_)) => {}
            Err(e) => return Err(e),
        }
        amp /= 2.0;
    }
    best.ok_or_else(|| Error::RepresentationInvalid("no admissible bump amplitude found".into()))
}

fn lock_attempt(
    sys: &QpfSystem,
    q: i64,
    m0: i64,
    amp: f64,
    before: &FibreSignProfile,
    grid: &[f64],
    opts: &LockOptions,
) -> Result<(QpfSystem, Vec<SurgeryRecord>)> {
    let l = 1.0 / q as f64;
    let mut cur = sys.clone();
    let mut recs = Vec::new();
    for (start, len) in identity_cover(before, q, opts.id_threshold) {
        let o = bump_surgery(&cur, q, m0, start, len, amp, opts)?;
        recs.push(SurgeryRecord { phase: 1, start, len, perturbation: o.perturbation });
        cur = materialize(o.system, q, opts.materialize)?;
    }
    let mid = FibreSignProfile::scan(&cur, m0, grid, opts.n_x)?;
    for i in 0..grid.len() {
        if mid.gamma_plus[i] + mid.gamma_minus[i] < opts.id_threshold {
            return Err(Error::Phase1Incomplete { theta: grid[i] });
        }
    }
    if opts.zeta > 0.0 {
        // J = [0, l/2] inside (-l/4, 3l/4); J' = [l/2, l] inside (l/4, 5l/4)
        for start in [-0.25 * l, 0.25 * l] {
            let o = shift_surgery(&cur, m0, start, l, 0.5 * l, opts.zeta, opts)?;
            recs.push(SurgeryRecord { phase: 2, start, len: l, perturbation: o.perturbation });
            cur = materialize(o.system, q, opts.materialize)?;
        }
    }
    Ok((cur, recs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::BaseRotation;
    use crate::triangulation::{PwaField, Triangulation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rational(p: i64, q: i64, field: TranslationField) -> QpfSystem {
        QpfSystem::new(BaseRotation::rational(p, q).unwrap(), field).unwrap()
    }

    fn random_pwa(seed: u64) -> TranslationField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tri = Arc::new(Triangulation::regular(6, 6).unwrap());
        let vals: Vec<f64> = (0..tri.n_vertices()).map(|_| rng.gen_range(0.0..0.08)).collect();
        PwaField::new(tri, vals).unwrap().into()
    }

    #[test]
    fn witness_rejects_trivial_q() {
        let s = rational(0, 1, TranslationField::constant(0.1));
        assert!(matches!(conjugacy_witness(&s, 0.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn witness_half() {
        let s = rational(1, 2, TranslationField::arnold(0.1, 0.5, 0.2));
        let c = conjugacy_witness(&s, 0.3, 1).unwrap();
        assert_eq!(c.steps, 1);
    }

    #[test]
    fn witness_on_random_pwa() {
        for (p, q) in [(1, 3), (2, 5)] {
            let s = rational(p, q, random_pwa(p as u64 * 7 + q as u64));
            for j in 1..q {
                conjugacy_witness(&s, 0.123, j).unwrap();
            }
        }
    }

    #[test]
    fn identity_surgery_changes_nothing() {
        let s = rational(1, 3, TranslationField::arnold(0.05, 0.4, 0.1));
        let o = interval_surgery(&s, 0.1, 1.0 / 3.0, SurgeryTarget::Shift { profile: ThetaProfile::zero() }).unwrap();
        assert!(o.perturbation < 1e-9);
    }

    #[test]
    fn tapered_shift_is_realised() {
        let s = rational(1, 3, random_pwa(3));
        let prof = ThetaProfile::trapezoid(0.0, 1.0 / 3.0, 0.05, 0.01).unwrap();
        let o = interval_surgery(&s, 0.0, 1.0 / 3.0, SurgeryTarget::Shift { profile: prof.clone() }).unwrap();
        for i in 0..16 {
            let th = (i as f64 + 0.5) / 48.0;
            for k in 0..16 {
                let x = k as f64 / 16.0;
                let want = s.fibre_apply(th, x, 3) + prof.eval(th);
                assert!((o.system.fibre_apply(th, x, 3) - want).abs() < 1e-9);
            }
        }
        // untouched off I
        for th in [0.4, 0.7, 0.99] {
            for k in 0..16 {
                let x = k as f64 / 16.0;
                assert_eq!(o.system.field.apply(th, x), s.field.apply(th, x));
            }
        }
    }

    #[test]
    fn wide_interval_and_bad_target_rejected() {
        let s = rational(1, 3, TranslationField::constant(1.0 / 3.0));
        assert!(matches!(
            interval_surgery(&s, 0.0, 0.5, SurgeryTarget::Shift { profile: ThetaProfile::zero() }),
            Err(Error::IntervalTooWide { .. })
        ));
        let bump = SurgeryTarget::Bump {
            weight: ThetaProfile::trapezoid(0.0, 1.0 / 3.0, 0.05, 1.0).unwrap(),
            amplitude: 2.0,
            lobes: 3,
            offset: ThetaProfile::zero(),
        };
        assert!(matches!(interval_surgery(&s, 0.0, 1.0 / 3.0, bump), Err(Error::RepresentationInvalid(_))));
        let mismatch = SurgeryTarget::Shift { profile: ThetaProfile::constant(0.1) };
        assert!(matches!(interval_surgery(&s, 0.0, 1.0 / 3.0, mismatch), Err(Error::BoundaryMismatch { .. })));
    }

    #[test]
    fn rigid_identity_fibres_get_locked() {
        // Phi^q = 0 identically: every f^q_theta is the identity
        let s = rational(1, 3, TranslationField::constant(1.0 / 3.0));
        let opts = LockOptions { n_theta: 48, n_x: 256, ..Default::default() };
        let r = lock_all_fibres(&s, 1, 0.2, &opts).unwrap();
        assert!(!r.over_budget && r.perturbation < 0.2);
        let dense = period_grid(3, 97, 0.001);
        let full: Vec<f64> = (0..3).flat_map(|j| dense.iter().map(move |t| t + j as f64 / 3.0)).collect();
        let p = FibreSignProfile::scan(&r.system, 1, &full, 512).unwrap();
        assert!(p.min_margin() > 0.0, "{}", p.min_margin());
    }

    #[test]
    fn already_locked_is_unchanged() {
        let s = rational(1, 2, TranslationField::arnold(0.0, 0.5, 0.0));
        let r = lock_all_fibres(&s, 0, 0.1, &LockOptions { n_theta: 16, n_x: 128, ..Default::default() }).unwrap();
        assert!(r.surgeries.is_empty() && r.perturbation == 0.0);
    }

    #[test]
    fn zero_zeta_skips_phase_two() {
        let s = rational(1, 3, TranslationField::constant(1.0 / 3.0));
        let opts = LockOptions { zeta: 0.0, n_theta: 24, n_x: 128, ..Default::default() };
        let r = lock_all_fibres(&s, 1, 0.2, &opts).unwrap();
        assert!(r.surgeries.iter().all(|s| s.phase == 1));
    }

    #[test]
    fn runs_wrap_around() {
        let f = [true, false, false, true, true];
        assert_eq!(circular_runs(&f), vec![(3, 3)]);
        assert_eq!(circular_runs(&[false; 3]), vec![]);
    }

    #[test]
    fn random_field_sign_transport() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = rational(2, 5, random_pwa(11));
        for _ in 0..8 {
            let th: f64 = rng.gen();
            let p = FibreSignProfile::scan(&s, 0, &[th], 256).unwrap();
            let h = conjugacy_witness(&s, th, 1).unwrap();
            let pj = FibreSignProfile::scan(&s, 0, &[s.base_point(th, h.steps)], 256).unwrap();
            assert_eq!(p.gamma_plus[0] > 0.0, pj.gamma_plus[0] > 0.0);
        }
    }
}
