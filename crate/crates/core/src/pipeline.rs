//! The four-step perturbation from an arbitrary system to a certified
//! mode-locked one, with an audit record per stage.
//!
//! Stage seeds are derived from the run seed as
//! `splitmix64(seed ^ fnv1a64(stage_tag))`, so every stage can be replayed on
//! its own.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certify::{attracting_annulus, certify_annulus, pick_shift, LockCertificate, DEFAULT_MIN_MARGIN};
use crate::curves::{build_curves_with, CurvePair, JumpSpacing};
use crate::error::{Error, Result};
use crate::locking::{lock_all_fibres, LockOptions};
use crate::partition::{genericize, pwa_approximate, Genericized, RefineMode};
use crate::rational::BaseRotation;
use crate::system::{lift_distance, QpfSystem};
use crate::tongue::{rationalize_base, RationalizationResult, RationalizeOptions};
use crate::triangulation::{minimal_grid, triangulate};
use crate::zeroset::{extract_zero_set, VertexClass, ZeroSetArrangement};

/// Fraction of the budget left to the locking surgeries; the rest covers the
/// PWA approximation and the base shift.
const LOCK_SHARE: f64 = 0.8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Grid size of the triangulation; `None` picks the smallest admissible one.
    pub n_grid: Option<usize>,
    pub approx_delta: f64,
    /// Largest vertex displacement allowed to the genericity nudges.
    pub generic_budget: f64,
    pub min_margin: f64,
    /// Grid of the lift-distance audit.
    pub audit_grid: usize,
    pub rationalize: RationalizeOptions,
    pub lock: LockOptions,
    pub jump_spacing: JumpSpacing,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            n_grid: None,
            approx_delta: 1e-3,
            generic_budget: 1e-4,
            min_margin: DEFAULT_MIN_MARGIN,
            audit_grid: 128,
            rationalize: RationalizeOptions::default(),
            lock: LockOptions::default(),
            jump_spacing: JumpSpacing::Local,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
    pub summary: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub certificate: LockCertificate,
    pub stages: Vec<StageRecord>,
    /// Lift distance between the input and the certified system.
    pub perturbation: f64,
    /// True when the input certified without any perturbation.
    pub direct: bool,
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one stage, derived from the run seed and the stage tag.
pub fn stage_seed(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(tag))
}

struct Audit {
    stages: Vec<StageRecord>,
}

impl Audit {
    fn run<T>(&mut self, tag: &'static str, f: impl FnOnce() -> Result<(T, Value)>) -> Result<T> {
        let t = Instant::now();
        let (out, summary) = f().map_err(|e| e.in_stage(tag))?;
        self.stages.push(StageRecord {
            stage: tag.to_string(),
            seconds: t.elapsed().as_secs_f64(),
            summary,
        });
        Ok(out)
    }
}

/// Look for an attracting invariant annulus of the unperturbed system.
pub fn certify_directly(sys: &QpfSystem, min_margin: f64) -> Result<LockCertificate> {
    let mut last = None;
    for p in [1i64, 2, 3] {
        for x0 in [0.0, 0.25, 0.5, 0.75] {
            for hw in [0.05, 0.02, 0.1] {
                let Ok((gp, gm)) = attracting_annulus(sys, x0, 1024, 400, hw) else {
                    continue;
                };
                match certify_annulus(sys, p, &gp, &gm, min_margin) {
                    Ok(c) => return Ok(c),
                    Err(e) => last = Some(e),
                }
            }
        }
    }
    Err(last.unwrap_or_else(|| Error::NotCertified {
        family: "lower".into(),
        gap: f64::NAN,
        theta: 0.0,
    }))
}

/// Everything up to the curve pair, on the rationalized and locked system.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub rationalization: RationalizationResult,
    /// Base `p/q` with the genericized PWA field.
    pub system: QpfSystem,
    pub m0: i64,
    pub generic: Genericized,
    pub arrangement: ZeroSetArrangement,
    pub pair: CurvePair,
}

/// Everything up to the zero-set arrangement.
#[derive(Clone, Debug)]
pub struct ZeroSetStage {
    pub rationalization: RationalizationResult,
    /// Base `p/q` with the genericized PWA field.
    pub system: QpfSystem,
    pub m0: i64,
    pub generic: Genericized,
    pub arrangement: ZeroSetArrangement,
}

/// Either a direct certificate of the unperturbed input or a prepared stage.
enum Start<T> {
    Direct(PipelineOutput),
    Ready(Box<T>),
}

fn run_direct(sys: &QpfSystem, cfg: &PipelineConfig, audit: &mut Audit) -> Result<PipelineOutput> {
    let mut cert = audit.run("direct", || {
        let c = certify_directly(sys, cfg.min_margin)?;
        let v = json!({ "iterate": c.iterate, "margin": c.margin });
        Ok((c, v))
    })?;
    cert.perturbation = Some(0.0);
    cert.seed = Some(cfg.seed);
    Ok(PipelineOutput {
        certificate: cert,
        stages: std::mem::take(&mut audit.stages),
        perturbation: 0.0,
        direct: true,
    })
}

fn start_zero_set(sys: &QpfSystem, eps: f64, cfg: &PipelineConfig, audit: &mut Audit) -> Result<Start<ZeroSetStage>> {
    if !(eps > 0.0) {
        return run_direct(sys, cfg, audit).map(Start::Direct).map_err(|e| match e {
            Error::Stage { source, .. } => {
                Error::Domain(format!("epsilon = {eps} leaves no room and the input does not certify: {source}"))
            }
            e => e,
        });
    }
    if sys.omega.as_rational().is_some() {
        return Err(Error::Domain("the pipeline expects a nominally irrational base".into()).in_stage("rationalize"));
    }

    let t = Instant::now();
    let r = match rationalize_base(sys, eps, &cfg.rationalize) {
        Err(Error::PossiblyModeLocked { .. }) => return run_direct(sys, cfg, audit).map(Start::Direct),
        other => other.map_err(|e| e.in_stage("rationalize"))?,
    };
    let pq = r.p_over_q;
    let base_jump = (sys.omega.value() - pq.to_f64()).abs();
    audit.stages.push(StageRecord {
        stage: "rationalize".into(),
        seconds: t.elapsed().as_secs_f64(),
        summary: json!({
            "p": pq.numer(), "q": pq.denom(), "m0": r.m0, "delta": r.delta,
            "correction": r.correction_size(), "base_change": base_jump,
        }),
    });
    let rsys = r.system(sys);

    let lock_eps = LOCK_SHARE * (eps - r.correction_size() - base_jump);
    let lock = audit.run("lock", || {
        if !(lock_eps > 0.0) {
            return Err(Error::DeltaInfeasible(format!("no budget left for locking ({lock_eps})")));
        }
        let l = lock_all_fibres(&rsys, r.m0, lock_eps, &cfg.lock)?;
        let v = json!({
            "budget": lock_eps, "perturbation": l.perturbation,
            "surgeries": l.surgeries, "over_budget": l.over_budget,
        });
        Ok((l, v))
    })?;

    let n = cfg.n_grid.unwrap_or_else(|| minimal_grid(pq, 8, 64));
    let approx = audit.run("approximate", || {
        let tri = Arc::new(triangulate(pq, n, stage_seed(cfg.seed, "triangulate"))?);
        let a = pwa_approximate(&lock.system.field, tri, cfg.approx_delta, stage_seed(cfg.seed, "approximate"))?;
        let v = json!({ "n_grid": n, "sup_error": a.sup_error });
        Ok((a, v))
    })?;

    let generic = audit.run("genericize", || {
        let g = genericize(
            &approx.field,
            pq,
            r.m0,
            stage_seed(cfg.seed, "genericize"),
            cfg.generic_budget,
            RefineMode::ZeroSet,
        )?;
        let v = json!({
            "polygons": g.partition.len(), "rounds": g.rounds, "nudges": g.accepted_nudges,
            "displacement": g.displacement, "margin_v": g.scan.margin_v, "margin_s": g.scan.margin_s,
        });
        Ok((g, v))
    })?;

    let arr = audit.run("zeroset", || {
        let a = extract_zero_set(&generic.partition)?;
        let v = json!({
            "segments": a.segments.len(),
            "components": a.components.iter().map(|c| c.class).collect::<Vec<_>>(),
            "left_critical": a.count_class(VertexClass::LeftCritical),
            "right_critical": a.count_class(VertexClass::RightCritical),
            "regions": a.regions.len(),
        });
        Ok((a, v))
    })?;

    let system = QpfSystem::new_unchecked(BaseRotation::Rational { value: pq }, generic.field.clone().into());
    Ok(Start::Ready(Box::new(ZeroSetStage {
        m0: r.m0,
        rationalization: r,
        system,
        generic,
        arrangement: arr,
    })))
}

fn start(sys: &QpfSystem, eps: f64, cfg: &PipelineConfig, audit: &mut Audit) -> Result<Start<Prepared>> {
    let z = match start_zero_set(sys, eps, cfg, audit)? {
        Start::Direct(out) => return Ok(Start::Direct(out)),
        Start::Ready(z) => *z,
    };
    let pair = audit.run("curves", || {
        let p = build_curves_with(&z.arrangement, stage_seed(cfg.seed, "curves"), cfg.jump_spacing)?;
        let v = json!({
            "k": p.k, "m": p.m, "targets": p.targets, "verticals": p.verticals,
            "epsilon": p.epsilon, "clearance": p.clearance,
        });
        Ok((p, v))
    })?;
    Ok(Start::Ready(Box::new(Prepared {
        rationalization: z.rationalization,
        system: z.system,
        m0: z.m0,
        generic: z.generic,
        arrangement: z.arrangement,
        pair,
    })))
}

/// Steps 1 to 3 up to the zero-set arrangement. Inputs that would
/// short-circuit to a direct certificate are reported as a domain error.
pub fn prepare_zero_set(sys: &QpfSystem, eps: f64, cfg: &PipelineConfig) -> Result<(ZeroSetStage, Vec<StageRecord>)> {
    let mut audit = Audit { stages: Vec::new() };
    match start_zero_set(sys, eps, cfg, &mut audit)? {
        Start::Ready(z) => Ok((*z, audit.stages)),
        Start::Direct(_) => Err(Error::Domain("input certifies without perturbation; nothing to build".into())),
    }
}

/// Steps 1 to 4 up to the curve pair, without certifying. Inputs that would
/// short-circuit to a direct certificate are reported as a domain error.
pub fn prepare_curves(sys: &QpfSystem, eps: f64, cfg: &PipelineConfig) -> Result<(Prepared, Vec<StageRecord>)> {
    let mut audit = Audit { stages: Vec::new() };
    match start(sys, eps, cfg, &mut audit)? {
        Start::Ready(p) => Ok((*p, audit.stages)),
        Start::Direct(_) => Err(Error::Domain("input certifies without perturbation; nothing to build".into())),
    }
}

/// Rationalize, lock, approximate, build curves and certify.
pub fn mode_lock_pipeline(sys: &QpfSystem, eps: f64, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let mut audit = Audit { stages: Vec::new() };
    let prep = match start(sys, eps, cfg, &mut audit)? {
        Start::Direct(out) => return Ok(out),
        Start::Ready(p) => p,
    };
    let pick = audit.run("certify", || {
        let pk = pick_shift(&prep.system, prep.m0, &prep.pair, cfg.min_margin)?;
        let v = json!({
            "shift": pk.shift, "attempts": pk.attempts, "margin": pk.certificate.margin,
            "check_log": pk.certificate.check_log,
        });
        Ok((pk, v))
    })?;

    let mut cert = pick.certificate;
    let perturbation = audit.run("perturbation", || {
        let d = lift_distance(sys, &cert.system, cfg.audit_grid);
        if d > eps {
            return Err(Error::DeltaInfeasible(format!("total perturbation {d} exceeds epsilon {eps}")));
        }
        Ok((d, json!({ "lift_distance": d, "epsilon": eps })))
    })?;
    cert.perturbation = Some(perturbation);
    cert.seed = Some(cfg.seed);
    Ok(PipelineOutput {
        certificate: cert,
        stages: audit.stages,
        perturbation,
        direct: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TranslationField;

    #[test]
    fn stage_seeds_differ_and_repeat() {
        assert_eq!(stage_seed(7, "curves"), stage_seed(7, "curves"));
        assert_ne!(stage_seed(7, "curves"), stage_seed(7, "genericize"));
        assert_ne!(stage_seed(7, "curves"), stage_seed(8, "curves"));
    }

    #[test]
    fn attracting_input_short_circuits() {
        let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(0.0, 0.8, 0.1)).unwrap();
        let out = mode_lock_pipeline(&sys, 0.1, &PipelineConfig::default()).unwrap();
        assert!(out.direct);
        assert_eq!(out.perturbation, 0.0);
    }

    #[test]
    fn zero_epsilon_needs_direct_certificate() {
        let rigid = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.25)).unwrap();
        assert!(matches!(
            mode_lock_pipeline(&rigid, 0.0, &PipelineConfig::default()),
            Err(Error::Domain(_))
        ));
        let att = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(0.0, 0.8, 0.1)).unwrap();
        assert!(mode_lock_pipeline(&att, 0.0, &PipelineConfig::default()).unwrap().direct);
    }
}
