//! Command-line surface. The binary only parses arguments and maps errors
//! to exit codes; everything else lives here so it can be driven from tests.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad arguments, malformed
//! inputs), 1 for a failed stage. Inputs are parsed before any artifact is
//! written, so a usage error never leaves partial output behind.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::certify::{LockCertificate, DEFAULT_MIN_MARGIN};
use crate::error::{Error, Result};
use crate::io::{
    csv_text, read_csv, read_input, read_json, sign_raster, to_json, write_atomic, write_json, Artifact, ArtifactKind, CurvesData,
    ZeroSetData,
};
use crate::locking::{lock_all_fibres, LockOptions, SurgeryRecord};
use crate::pipeline::{mode_lock_pipeline, prepare_curves, prepare_zero_set, PipelineConfig, StageRecord};
use crate::rational::{BaseRotation, GOLDEN_MEAN};
use crate::render::{load_render_input, render_svg, RenderInput, RenderKind};
use crate::rotation::fibred_rotation_number;
use crate::staircase::{
    confirm_plateaus, default_level_tol, detect_plateaus, sweep_family, StaircaseData, StaircaseSample, TwistFamily,
};
use crate::system::QpfSystem;
use crate::tongue::{rationalize_base, tongue_boundary, FnFamily, RationalizeOptions, StepFamily};
use crate::zeroset::VertexClass;

#[derive(Debug, Parser)]
#[command(name = "toruslock", version, about = "Rotation numbers, tongues and mode-locking certificates for forced circle maps")]
pub struct Cli {
    /// Worker threads; TORUSLOCK_THREADS takes precedence when set.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fibred rotation number of a system (CSV).
    Rotnum(RotnumArgs),
    /// Tongue boundaries tau-(theta) <= tau+(theta) for an integer target (CSV).
    Tongue(TongueArgs),
    /// Move the base rotation to a nearby rational inside the tongue (JSON).
    Rationalize(RationalizeArgs),
    /// Lock every fibre of a rational-base system (JSON).
    LockFibres(LockArgs),
    /// Zero set of Phi^q after approximation and genericity (JSON, SVG).
    Zeroset(StageArgs),
    /// Boundary curve pair built on the zero set (JSON, SVG).
    Curves(StageArgs),
    /// Re-verify a stored certificate.
    Certify(CertifyArgs),
    /// Run everything and write a certificate (JSON, SVG).
    Pipeline(PipelineArgs),
    /// Rotation numbers along a twist family (CSV, JSON, SVG).
    Staircase(StaircaseArgs),
    /// Plateaus of staircase data (JSON).
    Plateaus(PlateausArgs),
    /// Render an artifact as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed recorded in the artifact and split per stage.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output file.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RotnumArgs {
    /// System JSON: `{"omega": ..., "field": ...}`.
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub theta0: f64,
    /// Base steps per orbit.
    #[arg(long, default_value_t = 100_000)]
    pub n_max: u64,
    /// Start fibres used for the spread.
    #[arg(long, default_value_t = 4)]
    pub theta_samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TongueArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Integer target of `G^q - id`, i.e. rotation number m0/q.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub m0: i64,
    /// Theta samples over one period of the base.
    #[arg(long, default_value_t = 64)]
    pub n_theta: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RationalizeArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 20_000)]
    pub probe_iterations: u64,
    #[arg(long, default_value_t = 256)]
    pub n_theta: usize,
    /// Place in the tongue, 0 at tau- and 1 at tau+.
    #[arg(long, default_value_t = 0.5)]
    pub tongue_position: f64,
    /// Also write the rationalized system here.
    #[arg(long)]
    pub system_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LockArgs {
    /// System with a rational base.
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Lift target; estimated from the rotation number when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub m0: Option<i64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Triangulation grid size; the smallest admissible one by default.
    #[arg(long)]
    pub n_grid: Option<usize>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Certificate JSON.
    #[arg(long)]
    pub cert: PathBuf,
    /// Optional report of the recomputed gaps.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub n_grid: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MIN_MARGIN)]
    pub min_margin: f64,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Stage log with timings (not byte-reproducible).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StaircaseArgs {
    /// Twist family JSON: `{"omega": ..., "members": ...}`.
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub tau_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_max: u64,
    /// Certify plateaus wider than three cells at their midpoints.
    #[arg(long)]
    pub confirm: bool,
    /// Full staircase data with plateaus.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PlateausArgs {
    /// Staircase JSON artifact or CSV table.
    #[arg(long)]
    pub data: PathBuf,
    /// Base rotation used to relate CSV levels to omega.
    #[arg(long, default_value_t = GOLDEN_MEAN)]
    pub omega: f64,
    /// Largest spread of rho inside a plateau; twice the largest half-width by default.
    #[arg(long)]
    pub level_tol: Option<f64>,
    /// Family to certify plateau midpoints with.
    #[arg(long)]
    pub family: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    /// Artifact kind; detected from content when omitted.
    #[arg(long, value_enum)]
    pub kind: Option<RenderKind>,
    #[arg(long, short)]
    pub out: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rotnum(_) => "rotnum",
            Command::Tongue(_) => "tongue",
            Command::Rationalize(_) => "rationalize",
            Command::LockFibres(_) => "lock-fibres",
            Command::Zeroset(_) => "zeroset",
            Command::Curves(_) => "curves",
            Command::Certify(_) => "certify",
            Command::Pipeline(_) => "pipeline",
            Command::Staircase(_) => "staircase",
            Command::Plateaus(_) => "plateaus",
            Command::Render(_) => "render",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 2,
        _ => 1,
    }
}

/// `[stage] message` for the diagnostic stream.
pub fn diagnostic(command: &str, e: &Error) -> String {
    match e {
        Error::Stage { stage, source } => format!("toruslock {command}: [{stage}] {source}"),
        Error::Usage(m) => format!("toruslock {command}: usage: {m}"),
        e => format!("toruslock {command}: [{command}] {e}"),
    }
}

fn usage(e: Error) -> Error {
    match e {
        Error::Usage(_) => e,
        e => Error::Usage(e.to_string()),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("--{name} must be positive, got {v}")))
    }
}

/// Parse and validate a system file.
pub fn load_system(path: &Path) -> Result<QpfSystem> {
    let s: QpfSystem = read_json(path)?;
    QpfSystem::new(s.omega, s.field).map_err(usage)
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn pipeline_config(seed: u64, n_grid: Option<usize>) -> PipelineConfig {
    PipelineConfig {
        seed,
        n_grid,
        ..PipelineConfig::default()
    }
}

fn log_stages(stages: &[StageRecord]) {
    for s in stages {
        let mut line = s.summary.to_string();
        if line.len() > 160 {
            line.truncate(line.floor_char_boundary(157));
            line.push_str("...");
        }
        eprintln!("  {:<12} {:>8.3}s  {line}", s.stage, s.seconds);
    }
}

#[derive(Serialize)]
struct LockData<'a> {
    system: &'a QpfSystem,
    m0: i64,
    perturbation: f64,
    over_budget: bool,
    min_margin_before: f64,
    min_margin_after: f64,
    surgeries: &'a [SurgeryRecord],
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be positive".into()));
        }
        if std::env::var_os("TORUSLOCK_THREADS").is_none() {
            std::env::set_var("TORUSLOCK_THREADS", n.to_string());
        }
    }
    let name = cli.command.name();
    let tagged = |e: Error| match e {
        Error::Usage(_) | Error::Stage { .. } => e,
        e => e.in_stage(name),
    };
    match cli.command {
        Command::Rotnum(a) => rotnum(a).map_err(tagged),
        Command::Tongue(a) => tongue(a).map_err(tagged),
        Command::Rationalize(a) => rationalize(a).map_err(tagged),
        Command::LockFibres(a) => lock_fibres(a).map_err(tagged),
        Command::Zeroset(a) => zeroset(a).map_err(tagged),
        Command::Curves(a) => curves(a).map_err(tagged),
        Command::Certify(a) => certify(a).map_err(tagged),
        Command::Pipeline(a) => pipeline(a).map_err(tagged),
        Command::Staircase(a) => staircase(a).map_err(tagged),
        Command::Plateaus(a) => plateaus(a).map_err(tagged),
        Command::Render(a) => render(a).map_err(tagged),
    }
}

fn rotnum(a: RotnumArgs) -> Result<()> {
    let sys = load_system(&a.map)?;
    if a.n_max == 0 {
        return Err(Error::Usage("--n-max must be positive".into()));
    }
    let e = fibred_rotation_number(&sys, a.theta0, a.n_max, a.theta_samples);
    let row = vec![
        f(a.theta0),
        f(e.value),
        f(e.half_width),
        e.iterations.to_string(),
        f(e.per_theta_spread),
    ];
    let header = ["theta0", "rho", "half_width", "iterations", "per_theta_spread"];
    write_atomic(&a.common.out, csv_text("rotnum", a.common.seed, &header, &[row]).as_bytes())
}

fn tongue(a: TongueArgs) -> Result<()> {
    let sys = load_system(&a.map)?;
    positive("tol", a.tol)?;
    if a.n_theta == 0 {
        return Err(Error::Usage("--n-theta must be positive".into()));
    }
    let b = match sys.omega {
        BaseRotation::Rational { value } => {
            let period = 1.0 / value.denom() as f64;
            let alphas: Vec<f64> = (0..a.n_theta).map(|i| period * i as f64 / a.n_theta as f64).collect();
            tongue_boundary(&StepFamily::new(&sys)?, &alphas, a.m0, a.tol)?
        }
        // one circle map per fibre
        BaseRotation::Irrational { .. } => {
            let alphas: Vec<f64> = (0..a.n_theta).map(|i| i as f64 / a.n_theta as f64).collect();
            let fam = FnFamily(|th: f64, tau: f64, x: f64| sys.field.apply(th, x) + tau);
            tongue_boundary(&fam, &alphas, a.m0, a.tol)?
        }
    };
    let rows: Vec<Vec<String>> = (0..b.alphas.len())
        .map(|i| vec![f(b.alphas[i]), f(b.tau_minus[i]), f(b.tau_plus[i])])
        .collect();
    let text = csv_text("tongue", a.common.seed, &["alpha", "tau_minus", "tau_plus"], &rows);
    write_atomic(&a.common.out, text.as_bytes())
}

fn rationalize(a: RationalizeArgs) -> Result<()> {
    let sys = load_system(&a.map)?;
    positive("eps", a.eps)?;
    let opts = RationalizeOptions {
        probe_iterations: a.probe_iterations,
        n_theta: a.n_theta,
        tongue_position: a.tongue_position,
        ..RationalizeOptions::default()
    };
    let r = rationalize_base(&sys, a.eps, &opts)?;
    if let Some(p) = &a.system_out {
        write_json(p, &r.system(&sys))?;
    }
    write_json(&a.common.out, &Artifact::new(ArtifactKind::Rationalization, a.common.seed, &r))
}

fn lock_fibres(a: LockArgs) -> Result<()> {
    let sys = load_system(&a.map)?;
    positive("eps", a.eps)?;
    let pq = sys.omega.as_rational().ok_or_else(|| Error::Usage("lock-fibres needs a rational base".into()))?;
    let m0 = match a.m0 {
        Some(m) => m,
        None => {
            let e = fibred_rotation_number(&sys, 0.0, 20_000, 1);
            (e.value * pq.denom() as f64).round() as i64
        }
    };
    let l = lock_all_fibres(&sys, m0, a.eps, &LockOptions::default())?;
    let data = LockData {
        system: &l.system,
        m0,
        perturbation: l.perturbation,
        over_budget: l.over_budget,
        min_margin_before: l.before.min_margin(),
        min_margin_after: l.after.min_margin(),
        surgeries: &l.surgeries,
    };
    write_json(&a.common.out, &Artifact::new(ArtifactKind::Lock, a.common.seed, data))
}

fn zeroset(a: StageArgs) -> Result<()> {
    let sys = load_system(&a.map)?;
    positive("eps", a.eps)?;
    let (z, stages) = prepare_zero_set(&sys, a.eps, &pipeline_config(a.common.seed, a.n_grid))?;
    log_stages(&stages);
    let data = ZeroSetData::new(z.rationalization.p_over_q, z.m0, &z.arrangement);
    write_json(&a.common.out, &Artifact::new(ArtifactKind::Zeroset, a.common.seed, &data))?;
    if let Some(p) = &a.svg {
        write_atomic(p, render_svg(&RenderInput::ZeroSet(data)).as_bytes())?;
    }
    Ok(())
}

fn curves(a: StageArgs) -> Result<()> {
    let sys = load_system(&a.map)?;
    positive("eps", a.eps)?;
    let (p, stages) = prepare_curves(&sys, a.eps, &pipeline_config(a.common.seed, a.n_grid))?;
    log_stages(&stages);
    let critical = p
        .arrangement
        .vertices
        .iter()
        .filter(|v| v.class != VertexClass::Regular)
        .map(|v| v.p)
        .collect();
    let data = CurvesData {
        p_over_q: p.rationalization.p_over_q,
        m0: p.m0,
        pair: p.pair,
        critical,
        raster: sign_raster(&p.arrangement),
    };
    write_json(&a.common.out, &Artifact::new(ArtifactKind::Curves, a.common.seed, &data))?;
    if let Some(s) = &a.svg {
        write_atomic(s, render_svg(&RenderInput::Curves(data)).as_bytes())?;
    }
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<()> {
    let cert: LockCertificate = read_json(&a.cert)?;
    let chk = cert.reverify()?;
    println!(
        "certificate verified: margin {:e} (stored {:e}), rotation {}",
        chk.margin, cert.margin, cert.claimed_rotation.value
    );
    if let Some(p) = &a.out {
        let report = json!({
            "verified": true,
            "margin": chk.margin,
            "stored_margin": cert.margin,
            "exact": chk.exact,
            "claimed_rotation": cert.claimed_rotation,
            "seed": cert.seed,
            "checks": chk.checks,
        });
        write_atomic(p, to_json(&report)?.as_bytes())?;
    }
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let sys = load_system(&a.map)?;
    positive("min-margin", a.min_margin)?;
    if !(a.eps >= 0.0) {
        return Err(Error::Usage(format!("--eps must be >= 0, got {}", a.eps)));
    }
    let mut cfg = pipeline_config(a.common.seed, a.n_grid);
    cfg.min_margin = a.min_margin;
    let out = mode_lock_pipeline(&sys, a.eps, &cfg)?;
    log_stages(&out.stages);
    write_atomic(&a.common.out, out.certificate.to_json()?.as_bytes())?;
    if let Some(p) = &a.report {
        write_json(p, &out.stages)?;
    }
    if let Some(p) = &a.svg {
        write_atomic(p, render_svg(&RenderInput::Certificate(Box::new(out.certificate))).as_bytes())?;
    }
    Ok(())
}

fn staircase(a: StaircaseArgs) -> Result<()> {
    let fam: TwistFamily = read_json(&a.family)?;
    if !(a.tau_max > a.tau_min) || a.samples < 2 || a.n_max == 0 {
        return Err(Error::Usage("need tau-min < tau-max, samples >= 2 and n-max > 0".into()));
    }
    let taus: Vec<f64> = (0..a.samples)
        .map(|i| a.tau_min + (a.tau_max - a.tau_min) * i as f64 / (a.samples - 1) as f64)
        .collect();
    let mut data = sweep_family(&fam, &taus, a.n_max)?;
    if a.confirm {
        confirm_plateaus(&fam, &mut data, DEFAULT_MIN_MARGIN)?;
    }
    let rows: Vec<Vec<String>> = data
        .samples
        .iter()
        .map(|s| vec![f(s.tau), f(s.rho), f(s.half_width)])
        .collect();
    let text = csv_text("staircase", a.common.seed, &["tau", "rho", "half_width"], &rows);
    write_atomic(&a.common.out, text.as_bytes())?;
    if let Some(p) = &a.json {
        write_json(p, &Artifact::new(ArtifactKind::Staircase, a.common.seed, &data))?;
    }
    if let Some(p) = &a.svg {
        let input = RenderInput::Staircase {
            samples: data.samples,
            plateaus: data.plateaus,
        };
        write_atomic(p, render_svg(&input).as_bytes())?;
    }
    Ok(())
}

fn load_staircase(path: &Path, omega: f64) -> Result<StaircaseData> {
    let text = read_input(path)?;
    if text.trim_start().starts_with('{') {
        let a: Artifact<StaircaseData> = read_json(path)?;
        if a.kind != ArtifactKind::Staircase {
            return Err(Error::Usage(format!("{} is not a staircase artifact", path.display())));
        }
        return Ok(a.data);
    }
    let t = read_csv(path)?;
    let (tau, rho, hw) = (t.column("tau")?, t.column("rho")?, t.column("half_width")?);
    Ok(StaircaseData {
        omega: BaseRotation::irrational(omega),
        n_max: 0,
        samples: (0..tau.len())
            .map(|i| StaircaseSample {
                tau: tau[i],
                rho: rho[i],
                half_width: hw[i],
            })
            .collect(),
        plateaus: Vec::new(),
    })
}

fn plateaus(a: PlateausArgs) -> Result<()> {
    let mut data = load_staircase(&a.data, a.omega)?;
    let fam: Option<TwistFamily> = a.family.as_deref().map(read_json).transpose()?;
    let tol = a.level_tol.unwrap_or_else(|| default_level_tol(&data));
    positive("level-tol", tol)?;
    data.plateaus = detect_plateaus(&data, tol);
    if let Some(fam) = &fam {
        confirm_plateaus(fam, &mut data, DEFAULT_MIN_MARGIN)?;
    }
    write_json(&a.common.out, &Artifact::new(ArtifactKind::Plateaus, a.common.seed, &data.plateaus))
}

fn render(a: RenderArgs) -> Result<()> {
    let input = load_render_input(&a.artifact, a.kind)?;
    write_atomic(&a.out, render_svg(&input).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommand_names_match_the_parser() {
        use clap::CommandFactory;
        let names: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
        assert_eq!(
            names,
            [
                "rotnum",
                "tongue",
                "rationalize",
                "lock-fibres",
                "zeroset",
                "curves",
                "certify",
                "pipeline",
                "staircase",
                "plateaus",
                "render"
            ]
        );
    }

    #[test]
    fn stage_errors_exit_one_with_their_tag() {
        let e = Error::Domain("boom".into()).in_stage("curves");
        assert_eq!(exit_code(&e), 1);
        assert_eq!(diagnostic("pipeline", &e), "toruslock pipeline: [curves] domain error: boom");
        assert_eq!(exit_code(&Error::Usage("x".into())), 2);
    }
}
