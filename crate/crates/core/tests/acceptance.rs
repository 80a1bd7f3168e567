//! Acceptance run: every criterion prints one PASS/FAIL line, and the process
//! exits non-zero if any fails.
//!
//! Oracles here are written independently of the library: brute-force orbits
//! for rotation numbers, direct composition for `Phi^q`, exact rational
//! detection through sign changes of `G^k - id - m`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toruslock::certify::{check_annulus, LockCertificate};
use toruslock::curves::{build_curves, CurvePair, Side};
use toruslock::field::{tent, SurgeryTarget, ThetaProfile};
use toruslock::locking::{conjugacy_witness, interval_surgery};
use toruslock::partition::{genericize, refine_partition, RefineMode, CV_FIBRE_TOL};
use toruslock::pipeline::{mode_lock_pipeline, PipelineConfig, PipelineOutput};
use toruslock::rotation::{fibred_rotation_number, rotation_number_circle};
use toruslock::staircase::{sweep_family, TwistFamily};
use toruslock::tongue::{tongue_boundary, StepFamily};
use toruslock::triangulation::{circle_dist, minimal_grid, triangulate, PwaField};
use toruslock::zeroset::fixtures::{arrangement, horizontal_circles, slanted_diamond};
use toruslock::zeroset::{extract_zero_set, VertexClass, ZeroSetArrangement};
use toruslock::{BaseRotation, QpfSystem, Rational, TranslationField};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rational(p: i64, q: i64) -> Rational {
    Rational::new(p, q).unwrap()
}

/// A random valid PWA field: a smooth random wave sampled on a seeded
/// triangulation plus per-vertex noise, with `x`-slope at most about `slope`
/// in absolute value. The grid is raised to the smallest admissible one.
fn random_pwa(omega: Rational, n_grid: usize, center: f64, slope: f64, seed: u64) -> PwaField {
    let n = n_grid.max(minimal_grid(omega, 4, 64));
    let tri = Arc::new(triangulate(omega, n, seed).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..=2) as f64,
                rng.gen_range(-2..=2) as f64,
                rng.gen_range(0.0..1.0),
            )
        })
        .collect();
    let steepest: f64 = waves.iter().map(|w| w.0.abs() * 2.0 * PI * w.1).sum();
    let c = 0.9 * slope / steepest;
    let noise = 0.05 * slope / n as f64;
    let smooth = PwaField::sample(tri.clone(), |t, x| {
        center
            + c * waves
                .iter()
                .map(|&(a, kx, kt, ph)| a * (2.0 * PI * (kx * x + kt * t + ph)).sin())
                .sum::<f64>()
    })
    .unwrap();
    let vals = smooth
        .values()
        .iter()
        .map(|v| v + rng.gen_range(-noise..=noise))
        .collect();
    PwaField::new(tri, vals).unwrap()
}

/// `Phi^q - m0` by composing the fibre maps one step at a time.
fn direct_phi_q(f: &PwaField, omega: Rational, m0: i64, theta: f64, x: f64) -> f64 {
    let step = omega.numer() as f64 / omega.denom() as f64;
    let (mut t, mut y) = (theta, x);
    for _ in 0..omega.denom() {
        y += f.eval(t.rem_euclid(1.0), y.rem_euclid(1.0));
        t += step;
    }
    y - x - m0 as f64
}

/// Exact rotation number `m/k` of a circle-homeomorphism lift when it has a
/// periodic orbit of period `<= k_max`. An integer `m` between the smallest
/// and largest sampled `G^k(x) - x` is a zero of `G^k - id - m` by the
/// intermediate value theorem, so a `Some` is never wrong.
fn exact_rotation(g: &dyn Fn(f64) -> f64, k_max: i64, grid: usize) -> Option<(i64, i64)> {
    let xs: Vec<f64> = (0..grid).map(|i| i as f64 / grid as f64).collect();
    let mut zs = xs.clone();
    for k in 1..=k_max {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (z, &x) in zs.iter_mut().zip(&xs) {
            *z = g(*z);
            lo = lo.min(*z - x);
            hi = hi.max(*z - x);
        }
        let m = lo.ceil();
        if m <= hi {
            return Some((m as i64, k));
        }
    }
    None
}

fn c1_rotation_accuracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let alpha: f64 = rng.gen_range(-1.0..1.0);
        let sys = QpfSystem::new(BaseRotation::irrational(rng.gen_range(0.01..0.99)), TranslationField::constant(alpha))
            .map_err(|e| e.to_string())?;
        let e = fibred_rotation_number(&sys, 0.0, 1000, 4);
        ensure!(e.value == alpha, "rigid alpha {alpha}: estimate {}", e.value);
        let c = rotation_number_circle(|x| x + alpha, 1000, 0.0);
        ensure!(c.value == alpha, "circle alpha {alpha}: estimate {}", c.value);
    }
    let (tau, k) = (0.2, 0.5);
    let arnold = |x: f64| x + tau + k / (2.0 * PI) * (2.0 * PI * x).sin();
    let n_oracle = 10_000_000u64;
    let mut x = 0.0f64;
    let mut wraps = 0.0f64;
    for _ in 0..n_oracle {
        let y = arnold(x);
        let f = y.floor();
        wraps += f;
        x = y - f;
    }
    let oracle = (wraps + x) / n_oracle as f64;
    let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(tau, k, 0.0)).map_err(|e| e.to_string())?;
    let n = 100_000u64;
    let t = Instant::now();
    let e = fibred_rotation_number(&sys, 0.0, n, 1);
    let secs = t.elapsed().as_secs_f64();
    let err = (e.value - oracle).abs();
    ensure!(err <= 2.0 / n as f64, "Arnold estimate {} vs oracle {oracle}: {err:e}", e.value);
    ensure!(secs < 5.0, "Arnold estimate took {secs:.2}s");
    Ok(format!("20 rigid exact; Arnold |est - oracle| = {err:.1e} <= {:.0e} in {secs:.3}s", 2.0 / n as f64))
}

fn c2_tongue_boundary() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for k in [0.25, 0.5] {
        let sys = QpfSystem::new(BaseRotation::rational(0, 1).unwrap(), TranslationField::arnold(0.0, k, 0.0))
            .map_err(|e| e.to_string())?;
        let fam = StepFamily::new(&sys).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let b = tongue_boundary(&fam, &[0.0, 0.25, 0.5, 0.75], 0, 1e-12).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let w = k / (2.0 * PI);
        for i in 0..b.alphas.len() {
            let e = (b.tau_minus[i] + w).abs().max((b.tau_plus[i] - w).abs());
            ensure!(e <= 1e-6, "K = {k}: [{}, {}] vs +-{w}", b.tau_minus[i], b.tau_plus[i]);
            worst = worst.max(e);
        }
        ensure!(secs < 1.0, "K = {k} took {secs:.2}s");
        slowest = slowest.max(secs);
    }
    Ok(format!("max |tau - (+-K/2pi)| = {worst:.1e}, slowest K {slowest:.3}s"))
}

fn c3_staircase_plateau() -> Outcome {
    let k = 0.5;
    let family = TwistFamily::arnold(BaseRotation::golden(), k, 0.0);
    let (lo, hi, n) = (-0.25, 0.25, 401);
    let cell = (hi - lo) / (n - 1) as f64;
    let taus: Vec<f64> = (0..n).map(|i| lo + i as f64 * cell).collect();
    let data = sweep_family(&family, &taus, 10_000).map_err(|e| e.to_string())?;
    ensure!(data.monotonicity_violation().is_none(), "library reports a monotonicity violation");
    for w in data.samples.windows(2) {
        let slack = w[0].half_width + w[1].half_width;
        ensure!(w[1].rho >= w[0].rho - slack, "rho drops at tau = {}", w[1].tau);
    }
    let p = data
        .plateaus
        .iter()
        .find(|p| p.level.abs() < 1e-3 && p.tau_lo < 0.0 && p.tau_hi > 0.0)
        .ok_or("no plateau at rho = 0")?;
    // each sample stands for its cell, so the span of samples plus one cell
    let width = p.width() + cell;
    let want = k / PI;
    let err = (width - want).abs();
    ensure!(err <= cell + 1e-4, "plateau width {width} vs K/pi = {want}");
    Ok(format!("width {width:.5} vs K/pi {want:.5} (|diff| {err:.1e} <= cell {cell:.4} + 1e-4); monotone"))
}

/// Orbit average of `G` over `n` steps from 0.
fn orbit_rotation(g: &dyn Fn(f64) -> f64, n: u64) -> f64 {
    let (mut x, mut wraps) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let y = g(x);
        let f = y.floor();
        wraps += f;
        x = y - f;
    }
    (wraps + x) / n as f64
}

fn c4_conjugacy_invariance() -> Outcome {
    // Fibres with an irrational rotation number cannot be compared to 1e-9
    // in finite time, so each p/q uses the first seeded field whose sampled
    // fibres all have a periodic orbit; conjugate fibres must then carry the
    // same exact m/k. Unlocked fibres of rejected fields are compared at the
    // orbit-average bound 2/n and reported separately.
    let (mut exact_pairs, mut periods, mut loose_pairs) = (0, Vec::new(), 0);
    for (p, q) in [(1, 2), (1, 3), (2, 5)] {
        let om = rational(p, q);
        let mut accepted = false;
        let mut loose_done = false;
        for seed in 0..40u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + 17 * q as u64 + seed);
            let f = random_pwa(om, 12, rng.gen_range(0.0..1.0), 0.9, 40 + seed);
            let sys = QpfSystem::new(BaseRotation::rational(p, q).unwrap(), f.into()).map_err(|e| e.to_string())?;
            let rho = |th: f64| exact_rotation(&|x| sys.fibre_apply(th, x, q), 400, 1024);
            let thetas: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut base = Vec::new();
            for &th in &thetas {
                match rho(th) {
                    Some(r) => base.push(r),
                    None => break,
                }
            }
            let conjugates = |th: f64| -> Result<Vec<f64>, String> {
                (1..q)
                    .map(|j| {
                        let w = conjugacy_witness(&sys, th, j).map_err(|e| e.to_string())?;
                        let tj = sys.base_point(th, w.steps);
                        ensure!(circle_dist(tj, th + j as f64 / q as f64) < 1e-12, "witness lands on {tj}");
                        Ok(tj)
                    })
                    .collect()
            };
            if base.len() < thetas.len() {
                if !loose_done {
                    let th = thetas[base.len()];
                    let n = 200_000;
                    let r0 = orbit_rotation(&|x| sys.fibre_apply(th, x, q), n);
                    for tj in conjugates(th)? {
                        let rj = orbit_rotation(&|x| sys.fibre_apply(tj, x, q), n);
                        ensure!((r0 - rj).abs() <= 2.0 / n as f64, "{p}/{q}: unlocked fibres {r0} vs {rj}");
                        loose_pairs += 1;
                    }
                    loose_done = true;
                }
                continue;
            }
            for (&th, &r0) in thetas.iter().zip(&base) {
                for tj in conjugates(th)? {
                    let rj = rho(tj).ok_or(format!("{p}/{q}: {r0:?} at {th} but no periodic orbit at {tj}"))?;
                    let d = (r0.0 as f64 / r0.1 as f64 - rj.0 as f64 / rj.1 as f64).abs();
                    ensure!(d <= 1e-9, "{p}/{q}, theta {th}: {r0:?} vs {rj:?}");
                    exact_pairs += 1;
                    periods.push(r0.1.max(rj.1));
                }
            }
            accepted = true;
            break;
        }
        ensure!(accepted, "{p}/{q}: no seeded field with all sampled fibres locked");
    }
    periods.sort_unstable();
    periods.dedup();
    Ok(format!(
        "{exact_pairs} locked fibre pairs agree exactly (periods {periods:?}); {loose_pairs} unlocked pairs within 2/n"
    ))
}

fn c5_surgery() -> Outcome {
    let mut worst: f64 = 0.0;
    for (p, q, seed) in [(1, 2, 5u64), (1, 3, 6), (2, 5, 7)] {
        let om = rational(p, q);
        let f = random_pwa(om, 10, 0.3, 0.4, seed);
        let sys = QpfSystem::new(BaseRotation::rational(p, q).unwrap(), f.into()).map_err(|e| e.to_string())?;
        let (start, len) = (0.2, 1.0 / q as f64);
        let weight = ThetaProfile::trapezoid(start, len, 0.2 * len, 1.0).map_err(|e| e.to_string())?;
        let (amp, lobes) = (0.03, 2);
        let target = SurgeryTarget::Bump {
            weight: weight.clone(),
            amplitude: amp,
            lobes,
            offset: ThetaProfile::zero(),
        };
        let out = interval_surgery(&sys, start, len, target).map_err(|e| e.to_string())?;
        for i in 0..16 {
            let th = start + len * (i as f64 + 0.5) / 16.0;
            for k in 0..16 {
                let x = (k as f64 + 0.25) / 16.0;
                let psi = sys.fibre_apply(th, x, q) + weight.eval(th) * amp * tent(x, lobes);
                let got = out.system.fibre_apply(th, x, q);
                worst = worst.max((got - psi).abs());
            }
        }
        ensure!(worst <= 1e-9, "{p}/{q}: f~^q differs from psi by {worst:e}");
        for i in 0..64 {
            let th = (start + len + (1.0 - len) * (i as f64 + 0.5) / 64.0).rem_euclid(1.0);
            for k in 0..16 {
                let x = k as f64 / 16.0;
                ensure!(
                    out.system.field.apply(th, x) == sys.field.apply(th, x),
                    "{p}/{q}: map changed off I at theta = {th}"
                );
            }
        }
    }
    Ok(format!("max |f~^q - psi| = {worst:.1e} on I; identical off I"))
}

fn c6_partition_oracle() -> Outcome {
    let cases = [(0, 1, 16), (1, 2, 12), (1, 3, 16), (2, 3, 24), (1, 2, 32), (1, 3, 9), (2, 3, 12), (0, 1, 32), (1, 2, 20), (1, 3, 30)];
    let mut probes = 0usize;
    let mut banded = 0usize;
    let mut worst_area: f64 = 0.0;
    for (s, &(p, q, n)) in cases.iter().enumerate() {
        let om = rational(p, q);
        let m0 = 1;
        let f = random_pwa(om, n, m0 as f64 / q as f64, 0.5, 100 + s as u64);
        let part = refine_partition(&f, om, m0, RefineMode::Full).map_err(|e| e.to_string())?;
        worst_area = worst_area.max((part.total_area - 1.0).abs());
        ensure!((part.total_area - 1.0).abs() <= 1e-9, "system {s}: area {}", part.total_area);
        for i in 0..128 {
            for k in 0..128 {
                let (th, x) = ((i as f64 + 0.5) / 128.0, (k as f64 + 0.5) / 128.0);
                let direct = direct_phi_q(&f, om, m0, th, x);
                if direct.abs() <= 1e-9 {
                    banded += 1;
                    continue;
                }
                let v = part.eval(th, x).ok_or(format!("system {s}: ({th}, {x}) in no polygon"))?;
                ensure!(
                    v.signum() == direct.signum(),
                    "system {s}: sign at ({th}, {x}) is {v:e}, direct {direct:e}"
                );
                probes += 1;
            }
        }
    }
    Ok(format!(
        "{probes} probes agree, {banded} inside the 1e-9 band; max |area - 1| = {worst_area:.1e}"
    ))
}

fn c7_genericity() -> Outcome {
    let mut checked = (0usize, 0usize, 0usize);
    for (s, (p, q, n)) in [(1, 2, 12), (1, 3, 16), (2, 3, 12), (0, 1, 16), (1, 2, 24)].into_iter().enumerate() {
        let om = rational(p, q);
        let m0 = 1;
        let f = random_pwa(om, n, m0 as f64 / q as f64, 0.5, 200 + s as u64);
        let g = genericize(&f, om, m0, 9, 1e-3, RefineMode::Full).map_err(|e| e.to_string())?;
        let part = &g.partition;
        ensure!(g.scan.margin_v > 0.0 && g.scan.margin_s > 0.0, "system {s}: zero margins");
        ensure!(g.displacement <= 1e-3, "system {s}: displacement {}", g.displacement);
        for i in 0..part.len() {
            for &z in part.polygon(i) {
                let v = part.value(i, z);
                ensure!(v.abs() >= g.scan.margin_v, "system {s}: |Phi^q| = {v:e} at {z:?}");
                checked.0 += 1;
            }
            ensure!(part.phi[i][2].abs() >= g.scan.margin_s, "system {s}: polygon {i} slope {:e}", part.phi[i][2]);
            checked.1 += 1;
        }
        let arr = extract_zero_set(part).map_err(|e| e.to_string())?;
        let cv: Vec<f64> = arr.critical_vertices().map(|(_, v)| v.p[0]).collect();
        for a in 0..cv.len() {
            for b in a + 1..cv.len() {
                ensure!(circle_dist(cv[a], cv[b]) > CV_FIBRE_TOL, "system {s}: critical vertices share theta = {}", cv[a]);
            }
        }
        checked.2 += cv.len();
    }
    Ok(format!(
        "{} vertex values, {} slopes, {} critical vertices on distinct fibres",
        checked.0, checked.1, checked.2
    ))
}

/// Properties of one pair: piece lengths, jump placement, junction
/// alternation with matching endpoints, closure within `M + 1` targets.
fn curve_invariants(arr: &ZeroSetArrangement, pair: &CurvePair) -> Result<(), String> {
    let eps = pair.epsilon;
    let m = {
        let mut th: Vec<f64> = arr
            .vertices
            .iter()
            .filter(|v| v.class == VertexClass::RightCritical)
            .map(|v| v.p[0].rem_euclid(1.0))
            .collect();
        th.sort_by(f64::total_cmp);
        th.dedup_by(|a, b| circle_dist(*a, *b) < 1e-12);
        th.len()
    };
    ensure!(pair.targets.len() <= m + 1, "{} targets with M = {m}", pair.targets.len());
    ensure!(pair.verticals.len() == pair.targets.len(), "verticals do not match targets");
    for (i, t) in pair.targets.iter().enumerate() {
        let pc = &pair.pieces[i];
        ensure!(pc.theta_end - pc.theta_start > eps / 3.0, "piece {i} has length {}", pc.theta_end - pc.theta_start);
        ensure!((pc.theta_end - (t.theta - eps / 10.0)).abs() < 1e-12, "piece {i} ends at {}", pc.theta_end);
        let v = &pair.verticals[i];
        ensure!(v.side == t.side && v.theta == pc.theta_end, "vertical {i} misplaced");
        let (lm, lp) = (pc.minus[pc.minus.len() - 1], pc.plus[pc.plus.len() - 1]);
        if let Some(next) = pair.pieces.get(i + 1) {
            let (fm, fp) = (next.minus[0], next.plus[0]);
            let (jump, stay) = match v.side {
                Side::Minus => ((lm, fm), (lp, fp)),
                Side::Plus => ((lp, fp), (lm, fm)),
            };
            // exactly one side jumps, from the end of one piece to the start of the next
            ensure!(stay.0 == stay.1, "junction {i}: both sides move");
            ensure!(jump.0[1] == v.from && jump.1[1] == v.to, "junction {i}: endpoints do not match");
            ensure!(jump.1[0] == v.theta, "junction {i}: next piece starts at {}", jump.1[0]);
        }
        let up = v.to > v.from;
        ensure!(up == (v.side == Side::Minus), "junction {i}: {:?} jump goes the wrong way", v.side);
    }
    Ok(())
}

fn c8_curve_builder() -> Outcome {
    let mut seen = Vec::new();
    for (name, f) in [("corridor", horizontal_circles(10)), ("diamond", slanted_diamond(40))] {
        let (_, arr) = arrangement(&f).map_err(|e| e.to_string())?;
        for seed in 0..6 {
            let pair = build_curves(&arr, seed).map_err(|e| format!("{name}, seed {seed}: {e}"))?;
            curve_invariants(&arr, &pair).map_err(|e| format!("{name}, seed {seed}: {e}"))?;
            ensure!(pair.gamma_minus.k >= 1, "{name}: k = {}", pair.gamma_minus.k);
            seen.push(format!("{name} k={} m={} targets={}", pair.k, pair.m, pair.targets.len()));
        }
    }
    seen.dedup();
    Ok(seen.join("; "))
}

/// Pipeline runs shared by the last two criteria.
struct Certified {
    name: &'static str,
    out: PipelineOutput,
    seconds: f64,
}

fn run_examples() -> Vec<Result<Certified, String>> {
    let cases: [(&'static str, TranslationField, f64); 2] = [
        ("rigid golden", TranslationField::constant(0.25), 0.2),
        ("Arnold", TranslationField::arnold(0.2, 0.5, 0.1), 0.3),
    ];
    cases
        .into_iter()
        .map(|(name, field, eps)| {
            let sys = QpfSystem::new(BaseRotation::golden(), field).map_err(|e| e.to_string())?;
            let t = Instant::now();
            let out = mode_lock_pipeline(&sys, eps, &PipelineConfig::default()).map_err(|e| format!("{name}: {e}"))?;
            Ok(Certified { name, out, seconds: t.elapsed().as_secs_f64() })
        })
        .collect()
}

fn perturbed(cert: &LockCertificate, delta: f64, rng: &mut ChaCha8Rng) -> Result<QpfSystem, String> {
    let f = cert.system.field.as_pwa().ok_or("certified field is not PWA")?;
    let vals = f.values().iter().map(|v| v + rng.gen_range(-delta..=delta)).collect();
    let g = PwaField::new(f.tri.clone(), vals).map_err(|e| e.to_string())?;
    Ok(QpfSystem::new_unchecked(cert.system.omega, g.into()))
}

fn c9_certificates(runs: &[Result<Certified, String>]) -> Outcome {
    let mut lines = Vec::new();
    for r in runs {
        let c = r.as_ref().map_err(|e| e.clone())?;
        let cert = &c.out.certificate;
        let n_grid = c
            .out
            .stages
            .iter()
            .find(|s| s.stage == "approximate")
            .and_then(|s| s.summary["n_grid"].as_u64());
        ensure!(n_grid.map_or(true, |n| n <= 64), "{}: n_grid {n_grid:?}", c.name);
        ensure!(cert.margin > 1e-7, "{}: margin {:e}", c.name, cert.margin);
        ensure!(c.seconds < 60.0, "{}: pipeline took {:.1}s", c.name, c.seconds);
        let back = LockCertificate::from_json(&cert.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let chk = back.reverify().map_err(|e| format!("{}: {e}", c.name))?;
        let drift = (chk.margin - cert.margin).abs();
        ensure!(drift <= 1e-12, "{}: re-verified margin differs by {drift:e}", c.name);
        let delta = cert.margin / (4.0 * cert.iterate as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut valid = 0;
        let mut worst = f64::INFINITY;
        for _ in 0..20 {
            let sys = perturbed(cert, delta, &mut rng)?;
            let m = check_annulus(&sys, cert.iterate, cert.theta_lift, Some(cert.x_lift), &cert.gamma_plus, &cert.gamma_minus)
                .map(|a| a.margin)
                .unwrap_or(f64::NEG_INFINITY);
            worst = worst.min(m);
            if m > 0.0 {
                valid += 1;
            }
        }
        ensure!(valid == 20, "{}: {valid}/20 perturbed systems stay certified (worst margin {worst:e})", c.name);
        lines.push(format!(
            "{}: margin {:.2e}, reverify drift {drift:.0e}, 20/20 at delta {delta:.1e}, {:.1}s",
            c.name, cert.margin, c.seconds
        ));
    }
    Ok(lines.join("; "))
}

fn c10_openness(runs: &[Result<Certified, String>]) -> Outcome {
    let n = 10_000u64;
    let mut lines = Vec::new();
    for r in runs {
        let c = r.as_ref().map_err(|e| e.clone())?;
        let cert = &c.out.certificate;
        // brute-force orbit of the certified system
        let sys = &cert.system;
        let mut worst: f64 = 0.0;
        for th0 in [0.0, 0.3, 0.7] {
            let mut x = 0.0f64;
            let mut t: f64 = th0;
            let step = sys.omega.value();
            for _ in 0..n {
                x = sys.field.apply(t.rem_euclid(1.0), x);
                t += step;
            }
            worst = worst.max((x / n as f64 - cert.claimed_rotation.value).abs());
        }
        ensure!(worst <= 2.0 / n as f64, "{}: |rho - claimed| = {worst:e}", c.name);
        lines.push(format!("{}: |rho - claimed| = {worst:.1e}", c.name));
    }
    Ok(format!("{} (bound {:.0e})", lines.join("; "), 2.0 / n as f64))
}

/// `ACCEPTANCE_ONLY=4,6` runs a subset.
fn selected(id: usize) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(v) => v.split(',').any(|s| s.trim() == id.to_string()),
        Err(_) => true,
    }
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    if !selected(id) {
        return true;
    }
    let t = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = t.elapsed().as_secs_f64();
    match r {
        Ok(msg) => {
            println!("[PASS] {id:>2} {name} ({secs:.1}s): {msg}");
            true
        }
        Err(msg) => {
            println!("[FAIL] {id:>2} {name} ({secs:.1}s): {msg}");
            false
        }
    }
}

fn main() {
    // `cargo test -- --list` and similar probes run the binary with flags
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut ok = true;
    ok &= report(1, "rotation-number accuracy", c1_rotation_accuracy);
    ok &= report(2, "tongue boundary", c2_tongue_boundary);
    ok &= report(3, "staircase plateau", c3_staircase_plateau);
    ok &= report(4, "conjugacy invariance", c4_conjugacy_invariance);
    ok &= report(5, "surgery correctness", c5_surgery);
    ok &= report(6, "partition/direct-composition signs", c6_partition_oracle);
    ok &= report(7, "genericity post-conditions", c7_genericity);
    ok &= report(8, "curve-builder invariants", c8_curve_builder);
    let runs = if selected(9) || selected(10) { run_examples() } else { Vec::new() };
    ok &= report(9, "end-to-end certificates", || c9_certificates(&runs));
    ok &= report(10, "openness", || c10_openness(&runs));
    if !ok {
        std::process::exit(1);
    }
}
