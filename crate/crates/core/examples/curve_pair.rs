//! Steps 1 to 4 on a rigid rotation: genericize the approximation, extract the
//! zero set and build the boundary curve pair.

use std::sync::Arc;
use std::time::Instant;

use toruslock::curves::{build_curves, tilt_verticals};
use toruslock::locking::{lock_all_fibres, LockOptions};
use toruslock::partition::{genericize, pwa_approximate, RefineMode};
use toruslock::tongue::{rationalize_base, RationalizeOptions};
use toruslock::triangulation::{minimal_grid, triangulate};
use toruslock::zeroset::extract_zero_set;
use toruslock::{BaseRotation, QpfSystem, TranslationField};

fn main() -> toruslock::Result<()> {
    let eps = 0.2;
    let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.25))?;
    let r = rationalize_base(&sys, eps, &RationalizeOptions::default())?;
    let budget = eps - r.correction_size();
    let lock = lock_all_fibres(&r.system(&sys), r.m0, budget, &LockOptions::default())?;
    let pq = r.p_over_q;
    let n = minimal_grid(pq, 8, 64);
    let tri = Arc::new(triangulate(pq, n, 7)?);
    let approx = pwa_approximate(&lock.system.field, tri, 1e-3, 7)?;

    let t = Instant::now();
    let g = genericize(&approx.field, pq, r.m0, 7, 1e-4, RefineMode::ZeroSet)?;
    println!(
        "genericized in {} rounds ({} nudges, displacement {:.2e}), margins {:.2e} / {:.2e} ({:.2?})",
        g.rounds,
        g.accepted_nudges,
        g.displacement,
        g.scan.margin_v,
        g.scan.margin_s,
        t.elapsed()
    );
    let arr = extract_zero_set(&g.partition)?;
    let t = Instant::now();
    let pair = build_curves(&arr, 7)?;
    println!(
        "curves: class ({}, {}), {} targets, {} verticals, epsilon {:.4}, clearance {:.2e} ({:.2?})",
        pair.k,
        pair.m,
        pair.targets.len(),
        pair.verticals.len(),
        pair.epsilon,
        pair.clearance,
        t.elapsed()
    );
    let margin = pair.phi_margin(|th, x| g.partition.eval(th, x).unwrap_or(f64::NAN));
    println!("Phi^q margin on the knots: {margin:.3e}");
    let tilted = tilt_verticals(&pair, 1e-4, pq.denom() as i64)?;
    println!(
        "graph form: {} + {} knots",
        tilted.gamma_minus.knots.len(),
        tilted.gamma_plus.knots.len()
    );
    Ok(())
}
