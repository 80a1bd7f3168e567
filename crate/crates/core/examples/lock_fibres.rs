//! Rationalize a rigid rotation and lock every fibre by interval surgery.

use std::time::Instant;

use toruslock::locking::{lock_all_fibres, LockOptions};
use toruslock::tongue::{rationalize_base, RationalizeOptions};
use toruslock::{BaseRotation, QpfSystem, TranslationField};

fn main() -> toruslock::Result<()> {
    let eps = 0.2;
    let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.25))?;
    let t = Instant::now();
    let r = rationalize_base(&sys, eps, &RationalizeOptions::default())?;
    let rsys = r.system(&sys);
    println!("p/q = {}, m0 = {}, |tau| = {:.6} ({:.2?})", r.p_over_q, r.m0, r.correction_size(), t.elapsed());
    let t = Instant::now();
    let budget = eps - r.correction_size();
    let lock = lock_all_fibres(&rsys, r.m0, budget, &LockOptions::default())?;
    println!(
        "surgeries = {}, perturbation = {:.6} (budget {:.6}), min gamma before = {:.3e}, after = {:.3e} ({:.2?})",
        lock.surgeries.len(),
        lock.perturbation,
        budget,
        lock.before.min_margin(),
        lock.after.min_margin(),
        t.elapsed()
    );
    Ok(())
}
