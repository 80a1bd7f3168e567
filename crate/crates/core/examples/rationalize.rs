//! Rationalize the base of a forced Arnold map and show the fibre-wise locked rotation number.

use std::time::Instant;

use toruslock::rotation::fibred_rotation_number;
use toruslock::tongue::{rationalize_base, RationalizeOptions};
use toruslock::{BaseRotation, QpfSystem, TranslationField};

fn main() -> toruslock::Result<()> {
    let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(0.2, 0.5, 0.1))?;
    let t = Instant::now();
    let r = rationalize_base(&sys, 0.3, &RationalizeOptions::default())?;
    println!(
        "p/q = {}  m0 = {}  delta = {:.6}  rho ~ {:.6}  |tau| <= {:.6}  ({:.2?})",
        r.p_over_q,
        r.m0,
        r.delta,
        r.rho_estimate.value,
        r.correction_size(),
        t.elapsed()
    );
    let locked = r.system(&sys);
    for th in [0.0, 0.1, 0.37] {
        let e = fibred_rotation_number(&locked, th, 100_000, 1);
        println!("theta = {th:.2}: rho = {:.8} (m0/q = {:.8})", e.value, r.m0 as f64 / r.p_over_q.denom() as f64);
    }
    Ok(())
}
