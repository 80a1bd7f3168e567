//! Devil's staircase of the forced Arnold family over the golden rotation.
//!
//! Sweeps tau, detects plateaus, relates each level to the base frequency
//! and certifies the widest plateau's midpoint member outright.

use std::time::Instant;

use toruslock::staircase::{confirm_plateaus, detect_plateaus, default_level_tol, sweep_family, TwistFamily};
use toruslock::BaseRotation;

fn main() -> toruslock::Result<()> {
    let family = TwistFamily::arnold(BaseRotation::golden(), 0.9, 0.1);
    let taus: Vec<f64> = (0..=200).map(|i| -0.5 + i as f64 / 200.0).collect();
    let t = Instant::now();
    let mut data = sweep_family(&family, &taus, 4000)?;
    println!(
        "{} samples in {:.2?}, max half-width {:.1e}",
        data.samples.len(),
        t.elapsed(),
        data.max_half_width()
    );

    // a looser tolerance merges neighbouring steps; the default keeps them apart
    for tol in [default_level_tol(&data), 1e-2] {
        println!("level_tol {tol:.1e}: {} plateaus", detect_plateaus(&data, tol).len());
    }

    data.plateaus.sort_by(|a, b| b.width().total_cmp(&a.width()));
    data.plateaus.truncate(4);
    for p in &data.plateaus {
        let rel = p
            .omega_relation
            .map(|r| format!("({} + {} omega)/{}", r.p, r.l, r.q))
            .unwrap_or_else(|| "-".into());
        println!(
            "tau in [{:+.4}, {:+.4}]  rho = {:.6}  ~ {rel}",
            p.tau_lo, p.tau_hi, p.level
        );
    }
    data.plateaus.truncate(1);
    let n = confirm_plateaus(&family, &mut data, 1e-7)?;
    if let Some(c) = data.plateaus[0].confirmation.as_ref() {
        println!("confirmed {n}: tau = {:+.4}, margin {:.3e}, level {:.6}", c.tau, c.margin, c.level);
    }
    Ok(())
}
