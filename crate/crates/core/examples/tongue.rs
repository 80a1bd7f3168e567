//! Boundaries of the rotation-number-zero tongue.
//!
//! For the unforced Arnold family the tongue is the band |tau| <= K/(2 pi)
//! at every fibre, so the computed boundary can be read off directly. The
//! second half does the same fibre by fibre for a forced map over a rational
//! base, where the boundary depends on theta.

use std::f64::consts::PI;
use std::time::Instant;

use toruslock::tongue::{tongue_boundary, FnFamily, StepFamily};
use toruslock::{BaseRotation, QpfSystem, TranslationField};

fn main() -> toruslock::Result<()> {
    for k in [0.25, 0.5, 0.9] {
        let fam = FnFamily(move |_a: f64, tau: f64, x: f64| x + tau + k / (2.0 * PI) * (2.0 * PI * x).sin());
        let t = Instant::now();
        let b = tongue_boundary(&fam, &[0.0], 0, 1e-12)?;
        println!(
            "K = {k:.2}: tau- = {:+.10}  tau+ = {:+.10}  (K/2pi = {:.10}, {:.2?})",
            b.tau_minus[0],
            b.tau_plus[0],
            k / (2.0 * PI),
            t.elapsed()
        );
    }

    let sys = QpfSystem::new(
        BaseRotation::rational(1, 2)?,
        TranslationField::arnold(0.0, 0.5, 0.1),
    )?;
    let fam = StepFamily::new(&sys)?;
    let thetas: Vec<f64> = (0..8).map(|i| i as f64 / 16.0).collect();
    let b = tongue_boundary(&fam, &thetas, 0, 1e-10)?;
    println!("\nforced Arnold over p/q = 1/2, second iterate, m0 = 0");
    for i in 0..thetas.len() {
        println!("theta = {:.4}: [{:+.6}, {:+.6}]", thetas[i], b.tau_minus[i], b.tau_plus[i]);
    }
    Ok(())
}
