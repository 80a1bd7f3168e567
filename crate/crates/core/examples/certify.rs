//! Certify a strongly forced Arnold map from an attracting annulus, then
//! round-trip the certificate through JSON and re-verify it.
//!
//! No perturbation is needed here: the map already has an attracting
//! invariant curve, so an annulus around the forward image of a circle
//! is mapped into itself by some return time.

use toruslock::certify::LockCertificate;
use toruslock::pipeline::certify_directly;
use toruslock::rotation::fibred_rotation_number;
use toruslock::{BaseRotation, QpfSystem, TranslationField};

fn main() -> toruslock::Result<()> {
    let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(0.02, 0.9, 0.1))?;
    let cert = certify_directly(&sys, 1e-7)?;
    println!(
        "return time {}, margin {:.3e}, claimed rotation {:.10}",
        cert.iterate, cert.margin, cert.claimed_rotation.value
    );

    let json = cert.to_json()?;
    let back = LockCertificate::from_json(&json)?;
    let chk = back.reverify()?;
    println!(
        "{} bytes of JSON, re-verified margin {:.3e} (diff {:.1e})",
        json.len(),
        chk.margin,
        (chk.margin - cert.margin).abs()
    );

    let est = fibred_rotation_number(&sys, 0.0, 100_000, 4);
    println!("direct estimate {:.10} +- {:.1e}", est.value, est.half_width);
    Ok(())
}
