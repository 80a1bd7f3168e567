//! Steps 1 to 3 on a rigid rotation: rationalize, lock, triangulate and
//! extract the zero set of the q-fold displacement.

use std::sync::Arc;
use std::time::Instant;

use toruslock::locking::{lock_all_fibres, LockOptions};
use toruslock::partition::{pwa_approximate, refine_partition, RefineMode};
use toruslock::tongue::{rationalize_base, RationalizeOptions};
use toruslock::triangulation::{minimal_grid, triangulate};
use toruslock::zeroset::{extract_zero_set, VertexClass};
use toruslock::{BaseRotation, QpfSystem, TranslationField};

fn main() -> toruslock::Result<()> {
    let eps = 0.2;
    let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::constant(0.25))?;
    let r = rationalize_base(&sys, eps, &RationalizeOptions::default())?;
    let lock = lock_all_fibres(&r.system(&sys), r.m0, eps - r.correction_size(), &LockOptions::default())?;
    let pq = r.p_over_q;
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or_else(|| minimal_grid(pq, 8, 64));
    let tri = Arc::new(triangulate(pq, n, 7)?);
    let approx = pwa_approximate(&lock.system.field, tri, 1e-3, 7)?;
    println!("p/q = {pq}, m0 = {}, n_grid = {n}, sup error = {:.3e}", r.m0, approx.sup_error);
    for mode in [RefineMode::ZeroSet, RefineMode::Full] {
        let t = Instant::now();
        let part = refine_partition(&approx.field, pq, r.m0, mode)?;
        println!(
            "{mode:?}: {} polygons, {} pruned, area {:.12}, |Phi^q| <= {:.3e} ({:.2?})",
            part.len(),
            part.pruned.count,
            part.total_area,
            part.sup_norm,
            t.elapsed()
        );
        let t = Instant::now();
        let arr = extract_zero_set(&part)?;
        println!(
            "  B: {} segments, {} components {:?}, LCV {}, RCV {}, regions {:?}, slope {:.3} ({:.2?})",
            arr.segments.len(),
            arr.components.len(),
            arr.components.iter().map(|c| c.class).collect::<Vec<_>>(),
            arr.count_class(VertexClass::LeftCritical),
            arr.count_class(VertexClass::RightCritical),
            arr.regions.iter().map(|r| (r.sign, r.essentiality)).collect::<Vec<_>>(),
            arr.max_slope,
            t.elapsed()
        );
    }
    Ok(())
}
