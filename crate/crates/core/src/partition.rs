//! The common refinement of a triangulation under the first `q-1` iterates
//! of a rational skew product, on whose cells `Phi^q` is affine.
//!
//! Pieces are tracked forward: every piece keeps its vertices in the chart of
//! the triangle it started in, together with the affine map sending it to its
//! current image. Clipping an image against a triangle is the same as clipping
//! the piece against the triangle's edge half-planes pulled back by that map.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::TranslationField;
use crate::rational::{BaseRotation, Rational};
use crate::system::QpfSystem;
use crate::triangulation::{PwaField, Triangulation};

/// Snap tolerance for half-plane tests, relative to edge length.
pub const SNAP: f64 = 1e-12;
/// Pieces with smaller area are dropped and counted.
pub const SLIVER_AREA: f64 = 1e-14;
const CAP: usize = 40;
const PROBE_GRID: usize = 256;

/// A PWA approximation together with its measured sup error.
#[derive(Clone, Debug)]
pub struct PwaApprox {
    pub field: PwaField,
    /// Sup distance to the source field on a 256 x 256 probe grid.
    pub sup_error: f64,
    /// Radius within which later nudges may move the vertex values.
    pub delta: f64,
}

/// Sample `phi` at the vertices of `tri`.
///
/// The probe grid is offset by a seeded sub-cell shift so that it never
/// coincides with the sampling grid.
pub fn pwa_approximate(phi: &TranslationField, tri: Arc<Triangulation>, delta: f64, seed: u64) -> Result<PwaApprox> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
    }
    let field = PwaField::sample(tri, |t, x| phi.phi(t, x))?;
    let slope = field.min_x_slope();
    if slope <= -1.0 + delta {
        return Err(Error::DeltaInfeasible(format!(
            "minimal x-slope {slope} leaves no room for nudges of size {delta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ot, ox) = (rng.gen::<f64>(), rng.gen::<f64>());
    let mut err: f64 = 0.0;
    for i in 0..PROBE_GRID {
        let t = (i as f64 + ot) / PROBE_GRID as f64;
        for j in 0..PROBE_GRID {
            let x = (j as f64 + ox) / PROBE_GRID as f64;
            err = err.max((field.eval(t, x) - phi.phi(t, x)).abs());
        }
    }
    Ok(PwaApprox {
        field,
        sup_error: err,
        delta,
    })
}

/// How much of the refinement to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    /// Every polygon of the refinement.
    Full,
    /// Stop refining pieces on which `Phi^q` provably has one sign; only
    /// pieces that may meet the zero set are kept.
    ZeroSet,
}

/// `theta_n = theta + ts`, `x_n = a theta + b x + c`.
#[derive(Clone, Copy, Debug)]
struct Aff {
    ts: f64,
    a: f64,
    b: f64,
    c: f64,
}

impl Aff {
    const ID: Aff = Aff {
        ts: 0.0,
        a: 0.0,
        b: 1.0,
        c: 0.0,
    };

    #[inline]
    fn apply(&self, z: [f64; 2]) -> [f64; 2] {
        [z[0] + self.ts, self.a * z[0] + self.b * z[1] + self.c]
    }

    /// Compose with one step through a triangle whose field is `k` in its base
    /// chart, the triangle being used in the lift shifted by `sh`.
    #[inline]
    fn step(&self, k: [f64; 3], sh: [f64; 2], w: f64) -> Aff {
        let g = 1.0 + k[2];
        Aff {
            ts: self.ts + w,
            a: g * self.a + k[1],
            b: g * self.b,
            c: g * self.c + k[1] * (self.ts - sh[0]) + k[0] - k[2] * sh[1],
        }
    }

    #[inline]
    fn disp(&self, z: [f64; 2]) -> f64 {
        self.a * z[0] + (self.b - 1.0) * z[1] + self.c
    }
}

#[derive(Clone, Copy)]
struct Buf {
    n: usize,
    z: [[f64; 2]; CAP],
    w: [[f64; 2]; CAP],
}

impl Buf {
    fn empty() -> Self {
        Buf {
            n: 0,
            z: [[0.0; 2]; CAP],
            w: [[0.0; 2]; CAP],
        }
    }

    fn push(&mut self, z: [f64; 2], w: [f64; 2]) -> Result<()> {
        if self.n == CAP {
            return Err(Error::GeometryDegenerate(
                "clipped polygon has too many vertices".into(),
            ));
        }
        self.z[self.n] = z;
        self.w[self.n] = w;
        self.n += 1;
        Ok(())
    }

    /// Keep the part of the polygon whose image lies left of `p -> q`.
    fn clip(&self, p: [f64; 2], q: [f64; 2]) -> Result<Buf> {
        let e = [q[0] - p[0], q[1] - p[1]];
        let tol = SNAP * e[0].hypot(e[1]);
        let mut h = [0.0; CAP];
        for k in 0..self.n {
            h[k] = e[0] * (self.w[k][1] - p[1]) - e[1] * (self.w[k][0] - p[0]);
        }
        let mut out = Buf::empty();
        for k in 0..self.n {
            let l = (k + 1) % self.n;
            if h[k] >= -tol {
                out.push(self.z[k], self.w[k])?;
            }
            if (h[k] > tol && h[l] < -tol) || (h[k] < -tol && h[l] > tol) {
                let t = h[k] / (h[k] - h[l]);
                out.push(lerp(self.z[k], self.z[l], t), lerp(self.w[k], self.w[l], t))?;
            }
        }
        out.dedup();
        Ok(out)
    }

    fn dedup(&mut self) {
        let mut m = 0;
        for k in 0..self.n {
            if m > 0 && dist2(self.z[m - 1], self.z[k]) < 1e-28 {
                continue;
            }
            self.z[m] = self.z[k];
            self.w[m] = self.w[k];
            m += 1;
        }
        while m > 1 && dist2(self.z[m - 1], self.z[0]) < 1e-28 {
            m -= 1;
        }
        self.n = if m < 3 { 0 } else { m };
    }

    fn area(&self) -> f64 {
        polygon_area(&self.z[..self.n])
    }
}

#[inline]
fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Signed shoelace area (positive for counter-clockwise order).
pub fn polygon_area(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    let mut s = 0.0;
    for k in 0..n {
        let a = p[k];
        let b = p[(k + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

pub fn polygon_centroid(p: &[[f64; 2]]) -> [f64; 2] {
    let n = p.len() as f64;
    let s = p.iter().fold([0.0, 0.0], |s, v| [s[0] + v[0], s[1] + v[1]]);
    [s[0] / n, s[1] / n]
}

/// Pieces dropped before reaching depth `q`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PruneStats {
    pub count: usize,
    pub area_positive: f64,
    pub area_negative: f64,
    /// Smallest certified `|Phi^q|` lower bound among pruned pieces.
    pub min_bound: f64,
}

/// The refined partition with `Phi^q - m0` affine on every polygon.
#[derive(Clone, Debug)]
pub struct RefinedPartition {
    pub omega: Rational,
    pub m0: i64,
    pub mode: RefineMode,
    pub tri: Arc<Triangulation>,
    verts: Vec<[f64; 2]>,
    offsets: Vec<u32>,
    /// Triangle each polygon started in; polygons are stored grouped by it.
    pub origin: Vec<u32>,
    /// `Phi^q - m0 = c0 + c1 theta + c2 x` in the chart of the origin triangle.
    pub phi: Vec<[f64; 3]>,
    origin_start: Vec<u32>,
    pub pruned: PruneStats,
    pub slivers: usize,
    pub sliver_area: f64,
    /// Sum of all polygon, pruned and sliver areas.
    pub total_area: f64,
    /// Largest `|Phi^q - m0|` over kept polygon vertices.
    pub sup_norm: f64,
    /// Largest `|d_x Phi^q|` over kept polygons.
    pub slope_scale: f64,
}

impl RefinedPartition {
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn polygon(&self, i: usize) -> &[[f64; 2]] {
        &self.verts[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    #[inline]
    pub fn value(&self, i: usize, z: [f64; 2]) -> f64 {
        let c = self.phi[i];
        c[0] + c[1] * z[0] + c[2] * z[1]
    }

    /// Number of polygon vertices, counted once per polygon.
    pub fn n_vertex_slots(&self) -> usize {
        self.verts.len()
    }

    /// Polygon containing `(theta, x)` and the point in its chart; `None` if
    /// the point lies in a pruned piece or a dropped sliver.
    pub fn locate(&self, theta: f64, x: f64) -> Option<(usize, [f64; 2])> {
        let (t, p) = self.tri.locate(theta, x);
        let lo = self.origin_start[t] as usize;
        let hi = self.origin_start[t + 1] as usize;
        let mut best: Option<(usize, f64)> = None;
        for i in lo..hi {
            let d = inside_depth(self.polygon(i), p);
            if d >= 0.0 {
                return Some((i, p));
            }
            if best.map_or(true, |(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        // boundary points may miss every polygon by round-off
        best.filter(|&(_, d)| d > -1e-12).map(|(i, _)| (i, p))
    }

    /// `Phi^q - m0` at a point, from the partition.
    pub fn eval(&self, theta: f64, x: f64) -> Option<f64> {
        self.locate(theta, x).map(|(i, p)| self.value(i, p))
    }
}

/// Smallest signed distance-like margin of `p` inside a CCW convex polygon.
fn inside_depth(poly: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = poly.len();
    let mut d = f64::INFINITY;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = e[0].hypot(e[1]);
        if len == 0.0 {
            continue;
        }
        d = d.min((e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / len);
    }
    d
}

struct Piece {
    start: u32,
    len: u32,
    origin: u32,
    aff: Aff,
}

/// Refine `field`'s triangulation under `f(theta, x) = (theta + p/q, x + Phi)`
/// and compose `Phi^q - m0` on every cell.
pub fn refine_partition(field: &PwaField, omega: Rational, m0: i64, mode: RefineMode) -> Result<RefinedPartition> {
    let tri = field.tri.clone();
    let q = omega.denom() as usize;
    let w = omega.to_f64();
    let (flo, fhi) = field.value_range();
    let coeffs: Vec<[f64; 3]> = (0..tri.triangles.len()).map(|t| field.coeffs(t)).collect();
    let mut pruned = PruneStats {
        min_bound: f64::INFINITY,
        ..Default::default()
    };
    let mut slivers = 0usize;
    let mut sliver_area = 0.0;

    // prune test after `n` steps; returns the sign if the piece is settled
    let settle = |z: &[[f64; 2]], aff: &Aff, n: usize| -> Option<(f64, f64)> {
        if mode == RefineMode::Full || n == q {
            return None;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &p in z {
            let d = aff.disp(p);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let rem = (q - n) as f64;
        let lo = lo + rem * flo - m0 as f64;
        let hi = hi + rem * fhi - m0 as f64;
        if lo > 1e-9 {
            Some((1.0, lo))
        } else if hi < -1e-9 {
            Some((-1.0, -hi))
        } else {
            None
        }
    };

    let mut verts: Vec<[f64; 2]> = Vec::with_capacity(tri.triangles.len() * 3);
    let mut pieces: Vec<Piece> = Vec::with_capacity(tri.triangles.len());
    for (t, tr) in tri.triangles.iter().enumerate() {
        let aff = Aff::ID.step(coeffs[t], [0.0, 0.0], w);
        if let Some((s, b)) = settle(&tr.pts, &aff, 1) {
            let a = polygon_area(&tr.pts);
            record_prune(&mut pruned, s, b, a);
            continue;
        }
        let start = verts.len() as u32;
        verts.extend_from_slice(&tr.pts);
        pieces.push(Piece {
            start,
            len: 3,
            origin: t as u32,
            aff,
        });
    }

    for n in 1..q {
        let mut nverts: Vec<[f64; 2]> = Vec::with_capacity(verts.len() * 2);
        let mut npieces: Vec<Piece> = Vec::with_capacity(pieces.len() * 2);
        for pc in &pieces {
            let z = &verts[pc.start as usize..(pc.start + pc.len) as usize];
            let mut buf = Buf::empty();
            let (mut tlo, mut thi, mut xlo, mut xhi) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for &p in z {
                let im = pc.aff.apply(p);
                tlo = tlo.min(im[0]);
                thi = thi.max(im[0]);
                xlo = xlo.min(im[1]);
                xhi = xhi.max(im[1]);
                buf.push(p, im)?;
            }
            'cand: for (t, sh) in tri.candidates(tlo, thi, xlo, xhi) {
                let tp = &tri.triangles[t].pts;
                let pts = [
                    [tp[0][0] + sh[0], tp[0][1] + sh[1]],
                    [tp[1][0] + sh[0], tp[1][1] + sh[1]],
                    [tp[2][0] + sh[0], tp[2][1] + sh[1]],
                ];
                let (bt0, bt1) = (
                    pts[0][0].min(pts[1][0]).min(pts[2][0]),
                    pts[0][0].max(pts[1][0]).max(pts[2][0]),
                );
                if bt1 < tlo || bt0 > thi {
                    continue;
                }
                let mut cur = buf;
                let mut whole = true;
                for e in 0..3 {
                    let (a, b) = (pts[e], pts[(e + 1) % 3]);
                    let (all_in, all_out) = side(&cur, a, b);
                    if all_out {
                        cur.n = 0;
                        break;
                    }
                    if !all_in {
                        whole = false;
                        cur = cur.clip(a, b)?;
                        if cur.n == 0 {
                            break;
                        }
                    }
                }
                if cur.n == 0 {
                    continue;
                }
                let area = cur.area();
                if area < SLIVER_AREA {
                    slivers += 1;
                    sliver_area += area.max(0.0);
                    continue;
                }
                let aff = pc.aff.step(coeffs[t], sh, w);
                let zs = &cur.z[..cur.n];
                if let Some((sg, b)) = settle(zs, &aff, n + 1) {
                    record_prune(&mut pruned, sg, b, area);
                } else {
                    let start = nverts.len() as u32;
                    nverts.extend_from_slice(zs);
                    npieces.push(Piece {
                        start,
                        len: cur.n as u32,
                        origin: pc.origin,
                        aff,
                    });
                }
                if whole {
                    break 'cand;
                }
            }
        }
        verts = nverts;
        pieces = npieces;
    }

    let mut out_verts = Vec::with_capacity(verts.len());
    let mut offsets = Vec::with_capacity(pieces.len() + 1);
    let mut origin = Vec::with_capacity(pieces.len());
    let mut phi = Vec::with_capacity(pieces.len());
    let mut total_area = pruned.area_positive + pruned.area_negative + sliver_area;
    let mut sup_norm: f64 = 0.0;
    let mut slope_scale: f64 = 0.0;
    offsets.push(0u32);
    for pc in &pieces {
        let z = &verts[pc.start as usize..(pc.start + pc.len) as usize];
        let c = [pc.aff.c - m0 as f64, pc.aff.a, pc.aff.b - 1.0];
        for &p in z {
            sup_norm = sup_norm.max((c[0] + c[1] * p[0] + c[2] * p[1]).abs());
        }
        slope_scale = slope_scale.max(c[2].abs());
        total_area += polygon_area(z);
        out_verts.extend_from_slice(z);
        offsets.push(out_verts.len() as u32);
        origin.push(pc.origin);
        phi.push(c);
    }
    let mut origin_start = vec![0u32; tri.triangles.len() + 1];
    for &o in &origin {
        origin_start[o as usize + 1] += 1;
    }
    for t in 0..tri.triangles.len() {
        origin_start[t + 1] += origin_start[t];
    }
    if !pruned.min_bound.is_finite() {
        pruned.min_bound = 0.0;
    }
    let part = RefinedPartition {
        omega,
        m0,
        mode,
        tri,
        verts: out_verts,
        offsets,
        origin,
        phi,
        origin_start,
        pruned,
        slivers,
        sliver_area,
        total_area,
        sup_norm,
        slope_scale,
    };
    cross_check(&part, field)?;
    Ok(part)
}

fn record_prune(p: &mut PruneStats, sign: f64, bound: f64, area: f64) {
    p.count += 1;
    if sign > 0.0 {
        p.area_positive += area;
    } else {
        p.area_negative += area;
    }
    p.min_bound = p.min_bound.min(bound);
}

/// (every image vertex left of `a -> b`, every image vertex right of it).
fn side(buf: &Buf, a: [f64; 2], b: [f64; 2]) -> (bool, bool) {
    let e = [b[0] - a[0], b[1] - a[1]];
    let tol = SNAP * e[0].hypot(e[1]);
    let (mut all_in, mut all_out) = (true, true);
    for k in 0..buf.n {
        let h = e[0] * (buf.w[k][1] - a[1]) - e[1] * (buf.w[k][0] - a[0]);
        if h < -tol {
            all_in = false;
        }
        if h > tol {
            all_out = false;
        }
    }
    (all_in, all_out)
}

/// Compare the affine data with direct composition at up to 64 centroids.
fn cross_check(part: &RefinedPartition, field: &PwaField) -> Result<()> {
    if part.is_empty() {
        return Ok(());
    }
    let sys = QpfSystem::new_unchecked(
        BaseRotation::Rational { value: part.omega },
        TranslationField::from(field.clone()),
    );
    let step = (part.len() / 64).max(1);
    let mut worst: f64 = 0.0;
    for i in (0..part.len()).step_by(step) {
        let c = polygon_centroid(part.polygon(i));
        let direct = sys.phi_q(c[0], c[1], part.m0)?;
        worst = worst.max((direct - part.value(i, c)).abs());
    }
    if worst > 1e-9 {
        return Err(Error::CompositionDrift { drift: worst });
    }
    Ok(())
}

/// Counters and violations found in one genericity scan.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GenericityScan {
    pub margin_v: f64,
    pub margin_s: f64,
    /// Polygon-vertex slots with `|Phi^q| >= margin_v`.
    pub good_vertices: usize,
    /// Polygons with `|d_x Phi^q| >= margin_s`.
    pub good_polygons: usize,
    /// (polygon, vertex point) pairs failing the vertex margin.
    pub bad_vertices: Vec<(usize, [f64; 2])>,
    pub bad_polygons: Vec<usize>,
    /// Polygons holding critical vertices that share a fibre.
    pub bad_critical: Vec<(usize, [f64; 2])>,
}

impl GenericityScan {
    pub fn violations(&self) -> usize {
        self.bad_vertices.len() + self.bad_polygons.len() + self.bad_critical.len()
    }
}

/// Absolute floor for both margins; below it a value is round-off.
pub const MARGIN_FLOOR: f64 = 1e-12;
/// Critical vertices closer than this in the base count as sharing a fibre.
pub const CV_FIBRE_TOL: f64 = 1e-9;

/// Check margins (a) and (b) on every kept polygon, and (c) on the zero set
/// when (a) and (b) hold.
pub fn genericity_scan(part: &RefinedPartition) -> Result<GenericityScan> {
    let margin_v = (1e-6 * part.sup_norm).max(MARGIN_FLOOR);
    let margin_s = (1e-6 * part.slope_scale).max(MARGIN_FLOOR);
    let mut s = GenericityScan {
        margin_v,
        margin_s,
        ..Default::default()
    };
    for i in 0..part.len() {
        for &z in part.polygon(i) {
            if part.value(i, z).abs() >= margin_v {
                s.good_vertices += 1;
            } else {
                s.bad_vertices.push((i, z));
            }
        }
        if part.phi[i][2].abs() >= margin_s {
            s.good_polygons += 1;
        } else {
            s.bad_polygons.push(i);
        }
    }
    if s.bad_vertices.is_empty() && s.bad_polygons.is_empty() {
        let arr = crate::zeroset::extract_zero_set(part)?;
        s.bad_critical = arr.shared_critical_fibres(CV_FIBRE_TOL);
    }
    Ok(s)
}

/// Report of a [`genericize`] run.
#[derive(Clone, Debug)]
pub struct Genericized {
    pub field: PwaField,
    pub partition: RefinedPartition,
    pub scan: GenericityScan,
    pub rounds: usize,
    pub accepted_nudges: usize,
    /// Largest change of any vertex value.
    pub displacement: f64,
}

pub const GENERICIZE_ROUNDS: usize = 24;

/// Nudge single vertex values until the genericity margins hold.
///
/// Each violation moves the vertex of its origin triangle with the largest
/// barycentric weight at the offending point by a seeded amount of at most
/// `budget / rounds`. A round is kept only if it lowers the violation count
/// without lowering either good-counter.
pub fn genericize(
    field: &PwaField,
    omega: Rational,
    m0: i64,
    seed: u64,
    budget: f64,
    mode: RefineMode,
) -> Result<Genericized> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = field.clone();
    let mut part = refine_partition(&cur, omega, m0, mode)?;
    let mut scan = genericity_scan(&part)?;
    let eta = budget / GENERICIZE_ROUNDS as f64;
    let mut accepted = 0;
    let mut rounds = 0;
    while scan.violations() > 0 {
        if rounds == GENERICIZE_ROUNDS || !(eta > 0.0) {
            return Err(Error::GenericityFailed(describe(&scan)));
        }
        rounds += 1;
        let mut values = cur.values().to_vec();
        let mut touched = std::collections::BTreeSet::new();
        let spots = scan
            .bad_vertices
            .iter()
            .copied()
            .chain(
                scan.bad_polygons
                    .iter()
                    .map(|&i| (i, polygon_centroid(part.polygon(i)))),
            )
            .chain(scan.bad_critical.iter().copied());
        for (i, z) in spots {
            let t = part.origin[i] as usize;
            let tr = &part.tri.triangles[t];
            let bc = tr.barycentric(z[0], z[1]);
            let k = (0..3).max_by(|&a, &b| bc[a].total_cmp(&bc[b])).unwrap();
            let v = tr.v[k] as usize;
            if touched.insert(v) {
                let mag = rng.gen_range(0.5 * eta..=eta);
                values[v] += if rng.gen::<bool>() { mag } else { -mag };
            }
        }
        let cand = PwaField::new(cur.tri.clone(), values)?;
        if cand.validate().is_err() {
            continue;
        }
        let cpart = refine_partition(&cand, omega, m0, mode)?;
        let cscan = genericity_scan(&cpart)?;
        let improves = cscan.violations() < scan.violations()
            && cscan.good_vertices >= scan.good_vertices
            && cscan.good_polygons >= scan.good_polygons;
        if improves {
            cur = cand;
            part = cpart;
            scan = cscan;
            accepted += 1;
        }
    }
    let displacement = cur
        .values()
        .iter()
        .zip(field.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(Genericized {
        field: cur,
        partition: part,
        scan,
        rounds,
        accepted_nudges: accepted,
        displacement,
    })
}

fn describe(scan: &GenericityScan) -> String {
    let mut parts = Vec::new();
    if let Some(&(i, z)) = scan.bad_vertices.first() {
        parts.push(format!(
            "{} vertex margins (first: polygon {i} at {:?})",
            scan.bad_vertices.len(),
            z
        ));
    }
    if let Some(&i) = scan.bad_polygons.first() {
        parts.push(format!(
            "{} slope margins (first: polygon {i})",
            scan.bad_polygons.len()
        ));
    }
    if let Some(&(i, z)) = scan.bad_critical.first() {
        parts.push(format!(
            "{} shared critical fibres (first: polygon {i} at {:?})",
            scan.bad_critical.len(),
            z
        ));
    }
    parts.join("; ")
}
