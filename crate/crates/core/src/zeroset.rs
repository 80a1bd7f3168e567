//! The zero set `B = {Phi^q = m0}` of a refined partition as a planar
//! arrangement on the torus, with its sign regions and critical vertices.
//!
//! Between consecutive vertex abscissae the arrangement is a stack of
//! non-crossing segments, so every fibre in such a slab meets the same ordered
//! list of segments. Region connectivity and the curve continuation are both
//! driven by these per-slab crossing lists.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::RefinedPartition;
use crate::triangulation::{triangulate, PwaField};
use crate::rational::Rational;

/// Endpoint matching tolerance on the torus.
pub const GLUE_TOL: f64 = 1e-8;
const GLUE_CELL: f64 = 1e-7;
/// Two positions on one fibre closer than this are the same point.
pub const POS_TOL: f64 = 1e-11;

/// A zero-set segment, stored in the lift with `p0` at its left end.
#[derive(Clone, Debug, Serialize, PartialEq, Deserialize)]
pub struct Segment {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    /// Sign of `Phi^q` just above the segment.
    pub up_sign: i8,
    pub polygon: u32,
    /// Vertex ids of the left and right end.
    pub v: [u32; 2],
}

impl Segment {
    #[inline]
    pub fn x_at(&self, theta: f64) -> f64 {
        let t = (theta - self.p0[0]) / (self.p1[0] - self.p0[0]);
        self.p0[1] + t * (self.p1[1] - self.p0[1])
    }

    pub fn slope(&self) -> f64 {
        (self.p1[1] - self.p0[1]) / (self.p1[0] - self.p0[0])
    }

    pub fn end(&self, e: usize) -> [f64; 2] {
        if e == 0 {
            self.p0
        } else {
            self.p1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    Regular,
    /// Both segments leave to the right.
    LeftCritical,
    /// Both segments arrive from the left.
    RightCritical,
}

/// One incidence: segment `seg`'s end `end` sits at the vertex shifted by `shift`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq, Deserialize)]
pub struct Incidence {
    pub seg: u32,
    pub end: u8,
    pub shift: [i64; 2],
}

#[derive(Clone, Debug, Serialize, PartialEq, Deserialize)]
pub struct Vertex {
    /// Position reduced to `[0,1)^2`.
    pub p: [f64; 2],
    pub class: VertexClass,
    pub inc: [Incidence; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Essentiality {
    Inessential,
    Essential,
    DoublyEssential,
}

impl Essentiality {
    fn of(cycles: &[[i64; 2]]) -> Self {
        let nz: Vec<[i64; 2]> = cycles.iter().copied().filter(|c| *c != [0, 0]).collect();
        match nz.first() {
            None => Essentiality::Inessential,
            Some(a) => {
                if nz.iter().any(|b| a[0] * b[1] - a[1] * b[0] != 0) {
                    Essentiality::DoublyEssential
                } else {
                    Essentiality::Essential
                }
            }
        }
    }
}

/// A closed polyline of `B`; `class` is its lift displacement `(k, m)`.
#[derive(Clone, Debug, Serialize, PartialEq, Deserialize)]
pub struct BComponent {
    pub segments: Vec<u32>,
    pub class: [i64; 2],
}

/// A connected component of `B+` or `B-`.
#[derive(Clone, Debug, Serialize, PartialEq, Deserialize)]
pub struct Region {
    pub sign: i8,
    pub essentiality: Essentiality,
    /// Lift translations preserving the component's lift.
    pub cycles: Vec<[i64; 2]>,
}

/// A crossing of a slab's fibres with the lifted segment copy `seg + shift`.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub seg: u32,
    pub shift: [i64; 2],
    /// Height at the slab midpoint, in `[0,1)`.
    pub x_mid: f64,
}

/// Base interval between consecutive vertex abscissae; `lo` lies in `[0,1)`.
#[derive(Clone, Debug)]
pub struct Slab {
    pub lo: f64,
    pub hi: f64,
    pub crossings: Vec<Crossing>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroSetArrangement {
    pub segments: Vec<Segment>,
    pub vertices: Vec<Vertex>,
    pub components: Vec<BComponent>,
    pub regions: Vec<Region>,
    #[serde(skip)]
    pub slabs: Vec<Slab>,
    /// Region of cell `k` (between crossings `k` and `k+1`) of each slab.
    #[serde(skip)]
    pub cell_region: Vec<Vec<u32>>,
    /// Largest `|dx/dtheta|` over segments.
    pub max_slope: f64,
    /// Lower bound on the distance between distinct components of `B`.
    pub component_gap: f64,
    /// Sign of `Phi^q` when `B` is empty.
    pub empty_sign: i8,
}

fn sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

fn torus_d(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = |u: f64, v: f64| {
        let r = (u - v).rem_euclid(1.0);
        r.min(1.0 - r)
    };
    d(a[0], b[0]).max(d(a[1], b[1]))
}

/// Intersect every polygon's affine `Phi^q` with level zero and assemble the
/// arrangement.
pub fn extract_zero_set(part: &RefinedPartition) -> Result<ZeroSetArrangement> {
    // raw segments in chart coordinates
    let mut raw: Vec<([f64; 2], [f64; 2], i8, u32)> = Vec::new();
    for i in 0..part.len() {
        let poly = part.polygon(i);
        let n = poly.len();
        let vals: Vec<f64> = poly.iter().map(|&z| part.value(i, z)).collect();
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(2);
        for k in 0..n {
            let l = (k + 1) % n;
            if sign(vals[k]) != sign(vals[l]) {
                let t = vals[k] / (vals[k] - vals[l]);
                pts.push([
                    poly[k][0] + t * (poly[l][0] - poly[k][0]),
                    poly[k][1] + t * (poly[l][1] - poly[k][1]),
                ]);
            }
        }
        match pts.len() {
            0 => {}
            2 => {
                let (mut a, mut b) = (pts[0], pts[1]);
                if a[0] > b[0] {
                    std::mem::swap(&mut a, &mut b);
                }
                if b[0] - a[0] <= 0.0 {
                    return Err(Error::GeometryDegenerate(format!("vertical zero-set segment in polygon {i}")));
                }
                let c = part.phi[i];
                raw.push((a, b, sign(c[2]), i as u32));
            }
            k => {
                return Err(Error::ArrangementInconsistent(format!(
                    "polygon {i} meets the zero set in {k} boundary points"
                )))
            }
        }
    }
    let empty_sign = empty_sign(part);
    if raw.is_empty() {
        return Ok(empty_arrangement(empty_sign));
    }

    // glue endpoints on the torus
    let ends: Vec<[f64; 2]> = raw
        .iter()
        .flat_map(|r| [r.0, r.1])
        .map(|p| [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)])
        .collect();
    let cells = (1.0 / GLUE_CELL) as i64;
    let key = |p: [f64; 2]| ((p[0] / GLUE_CELL) as i64, (p[1] / GLUE_CELL) as i64);
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (e, &p) in ends.iter().enumerate() {
        grid.entry(key(p)).or_default().push(e as u32);
    }
    let mut partner = vec![u32::MAX; ends.len()];
    for (e, &p) in ends.iter().enumerate() {
        let (ki, kj) = key(p);
        let mut found: Vec<u32> = Vec::new();
        for di in -1..=1 {
            for dj in -1..=1 {
                let k = ((ki + di).rem_euclid(cells), (kj + dj).rem_euclid(cells));
                if let Some(list) = grid.get(&k) {
                    for &o in list {
                        if o as usize != e && torus_d(p, ends[o as usize]) < GLUE_TOL {
                            found.push(o);
                        }
                    }
                }
            }
        }
        if found.len() != 1 || found[0] as usize / 2 == e / 2 {
            return Err(Error::ArrangementInconsistent(format!(
                "zero-set vertex near ({:.9}, {:.9}) has {} incident segments",
                p[0],
                p[1],
                found.len() + 1
            )));
        }
        partner[e] = found[0];
    }

    // vertices, snapped segment ends
    let mut vid = vec![u32::MAX; ends.len()];
    let mut vertices: Vec<Vertex> = Vec::new();
    let lifted = |e: usize| if e % 2 == 0 { raw[e / 2].0 } else { raw[e / 2].1 };
    let shift_of = |p: [f64; 2], v: [f64; 2]| [(p[0] - v[0]).round() as i64, (p[1] - v[1]).round() as i64];
    for e in 0..ends.len() {
        if vid[e] != u32::MAX {
            continue;
        }
        let o = partner[e] as usize;
        if partner[o] as usize != e {
            return Err(Error::ArrangementInconsistent("asymmetric endpoint gluing".into()));
        }
        let v = ends[e];
        let inc = |k: usize| Incidence {
            seg: (k / 2) as u32,
            end: (k % 2) as u8,
            shift: shift_of(lifted(k), v),
        };
        let class = match (e % 2, o % 2) {
            (0, 0) => VertexClass::LeftCritical,
            (1, 1) => VertexClass::RightCritical,
            _ => VertexClass::Regular,
        };
        vid[e] = vertices.len() as u32;
        vid[o] = vertices.len() as u32;
        vertices.push(Vertex {
            p: v,
            class,
            inc: [inc(e), inc(o)],
        });
    }
    let mut segments: Vec<Segment> = Vec::with_capacity(raw.len());
    for (s, r) in raw.iter().enumerate() {
        let (v0, v1) = (vid[2 * s] as usize, vid[2 * s + 1] as usize);
        let sh0 = vertices[v0].inc.iter().find(|i| i.seg as usize == s && i.end == 0).unwrap().shift;
        let sh1 = vertices[v1].inc.iter().find(|i| i.seg as usize == s && i.end == 1).unwrap().shift;
        let p0 = vertices[v0].p;
        // store with p0 at the canonical vertex position
        let rel = [sh1[0] - sh0[0], sh1[1] - sh0[1]];
        let p1 = [vertices[v1].p[0] + rel[0] as f64, vertices[v1].p[1] + rel[1] as f64];
        if p1[0] <= p0[0] {
            return Err(Error::GeometryDegenerate(format!("segment {s} collapsed to a vertical after snapping")));
        }
        segments.push(Segment {
            p0,
            p1,
            up_sign: r.2,
            polygon: r.3,
            v: [v0 as u32, v1 as u32],
        });
    }
    for v in vertices.iter_mut() {
        for inc in v.inc.iter_mut() {
            // shifts relative to the re-anchored segments
            let s = &segments[inc.seg as usize];
            let p = s.end(inc.end as usize);
            inc.shift = shift_of(p, v.p);
        }
    }

    let components = walk_components(&segments, &vertices)?;
    let max_slope = segments.iter().map(|s| s.slope().abs()).fold(0.0, f64::max);
    let mut arr = ZeroSetArrangement {
        segments,
        vertices,
        components,
        regions: Vec::new(),
        slabs: Vec::new(),
        cell_region: Vec::new(),
        max_slope,
        component_gap: 0.0,
        empty_sign,
    };
    arr.build_slabs()?;
    arr.build_regions()?;
    arr.component_gap = arr.compute_component_gap();
    Ok(arr)
}

fn empty_sign(part: &RefinedPartition) -> i8 {
    if !part.is_empty() {
        let c = crate::partition::polygon_centroid(part.polygon(0));
        return sign(part.value(0, c));
    }
    if part.pruned.area_negative > part.pruned.area_positive {
        -1
    } else {
        1
    }
}

fn empty_arrangement(s: i8) -> ZeroSetArrangement {
    ZeroSetArrangement {
        segments: Vec::new(),
        vertices: Vec::new(),
        components: Vec::new(),
        regions: vec![Region {
            sign: s,
            essentiality: Essentiality::DoublyEssential,
            cycles: vec![[1, 0], [0, 1]],
        }],
        slabs: vec![Slab {
            lo: 0.0,
            hi: 1.0,
            crossings: Vec::new(),
        }],
        cell_region: vec![vec![0]],
        max_slope: 0.0,
        component_gap: f64::INFINITY,
        empty_sign: s,
    }
}

fn walk_components(segments: &[Segment], vertices: &[Vertex]) -> Result<Vec<BComponent>> {
    let mut seen = vec![false; segments.len()];
    let mut out = Vec::new();
    for s0 in 0..segments.len() {
        if seen[s0] {
            continue;
        }
        let mut segs = Vec::new();
        let (mut s, mut exit_end) = (s0, 1usize);
        let mut pos = [0i64; 2];
        loop {
            seen[s] = true;
            segs.push(s as u32);
            let v = &vertices[segments[s].v[exit_end] as usize];
            let (here, other) = if v.inc[0].seg as usize == s && v.inc[0].end as usize == exit_end {
                (v.inc[0], v.inc[1])
            } else {
                (v.inc[1], v.inc[0])
            };
            pos = [
                pos[0] + here.shift[0] - other.shift[0],
                pos[1] + here.shift[1] - other.shift[1],
            ];
            s = other.seg as usize;
            exit_end = 1 - other.end as usize;
            if s == s0 {
                if exit_end != 1 {
                    return Err(Error::ArrangementInconsistent("zero-set curve reverses orientation".into()));
                }
                break;
            }
            if segs.len() > segments.len() {
                return Err(Error::ArrangementInconsistent("zero-set walk does not close".into()));
            }
        }
        out.push(BComponent { segments: segs, class: pos });
    }
    Ok(out)
}

struct Dsu {
    parent: Vec<u32>,
    off: Vec<[i64; 2]>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n as u32).collect(),
            off: vec![[0, 0]; n],
        }
    }

    /// Root of `a` and the lift offset of `a` relative to it.
    fn find(&mut self, a: usize) -> (usize, [i64; 2]) {
        let mut path = Vec::new();
        let mut r = a;
        while self.parent[r] as usize != r {
            path.push(r);
            r = self.parent[r] as usize;
        }
        // compress, accumulating offsets from the top
        let mut acc = [0i64; 2];
        for &node in path.iter().rev() {
            acc = [acc[0] + self.off[node][0], acc[1] + self.off[node][1]];
            self.off[node] = acc;
            self.parent[node] = r as u32;
        }
        (r, if path.is_empty() { [0, 0] } else { self.off[a] })
    }

    /// Record that the copy of `b` shifted by `d` meets `a`; returns a cycle
    /// vector if `a` and `b` were already joined differently.
    fn union(&mut self, a: usize, b: usize, d: [i64; 2]) -> Option<[i64; 2]> {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        let c = [pa[0] + d[0] - pb[0], pa[1] + d[1] - pb[1]];
        if ra == rb {
            return if c != [0, 0] { Some(c) } else { None };
        }
        self.parent[rb] = ra as u32;
        self.off[rb] = c;
        None
    }
}

impl ZeroSetArrangement {
    pub fn critical_vertices(&self) -> impl Iterator<Item = (usize, &Vertex)> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.class != VertexClass::Regular)
    }

    pub fn count_class(&self, c: VertexClass) -> usize {
        self.vertices.iter().filter(|v| v.class == c).count()
    }

    /// Smallest circular distance between abscissae of distinct critical
    /// vertices; 1 for a single one, infinite for none.
    pub fn critical_spacing(&self) -> f64 {
        let mut th: Vec<f64> = self.critical_vertices().map(|(_, v)| v.p[0]).collect();
        if th.is_empty() {
            return f64::INFINITY;
        }
        th.sort_by(f64::total_cmp);
        let mut gap = th[0] + 1.0 - th[th.len() - 1];
        for w in th.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
        gap
    }

    /// Critical vertices sharing a fibre up to `tol`, as (polygon, point).
    pub fn shared_critical_fibres(&self, tol: f64) -> Vec<(usize, [f64; 2])> {
        let mut cv: Vec<(f64, usize)> = self.critical_vertices().map(|(i, v)| (v.p[0], i)).collect();
        cv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = cv.len();
        let mut out = Vec::new();
        for k in 0..n {
            let (a, b) = (cv[k], cv[(k + 1) % n]);
            if n < 2 {
                break;
            }
            if (b.0 - a.0).rem_euclid(1.0) < tol {
                let v = &self.vertices[b.1];
                let s = &self.segments[v.inc[0].seg as usize];
                let z = s.end(v.inc[0].end as usize);
                out.push((s.polygon as usize, z));
            }
        }
        out
    }

    fn build_slabs(&mut self) -> Result<()> {
        let mut ev: Vec<f64> = self.vertices.iter().map(|v| v.p[0]).collect();
        ev.sort_by(f64::total_cmp);
        ev.dedup_by(|a, b| *a - *b < 1e-13);
        if ev.len() > 1 && ev[0] + 1.0 - ev[ev.len() - 1] < 1e-13 {
            ev.pop();
        }
        const NB: usize = 4096;
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); NB];
        for (s, seg) in self.segments.iter().enumerate() {
            let b0 = (seg.p0[0] * NB as f64).floor() as i64;
            let b1 = (seg.p1[0] * NB as f64).floor() as i64;
            for b in b0..=b1.min(b0 + NB as i64 - 1) {
                buckets[b.rem_euclid(NB as i64) as usize].push(s as u32);
            }
        }
        let mut slabs = Vec::with_capacity(ev.len());
        for k in 0..ev.len() {
            let lo = ev[k];
            let hi = if k + 1 < ev.len() { ev[k + 1] } else { ev[0] + 1.0 };
            let m = 0.5 * (lo + hi);
            let mm = m.rem_euclid(1.0);
            let base = (m - mm).round() as i64;
            let mut cr = Vec::new();
            for &s in &buckets[((mm * NB as f64) as usize).min(NB - 1)] {
                let seg = &self.segments[s as usize];
                for d in [0i64, -1] {
                    let t = mm - d as f64;
                    if seg.p0[0] < t && t < seg.p1[0] {
                        let x = seg.x_at(t);
                        let sx = -(x.floor() as i64);
                        cr.push(Crossing {
                            seg: s,
                            shift: [d + base, sx],
                            x_mid: x + sx as f64,
                        });
                    }
                }
            }
            cr.sort_by(|a, b| a.x_mid.total_cmp(&b.x_mid));
            for w in cr.windows(2) {
                if w[1].x_mid - w[0].x_mid <= POS_TOL {
                    return Err(Error::ArrangementInconsistent(format!(
                        "zero-set segments {} and {} meet inside slab ({lo}, {hi})",
                        w[0].seg, w[1].seg
                    )));
                }
            }
            if cr.len() % 2 == 1 {
                return Err(Error::ArrangementInconsistent(format!("odd crossing count on fibre {m}")));
            }
            slabs.push(Slab { lo, hi, crossings: cr });
        }
        self.slabs = slabs;
        Ok(())
    }

    /// Slab containing lifted abscissa `theta` and the integer `K` with
    /// `theta - K` in `[lo, hi)`.
    pub fn slab_of(&self, theta: f64) -> (usize, i64) {
        let k = theta.floor();
        let f = theta - k;
        let idx = self.slabs.partition_point(|s| s.lo <= f);
        if idx == 0 {
            (self.slabs.len() - 1, k as i64 - 1)
        } else {
            (idx - 1, k as i64)
        }
    }

    /// Number of crossings per unit fibre in slab `s`.
    pub fn n_cross(&self, s: usize) -> usize {
        self.slabs[s].crossings.len()
    }

    /// Height of lifted crossing `n` of slab `s` at slab-local abscissa `t`.
    pub fn crossing_x(&self, s: usize, n: i64, t: f64) -> f64 {
        let cr = &self.slabs[s].crossings;
        let nn = cr.len() as i64;
        let c = cr[n.rem_euclid(nn) as usize];
        let seg = &self.segments[c.seg as usize];
        seg.x_at(t - c.shift[0] as f64) + c.shift[1] as f64 + n.div_euclid(nn) as f64
    }

    /// Sign of `Phi^q` just above lifted crossing `n` of slab `s`.
    pub fn up_sign(&self, s: usize, n: i64) -> i8 {
        let cr = &self.slabs[s].crossings;
        self.segments[cr[n.rem_euclid(cr.len() as i64) as usize].seg as usize].up_sign
    }

    /// Positions of all crossings of slab `s` at local abscissa `t`, one period.
    fn positions(&self, s: usize, t: f64) -> Vec<f64> {
        (0..self.n_cross(s) as i64).map(|n| self.crossing_x(s, n, t)).collect()
    }

    fn build_regions(&mut self) -> Result<()> {
        let ns = self.slabs.len();
        let mut base = Vec::with_capacity(ns + 1);
        let mut total = 0usize;
        for s in 0..ns {
            base.push(total);
            total += self.n_cross(s).max(1);
        }
        let mut dsu = Dsu::new(total);
        let mut cycles: Vec<(usize, [i64; 2])> = Vec::new();
        for s in 0..ns {
            if self.n_cross(s) == 0 {
                cycles.push((base[s], [0, 1]));
            }
        }
        for s in 0..ns {
            let r = (s + 1) % ns;
            let wrap = if r == 0 { 1 } else { 0 };
            let te = self.slabs[s].hi;
            let pl = self.positions(s, te);
            let pr = self.positions(r, te - wrap as f64);
            let (nl, nr) = (pl.len(), pr.len());
            let cell = |p: &[f64], i: i64| -> (f64, f64) {
                let n = p.len() as i64;
                let k = i.div_euclid(n) as f64;
                let a = p[i.rem_euclid(n) as usize] + k;
                let b = p[(i + 1).rem_euclid(n) as usize] + k + if (i + 1).rem_euclid(n) == 0 { 1.0 } else { 0.0 };
                (a, b)
            };
            if nl == 0 || nr == 0 {
                let (sl, ss, cnt) = if nl == 0 { (s, r, nr) } else { (r, s, nl) };
                let pp = if nl == 0 { &pr } else { &pl };
                for j in 0..cnt.max(1) {
                    let wide = cnt == 0 || {
                        let (a, b) = cell(pp, j as i64);
                        b - a > POS_TOL
                    };
                    if wide {
                        let d = if sl == s { [wrap, 0] } else { [-wrap, 0] };
                        if let Some(c) = dsu.union(base[sl], base[ss] + j, d) {
                            cycles.push((base[sl], c));
                        }
                    }
                }
                continue;
            }
            let mut jstart = -2 * nr as i64;
            for i in 0..nl as i64 {
                let (la, lb) = cell(&pl, i);
                if lb - la <= POS_TOL {
                    continue;
                }
                let mut j = jstart;
                loop {
                    let (ra, rb) = cell(&pr, j);
                    if ra >= lb - POS_TOL {
                        break;
                    }
                    if rb <= la + POS_TOL {
                        jstart = j + 1;
                    } else if rb.min(lb) - ra.max(la) > POS_TOL {
                        let k = j.div_euclid(nr as i64);
                        let node_r = base[r] + j.rem_euclid(nr as i64) as usize;
                        if let Some(c) = dsu.union(base[s] + i as usize, node_r, [wrap, k]) {
                            cycles.push((base[s] + i as usize, c));
                        }
                    }
                    j += 1;
                    if j > 4 * nr as i64 {
                        break;
                    }
                }
            }
        }
        // signs and regions
        let mut root_region: HashMap<usize, u32> = HashMap::new();
        let mut regions: Vec<Region> = Vec::new();
        let mut cell_region: Vec<Vec<u32>> = Vec::with_capacity(ns);
        let mut region_sign: Vec<i8> = Vec::new();
        for s in 0..ns {
            let n = self.n_cross(s);
            let mut row = Vec::with_capacity(n.max(1));
            for k in 0..n.max(1) {
                let (root, _) = dsu.find(base[s] + k);
                let id = *root_region.entry(root).or_insert_with(|| {
                    regions.push(Region {
                        sign: 0,
                        essentiality: Essentiality::Inessential,
                        cycles: Vec::new(),
                    });
                    region_sign.push(0);
                    (regions.len() - 1) as u32
                });
                if n > 0 {
                    let sg = self.up_sign(s, k as i64);
                    let rs = &mut region_sign[id as usize];
                    if *rs == 0 {
                        *rs = sg;
                    } else if *rs != sg {
                        return Err(Error::ArrangementInconsistent(format!(
                            "sign region mixes signs near slab ({}, {})",
                            self.slabs[s].lo, self.slabs[s].hi
                        )));
                    }
                }
                row.push(id);
            }
            cell_region.push(row);
        }
        for (node, c) in cycles {
            let (root, _) = dsu.find(node);
            let id = root_region[&root] as usize;
            if !regions[id].cycles.contains(&c) {
                regions[id].cycles.push(c);
            }
        }
        for (id, r) in regions.iter_mut().enumerate() {
            r.sign = if region_sign[id] == 0 { self.empty_sign } else { region_sign[id] };
            r.essentiality = Essentiality::of(&r.cycles);
        }
        self.regions = regions;
        self.cell_region = cell_region;
        Ok(())
    }

    /// Region containing lifted point `(theta, x)`, which must not lie on `B`.
    pub fn region_at(&self, theta: f64, x: f64) -> u32 {
        let (s, k) = self.slab_of(theta);
        let t = theta - k as f64;
        let n = self.n_cross(s) as i64;
        if n == 0 {
            return self.cell_region[s][0];
        }
        // largest lifted crossing index below x
        let mut i = x.floor() as i64 * n;
        while self.crossing_x(s, i, t) >= x {
            i -= 1;
        }
        while self.crossing_x(s, i + 1, t) < x {
            i += 1;
        }
        self.cell_region[s][i.rem_euclid(n) as usize]
    }

    /// Sign of `Phi^q` at a point off `B`, read from the arrangement.
    pub fn sign_at(&self, theta: f64, x: f64) -> i8 {
        self.regions[self.region_at(theta, x) as usize].sign
    }

    fn compute_component_gap(&self) -> f64 {
        if self.components.len() < 2 {
            return f64::INFINITY;
        }
        let mut comp = vec![0u32; self.segments.len()];
        for (c, bc) in self.components.iter().enumerate() {
            for &s in &bc.segments {
                comp[s as usize] = c as u32;
            }
        }
        const G: i64 = 64;
        let cell = 1.0 / G as f64;
        let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (s, seg) in self.segments.iter().enumerate() {
            let (t0, t1) = (seg.p0[0], seg.p1[0]);
            let (x0, x1) = (seg.p0[1].min(seg.p1[1]), seg.p0[1].max(seg.p1[1]));
            for i in (t0 * G as f64).floor() as i64..=(t1 * G as f64).floor() as i64 {
                for j in (x0 * G as f64).floor() as i64..=(x1 * G as f64).floor() as i64 {
                    grid.entry((i.rem_euclid(G), j.rem_euclid(G))).or_default().push(s as u32);
                }
            }
        }
        let mut best = cell;
        for list in grid.values() {
            for (a, &sa) in list.iter().enumerate() {
                for &sb in &list[a + 1..] {
                    if comp[sa as usize] == comp[sb as usize] {
                        continue;
                    }
                    best = best.min(seg_dist_torus(&self.segments[sa as usize], &self.segments[sb as usize]));
                }
            }
        }
        best
    }
}

fn seg_dist_torus(a: &Segment, b: &Segment) -> f64 {
    // bring b next to a
    let d = [(b.p0[0] - a.p0[0]).round(), (b.p0[1] - a.p0[1]).round()];
    let mut best = f64::INFINITY;
    for di in -1..=1 {
        for dj in -1..=1 {
            let sh = [d[0] + di as f64, d[1] + dj as f64];
            let b0 = [b.p0[0] - sh[0], b.p0[1] - sh[1]];
            let b1 = [b.p1[0] - sh[0], b.p1[1] - sh[1]];
            best = best.min(seg_seg(a.p0, a.p1, b0, b1));
        }
    }
    best
}

fn seg_seg(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> f64 {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (o1, o2) = (orient(a0, a1, b0), orient(a0, a1, b1));
    let (o3, o4) = (orient(b0, b1, a0), orient(b0, b1, a1));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return 0.0;
    }
    pt_seg(a0, b0, b1)
        .min(pt_seg(a1, b0, b1))
        .min(pt_seg(b0, a0, a1))
        .min(pt_seg(b1, a0, a1))
}

fn pt_seg(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let e = [b[0] - a[0], b[1] - a[1]];
    let l2 = e[0] * e[0] + e[1] * e[1];
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p[0] - a[0] - t * e[0]).powi(2) + (p[1] - a[1] - t * e[1]).powi(2)).sqrt()
}

/// Hand-made `q = 1` fields whose zero sets have a known shape.
pub mod fixtures {
    use super::*;

    fn grid(n: usize, seed: u64) -> Arc<crate::triangulation::Triangulation> {
        Arc::new(triangulate(Rational::integer(0), n, seed).expect("q = 1 grids always exist"))
    }

    /// `theta`-independent PL profile, `+0.1` at `x = 0` and `-0.1` at
    /// `x = 1/2`: zero set is the two circles `x = 1/4` and `x = 3/4`.
    pub fn horizontal_circles(n: usize) -> PwaField {
        assert!(n % 4 != 0, "grid rows would hit the zero set");
        PwaField::sample(grid(n, 1), |_, x| {
            let d = x.rem_euclid(1.0);
            0.1 * (1.0 - 4.0 * d.min(1.0 - d))
        })
        .unwrap()
    }

    /// Negative inside one slanted ellipse per unit cell whose base
    /// projection has length 1.3, positive outside.
    pub fn slanted_diamond(n: usize) -> PwaField {
        PwaField::sample(grid(n, 2), |t, x| {
            let mut best = f64::INFINITY;
            for i in -2..=2 {
                for j in -2..=2 {
                    let u = t + i as f64 - 0.5;
                    let v = x + j as f64 - 0.5 - 0.4 * u;
                    best = best.min((u / 0.65).powi(2) + (v / 0.12).powi(2) - 1.0);
                }
            }
            0.02 * best.min(3.0) + 1e-7
        })
        .unwrap()
    }

    /// Refine and extract a fixture at `q = 1`.
    pub fn arrangement(f: &PwaField) -> Result<(RefinedPartition, ZeroSetArrangement)> {
        let p = crate::partition::refine_partition(f, Rational::integer(0), 0, crate::partition::RefineMode::Full)?;
        let a = extract_zero_set(&p)?;
        Ok((p, a))
    }
}
