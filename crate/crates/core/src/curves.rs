//! Curve pairs `Gamma-` in `B-` and `Gamma+` in `B+` built by continuing a
//! shadow pair through the zero-set arrangement.
//!
//! A pair is carried through the slabs of the arrangement as two corridor
//! indices. `Lambda-` follows the corridor above the separating crossing,
//! `Lambda+` the corridor below it, each placed at the midpoint of its corridor
//! at every event abscissa. When a corridor closes at a right critical vertex
//! the blocked curve jumps vertically to the next component of its sign, and
//! the other curve keeps going; the pair closes up once a target repeats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zeroset::{VertexClass, ZeroSetArrangement};

/// Matching tolerance for crossing positions across an event.
const MATCH_TOL: f64 = 1e-9;

/// `(theta_hat, x_hat)` in `B-`, `(theta_hat, y_hat)` in `B+`, and exactly one
/// crossing `separating_xi` between them.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ShadowTriple {
    pub theta_hat: f64,
    pub x_hat: f64,
    pub y_hat: f64,
    pub separating_xi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `Lambda-` ran into the critical vertex.
    Minus,
    /// `Lambda+` ran into the critical vertex.
    Plus,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Target {
    pub theta: f64,
    pub x: f64,
    pub side: Side,
    /// Index of the right critical vertex in the arrangement.
    pub vertex: u32,
}

/// How far left of a target the vertical jump is placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpSpacing {
    /// `epsilon / 10` with the global critical-fibre spacing.
    #[default]
    Global,
    /// One tenth of the gap back to the nearest critical fibre on the left.
    /// That gap is at least `epsilon`, and the margin near the collapsing
    /// corridor grows with it.
    Local,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VerticalSegment {
    pub theta: f64,
    pub side: Side,
    pub from: f64,
    pub to: f64,
}

/// A closed curve in the lift: knots over one period `[theta0, theta0 + k]`
/// with `x(theta + k) = x(theta) + m`. Equal consecutive abscissae encode a
/// vertical segment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosedCurve {
    pub knots: Vec<[f64; 2]>,
    pub k: i64,
    pub m: i64,
}

impl ClosedCurve {
    pub fn theta0(&self) -> f64 {
        self.knots[0][0]
    }

    pub fn is_graph(&self) -> bool {
        self.knots.windows(2).all(|w| w[1][0] > w[0][0]) && !self.has_closing_jump()
    }

    fn has_closing_jump(&self) -> bool {
        let first = self.knots[0][1] + self.m as f64;
        (self.knots[self.knots.len() - 1][1] - first).abs() > 0.0
    }

    /// Height at any lifted abscissa; at a vertical the upper end of the
    /// first knot pair wins.
    pub fn eval(&self, theta: f64) -> f64 {
        let t0 = self.theta0();
        let k = self.k as f64;
        let n = ((theta - t0) / k).floor();
        let t = theta - n * k;
        let kn = &self.knots;
        let i = kn.partition_point(|p| p[0] <= t);
        let v = if i == 0 {
            kn[0][1]
        } else if i == kn.len() {
            kn[kn.len() - 1][1]
        } else {
            let (a, b) = (kn[i - 1], kn[i]);
            a[1] + (t - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
        };
        v + n * self.m as f64
    }

    /// Knot abscissae of the periodic extension inside `[lo, hi]`.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let k = self.k as f64;
        let t0 = self.theta0();
        let mut out = Vec::new();
        let n0 = ((lo - t0) / k).floor() as i64 - 1;
        let n1 = ((hi - t0) / k).ceil() as i64 + 1;
        for n in n0..=n1 {
            for p in &self.knots {
                let t = p[0] + n as f64 * k;
                if t >= lo && t <= hi {
                    out.push(t);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// One interval of the inductive construction, `[theta_start, theta_end]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Piece {
    pub theta_start: f64,
    pub theta_end: f64,
    pub minus: Vec<[f64; 2]>,
    pub plus: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePair {
    pub start: ShadowTriple,
    pub pieces: Vec<Piece>,
    pub verticals: Vec<VerticalSegment>,
    pub targets: Vec<Target>,
    /// Period of the closed curves.
    pub k: i64,
    pub m: i64,
    /// Smallest base distance between critical fibres (capped at 1).
    pub epsilon: f64,
    /// Abscissa window `[theta0, theta0 + k]` of the closed curves.
    pub window: [f64; 2],
    pub gamma_minus: ClosedCurve,
    pub gamma_plus: ClosedCurve,
    /// Smallest vertical distance from a polyline knot to the zero set.
    pub clearance: f64,
}

impl CurvePair {
    /// Smallest of `-Phi(Gamma-)` and `Phi(Gamma+)` over all knots.
    pub fn phi_margin(&self, phi: impl Fn(f64, f64) -> f64) -> f64 {
        let a = self.gamma_minus.knots.iter().map(|p| -phi(p[0], p[1]));
        let b = self.gamma_plus.knots.iter().map(|p| phi(p[0], p[1]));
        a.chain(b).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug)]
struct State {
    s: usize,
    k: i64,
    minus: i64,
    plus: i64,
}

struct Init {
    theta: f64,
    st: State,
    pm: f64,
    pp: f64,
    /// A transition started by a jump ends at this critical abscissa.
    pending: Option<f64>,
}

enum End {
    Periodic { j: i64, m: i64, ref_m: usize, ref_p: usize },
    Blocked { theta: f64, x: f64, side: Side, vertex: u32 },
}

/// Knots of one side during a run, with the inner corridor interval at each
/// knot and the knots where the corridor changed discontinuously.
struct Track {
    knots: Vec<[f64; 2]>,
    bounds: Vec<[f64; 2]>,
    disc: Vec<usize>,
}

impl Track {
    fn new(theta: f64, x: f64, b: (f64, f64)) -> Self {
        Track {
            knots: vec![[theta, x]],
            bounds: vec![[b.0, b.1]],
            disc: Vec::new(),
        }
    }

    fn last_theta(&self) -> f64 {
        self.knots[self.knots.len() - 1][0]
    }

    fn push(&mut self, theta: f64, x: f64, b: (f64, f64), disc: bool) {
        if disc {
            self.disc.push(self.knots.len());
        }
        self.knots.push([theta, x]);
        self.bounds.push([b.0, b.1]);
    }

    /// Hold the curve level within `w/2` of every corridor discontinuity and
    /// blend back to the midline over the next `w/2`. A midline switch then
    /// never happens right next to the vertex that caused it. Knots sit on
    /// every slab boundary and corridor walls are linear inside a slab, so
    /// keeping each knot inside its interval keeps the polyline in its region.
    /// Returns the knots and the new index of every old knot.
    fn settle(self, w: f64) -> (Vec<[f64; 2]>, Vec<usize>) {
        let Track { knots, bounds, disc } = self;
        let n = knots.len();
        if disc.is_empty() || n < 3 {
            return (knots, (0..n).collect());
        }
        let (t0, t1) = (knots[0][0], knots[n - 1][0]);
        // (abscissa, held level, wall allowance)
        let centres: Vec<(f64, f64, f64)> = disc
            .iter()
            .map(|&d| (knots[d][0], knots[d][1], 0.25 * (bounds[d][1] - bounds[d][0])))
            .collect();
        let mut extra: Vec<f64> = centres
            .iter()
            .flat_map(|&(c, _, _)| [c - w, c - 0.5 * w, c + 0.5 * w, c + w])
            .filter(|&t| t > t0 && t < t1)
            .collect();
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        let mut out: Vec<([f64; 2], [f64; 2])> = Vec::with_capacity(n + extra.len());
        let mut map = Vec::with_capacity(n);
        let mut e = 0;
        for i in 0..n {
            while e < extra.len() && extra[e] < knots[i][0] {
                let t = extra[e];
                e += 1;
                if i == 0 || knots[i - 1][0] >= t {
                    continue;
                }
                let (a, b) = (knots[i - 1], knots[i]);
                let f = (t - a[0]) / (b[0] - a[0]);
                let lerp = |u: f64, v: f64| u + f * (v - u);
                let (ba, bb) = (bounds[i - 1], bounds[i]);
                out.push(([t, lerp(a[1], b[1])], [lerp(ba[0], bb[0]), lerp(ba[1], bb[1])]));
            }
            while e < extra.len() && extra[e] == knots[i][0] {
                e += 1;
            }
            map.push(out.len());
            out.push((knots[i], bounds[i]));
        }
        let last = out.len() - 1;
        let mut res: Vec<[f64; 2]> = Vec::with_capacity(out.len());
        for (j, &(p, b)) in out.iter().enumerate() {
            if j == 0 || j == last {
                res.push(p);
                continue;
            }
            let near = centres
                .iter()
                .map(|&(c, x, q)| ((p[0] - c).abs(), x, q))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .filter(|&(a, _, _)| a < w);
            let Some((a, hold, qd)) = near else {
                res.push(p);
                continue;
            };
            let v = if a <= 0.5 * w {
                hold
            } else {
                hold + (a - 0.5 * w) / (0.5 * w) * (p[1] - hold)
            };
            let q = (0.25 * (b[1] - b[0])).min(qd).max(0.0);
            res.push([p[0], v.clamp(b[0] + q, b[1] - q)]);
        }
        (res, map)
    }
}

struct Run {
    pm: Vec<[f64; 2]>,
    pp: Vec<[f64; 2]>,
    /// (event abscissa, state after it)
    hist: Vec<(f64, State)>,
    end: End,
    clearance: f64,
}

struct Engine<'a> {
    arr: &'a ZeroSetArrangement,
    /// Critical-fibre spacing, capped at 1.
    eps: f64,
    cv: Vec<f64>,
    rcv: Vec<u32>,
}

impl<'a> Engine<'a> {
    fn new(arr: &'a ZeroSetArrangement) -> Self {
        let mut cv: Vec<f64> = arr.critical_vertices().map(|(_, v)| v.p[0]).collect();
        cv.sort_by(f64::total_cmp);
        let rcv = arr
            .critical_vertices()
            .filter(|(_, v)| v.class == VertexClass::RightCritical)
            .map(|(i, _)| i as u32)
            .collect();
        Engine {
            arr,
            eps: arr.critical_spacing().min(1.0),
            cv,
            rcv,
        }
    }

    fn x(&self, s: usize, n: i64, t: f64) -> f64 {
        self.arr.crossing_x(s, n, t)
    }

    fn n(&self, s: usize) -> i64 {
        self.arr.n_cross(s) as i64
    }

    /// Right-slab crossing at the same position as left crossing `n`.
    fn matched(&self, s: usize, n: i64, tl: f64, r: usize, tr: f64) -> Option<i64> {
        let nr = self.n(r);
        if nr == 0 {
            return None;
        }
        let x = self.x(s, n, tl);
        let mut j = x.floor() as i64 * nr;
        while self.x(r, j, tr) > x + MATCH_TOL {
            j -= 1;
        }
        while self.x(r, j + 1, tr) <= x + MATCH_TOL {
            j += 1;
        }
        ((self.x(r, j, tr) - x).abs() <= MATCH_TOL).then_some(j)
    }

    /// Base distance from `theta` back to the previous critical fibre other
    /// than the one through `theta` itself.
    fn left_gap(&self, theta: f64) -> f64 {
        let f = theta.rem_euclid(1.0);
        self.cv
            .iter()
            .map(|&c| (f - c).rem_euclid(1.0))
            .filter(|&d| d > 0.5 * self.eps && d < 1.0 - 0.5 * self.eps)
            .fold(1.0, f64::min)
            .max(self.eps)
    }

    fn on_critical_fibre(&self, theta: f64, tol: f64) -> bool {
        let f = theta.rem_euclid(1.0);
        self.cv.iter().any(|&c| {
            let d = (c - f).rem_euclid(1.0);
            d.min(1.0 - d) < tol
        })
    }

    fn find_rcv(&self, theta: f64, x: f64) -> Result<u32> {
        for &v in &self.rcv {
            let p = self.arr.vertices[v as usize].p;
            let dt = (theta - p[0]).rem_euclid(1.0);
            let dx = (x - p[1]).rem_euclid(1.0);
            if dt.min(1.0 - dt) < 1e-7 && dx.min(1.0 - dx) < 1e-7 {
                return Ok(v);
            }
        }
        Err(Error::ArrangementInconsistent(format!(
            "corridor closes at ({theta}, {x}) which is not a right critical vertex"
        )))
    }

    /// Corridor `(lo, lo+1)` of slab `s` at local abscissa `t`.
    fn corridor(&self, s: usize, lo: i64, t: f64) -> (f64, f64) {
        (self.x(s, lo, t), self.x(s, lo + 1, t))
    }

    /// Last knots at the blocking fibre. The collapsing corridor ends at the
    /// vertex, so the final segments stay inside their corridors up to it.
    fn close_at_block(&self, st: &State, tl: f64, theta_e: f64, pm: &mut Track, pp: &mut Track) {
        let (a, b) = self.corridor(st.s, st.minus, tl);
        let (c, d) = self.corridor(st.s, st.plus, tl);
        pm.push(theta_e, 0.5 * (a + b), (a, b), false);
        pp.push(theta_e, 0.5 * (c + d), (c, d), false);
    }

    fn blocked(&self, pm: Track, pp: Track, hist: Vec<(f64, State)>, end: End, clearance: f64) -> Run {
        Run {
            pm: pm.settle(0.5 * self.eps).0,
            pp: pp.settle(0.5 * self.eps).0,
            hist,
            end,
            clearance,
        }
    }

    fn run(&self, init: &Init, max_events: usize) -> Result<Run> {
        let arr = self.arr;
        let ns = arr.slabs.len();
        let mut st = init.st;
        let mut pending = init.pending;
        let t_init = init.theta - st.k as f64;
        let mut pm = Track::new(init.theta, init.pm, self.corridor(st.s, st.minus, t_init));
        let mut pp = Track::new(init.theta, init.pp, self.corridor(st.s, st.plus, t_init));
        let mut hist = Vec::new();
        let mut clearance = f64::INFINITY;
        // reference slab for periodic closure
        let mut reference: Option<(State, f64, usize, usize)> = None;
        let set_ref = |st: State, pm: &mut Track, pp: &mut Track| {
            let sl = &arr.slabs[st.s];
            let t = 0.5 * (sl.lo + sl.hi);
            let (a, b) = self.corridor(st.s, st.minus, t);
            let (c, d) = self.corridor(st.s, st.plus, t);
            let th = t + st.k as f64;
            if th > pm.last_theta() {
                pm.push(th, 0.5 * (a + b), (a, b), false);
                pp.push(th, 0.5 * (c + d), (c, d), false);
            }
            (st, th, pm.knots.len() - 1, pp.knots.len() - 1)
        };
        if pending.is_none() {
            reference = Some(set_ref(st, &mut pm, &mut pp));
        }
        for _ in 0..max_events {
            let s = st.s;
            let r = (s + 1) % ns;
            let tl = arr.slabs[s].hi;
            let wrap = if r == 0 { 1.0 } else { 0.0 };
            let tr = tl - wrap;
            let theta_e = tl + st.k as f64;
            let k_next = st.k + wrap as i64;
            let near = |a: f64, b: f64| (a - b).abs() <= MATCH_TOL;
            // Lambda- anchored on its lower crossing
            let lo = st.minus;
            let new_minus = match self.matched(s, lo, tl, r, tr) {
                Some(j) => j,
                None => {
                    if near(self.x(s, lo, tl), self.x(s, lo + 1, tl)) {
                        let x = self.x(s, lo, tl);
                        let vertex = self.find_rcv(theta_e, x)?;
                        self.close_at_block(&st, tl, theta_e, &mut pm, &mut pp);
                        let end = End::Blocked {
                                theta: theta_e,
                                x,
                                side: Side::Minus,
                                vertex,
                            };
                        return Ok(self.blocked(pm, pp, hist, end, clearance));
                    }
                    self.matched(s, lo - 2, tl, r, tr).ok_or_else(|| {
                        Error::ArrangementInconsistent(format!("lost the lower bound of Lambda- at {theta_e}"))
                    })?
                }
            };
            // Lambda+ anchored on its upper crossing
            let hi = st.plus + 1;
            let new_plus = match self.matched(s, hi, tl, r, tr) {
                Some(j) => j - 1,
                None => {
                    if near(self.x(s, hi, tl), self.x(s, hi - 1, tl)) {
                        let x = self.x(s, hi, tl);
                        let vertex = self.find_rcv(theta_e, x)?;
                        self.close_at_block(&st, tl, theta_e, &mut pm, &mut pp);
                        let end = End::Blocked {
                                theta: theta_e,
                                x,
                                side: Side::Plus,
                                vertex,
                            };
                        return Ok(self.blocked(pm, pp, hist, end, clearance));
                    }
                    self.matched(s, hi + 2, tl, r, tr).ok_or_else(|| {
                        Error::ArrangementInconsistent(format!("lost the upper bound of Lambda+ at {theta_e}"))
                    })? - 1
                }
            };
            // intersection of the corridors on both sides of the event
            let meet = |l: (f64, f64), rr: (f64, f64)| {
                let jump = !near(l.0, rr.0) || !near(l.1, rr.1);
                ((l.0.max(rr.0), l.1.min(rr.1)), jump)
            };
            let (bm, jm) = meet(self.corridor(s, st.minus, tl), self.corridor(r, new_minus, tr));
            let (bp, jp) = meet(self.corridor(s, st.plus, tl), self.corridor(r, new_plus, tr));
            let (cm, cp) = (0.5 * (bm.1 - bm.0), 0.5 * (bp.1 - bp.0));
            if !(cm > 0.0 && cp > 0.0) {
                return Err(Error::ArrangementInconsistent(format!("corridor pinched at {theta_e}")));
            }
            clearance = clearance.min(cm).min(cp);
            pm.push(theta_e, 0.5 * (bm.0 + bm.1), bm, jm);
            pp.push(theta_e, 0.5 * (bp.0 + bp.1), bp, jp);
            st = State {
                s: r,
                k: k_next,
                minus: new_minus,
                plus: new_plus,
            };
            hist.push((theta_e, st));
            if let Some(tc) = pending {
                if theta_e >= tc - 1e-12 {
                    pending = None;
                }
            }
            if pending.is_none() {
                if st.plus + 1 != st.minus {
                    return Err(Error::ArrangementInconsistent(format!("shadow lost at {theta_e}")));
                }
                if arr.up_sign(st.s, st.minus) >= 0 || arr.up_sign(st.s, st.plus) <= 0 {
                    return Err(Error::ArrangementInconsistent(format!("corridor sign flipped at {theta_e}")));
                }
                match reference {
                    None => reference = Some(set_ref(st, &mut pm, &mut pp)),
                    Some((rst, rth, _, _)) if rst.s == st.s && st.k > rst.k => {
                        let n = self.n(st.s);
                        let dm = st.minus - rst.minus;
                        let dp = st.plus - rst.plus;
                        if dm.rem_euclid(n) == 0 && dp == dm {
                            let j = st.k - rst.k;
                            let m = dm / n;
                            let (_, _, im, ip) = reference.unwrap();
                            let th = rth + j as f64;
                            let mf = m as f64;
                            let (bm, bp) = (pm.bounds[im], pp.bounds[ip]);
                            pm.push(th, pm.knots[im][1] + mf, (bm[0] + mf, bm[1] + mf), false);
                            pp.push(th, pp.knots[ip][1] + mf, (bp[0] + mf, bp[1] + mf), false);
                            // settle, then restore exact periodicity from the reference knot
                            let (mut km, mapm) = pm.settle(0.5 * self.eps);
                            let (mut kp, mapp) = pp.settle(0.5 * self.eps);
                            let (im, ip) = (mapm[im], mapp[ip]);
                            let (lm, lp) = (km.len() - 1, kp.len() - 1);
                            km[lm][1] = km[im][1] + mf;
                            kp[lp][1] = kp[ip][1] + mf;
                            return Ok(Run {
                                pm: km,
                                pp: kp,
                                hist,
                                end: End::Periodic {
                                    j,
                                    m,
                                    ref_m: im,
                                    ref_p: ip,
                                },
                                clearance,
                            });
                        }
                    }
                    _ => {}
                }
            }
        }
        Err(Error::ContinuationDiverged { events: max_events })
    }
}

/// Valid `y_hat` below `(theta_hat, x_hat)`: the open `B+` corridor directly
/// under the `B-` corridor containing `x_hat`.
pub fn shadow_interval(arr: &ZeroSetArrangement, theta_hat: f64, x_hat: f64) -> Result<(f64, f64)> {
    let eng = Engine::new(arr);
    if eng.on_critical_fibre(theta_hat, 1e-12) {
        return Err(Error::CriticalFibre { theta: theta_hat });
    }
    let (s, k) = arr.slab_of(theta_hat);
    let t = theta_hat - k as f64;
    if arr.n_cross(s) == 0 || arr.sign_at(theta_hat, x_hat) >= 0 {
        return Err(Error::Domain(format!("({theta_hat}, {x_hat}) is not in B-")));
    }
    let lo = lower_crossing(&eng, s, t, x_hat);
    Ok((eng.x(s, lo - 1, t), eng.x(s, lo, t)))
}

fn lower_crossing(eng: &Engine, s: usize, t: f64, x: f64) -> i64 {
    let n = eng.n(s);
    let mut i = x.floor() as i64 * n;
    while eng.x(s, i, t) >= x {
        i -= 1;
    }
    while eng.x(s, i + 1, t) < x {
        i += 1;
    }
    i
}

/// Seeded start triple on a fibre midway between consecutive critical fibres.
pub fn start_triple(arr: &ZeroSetArrangement, seed: u64) -> Result<ShadowTriple> {
    let eng = Engine::new(arr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = if eng.cv.is_empty() {
        0.5
    } else {
        let n = eng.cv.len();
        let g = rng.gen_range(0..n);
        let a = eng.cv[g];
        let b = if g + 1 < n { eng.cv[g + 1] } else { eng.cv[0] + 1.0 };
        0.5 * (a + b)
    };
    let (s, k) = arr.slab_of(theta);
    let t = theta - k as f64;
    let n = eng.n(s);
    let minus: Vec<i64> = (0..n).filter(|&i| arr.up_sign(s, i) < 0).collect();
    if minus.is_empty() {
        return Err(Error::Domain(format!("fibre {theta} carries no B- corridor")));
    }
    let lo = minus[rng.gen_range(0..minus.len())];
    let (a, b) = eng.corridor(s, lo, t);
    let (c, d) = eng.corridor(s, lo - 1, t);
    Ok(ShadowTriple {
        theta_hat: theta,
        x_hat: 0.5 * (a + b),
        y_hat: 0.5 * (c + d),
        separating_xi: a,
    })
}

/// Result of one continuation from a shadow triple.
#[derive(Clone, Debug)]
pub enum Continuation {
    /// No blocking vertex: the pair returns to its own translate by `(k, m)`.
    Periodic {
        minus: Vec<[f64; 2]>,
        plus: Vec<[f64; 2]>,
        k: i64,
        m: i64,
    },
    /// Blocked at the right critical vertex `target`.
    Target {
        target: Target,
        minus: Vec<[f64; 2]>,
        plus: Vec<[f64; 2]>,
    },
}

fn init_from(arr: &ZeroSetArrangement, eng: &Engine, tr: &ShadowTriple) -> Result<Init> {
    let (s, k) = arr.slab_of(tr.theta_hat);
    let t = tr.theta_hat - k as f64;
    let lo = lower_crossing(eng, s, t, tr.x_hat);
    let below = lower_crossing(eng, s, t, tr.y_hat);
    if below + 1 != lo || arr.up_sign(s, lo) >= 0 || arr.up_sign(s, below) <= 0 {
        return Err(Error::Domain("start points do not form a shadow triple".into()));
    }
    Ok(Init {
        theta: tr.theta_hat,
        st: State {
            s,
            k,
            minus: lo,
            plus: below,
        },
        pm: tr.x_hat,
        pp: tr.y_hat,
        pending: None,
    })
}

fn event_budget(arr: &ZeroSetArrangement) -> usize {
    let rcv = arr.count_class(VertexClass::RightCritical);
    arr.slabs.len() * (arr.components.len() + 1) * (rcv + 2) + 16
}

/// Continue a shadow triple to its target point or to periodic closure.
pub fn continue_to_target(arr: &ZeroSetArrangement, triple: &ShadowTriple) -> Result<Continuation> {
    let eng = Engine::new(arr);
    let eps = arr.critical_spacing().min(1.0);
    if eng.on_critical_fibre(triple.theta_hat, 0.5 * eps - 1e-12) {
        return Err(Error::CriticalFibre { theta: triple.theta_hat });
    }
    let init = init_from(arr, &eng, triple)?;
    let run = eng.run(&init, event_budget(arr))?;
    Ok(match run.end {
        End::Periodic { j, m, ref_m, ref_p } => Continuation::Periodic {
            minus: run.pm[ref_m..].to_vec(),
            plus: run.pp[ref_p..].to_vec(),
            k: j,
            m,
        },
        End::Blocked { theta, x, side, vertex } => {
            if theta <= triple.theta_hat {
                return Err(Error::ArrangementInconsistent("target not to the right of the start".into()));
            }
            Continuation::Target {
                target: Target { theta, x, side, vertex },
                minus: run.pm,
                plus: run.pp,
            }
        }
    })
}

fn interp(pts: &[[f64; 2]], t: f64) -> f64 {
    let i = pts.partition_point(|p| p[0] <= t);
    if i == 0 {
        return pts[0][1];
    }
    if i == pts.len() {
        return pts[pts.len() - 1][1];
    }
    let (a, b) = (pts[i - 1], pts[i]);
    if b[0] == a[0] {
        return b[1];
    }
    a[1] + (t - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
}

/// Points of `pts` strictly before `t`, then `(t, value)`.
fn cut(pts: &[[f64; 2]], t: f64) -> Vec<[f64; 2]> {
    let v = interp(pts, t);
    let mut out: Vec<[f64; 2]> = pts.iter().copied().filter(|p| p[0] < t).collect();
    out.push([t, v]);
    out
}

fn push_knots(out: &mut Vec<[f64; 2]>, pts: &[[f64; 2]]) {
    for &p in pts {
        if let Some(l) = out.last() {
            if l[0] == p[0] && l[1] == p[1] {
                continue;
            }
        }
        out.push(p);
    }
}

/// Build a closed pair by the inductive target construction.
pub fn build_curves(arr: &ZeroSetArrangement, seed: u64) -> Result<CurvePair> {
    build_curves_with(arr, seed, JumpSpacing::Global)
}

/// [`build_curves`] with a choice of jump placement.
pub fn build_curves_with(arr: &ZeroSetArrangement, seed: u64, spacing: JumpSpacing) -> Result<CurvePair> {
    let eng = Engine::new(arr);
    let eps = arr.critical_spacing().min(1.0);
    let start = start_triple(arr, seed)?;
    let mut init = init_from(arr, &eng, &start)?;
    let rcv_count = eng.rcv.len();
    let budget = event_budget(arr);
    let mut pieces: Vec<Piece> = Vec::new();
    let mut verticals: Vec<VerticalSegment> = Vec::new();
    let mut targets: Vec<Target> = Vec::new();
    let mut clearance = f64::INFINITY;
    loop {
        let run = eng.run(&init, budget)?;
        clearance = clearance.min(run.clearance);
        match run.end {
            End::Periodic { j, m, ref_m, ref_p } => {
                let last = run.pm.len() - 1;
                pieces.push(Piece {
                    theta_start: init.theta,
                    theta_end: run.pm[last][0],
                    minus: run.pm.clone(),
                    plus: run.pp.clone(),
                });
                let gm = ClosedCurve {
                    knots: run.pm[ref_m..].to_vec(),
                    k: j,
                    m,
                };
                let gp = ClosedCurve {
                    knots: run.pp[ref_p..].to_vec(),
                    k: j,
                    m,
                };
                let window = [gm.theta0(), gm.theta0() + j as f64];
                return Ok(CurvePair {
                    start,
                    pieces,
                    verticals,
                    targets,
                    k: j,
                    m,
                    epsilon: eps,
                    window,
                    gamma_minus: gm,
                    gamma_plus: gp,
                    clearance,
                });
            }
            End::Blocked { theta, x, side, vertex } => {
                let gap = match spacing {
                    JumpSpacing::Global => eps,
                    JumpSpacing::Local => eng.left_gap(theta).min(1.0),
                };
                let th = theta - gap / 10.0;
                if th <= init.theta {
                    return Err(Error::ArrangementInconsistent(format!(
                        "target at {theta} too close to the previous start {}",
                        init.theta
                    )));
                }
                if let Some(prev) = targets.last() {
                    if theta <= prev.theta {
                        return Err(Error::ArrangementInconsistent("target abscissae not increasing".into()));
                    }
                }
                let st = run
                    .hist
                    .iter()
                    .rev()
                    .find(|(te, _)| *te <= th)
                    .map(|&(_, s)| s)
                    .unwrap_or(init.st);
                let minus = cut(&run.pm, th);
                let plus = cut(&run.pp, th);
                let (am, ap) = (minus[minus.len() - 1][1], plus[plus.len() - 1][1]);
                pieces.push(Piece {
                    theta_start: init.theta,
                    theta_end: th,
                    minus,
                    plus,
                });
                let t = th - st.k as f64;
                let n = eng.n(st.s);
                let (nst, pm, pp, vert) = match side {
                    Side::Minus => {
                        let lo = st.minus + 2;
                        if n <= 2 {
                            return Err(Error::FibreExhausted { theta: th });
                        }
                        let (a, b) = eng.corridor(st.s, lo, t);
                        let to = 0.5 * (a + b);
                        (
                            State { minus: lo, ..st },
                            to,
                            ap,
                            VerticalSegment {
                                theta: th,
                                side,
                                from: am,
                                to,
                            },
                        )
                    }
                    Side::Plus => {
                        let lo = st.plus - 2;
                        if n <= 2 {
                            return Err(Error::FibreExhausted { theta: th });
                        }
                        let (a, b) = eng.corridor(st.s, lo, t);
                        let to = 0.5 * (a + b);
                        (
                            State { plus: lo, ..st },
                            am,
                            to,
                            VerticalSegment {
                                theta: th,
                                side,
                                from: ap,
                                to,
                            },
                        )
                    }
                };
                targets.push(Target { theta, x, side, vertex });
                verticals.push(vert);
                let jdx = targets.len() - 1;
                if let Some(i) = targets[..jdx].iter().position(|t| t.vertex == vertex) {
                    return close_on_repeat(start, pieces, verticals, targets, i, jdx, eps, clearance);
                }
                if targets.len() > rcv_count + 1 {
                    return Err(Error::PigeonholeViolation { limit: rcv_count + 1 });
                }
                init = Init {
                    theta: th,
                    st: nst,
                    pm,
                    pp,
                    pending: Some(theta),
                };
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn close_on_repeat(
    start: ShadowTriple,
    pieces: Vec<Piece>,
    verticals: Vec<VerticalSegment>,
    targets: Vec<Target>,
    i: usize,
    j: usize,
    eps: f64,
    clearance: f64,
) -> Result<CurvePair> {
    let k = (targets[j].theta - targets[i].theta).round() as i64;
    let m = (targets[j].x - targets[i].x).round() as i64;
    if k < 1 {
        return Err(Error::ArrangementInconsistent("repeated target without base advance".into()));
    }
    // heights just left of the window start, per side
    let end_i = &pieces[i];
    let (am, ap) = (end_i.minus[end_i.minus.len() - 1][1], end_i.plus[end_i.plus.len() - 1][1]);
    let mut km: Vec<[f64; 2]> = Vec::new();
    let mut kp: Vec<[f64; 2]> = Vec::new();
    for pc in &pieces[i + 1..=j] {
        push_knots(&mut km, &pc.minus);
        push_knots(&mut kp, &pc.plus);
    }
    let lm = km.len() - 1;
    km[lm][1] = am + m as f64;
    let lp = kp.len() - 1;
    kp[lp][1] = ap + m as f64;
    let window = [km[0][0], km[0][0] + k as f64];
    Ok(CurvePair {
        start,
        pieces,
        verticals,
        targets,
        k,
        m,
        epsilon: eps,
        window,
        gamma_minus: ClosedCurve { knots: km, k, m },
        gamma_plus: ClosedCurve { knots: kp, k, m },
        clearance,
    })
}

/// Replace every vertical of a closed curve by a ramp over `[theta - h, theta]`.
fn tilt_curve(c: &ClosedCurve, h: f64) -> Result<ClosedCurve> {
    let kn = &c.knots;
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(kn.len());
    let mut last_vertical = f64::NEG_INFINITY;
    let ramp = |out: &mut Vec<[f64; 2]>, tv: f64, top: f64, last_vertical: &mut f64| -> Result<()> {
        let t0 = tv - h;
        if t0 <= *last_vertical || t0 <= kn[0][0] {
            return Err(Error::TiltTooLarge(format!("ramp at {tv} of width {h} overlaps the previous jump")));
        }
        let base = interp(out, t0);
        while out.last().is_some_and(|p| p[0] >= t0) {
            out.pop();
        }
        out.push([t0, base]);
        out.push([tv, top]);
        *last_vertical = tv;
        Ok(())
    };
    for (idx, &p) in kn.iter().enumerate() {
        match out.last() {
            Some(l) if l[0] == p[0] && idx > 0 => {
                if l[1] != p[1] {
                    ramp(&mut out, p[0], p[1], &mut last_vertical)?;
                }
            }
            _ => out.push(p),
        }
    }
    let close = kn[0][1] + c.m as f64;
    let tend = kn[0][0] + c.k as f64;
    if out[out.len() - 1][1] != close {
        ramp(&mut out, tend, close, &mut last_vertical)?;
    }
    Ok(ClosedCurve {
        knots: out,
        k: c.k,
        m: c.m,
    })
}

/// Whether ramps of width `s q / 4` are resolvable at the abscissae of the pair.
pub fn tilt_resolvable(pair: &CurvePair, s: f64, q: i64) -> bool {
    let scale = pair.window[0].abs().max(pair.window[1].abs()).max(1.0);
    s * q as f64 / 4.0 > 64.0 * f64::EPSILON * scale
}

/// Graph form of both closed curves: verticals become ramps of width `s q / 4`.
pub fn tilt_verticals(pair: &CurvePair, s: f64, q: i64) -> Result<CurvePair> {
    if !(s > 0.0) {
        return Err(Error::Domain("tilt requires s > 0".into()));
    }
    let h = s * q as f64 / 4.0;
    if !pair.verticals.is_empty() && !tilt_resolvable(pair, s, q) {
        return Err(Error::TiltTooLarge(format!("ramp width {h:e} is below the abscissa resolution")));
    }
    let gm = tilt_curve(&pair.gamma_minus, h)?;
    let gp = tilt_curve(&pair.gamma_plus, h)?;
    // the band must stay open
    let lo = pair.window[0];
    let hi = pair.window[1];
    let mut ts = gm.breakpoints(lo, hi);
    ts.extend(gp.breakpoints(lo, hi));
    for t in ts {
        if gm.eval(t) <= gp.eval(t) {
            return Err(Error::TiltTooLarge(format!("boundary curves cross at {t}")));
        }
    }
    Ok(CurvePair {
        gamma_minus: gm,
        gamma_plus: gp,
        ..pair.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zeroset::fixtures::*;

    #[test]
    fn shadow_interval_on_circles() {
        let (_, a) = arrangement(&horizontal_circles(10)).unwrap();
        let (lo, hi) = shadow_interval(&a, 0.3, 0.5).unwrap();
        assert!((lo + 0.25).abs() < 1e-12 && (hi - 0.25).abs() < 1e-12, "({lo}, {hi})");
        assert!(matches!(shadow_interval(&a, 0.3, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn circles_close_without_verticals() {
        let (_, a) = arrangement(&horizontal_circles(10)).unwrap();
        let p = build_curves(&a, 1).unwrap();
        assert!(p.verticals.is_empty() && p.targets.is_empty());
        assert_eq!((p.k, p.m), (1, 0));
        for t in [0.0, 0.31, 0.77] {
            assert!((p.gamma_minus.eval(t).rem_euclid(1.0) - 0.5).abs() < 1e-9);
            assert!((p.gamma_plus.eval(t).rem_euclid(1.0)).min(1.0 - p.gamma_plus.eval(t).rem_euclid(1.0)) < 1e-9);
        }
        assert!(p.gamma_minus.is_graph());
    }

    #[test]
    fn diamond_jumps_once_per_period() {
        let (part, a) = arrangement(&slanted_diamond(40)).unwrap();
        for seed in 0..4 {
            let p = build_curves(&a, seed).unwrap();
            assert!(p.targets.len() <= 2, "{seed}: {} targets", p.targets.len());
            assert_eq!((p.k, p.m), (1, 1), "seed {seed}");
            // one vertical per period, on the minus side
            let in_window: Vec<_> = p
                .verticals
                .iter()
                .filter(|v| v.theta >= p.window[0] && v.theta < p.window[1])
                .collect();
            assert_eq!(in_window.len(), 1);
            assert_eq!(in_window[0].side, Side::Minus);
            assert!(in_window[0].to > in_window[0].from);
            for (i, t) in p.targets.iter().enumerate() {
                assert!((p.pieces[i].theta_end - (t.theta - p.epsilon / 10.0)).abs() < 1e-12);
                assert!(p.pieces[i].theta_end - p.pieces[i].theta_start > p.epsilon / 3.0);
            }
            let margin = p.phi_margin(|t, x| part.eval(t, x).unwrap());
            assert!(margin > 0.0, "seed {seed}: {margin}");
            let g = tilt_verticals(&p, 1e-3, 1).unwrap();
            assert!(g.gamma_minus.is_graph() && g.gamma_plus.is_graph());
        }
    }

    #[test]
    fn local_spacing_jumps_further_left() {
        let (part, a) = arrangement(&slanted_diamond(40)).unwrap();
        let eng = Engine::new(&a);
        let p = build_curves_with(&a, 2, JumpSpacing::Local).unwrap();
        assert_eq!((p.k, p.m), (1, 1));
        for (i, t) in p.targets.iter().enumerate() {
            let gap = eng.left_gap(t.theta);
            assert!(gap >= p.epsilon);
            assert!((p.pieces[i].theta_end - (t.theta - gap / 10.0)).abs() < 1e-12);
            assert!(p.pieces[i].theta_end - p.pieces[i].theta_start > p.epsilon / 3.0);
        }
        assert!(p.phi_margin(|t, x| part.eval(t, x).unwrap()) > 0.0);
    }

    #[test]
    fn start_near_critical_fibre_is_rejected() {
        let (_, a) = arrangement(&slanted_diamond(40)).unwrap();
        let (_, v) = a.critical_vertices().next().unwrap();
        let tr = ShadowTriple {
            theta_hat: v.p[0] + 0.01,
            x_hat: 0.5,
            y_hat: 0.0,
            separating_xi: 0.3,
        };
        assert!(matches!(continue_to_target(&a, &tr), Err(Error::CriticalFibre { .. })));
    }

    #[test]
    fn zero_tilt_rejected() {
        let (_, a) = arrangement(&horizontal_circles(10)).unwrap();
        let p = build_curves(&a, 1).unwrap();
        assert!(tilt_verticals(&p, 0.0, 1).is_err());
        let g = tilt_verticals(&p, 1e-3, 1).unwrap();
        assert_eq!(g.gamma_minus.knots, p.gamma_minus.knots);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn settled_knots_stay_in_their_corridors(
            steps in proptest::collection::vec((1e-4f64..0.05, -0.3f64..0.3, 0.01f64..0.2, proptest::bool::weighted(0.2)), 3..40),
            w in 1e-3f64..0.2,
        ) {
            let mut theta = 0.0;
            let mut tr: Option<Track> = None;
            let mut walls = Vec::new();
            for &(dt, c, half, jump) in &steps {
                theta += dt;
                let b = (c - half, c + half);
                walls.push((theta, b));
                match tr.as_mut() {
                    None => tr = Some(Track::new(theta, c, b)),
                    Some(t) => t.push(theta, c + 0.5 * half, b, jump),
                }
            }
            let tr = tr.unwrap();
            let orig = tr.knots.clone();
            let (out, map) = tr.settle(w);
            proptest::prop_assert_eq!(out[0], orig[0]);
            proptest::prop_assert_eq!(out[out.len() - 1], orig[orig.len() - 1]);
            for (i, &j) in map.iter().enumerate() {
                proptest::prop_assert_eq!(out[j][0], orig[i][0]);
                let (_, b) = walls[i];
                proptest::prop_assert!(out[j][1] >= b.0 - 1e-12 && out[j][1] <= b.1 + 1e-12);
            }
            proptest::prop_assert!(out.windows(2).all(|p| p[0][0] < p[1][0]));
        }
    }
}
