//! Deterministic SVG rendering of artifacts on a fixed 1000 x 1000 canvas.
//!
//! Torus artifacts are drawn on the fundamental domain `[0,1)^2` with `theta`
//! to the right and `x` upwards. Lifted polylines are drawn with every
//! integer translate that meets the square and clipped to it.

use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::certify::LockCertificate;
use crate::curves::ClosedCurve;
use crate::error::{Error, Result};
use crate::io::{parse_csv, read_input, Artifact, CurvesData, ZeroSetData};
use crate::staircase::{Plateau, StaircaseData, StaircaseSample};
use crate::zeroset::VertexClass;

pub const CANVAS: f64 = 1000.0;
const PAD: f64 = 50.0;
const SIDE: f64 = CANVAS - 2.0 * PAD;

const SHADE: &str = "#c9d6ea";
const MINUS: &str = "#1f5fbf";
const PLUS: &str = "#c0392b";
const ZERO: &str = "#333333";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RenderKind {
    Staircase,
    Tongue,
    Zeroset,
    Curves,
    Certificate,
}

#[derive(Clone, Debug)]
pub enum RenderInput {
    Staircase {
        samples: Vec<StaircaseSample>,
        plateaus: Vec<Plateau>,
    },
    Tongue {
        alpha: Vec<f64>,
        tau_minus: Vec<f64>,
        tau_plus: Vec<f64>,
    },
    ZeroSet(ZeroSetData),
    Curves(CurvesData),
    Certificate(Box<LockCertificate>),
}

impl RenderInput {
    pub fn kind(&self) -> RenderKind {
        match self {
            RenderInput::Staircase { .. } => RenderKind::Staircase,
            RenderInput::Tongue { .. } => RenderKind::Tongue,
            RenderInput::ZeroSet(_) => RenderKind::Zeroset,
            RenderInput::Curves(_) => RenderKind::Curves,
            RenderInput::Certificate(_) => RenderKind::Certificate,
        }
    }
}

fn unknown(what: &str) -> Error {
    Error::Usage(format!("cannot render {what}"))
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Usage(e.to_string()))
}

/// Parse an artifact file, detecting its kind from content unless `kind` is given.
pub fn load_render_input(path: &Path, kind: Option<RenderKind>) -> Result<RenderInput> {
    let text = read_input(path)?;
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        let envelope = v.get("kind").and_then(Value::as_str).map(str::to_string);
        let detected = match envelope.as_deref() {
            Some("staircase") => RenderKind::Staircase,
            Some("zeroset") => RenderKind::Zeroset,
            Some("curves") => RenderKind::Curves,
            Some(k) => return Err(unknown(&format!("artifact kind `{k}`"))),
            None if v.get("claimed_rotation").is_some() => RenderKind::Certificate,
            None => return Err(unknown("JSON without an artifact kind")),
        };
        if kind.is_some_and(|k| k != detected) {
            return Err(Error::Usage(format!("artifact is a {detected:?}, not a {:?}", kind.unwrap())));
        }
        return match detected {
            RenderKind::Staircase => {
                let a: Artifact<StaircaseData> = from_value(v)?;
                Ok(RenderInput::Staircase {
                    samples: a.data.samples,
                    plateaus: a.data.plateaus,
                })
            }
            RenderKind::Zeroset => Ok(RenderInput::ZeroSet(from_value::<Artifact<ZeroSetData>>(v)?.data)),
            RenderKind::Curves => Ok(RenderInput::Curves(from_value::<Artifact<CurvesData>>(v)?.data)),
            RenderKind::Certificate => Ok(RenderInput::Certificate(Box::new(from_value(v)?))),
            RenderKind::Tongue => unreachable!(),
        };
    }
    let t = parse_csv(&text)?;
    let has = |c: &str| t.header.iter().any(|h| h == c);
    let detected = if has("tau") && has("rho") {
        RenderKind::Staircase
    } else if has("alpha") && has("tau_minus") {
        RenderKind::Tongue
    } else {
        return Err(unknown(&format!("CSV with columns {:?}", t.header)));
    };
    if kind.is_some_and(|k| k != detected) {
        return Err(Error::Usage(format!("CSV is a {detected:?} table")));
    }
    match detected {
        RenderKind::Staircase => {
            let (tau, rho) = (t.column("tau")?, t.column("rho")?);
            let hw = t.column("half_width").unwrap_or_else(|_| vec![0.0; tau.len()]);
            let samples = (0..tau.len())
                .map(|i| StaircaseSample {
                    tau: tau[i],
                    rho: rho[i],
                    half_width: hw[i],
                })
                .collect();
            Ok(RenderInput::Staircase {
                samples,
                plateaus: Vec::new(),
            })
        }
        _ => Ok(RenderInput::Tongue {
            alpha: t.column("alpha")?,
            tau_minus: t.column("tau_minus")?,
            tau_plus: t.column("tau_plus")?,
        }),
    }
}

struct Svg {
    out: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="1000" height="1000" viewBox="0 0 1000 1000">"#
        );
        let _ = writeln!(out, "<title>{title}</title>");
        let _ = writeln!(out, r#"<rect x="0" y="0" width="1000" height="1000" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<defs><clipPath id="dom"><rect x="{PAD}" y="{PAD}" width="{SIDE}" height="{SIDE}"/></clipPath></defs>"#
        );
        Svg { out }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }

    fn polyline(&mut self, pts: &[[f64; 2]], stroke: &str, width: f64, clip: bool) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "" } else { " " }, p[0], p[1]);
        }
        let c = if clip { r#" clip-path="url(#dom)""# } else { "" };
        let _ = writeln!(
            self.out,
            r#"<polyline points="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"{c}/>"#
        );
    }

    fn dot(&mut self, p: [f64; 2], r: f64, fill: &str) {
        let _ = writeln!(self.out, r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}"/>"#, p[0], p[1]);
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="16" text-anchor="{anchor}">{s}</text>"#
        );
    }

    /// Frame with tick labels; `xr` and `yr` are the data ranges of the axes.
    fn axes(&mut self, xr: [f64; 2], yr: [f64; 2], xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            self.out,
            r#"<rect x="{PAD}" y="{PAD}" width="{SIDE}" height="{SIDE}" fill="none" stroke="black" stroke-width="1.5"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let px = PAD + SIDE * f;
            let py = CANVAS - PAD - SIDE * f;
            self.polyline(&[[px, CANVAS - PAD], [px, CANVAS - PAD + 6.0]], "black", 1.0, false);
            self.polyline(&[[PAD - 6.0, py], [PAD, py]], "black", 1.0, false);
            self.text(px, CANVAS - PAD + 22.0, "middle", &tick(xr[0] + f * (xr[1] - xr[0])));
            // rotated so wide labels fit in the margin
            let _ = writeln!(
                self.out,
                r#"<text x="{:.2}" y="{py:.2}" font-family="sans-serif" font-size="16" text-anchor="middle" transform="rotate(-90 {:.2} {py:.2})">{}</text>"#,
                PAD - 12.0,
                PAD - 12.0,
                tick(yr[0] + f * (yr[1] - yr[0]))
            );
        }
        self.text(CANVAS / 2.0, CANVAS - 8.0, "middle", xlabel);
        self.text(PAD, PAD - 14.0, "start", ylabel);
    }

    /// Shade the `-` cells of a bottom-first raster, one rectangle per run.
    fn raster(&mut self, rows: &[String]) {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            let cells: Vec<bool> = row.chars().map(|c| c == '-').collect();
            let m = cells.len();
            let (h, w) = (SIDE / n as f64, SIDE / m.max(1) as f64);
            let mut c = 0;
            while c < m {
                if !cells[c] {
                    c += 1;
                    continue;
                }
                let c0 = c;
                while c < m && cells[c] {
                    c += 1;
                }
                let _ = writeln!(
                    self.out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{SHADE}"/>"#,
                    PAD + w * c0 as f64,
                    CANVAS - PAD - h * (r + 1) as f64,
                    w * (c - c0) as f64,
                    h
                );
            }
        }
    }

    /// A polyline given in lifted torus coordinates, drawn with each integer
    /// translate that meets the fundamental domain.
    fn torus_polyline(&mut self, pts: &[[f64; 2]], stroke: &str, width: f64) {
        if pts.is_empty() {
            return;
        }
        let (mut t0, mut t1, mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in pts {
            t0 = t0.min(p[0]);
            t1 = t1.max(p[0]);
            x0 = x0.min(p[1]);
            x1 = x1.max(p[1]);
        }
        for i in (-(t1.floor() as i64))..=(-(t0.floor() as i64)) {
            for j in (-(x1.floor() as i64))..=(-(x0.floor() as i64)) {
                let moved: Vec<[f64; 2]> = pts.iter().map(|p| torus_px([p[0] + i as f64, p[1] + j as f64])).collect();
                self.polyline(&moved, stroke, width, true);
            }
        }
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn torus_px(p: [f64; 2]) -> [f64; 2] {
    [PAD + SIDE * p[0], CANVAS - PAD - SIDE * p[1]]
}

fn reduce(p: [f64; 2]) -> [f64; 2] {
    [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)]
}

/// One lifted strand per base turn of a closed curve, `theta` shifted into `[0,1]`.
fn curve_strands(c: &ClosedCurve) -> Vec<Vec<[f64; 2]>> {
    let t0 = c.theta0().floor();
    let (k, m) = (c.k.max(1), c.m as f64);
    let span = c.knots[c.knots.len() - 1][0] - c.theta0();
    // lifted knots over [t0, t0 + k], in order
    let mut lifted: Vec<[f64; 2]> = Vec::with_capacity(2 * c.knots.len());
    for n in -1..=1 + (span / k as f64).ceil() as i64 {
        for p in &c.knots {
            let t = p[0] + (n * k) as f64;
            if t >= t0 && t <= t0 + k as f64 {
                lifted.push([t, p[1] + n as f64 * m]);
            }
        }
    }
    (0..k)
        .map(|j| {
            let (lo, hi) = (t0 + j as f64, t0 + j as f64 + 1.0);
            let mut pts = vec![[0.0, c.eval(lo)]];
            pts.extend(lifted.iter().filter(|p| p[0] >= lo && p[0] <= hi).map(|p| [p[0] - lo, p[1]]));
            pts.push([1.0, c.eval(hi)]);
            thin(pts)
        })
        .collect()
}

/// Drop points within a quarter pixel of the last kept one.
fn thin(pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let tol = 0.25 / SIDE;
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    let n = pts.len();
    for (i, p) in pts.into_iter().enumerate() {
        match out.last() {
            Some(q) if i + 1 < n && (p[0] - q[0]).abs() < tol && (p[1] - q[1]).abs() < tol => {}
            _ => out.push(p),
        }
    }
    out
}

fn range(vals: impl Iterator<Item = f64>) -> [f64; 2] {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return [0.0, 1.0];
    }
    if hi - lo < 1e-12 {
        return [lo - 0.5, hi + 0.5];
    }
    let pad = 0.05 * (hi - lo);
    [lo - pad, hi + pad]
}

pub fn render_svg(input: &RenderInput) -> String {
    match input {
        RenderInput::Staircase { samples, plateaus } => {
            let mut svg = Svg::new("staircase");
            let xr = range(samples.iter().map(|s| s.tau));
            let yr = range(samples.iter().map(|s| s.rho));
            let px = |t: f64, r: f64| {
                [
                    PAD + SIDE * (t - xr[0]) / (xr[1] - xr[0]),
                    CANVAS - PAD - SIDE * (r - yr[0]) / (yr[1] - yr[0]),
                ]
            };
            svg.axes(xr, yr, "tau", "rho");
            let pts: Vec<[f64; 2]> = samples.iter().map(|s| px(s.tau, s.rho)).collect();
            svg.polyline(&pts, ZERO, 1.5, true);
            for p in plateaus {
                svg.polyline(&[px(p.tau_lo, p.level), px(p.tau_hi, p.level)], PLUS, 4.0, true);
            }
            svg.finish()
        }
        RenderInput::Tongue {
            alpha,
            tau_minus,
            tau_plus,
        } => {
            let mut svg = Svg::new("tongue");
            let xr = range(alpha.iter().copied());
            let yr = range(tau_minus.iter().chain(tau_plus.iter()).copied());
            let px = |a: f64, t: f64| {
                [
                    PAD + SIDE * (a - xr[0]) / (xr[1] - xr[0]),
                    CANVAS - PAD - SIDE * (t - yr[0]) / (yr[1] - yr[0]),
                ]
            };
            svg.axes(xr, yr, "alpha", "tau");
            let mut poly: Vec<[f64; 2]> = alpha.iter().zip(tau_plus).map(|(&a, &t)| px(a, t)).collect();
            poly.extend(alpha.iter().zip(tau_minus).rev().map(|(&a, &t)| px(a, t)));
            let mut d = String::new();
            for (i, p) in poly.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "" } else { " " }, p[0], p[1]);
            }
            let _ = writeln!(svg.out, r#"<polygon points="{d}" fill="{SHADE}" stroke="none"/>"#);
            let lo: Vec<[f64; 2]> = alpha.iter().zip(tau_minus).map(|(&a, &t)| px(a, t)).collect();
            let hi: Vec<[f64; 2]> = alpha.iter().zip(tau_plus).map(|(&a, &t)| px(a, t)).collect();
            svg.polyline(&lo, MINUS, 2.0, true);
            svg.polyline(&hi, PLUS, 2.0, true);
            svg.finish()
        }
        RenderInput::ZeroSet(z) => {
            let mut svg = Svg::new("zeroset");
            svg.raster(&z.raster);
            svg.axes([0.0, 1.0], [0.0, 1.0], "theta", "x");
            for s in &z.segments {
                let base = reduce(s.p0);
                let d = [base[0] - s.p0[0], base[1] - s.p0[1]];
                svg.torus_polyline(&[base, [s.p1[0] + d[0], s.p1[1] + d[1]]], ZERO, 1.5);
            }
            for v in &z.vertices {
                match v.class {
                    VertexClass::LeftCritical => svg.dot(torus_px(v.p), 4.0, MINUS),
                    VertexClass::RightCritical => svg.dot(torus_px(v.p), 4.0, PLUS),
                    VertexClass::Regular => {}
                }
            }
            svg.finish()
        }
        RenderInput::Curves(c) => {
            let mut svg = Svg::new("curves");
            svg.raster(&c.raster);
            svg.axes([0.0, 1.0], [0.0, 1.0], "theta", "x");
            for s in curve_strands(&c.pair.gamma_minus) {
                svg.torus_polyline(&s, MINUS, 2.0);
            }
            for s in curve_strands(&c.pair.gamma_plus) {
                svg.torus_polyline(&s, PLUS, 2.0);
            }
            for &p in &c.critical {
                svg.dot(torus_px(reduce(p)), 3.0, ZERO);
            }
            for t in &c.pair.targets {
                svg.dot(torus_px(reduce([t.theta, t.x])), 5.0, "#e67e22");
            }
            svg.finish()
        }
        RenderInput::Certificate(cert) => {
            let mut svg = Svg::new("certificate");
            svg.axes([0.0, 1.0], [0.0, 1.0], "theta", "x");
            for s in curve_strands(&cert.gamma_minus) {
                svg.torus_polyline(&s, MINUS, 2.0);
            }
            for s in curve_strands(&cert.gamma_plus) {
                svg.torus_polyline(&s, PLUS, 2.0);
            }
            svg.finish()
        }
    }
}
