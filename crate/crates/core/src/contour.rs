//! Equal-bias isobols and index boundary curves, emitted as CSV polylines
//! or standalone SVG.
//!
//! The surface plane samples the calibrated bias over a uniform grid in the
//! log-odds sensitivity parameters (gamma1, beta1) and traces level curves
//! by linear-interpolation cell crossings. The index planes are analytic:
//! `ED * RD = T` hyperbolas and their ratio-scale counterparts, sampled
//! directly.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fmt;
use crate::fmt::json_string;
use crate::index::{BiasBudget, Scale};
use crate::summary::{ObservedSummary, OutcomeKind};
use crate::surface::{calibrate, SurfaceParams};

/// Which 2-D sensitivity-parameter plane a set of curves lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// Log-odds missingness shift (x) versus log-odds outcome shift (y).
    Gamma1Beta1,
    /// Mean difference |ED_YU| (x) versus participation difference |RD_UG| (y).
    EdRd,
    /// Mean ratio ER_YU (x) versus participation ratio RR_UG (y).
    ErRr,
}

impl Plane {
    pub fn as_str(self) -> &'static str {
        match self {
            Plane::Gamma1Beta1 => "gamma1_beta1",
            Plane::EdRd => "ed_rd",
            Plane::ErRr => "er_rr",
        }
    }
}

/// Curves for one level: zero or more polylines, an optional index
/// annotation, and a note when the level produced nothing drawable.
#[derive(Debug, Clone)]
pub struct LevelCurves {
    pub level: f64,
    pub polylines: Vec<Vec<(f64, f64)>>,
    pub minni_point: Option<(f64, f64)>,
    pub note: Option<String>,
}

/// Level-labeled polylines in one sensitivity-parameter plane.
#[derive(Debug, Clone)]
pub struct IsobolSet {
    pub plane: Plane,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub levels: Vec<LevelCurves>,
    /// Grid step of the tracer, zero for analytic curves; consumers can use
    /// it to scale point-tolerance assertions.
    pub grid_step: (f64, f64),
}

/// Default sampling resolution of the bias field.
pub const DEFAULT_GRID: usize = 256;
/// Default number of samples along an analytic boundary curve.
pub const DEFAULT_CURVE_SAMPLES: usize = 512;

/// Trace equal-bias contours of the calibrated surface in (gamma1, beta1)
/// with pi0 fixed, on a `grid x grid` sampling lattice.
pub fn isobol_surface(
    summary: &ObservedSummary,
    pi0: f64,
    gamma1_range: (f64, f64),
    beta1_range: (f64, f64),
    levels: &[f64],
    grid: usize,
) -> Result<IsobolSet> {
    if grid < 8 {
        return Err(Error::BadArgument {
            name: "grid",
            value: grid as f64,
            reason: "field sampling needs at least an 8x8 lattice",
        });
    }
    for (name, (lo, hi)) in [("gamma1_range", gamma1_range), ("beta1_range", beta1_range)] {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::BadArgument {
                name,
                value: hi,
                reason: "range must be finite with hi > lo",
            });
        }
    }

    let xs: Vec<f64> = (0..=grid)
        .map(|i| gamma1_range.0 + (gamma1_range.1 - gamma1_range.0) * i as f64 / grid as f64)
        .collect();
    let ys: Vec<f64> = (0..=grid)
        .map(|j| beta1_range.0 + (beta1_range.1 - beta1_range.0) * j as f64 / grid as f64)
        .collect();

    let mut field = Vec::with_capacity(ys.len());
    for &beta1 in &ys {
        let mut row = Vec::with_capacity(xs.len());
        for &gamma1 in &xs {
            let sol = calibrate(summary, &SurfaceParams::new(pi0, gamma1, beta1))?;
            row.push(sol.bias);
        }
        field.push(row);
    }

    let levels_out = levels
        .iter()
        .map(|&level| {
            let polylines = trace_level(&xs, &ys, &field, level);
            let note = polylines
                .is_empty()
                .then(|| "level not attained on this domain".to_string());
            LevelCurves {
                level,
                polylines,
                minni_point: None,
                note,
            }
        })
        .collect();

    Ok(IsobolSet {
        plane: Plane::Gamma1Beta1,
        x_range: gamma1_range,
        y_range: beta1_range,
        levels: levels_out,
        grid_step: (
            (gamma1_range.1 - gamma1_range.0) / grid as f64,
            (beta1_range.1 - beta1_range.0) / grid as f64,
        ),
    })
}

/// Analytic index boundary curves, one per `k_se` level (bias budgets in
/// standard-error units), each annotated with its closest-point index.
pub fn minni_curves(
    summary: &ObservedSummary,
    scale: Scale,
    k_se_levels: &[f64],
    samples: usize,
    max_coord: Option<f64>,
) -> Result<IsobolSet> {
    if summary.frac_missing <= 0.0 || summary.frac_missing >= 1.0 {
        return Err(Error::BadProbability {
            name: "frac_missing",
            value: summary.frac_missing,
            range: "(0, 1)",
        });
    }
    if samples < 2 {
        return Err(Error::BadArgument {
            name: "samples",
            value: samples as f64,
            reason: "need at least 2 samples per curve",
        });
    }
    let pr_g0 = summary.frac_missing;
    match scale {
        Scale::Difference => {
            let thresholds: Vec<f64> = k_se_levels
                .iter()
                .map(|&k| {
                    BiasBudget::SeUnits(k)
                        .difference_budget(summary)
                        .map(|b| b / pr_g0)
                })
                .collect::<Result<_>>()?;
            let binary = summary.outcome_kind == OutcomeKind::Binary;
            // Binary outcomes live in the unit box; a continuous outcome's
            // mean-difference axis widens to fit the largest threshold.
            let x_max = if binary {
                1.0
            } else {
                max_coord.unwrap_or_else(|| 1.25 * thresholds.iter().cloned().fold(1.0, f64::max))
            };
            let mut levels = Vec::new();
            for (&k, &t) in k_se_levels.iter().zip(&thresholds) {
                if binary && t > 1.0 {
                    levels.push(LevelCurves {
                        level: k,
                        polylines: vec![],
                        minni_point: None,
                        note: Some(format!(
                            "infeasible for a binary outcome: threshold {t:.6} exceeds 1"
                        )),
                    });
                    continue;
                }
                // ED * RD = t with RD in (0, 1] and ED capped at x_max.
                let rd_lo = (t / x_max).min(1.0);
                let mut pts = Vec::with_capacity(samples);
                for i in 0..samples {
                    let rd = rd_lo + (1.0 - rd_lo) * i as f64 / (samples - 1) as f64;
                    pts.push((t / rd, rd));
                }
                let root = t.sqrt();
                let minni_point = if binary {
                    (root, root)
                } else {
                    (t.max(root), root.min(1.0))
                };
                levels.push(LevelCurves {
                    level: k,
                    polylines: vec![pts],
                    minni_point: Some(minni_point),
                    note: None,
                });
            }
            Ok(IsobolSet {
                plane: Plane::EdRd,
                x_range: (0.0, x_max),
                y_range: (0.0, 1.0),
                levels,
                grid_step: (0.0, 0.0),
            })
        }
        Scale::Ratio => {
            let hi = max_coord.unwrap_or(4.0);
            if hi.is_nan() || hi <= 1.0 {
                return Err(Error::BadArgument {
                    name: "max_coord",
                    value: hi,
                    reason: "ratio plane needs an upper range above 1",
                });
            }
            let mut levels = Vec::new();
            for &k in k_se_levels {
                let budget = BiasBudget::SeUnits(k).ratio_budget(summary)?;
                let s = budget / pr_g0;
                let window = 1.0 - 1.0 / hi;
                if s >= 1.0 || s > window * window {
                    let reason = if s >= 1.0 {
                        "infeasible: relative budget reaches the missing fraction".to_string()
                    } else {
                        format!("curve lies outside the [1, {hi}] plotting window")
                    };
                    levels.push(LevelCurves {
                        level: k,
                        polylines: vec![],
                        minni_point: None,
                        note: Some(reason),
                    });
                    continue;
                }
                // Boundary (1-1/ER)(1-1/RR) = s, swept so both coordinates
                // stay within [1, hi].
                let v_lo = s / window;
                let v_hi = window;
                let mut pts = Vec::with_capacity(samples);
                for i in 0..samples {
                    let v = v_lo + (v_hi - v_lo) * i as f64 / (samples - 1) as f64;
                    let rr = 1.0 / (1.0 - v);
                    let er = 1.0 / (1.0 - s / v);
                    pts.push((er, rr));
                }
                let point = 1.0 / (1.0 - s.sqrt());
                levels.push(LevelCurves {
                    level: k,
                    polylines: vec![pts],
                    minni_point: Some((point, point)),
                    note: None,
                });
            }
            Ok(IsobolSet {
                plane: Plane::ErRr,
                x_range: (1.0, hi),
                y_range: (1.0, hi),
                levels,
                grid_step: (0.0, 0.0),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Level tracing (marching squares with linear interpolation)
// ---------------------------------------------------------------------------

type Point = (f64, f64);

fn interp(level: f64, pa: Point, va: f64, pb: Point, vb: f64) -> Point {
    let t = (level - va) / (vb - va);
    (pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1))
}

/// Extract the `level` contour of `field[j][i]` sampled at (`xs[i]`, `ys[j]`)
/// as stitched polylines.
fn trace_level(xs: &[f64], ys: &[f64], field: &[Vec<f64>], level: f64) -> Vec<Vec<Point>> {
    let mut segments: Vec<(Point, Point)> = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            let v00 = field[j][i];
            let v10 = field[j][i + 1];
            let v01 = field[j + 1][i];
            let v11 = field[j + 1][i + 1];
            let p00 = (xs[i], ys[j]);
            let p10 = (xs[i + 1], ys[j]);
            let p01 = (xs[i], ys[j + 1]);
            let p11 = (xs[i + 1], ys[j + 1]);

            let mut case = 0u8;
            if v00 > level {
                case |= 1;
            }
            if v10 > level {
                case |= 2;
            }
            if v11 > level {
                case |= 4;
            }
            if v01 > level {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }

            let bottom = || interp(level, p00, v00, p10, v10);
            let top = || interp(level, p01, v01, p11, v11);
            let left = || interp(level, p00, v00, p01, v01);
            let right = || interp(level, p10, v10, p11, v11);

            match case {
                1 | 14 => segments.push((left(), bottom())),
                2 | 13 => segments.push((bottom(), right())),
                3 | 12 => segments.push((left(), right())),
                4 | 11 => segments.push((right(), top())),
                6 | 9 => segments.push((bottom(), top())),
                7 | 8 => segments.push((top(), left())),
                5 | 10 => {
                    // Saddle: split by the cell-center sample.
                    let center = 0.25 * (v00 + v10 + v01 + v11);
                    let center_high = center > level;
                    if (case == 5) == center_high {
                        segments.push((left(), bottom()));
                        segments.push((right(), top()));
                    } else {
                        segments.push((left(), top()));
                        segments.push((right(), bottom()));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    stitch(segments)
}

fn key(p: Point) -> (u64, u64) {
    (p.0.to_bits(), p.1.to_bits())
}

/// Join segments that share endpoints into ordered polylines. Crossing
/// points on a shared cell edge are computed from the same two samples, so
/// endpoint matching is exact.
fn stitch(segments: Vec<(Point, Point)>) -> Vec<Vec<Point>> {
    let mut by_endpoint: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (idx, (a, b)) in segments.iter().enumerate() {
        by_endpoint.entry(key(*a)).or_default().push(idx);
        by_endpoint.entry(key(*b)).or_default().push(idx);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();

    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = vec![a, b];

        // Grow forward from the tail, then backward from the head.
        for forward in [true, false] {
            loop {
                let tip = if forward {
                    *chain.last().unwrap()
                } else {
                    chain[0]
                };
                let Some(candidates) = by_endpoint.get(&key(tip)) else {
                    break;
                };
                let next = candidates.iter().find(|&&i| !used[i]).copied();
                let Some(i) = next else { break };
                used[i] = true;
                let (sa, sb) = segments[i];
                let other = if key(sa) == key(tip) { sb } else { sa };
                if forward {
                    chain.push(other);
                } else {
                    chain.insert(0, other);
                }
            }
        }
        polylines.push(chain);
    }
    polylines
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

/// Serialize to the requested format token (`csv` or `svg`).
pub fn emit(set: &IsobolSet, format: &str) -> Result<String> {
    match format {
        "csv" => Ok(to_csv(set)),
        "svg" => Ok(to_svg(set)),
        other => Err(Error::UnsupportedFormat(other.to_string())),
    }
}

/// CSV rows `plane,level,point_index,x,y`; `point_index` restarts at 0 on
/// every polyline, which is enough to recover the polyline structure.
pub fn to_csv(set: &IsobolSet) -> String {
    let mut out = String::from("plane,level,point_index,x,y\n");
    for lc in &set.levels {
        for poly in &lc.polylines {
            for (i, (x, y)) in poly.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    set.plane.as_str(),
                    fmt::sig(lc.level, 10),
                    i,
                    fmt::sig(*x, 10),
                    fmt::sig(*y, 10),
                ));
            }
        }
    }
    out
}

/// Parse the point set back out of [`to_csv`] output: per level, the list of
/// polylines in emission order.
pub fn parse_csv(text: &str) -> Result<Vec<(f64, Vec<Vec<Point>>)>> {
    let mut out: Vec<(f64, Vec<Vec<Point>>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                what: "isobol CSV",
                detail: format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 1,
                    fields.len()
                ),
            });
        }
        let bad = |what: &'static str| Error::Parse {
            what,
            detail: format!("line {}", lineno + 1),
        };
        let level: f64 = fields[1].parse().map_err(|_| bad("isobol CSV level"))?;
        let idx: usize = fields[2]
            .parse()
            .map_err(|_| bad("isobol CSV point index"))?;
        let x: f64 = fields[3].parse().map_err(|_| bad("isobol CSV x"))?;
        let y: f64 = fields[4].parse().map_err(|_| bad("isobol CSV y"))?;
        if out.last().map(|(l, _)| *l != level).unwrap_or(true) {
            out.push((level, Vec::new()));
        }
        let polys = &mut out.last_mut().unwrap().1;
        if idx == 0 {
            polys.push(Vec::new());
        }
        polys
            .last_mut()
            .ok_or_else(|| bad("isobol CSV point index"))?
            .push((x, y));
    }
    Ok(out)
}

pub fn to_json(set: &IsobolSet) -> String {
    let levels: Vec<String> = set
        .levels
        .iter()
        .map(|lc| {
            let polys: Vec<String> = lc
                .polylines
                .iter()
                .map(|poly| {
                    let pts: Vec<String> = poly
                        .iter()
                        .map(|(x, y)| format!("[{},{}]", fmt::sig(*x, 10), fmt::sig(*y, 10)))
                        .collect();
                    format!("[{}]", pts.join(","))
                })
                .collect();
            let minni = match lc.minni_point {
                Some((a, b)) => format!("[{},{}]", fmt::sig(a, 10), fmt::sig(b, 10)),
                None => "null".into(),
            };
            let note = lc.note.as_deref().map_or("null".into(), json_string);
            format!(
                "{{\"level\":{},\"polylines\":[{}],\"minni\":{},\"note\":{}}}",
                fmt::sig(lc.level, 10),
                polys.join(","),
                minni,
                note
            )
        })
        .collect();
    format!(
        "{{\"plane\":\"{}\",\"x_range\":[{},{}],\"y_range\":[{},{}],\"levels\":[{}]}}",
        set.plane.as_str(),
        fmt::sig(set.x_range.0, 10),
        fmt::sig(set.x_range.1, 10),
        fmt::sig(set.y_range.0, 10),
        fmt::sig(set.y_range.1, 10),
        levels.join(",")
    )
}

const SVG_SIZE: f64 = 640.0;
const SVG_MARGIN: f64 = 60.0;

struct Viewport {
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Viewport {
    fn map(&self, p: Point) -> (f64, f64) {
        let w = SVG_SIZE - 2.0 * SVG_MARGIN;
        let sx = SVG_MARGIN + (p.0 - self.x_range.0) / (self.x_range.1 - self.x_range.0) * w;
        // SVG y grows downward.
        let sy =
            SVG_SIZE - SVG_MARGIN - (p.1 - self.y_range.0) / (self.y_range.1 - self.y_range.0) * w;
        (sx, sy)
    }
}

fn axis_titles(plane: Plane) -> (&'static str, &'static str) {
    match plane {
        Plane::Gamma1Beta1 => (
            "gamma1 (log odds of observation)",
            "beta1 (log odds of outcome)",
        ),
        Plane::EdRd => ("|ED_YU|", "|RD_UG|"),
        Plane::ErRr => ("ER_YU", "RR_UG"),
    }
}

/// Standalone SVG 1.1 document: one path per polyline, axis/border lines,
/// level labels, and index-point markers. Byte output is deterministic for
/// a fixed input.
pub fn to_svg(set: &IsobolSet) -> String {
    let vp = Viewport {
        x_range: set.x_range,
        y_range: set.y_range,
    };
    let mut body = String::new();

    // Plot border.
    let (x0, y0) = vp.map((set.x_range.0, set.y_range.0));
    let (x1, y1) = vp.map((set.x_range.1, set.y_range.1));
    body.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#999\"/>\n",
        x0.min(x1),
        y1.min(y0),
        (x1 - x0).abs(),
        (y0 - y1).abs()
    ));

    // Zero axes when they cross the window.
    if set.x_range.0 < 0.0 && set.x_range.1 > 0.0 {
        let (zx, _) = vp.map((0.0, set.y_range.0));
        body.push_str(&format!(
            "<line x1=\"{zx:.2}\" y1=\"{y1:.2}\" x2=\"{zx:.2}\" y2=\"{y0:.2}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n"
        ));
    }
    if set.y_range.0 < 0.0 && set.y_range.1 > 0.0 {
        let (_, zy) = vp.map((set.x_range.0, 0.0));
        body.push_str(&format!(
            "<line x1=\"{x0:.2}\" y1=\"{zy:.2}\" x2=\"{x1:.2}\" y2=\"{zy:.2}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n"
        ));
    }

    // Axis range labels and titles.
    let (xt, yt) = axis_titles(set.plane);
    body.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"start\">{}</text>\n",
        x0,
        SVG_SIZE - SVG_MARGIN + 16.0,
        trim_label(set.x_range.0)
    ));
    body.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        x1,
        SVG_SIZE - SVG_MARGIN + 16.0,
        trim_label(set.x_range.1)
    ));
    body.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        SVG_MARGIN - 6.0,
        y0,
        trim_label(set.y_range.0)
    ));
    body.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        SVG_MARGIN - 6.0,
        y1 + 4.0,
        trim_label(set.y_range.1)
    ));
    body.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{xt}</text>\n",
        SVG_SIZE / 2.0,
        SVG_SIZE - 18.0
    ));
    body.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{yt}</text>\n",
        SVG_SIZE / 2.0,
        SVG_SIZE / 2.0
    ));

    for lc in &set.levels {
        for poly in &lc.polylines {
            if poly.is_empty() {
                continue;
            }
            let mut d = String::new();
            for (i, &p) in poly.iter().enumerate() {
                let (sx, sy) = vp.map(p);
                d.push_str(&format!(
                    "{}{sx:.2} {sy:.2}",
                    if i == 0 { "M" } else { " L" }
                ));
            }
            body.push_str(&format!(
                "<path d=\"{d}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n"
            ));
        }
        // Level label at the midpoint of the first polyline.
        if let Some(poly) = lc.polylines.first() {
            if !poly.is_empty() {
                let (sx, sy) = vp.map(poly[poly.len() / 2]);
                body.push_str(&format!(
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" fill=\"#333\">{}</text>\n",
                    sx + 3.0,
                    sy - 3.0,
                    trim_label(lc.level)
                ));
            }
        }
        if let Some((a, b)) = lc.minni_point {
            let (sx, sy) = vp.map((a, b));
            body.push_str(&format!(
                "<circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"3\" fill=\"#c33\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" fill=\"#c33\">({:.2}, {:.2})</text>\n",
                sx + 5.0,
                sy + 10.0,
                a,
                b
            ));
        }
    }

    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n<rect width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n{body}</svg>\n",
        s = SVG_SIZE,
        body = body
    )
}

fn trim_label(v: f64) -> String {
    fmt::sig(v, 4)
}
