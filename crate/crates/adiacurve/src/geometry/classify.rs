//! Curve classification: regular / closed / simple.

use serde::Serialize;

use crate::batch;

use super::{circ_diff, GeometrySample};

/// The three headline flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurveFlags {
    pub regular: bool,
    pub closed: bool,
    pub simple: bool,
}

/// Flags plus the measurements they were derived from.
#[derive(Debug, Clone, Serialize)]
pub struct CurveClassification {
    pub regular: bool,
    pub closed: bool,
    pub simple: bool,
    pub min_rho: f64,
    /// Endpoint position gap relative to the curve diameter.
    pub closure_gap_rel: f64,
    /// Endpoint tangent misalignment, radians mod 2π.
    pub tangent_gap: f64,
    pub diameter: f64,
    /// Non-adjacent polyline segment crossings found.
    pub self_intersections: usize,
}

impl CurveClassification {
    pub fn flags(&self) -> CurveFlags {
        CurveFlags {
            regular: self.regular,
            closed: self.closed,
            simple: self.simple,
        }
    }
}

/// Relative endpoint-gap threshold for closure.
const CLOSE_TOL: f64 = 1e-6;
/// Endpoint tangent alignment threshold, radians.
const TANGENT_TOL: f64 = 1e-6;
/// Crossings this many local sample spacings apart along the curve are
/// adjacency artifacts, not intersections.
const ARC_SEP_FACTOR: f64 = 10.0;

/// Classify an already-built sample table (shared by `build_curve`).
pub(crate) fn classify_samples(samples: &[GeometrySample], floor: f64) -> CurveClassification {
    let min_rho = samples.iter().map(|g| g.rho).fold(f64::INFINITY, f64::min);
    let regular = min_rho > floor;

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in samples {
        x_min = x_min.min(g.x);
        x_max = x_max.max(g.x);
        y_min = y_min.min(g.y);
        y_max = y_max.max(g.y);
    }
    let diameter = (x_max - x_min).hypot(y_max - y_min);

    let a = &samples[0];
    let b = samples.last().unwrap();
    let gap = (b.x - a.x).hypot(b.y - a.y);
    let closure_gap_rel = if diameter > 0.0 { gap / diameter } else { 0.0 };
    let tangent_gap = circ_diff(a.theta, b.theta).abs();
    let closed = diameter > 0.0 && closure_gap_rel < CLOSE_TOL && tangent_gap < TANGENT_TOL;

    let self_intersections = count_self_intersections(samples, closed);
    CurveClassification {
        regular,
        closed,
        simple: self_intersections == 0,
        min_rho,
        closure_gap_rel,
        tangent_gap,
        diameter,
        self_intersections,
    }
}

/// Re-derive the flags of a path (post-hoc classification entry point).
pub fn classify_curve(path: &super::PlaneCurvePath, floor: f64) -> CurveClassification {
    classify_samples(path.samples(), floor)
}

fn count_self_intersections(samples: &[GeometrySample], closed: bool) -> usize {
    let n_seg = samples.len() - 1;
    let total_s = samples[n_seg].s - samples[0].s;
    let seg: Vec<Seg> = (0..n_seg)
        .map(|i| Seg {
            ax: samples[i].x,
            ay: samples[i].y,
            bx: samples[i + 1].x,
            by: samples[i + 1].y,
            s0: samples[i].s,
            s1: samples[i + 1].s,
        })
        .collect();
    let idx: Vec<usize> = (0..n_seg).collect();
    let hits = batch::map(&idx, |&i| {
        let si = &seg[i];
        let mut count = 0usize;
        for sj in seg.iter().skip(i + 1) {
            // along-curve separation between the end of i and start of j
            let mut sep = sj.s0 - si.s1;
            if closed {
                sep = sep.min(total_s - (sj.s1 - si.s0));
            }
            let local = (si.s1 - si.s0).max(sj.s1 - sj.s0);
            if sep < ARC_SEP_FACTOR * local {
                continue;
            }
            // bounding-box prefilter
            if si.ax.max(si.bx) < sj.ax.min(sj.bx)
                || sj.ax.max(sj.bx) < si.ax.min(si.bx)
                || si.ay.max(si.by) < sj.ay.min(sj.by)
                || sj.ay.max(sj.by) < si.ay.min(si.by)
            {
                continue;
            }
            if segments_intersect(si, sj) {
                count += 1;
            }
        }
        count
    });
    hits.iter().sum()
}

struct Seg {
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    s0: f64,
    s1: f64,
}

fn orient(ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64) -> f64 {
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

fn on_segment(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> bool {
    px >= ax.min(bx) && px <= ax.max(bx) && py >= ay.min(by) && py <= ay.max(by)
}

fn segments_intersect(p: &Seg, q: &Seg) -> bool {
    let d1 = orient(p.ax, p.ay, p.bx, p.by, q.ax, q.ay);
    let d2 = orient(p.ax, p.ay, p.bx, p.by, q.bx, q.by);
    let d3 = orient(q.ax, q.ay, q.bx, q.by, p.ax, p.ay);
    let d4 = orient(q.ax, q.ay, q.bx, q.by, p.bx, p.by);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p.ax, p.ay, p.bx, p.by, q.ax, q.ay))
        || (d2 == 0.0 && on_segment(p.ax, p.ay, p.bx, p.by, q.bx, q.by))
        || (d3 == 0.0 && on_segment(q.ax, q.ay, q.bx, q.by, p.ax, p.ay))
        || (d4 == 0.0 && on_segment(q.ax, q.ay, q.bx, q.by, p.bx, p.by))
}
