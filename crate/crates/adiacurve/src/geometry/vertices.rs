//! Curvature extrema (vertices) and the four-vertex bookkeeping.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::DrivingProtocol;
use crate::quad;

use super::{curvature, integrate_field, CurveFlags, PlaneCurvePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Vertex {
    pub t: f64,
    pub s: f64,
    pub kappa: f64,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexReport {
    pub vertices: Vec<Vertex>,
    pub flags: CurveFlags,
    /// Simple, closed, regular, and non-constant curvature: the
    /// four-vertex theorem has something to say.
    pub fvt_applicable: bool,
    /// Vertex count ≥ 4 whenever applicable (vacuously true otherwise).
    pub fvt_satisfied: bool,
    /// Stretches where |dκ/ds| stayed below the degeneracy threshold
    /// (constant-curvature arcs; their extrema are not counted).
    pub degenerate_spans: Vec<(f64, f64)>,
}

/// |dκ/ds| below this is a constant-curvature stretch.
const DEGENERATE_DKDS: f64 = 1e-10;
/// Consecutive degenerate grid points needed before a run counts as a
/// span rather than an extremum sitting on a grid point.
const SPAN_MIN_RUN: usize = 3;
const BISECT_MAX_ITERS: u32 = 60;
const BISECT_WIDTH: f64 = 1e-8;

/// Locate the curvature extrema of a built path.
///
/// Sign changes of dκ/ds (curvature from the analytic field derivatives,
/// one finite-difference level for κ′) are bracketed on the sample grid
/// and refined by bisection. Closed curves are treated circularly, so an
/// extremum on the seam is found once.
pub fn find_vertices(p: &DrivingProtocol, path: &PlaneCurvePath) -> Result<VertexReport> {
    let flags = path.flags();
    if !flags.regular {
        let g = path
            .samples()
            .iter()
            .min_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap())
            .unwrap();
        return Err(Error::Regularity {
            t: g.t,
            rho: g.rho,
            floor: p.regularity_floor(),
        });
    }
    let (t_i, t_f) = p.window();
    let period = t_f - t_i;
    let closed = flags.closed;

    // evaluation that respects the window: wrap when closed, clamp else
    let kappa_at = |u: f64| -> Result<f64> {
        let t = if closed {
            let r = (u - t_i).rem_euclid(period);
            t_i + r
        } else {
            u.clamp(t_i, t_f)
        };
        curvature(p, t)
    };
    let dkappa = |u: f64| -> Result<f64> {
        let h = 1e-4 * u.abs().max(1.0);
        Ok((kappa_at(u + h)? - kappa_at(u - h)?) / (2.0 * h))
    };

    let samples = path.samples();
    // unique circular points: drop the duplicated endpoint when closed
    let n_pts = if closed {
        samples.len() - 1
    } else {
        samples.len()
    };
    let mut g = Vec::with_capacity(n_pts);
    for smp in &samples[..n_pts] {
        g.push(dkappa(smp.t)? / smp.rho);
    }

    let degenerate: Vec<bool> = g.iter().map(|v| v.abs() < DEGENERATE_DKDS).collect();

    // degenerate spans: runs of SPAN_MIN_RUN or more
    let mut degenerate_spans = Vec::new();
    let mut in_span = false;
    let mut run = 0usize;
    let mut span_start = 0usize;
    for k in 0..n_pts {
        if degenerate[k] {
            if run == 0 {
                span_start = k;
            }
            run += 1;
            in_span = run >= SPAN_MIN_RUN;
        } else {
            if in_span {
                degenerate_spans.push((samples[span_start].t, samples[k - 1].t));
            }
            run = 0;
            in_span = false;
        }
    }
    if in_span {
        degenerate_spans.push((samples[span_start].t, samples[n_pts - 1].t));
    }
    let constant_kappa = degenerate.iter().all(|d| *d);

    // Brackets run between consecutive non-degenerate points with
    // opposite signs. An extremum sitting exactly on a grid point shows
    // up as a short degenerate run (the symmetric difference vanishes
    // there), which the bracket simply spans; only runs of SPAN_MIN_RUN
    // or more are constant-curvature stretches and break the scan.
    let solid: Vec<usize> = (0..n_pts).filter(|k| !degenerate[*k]).collect();
    let mut vertices: Vec<Vertex> = Vec::new();
    if !constant_kappa && solid.len() >= 2 {
        let n_links = if closed {
            solid.len()
        } else {
            solid.len() - 1
        };
        for i in 0..n_links {
            let ka = solid[i];
            let kb = solid[(i + 1) % solid.len()];
            let zero_gap = if kb > ka {
                kb - ka - 1
            } else {
                n_pts - ka - 1 + kb // across the seam
            };
            if zero_gap >= SPAN_MIN_RUN {
                continue; // a constant-curvature span separates them
            }
            let (ga, gb) = (g[ka], g[kb]);
            if ga > 0.0 && gb > 0.0 || ga < 0.0 && gb < 0.0 {
                continue;
            }
            let mut a = samples[ka].t;
            let mut b = if kb > ka {
                samples[kb].t
            } else {
                samples[kb].t + period // bracket extends past the seam
            };
            let mut fa = ga;
            for _ in 0..BISECT_MAX_ITERS {
                if b - a <= BISECT_WIDTH {
                    break;
                }
                let m = 0.5 * (a + b);
                let fm = dkappa(m)?;
                if fa > 0.0 && fm > 0.0 || fa < 0.0 && fm < 0.0 {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            let mut t_star = 0.5 * (a + b);
            if closed {
                t_star = t_i + (t_star - t_i).rem_euclid(period);
            }
            let kind = if ga > 0.0 {
                VertexKind::Max
            } else {
                VertexKind::Min
            };
            let kappa = kappa_at(t_star)?;
            // arc length from the bracketing sample
            let base = &samples[bracket_by_t(samples, t_star)];
            let s = base.s
                + integrate_field(p, base.t, t_star, quad::DEFAULT_TOL, |f| f.rho())?;
            vertices.push(Vertex {
                t: t_star,
                s,
                kappa,
                kind,
            });
        }
    }

    vertices.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    vertices.dedup_by(|a, b| (a.t - b.t).abs() < 1e-7);
    if closed && vertices.len() >= 2 {
        let first_t = vertices[0].t;
        let last_t = vertices.last().unwrap().t;
        if period - (last_t - first_t) < 1e-7 {
            vertices.pop();
        }
    }

    let fvt_applicable = flags.regular && flags.closed && flags.simple && !constant_kappa;
    let fvt_satisfied = !fvt_applicable || vertices.len() >= 4;
    Ok(VertexReport {
        vertices,
        flags,
        fvt_applicable,
        fvt_satisfied,
        degenerate_spans,
    })
}

fn bracket_by_t(samples: &[super::GeometrySample], t: f64) -> usize {
    let mut lo = 0usize;
    let mut hi = samples.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if samples[mid].t <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::super::{build_curve, GridSpec};
    use super::*;
    use crate::protocol::Catalog;
    use std::collections::BTreeMap;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn report(name: &str, overrides: &[(&str, f64)]) -> VertexReport {
        let map: BTreeMap<String, f64> = overrides
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let p = Catalog::build(name, &map, None).unwrap();
        let path = build_curve(&p, &GridSpec::default()).unwrap();
        find_vertices(&p, &path).unwrap()
    }

    fn circular_close(a: f64, b: f64, period: f64, tol: f64) -> bool {
        let d = (a - b).abs() % period;
        d < tol || period - d < tol
    }

    #[test]
    fn ellipse_has_exactly_four_vertices() {
        for (d0, o0) in [(0.5, 0.2), (0.5, 1.5)] {
            let r = report("ellipse", &[("Delta0", d0), ("Omega0", o0)]);
            assert_eq!(r.vertices.len(), 4, "({d0}, {o0}): {:?}", r.vertices);
            let expected = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
            for want in expected {
                assert!(
                    r.vertices
                        .iter()
                        .any(|v| circular_close(v.t, want, TAU, 1e-6)),
                    "({d0}, {o0}): no vertex near t = {want}"
                );
            }
            assert!(r.fvt_applicable);
            assert!(r.fvt_satisfied);
            // kinds alternate around the loop
            for w in r.vertices.windows(2) {
                assert_ne!(w[0].kind, w[1].kind);
            }
        }
    }

    #[test]
    fn ellipse_vertex_values_match_closed_forms() {
        let (d0, o0) = (0.5, 1.5);
        let r = report("ellipse", &[("Delta0", d0), ("Omega0", o0)]);
        for v in &r.vertices {
            let want = if circular_close(v.t, 0.0, TAU, 1e-3) || circular_close(v.t, PI, TAU, 1e-3)
            {
                o0 / (d0 * d0)
            } else {
                d0 / (o0 * o0)
            };
            assert!((v.kappa - want).abs() < 1e-8, "κ at t={}: {}", v.t, v.kappa);
        }
    }

    #[test]
    fn limacon_peak_at_pi_plus_seam_minimum() {
        let r = report("limacon", &[("a", 1.5), ("b", 1.0)]);
        let maxima: Vec<_> = r
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::Max)
            .collect();
        assert_eq!(maxima.len(), 1, "{:?}", r.vertices);
        assert!((maxima[0].t - PI).abs() < 1e-6);
        assert!((maxima[0].kappa - 8.0).abs() < 1e-6);
        // the closed loop forces the complementary minimum at the seam
        let minima: Vec<_> = r
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::Min)
            .collect();
        assert_eq!(minima.len(), 1);
        assert!(circular_close(minima[0].t, 0.0, TAU, 1e-6));
        assert!(!r.fvt_applicable, "limacon is not simple");
    }

    #[test]
    fn circle_is_all_degenerate() {
        let r = report("circle", &[("Delta0", 0.5)]);
        assert!(r.vertices.is_empty(), "{:?}", r.vertices);
        assert!(!r.fvt_applicable);
        assert!(r.fvt_satisfied);
        assert_eq!(r.degenerate_spans.len(), 1);
    }
}
