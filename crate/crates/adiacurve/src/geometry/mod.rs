//! Plane-curve machinery.
//!
//! The curve of a protocol is `α(t) = (∫Δ, ∫Ω)` accumulated from t = 0
//! (or from the left edge when the window excludes 0). Its speed is
//! `ρ = √(Δ²+Ω²)`, its turning angle the continuous branch of
//! `atan2(Ω, Δ)`, its curvature `κ = (ΔΩ̇ − Δ̇Ω)/ρ³`, and the arc length
//! `s(t) = ∫ρ` is the accumulated dynamical phase. Everything downstream
//! (vertex hunting, classification, unit-speed resampling, reconstruction)
//! consumes the sampled [`PlaneCurvePath`] built here.

mod classify;
mod profile;
mod vertices;

pub use classify::{classify_curve, CurveClassification, CurveFlags};
pub use profile::{
    frenet_propagate, reconstruct_from_curvature, rigid_align, CurvatureProfile, FrenetFrames,
    Reconstruction,
};
pub use vertices::{find_vertices, Vertex, VertexKind, VertexReport};

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::Serialize;

use crate::batch;
use crate::error::{Error, Result};
use crate::protocol::{DrivingProtocol, Fields};
use crate::quad;

/// One record of the geometry table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeometrySample {
    /// Protocol time.
    pub t: f64,
    /// Arc length / accumulated dynamical phase, zero at the anchor.
    pub s: f64,
    pub x: f64,
    pub y: f64,
    /// Speed = eigenenergy splitting half-width.
    pub rho: f64,
    /// Unwrapped turning angle.
    pub theta: f64,
    /// Signed curvature.
    pub kappa: f64,
    /// Adiabatic coupling γ = θ̇/2.
    pub gamma: f64,
    pub e_plus: f64,
    pub e_minus: f64,
}

/// Sampling request for [`build_curve`].
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    /// Base number of grid points (≥ 2); more are inserted wherever the
    /// turning angle moves faster than π/2 per step.
    pub n: usize,
    /// Absolute quadrature tolerance for the accumulated integrals.
    pub quad_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 1001,
            quad_tol: quad::DEFAULT_TOL,
        }
    }
}

impl GridSpec {
    pub fn with_points(n: usize) -> Self {
        GridSpec {
            n,
            ..Default::default()
        }
    }
}

/// A sampled curve plus its classification.
#[derive(Debug, Clone)]
pub struct PlaneCurvePath {
    samples: Vec<GeometrySample>,
    classification: CurveClassification,
}

impl PlaneCurvePath {
    pub fn samples(&self) -> &[GeometrySample] {
        &self.samples
    }

    pub fn flags(&self) -> CurveFlags {
        self.classification.flags()
    }

    pub fn classification(&self) -> &CurveClassification {
        &self.classification
    }

    pub fn first(&self) -> &GeometrySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &GeometrySample {
        self.samples.last().unwrap()
    }

    /// Total turning angle θ(t_f) − θ(t_i).
    pub fn total_turning(&self) -> f64 {
        self.last().theta - self.first().theta
    }

    /// Arc length of the sampled window.
    pub fn length(&self) -> f64 {
        self.last().s - self.first().s
    }

    /// Unwrapped turning angle, raw and shifted so that θ(t_i) = 0.
    pub fn turning_angle(&self) -> (Vec<f64>, Vec<f64>) {
        let raw: Vec<f64> = self.samples.iter().map(|g| g.theta).collect();
        let t0 = raw[0];
        let shifted = raw.iter().map(|v| v - t0).collect();
        (raw, shifted)
    }

    /// Largest |κ| over the samples: the adiabaticity margin of the run.
    pub fn max_margin(&self) -> f64 {
        self.samples
            .iter()
            .map(|g| g.kappa.abs())
            .fold(0.0, f64::max)
    }

    /// CSV with the fixed column order
    /// `t,s,x,y,rho,theta,kappa,gamma,e_plus,e_minus`, 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,s,x,y,rho,theta,kappa,gamma,e_plus,e_minus")?;
        for g in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                g.t, g.s, g.x, g.y, g.rho, g.theta, g.kappa, g.gamma, g.e_plus, g.e_minus
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Pointwise quantities

/// Signed curvature at one instant; errors below the regularity floor.
pub fn curvature(p: &DrivingProtocol, t: f64) -> Result<f64> {
    let f = p.fields(t)?;
    let floor = p.regularity_floor();
    let rho = f.rho();
    if rho < floor {
        return Err(Error::Regularity { t, rho, floor });
    }
    Ok(f.wronskian() / (rho * rho * rho))
}

/// Curve speed ρ(t) ≥ 0; defined even at level crossings.
pub fn speed(p: &DrivingProtocol, t: f64) -> Result<f64> {
    Ok(p.fields(t)?.rho())
}

/// Arc length s(t) = ∫ρ from the anchor (t = 0 where the window allows,
/// else the left edge); strictly increasing wherever ρ > 0.
pub fn arc_length(p: &DrivingProtocol, t: f64) -> Result<f64> {
    p.fields(t)?; // window check
    let anchor = anchor_time(p);
    integrate_field(p, anchor, t, quad::DEFAULT_TOL, |f| f.rho())
}

pub(crate) fn anchor_time(p: &DrivingProtocol) -> f64 {
    let (t_i, t_f) = p.window();
    if t_i <= 0.0 && 0.0 <= t_f {
        0.0
    } else {
        t_i
    }
}

/// Adaptive quadrature of one field component with protocol errors
/// surfaced instead of silently turning into NaN.
pub(crate) fn integrate_field<F>(
    p: &DrivingProtocol,
    a: f64,
    b: f64,
    tol: f64,
    pick: F,
) -> Result<f64>
where
    F: Fn(&Fields) -> f64,
{
    let captured: RefCell<Option<Error>> = RefCell::new(None);
    let value = quad::integrate(
        |t| match p.fields(t) {
            Ok(f) => pick(&f),
            Err(e) => {
                captured.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        tol,
    );
    if let Some(e) = captured.into_inner() {
        return Err(e);
    }
    value
}

// ---------------------------------------------------------------------------
// Curve construction

/// Principal-branch difference in (−π, π].
pub(crate) fn circ_diff(from: f64, to: f64) -> f64 {
    let d = to - from;
    d - TAU * (d / TAU).round()
}

fn theta_raw(f: &Fields) -> f64 {
    f.omega.atan2(f.delta)
}

/// |θ̇| = 2|γ|; infinite at a level crossing, which forces refinement
/// into the crossing until the regularity error fires.
fn theta_rate(f: &Fields) -> f64 {
    let r2 = f.delta * f.delta + f.omega * f.omega;
    if r2 == 0.0 {
        f64::INFINITY
    } else {
        (f.wronskian() / r2).abs()
    }
}

#[derive(Clone, Copy)]
struct ThetaProbe {
    t: f64,
    raw: f64,
    rate: f64,
}

fn probe(p: &DrivingProtocol, t: f64) -> Result<ThetaProbe> {
    let f = p.fields(t)?;
    Ok(ThetaProbe {
        t,
        raw: theta_raw(&f),
        rate: theta_rate(&f),
    })
}

/// A step needs splitting when the principal-branch jump is large or the
/// endpoint winding rates alone could alias a full turn.
fn needs_split(a: &ThetaProbe, b: &ThetaProbe) -> bool {
    let h = b.t - a.t;
    circ_diff(a.raw, b.raw).abs() > PI / 2.0 || h * a.rate.max(b.rate) > PI
}

/// Insert grid points until the turning angle moves at most π/2 per step.
fn refine_grid(p: &DrivingProtocol, base: &[f64]) -> Result<Vec<f64>> {
    let span = base[base.len() - 1] - base[0];
    let min_step = 1e-12 * span.max(1.0);
    let mut ts = Vec::with_capacity(base.len());
    let mut stack: Vec<(ThetaProbe, ThetaProbe)> = Vec::new();
    ts.push(base[0]);
    let mut prev = probe(p, base[0])?;
    for &tb in &base[1..] {
        let end = probe(p, tb)?;
        stack.push((prev, end));
        while let Some((a, b)) = stack.pop() {
            if !needs_split(&a, &b) || b.t - a.t <= min_step {
                if circ_diff(a.raw, b.raw).abs() > PI && b.t - a.t <= min_step {
                    // the branch cannot be continued through here: the
                    // tangent flips, i.e. the speed passes through zero
                    return Err(Error::Regularity {
                        t: 0.5 * (a.t + b.t),
                        rho: p.fields(0.5 * (a.t + b.t))?.rho(),
                        floor: p.regularity_floor(),
                    });
                }
                ts.push(b.t);
                continue;
            }
            let m = probe(p, 0.5 * (a.t + b.t))?;
            stack.push((m, b));
            stack.push((a, m));
        }
        prev = end;
    }
    Ok(ts)
}

/// Continuous-branch turning angle at the given times (first entry on the
/// principal branch). The winding between consecutive times is resolved
/// by the same splitting rule the curve builder uses.
pub fn theta_series(p: &DrivingProtocol, ts: &[f64]) -> Result<Vec<f64>> {
    if ts.is_empty() {
        return Ok(Vec::new());
    }
    let span = (ts[ts.len() - 1] - ts[0]).abs();
    let min_step = 1e-12 * span.max(1.0);
    let mut out = Vec::with_capacity(ts.len());
    let mut prev = probe(p, ts[0])?;
    out.push(prev.raw);
    for &tb in &ts[1..] {
        let end = probe(p, tb)?;
        let mut delta = 0.0;
        let mut stack = vec![(prev, end)];
        while let Some((a, b)) = stack.pop() {
            if !needs_split(&a, &b) || b.t - a.t <= min_step {
                if circ_diff(a.raw, b.raw).abs() > PI && b.t - a.t <= min_step {
                    return Err(Error::Regularity {
                        t: 0.5 * (a.t + b.t),
                        rho: p.fields(0.5 * (a.t + b.t))?.rho(),
                        floor: p.regularity_floor(),
                    });
                }
                delta += circ_diff(a.raw, b.raw);
                continue;
            }
            let m = probe(p, 0.5 * (a.t + b.t))?;
            stack.push((m, b));
            stack.push((a, m));
        }
        let next = out.last().unwrap() + delta;
        out.push(next);
        prev = end;
    }
    Ok(out)
}

/// Continuous-branch turning angle at one instant, unwrapped from the
/// window's left edge.
pub fn theta_at(p: &DrivingProtocol, t: f64) -> Result<f64> {
    let (t_i, _) = p.window();
    if t == t_i {
        return Ok(probe(p, t_i)?.raw);
    }
    Ok(theta_series(p, &[t_i, t])?[1])
}

/// Build the sampled plane curve of a protocol.
///
/// Positions and arc length are accumulated with adaptive Simpson
/// quadrature per grid segment (independent segments, then one prefix
/// sum), anchored at t = 0 when the window contains it. Fails with
/// [`Error::Regularity`] when the speed dips below the floor anywhere on
/// the final grid: that is an adiabatic level crossing and the geometric
/// quantities diverge there.
pub fn build_curve(p: &DrivingProtocol, grid: &GridSpec) -> Result<PlaneCurvePath> {
    if grid.n < 2 {
        return Err(Error::config("sampling grid needs at least 2 points"));
    }
    let (t_i, t_f) = p.window();
    let anchor = anchor_time(p);
    let mut base: Vec<f64> = (0..grid.n)
        .map(|k| t_i + (t_f - t_i) * k as f64 / (grid.n - 1) as f64)
        .collect();
    *base.last_mut().unwrap() = t_f;
    if !base.iter().any(|t| *t == anchor) {
        let pos = base.partition_point(|t| *t < anchor);
        base.insert(pos, anchor);
    }

    let ts = refine_grid(p, &base)?;
    let fields = batch::try_map(&ts, |t| p.fields(*t))?;

    // regularity gate before any division by ρ³
    let floor = p.regularity_floor();
    for (t, f) in ts.iter().zip(&fields) {
        let rho = f.rho();
        if rho < floor {
            return Err(Error::Regularity { t: *t, rho, floor });
        }
    }

    // per-segment integrals of Δ, Ω, ρ
    let seg_idx: Vec<usize> = (0..ts.len() - 1).collect();
    let segs = batch::try_map(&seg_idx, |&k| -> Result<(f64, f64, f64)> {
        let (a, b) = (ts[k], ts[k + 1]);
        let dx = integrate_field(p, a, b, grid.quad_tol, |f| f.delta)?;
        let dy = integrate_field(p, a, b, grid.quad_tol, |f| f.omega)?;
        let ds = integrate_field(p, a, b, grid.quad_tol, |f| f.rho())?;
        Ok((dx, dy, ds))
    })?;

    let mut xs = vec![0.0; ts.len()];
    let mut ys = vec![0.0; ts.len()];
    let mut ss = vec![0.0; ts.len()];
    for (k, (dx, dy, ds)) in segs.iter().enumerate() {
        xs[k + 1] = xs[k] + dx;
        ys[k + 1] = ys[k] + dy;
        ss[k + 1] = ss[k] + ds;
    }
    let a_idx = ts
        .iter()
        .position(|t| *t == anchor)
        .expect("anchor on grid");
    let (x0, y0, s0) = (xs[a_idx], ys[a_idx], ss[a_idx]);

    // unwrap θ along the refined grid
    let mut theta = vec![0.0; ts.len()];
    theta[0] = theta_raw(&fields[0]);
    for k in 1..ts.len() {
        theta[k] = theta[k - 1] + circ_diff(theta_raw(&fields[k - 1]), theta_raw(&fields[k]));
    }

    let samples: Vec<GeometrySample> = (0..ts.len())
        .map(|k| {
            let f = &fields[k];
            let rho = f.rho();
            let w = f.wronskian();
            GeometrySample {
                t: ts[k],
                s: ss[k] - s0,
                x: xs[k] - x0,
                y: ys[k] - y0,
                rho,
                theta: theta[k],
                kappa: w / (rho * rho * rho),
                gamma: w / (2.0 * rho * rho),
                e_plus: rho,
                e_minus: -rho,
            }
        })
        .collect();

    let classification = classify::classify_samples(&samples, floor);
    Ok(PlaneCurvePath {
        samples,
        classification,
    })
}

// ---------------------------------------------------------------------------
// Unit-speed reparametrization

/// Resample a regular path on a uniform arc-length grid.
///
/// In the new parameter the speed is 1, the quasi-energies are ±1, and the
/// protocol reading of the samples is (Δ, Ω)(s) = (cos θ, sin θ).
pub fn reparametrize_unit_speed(
    p: &DrivingProtocol,
    path: &PlaneCurvePath,
    n_out: usize,
) -> Result<PlaneCurvePath> {
    if !path.flags().regular {
        let g = path
            .samples
            .iter()
            .min_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap())
            .unwrap();
        return Err(Error::Regularity {
            t: g.t,
            rho: g.rho,
            floor: p.regularity_floor(),
        });
    }
    if n_out < 2 {
        return Err(Error::config("unit-speed resampling needs >= 2 points"));
    }
    let smp = &path.samples;
    let (s_lo, s_hi) = (smp[0].s, smp[smp.len() - 1].s);

    let idx: Vec<usize> = (0..n_out).collect();
    let new_samples = batch::try_map(&idx, |&j| -> Result<GeometrySample> {
        let s_target = s_lo + (s_hi - s_lo) * j as f64 / (n_out - 1) as f64;
        let k = bracket(smp, s_target);
        let t = invert_arc_length(p, smp, k, s_target)?;
        let f = p.fields(t)?;
        let rho = f.rho();
        let w = f.wronskian();
        let kappa = w / (rho * rho * rho);
        let x = smp[k].x + integrate_field(p, smp[k].t, t, quad::DEFAULT_TOL, |f| f.delta)?;
        let y = smp[k].y + integrate_field(p, smp[k].t, t, quad::DEFAULT_TOL, |f| f.omega)?;
        let theta = smp[k].theta
            + circ_diff(smp[k].theta.rem_euclid(TAU), theta_raw(&f).rem_euclid(TAU));
        Ok(GeometrySample {
            t,
            s: s_target,
            x,
            y,
            rho: 1.0,
            theta,
            kappa,
            gamma: 0.5 * kappa,
            e_plus: 1.0,
            e_minus: -1.0,
        })
    })?;

    let classification = classify::classify_samples(&new_samples, 0.5);
    Ok(PlaneCurvePath {
        samples: new_samples,
        classification,
    })
}

fn bracket(smp: &[GeometrySample], s: f64) -> usize {
    let mut lo = 0usize;
    let mut hi = smp.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if smp[mid].s <= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Solve s(t) = s_target inside the bracketing segment: monotone cubic
/// initial guess (slope dt/ds = 1/ρ at the knots), then Newton steps with
/// the quadrature-based arc length.
fn invert_arc_length(
    p: &DrivingProtocol,
    smp: &[GeometrySample],
    k: usize,
    s_target: f64,
) -> Result<f64> {
    let (s0, s1) = (smp[k].s, smp[k + 1].s);
    let (t0, t1) = (smp[k].t, smp[k + 1].t);
    if s_target <= s0 {
        return Ok(t0);
    }
    if s_target >= s1 {
        return Ok(t1);
    }
    // Hermite guess for t(s)
    let h = s1 - s0;
    let u = (s_target - s0) / h;
    let (m0, m1) = (1.0 / smp[k].rho, 1.0 / smp[k + 1].rho);
    let (u2, u3) = (u * u, u * u * u);
    let mut t = (2.0 * u3 - 3.0 * u2 + 1.0) * t0
        + h * (u3 - 2.0 * u2 + u) * m0
        + (-2.0 * u3 + 3.0 * u2) * t1
        + h * (u3 - u2) * m1;
    t = t.clamp(t0, t1);
    for _ in 0..3 {
        let s_here = smp[k].s + integrate_field(p, t0, t, quad::DEFAULT_TOL, |f| f.rho())?;
        let rho = p.fields(t)?.rho();
        let next = (t - (s_here - s_target) / rho).clamp(t0, t1);
        if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) {
            t = next;
            break;
        }
        t = next;
    }
    Ok(t)
}
