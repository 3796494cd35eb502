//! Prescribed-curvature machinery: Frenet propagation and curve
//! reconstruction.
//!
//! A curvature profile κ(s) on [0, L], a start point, and a start angle
//! determine a unit-speed curve up to nothing at all: θ(s) = θ₀ + ∫κ and
//! α(s) = origin + (∫cos θ, ∫sin θ). The reconstruction returns both the
//! curve and the protocol it corresponds to, Δ(s) = cos θ, Ω(s) = sin θ.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::interp::Hermite;
use crate::ode::{solve_to_grid, OdeOptions};
use crate::protocol::DrivingProtocol;
use crate::quad;

use super::{build_curve, GridSpec, PlaneCurvePath};

#[derive(Clone)]
enum ProfileKind {
    Constant(f64),
    Spline(Hermite),
    Expr(Expression),
    Func(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ProfileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProfileKind::Constant(c) => write!(f, "Constant({c})"),
            ProfileKind::Spline(_) => write!(f, "Spline"),
            ProfileKind::Expr(e) => write!(f, "Expr({})", e.text()),
            ProfileKind::Func(_) => write!(f, "Func"),
        }
    }
}

/// κ as a function of arc length on [0, L], plus the rigid-motion gauge
/// (start point and start angle) that pins the reconstructed curve.
#[derive(Debug, Clone)]
pub struct CurvatureProfile {
    kind: ProfileKind,
    length: f64,
    pub theta0: f64,
    pub origin: (f64, f64),
}

impl CurvatureProfile {
    fn validate(self) -> Result<Self> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::config("profile length must be positive and finite"));
        }
        if !self.theta0.is_finite() || !self.origin.0.is_finite() || !self.origin.1.is_finite() {
            return Err(Error::config("profile gauge must be finite"));
        }
        for k in 0..=256 {
            let s = self.length * k as f64 / 256.0;
            let v = self.kappa(s)?;
            if !v.is_finite() {
                return Err(Error::domain(
                    "curvature profile",
                    format!("non-finite curvature at s = {s}"),
                ));
            }
        }
        Ok(self)
    }

    pub fn constant(kappa: f64, length: f64) -> Result<Self> {
        CurvatureProfile {
            kind: ProfileKind::Constant(kappa),
            length,
            theta0: 0.0,
            origin: (0.0, 0.0),
        }
        .validate()
    }

    /// From tabulated (s, κ) samples; s must start at 0.
    pub fn from_samples(s: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        let length = *s
            .last()
            .ok_or_else(|| Error::config("empty curvature table"))?;
        let uniform = is_uniform(&s);
        let spline = if uniform {
            Hermite::smooth_uniform(s, kappa)?
        } else {
            Hermite::monotone(s, kappa)?
        };
        CurvatureProfile {
            kind: ProfileKind::Spline(spline),
            length,
            theta0: 0.0,
            origin: (0.0, 0.0),
        }
        .validate()
    }

    /// From an expression in the arc-length variable `t`.
    pub fn from_expression(text: &str, length: f64) -> Result<Self> {
        let expr = Expression::parse(text, &[] as &[&str])?;
        CurvatureProfile {
            kind: ProfileKind::Expr(expr),
            length,
            theta0: 0.0,
            origin: (0.0, 0.0),
        }
        .validate()
    }

    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, length: f64) -> Result<Self> {
        CurvatureProfile {
            kind: ProfileKind::Func(Arc::new(f)),
            length,
            theta0: 0.0,
            origin: (0.0, 0.0),
        }
        .validate()
    }

    /// Extract κ(s) from a built path, keeping its gauge (start point and
    /// start angle) so a reconstruction should land on the original.
    pub fn from_path(path: &PlaneCurvePath) -> Result<Self> {
        let smp = path.samples();
        let s0 = smp[0].s;
        let s: Vec<f64> = smp.iter().map(|g| g.s - s0).collect();
        let kappa: Vec<f64> = smp.iter().map(|g| g.kappa).collect();
        let mut p = CurvatureProfile::from_samples(s, kappa)?;
        p.theta0 = smp[0].theta;
        p.origin = (smp[0].x, smp[0].y);
        Ok(p)
    }

    pub fn with_gauge(mut self, theta0: f64, origin: (f64, f64)) -> Result<Self> {
        self.theta0 = theta0;
        self.origin = origin;
        self.validate()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn kappa(&self, s: f64) -> Result<f64> {
        let slack = 1e-9 * (1.0 + self.length);
        if s < -slack || s > self.length + slack {
            return Err(Error::OutOfWindow {
                t: s,
                t_min: 0.0,
                t_max: self.length,
            });
        }
        match &self.kind {
            ProfileKind::Constant(c) => Ok(*c),
            ProfileKind::Spline(h) => Ok(h.eval(s)),
            ProfileKind::Expr(e) => e.eval(s, &[]),
            ProfileKind::Func(f) => Ok(f(s)),
        }
    }
}

fn is_uniform(s: &[f64]) -> bool {
    if s.len() < 3 {
        return true;
    }
    let h = (s[s.len() - 1] - s[0]) / (s.len() - 1) as f64;
    s.windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300))
}

// ---------------------------------------------------------------------------
// Frenet propagation

/// Orthonormal frames along the curve of a curvature profile.
#[derive(Debug, Clone, Serialize)]
pub struct FrenetFrames {
    pub s: Vec<f64>,
    pub tangent: Vec<(f64, f64)>,
    pub normal: Vec<(f64, f64)>,
    /// Worst orthonormality defect seen before re-orthonormalization.
    pub max_drift: f64,
}

/// Integrate the frame equations t' = κ n, n' = −κ t from the profile's
/// initial angle. Frames are re-orthonormalized at the output points and
/// the pre-correction defect is reported.
pub fn frenet_propagate(profile: &CurvatureProfile, n_out: usize) -> Result<FrenetFrames> {
    if n_out < 2 {
        return Err(Error::config("frenet propagation needs >= 2 output points"));
    }
    let th0 = profile.theta0;
    let y0 = [th0.cos(), th0.sin(), -th0.sin(), th0.cos()];
    let grid: Vec<f64> = (0..n_out)
        .map(|k| profile.length * k as f64 / (n_out - 1) as f64)
        .collect();
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let k = profile.kappa(s)?;
        dy[0] = k * y[2];
        dy[1] = k * y[3];
        dy[2] = -k * y[0];
        dy[3] = -k * y[1];
        Ok(())
    };
    let sol = solve_to_grid(rhs, &y0, &grid, OdeOptions::with_tol(1e-11, 1e-13), |_, _| {})?;

    let mut tangent = Vec::with_capacity(n_out);
    let mut normal = Vec::with_capacity(n_out);
    let mut max_drift = 0.0f64;
    for y in &sol.states {
        let (tx, ty, nx, ny) = (y[0], y[1], y[2], y[3]);
        let tn = tx.hypot(ty);
        let nn = nx.hypot(ny);
        let dot = tx * nx + ty * ny;
        max_drift = max_drift
            .max((tn - 1.0).abs())
            .max((nn - 1.0).abs())
            .max(dot.abs());
        // Gram-Schmidt: normalize t, project n off t, normalize n
        let (tx, ty) = (tx / tn, ty / tn);
        let (mut nx, mut ny) = (nx - dot * tx, ny - dot * ty);
        let nn = nx.hypot(ny);
        nx /= nn;
        ny /= nn;
        tangent.push((tx, ty));
        normal.push((nx, ny));
    }
    Ok(FrenetFrames {
        s: grid,
        tangent,
        normal,
        max_drift,
    })
}

// ---------------------------------------------------------------------------
// Reconstruction

/// Reconstruction output: the unit-speed curve and its protocol reading.
#[derive(Debug)]
pub struct Reconstruction {
    pub path: PlaneCurvePath,
    pub protocol: DrivingProtocol,
}

/// Build the unit-speed curve with curvature κ(s): θ = θ₀ + ∫κ by
/// per-segment quadrature, a turning-angle spline with exact slopes κ(s),
/// then positions through the shared curve builder.
pub fn reconstruct_from_curvature(
    profile: &CurvatureProfile,
    n: usize,
) -> Result<Reconstruction> {
    if n < 5 {
        return Err(Error::config("reconstruction needs >= 5 grid points"));
    }
    let length = profile.length();
    let s_nodes: Vec<f64> = (0..n)
        .map(|k| length * k as f64 / (n - 1) as f64)
        .collect();
    let mut theta = Vec::with_capacity(n);
    theta.push(profile.theta0);
    for w in s_nodes.windows(2) {
        let seg = integrate_profile(profile, w[0], w[1])?;
        let prev = *theta.last().unwrap();
        theta.push(prev + seg);
    }
    let slopes: Vec<f64> = s_nodes
        .iter()
        .map(|s| profile.kappa(*s))
        .collect::<Result<_>>()?;
    let spline = Hermite::new(s_nodes, theta, slopes)?;
    let protocol = DrivingProtocol::from_turning_angle("reconstructed", spline)?;
    let mut path = build_curve(&protocol, &GridSpec::with_points(n))?;
    for g in &mut path.samples {
        g.x += profile.origin.0;
        g.y += profile.origin.1;
    }
    Ok(Reconstruction { path, protocol })
}

fn integrate_profile(profile: &CurvatureProfile, a: f64, b: f64) -> Result<f64> {
    let captured: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let v = quad::integrate(
        |s| match profile.kappa(s) {
            Ok(k) => k,
            Err(e) => {
                captured.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        quad::DEFAULT_TOL,
    );
    if let Some(e) = captured.into_inner() {
        return Err(e);
    }
    v
}

/// Rigidly move `path` (rotation + translation, no reflection) so its
/// start point and start tangent match the given gauge. This is the
/// alignment the fundamental theorem allows.
pub fn rigid_align(path: &mut PlaneCurvePath, origin: (f64, f64), theta0: f64) {
    let start = path.samples[0];
    let dtheta = super::circ_diff(start.theta, theta0);
    let (sin, cos) = dtheta.sin_cos();
    for g in &mut path.samples {
        let (dx, dy) = (g.x - start.x, g.y - start.y);
        g.x = origin.0 + cos * dx - sin * dy;
        g.y = origin.1 + sin * dx + cos * dy;
        g.theta += dtheta;
    }
}
