//! Adaptive Simpson quadrature.
//!
//! Shared by curve construction (`x`, `y`, arc length) and by the
//! coupling/turning-angle cross checks. Smooth integrands only, so the
//! classic recursive bisection with Richardson correction is enough.

use crate::error::{Error, Result};

/// Absolute tolerance used throughout the geometry pipeline.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Recursion limit; hit only by non-smooth integrands.
pub const MAX_DEPTH: u32 = 40;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    estimate: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) * (fa + 4.0 * fm + fb) / 6.0
}

fn refine<F>(f: &F, p: Panel, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    if !flm.is_finite() || !frm.is_finite() {
        return Err(Error::domain(
            "quadrature",
            format!("non-finite integrand near t = {lm}"),
        ));
    }
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let whole = left + right;
    let err = whole - p.estimate;
    if err.abs() <= 15.0 * tol || depth >= MAX_DEPTH {
        return Ok(whole + err / 15.0);
    }
    let half = 0.5 * tol;
    let l = refine(
        f,
        Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            estimate: left,
        },
        half,
        depth + 1,
    )?;
    let r = refine(
        f,
        Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            estimate: right,
        },
        half,
        depth + 1,
    )?;
    Ok(l + r)
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `a > b` is allowed and flips the sign, matching the usual convention
/// for integrals accumulated from a fixed anchor.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(m), f(hi));
    if !fa.is_finite() || !fm.is_finite() || !fb.is_finite() {
        return Err(Error::domain(
            "quadrature",
            format!("non-finite integrand on [{lo}, {hi}]"),
        ));
    }
    let estimate = simpson(lo, hi, fa, fm, fb);
    let value = refine(
        &f,
        Panel {
            a: lo,
            b: hi,
            fa,
            fm,
            fb,
            estimate,
        },
        tol.max(f64::MIN_POSITIVE),
        0,
    )?;
    Ok(sign * value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        // Simpson is exact for cubics; the adaptive wrapper must not spoil it.
        let v = integrate(|t| t * t * t - 2.0 * t, -1.0, 3.0, 1e-12).unwrap();
        assert!((v - (81.0 / 4.0 - 1.0 / 4.0 - 9.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sine_over_period() {
        let v = integrate(f64::sin, 0.0, PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let fwd = integrate(f64::exp, 0.0, 1.0, 1e-12).unwrap();
        let back = integrate(f64::exp, 1.0, 0.0, 1e-12).unwrap();
        assert_eq!(fwd, -back);
    }

    #[test]
    fn narrow_peak_resolved() {
        // Lorentzian of width 1e-3 inside a wide interval.
        let w = 1e-3;
        let v = integrate(|t| w / (t * t + w * w), -10.0, 10.0, 1e-12).unwrap();
        let exact = 2.0 * (10.0 / w).atan();
        assert!((v - exact).abs() < 1e-9, "got {v}, want {exact}");
    }

    #[test]
    fn non_finite_integrand_is_domain_error() {
        let err = integrate(|t| 1.0 / t, -1.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }
}
