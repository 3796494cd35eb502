//! Quantum evolution of the driven two-level system.
//!
//! The bare-basis Hamiltonian is `[[Δ, Ω], [Ω, −Δ]]`; its instantaneous
//! eigenbasis rotates by half the turning angle, and the rotation rate
//! shows up as the adiabatic coupling γ = θ̇/2 between the eigenstates.
//! Propagation integrates either basis directly with the adaptive
//! Runge-Kutta core; amplitudes ride in the integrator as pairs of reals.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, GridSpec, PlaneCurvePath};
use crate::ode::{solve_to_grid, OdeOptions, OdeStats};
use crate::protocol::DrivingProtocol;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisTag {
    Diabatic,
    Adiabatic,
}

/// Two complex amplitudes in a tagged basis.
#[derive(Debug, Clone, Copy)]
pub struct StateVector {
    pub basis: BasisTag,
    pub amp: [Complex64; 2],
}

impl StateVector {
    pub fn new(basis: BasisTag, amp: [Complex64; 2]) -> Self {
        StateVector { basis, amp }
    }

    pub fn norm(&self) -> f64 {
        (self.amp[0].norm_sqr() + self.amp[1].norm_sqr()).sqrt()
    }
}

/// Time series of amplitudes plus the run diagnostics.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub basis: BasisTag,
    pub t: Vec<f64>,
    pub amp: Vec<[Complex64; 2]>,
    /// |amp|² per component.
    pub populations: Vec<[f64; 2]>,
    /// Final transition probability: upper-eigenstate population at t_f
    /// (projected through the continuous eigenbasis for bare-basis runs).
    pub p_final: f64,
    /// max |‖ψ‖ − 1| over every accepted integrator step.
    pub norm_drift: f64,
    pub stats: OdeStats,
}

impl StateTrajectory {
    /// CSV with columns
    /// `t,re_a_plus,im_a_plus,re_a_minus,im_a_minus,pop_plus,pop_minus`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "t,re_a_plus,im_a_plus,re_a_minus,im_a_minus,pop_plus,pop_minus"
        )?;
        for ((t, a), pops) in self.t.iter().zip(&self.amp).zip(&self.populations) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t, a[0].re, a[0].im, a[1].re, a[1].im, pops[0], pops[1]
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Instantaneous structure

/// Bare-basis Hamiltonian `[[Δ, Ω], [Ω, −Δ]]`.
pub fn hamiltonian_diabatic(p: &DrivingProtocol, t: f64) -> Result<[[f64; 2]; 2]> {
    let (d, o) = p.eval(t)?;
    Ok([[d, o], [o, -d]])
}

#[derive(Debug, Clone, Copy)]
pub struct EigenStructure {
    pub e_plus: f64,
    pub e_minus: f64,
    /// Upper eigenvector (cos θ/2, sin θ/2); real, continuous in t.
    pub chi_plus: [f64; 2],
    /// Lower eigenvector (−sin θ/2, cos θ/2).
    pub chi_minus: [f64; 2],
    /// The continuous turning-angle branch used for the half angle.
    pub theta: f64,
}

/// Eigenvalues ±ρ and the continuous real eigenvectors.
pub fn eigenstructure(p: &DrivingProtocol, t: f64) -> Result<EigenStructure> {
    let f = p.fields(t)?;
    let rho = f.rho();
    let floor = p.regularity_floor();
    if rho < floor {
        return Err(Error::Regularity { t, rho, floor });
    }
    let theta = geometry::theta_at(p, t)?;
    let (s, c) = (0.5 * theta).sin_cos();
    Ok(EigenStructure {
        e_plus: rho,
        e_minus: -rho,
        chi_plus: [c, s],
        chi_minus: [-s, c],
        theta,
    })
}

/// Adiabatic coupling γ = (ΔΩ̇ − Δ̇Ω) / (2(Δ² + Ω²)) = θ̇/2.
pub fn adiabatic_coupling(p: &DrivingProtocol, t: f64) -> Result<f64> {
    let f = p.fields(t)?;
    let rho = f.rho();
    let floor = p.regularity_floor();
    if rho < floor {
        return Err(Error::Regularity { t, rho, floor });
    }
    Ok(f.wronskian() / (2.0 * rho * rho))
}

/// Rotation by θ/2 mapping the bare basis onto the eigenbasis.
pub fn basis_transform(p: &DrivingProtocol, t: f64) -> Result<[[f64; 2]; 2]> {
    let theta = geometry::theta_at(p, t)?;
    let (s, c) = (0.5 * theta).sin_cos();
    Ok([[c, -s], [s, c]])
}

/// |ΔΩ̇ − Δ̇Ω| / ρ³: the adiabaticity condition reads `margin ≪ 1`, and
/// the value equals |κ| of the protocol's curve.
pub fn adiabaticity_margin(p: &DrivingProtocol, t: f64) -> Result<f64> {
    let f = p.fields(t)?;
    let rho = f.rho();
    let floor = p.regularity_floor();
    if rho < floor {
        return Err(Error::Regularity { t, rho, floor });
    }
    Ok(f.wronskian().abs() / (rho * rho * rho))
}

// ---------------------------------------------------------------------------
// Propagation

#[derive(Debug, Clone, Copy)]
pub struct PropagateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Output grid size over the window.
    pub n_out: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            rtol: crate::ode::DEFAULT_RTOL,
            atol: crate::ode::DEFAULT_ATOL,
            n_out: 1001,
        }
    }
}

fn complex_pair(y: &[f64]) -> [Complex64; 2] {
    [Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])]
}

/// Integrate the Schrödinger equation over the protocol window.
///
/// With no initial state the convention is "start in the lower
/// eigenstate": a₋(t_i) = 1 in the eigenbasis, or its bare-basis image
/// χ₋(t_i) for bare-basis runs. Bare-basis propagation works through
/// level crossings; eigenbasis propagation requires a regular window.
pub fn propagate(
    p: &DrivingProtocol,
    basis: BasisTag,
    psi0: Option<[Complex64; 2]>,
    opts: &PropagateOptions,
) -> Result<StateTrajectory> {
    if opts.n_out < 2 {
        return Err(Error::config("trajectory needs >= 2 output points"));
    }
    let (t_i, t_f) = p.window();
    let grid: Vec<f64> = (0..opts.n_out)
        .map(|k| t_i + (t_f - t_i) * k as f64 / (opts.n_out - 1) as f64)
        .collect();
    let floor = p.regularity_floor();

    let y0: [f64; 4] = match (basis, psi0) {
        (_, Some(a)) => {
            let n = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::config("initial state must be normalizable"));
            }
            [a[0].re / n, a[0].im / n, a[1].re / n, a[1].im / n]
        }
        (BasisTag::Adiabatic, None) => [0.0, 0.0, 1.0, 0.0],
        (BasisTag::Diabatic, None) => {
            let th = geometry::theta_at(p, t_i)?;
            let (s, c) = (0.5 * th).sin_cos();
            [-s, 0.0, c, 0.0] // χ₋(t_i)
        }
    };

    if basis == BasisTag::Adiabatic {
        // fail with the crossing location before burning integrator time
        for k in 0..=4096 {
            let t = t_i + (t_f - t_i) * k as f64 / 4096.0;
            let rho = p.fields(t)?.rho();
            if rho < floor {
                return Err(Error::Regularity { t, rho, floor });
            }
        }
    }

    let mut norm_drift = 0.0f64;
    let observer = |_t: f64, y: &[f64]| {
        let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]).sqrt();
        let d = (n - 1.0).abs();
        if d > norm_drift {
            norm_drift = d;
        }
    };

    let ode_opts = OdeOptions::with_tol(opts.rtol, opts.atol);
    let sol = match basis {
        BasisTag::Diabatic => {
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let (d, o) = p.eval(t)?;
                // i ψ' = H ψ expanded over (re₊, im₊, re₋, im₋)
                dy[0] = d * y[1] + o * y[3];
                dy[1] = -d * y[0] - o * y[2];
                dy[2] = o * y[1] - d * y[3];
                dy[3] = -o * y[0] + d * y[2];
                Ok(())
            };
            solve_to_grid(rhs, &y0, &grid, ode_opts, observer)?
        }
        BasisTag::Adiabatic => {
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let f = p.fields(t)?;
                let rho = f.rho();
                if rho < floor {
                    return Err(Error::Regularity { t, rho, floor });
                }
                let gamma = f.wronskian() / (2.0 * rho * rho);
                // i a' = [[ρ, iγ], [−iγ, −ρ]] a
                dy[0] = rho * y[1] + gamma * y[2];
                dy[1] = -rho * y[0] + gamma * y[3];
                dy[2] = -gamma * y[0] - rho * y[3];
                dy[3] = -gamma * y[1] + rho * y[2];
                Ok(())
            };
            solve_to_grid(rhs, &y0, &grid, ode_opts, observer)?
        }
    };

    let amp: Vec<[Complex64; 2]> = sol.states.iter().map(|y| complex_pair(y)).collect();
    let populations: Vec<[f64; 2]> = amp
        .iter()
        .map(|a| [a[0].norm_sqr(), a[1].norm_sqr()])
        .collect();

    let p_final = match basis {
        BasisTag::Adiabatic => populations.last().unwrap()[0],
        BasisTag::Diabatic => {
            let th = geometry::theta_at(p, t_f)?;
            let (s, c) = (0.5 * th).sin_cos();
            let a = amp.last().unwrap();
            (c * a[0] + s * a[1]).norm_sqr()
        }
    };

    Ok(StateTrajectory {
        basis,
        t: sol.grid,
        amp,
        populations,
        p_final,
        norm_drift,
        stats: sol.stats,
    })
}

/// P = |a₊(t_f)|² starting from a₋(t_i) = 1.
pub fn transition_probability(p: &DrivingProtocol, opts: &PropagateOptions) -> Result<f64> {
    Ok(propagate(p, BasisTag::Adiabatic, None, opts)?.p_final)
}

/// View a bare-basis trajectory through the continuous eigenbasis:
/// returns the eigenbasis populations at the output times.
pub fn eigenbasis_populations(
    p: &DrivingProtocol,
    traj: &StateTrajectory,
) -> Result<Vec<[f64; 2]>> {
    if traj.basis != BasisTag::Diabatic {
        return Ok(traj.populations.clone());
    }
    let thetas = geometry::theta_series(p, &traj.t)?;
    Ok(traj
        .amp
        .iter()
        .zip(&thetas)
        .map(|(a, th)| {
            let (s, c) = (0.5 * th).sin_cos();
            let plus = c * a[0] + s * a[1];
            let minus = -s * a[0] + c * a[1];
            [plus.norm_sqr(), minus.norm_sqr()]
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Passage classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageClass {
    /// Δθ an odd multiple of π: eigenbasis and bare labels exchange.
    LabelSwap,
    /// Δθ a multiple of 2π: adiabatic evolution returns the population.
    PopulationReturn,
    /// Δθ a half-odd multiple of π: equal-weight superposition forms.
    EqualSuperposition,
    Generic,
}

/// Endpoint analysis of a window: total turning, its coupling-integral
/// cross-check, the passage class, and the basis-coincidence diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PassageReport {
    pub delta_theta: f64,
    /// 2∫γ dt, computed independently of the angle unwrap.
    pub gamma_integral: f64,
    pub class: PassageClass,
    /// Closest special value of Δθ and how far it is.
    pub nearest_class: PassageClass,
    pub nearest_value: f64,
    pub distance: f64,
    /// |Ω/Δ| at the window edges (large means the bases do not coincide
    /// there; the finite-window truncation is reported, not absorbed).
    pub endpoint_ratio_initial: f64,
    pub endpoint_ratio_final: f64,
    pub endpoints_coincide: bool,
    pub angle_tolerance: f64,
    pub ratio_threshold: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Angular tolerance for snapping Δθ to a special set (radians).
    pub angle_tolerance: f64,
    /// Endpoint |Ω/Δ| below this counts as basis coincidence.
    pub ratio_threshold: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            angle_tolerance: 1e-3,
            ratio_threshold: 1e-3,
        }
    }
}

/// Classify the passage of a built path.
pub fn classify_passage(
    p: &DrivingProtocol,
    path: &PlaneCurvePath,
    opts: &ClassifyOptions,
) -> Result<PassageReport> {
    let delta_theta = path.total_turning();

    // independent route: 2 ∫ γ dt segment by segment over the path grid
    let samples = path.samples();
    let mut gamma_integral = 0.0;
    let seg_tol = quad::DEFAULT_TOL / samples.len() as f64;
    for w in samples.windows(2) {
        gamma_integral += geometry::integrate_field(p, w[0].t, w[1].t, seg_tol, |f| {
            let r2 = f.delta * f.delta + f.omega * f.omega;
            f.wronskian() / r2
        })?;
    }

    // nearest special values of Δθ
    let pi = std::f64::consts::PI;
    let even = 2.0 * pi * (delta_theta / (2.0 * pi)).round();
    let odd = pi * (2.0 * ((delta_theta / pi - 1.0) / 2.0).round() + 1.0);
    let half = pi * ((delta_theta / pi - 0.5).round() + 0.5);
    let candidates = [
        (PassageClass::PopulationReturn, even),
        (PassageClass::LabelSwap, odd),
        (PassageClass::EqualSuperposition, half),
    ];
    let (nearest_class, nearest_value) = candidates
        .iter()
        .min_by(|a, b| {
            (delta_theta - a.1)
                .abs()
                .partial_cmp(&(delta_theta - b.1).abs())
                .unwrap()
        })
        .map(|(c, v)| (*c, *v))
        .unwrap();
    let distance = (delta_theta - nearest_value).abs();
    let class = if distance <= opts.angle_tolerance {
        nearest_class
    } else {
        PassageClass::Generic
    };

    let first = path.first();
    let last = path.last();
    let ratio = |g: &geometry::GeometrySample| -> f64 {
        // |Ω/Δ| from the turning angle; the angle survives ρ → 0 scaling
        g.theta.tan().abs()
    };
    let r_i = ratio(first);
    let r_f = ratio(last);
    Ok(PassageReport {
        delta_theta,
        gamma_integral,
        class,
        nearest_class,
        nearest_value,
        distance,
        endpoint_ratio_initial: r_i,
        endpoint_ratio_final: r_f,
        endpoints_coincide: r_i <= opts.ratio_threshold && r_f <= opts.ratio_threshold,
        angle_tolerance: opts.angle_tolerance,
        ratio_threshold: opts.ratio_threshold,
    })
}

/// Max |κ| over a default-grid path: the window's adiabaticity margin.
pub fn adiabaticity_margin_max(p: &DrivingProtocol, grid: &GridSpec) -> Result<f64> {
    Ok(geometry::build_curve(p, grid)?.max_margin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_curve;
    use crate::protocol::Catalog;
    use std::collections::BTreeMap;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn model(name: &str, overrides: &[(&str, f64)]) -> DrivingProtocol {
        let map: BTreeMap<String, f64> = overrides
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        Catalog::build(name, &map, None).unwrap()
    }

    fn model_win(name: &str, overrides: &[(&str, f64)], w: (f64, f64)) -> DrivingProtocol {
        let map: BTreeMap<String, f64> = overrides
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        Catalog::build(name, &map, Some(w)).unwrap()
    }

    #[test]
    fn hamiltonian_is_symmetric_traceless() {
        let mut params = BTreeMap::new();
        params.insert("d".into(), 0.3);
        params.insert("o".into(), 0.4);
        let p = DrivingProtocol::from_expressions("d", "o", &params, (0.0, 1.0)).unwrap();
        let h = hamiltonian_diabatic(&p, 0.5).unwrap();
        assert_eq!(h[0][1], h[1][0]);
        assert_eq!(h[0][0], -h[1][1]);
        // 3-4-5: eigenvalues ±0.5
        let e = eigenstructure(&p, 0.5).unwrap();
        assert!((e.e_plus - 0.5).abs() < 1e-15);
        assert!(e.e_plus + e.e_minus == 0.0);
    }

    #[test]
    fn eigenvectors_at_theta_zero_and_pi() {
        // θ = 0: eigenbasis coincides with the bare basis
        let mut params = BTreeMap::new();
        params.insert("c".into(), 1.0);
        let p = DrivingProtocol::from_expressions("c", "0", &params, (0.0, 1.0)).unwrap();
        let e = eigenstructure(&p, 0.5).unwrap();
        assert!((e.chi_plus[0] - 1.0).abs() < 1e-14);
        assert!(e.chi_plus[1].abs() < 1e-14);
        assert!((e.chi_minus[1] - 1.0).abs() < 1e-14);

        // θ = π: labels swap (χ₊ along the second bare state)
        let p = Catalog::build("ellipse", &BTreeMap::new(), Some((0.0, PI))).unwrap();
        let e = eigenstructure(&p, PI).unwrap();
        assert!((e.theta - PI).abs() < 1e-9);
        assert!(e.chi_plus[0].abs() < 1e-9);
        assert!((e.chi_plus[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn basis_transform_is_special_orthogonal() {
        let p = model("limacon", &[]);
        for t in [0.1, 1.0, 2.5, 4.0, 6.0] {
            let u = basis_transform(&p, t).unwrap();
            let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
            assert!((det - 1.0).abs() < 1e-14);
            let dot = u[0][0] * u[0][1] + u[1][0] * u[1][1];
            assert!(dot.abs() < 1e-14);
        }
    }

    #[test]
    fn landau_zener_coupling_is_a_lorentzian() {
        let (d0, o0) = (1.0, 1.0);
        let p = model_win(
            "landau_zener",
            &[("Delta0", d0), ("Omega0", o0)],
            (-5.0, 5.0),
        );
        for t in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            let want = -d0 * o0 / (2.0 * (d0 * d0 * t * t + o0 * o0));
            let got = adiabatic_coupling(&p, t).unwrap();
            assert!((got - want).abs() < 1e-14, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn constant_protocol_has_zero_coupling() {
        let mut params = BTreeMap::new();
        params.insert("c".into(), 0.7);
        let p = DrivingProtocol::from_expressions("c", "c", &params, (0.0, 2.0)).unwrap();
        assert_eq!(adiabatic_coupling(&p, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn circle_coupling_is_half() {
        let p = model("circle", &[("Delta0", 2.0)]);
        for t in [0.0, 1.0, 3.0, 6.0] {
            assert!((adiabatic_coupling(&p, t).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn coupling_matches_theta_rate() {
        let p = model("lissajous", &[]);
        for t in [0.5, 1.5, 3.0, 5.0] {
            let h = 1e-6;
            let th = geometry::theta_series(&p, &[t - h, t + h]).unwrap();
            let rate = (th[1] - th[0]) / (2.0 * h);
            let got = adiabatic_coupling(&p, t).unwrap();
            assert!((got - 0.5 * rate).abs() <= 1e-6 * (1.0 + got.abs()), "t={t}");
        }
    }

    #[test]
    fn margin_equals_curvature_magnitude() {
        let p = model("ellipse", &[]);
        for k in 0..100 {
            let t = TAU * (k as f64 + 0.5) / 100.0;
            let m = adiabaticity_margin(&p, t).unwrap();
            let kappa = geometry::curvature(&p, t).unwrap();
            assert!((m - kappa.abs()).abs() <= 1e-12 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn diagonal_hamiltonian_evolves_phases_only() {
        let mut params = BTreeMap::new();
        params.insert("d".into(), 0.8);
        let p = DrivingProtocol::from_expressions("d", "0", &params, (0.0, 5.0)).unwrap();
        let psi0 = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let traj = propagate(
            &p,
            BasisTag::Diabatic,
            Some(psi0),
            &PropagateOptions::default(),
        )
        .unwrap();
        for (t, a) in traj.t.iter().zip(&traj.amp) {
            let phase = Complex64::new(0.0, -0.8 * t).exp();
            let want0 = psi0[0] * phase;
            assert!((a[0] - want0).norm() < 1e-8, "t={t}");
            assert!((a[0].norm_sqr() - 0.36).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_matches_constant_hamiltonian_solution() {
        // in the eigenbasis the circle is a constant two-level problem:
        // P = γ²/(ρ²+γ²) · sin²(√(ρ²+γ²) T)
        for d0 in [1.0, 2.0, 4.0] {
            let p = model("circle", &[("Delta0", d0)]);
            let traj =
                propagate(&p, BasisTag::Adiabatic, None, &PropagateOptions::default()).unwrap();
            let w = (d0 * d0 + 0.25).sqrt();
            let want = 0.25 / (w * w) * (w * TAU).sin().powi(2);
            assert!(
                (traj.p_final - want).abs() < 1e-8,
                "Delta0={d0}: {} vs {want}",
                traj.p_final
            );
            assert!(traj.norm_drift < 1e-8);
        }
    }

    #[test]
    fn cross_basis_populations_agree() {
        let p = model("ellipse", &[]);
        let opts = PropagateOptions::default();
        let adia = propagate(&p, BasisTag::Adiabatic, None, &opts).unwrap();
        let dia = propagate(&p, BasisTag::Diabatic, None, &opts).unwrap();
        let projected = eigenbasis_populations(&p, &dia).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in adia.populations.iter().zip(&projected) {
            worst = worst.max((a[0] - b[0]).abs().max((a[1] - b[1]).abs()));
        }
        assert!(worst < 1e-6, "population mismatch {worst}");
        assert!((adia.p_final - dia.p_final).abs() < 1e-6);
    }

    #[test]
    fn adiabatic_propagation_rejects_crossings() {
        let p = model("cardioid", &[]);
        assert!(matches!(
            propagate(&p, BasisTag::Adiabatic, None, &PropagateOptions::default()),
            Err(Error::Regularity { .. })
        ));
    }

    #[test]
    fn ellipse_passage_is_population_return() {
        let p = model("ellipse", &[]);
        let path = build_curve(&p, &GridSpec::default()).unwrap();
        let rep = classify_passage(&p, &path, &ClassifyOptions::default()).unwrap();
        assert_eq!(rep.class, PassageClass::PopulationReturn);
        assert!((rep.delta_theta - TAU).abs() < 1e-6);
        assert!((rep.delta_theta - rep.gamma_integral).abs() < 1e-8);
        assert!(rep.endpoints_coincide);
    }

    #[test]
    fn limacon_starts_at_right_angle() {
        let p = model("limacon", &[]);
        let th0 = geometry::theta_at(&p, 0.0).unwrap();
        assert!((th0 - FRAC_PI_2).abs() < 1e-14);
        let path = build_curve(&p, &GridSpec::default()).unwrap();
        let rep = classify_passage(&p, &path, &ClassifyOptions::default()).unwrap();
        // double loop: Δθ = 4π, and the endpoints sit at equal weight
        assert!((rep.delta_theta - 2.0 * TAU).abs() < 1e-6);
        assert_eq!(rep.class, PassageClass::PopulationReturn);
        assert!(!rep.endpoints_coincide);
        assert!(rep.endpoint_ratio_initial > 1e3);
    }

    #[test]
    fn constant_protocol_is_population_return_at_zero() {
        let mut params = BTreeMap::new();
        params.insert("c".into(), 1.0);
        let p = DrivingProtocol::from_expressions("c", "0", &params, (0.0, 3.0)).unwrap();
        let path = build_curve(&p, &GridSpec::with_points(64)).unwrap();
        let rep = classify_passage(&p, &path, &ClassifyOptions::default()).unwrap();
        assert_eq!(rep.delta_theta, 0.0);
        assert_eq!(rep.class, PassageClass::PopulationReturn);
        assert_eq!(rep.nearest_value, 0.0);
    }

    #[test]
    fn norm_drift_shrinks_with_tolerance() {
        let p = model("ellipse", &[]);
        // outputs only at the ends so the controller owns the step size
        let run = |rtol: f64| {
            propagate(
                &p,
                BasisTag::Diabatic,
                None,
                &PropagateOptions {
                    rtol,
                    atol: rtol * 1e-3,
                    n_out: 2,
                },
            )
            .unwrap()
            .norm_drift
        };
        let coarse = run(1e-7);
        let fine = run(1e-10);
        assert!(
            fine < coarse / 10.0,
            "drift did not shrink: {coarse} -> {fine}"
        );
    }

    #[test]
    fn gamma_cross_check_against_theta_difference() {
        for name in ["ellipse", "limacon", "lissajous"] {
            let p = model(name, &[]);
            let path = build_curve(&p, &GridSpec::default()).unwrap();
            let rep = classify_passage(&p, &path, &ClassifyOptions::default()).unwrap();
            assert!(
                (rep.delta_theta - rep.gamma_integral).abs() < 1e-8,
                "{name}: Δθ {} vs 2∫γ {}",
                rep.delta_theta,
                rep.gamma_integral
            );
        }
    }
}
