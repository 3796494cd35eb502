//! Driving protocols: the model catalog, expression-defined and tabulated
//! protocols, and the JSON spec-file format that names them.
//!
//! A protocol is a pair of real functions of time, the detuning `Δ(t)`
//! and the Rabi frequency `Ω(t)`, with exact first derivatives and a
//! finite evaluation window. Catalog models use closed-form derivatives;
//! expression protocols get theirs from dual numbers; tabulated ones from
//! the monotone cubic interpolant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::interp::Hermite;

/// Grid used to validate finiteness and record the speed scale.
const SCAN_POINTS: usize = 4097;

/// Endpoint |Ω/Δ| for the truncated windows of the idealized models whose
/// natural window is the whole real line. Norm drift of a default-tolerance
/// propagation grows like 1e-10 per unit of accumulated dynamical phase, so
/// the default window has to keep the total phase under ~50 to hold the
/// 1e-8 unitarity budget; that caps the linear sweep at |t| ≈ 7. Wider
/// windows are one `--window` flag away, and the truncation quality is
/// always reported as the endpoint |Ω/Δ| diagnostic, never absorbed.
pub const ENDPOINT_RATIO: f64 = 0.15;

/// Δ and Ω with their time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fields {
    pub delta: f64,
    pub omega: f64,
    pub delta_dot: f64,
    pub omega_dot: f64,
}

impl Fields {
    /// Field-vector length √(Δ²+Ω²): curve speed, eigenenergy splitting.
    pub fn rho(&self) -> f64 {
        self.delta.hypot(self.omega)
    }

    /// Wronskian ΔΩ̇ − Δ̇Ω, the numerator shared by the coupling and the
    /// curvature.
    pub fn wronskian(&self) -> f64 {
        self.delta * self.omega_dot - self.delta_dot * self.omega
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    LandauZener { d0: f64, o0: f64 },
    Parabolic { d0: f64, o0: f64 },
    Ellipse { d0: f64, o0: f64, w: f64 },
    Limacon { a: f64, b: f64, w: f64 },
    Lissajous { a: f64, b: f64, n: f64, ph: f64 },
    Expr(Box<ExprKernel>),
    Table { delta: Hermite, omega: Hermite },
    UnitSpeed { theta: Hermite },
}

#[derive(Debug, Clone)]
struct ExprKernel {
    delta: Expression,
    omega: Expression,
    values: Vec<f64>,
}

/// An evaluable driving protocol, immutable after construction.
#[derive(Debug, Clone)]
pub struct DrivingProtocol {
    name: String,
    params: BTreeMap<String, f64>,
    window: (f64, f64),
    rho_scale: f64,
    kernel: Kernel,
}

impl DrivingProtocol {
    fn build(
        name: String,
        params: BTreeMap<String, f64>,
        window: (f64, f64),
        kernel: Kernel,
    ) -> Result<Self> {
        let (t_i, t_f) = window;
        if !t_i.is_finite() || !t_f.is_finite() || !(t_i < t_f) {
            return Err(Error::config(format!(
                "window [{t_i}, {t_f}] must be a finite increasing interval"
            )));
        }
        if params.values().any(|v| !v.is_finite()) {
            return Err(Error::config("protocol parameters must be finite"));
        }
        let mut p = DrivingProtocol {
            name,
            params,
            window,
            rho_scale: 0.0,
            kernel,
        };
        // Validation scan: every sample must be finite; record max speed.
        let mut rho_max = 0.0f64;
        for k in 0..SCAN_POINTS {
            let t = t_i + (t_f - t_i) * k as f64 / (SCAN_POINTS - 1) as f64;
            let f = p.fields(t)?;
            if !f.delta.is_finite()
                || !f.omega.is_finite()
                || !f.delta_dot.is_finite()
                || !f.omega_dot.is_finite()
            {
                return Err(Error::domain(
                    p.name,
                    format!("non-finite protocol value at t = {t}"),
                ));
            }
            rho_max = rho_max.max(f.rho());
        }
        p.rho_scale = rho_max;
        Ok(p)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Closed evaluation window `[t_i, t_f]`.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Max speed seen on the validation scan; sets the regularity floor.
    pub fn rho_scale(&self) -> f64 {
        self.rho_scale
    }

    /// Speeds below this are treated as level crossings.
    pub fn regularity_floor(&self) -> f64 {
        1e-8 * self.rho_scale
    }

    fn check_window(&self, t: f64) -> Result<()> {
        let (t_i, t_f) = self.window;
        let slack = 1e-9 * (1.0 + t_i.abs().max(t_f.abs()));
        if t < t_i - slack || t > t_f + slack {
            return Err(Error::OutOfWindow {
                t,
                t_min: t_i,
                t_max: t_f,
            });
        }
        Ok(())
    }

    /// (Δ, Ω) at `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let f = self.fields(t)?;
        Ok((f.delta, f.omega))
    }

    /// (Δ̇, Ω̇) at `t`.
    pub fn derivatives(&self, t: f64) -> Result<(f64, f64)> {
        let f = self.fields(t)?;
        Ok((f.delta_dot, f.omega_dot))
    }

    /// All four field values at `t`.
    pub fn fields(&self, t: f64) -> Result<Fields> {
        self.check_window(t)?;
        let f = match &self.kernel {
            Kernel::LandauZener { d0, o0 } => Fields {
                delta: d0 * t,
                omega: *o0,
                delta_dot: *d0,
                omega_dot: 0.0,
            },
            Kernel::Parabolic { d0, o0 } => Fields {
                delta: d0 * (t * t - 1.0),
                omega: *o0,
                delta_dot: 2.0 * d0 * t,
                omega_dot: 0.0,
            },
            Kernel::Ellipse { d0, o0, w } => {
                // ω only reparametrizes: the traced ellipse (semi-axes
                // Δ₀, Ω₀) is the same point set at any rate
                let (s, c) = (w * t).sin_cos();
                Fields {
                    delta: d0 * w * c,
                    omega: o0 * w * s,
                    delta_dot: -d0 * w * w * s,
                    omega_dot: o0 * w * w * c,
                }
            }
            Kernel::Limacon { a, b, w } => {
                let (s1, c1) = (w * t).sin_cos();
                let (s2, c2) = (2.0 * w * t).sin_cos();
                Fields {
                    delta: -w * (b * s1 + a * s2),
                    omega: w * (b * c1 + a * c2),
                    delta_dot: -w * w * (b * c1 + 2.0 * a * c2),
                    omega_dot: -w * w * (b * s1 + 2.0 * a * s2),
                }
            }
            Kernel::Lissajous { a, b, n, ph } => Fields {
                delta: a * (n * t + ph).cos(),
                omega: b * t.cos(),
                delta_dot: -a * n * (n * t + ph).sin(),
                omega_dot: -b * t.sin(),
            },
            Kernel::Expr(k) => {
                let (delta, delta_dot) = k.delta.eval_dual(t, &k.values)?;
                let (omega, omega_dot) = k.omega.eval_dual(t, &k.values)?;
                Fields {
                    delta,
                    omega,
                    delta_dot,
                    omega_dot,
                }
            }
            Kernel::Table { delta, omega } => {
                let (d, dd) = delta.eval_with_deriv(t);
                let (o, od) = omega.eval_with_deriv(t);
                Fields {
                    delta: d,
                    omega: o,
                    delta_dot: dd,
                    omega_dot: od,
                }
            }
            Kernel::UnitSpeed { theta } => {
                let (th, k) = theta.eval_with_deriv(t);
                let (s, c) = th.sin_cos();
                Fields {
                    delta: c,
                    omega: s,
                    delta_dot: -s * k,
                    omega_dot: c * k,
                }
            }
        };
        Ok(f)
    }

    /// Protocol from parsed Δ/Ω expressions and bound parameter values.
    pub fn from_expressions(
        delta: &str,
        omega: &str,
        params: &BTreeMap<String, f64>,
        window: (f64, f64),
    ) -> Result<Self> {
        let names: Vec<String> = params.keys().cloned().collect();
        let values: Vec<f64> = params.values().copied().collect();
        let delta = Expression::parse(delta, &names)?;
        let omega = Expression::parse(omega, &names)?;
        DrivingProtocol::build(
            "expr".into(),
            params.clone(),
            window,
            Kernel::Expr(Box::new(ExprKernel {
                delta,
                omega,
                values,
            })),
        )
    }

    /// Protocol from tabulated samples; monotone cubic between knots,
    /// derivatives from the interpolant.
    pub fn from_table(t: Vec<f64>, delta: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if t.len() != delta.len() || t.len() != omega.len() {
            return Err(Error::config("table columns must have equal length"));
        }
        let window = (
            *t.first().ok_or_else(|| Error::config("empty table"))?,
            *t.last().unwrap(),
        );
        let delta = Hermite::monotone(t.clone(), delta)?;
        let omega = Hermite::monotone(t, omega)?;
        DrivingProtocol::build(
            "table".into(),
            BTreeMap::new(),
            window,
            Kernel::Table { delta, omega },
        )
    }

    /// Unit-speed protocol Δ = cos θ(s), Ω = sin θ(s) from a turning-angle
    /// spline; this is how reconstructed protocols are represented.
    pub fn from_turning_angle(name: &str, theta: Hermite) -> Result<Self> {
        let window = theta.range();
        DrivingProtocol::build(
            name.into(),
            BTreeMap::new(),
            window,
            Kernel::UnitSpeed { theta },
        )
    }
}

// ---------------------------------------------------------------------------
// Catalog

/// One tunable parameter of a catalog model.
#[derive(Debug, Clone, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
}

/// Catalog entry: name, parameters, and the default window for the
/// default parameters.
#[derive(Debug, Clone, Serialize)]
pub struct Descriptor {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamSpec>,
    pub default_window: (f64, f64),
}

/// The built-in model catalog.
pub struct Catalog;

const CATALOG_NAMES: [&str; 7] = [
    "landau_zener",
    "parabolic",
    "ellipse",
    "circle",
    "limacon",
    "cardioid",
    "lissajous",
];

impl Catalog {
    pub fn names() -> &'static [&'static str] {
        &CATALOG_NAMES
    }

    pub fn descriptors() -> Vec<Descriptor> {
        CATALOG_NAMES
            .iter()
            .map(|n| Self::describe(n).expect("catalog name"))
            .collect()
    }

    pub fn describe(name: &str) -> Result<Descriptor> {
        let (summary, params) = match name {
            "landau_zener" => (
                "linear sweep: Delta = Delta0*t, Omega = Omega0",
                vec![param("Delta0", 1.0), param("Omega0", 1.0)],
            ),
            "parabolic" => (
                "double crossing: Delta = Delta0*(t^2 - 1), Omega = Omega0",
                vec![param("Delta0", 1.0), param("Omega0", 1.0)],
            ),
            "ellipse" => (
                "Delta = Delta0*cos(omega*t), Omega = Omega0*sin(omega*t)",
                vec![
                    param("Delta0", 0.5),
                    param("Omega0", 1.5),
                    param("omega", 1.0),
                ],
            ),
            "circle" => (
                "ellipse with Omega0 = Delta0: constant curvature 1/Delta0",
                vec![param("Delta0", 0.5), param("omega", 1.0)],
            ),
            "limacon" => (
                "Delta = -omega*(b*sin(omega*t) + a*sin(2*omega*t)), \
                 Omega = omega*(b*cos(omega*t) + a*cos(2*omega*t))",
                vec![param("a", 1.5), param("b", 1.0), param("omega", 1.0)],
            ),
            "cardioid" => (
                "limacon with b = a; curvature singular mid-window",
                vec![param("a", 1.0), param("omega", 1.0)],
            ),
            "lissajous" => (
                "Delta = a*cos(n*t + delta), Omega = b*cos(t)",
                vec![
                    param("a", 1.5),
                    param("b", 1.5),
                    param("n", 0.9),
                    param("delta", std::f64::consts::FRAC_PI_2),
                ],
            ),
            other => return Err(Error::NotFound(other.into())),
        };
        let defaults: BTreeMap<String, f64> = params
            .iter()
            .map(|p| (p.name.to_string(), p.default))
            .collect();
        let default_window = Self::default_window(name, &defaults)?;
        Ok(Descriptor {
            name: CATALOG_NAMES
                .iter()
                .find(|n| **n == name)
                .copied()
                .unwrap(),
            summary,
            params,
            default_window,
        })
    }

    fn default_window(name: &str, p: &BTreeMap<String, f64>) -> Result<(f64, f64)> {
        let get = |k: &str| p.get(k).copied().unwrap();
        match name {
            "landau_zener" => {
                let t = get("Omega0").abs() / (get("Delta0").abs() * ENDPOINT_RATIO);
                finite_half_window(name, t)
            }
            "parabolic" => {
                let t =
                    (1.0 + get("Omega0").abs() / (get("Delta0").abs() * ENDPOINT_RATIO)).sqrt();
                finite_half_window(name, t)
            }
            "ellipse" | "circle" | "limacon" | "cardioid" => {
                let w = get("omega");
                if w <= 0.0 {
                    return Err(Error::config("omega must be positive"));
                }
                Ok((0.0, std::f64::consts::TAU / w))
            }
            "lissajous" => Ok((0.0, std::f64::consts::TAU)),
            other => Err(Error::NotFound(other.into())),
        }
    }

    /// Instantiate a catalog model with parameter overrides and an
    /// optional window override.
    pub fn build(
        name: &str,
        overrides: &BTreeMap<String, f64>,
        window: Option<(f64, f64)>,
    ) -> Result<DrivingProtocol> {
        let desc = Self::describe(name)?;
        let mut params: BTreeMap<String, f64> = desc
            .params
            .iter()
            .map(|p| (p.name.to_string(), p.default))
            .collect();
        for (k, v) in overrides {
            if !params.contains_key(k.as_str()) {
                let valid: Vec<&str> = desc.params.iter().map(|p| p.name).collect();
                return Err(Error::config(format!(
                    "model `{name}` has no parameter `{k}` (expected one of {valid:?})"
                )));
            }
            params.insert(k.clone(), *v);
        }
        let window = match window {
            Some(w) => w,
            None => Self::default_window(name, &params)?,
        };
        let get = |k: &str| params.get(k).copied().unwrap();
        let kernel = match name {
            "landau_zener" => Kernel::LandauZener {
                d0: get("Delta0"),
                o0: get("Omega0"),
            },
            "parabolic" => Kernel::Parabolic {
                d0: get("Delta0"),
                o0: get("Omega0"),
            },
            "ellipse" => Kernel::Ellipse {
                d0: get("Delta0"),
                o0: get("Omega0"),
                w: get("omega"),
            },
            "circle" => Kernel::Ellipse {
                d0: get("Delta0"),
                o0: get("Delta0"),
                w: get("omega"),
            },
            "limacon" => Kernel::Limacon {
                a: get("a"),
                b: get("b"),
                w: get("omega"),
            },
            "cardioid" => Kernel::Limacon {
                a: get("a"),
                b: get("a"),
                w: get("omega"),
            },
            "lissajous" => Kernel::Lissajous {
                a: get("a"),
                b: get("b"),
                n: get("n"),
                ph: get("delta"),
            },
            other => return Err(Error::NotFound(other.into())),
        };
        DrivingProtocol::build(name.into(), params, window, kernel)
    }
}

fn param(name: &'static str, default: f64) -> ParamSpec {
    ParamSpec { name, default }
}

fn finite_half_window(name: &str, t: f64) -> Result<(f64, f64)> {
    if !t.is_finite() || t <= 0.0 {
        Err(Error::config(format!(
            "model `{name}` has no finite default window for these parameters; \
             pass a window explicitly"
        )))
    } else {
        Ok((-t, t))
    }
}

// ---------------------------------------------------------------------------
// Spec file

/// JSON protocol spec: exactly one of `model`, `expr`, or `table`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProtocolSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<ExprSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExprSpec {
    pub delta: String,
    pub omega: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSpec {
    pub t: Vec<f64>,
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl ProtocolSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("protocol spec: {e}")))
    }

    pub fn to_protocol(&self) -> Result<DrivingProtocol> {
        let sources =
            self.model.is_some() as u8 + self.expr.is_some() as u8 + self.table.is_some() as u8;
        if sources != 1 {
            return Err(Error::config(
                "protocol spec needs exactly one of `model`, `expr`, or `table`",
            ));
        }
        if let Some(model) = &self.model {
            let empty = BTreeMap::new();
            let params = self.params.as_ref().unwrap_or(&empty);
            return Catalog::build(model, params, self.window);
        }
        if let Some(expr) = &self.expr {
            let window = self.window.ok_or_else(|| {
                Error::config("expression protocols need an explicit `window`")
            })?;
            let empty = BTreeMap::new();
            let params = self.params.as_ref().unwrap_or(&empty);
            return DrivingProtocol::from_expressions(&expr.delta, &expr.omega, params, window);
        }
        let table = self.table.as_ref().unwrap();
        let p = DrivingProtocol::from_table(
            table.t.clone(),
            table.delta.clone(),
            table.omega.clone(),
        )?;
        if let Some(w) = self.window {
            let (lo, hi) = p.window();
            if w.0 < lo || w.1 > hi {
                return Err(Error::config(format!(
                    "window [{}, {}] exceeds the tabulated range [{lo}, {hi}]",
                    w.0, w.1
                )));
            }
            // rebuild restricted to the requested window
            return DrivingProtocol::build(
                "table".into(),
                BTreeMap::new(),
                w,
                p.kernel.clone(),
            );
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn model(name: &str, overrides: &[(&str, f64)]) -> DrivingProtocol {
        let map = overrides
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        Catalog::build(name, &map, None).unwrap()
    }

    #[test]
    fn landau_zener_crossing_at_origin() {
        let p = model("landau_zener", &[]);
        assert_eq!(p.eval(0.0).unwrap(), (0.0, 1.0));
        let p = model("landau_zener", &[("Delta0", 2.0)]);
        assert_eq!(p.derivatives(0.7).unwrap(), (2.0, 0.0));
    }

    #[test]
    fn ellipse_at_zero_and_quarter_period() {
        let p = model("ellipse", &[("Delta0", 0.5), ("Omega0", 0.2)]);
        let (d, o) = p.eval(0.0).unwrap();
        assert_eq!(d, 0.5);
        assert_eq!(o, 0.0);

        let p = model("ellipse", &[("Delta0", 0.5), ("Omega0", 1.5)]);
        let (dd, od) = p.derivatives(FRAC_PI_2).unwrap();
        assert!((dd - (-0.5)).abs() < 1e-15);
        assert!(od.abs() < 1e-15);
    }

    #[test]
    fn limacon_start_value() {
        let p = model("limacon", &[]);
        let (d, o) = p.eval(0.0).unwrap();
        assert_eq!(d, 0.0);
        assert!((o - 2.5).abs() < 1e-15);
    }

    #[test]
    fn lissajous_start_derivative() {
        let p = model("lissajous", &[]);
        let (dd, od) = p.derivatives(0.0).unwrap();
        assert!((dd - (-1.35)).abs() < 1e-12);
        assert_eq!(od, 0.0);
    }

    #[test]
    fn out_of_window_is_an_error() {
        let p = model("ellipse", &[]);
        assert!(matches!(
            p.eval(-1.0),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(p.eval(TAU).is_ok());
    }

    #[test]
    fn catalog_contents() {
        let names: Vec<_> = Catalog::descriptors().iter().map(|d| d.name).collect();
        for want in [
            "landau_zener",
            "parabolic",
            "ellipse",
            "circle",
            "limacon",
            "cardioid",
            "lissajous",
        ] {
            assert!(names.contains(&want), "missing {want}");
        }
        let parab = Catalog::describe("parabolic").unwrap();
        let pnames: Vec<_> = parab.params.iter().map(|p| p.name).collect();
        assert_eq!(pnames, ["Delta0", "Omega0"]);
        let liss = Catalog::describe("lissajous").unwrap();
        for p in &liss.params {
            match p.name {
                "a" | "b" => assert_eq!(p.default, 1.5),
                "n" => assert_eq!(p.default, 0.9),
                "delta" => assert_eq!(p.default, FRAC_PI_2),
                other => panic!("unexpected param {other}"),
            }
        }
        assert!(matches!(
            Catalog::build("klein_bottle", &BTreeMap::new(), None),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn parabolic_matches_formula() {
        let map = BTreeMap::new();
        let p = Catalog::build("parabolic", &map, Some((-3.0, 3.0))).unwrap();
        let (d, o) = p.eval(2.0).unwrap();
        assert!((d - 3.0).abs() < 1e-15);
        assert_eq!(o, 1.0);
    }

    #[test]
    fn ellipse_periodicity() {
        let p = Catalog::build(
            "ellipse",
            &BTreeMap::new(),
            Some((0.0, 2.0 * TAU)),
        )
        .unwrap();
        for k in 0..50 {
            let t = TAU * k as f64 / 50.0;
            let (d0, o0) = p.eval(t).unwrap();
            let (d1, o1) = p.eval(t + TAU).unwrap();
            assert!((d0 - d1).abs() < 1e-12);
            assert!((o0 - o1).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_speed_is_constant() {
        let p = model("circle", &[("Delta0", 0.5)]);
        for k in 0..100 {
            let t = TAU * k as f64 / 100.0;
            let f = p.fields(t).unwrap();
            assert!((f.delta * f.delta + f.omega * f.omega - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_five_point_differences() {
        // catalog-wide analytic-vs-numeric oracle
        for name in Catalog::names() {
            let p = model(name, &[]);
            let (t_i, t_f) = p.window();
            let span = t_f - t_i;
            let h = 1e-4 * span.max(1.0) / 1000.0;
            for k in 0..100 {
                let t = t_i + span * (k as f64 + 0.5) / 100.0;
                let t = t.clamp(t_i + 2.0 * h, t_f - 2.0 * h);
                let d = |u: f64| p.eval(u).unwrap();
                let fd_d = (-d(t + 2.0 * h).0 + 8.0 * d(t + h).0 - 8.0 * d(t - h).0
                    + d(t - 2.0 * h).0)
                    / (12.0 * h);
                let fd_o = (-d(t + 2.0 * h).1 + 8.0 * d(t + h).1 - 8.0 * d(t - h).1
                    + d(t - 2.0 * h).1)
                    / (12.0 * h);
                let (ad, ao) = p.derivatives(t).unwrap();
                assert!(
                    (ad - fd_d).abs() <= 1e-6 * (1.0 + ad.abs()),
                    "{name} delta_dot at t={t}: analytic {ad}, fd {fd_d}"
                );
                assert!(
                    (ao - fd_o).abs() <= 1e-6 * (1.0 + ao.abs()),
                    "{name} omega_dot at t={t}: analytic {ao}, fd {fd_o}"
                );
            }
        }
    }

    #[test]
    fn expr_protocol_matches_catalog() {
        let mut params = BTreeMap::new();
        params.insert("D0".to_string(), 1.0);
        params.insert("W0".to_string(), 1.0);
        let p = DrivingProtocol::from_expressions(
            "D0*(t^2 - 1)",
            "W0",
            &params,
            (-3.0, 3.0),
        )
        .unwrap();
        let q = Catalog::build("parabolic", &BTreeMap::new(), Some((-3.0, 3.0))).unwrap();
        for k in 0..20 {
            let t = -3.0 + 6.0 * k as f64 / 19.0;
            let fp = p.fields(t).unwrap();
            let fq = q.fields(t).unwrap();
            assert!((fp.delta - fq.delta).abs() < 1e-12);
            assert!((fp.delta_dot - fq.delta_dot).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_protocol_interpolates() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
        let delta: Vec<f64> = t.iter().map(|u| u.cos()).collect();
        let omega: Vec<f64> = t.iter().map(|u| u.sin()).collect();
        let p = DrivingProtocol::from_table(t, delta, omega).unwrap();
        let (d, o) = p.eval(2.513).unwrap();
        assert!((d - 2.513f64.cos()).abs() < 1e-4);
        assert!((o - 2.513f64.sin()).abs() < 1e-4);
        // derivatives come from the interpolant and track the truth loosely
        let (dd, od) = p.derivatives(2.513).unwrap();
        assert!((dd + 2.513f64.sin()).abs() < 1e-2);
        assert!((od - 2.513f64.cos()).abs() < 1e-2);
    }

    #[test]
    fn spec_file_round_trip() {
        let text = r#"{"model": "ellipse", "params": {"Delta0": 0.5, "Omega0": 0.2}}"#;
        let p = ProtocolSpec::from_json(text).unwrap().to_protocol().unwrap();
        assert_eq!(p.eval(0.0).unwrap(), (0.5, 0.0));
        assert_eq!(p.window(), (0.0, TAU));

        let text = r#"{"expr": {"delta": "cos(t)", "omega": "sin(t)"}, "window": [0, 6.283185307179586]}"#;
        let p = ProtocolSpec::from_json(text).unwrap().to_protocol().unwrap();
        let (d, o) = p.eval(PI).unwrap();
        assert!((d + 1.0).abs() < 1e-15);
        assert!(o.abs() < 1e-12);

        let bad = r#"{"model": "ellipse", "expr": {"delta": "t", "omega": "t"}}"#;
        assert!(ProtocolSpec::from_json(bad).unwrap().to_protocol().is_err());
    }

    #[test]
    fn unknown_parameter_rejected() {
        let mut m = BTreeMap::new();
        m.insert("Delta1".to_string(), 1.0);
        assert!(matches!(
            Catalog::build("landau_zener", &m, None),
            Err(Error::Config(_))
        ));
    }
}
