//! Cubic Hermite interpolation on a strictly increasing knot grid.
//!
//! Two slope rules are provided: the Fritsch-Carlson monotone rule
//! (tabulated protocols, where overshoot would fabricate curvature
//! wiggles) and high-order finite-difference slopes for smooth resampled
//! data (turning-angle splines, curvature profiles).

use crate::error::{Error, Result};

/// Piecewise cubic Hermite series: knots, values, and slopes.
#[derive(Debug, Clone)]
pub struct Hermite {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Hermite {
    pub fn new(x: Vec<f64>, y: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() || x.len() != m.len() {
            return Err(Error::config(
                "interpolant needs at least two knots and matching value/slope counts",
            ));
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::config("interpolation knots must strictly increase"));
            }
        }
        if x.iter().chain(&y).chain(&m).any(|v| !v.is_finite()) {
            return Err(Error::config("interpolation data must be finite"));
        }
        Ok(Hermite { x, y, m })
    }

    /// Monotone (Fritsch-Carlson) slopes from the data itself.
    pub fn monotone(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::config("monotone interpolant needs >= 2 knots"));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut m = vec![0.0; n];
        if n == 2 {
            m[0] = d[0];
            m[1] = d[0];
        } else {
            m[0] = endpoint_slope(h[0], h[1], d[0], d[1]);
            m[n - 1] = endpoint_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
            for k in 1..n - 1 {
                if d[k - 1] * d[k] <= 0.0 {
                    m[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
                }
            }
        }
        Hermite::new(x, y, m)
    }

    /// Fourth-order finite-difference slopes on a uniform grid; for
    /// smooth, densely sampled data.
    pub fn smooth_uniform(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 5 {
            return Hermite::monotone(x, y);
        }
        let h = (x[n - 1] - x[0]) / (n as f64 - 1.0);
        let mut m = vec![0.0; n];
        m[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4])
            / (12.0 * h);
        m[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h);
        for k in 2..n - 2 {
            m[k] = (-y[k + 2] + 8.0 * y[k + 1] - 8.0 * y[k - 1] + y[k - 2]) / (12.0 * h);
        }
        m[n - 2] =
            (3.0 * y[n - 1] + 10.0 * y[n - 2] - 18.0 * y[n - 3] + 6.0 * y[n - 4] - y[n - 5])
                / (12.0 * h);
        m[n - 1] = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4]
            + 3.0 * y[n - 5])
            / (12.0 * h);
        Hermite::new(x, y, m)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        match self
            .x
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.clamp(1, self.x.len() - 1) - 1,
        }
    }

    /// Value at `x`; queries clamp to the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_deriv(x).0
    }

    /// Value and first derivative at `x`.
    pub fn eval_with_deriv(&self, x: f64) -> (f64, f64) {
        let k = self.segment(x);
        let h = self.x[k + 1] - self.x[k];
        let u = ((x - self.x[k]) / h).clamp(0.0, 1.0);
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let y = h00 * self.y[k]
            + h * h10 * self.m[k]
            + h01 * self.y[k + 1]
            + h * h11 * self.m[k + 1];
        let dy = (6.0 * u2 - 6.0 * u) / h * self.y[k]
            + (3.0 * u2 - 4.0 * u + 1.0) * self.m[k]
            + (6.0 * u - 6.0 * u2) / h * self.y[k + 1]
            + (3.0 * u2 - 2.0 * u) * self.m[k + 1];
        (y, dy)
    }
}

fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // Three-point end slope, clipped to keep the end segment monotone.
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
