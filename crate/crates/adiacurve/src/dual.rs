//! Forward-mode dual numbers.
//!
//! Carries a value and its derivative with respect to time through the
//! expression evaluator, so user-supplied protocols get exact first
//! derivatives without symbolic differentiation.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub val: f64,
    pub dot: f64,
}

impl Dual {
    pub const fn new(val: f64, dot: f64) -> Self {
        Dual { val, dot }
    }

    /// A constant: zero derivative.
    pub const fn constant(val: f64) -> Self {
        Dual { val, dot: 0.0 }
    }

    /// The time variable itself: unit derivative.
    pub const fn variable(val: f64) -> Self {
        Dual { val, dot: 1.0 }
    }

    pub fn sin(self) -> Self {
        Dual::new(self.val.sin(), self.val.cos() * self.dot)
    }

    pub fn cos(self) -> Self {
        Dual::new(self.val.cos(), -self.val.sin() * self.dot)
    }

    pub fn tan(self) -> Self {
        let c = self.val.cos();
        Dual::new(self.val.tan(), self.dot / (c * c))
    }

    pub fn exp(self) -> Self {
        let e = self.val.exp();
        Dual::new(e, e * self.dot)
    }

    /// Caller must reject negative arguments first; at zero the derivative
    /// blows up and is reported as-is.
    pub fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        Dual::new(r, 0.5 * self.dot / r)
    }

    pub fn abs(self) -> Self {
        // signum(0) convention: derivative 0 at the kink.
        let s = if self.val == 0.0 { 0.0 } else { self.val.signum() };
        Dual::new(self.val.abs(), s * self.dot)
    }

    /// Integer power, valid for any base.
    pub fn powi(self, n: i32) -> Self {
        Dual::new(
            self.val.powi(n),
            f64::from(n) * self.val.powi(n - 1) * self.dot,
        )
    }

    /// Real power for positive base; caller guards the domain.
    pub fn powf(self, exp: Dual) -> Self {
        let v = self.val.powf(exp.val);
        // d(f^g) = f^g (g' ln f + g f'/f)
        let dot = v * (exp.dot * self.val.ln() + exp.val * self.dot / self.val);
        Dual::new(v, dot)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.val + rhs.val, self.dot + rhs.dot)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.val - rhs.val, self.dot - rhs.dot)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.val * rhs.val,
            self.dot * rhs.val + self.val * rhs.dot,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        Dual::new(
            self.val / rhs.val,
            (self.dot * rhs.val - self.val * rhs.dot) / (rhs.val * rhs.val),
        )
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.val, -self.dot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6 * (1.0 + x.abs());
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn product_and_chain_rules() {
        let x = Dual::variable(1.3);
        let y = (x * x).sin() * x.exp();
        let f = |t: f64| (t * t).sin() * t.exp();
        assert!((y.val - f(1.3)).abs() < 1e-14);
        assert!((y.dot - fd(f, 1.3)).abs() < 1e-7 * (1.0 + y.dot.abs()));
    }

    #[test]
    fn quotient_rule() {
        let x = Dual::variable(0.7);
        let y = x.sin() / x.cos(); // tan via the quotient
        assert!((y.dot - x.tan().dot).abs() < 1e-12);
    }

    #[test]
    fn integer_power_of_negative_base() {
        let x = Dual::variable(-2.0);
        let y = x.powi(3);
        assert_eq!(y.val, -8.0);
        assert_eq!(y.dot, 12.0);
    }

    #[test]
    fn powf_matches_exp_log_form() {
        let x = Dual::variable(2.5);
        let e = Dual::constant(1.7);
        let y = x.powf(e);
        let want = (e * Dual::new(x.val.ln(), x.dot / x.val)).exp();
        assert!((y.val - want.val).abs() < 1e-12);
        assert!((y.dot - want.dot).abs() < 1e-12);
    }
}
