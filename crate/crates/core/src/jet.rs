//! Truncated Taylor arithmetic used for exact low-order derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ORDER: usize = 3;

/// Taylor coefficients `c_k` of `f(x0 + t) = sum c_k t^k`, `k ≤ 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; ORDER + 1],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { c: [v, 0.0, 0.0, 0.0] }
    }

    pub fn variable(x: f64) -> Self {
        Jet { c: [x, 1.0, 0.0, 0.0] }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `d^j f / dx^j` at the expansion point.
    pub fn derivative(&self, j: usize) -> f64 {
        const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
        self.c[j] * FACT[j]
    }

    pub fn scale(self, a: f64) -> Self {
        Jet { c: self.c.map(|v| a * v) }
    }

    pub fn exp(self) -> Self {
        let mut e = [0.0; 4];
        e[0] = self.c[0].exp();
        fill_exp(&self.c, &mut e);
        Jet { c: e }
    }

    /// `exp(x) - 1`, accurate for small values.
    pub fn exp_m1(self) -> Self {
        let mut e = [0.0; 4];
        e[0] = self.c[0].exp();
        fill_exp(&self.c, &mut e);
        e[0] = self.c[0].exp_m1();
        Jet { c: e }
    }

    pub fn sqrt(self) -> Self {
        let g = self.c;
        let mut s = [0.0; 4];
        s[0] = g[0].sqrt();
        for k in 1..=ORDER {
            let mut acc = g[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        Jet { c: s }
    }

    pub fn ln(self) -> Self {
        let g = self.c;
        let mut l = [0.0; 4];
        l[0] = g[0].ln();
        for k in 1..=ORDER {
            let mut acc = g[k];
            for j in 1..k {
                acc -= j as f64 * l[j] * g[k - j] / k as f64;
            }
            l[k] = acc / g[0];
        }
        Jet { c: l }
    }

    pub fn powf(self, p: f64) -> Self {
        (self.ln().scale(p)).exp()
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0) / self
    }
}

fn fill_exp(g: &[f64; 4], e: &mut [f64; 4]) {
    for k in 1..=ORDER {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * g[j] * e[k - j];
        }
        e[k] = acc / k as f64;
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(o.c) {
            *a += b;
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; 4];
        for i in 0..=ORDER {
            for j in 0..=(ORDER - i) {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; 4];
        for k in 0..=ORDER {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= o.c[j] * q[k - j];
            }
            q[k] = acc / o.c[0];
        }
        Jet { c: q }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, a: f64) -> Jet {
        self.c[0] += a;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, a: f64) -> Jet {
        self.scale(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_composite_function() {
        // f(x) = sqrt(x) * exp(-x^2) / (1 + x)
        let x0 = 0.7;
        let x = Jet::variable(x0);
        let f = x.sqrt() * (-(x * x)).exp() / (x + 1.0);
        let g = |x: f64| x.sqrt() * (-x * x).exp() / (1.0 + x);
        let h = 1e-3;
        let d1 = (g(x0 + h) - g(x0 - h)) / (2.0 * h);
        let d2 = (g(x0 + h) - 2.0 * g(x0) + g(x0 - h)) / (h * h);
        let d3 = (g(x0 + 2.0 * h) - 2.0 * g(x0 + h) + 2.0 * g(x0 - h) - g(x0 - 2.0 * h)) / (2.0 * h.powi(3));
        assert!((f.value() - g(x0)).abs() < 1e-15);
        assert!((f.derivative(1) - d1).abs() < 1e-6);
        assert!((f.derivative(2) - d2).abs() < 1e-5);
        assert!((f.derivative(3) - d3).abs() < 1e-4);
    }

    #[test]
    fn exp_m1_keeps_small_values() {
        let j = Jet::variable(1e-12).exp_m1();
        assert_eq!(j.value(), 1e-12f64.exp_m1());
        assert!((j.derivative(1) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn powf_matches_power_rule() {
        let j = Jet::variable(2.0).powf(-0.5);
        assert!((j.derivative(1) + 0.5 * 2f64.powf(-1.5)).abs() < 1e-15);
        assert!((j.derivative(2) - 0.75 * 2f64.powf(-2.5)).abs() < 1e-15);
    }
}
