//! One-dimensional and spherical quadrature rules.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Vec3 = Vector3<f64>;

/// Nodes and weights of a 1-D rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    /// Gauss–Legendre with `n` nodes on `[a, b]`, nodes ascending.
    pub fn gauss(n: usize, a: f64, b: f64) -> Self {
        let n = NonZeroUsize::new(n.max(1)).unwrap();
        let rule = GaussLegendre::new(n);
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        Rule1d {
            nodes: pairs.iter().map(|p| mid + half * p.0).collect(),
            weights: pairs.iter().map(|p| half * p.1).collect(),
        }
    }

    /// Gauss–Legendre panels between consecutive breakpoints.
    pub fn composite(breaks: &[f64], per_panel: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let r = Self::gauss(per_panel, w[0], w[1]);
            nodes.extend(r.nodes);
            weights.extend(r.weights);
        }
        Rule1d { nodes, weights }
    }

    /// Uniform panels of width at most `max_width` on `[a, b]`.
    pub fn panels(a: f64, b: f64, max_width: f64, per_panel: usize) -> Self {
        let n = (((b - a) / max_width).ceil() as usize).max(1);
        let breaks: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        Self::composite(&breaks, per_panel)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Breakpoints splitting `[a, b]` at the given interior points (kept only if inside).
pub fn breakpoints(a: f64, b: f64, interior: &[f64]) -> Vec<f64> {
    let mut v = vec![a];
    let mut inner: Vec<f64> = interior.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|p, q| p.partial_cmp(q).unwrap());
    v.extend(inner);
    v.push(b);
    v
}

/// Node set on the unit sphere with weights summing to 4π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl SphericalRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Vec3 {
        let p = self.points[i];
        Vec3::new(p[0], p[1], p[2])
    }

    /// Lebedev rule with 6, 14, 26, 38 or 50 points.
    pub fn lebedev(n: usize) -> Result<Self> {
        let mut pts = Vec::new();
        let mut w = Vec::new();
        let (orbits, degree): (Vec<(Orbit, f64)>, usize) = match n {
            6 => (vec![(Orbit::A1, 1.0 / 6.0)], 3),
            14 => (vec![(Orbit::A1, 1.0 / 15.0), (Orbit::A3, 3.0 / 40.0)], 5),
            26 => (
                vec![(Orbit::A1, 1.0 / 21.0), (Orbit::A2, 4.0 / 105.0), (Orbit::A3, 9.0 / 280.0)],
                7,
            ),
            38 => (
                vec![
                    (Orbit::A1, 1.0 / 105.0),
                    (Orbit::A3, 9.0 / 280.0),
                    (Orbit::C(0.4597008433809831), 1.0 / 35.0),
                ],
                9,
            ),
            50 => (
                vec![
                    (Orbit::A1, 4.0 / 315.0),
                    (Orbit::A2, 64.0 / 2835.0),
                    (Orbit::A3, 27.0 / 1280.0),
                    (Orbit::B(1.0 / 11f64.sqrt()), 14641.0 / 725760.0),
                ],
                11,
            ),
            _ => return Err(invalid(format!("no Lebedev rule with {n} points"))),
        };
        for (orbit, weight) in orbits {
            let before = pts.len();
            orbit.generate(&mut pts);
            w.extend(std::iter::repeat(4.0 * PI * weight).take(pts.len() - before));
        }
        Ok(SphericalRule { points: pts, weights: w, degree })
    }

    /// Gauss–Legendre in cos θ times a uniform azimuthal rule; exact to degree `2 n_theta - 1`.
    pub fn gauss_product(n_theta: usize) -> Self {
        let g = Rule1d::gauss(n_theta, -1.0, 1.0);
        let n_phi = 2 * n_theta;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (&ct, &wt) in g.nodes.iter().zip(&g.weights) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..n_phi {
                let ph = (j as f64 + 0.5) * dphi;
                points.push([st * ph.cos(), st * ph.sin(), ct]);
                weights.push(wt * dphi);
            }
        }
        SphericalRule { points, weights, degree: 2 * n_theta - 1 }
    }

    /// Smallest Gauss product rule exact to at least `degree`.
    pub fn for_degree(degree: usize) -> Self {
        Self::gauss_product(degree / 2 + 1)
    }

    /// Named rule: `lebedev26`, `gauss12` ...
    pub fn by_name(name: &str) -> Result<Self> {
        if let Some(n) = name.strip_prefix("lebedev") {
            let n: usize = n.parse().map_err(|_| invalid(format!("bad rule name {name}")))?;
            return Self::lebedev(n);
        }
        if let Some(n) = name.strip_prefix("gauss") {
            let n: usize = n.parse().map_err(|_| invalid(format!("bad rule name {name}")))?;
            if n == 0 {
                return Err(invalid("gauss rule needs at least one polar node"));
            }
            return Ok(Self::gauss_product(n));
        }
        Err(invalid(format!("unknown spherical rule {name}")))
    }

    pub fn rotated(&self, rot: &Matrix3<f64>) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| {
                let v = rot * Vec3::new(p[0], p[1], p[2]);
                [v.x, v.y, v.z]
            })
            .collect();
        SphericalRule { points, weights: self.weights.clone(), degree: self.degree }
    }

    pub fn integrate(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.point(i))).sum()
    }
}

enum Orbit {
    A1,
    A2,
    A3,
    B(f64),
    C(f64),
}

impl Orbit {
    fn generate(&self, pts: &mut Vec<[f64; 3]>) {
        let signs = |v: [f64; 3], pts: &mut Vec<[f64; 3]>| {
            let mut seen: Vec<[f64; 3]> = Vec::new();
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        let p = [sx * v[0], sy * v[1], sz * v[2]];
                        let p = p.map(|c: f64| if c == 0.0 { 0.0 } else { c });
                        if !seen.contains(&p) {
                            seen.push(p);
                        }
                    }
                }
            }
            pts.extend(seen);
        };
        let perms = |v: [f64; 3]| -> Vec<[f64; 3]> {
            let idx = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let mut out: Vec<[f64; 3]> = Vec::new();
            for p in idx {
                let q = [v[p[0]], v[p[1]], v[p[2]]];
                if !out.contains(&q) {
                    out.push(q);
                }
            }
            out
        };
        let base: Vec<[f64; 3]> = match *self {
            Orbit::A1 => perms([1.0, 0.0, 0.0]),
            Orbit::A2 => {
                let a = 0.5f64.sqrt();
                perms([0.0, a, a])
            }
            Orbit::A3 => {
                let a = (1.0f64 / 3.0).sqrt();
                vec![[a, a, a]]
            }
            Orbit::B(l) => {
                let m = (1.0 - 2.0 * l * l).sqrt();
                perms([l, l, m])
            }
            Orbit::C(p) => {
                let q = (1.0 - p * p).sqrt();
                perms([p, q, 0.0])
            }
        };
        for b in base {
            signs(b, pts);
        }
    }
}

/// Cumulative integral `∫_{x_0}^{x_i} g` on a uniform grid, fourth order.
pub fn cumulative4(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (g[i - 1] + g[i]);
        }
        return out;
    }
    for i in 1..n {
        let step = if i == 1 {
            h / 24.0 * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3])
        } else if i == n - 1 {
            h / 24.0 * (9.0 * g[n - 1] + 19.0 * g[n - 2] - 5.0 * g[n - 3] + g[n - 4])
        } else {
            h / 24.0 * (-g[i - 2] + 13.0 * g[i - 1] + 13.0 * g[i] - g[i + 1])
        };
        out[i] = out[i - 1] + step;
    }
    out
}

/// Lagrange weights for evaluating at `x` from the nodes `xs`.
pub fn lagrange_weights(xs: &[f64], x: f64) -> Vec<f64> {
    let mut w = vec![1.0; xs.len()];
    for (i, wi) in w.iter_mut().enumerate() {
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                *wi *= (x - xj) / (xs[i] - xj);
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_moment(a: usize, b: usize, c: usize) -> f64 {
        // ∫ x^a y^b z^c dΩ for even exponents via Gamma functions
        fn g(n: f64) -> f64 {
            // Gamma at half-integers and integers
            if (n - n.round()).abs() < 1e-12 {
                (1..n.round() as usize).map(|k| k as f64).product()
            } else {
                let mut v = PI.sqrt();
                let mut x = 0.5;
                while x < n - 1e-9 {
                    v *= x;
                    x += 1.0;
                }
                v
            }
        }
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        let (a, b, c) = (a as f64, b as f64, c as f64);
        2.0 * g((a + 1.0) / 2.0) * g((b + 1.0) / 2.0) * g((c + 1.0) / 2.0)
            / g((a + b + c + 3.0) / 2.0)
    }

    fn check_degree(rule: &SphericalRule) {
        assert!((rule.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-13);
        for p in &rule.points {
            assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - 1.0).abs() < 1e-14);
        }
        let d = rule.degree;
        for a in 0..=d {
            for b in 0..=(d - a) {
                for c in 0..=(d - a - b) {
                    let q = rule.integrate(|v| v.x.powi(a as i32) * v.y.powi(b as i32) * v.z.powi(c as i32));
                    let exact = double_factorial_moment(a, b, c);
                    assert!((q - exact).abs() < 1e-13, "deg {d}: ({a},{b},{c}) {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn lebedev_rules_are_exact_to_their_degree() {
        for (n, _) in [(6, 3), (14, 5), (26, 7), (38, 9), (50, 11)] {
            let r = SphericalRule::lebedev(n).unwrap();
            assert_eq!(r.len(), n);
            check_degree(&r);
        }
    }

    #[test]
    fn lebedev_fails_one_degree_higher() {
        let r = SphericalRule::lebedev(26).unwrap();
        let q = r.integrate(|v| v.x.powi(4) * v.y.powi(4));
        assert!((q - double_factorial_moment(4, 4, 0)).abs() > 1e-6);
    }

    #[test]
    fn gauss_product_exactness() {
        check_degree(&SphericalRule::gauss_product(5));
    }

    #[test]
    fn unknown_lebedev_is_rejected() {
        assert!(SphericalRule::lebedev(7).is_err());
        assert!(SphericalRule::by_name("lebedev26").is_ok());
        assert!(SphericalRule::by_name("spiral").is_err());
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let r = Rule1d::gauss(10, 0.0, 2.0);
        let v = r.integrate(|x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9);
        let c = Rule1d::panels(0.0, 3.0, 0.5, 8);
        assert!((c.integrate(|x| (5.0 * x).cos()) - (15.0f64).sin() / 5.0).abs() < 1e-13);
    }

    #[test]
    fn cumulative4_is_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let g: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
            let c = cumulative4(&g, h);
            (0..n).map(|i| (c[i] - ((i as f64 * h).exp() - 1.0)).abs()).fold(0.0, f64::max)
        };
        let e1 = err(41);
        let e2 = err(81);
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn lagrange_reproduces_cubic() {
        let xs = [0.0, 1.0, 2.5, 3.0];
        let w = lagrange_weights(&xs, 1.7);
        let v: f64 = xs.iter().zip(&w).map(|(x, w)| w * x * x * x).sum();
        assert!((v - 1.7f64.powi(3)).abs() < 1e-12);
    }
}
