//! Product grids in position and momentum space.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::potential::Potential;
use crate::quadrature::{breakpoints, Rule1d, SphericalRule, Vec3};

/// Volume grid of the support ball `|x| < R`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportGrid {
    pub radius: f64,
    pub radial: Rule1d,
    pub angular: SphericalRule,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// `∫_{|y| < r_eff} dy/|y| = 2π r_eff²` for the cell of volume `w_i`.
    pub diagonal_correction: Vec<f64>,
}

impl SupportGrid {
    pub fn new(pot: &Potential, n_radial: usize, rule: &str) -> Result<Self> {
        Self::ball(pot.support_radius, n_radial, SphericalRule::by_name(rule)?)
    }

    pub fn ball(radius: f64, n_radial: usize, angular: SphericalRule) -> Result<Self> {
        if n_radial == 0 || radius <= 0.0 {
            return Err(invalid("support grid needs radial nodes and a positive radius"));
        }
        let radial = Rule1d::gauss(n_radial, 0.0, radius);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
            for (p, &wa) in angular.points.iter().zip(&angular.weights) {
                nodes.push([r * p[0], r * p[1], r * p[2]]);
                weights.push(wr * r * r * wa);
            }
        }
        let diagonal_correction = weights
            .iter()
            .map(|&w| {
                let re = (3.0 * w / (4.0 * PI)).cbrt();
                2.0 * PI * re * re
            })
            .collect();
        Ok(SupportGrid { radius, radial, angular, nodes, weights, diagonal_correction })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> Vec3 {
        let p = self.nodes[i];
        Vec3::new(p[0], p[1], p[2])
    }

    pub fn effective_radius(&self, i: usize) -> f64 {
        (3.0 * self.weights[i] / (4.0 * PI)).cbrt()
    }
}

/// `∫_{|y|<a} e^{iκ|y|}/|y| dy`.
pub fn ball_kernel_integral(kappa: f64, a: f64) -> Complex64 {
    let x = kappa * a;
    if x < 1e-3 {
        4.0 * PI * Complex64::new(a * a / 2.0 - kappa * kappa * a.powi(4) / 8.0, kappa * a.powi(3) / 3.0)
    } else {
        let i = Complex64::i();
        let e = Complex64::from_polar(1.0, x);
        4.0 * PI * (e * (a / (i * kappa) + 1.0 / (kappa * kappa)) - 1.0 / (kappa * kappa))
    }
}

/// Radial × angular product grid (position or momentum space).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductGrid {
    pub radial: Rule1d,
    pub angular: SphericalRule,
}

impl ProductGrid {
    pub fn len(&self) -> usize {
        self.radial.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_radial(&self) -> usize {
        self.radial.len()
    }

    pub fn n_angular(&self) -> usize {
        self.angular.len()
    }

    /// Point with radial index `a` and angular index `q`.
    pub fn point(&self, a: usize, q: usize) -> Vec3 {
        self.angular.point(q) * self.radial.nodes[a]
    }

    /// Volume weight of node `(a, q)`.
    pub fn weight(&self, a: usize, q: usize) -> f64 {
        let r = self.radial.nodes[a];
        self.radial.weights[a] * r * r * self.angular.weights[q]
    }

    pub fn points(&self) -> Vec<Vec3> {
        let mut v = Vec::with_capacity(self.len());
        for a in 0..self.n_radial() {
            for q in 0..self.n_angular() {
                v.push(self.point(a, q));
            }
        }
        v
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for a in 0..self.n_radial() {
            for q in 0..self.n_angular() {
                v.push(self.weight(a, q));
            }
        }
        v
    }

    /// `Σ w |f|²` for samples in node order.
    pub fn norm2(&self, f: &[Complex64]) -> f64 {
        let w = self.weights();
        w.iter().zip(f).map(|(w, v)| w * v.norm_sqr()).sum()
    }

    /// `Σ w conj(f) g`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        let w = self.weights();
        w.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| *w * a.conj() * b).sum()
    }

    pub fn sample(&self, f: impl Fn(&Vec3) -> Complex64 + Sync) -> Vec<Complex64> {
        use rayon::prelude::*;
        let pts = self.points();
        pts.par_iter().map(|x| f(x)).collect()
    }
}

/// Momentum grid; radial nodes are strictly positive.
pub type KGrid = ProductGrid;
/// Position-space evaluation grid.
pub type EvalGrid = ProductGrid;

/// Momentum grid with Gauss panels on `[k_min, k_max]`.
pub fn kgrid(k_min: f64, k_max: f64, panels: usize, per_panel: usize, angular: SphericalRule) -> Result<KGrid> {
    if !(k_min >= 0.0 && k_max > k_min) || panels == 0 || per_panel == 0 {
        return Err(invalid("k-grid needs 0 ≤ k_min < k_max and at least one node"));
    }
    let breaks: Vec<f64> = (0..=panels).map(|i| k_min + (k_max - k_min) * i as f64 / panels as f64).collect();
    Ok(ProductGrid { radial: Rule1d::composite(&breaks, per_panel), angular })
}

/// Position grid on `|x| ≤ x_max` with panel breaks at the potential's breakpoints.
pub fn eval_grid(pot: &Potential, x_max: f64, panel_width: f64, per_panel: usize, angular: SphericalRule) -> EvalGrid {
    let mut brk = pot.breakpoints();
    let mut r = pot.support_radius + panel_width;
    while r < x_max {
        brk.push(r);
        r += panel_width;
    }
    let inner_breaks = breakpoints(0.0, x_max, &brk);
    let mut refined = vec![inner_breaks[0]];
    for w in inner_breaks.windows(2) {
        let n = ((w[1] - w[0]) / panel_width).ceil().max(1.0) as usize;
        for i in 1..=n {
            refined.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
        }
    }
    ProductGrid { radial: Rule1d::composite(&refined, per_panel), angular }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_grid_volume_and_corrections() {
        let g = SupportGrid::ball(1.3, 24, SphericalRule::lebedev(26).unwrap()).unwrap();
        let vol: f64 = g.weights.iter().sum();
        assert!((vol - 4.0 / 3.0 * PI * 1.3f64.powi(3)).abs() < 1e-10 * vol);
        assert!(g.diagonal_correction.iter().all(|&d| d > 0.0));
        assert!(g.nodes.iter().all(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() < 1.3));
    }

    #[test]
    fn ball_integral_limits() {
        let a = 0.2;
        let small = ball_kernel_integral(1e-6, a);
        assert!((small.re - 2.0 * PI * a * a).abs() < 1e-12);
        // compare the two branches near the switch
        let k = 1e-3 / a;
        let s1 = ball_kernel_integral(k * (1.0 - 1e-9), a);
        let s2 = ball_kernel_integral(k * (1.0 + 1e-9), a);
        assert!((s1 - s2).norm() < 1e-9);
        // direct quadrature
        let r = Rule1d::gauss(40, 0.0, a);
        let kk = 7.0;
        let re = r.integrate(|s| 4.0 * PI * s * (kk * s).cos());
        let im = r.integrate(|s| 4.0 * PI * s * (kk * s).sin());
        assert!((ball_kernel_integral(kk, a) - Complex64::new(re, im)).norm() < 1e-12);
    }

    #[test]
    fn gaussian_parseval_on_kgrid() {
        let k = kgrid(0.0, 10.0, 10, 8, SphericalRule::lebedev(26).unwrap()).unwrap();
        assert!(k.radial.nodes.iter().all(|&x| x > 0.0));
        // ∫ e^{-k²} dk = π^{3/2}
        let f = k.sample(|p| Complex64::new((-p.norm_squared() / 2.0).exp(), 0.0));
        assert!((k.norm2(&f) - PI.powf(1.5)).abs() < 1e-10);
    }
}
