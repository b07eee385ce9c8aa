//! Born series of `φ = e_k − (4π)^{-1} T_{V,|k|} φ` and the decay of its
//! terms and remainders in `|k|`.
//!
//! `T^(n)_{V,κ} ψ(x) = ∫ e^{iκ|x−y|} |x−y|^{n−1} V(y) ψ(y) dy`. For a radial
//! well the `n = 0` operator acts on each partial wave `f(r) P_l(k̂·x̂)` as
//! `f ↦ 4π iκ ∫ j_l(κr<) h_l(κr>) V(r') f(r') r'² dr'`, which is how the
//! high-`|k|` probes are evaluated.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fit::{loglog_slope, SlopeFit};
use crate::potential::Potential;
use crate::quadrature::{breakpoints, lagrange_weights, Rule1d, Vec3};
use crate::scattering::grid::SupportGrid;
use crate::scattering::nystrom::{ball_newton_potential, plane_wave};
use crate::scattering::partial_wave::{i_pow, L_CAP};
use crate::special::{bump, legendre, sph_j, sph_y};

const PER_PANEL: usize = 12;

/// `(T^(n)_{V,κ} ψ)(x)` for `ψ` given at the nodes of `grid`, `n ≤ 3`.
/// For `n = 0` at a grid node the `1/|x−y|` singularity is subtracted and
/// integrated exactly over the support ball.
pub fn apply_t(
    pot: &Potential,
    kappa: f64,
    n: usize,
    grid: &SupportGrid,
    psi: &[Complex64],
    points: &[Vec3],
) -> Result<Vec<Complex64>> {
    if n > 3 {
        return Err(invalid(format!("T^(n) needs n ≤ 3, got {n}")));
    }
    if psi.len() != grid.len() {
        return Err(invalid("field length does not match the support grid"));
    }
    let g: Vec<Complex64> = (0..grid.len()).map(|j| psi[j] * pot.at(&grid.node(j))).collect();
    let out = points
        .par_iter()
        .map(|x| {
            let hit = if n == 0 { (0..grid.len()).find(|&j| (x - grid.node(j)).norm() < 1e-12 * grid.radius) } else { None };
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..grid.len() {
                if Some(j) == hit {
                    continue;
                }
                let d = (x - grid.node(j)).norm();
                let w = grid.weights[j];
                match hit {
                    Some(i) => {
                        let smooth = (Complex64::from_polar(1.0, kappa * d) - 1.0) / d;
                        s += (smooth * g[j] + (g[j] - g[i]) / d) * w;
                    }
                    None => s += Complex64::from_polar(w * d.powi(n as i32 - 1), kappa * d) * g[j],
                }
            }
            if let Some(i) = hit {
                s += g[i] * (ball_newton_potential(grid.radius, x.norm()) + Complex64::new(0.0, kappa) * grid.weights[i]);
            }
            s
        })
        .collect();
    Ok(out)
}

/// `φ₀^(n)(k, ·)` by `n` successive applications of [`apply_t`] on the support grid.
pub fn born_term_on_grid(pot: &Potential, k: Vec3, n: usize, grid: &SupportGrid, points: &[Vec3]) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Ok(points.iter().map(|x| plane_wave(&k, x)).collect());
    }
    let nodes: Vec<Vec3> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let c = -1.0 / (4.0 * PI);
    let mut psi: Vec<Complex64> = nodes.iter().map(|x| plane_wave(&k, x)).collect();
    for _ in 1..n {
        psi = apply_t(pot, k.norm(), 0, grid, &psi, &nodes)?.into_iter().map(|z| z * c).collect();
    }
    Ok(apply_t(pot, k.norm(), 0, grid, &psi, points)?.into_iter().map(|z| z * c).collect())
}

/// Partial-wave factorization of `T_{V,κ}` on Gauss panels over `[0, R]`.
pub struct RadialBorn {
    pub kappa: f64,
    pub l_max: usize,
    pub order: usize,
    rule: Rule1d,
    /// `(first node, node count, a, b)` per panel.
    panels: Vec<(usize, usize, f64, f64)>,
    v: Vec<f64>,
    pot: Potential,
    jn: Vec<Vec<f64>>,
    yn: Vec<Vec<f64>>,
    /// `[l][n]`: `(−4π)^{-n} K_l^n j_l` at the nodes, `n ≤ order`.
    born: Vec<Vec<DVector<Complex64>>>,
    /// `[l][n]`: `(−4π)^{-n} K_l^n R_l` at the nodes, `n ≤ order`.
    rem: Vec<Vec<DVector<Complex64>>>,
}

/// Angular momenta kept for sources inside a ball of radius `r` at wave number `κ`.
pub fn l_cutoff(kappa: f64, r: f64) -> usize {
    let x = kappa * r;
    ((x + 4.0 * x.cbrt() + 16.0).ceil() as usize).min(L_CAP)
}

impl RadialBorn {
    /// Terms and remainders up to `order` applications of `T`.
    pub fn new(pot: &Potential, kappa: f64, order: usize) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid("wave number must be positive"));
        }
        let r = pot.support_radius;
        let width = (r / 8.0).min(1.5 / kappa);
        let brk = breakpoints(0.0, r, &pot.breakpoints());
        let mut fine = vec![0.0];
        for w in brk.windows(2) {
            let m = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
            for i in 1..=m {
                fine.push(w[0] + (w[1] - w[0]) * i as f64 / m as f64);
            }
        }
        let rule = Rule1d::composite(&fine, PER_PANEL);
        let panels = fine.windows(2).enumerate().map(|(p, w)| (p * PER_PANEL, PER_PANEL, w[0], w[1])).collect();
        let l_max = l_cutoff(kappa, r);
        let v: Vec<f64> = rule.nodes.iter().map(|&x| pot.value(x)).collect();
        let jn = rule.nodes.iter().map(|&x| sph_j(l_max, kappa * x)).collect();
        let yn = rule.nodes.iter().map(|&x| sph_y(l_max, kappa * x)).collect();
        let mut rb = RadialBorn {
            kappa,
            l_max,
            order,
            rule,
            panels,
            v,
            pot: pot.clone(),
            jn,
            yn,
            born: Vec::new(),
            rem: Vec::new(),
        };
        let n = rb.rule.len();
        let rows: Vec<Vec<Vec<Complex64>>> = rb.rule.nodes.par_iter().map(|&x| rb.rows(x)).collect();
        let c = Complex64::new(-1.0 / (4.0 * PI), 0.0);
        let per_l: Vec<_> = (0..=l_max)
            .into_par_iter()
            .map(|l| {
                let m = DMatrix::from_fn(n, n, |i, j| rows[i][l][j]);
                let j0 = DVector::from_fn(n, |i, _| Complex64::new(rb.jn[i][l], 0.0));
                let a = DMatrix::<Complex64>::identity(n, n) - &m * c;
                let phi = a.lu().solve(&j0).unwrap_or_else(|| j0.clone());
                let mut born = vec![j0];
                let mut rem = vec![phi];
                for _ in 0..order {
                    born.push(&m * born.last().unwrap() * c);
                    rem.push(&m * rem.last().unwrap() * c);
                }
                (born, rem)
            })
            .collect();
        for (b, r) in per_l {
            rb.born.push(b);
            rb.rem.push(r);
        }
        Ok(rb)
    }

    /// Discretized `K_l` at radius `r` for every `l`, including the factor `4π iκ`.
    fn rows(&self, r: f64) -> Vec<Vec<Complex64>> {
        let n = self.rule.len();
        let kappa = self.kappa;
        let c = Complex64::new(0.0, 4.0 * PI * kappa);
        let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; self.l_max + 1];
        if r <= 0.0 {
            // only l = 0 survives: j_0(0) h_0(κr')
            for j in 0..n {
                let rj = self.rule.nodes[j];
                let h = Complex64::new(self.jn[j][0], self.yn[j][0]);
                out[0][j] = c * h * (self.rule.weights[j] * self.v[j] * rj * rj);
            }
            return out;
        }
        let jr = sph_j(self.l_max, kappa * r);
        let yr = sph_y(self.l_max, kappa * r);
        let green = |l: usize, js: f64, ys: f64, s: f64| -> Complex64 {
            let g = if s <= r { Complex64::new(js * jr[l], js * yr[l]) } else { Complex64::new(jr[l] * js, jr[l] * ys) };
            if g.re.is_finite() && g.im.is_finite() {
                g
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        for &(first, cnt, a, b) in &self.panels {
            if r > a && r < b {
                let xs = &self.rule.nodes[first..first + cnt];
                for sub in [Rule1d::gauss(PER_PANEL, a, r), Rule1d::gauss(PER_PANEL, r, b)] {
                    for (&s, &ws) in sub.nodes.iter().zip(&sub.weights) {
                        let js = sph_j(self.l_max, kappa * s);
                        let ys = sph_y(self.l_max, kappa * s);
                        let lw = lagrange_weights(xs, s);
                        let base = ws * self.pot.value(s) * s * s;
                        if base == 0.0 {
                            continue;
                        }
                        for l in 0..=self.l_max {
                            let g = c * green(l, js[l], ys[l], s) * base;
                            for (q, &lq) in lw.iter().enumerate() {
                                out[l][first + q] += g * lq;
                            }
                        }
                    }
                }
            } else {
                for j in first..first + cnt {
                    let rj = self.rule.nodes[j];
                    let base = self.rule.weights[j] * self.v[j] * rj * rj;
                    if base == 0.0 {
                        continue;
                    }
                    for l in 0..=self.l_max {
                        out[l][j] = c * green(l, self.jn[j][l], self.yn[j][l], rj) * base;
                    }
                }
            }
        }
        out
    }

    /// Radial coefficients at `radii`: `born[n][l][e]` for `1 ≤ n ≤ order` (index `n − 1`)
    /// and `rem[n][l][e]` for `0 ≤ n ≤ order`, `rem[0]` being `R_l` itself.
    pub fn evaluate(&self, radii: &[f64]) -> RadialValues {
        let rows: Vec<Vec<Vec<Complex64>>> = radii.par_iter().map(|&r| self.rows(r)).collect();
        let c = Complex64::new(-1.0 / (4.0 * PI), 0.0);
        let dot = |row: &[Complex64], v: &DVector<Complex64>| -> Complex64 { row.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<Complex64>() * c };
        let nl = self.l_max + 1;
        let mut born = vec![vec![vec![Complex64::new(0.0, 0.0); radii.len()]; nl]; self.order];
        let mut rem = vec![vec![vec![Complex64::new(0.0, 0.0); radii.len()]; nl]; self.order + 1];
        for (e, &r) in radii.iter().enumerate() {
            let jr = sph_j(self.l_max, self.kappa * r);
            for l in 0..nl {
                let row = &rows[e][l];
                for n in 1..=self.order {
                    born[n - 1][l][e] = dot(row, &self.born[l][n - 1]);
                }
                rem[0][l][e] = jr[l] + dot(row, &self.rem[l][0]);
                for n in 1..=self.order {
                    rem[n][l][e] = dot(row, &self.rem[l][n - 1]);
                }
            }
        }
        RadialValues { born, rem }
    }
}

pub struct RadialValues {
    pub born: Vec<Vec<Vec<Complex64>>>,
    pub rem: Vec<Vec<Vec<Complex64>>>,
}

/// `Σ_l (2l+1) i^l a_l(|x|) P_l(k̂·x̂)` at each point.
fn synthesize(coef: &[Vec<Complex64>], k: &Vec3, points: &[Vec3]) -> Vec<Complex64> {
    let lmax = coef.len() - 1;
    let kh = k.normalize();
    points
        .iter()
        .enumerate()
        .map(|(e, x)| {
            let r = x.norm();
            let c = if r == 0.0 { 1.0 } else { kh.dot(x) / r };
            let p = legendre(lmax, c.clamp(-1.0, 1.0));
            (0..=lmax).map(|l| i_pow(l) * coef[l][e] * ((2 * l + 1) as f64 * p[l])).sum()
        })
        .collect()
}

fn radii(points: &[Vec3]) -> Vec<f64> {
    points.iter().map(|x| x.norm()).collect()
}

/// `φ₀^(n)(k, x) = (−4π)^{-n} T^n e_k(x)`.
pub fn born_term(pot: &Potential, k: Vec3, n: usize, points: &[Vec3]) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Ok(points.iter().map(|x| plane_wave(&k, x)).collect());
    }
    if pot.is_zero() {
        return Ok(vec![Complex64::new(0.0, 0.0); points.len()]);
    }
    let rb = RadialBorn::new(pot, k.norm(), n)?;
    let vals = rb.evaluate(&radii(points));
    Ok(synthesize(&vals.born[n - 1], &k, points))
}

/// `φ_R^(n)(k, x) = (−4π)^{-n} T^n φ(k, ·)(x)`; `n = 0` gives `φ` itself.
pub fn born_remainder(pot: &Potential, k: Vec3, n: usize, points: &[Vec3]) -> Result<Vec<Complex64>> {
    if pot.is_zero() {
        if n == 0 {
            return Ok(points.iter().map(|x| plane_wave(&k, x)).collect());
        }
        return Ok(vec![Complex64::new(0.0, 0.0); points.len()]);
    }
    let rb = RadialBorn::new(pot, k.norm(), n)?;
    let vals = rb.evaluate(&radii(points));
    if n == 0 {
        return Ok(plane_plus_scattered(&vals.rem[0], rb.kappa, &k, points));
    }
    Ok(synthesize(&vals.rem[n], &k, points))
}

/// `e_k` plus the partial-wave sum of `R_l − j_l`.
fn plane_plus_scattered(rl: &[Vec<Complex64>], kappa: f64, k: &Vec3, points: &[Vec3]) -> Vec<Complex64> {
    let lmax = rl.len() - 1;
    let diff: Vec<Vec<Complex64>> = (0..=lmax)
        .map(|l| points.iter().enumerate().map(|(e, x)| rl[l][e] - sph_j(lmax, kappa * x.norm())[l]).collect())
        .collect();
    synthesize(&diff, k, points).into_iter().zip(points).map(|(s, x)| s + plane_wave(k, x)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BornExpansion {
    pub order: usize,
    pub k: [f64; 3],
    pub points: Vec<[f64; 3]>,
    /// `φ₀^(n)` for `n = 0..=order`.
    pub terms: Vec<Vec<Complex64>>,
    /// `φ_R^(order+1)`.
    pub remainder: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    /// `max |φ − Σ terms − remainder|`.
    pub identity_residual: f64,
}

pub fn born_expansion(pot: &Potential, k: Vec3, order: usize, points: &[Vec3]) -> Result<BornExpansion> {
    let mut terms = vec![points.iter().map(|x| plane_wave(&k, x)).collect::<Vec<_>>()];
    let (phi, remainder) = if pot.is_zero() {
        for _ in 0..order {
            terms.push(vec![Complex64::new(0.0, 0.0); points.len()]);
        }
        (terms[0].clone(), vec![Complex64::new(0.0, 0.0); points.len()])
    } else {
        let rb = RadialBorn::new(pot, k.norm(), order + 1)?;
        let vals = rb.evaluate(&radii(points));
        for n in 1..=order {
            terms.push(synthesize(&vals.born[n - 1], &k, points));
        }
        (plane_plus_scattered(&vals.rem[0], rb.kappa, &k, points), synthesize(&vals.rem[order + 1], &k, points))
    };
    let identity_residual = (0..points.len())
        .map(|e| {
            let s: Complex64 = terms.iter().map(|t| t[e]).sum::<Complex64>() + remainder[e];
            (phi[e] - s).norm()
        })
        .fold(0.0, f64::max);
    Ok(BornExpansion {
        order,
        k: [k.x, k.y, k.z],
        points: points.iter().map(|x| [x.x, x.y, x.z]).collect(),
        terms,
        remainder,
        phi,
        identity_residual,
    })
}

/// Fixed 50-point evaluation set in `|x| ≤ 2R`: a Fibonacci spiral of directions
/// with radii filling the ball uniformly in volume.
pub fn eval_set(pot: &Potential) -> Vec<Vec3> {
    let n = 50;
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let r = 2.0 * pot.support_radius * ((i as f64 + 0.5) / n as f64).cbrt();
            Vec3::new(s * phi.cos(), s * phi.sin(), z) * r
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub p: usize,
    pub k: Vec<f64>,
    pub sup: Vec<f64>,
    pub fit: SlopeFit,
    /// `−slope`.
    pub exponent: f64,
    /// `⌊(p−1)/2⌋`.
    pub expected: f64,
    pub slack: f64,
    pub passes: bool,
}

/// Exponent of `sup_x |φ_R^(p)(k, x)|` against `|k|` along `direction`.
pub fn remainder_decay_fit(pot: &Potential, p: usize, k_mags: &[f64], direction: Vec3) -> Result<DecayFit> {
    if k_mags.len() < 5 {
        return Err(crate::ThermionError::InsufficientRange(format!("{} magnitudes, need 5", k_mags.len())));
    }
    if direction.norm() == 0.0 {
        return Err(invalid("direction must be nonzero"));
    }
    let dir = direction.normalize();
    let pts = eval_set(pot);
    let sup: Vec<f64> = k_mags
        .iter()
        .map(|&km| born_remainder(pot, dir * km, p, &pts).map(|v| v.iter().map(|z| z.norm()).fold(0.0, f64::max)))
        .collect::<Result<_>>()?;
    let fit = loglog_slope(k_mags, &sup, 5)?;
    let expected = (p.max(1) as f64 - 1.0) / 2.0;
    let expected = expected.floor();
    let slack = 0.3;
    Ok(DecayFit { p, k: k_mags.to_vec(), sup, exponent: -fit.slope, expected, slack, passes: -fit.slope >= expected - slack, fit })
}

/// `g(x) = bump(|x − c| / a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub center: [f64; 3],
    pub radius: f64,
}

impl BumpFunction {
    pub fn eval(&self, x: &Vec3) -> f64 {
        let c = Vec3::new(self.center[0], self.center[1], self.center[2]);
        bump((x - c).norm() / self.radius)
    }

    /// `∫ e^{ik·x} g(x) dx`, by radial quadrature about the centre.
    pub fn fourier(&self, k: &Vec3) -> Complex64 {
        let c = Vec3::new(self.center[0], self.center[1], self.center[2]);
        let kn = k.norm();
        let a = self.radius;
        let width = (a / 20.0).min(1.0 / kn.max(1e-12));
        let rule = Rule1d::panels(0.0, a, width, 16);
        let radial = rule.integrate(|r| {
            let s = if kn * r < 1e-8 { 1.0 } else { (kn * r).sin() / (kn * r) };
            4.0 * PI * bump(r / a) * s * r * r
        });
        Complex64::from_polar(radial, k.dot(&c))
    }

    /// `max_{|α| ≤ n} ‖D^α g‖₁` with central differences on a product grid.
    pub fn derivative_l1(&self, n: usize) -> f64 {
        let c = Vec3::new(self.center[0], self.center[1], self.center[2]);
        let a = self.radius;
        let h = 2e-3 * a;
        let rule = Rule1d::panels(0.0, a, a / 10.0, 12);
        let sphere = crate::quadrature::SphericalRule::gauss_product(8);
        let mut best: f64 = 0.0;
        for alpha in multi_indices(n) {
            let mut total = 0.0;
            for (&r, &wr) in rule.nodes.iter().zip(&rule.weights) {
                for q in 0..sphere.len() {
                    let x = c + sphere.point(q) * r;
                    total += wr * r * r * sphere.weights[q] * diff(&|y: &Vec3| self.eval(y), &x, alpha, h).abs();
                }
            }
            best = best.max(total);
        }
        best
    }
}

fn multi_indices(n: usize) -> Vec<[usize; 3]> {
    let mut v = Vec::new();
    for a in 0..=n {
        for b in 0..=(n - a) {
            for c in 0..=(n - a - b) {
                v.push([a, b, c]);
            }
        }
    }
    v
}

/// Tensor-product central difference `D^α f(x)`.
fn diff(f: &dyn Fn(&Vec3) -> f64, x: &Vec3, alpha: [usize; 3], h: f64) -> f64 {
    let Some(d) = (0..3).find(|&d| alpha[d] > 0) else {
        return f(x);
    };
    let mut rest = alpha;
    let order = rest[d];
    rest[d] = 0;
    let mut e = Vec3::zeros();
    e[d] = h;
    let g = |s: f64| diff(f, &(x + e * s), rest, h);
    match order {
        1 => (g(1.0) - g(-1.0)) / (2.0 * h),
        2 => (g(1.0) - 2.0 * g(0.0) + g(-1.0)) / (h * h),
        _ => (g(2.0) - 2.0 * g(1.0) + 2.0 * g(-1.0) - g(-2.0)) / (2.0 * h * h * h),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationaryPhase {
    pub n: usize,
    pub k: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of `ln |ĝ|` against `ln ⟨k⟩`.
    pub fit: SlopeFit,
    /// `max_{|α| ≤ n} ‖D^α g‖₁`.
    pub derivative_norm: f64,
    /// Smallest `C` with `|ĝ(k)| ≤ C ⟨k⟩^{-n} max ‖D^α g‖₁` on the samples.
    pub constant: f64,
    pub passes: bool,
}

pub fn stationary_phase_probe(g: &BumpFunction, n: usize, k_mags: &[f64], direction: Vec3) -> Result<StationaryPhase> {
    if direction.norm() == 0.0 {
        return Err(invalid("direction must be nonzero"));
    }
    let dir = direction.normalize();
    let values: Vec<f64> = k_mags.iter().map(|&km| g.fourier(&(dir * km)).norm()).collect();
    let bracket: Vec<f64> = k_mags.iter().map(|k| (1.0 + k * k).sqrt()).collect();
    let fit = loglog_slope(&bracket, &values, 5)?;
    let derivative_norm = g.derivative_l1(n);
    let constant = values.iter().zip(&bracket).map(|(v, b)| v * b.powi(n as i32) / derivative_norm).fold(0.0, f64::max);
    let passes = fit.slope <= -(n as f64) + 0.3;
    Ok(StationaryPhase { n, k: k_mags.to_vec(), values, fit, derivative_norm, constant, passes })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InnerProductRow {
    pub k: [f64; 3],
    pub k_prime: [f64; 3],
    pub separation: f64,
    pub value: Complex64,
    /// `|value| (1 + |k − k′|^n)`.
    pub weighted: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InnerProductProbe {
    pub p: usize,
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
    pub rows: Vec<InnerProductRow>,
    pub sup_weighted: f64,
    /// Slope of `ln weighted` against `ln |k − k′|` over the upper half of the sweep.
    pub trend: f64,
    pub bounded: bool,
}

/// Radial coefficients `a_l(r)` of `φ₀^(p)(k, ·)` at `radii`.
fn term_coefficients(pot: &Potential, kappa: f64, p: usize, radii: &[f64], l_need: usize) -> Result<Vec<Vec<Complex64>>> {
    if p == 0 {
        let mut out = vec![vec![Complex64::new(0.0, 0.0); radii.len()]; l_need + 1];
        for (e, &r) in radii.iter().enumerate() {
            let j = sph_j(l_need, kappa * r);
            for l in 0..=l_need {
                out[l][e] = Complex64::new(j[l], 0.0);
            }
        }
        return Ok(out);
    }
    if pot.is_zero() {
        return Ok(vec![vec![Complex64::new(0.0, 0.0); radii.len()]; 1]);
    }
    let rb = RadialBorn::new(pot, kappa, p)?;
    Ok(rb.evaluate(radii).born.swap_remove(p - 1))
}

/// `⟨φ₀^(p)(k,·), χ φ₀^(m)(k′,·)⟩` with `χ(x) = exp(−|x|²/2σ²)`, over pairs.
pub fn inner_product_decay_probe(
    pot: &Potential,
    sigma: f64,
    p: usize,
    m: usize,
    n: usize,
    pairs: &[(Vec3, Vec3)],
) -> Result<InnerProductProbe> {
    if p > 3 || m > 3 || n > 4 {
        return Err(invalid("inner-product probe needs p, m ≤ 3 and n ≤ 4"));
    }
    if !(sigma > 0.0) {
        return Err(invalid("cutoff width must be positive"));
    }
    let r_max = 8.0 * sigma;
    let rule = Rule1d::panels(0.0, r_max, 0.05, 12);
    let chi: Vec<f64> = rule.nodes.iter().map(|r| (-r * r / (2.0 * sigma * sigma)).exp()).collect();
    let mut rows = Vec::with_capacity(pairs.len());
    for (k, kp) in pairs {
        let (ka, kb) = (k.norm(), kp.norm());
        let la = if p == 0 { l_cutoff(ka, r_max) } else { l_cutoff(ka, pot.support_radius) };
        let lb = if m == 0 { l_cutoff(kb, r_max) } else { l_cutoff(kb, pot.support_radius) };
        let l_need = la.min(lb);
        let a = term_coefficients(pot, ka, p, &rule.nodes, l_need)?;
        let b = term_coefficients(pot, kb, m, &rule.nodes, l_need)?;
        let l_top = l_need.min(a.len() - 1).min(b.len() - 1);
        let cos = if ka == 0.0 || kb == 0.0 { 1.0 } else { k.dot(kp) / (ka * kb) };
        let pl = legendre(l_top, cos.clamp(-1.0, 1.0));
        let mut value = Complex64::new(0.0, 0.0);
        for l in 0..=l_top {
            let radial: Complex64 = (0..rule.len())
                .map(|e| a[l][e].conj() * b[l][e] * (rule.weights[e] * chi[e] * rule.nodes[e].powi(2)))
                .sum();
            value += radial * (4.0 * PI * (2 * l + 1) as f64 * pl[l]);
        }
        let sep = (k - kp).norm();
        rows.push(InnerProductRow {
            k: [k.x, k.y, k.z],
            k_prime: [kp.x, kp.y, kp.z],
            separation: sep,
            value,
            weighted: value.norm() * (1.0 + sep.powi(n as i32)),
        });
    }
    let sup_weighted = rows.iter().map(|r| r.weighted).fold(0.0, f64::max);
    let mut upper: Vec<&InnerProductRow> = rows.iter().filter(|r| r.separation > 0.0).collect();
    upper.sort_by(|a, b| a.separation.partial_cmp(&b.separation).unwrap());
    let half = upper.split_off(upper.len() / 2);
    let trend = if half.len() >= 3 {
        let x: Vec<f64> = half.iter().map(|r| r.separation).collect();
        let y: Vec<f64> = half.iter().map(|r| r.weighted).collect();
        loglog_slope(&x, &y, 3).map(|f| f.slope).unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(InnerProductProbe { p, m, n, sigma, rows, sup_weighted, trend, bounded: trend <= 0.3 })
}

/// `count` pairs `(k, k + q u)` with `q` log-spaced in `[q_min, q_max]`.
pub fn separation_pairs(k: Vec3, u: Vec3, q_min: f64, q_max: f64, count: usize) -> Vec<(Vec3, Vec3)> {
    let u = u.normalize();
    crate::fit::logspace(q_min, q_max, count).into_iter().map(|q| (k, k + u * q)).collect()
}
