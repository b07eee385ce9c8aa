//! Generalized Fourier transform `f^#(k) = (2π)^{-3/2} ∫ conj(φ(k,x)) f(x) dx`
//! on product grids, its inverse on the continuous subspace and the
//! spectral identities it satisfies.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{eval_grid, kgrid, EvalGrid, KGrid};
use super::partial_wave::{i_pow, PwSolver, RadialTable};
use crate::error::{invalid, Result};
use crate::potential::{discrete_spectrum, BoundState, Potential};
use crate::quadrature::{SphericalRule, Vec3};
use crate::special::legendre_into;

fn norm_c() -> f64 {
    (2.0 * PI).powf(-1.5)
}

/// Grid parameters for the transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformGrids {
    pub x_max: f64,
    pub x_panel: f64,
    pub x_per_panel: usize,
    pub x_polar: usize,
    pub k_max: f64,
    pub k_panels: usize,
    pub k_per_panel: usize,
    pub k_polar: usize,
}

impl Default for TransformGrids {
    fn default() -> Self {
        TransformGrids {
            x_max: 4.0,
            x_panel: 0.2,
            x_per_panel: 10,
            x_polar: 8,
            k_max: 40.0,
            k_panels: 40,
            k_per_panel: 8,
            k_polar: 8,
        }
    }
}

impl TransformGrids {
    /// One refinement step: more nodes, more directions and a longer k range.
    pub fn refined(&self) -> Self {
        TransformGrids {
            x_per_panel: self.x_per_panel + 2,
            x_polar: self.x_polar + 2,
            k_max: 1.25 * self.k_max,
            k_panels: (1.25 * self.k_panels as f64).ceil() as usize,
            k_per_panel: self.k_per_panel + 2,
            k_polar: self.k_polar + 2,
            ..self.clone()
        }
    }

    pub fn build(&self, pot: &Potential) -> Result<(EvalGrid, KGrid)> {
        if self.x_max <= pot.support_radius || self.k_max <= 0.0 {
            return Err(invalid("evaluation box must contain the support and k_max > 0"));
        }
        let x = eval_grid(
            pot,
            self.x_max,
            self.x_panel,
            self.x_per_panel,
            SphericalRule::gauss_product(self.x_polar),
        );
        let k = kgrid(0.0, self.k_max, self.k_panels, self.k_per_panel, SphericalRule::gauss_product(self.k_polar))?;
        Ok((x, k))
    }
}

/// `P_l(a_i · b_j)` for all pairs, stored `[(i * n_b + j) * (l_max + 1) + l]`.
fn legendre_table(a: &SphericalRule, b: &SphericalRule, l_max: usize) -> Vec<f64> {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![0.0; na * nb * (l_max + 1)];
    out.par_chunks_mut(nb * (l_max + 1)).enumerate().for_each(|(i, chunk)| {
        let pa = a.point(i);
        for j in 0..nb {
            let c = pa.dot(&b.point(j)).clamp(-1.0, 1.0);
            legendre_into(c, &mut chunk[j * (l_max + 1)..(j + 1) * (l_max + 1)]);
        }
    });
    out
}

/// Complex matrix as a pair of real matrices, so products run on real GEMM.
#[derive(Clone, Debug)]
struct CMat {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl CMat {
    fn mul(&self, o: &CMat) -> CMat {
        CMat { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }

    fn mul_real(&self, o: &DMatrix<f64>) -> CMat {
        CMat { re: &self.re * o, im: &self.im * o }
    }
}

pub struct Transform {
    pub xgrid: EvalGrid,
    pub kgrid: KGrid,
    pub l_max: usize,
    pub bound: Vec<BoundState>,
    /// `conj(R_l(k_a, r_b)) w_b r_b²`, one `n_k × n_r` block per `l`.
    fwd: Vec<CMat>,
    /// `R_l(k_a, r_b) w_a k_a²` transposed, one `n_r × n_k` block per `l`.
    inv: Vec<CMat>,
    /// `P_l(k̂_q · n_p)`, one `n_q × n_p` block per `l`.
    pl: Vec<DMatrix<f64>>,
    p_xx: Vec<f64>,
    bound_r: Vec<Vec<f64>>,
}

impl Transform {
    /// Angular bandwidth is half the smaller of the two spherical degrees.
    pub fn new(pot: &Potential, bound: Vec<BoundState>, xgrid: EvalGrid, kgrid: KGrid) -> Result<Self> {
        if xgrid.is_empty() || kgrid.is_empty() {
            return Err(invalid("empty grid"));
        }
        if kgrid.radial.nodes.iter().any(|&k| k <= 0.0) {
            return Err(invalid("k-grid must exclude k = 0"));
        }
        let l_max = xgrid.angular.degree.min(kgrid.angular.degree) / 2;
        let k_top = kgrid.radial.nodes.iter().copied().fold(0.0, f64::max);
        let solver = PwSolver::new(pot, k_top);
        let table = RadialTable::build(&solver, &kgrid.radial.nodes, &xgrid.radial.nodes, l_max);
        let (na, nb) = (kgrid.n_radial(), xgrid.n_radial());
        let (nq, np) = (kgrid.n_angular(), xgrid.n_angular());
        let rw: Vec<f64> = (0..nb).map(|b| xgrid.radial.weights[b] * xgrid.radial.nodes[b].powi(2)).collect();
        let kw: Vec<f64> = (0..na).map(|a| kgrid.radial.weights[a] * kgrid.radial.nodes[a].powi(2)).collect();
        let mut fwd = Vec::with_capacity(l_max + 1);
        let mut inv = Vec::with_capacity(l_max + 1);
        for l in 0..=l_max {
            fwd.push(CMat {
                re: DMatrix::from_fn(na, nb, |a, b| table.get(l, a, b).re * rw[b]),
                im: DMatrix::from_fn(na, nb, |a, b| -table.get(l, a, b).im * rw[b]),
            });
            inv.push(CMat {
                re: DMatrix::from_fn(nb, na, |b, a| table.get(l, a, b).re * kw[a]),
                im: DMatrix::from_fn(nb, na, |b, a| table.get(l, a, b).im * kw[a]),
            });
        }
        let p_kx = legendre_table(&kgrid.angular, &xgrid.angular, l_max);
        let pl = (0..=l_max).map(|l| DMatrix::from_fn(nq, np, |q, p| p_kx[(q * np + p) * (l_max + 1) + l])).collect();
        let l_b = bound.iter().map(|b| b.angular_momentum).max().unwrap_or(0);
        let p_xx = legendre_table(&xgrid.angular, &xgrid.angular, l_b);
        let bound_r = bound.iter().map(|b| xgrid.radial.nodes.iter().map(|&r| b.radial(r)).collect()).collect();
        Ok(Transform { xgrid, kgrid, l_max, bound, fwd, inv, pl, p_xx, bound_r })
    }

    pub fn from_grids(pot: &Potential, grids: &TransformGrids) -> Result<Self> {
        let bound = discrete_spectrum(pot, 2, 1e-8)?;
        let (x, k) = grids.build(pot)?;
        Self::new(pot, bound, x, k)
    }

    /// `f^#` on the k-grid from samples of `f` on the evaluation grid.
    pub fn forward(&self, f: &[Complex64]) -> Vec<Complex64> {
        let (nb, np) = (self.xgrid.n_radial(), self.xgrid.n_angular());
        let (na, nq) = (self.kgrid.n_radial(), self.kgrid.n_angular());
        let wa = &self.xgrid.angular.weights;
        // f as an n_r × n_p matrix with the angular weights folded in
        let fm = CMat {
            re: DMatrix::from_fn(nb, np, |b, p| f[b * np + p].re * wa[p]),
            im: DMatrix::from_fn(nb, np, |b, p| f[b * np + p].im * wa[p]),
        };
        let c = norm_c();
        let parts: Vec<CMat> = (0..=self.l_max)
            .into_par_iter()
            .map(|l| {
                // (n_k × n_r) · (n_r × n_p) · (n_p × n_q)
                self.fwd[l].mul(&fm).mul_real(&self.pl[l].transpose())
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); na * nq];
        for (l, part) in parts.iter().enumerate() {
            let coef = i_pow(l).conj() * ((2 * l + 1) as f64 * c);
            for a in 0..na {
                for q in 0..nq {
                    out[a * nq + q] += coef * Complex64::new(part.re[(a, q)], part.im[(a, q)]);
                }
            }
        }
        out
    }

    /// `(2π)^{-3/2} ∫ φ(k, x) g(k) dk` on the evaluation grid.
    pub fn inverse(&self, g: &[Complex64]) -> Vec<Complex64> {
        let (nb, np) = (self.xgrid.n_radial(), self.xgrid.n_angular());
        let (na, nq) = (self.kgrid.n_radial(), self.kgrid.n_angular());
        let wq = &self.kgrid.angular.weights;
        let gm = CMat {
            re: DMatrix::from_fn(na, nq, |a, q| g[a * nq + q].re * wq[q]),
            im: DMatrix::from_fn(na, nq, |a, q| g[a * nq + q].im * wq[q]),
        };
        let c = norm_c();
        let parts: Vec<CMat> = (0..=self.l_max)
            .into_par_iter()
            .map(|l| self.inv[l].mul(&gm.mul_real(&self.pl[l])))
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); nb * np];
        for (l, part) in parts.iter().enumerate() {
            let coef = i_pow(l) * ((2 * l + 1) as f64 * c);
            for b in 0..nb {
                for p in 0..np {
                    out[b * np + p] += coef * Complex64::new(part.re[(b, p)], part.im[(b, p)]);
                }
            }
        }
        out
    }

    /// `Σ_p w_p Σ_b w_b r_b² R_n(r_b) f(b, p)` per direction, for bound state `n`.
    fn radial_moments(&self, n: usize, f: &[Complex64]) -> Vec<Complex64> {
        let (nb, np) = (self.xgrid.n_radial(), self.xgrid.n_angular());
        let mut m = vec![Complex64::new(0.0, 0.0); np];
        for b in 0..nb {
            let r = self.xgrid.radial.nodes[b];
            let w = self.xgrid.radial.weights[b] * r * r * self.bound_r[n][b];
            for p in 0..np {
                m[p] += f[b * np + p] * w;
            }
        }
        m
    }

    fn pl_xx(&self, p: usize, pp: usize, l: usize) -> f64 {
        let np = self.xgrid.n_angular();
        let nl = self.bound.iter().map(|b| b.angular_momentum).max().unwrap_or(0) + 1;
        self.p_xx[(p * np + pp) * nl + l]
    }

    /// `Σ_n |⟨φ_n, f⟩|²` summed over each bound multiplet.
    pub fn bound_weight(&self, f: &[Complex64]) -> f64 {
        let np = self.xgrid.n_angular();
        let wa = &self.xgrid.angular.weights;
        let mut total = 0.0;
        for (n, st) in self.bound.iter().enumerate() {
            let l = st.angular_momentum;
            let m = self.radial_moments(n, f);
            let mut s = Complex64::new(0.0, 0.0);
            for p in 0..np {
                for pp in 0..np {
                    s += m[p] * m[pp].conj() * (wa[p] * wa[pp] * self.pl_xx(p, pp, l));
                }
            }
            total += s.re * (2 * l + 1) as f64 / (4.0 * PI);
        }
        total
    }

    /// `Σ_n ⟨φ_n, f⟩ φ_n` on the evaluation grid.
    pub fn bound_projection(&self, f: &[Complex64]) -> Vec<Complex64> {
        let (nb, np) = (self.xgrid.n_radial(), self.xgrid.n_angular());
        let wa = &self.xgrid.angular.weights;
        let mut out = vec![Complex64::new(0.0, 0.0); nb * np];
        for (n, st) in self.bound.iter().enumerate() {
            let l = st.angular_momentum;
            let m = self.radial_moments(n, f);
            let c = (2 * l + 1) as f64 / (4.0 * PI);
            let ang: Vec<Complex64> = (0..np)
                .map(|p| (0..np).map(|pp| m[pp] * (wa[pp] * self.pl_xx(pp, p, l) * c)).sum())
                .collect();
            for b in 0..nb {
                for p in 0..np {
                    out[b * np + p] += ang[p] * self.bound_r[n][b];
                }
            }
        }
        out
    }
}

/// Transform of a closure, with the mass it carries beyond the evaluation box.
#[derive(Clone, Debug)]
pub struct FourierOutput {
    pub values: Vec<Complex64>,
    pub outside_fraction: f64,
    pub truncation_warning: bool,
}

pub fn generalized_fourier(t: &Transform, f: impl Fn(&Vec3) -> Complex64 + Sync) -> FourierOutput {
    let samples = t.xgrid.sample(&f);
    let inside = t.xgrid.norm2(&samples);
    let x_max = t.xgrid.radial.nodes.last().copied().unwrap_or(0.0) + 1e-9;
    let shell = crate::quadrature::Rule1d::panels(x_max, 3.0 * x_max, 0.25, 6);
    let outer = super::grid::ProductGrid { radial: shell, angular: t.xgrid.angular.clone() };
    let out_mass = outer.norm2(&outer.sample(&f));
    let frac = out_mass / (inside + out_mass).max(f64::MIN_POSITIVE);
    FourierOutput { values: t.forward(&samples), outside_fraction: frac, truncation_warning: frac > 0.01 }
}

/// Smooth test function of the spectral battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    Gaussian { center: [f64; 3], width: f64 },
    DipoleGaussian { width: f64 },
    QuadrupoleGaussian { width: f64 },
    BoundState,
}

impl TestFunction {
    pub fn label(&self) -> String {
        match self {
            TestFunction::Gaussian { center, width } => {
                format!("gaussian(c={:?},w={width})", center)
            }
            TestFunction::DipoleGaussian { width } => format!("x3_gaussian(w={width})"),
            TestFunction::QuadrupoleGaussian { width } => format!("x1x2_gaussian(w={width})"),
            TestFunction::BoundState => "bound_state".into(),
        }
    }

    pub fn eval(&self, x: &Vec3, bound: Option<&BoundState>) -> f64 {
        let g = |c: Vec3, w: f64| (-(x - c).norm_squared() / (2.0 * w * w)).exp();
        match self {
            TestFunction::Gaussian { center, width } => g(Vec3::new(center[0], center[1], center[2]), *width),
            TestFunction::DipoleGaussian { width } => x.z * g(Vec3::zeros(), *width),
            TestFunction::QuadrupoleGaussian { width } => x.x * x.y * g(Vec3::zeros(), *width),
            TestFunction::BoundState => bound.map(|b| b.phi(x)).unwrap_or(0.0),
        }
    }

    pub fn battery() -> Vec<TestFunction> {
        vec![
            TestFunction::Gaussian { center: [0.0, 0.0, 0.0], width: 0.6 },
            TestFunction::Gaussian { center: [0.3, -0.2, 0.25], width: 0.5 },
            TestFunction::DipoleGaussian { width: 0.6 },
            TestFunction::QuadrupoleGaussian { width: 0.6 },
            TestFunction::BoundState,
        ]
    }
}

/// `(−Δ + V) f` by a fourth-order central stencil in each coordinate.
pub fn apply_hamiltonian(pot: &Potential, f: impl Fn(&Vec3) -> f64, x: &Vec3, h: f64) -> f64 {
    let f0 = f(x);
    let mut lap = 0.0;
    for d in 0..3 {
        let mut e = Vec3::zeros();
        e[d] = h;
        lap += (-f(&(x + 2.0 * e)) + 16.0 * f(&(x + e)) - 30.0 * f0 + 16.0 * f(&(x - e)) - f(&(x - 2.0 * e)))
            / (12.0 * h * h);
    }
    -lap + pot.at(x) * f0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub function: String,
    pub parseval_defect: f64,
    pub intertwining_defect: f64,
    pub reconstruction_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub rows: Vec<SpectralRow>,
    pub parseval_defect: f64,
    pub intertwining_defect: f64,
    pub reconstruction_defect: f64,
    /// `‖V_c φ_E‖` for the ground state.
    pub bound_leakage: f64,
}

fn rel(a: &[Complex64], b: &[Complex64], grid: &super::grid::ProductGrid, scale: f64) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    grid.norm2(&d).sqrt() / scale
}

pub fn spectral_identities_check(pot: &Potential, t: &Transform, battery: &[TestFunction]) -> SpectralReport {
    let ground = t.bound.first();
    let k2: Vec<f64> = t.kgrid.points().iter().map(|k| k.norm_squared()).collect();
    let mut rows = Vec::new();
    let mut leakage = 0.0;
    for tf in battery {
        if *tf == TestFunction::BoundState && ground.is_none() {
            continue;
        }
        let f = |x: &Vec3| Complex64::new(tf.eval(x, ground), 0.0);
        let samples = t.xgrid.sample(f);
        let hf = t.xgrid.sample(|x| Complex64::new(apply_hamiltonian(pot, |y| tf.eval(y, ground), x, 2e-3), 0.0));
        let fs = t.forward(&samples);
        let hfs = t.forward(&hf);
        let nf2 = t.xgrid.norm2(&samples);
        let parseval = (t.kgrid.norm2(&fs) + t.bound_weight(&samples) - nf2).abs() / nf2;
        let k2f: Vec<Complex64> = fs.iter().zip(&k2).map(|(v, k)| v * *k).collect();
        let inter = rel(&hfs, &k2f, &t.kgrid, t.xgrid.norm2(&hf).sqrt());
        let cont = t.inverse(&fs);
        let pb = t.bound_projection(&samples);
        let expected: Vec<Complex64> = samples.iter().zip(&pb).map(|(a, b)| a - b).collect();
        let recon = rel(&cont, &expected, &t.xgrid, nf2.sqrt());
        if *tf == TestFunction::BoundState {
            leakage = t.kgrid.norm2(&fs).sqrt() / nf2.sqrt();
        }
        rows.push(SpectralRow {
            function: tf.label(),
            parseval_defect: parseval,
            intertwining_defect: inter,
            reconstruction_defect: recon,
        });
    }
    let worst = |g: fn(&SpectralRow) -> f64| rows.iter().map(g).fold(0.0, f64::max);
    SpectralReport {
        parseval_defect: worst(|r| r.parseval_defect),
        intertwining_defect: worst(|r| r.intertwining_defect),
        reconstruction_defect: worst(|r| r.reconstruction_defect),
        bound_leakage: leakage,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_bump_well;

    fn small_grids() -> TransformGrids {
        TransformGrids { x_max: 4.0, k_max: 10.0, k_panels: 10, x_polar: 8, k_polar: 8, ..Default::default() }
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let pot = Potential::zero(1.0);
        let t = Transform::from_grids(&pot, &small_grids()).unwrap();
        let c = Vec3::new(0.2, 0.0, -0.1);
        let w: f64 = 0.6;
        let out = generalized_fourier(&t, |x| Complex64::new((-(x - c).norm_squared() / (2.0 * w * w)).exp(), 0.0));
        assert!(!out.truncation_warning);
        let mut err: f64 = 0.0;
        for (k, v) in t.kgrid.points().iter().zip(&out.values) {
            let exact = Complex64::from_polar(w.powi(3) * (-k.norm_squared() * w * w / 2.0).exp(), -k.dot(&c));
            err = err.max((v - exact).norm());
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn transform_is_linear() {
        let pot = make_bump_well(8.0, 1.0, 0.4).unwrap();
        let t = Transform::from_grids(&pot, &small_grids()).unwrap();
        let a = t.xgrid.sample(|x| Complex64::new((-x.norm_squared()).exp(), 0.0));
        let b = t.xgrid.sample(|x| Complex64::new(0.0, x.z * (-x.norm_squared()).exp()));
        let s: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * 2.5 + y).collect();
        let (fa, fb, fs) = (t.forward(&a), t.forward(&b), t.forward(&s));
        for i in 0..fs.len() {
            assert!((fs[i] - (fa[i] * 2.5 + fb[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn wide_function_triggers_truncation_warning() {
        let pot = Potential::zero(1.0);
        let t = Transform::from_grids(&pot, &small_grids()).unwrap();
        let out = generalized_fourier(&t, |x| Complex64::new((-x.norm() / 3.0).exp(), 0.0));
        assert!(out.truncation_warning);
    }

    #[test]
    fn free_identities_hold_to_quadrature_precision() {
        let pot = Potential::zero(1.0);
        let g = TransformGrids::default();
        let t = Transform::from_grids(&pot, &g).unwrap();
        let rep = spectral_identities_check(&pot, &t, &TestFunction::battery());
        assert!(rep.parseval_defect < 1e-8, "{rep:?}");
        // off-centre functions are limited by the angular bandwidth
        assert!(rep.reconstruction_defect < 1e-4, "{rep:?}");
        assert!(rep.intertwining_defect < 1e-5, "{rep:?}");
        let t = Transform::from_grids(&pot, &g.refined()).unwrap();
        let fine = spectral_identities_check(&pot, &t, &TestFunction::battery());
        assert!(fine.reconstruction_defect < rep.reconstruction_defect, "{fine:?}");
    }
}
