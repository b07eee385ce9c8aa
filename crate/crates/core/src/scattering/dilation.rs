//! Dilation generator `A_D = (i/2)(k·∇_k + 3/2)` on momentum space and the
//! discrete Mourre identity `i[q², A_D] = q²`.
//!
//! Radial nodes are log-uniform, `k = e^t`. With `g = k^{3/2} f` the generator
//! is `(i/2) k^{-3/2} ∂_t g`, and an antisymmetric difference in `t` keeps it
//! symmetric for the measure `k² dk dΩ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{KGrid, ProductGrid};
use crate::error::{invalid, Result};
use crate::quadrature::{Rule1d, SphericalRule, Vec3};
use crate::special::bump;

/// Log-uniform momentum grid parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub n_radial: usize,
    pub polar: usize,
}

impl Default for DilationGrid {
    fn default() -> Self {
        DilationGrid { k_min: 0.5, k_max: 8.0, n_radial: 257, polar: 12 }
    }
}

impl DilationGrid {
    /// Halves the step in `t = ln k`.
    pub fn refined(&self) -> Self {
        DilationGrid { n_radial: 2 * self.n_radial - 1, ..self.clone() }
    }

    pub fn step(&self) -> f64 {
        (self.k_max / self.k_min).ln() / (self.n_radial - 1) as f64
    }

    pub fn build(&self) -> Result<KGrid> {
        if !(self.k_min > 0.0 && self.k_max > self.k_min) || self.n_radial < 5 {
            return Err(invalid("log grid needs 0 < k_min < k_max and at least 5 nodes"));
        }
        let h = self.step();
        let t0 = self.k_min.ln();
        let nodes: Vec<f64> = (0..self.n_radial).map(|i| (t0 + h * i as f64).exp()).collect();
        // dk = k dt; the functions vanish at both ends so the trapezoid rule is spectral
        let weights = nodes.iter().map(|k| h * k).collect();
        Ok(ProductGrid { radial: Rule1d { nodes, weights }, angular: SphericalRule::gauss_product(self.polar) })
    }
}

/// `A_D f` for samples in node order, zero outside the grid.
pub fn apply_dilation(grid: &KGrid, h: f64, f: &[Complex64]) -> Vec<Complex64> {
    let (na, nq) = (grid.n_radial(), grid.n_angular());
    let k = &grid.radial.nodes;
    let mut out = vec![Complex64::new(0.0, 0.0); na * nq];
    let g = |a: isize, q: usize| -> Complex64 {
        if a < 0 || a >= na as isize {
            Complex64::new(0.0, 0.0)
        } else {
            f[a as usize * nq + q] * k[a as usize].powf(1.5)
        }
    };
    let half_i = Complex64::new(0.0, 0.5);
    for a in 0..na {
        let ai = a as isize;
        let s = k[a].powf(-1.5) / (12.0 * h);
        for q in 0..nq {
            let d = g(ai - 2, q) - g(ai - 1, q) * 8.0 + g(ai + 1, q) * 8.0 - g(ai + 2, q);
            out[a * nq + q] = half_i * d * s;
        }
    }
    out
}

/// Test functions on momentum space, compactly supported away from `k = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MomentumTest {
    /// `exp(−(|k|−c)²/2w²)`.
    RadialGaussian { center: f64, width: f64 },
    /// Bump in `|k|` on `[c − r, c + r]` times `scale`.
    RadialBump { center: f64, radius: f64, scale: f64 },
    /// Bump in `k` around a point.
    ShiftedBump { center: [f64; 3], radius: f64 },
}

impl MomentumTest {
    pub fn label(&self) -> String {
        match self {
            MomentumTest::RadialGaussian { center, width } => format!("radial_gaussian(c={center},w={width})"),
            MomentumTest::RadialBump { center, radius, scale } => {
                format!("radial_bump(c={center},r={radius},scale={scale})")
            }
            MomentumTest::ShiftedBump { center, radius } => format!("shifted_bump(c={center:?},r={radius})"),
        }
    }

    pub fn eval(&self, k: &Vec3) -> f64 {
        match self {
            MomentumTest::RadialGaussian { center, width } => (-(k.norm() - center).powi(2) / (2.0 * width * width)).exp(),
            MomentumTest::RadialBump { center, radius, scale } => scale * bump((k.norm() - center) / radius),
            MomentumTest::ShiftedBump { center, radius } => {
                let c = Vec3::new(center[0], center[1], center[2]);
                bump((k - c).norm() / radius)
            }
        }
    }

    pub fn battery() -> Vec<MomentumTest> {
        vec![
            MomentumTest::RadialGaussian { center: 3.0, width: 0.35 },
            MomentumTest::RadialBump { center: 1.5, radius: 0.5, scale: 1.0 },
            MomentumTest::RadialBump { center: 1.5, radius: 0.5, scale: 10.0 },
            MomentumTest::ShiftedBump { center: [1.5, 0.0, 1.2], radius: 0.9 },
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MourreRow {
    pub function: String,
    pub defect: f64,
    pub refined_defect: f64,
    /// `|Im ⟨f, i[q², A_D] f⟩| / |⟨f, i[q², A_D] f⟩|`.
    pub form_imag: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MourreReport {
    pub grid: DilationGrid,
    pub rows: Vec<MourreRow>,
    pub defect: f64,
    pub refined_defect: f64,
}

/// Relative defect of `i[q², A_D] f = q² f` and the imaginary part of its form.
pub fn mourre_defect(grid: &KGrid, h: f64, f: &[Complex64]) -> (f64, f64) {
    let nq = grid.n_angular();
    let k2: Vec<f64> = (0..f.len()).map(|i| grid.radial.nodes[i / nq].powi(2)).collect();
    let qf: Vec<Complex64> = f.iter().zip(&k2).map(|(v, k)| v * k).collect();
    let af = apply_dilation(grid, h, f);
    let aqf = apply_dilation(grid, h, &qf);
    let i = Complex64::new(0.0, 1.0);
    let comm: Vec<Complex64> = (0..f.len()).map(|n| i * (af[n] * k2[n] - aqf[n])).collect();
    let diff: Vec<Complex64> = comm.iter().zip(&qf).map(|(a, b)| a - b).collect();
    let defect = (grid.norm2(&diff) / grid.norm2(&qf)).sqrt();
    let form = grid.inner(f, &comm);
    (defect, form.im.abs() / form.norm())
}

pub fn dilation_commutator_check(cfg: &DilationGrid, battery: &[MomentumTest]) -> Result<MourreReport> {
    let fine_cfg = cfg.refined();
    let (coarse, fine) = (cfg.build()?, fine_cfg.build()?);
    let rows: Vec<MourreRow> = battery
        .iter()
        .map(|t| {
            let f = coarse.sample(|k| Complex64::new(t.eval(k), 0.0));
            let (defect, form_imag) = mourre_defect(&coarse, cfg.step(), &f);
            let f = fine.sample(|k| Complex64::new(t.eval(k), 0.0));
            let (refined_defect, _) = mourre_defect(&fine, fine_cfg.step(), &f);
            MourreRow { function: t.label(), defect, refined_defect, form_imag }
        })
        .collect();
    let worst = |g: fn(&MourreRow) -> f64| rows.iter().map(g).fold(0.0, f64::max);
    Ok(MourreReport {
        grid: cfg.clone(),
        defect: worst(|r| r.defect),
        refined_defect: worst(|r| r.refined_defect),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_symmetric() {
        let cfg = DilationGrid { n_radial: 41, polar: 4, ..Default::default() };
        let g = cfg.build().unwrap();
        let a = g.sample(|k| Complex64::new(bump((k.norm() - 2.0) / 1.0), k.z * bump((k.norm() - 2.0) / 1.0)));
        let b = g.sample(|k| Complex64::new(k.x * bump((k.norm() - 1.5) / 0.8), 0.3));
        let lhs = g.inner(&a, &apply_dilation(&g, cfg.step(), &b));
        let rhs = g.inner(&apply_dilation(&g, cfg.step(), &a), &b);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn generator_on_homogeneous_function() {
        // A_D k^{-3/2} = 0 away from the ends
        let cfg = DilationGrid { n_radial: 41, polar: 2, ..Default::default() };
        let g = cfg.build().unwrap();
        let f = g.sample(|k| Complex64::new(k.norm().powf(-1.5), 0.0));
        let af = apply_dilation(&g, cfg.step(), &f);
        let nq = g.n_angular();
        for a in 2..39 {
            assert!(af[a * nq].norm() < 1e-12 * f[a * nq].norm());
        }
    }

    #[test]
    fn mourre_identity_holds_and_converges() {
        let rep = dilation_commutator_check(&DilationGrid::default(), &MomentumTest::battery()).unwrap();
        for r in &rep.rows {
            assert!(r.defect <= 1e-2, "{r:?}");
            assert!(r.refined_defect <= 0.5 * r.defect, "{r:?}");
            assert!(r.form_imag < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn scaling_leaves_the_defect_unchanged() {
        let rep = dilation_commutator_check(&DilationGrid::default(), &MomentumTest::battery()).unwrap();
        assert!((rep.rows[1].defect - rep.rows[2].defect).abs() < 1e-12 * rep.rows[1].defect.max(1e-300));
    }
}
