//! Nyström discretization of the modified Lippmann–Schwinger equation
//! `(Id − L_κ) φ̃ = |V|^{1/2} e_k` on a [`SupportGrid`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SupportGrid;
use crate::error::{Result, ThermionError};
use crate::potential::Potential;
use crate::quadrature::Vec3;

/// `|V|^{1/2}` and `V^{1/2} = |V|^{1/2} sgn V` at the grid nodes.
pub fn root_samples(pot: &Potential, grid: &SupportGrid) -> (Vec<f64>, Vec<f64>) {
    let v: Vec<f64> = (0..grid.len()).map(|i| pot.at(&grid.node(i))).collect();
    let abs: Vec<f64> = v.iter().map(|x| x.abs().sqrt()).collect();
    let signed: Vec<f64> = v.iter().zip(&abs).map(|(x, a)| if *x < 0.0 { -a } else { *a }).collect();
    (abs, signed)
}

/// `∫_{|y|<R} dy/|x−y|`.
pub fn ball_newton_potential(radius: f64, x: f64) -> f64 {
    if x < radius {
        2.0 * PI * (radius * radius - x * x / 3.0)
    } else {
        4.0 * PI * radius.powi(3) / (3.0 * x)
    }
}

/// Dense `L_κ`. The `1/|x−y|` singularity is subtracted and integrated exactly
/// over the support ball; `(e^{iκd} − 1)/d` is smooth and summed directly.
pub fn rollnik_operator(pot: &Potential, kappa: f64, grid: &SupportGrid) -> DMatrix<Complex64> {
    let n = grid.len();
    let (abs, signed) = root_samples(pot, grid);
    let c = -1.0 / (4.0 * PI);
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            if abs[i] == 0.0 {
                return row;
            }
            let xi = grid.node(i);
            let mut singular = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = (xi - grid.node(j)).norm();
                let w = grid.weights[j];
                singular += w / d;
                let smooth = (Complex64::from_polar(1.0, kappa * d) - 1.0) / d;
                row[j] = (smooth + 1.0 / d) * (w * signed[j]);
            }
            let diag = ball_newton_potential(grid.radius, xi.norm()) - singular;
            row[i] = (Complex64::new(0.0, kappa) * grid.weights[i] + diag) * signed[i];
            row.iter_mut().for_each(|z| *z *= c * abs[i]);
            row
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Smallest singular value of `Id − L`.
pub fn sigma_min(l: &DMatrix<Complex64>) -> f64 {
    let n = l.nrows();
    if n == 0 {
        return 1.0;
    }
    let a = DMatrix::<Complex64>::identity(n, n) - l;
    a.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringState {
    pub k: [f64; 3],
    pub phi_tilde: Vec<Complex64>,
    pub grid: SupportGrid,
    pub abs_root: Vec<f64>,
    pub signed_root: Vec<f64>,
    pub residual: f64,
}

impl ScatteringState {
    pub fn kvec(&self) -> Vec3 {
        Vec3::new(self.k[0], self.k[1], self.k[2])
    }
}

pub fn plane_wave(k: &Vec3, x: &Vec3) -> Complex64 {
    Complex64::from_polar(1.0, k.dot(x))
}

/// Solves for `φ̃(k, ·)`; errors when `Id − L_{|k|}` is numerically singular
/// or the residual exceeds `tol`.
pub fn solve_scattering_state(pot: &Potential, k: Vec3, grid: &SupportGrid, tol: f64) -> Result<ScatteringState> {
    let n = grid.len();
    let (abs, signed) = root_samples(pot, grid);
    let l = rollnik_operator(pot, k.norm(), grid);
    let rhs = DVector::from_fn(n, |i, _| plane_wave(&k, &grid.node(i)) * abs[i]);
    let a = DMatrix::<Complex64>::identity(n, n) - &l;
    let lu = a.clone().lu();
    let sol = match lu.solve(&rhs) {
        Some(s) if s.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => s,
        _ => return Err(ThermionError::SingularSystem { sigma_min: sigma_min(&l) }),
    };
    let res = (&a * &sol - &rhs).norm() / rhs.norm().max(1e-300);
    if rhs.norm() > 0.0 && res > tol {
        let s = sigma_min(&l);
        if s < 1e-8 {
            return Err(ThermionError::SingularSystem { sigma_min: s });
        }
        return Err(ThermionError::Residual { residual: res, tol });
    }
    Ok(ScatteringState {
        k: [k.x, k.y, k.z],
        phi_tilde: sol.iter().copied().collect(),
        grid: grid.clone(),
        abs_root: abs,
        signed_root: signed,
        residual: if rhs.norm() > 0.0 { res } else { 0.0 },
    })
}

/// `φ(k, x) = e^{ikx} − (1/4π) Σ_j w_j e^{i|k||x−y_j|}/|x−y_j| V_j^{1/2} φ̃_j`;
/// at a grid node the singular part is treated as in [`rollnik_operator`].
pub fn recover_phi(state: &ScatteringState, points: &[Vec3]) -> Vec<Complex64> {
    let k = state.kvec();
    let kappa = k.norm();
    let g = &state.grid;
    let coef: Vec<Complex64> = (0..g.len()).map(|j| state.phi_tilde[j] * state.signed_root[j]).collect();
    points
        .par_iter()
        .map(|x| {
            let hit = (0..g.len()).find(|&j| (x - g.node(j)).norm() < 1e-12 * g.radius);
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..g.len() {
                if Some(j) == hit {
                    continue;
                }
                let d = (x - g.node(j)).norm();
                let w = g.weights[j];
                match hit {
                    Some(i) => {
                        let smooth = (Complex64::from_polar(1.0, kappa * d) - 1.0) / d;
                        s += (smooth * coef[j] + (coef[j] - coef[i]) / d) * w;
                    }
                    None => s += Complex64::from_polar(w / d, kappa * d) * coef[j],
                }
            }
            if let Some(i) = hit {
                s += coef[i] * (ball_newton_potential(g.radius, x.norm()) + Complex64::new(0.0, kappa) * g.weights[i]);
            }
            plane_wave(&k, x) - s / (4.0 * PI)
        })
        .collect()
}
