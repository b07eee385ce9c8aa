//! Brute-force check of `ε Π W R_ε² W Π = p_E(F1 + F2)p_E` on the 0/1-photon
//! sectors of the glued Liouvillian.
//!
//! One-photon states are enumerated explicitly as `(u, k, μ)` with `μ = k̂·Σ`;
//! rotation invariance turns the `(Σ, k̂)` sphere pair into `8π² ∫dμ`.
//! Rows come in four sectors. Only `LeftScattering` survives the restriction
//! to `P_ess ⊗ p_E`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fgr::{FgrGrids, FgrSetting, InteractionG, LevelShiftTable, OverlapEngine, WaveOverlaps};
use crate::quadrature::Rule1d;
use crate::special::{legendre, sph_j};
use crate::thermal::{check_beta, glue_weight, UGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Left particle scattering, right in `φ_E`.
    LeftScattering,
    /// Left particle bound.
    LeftBound,
    /// Right particle scattering, left in `φ_E`.
    RightScattering,
    RightBound,
}

/// Consecutive rows sharing a sector and a photon energy `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub sector: Sector,
    pub u: f64,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleGrids {
    pub u_min: f64,
    pub u_step: f64,
    pub mu_nodes: usize,
    pub fgr: FgrGrids,
}

impl Default for OracleGrids {
    fn default() -> Self {
        OracleGrids { u_min: 1e-4, u_step: 0.2, mu_nodes: 24, fgr: FgrGrids::default() }
    }
}

/// Discretized sectors with one `Π` column.
#[derive(Clone, Debug)]
pub struct ToySectors {
    pub beta: f64,
    pub energy: f64,
    pub ugrid: UGrid,
    pub k: Rule1d,
    pub mu: Rule1d,
    pub blocks: Vec<Block>,
    /// `L_0` on every one-photon row.
    pub l0: Vec<f64>,
    /// `W Π` on every one-photon row.
    pub w: Vec<Complex64>,
    /// `Π W Π`, which must vanish.
    pub pi_w_pi: Complex64,
    /// Table used for the quadrature side, on the same `k` rule.
    pub table: LevelShiftTable,
}

struct Ingredients<'a> {
    setting: &'a FgrSetting,
    g: &'a InteractionG,
    k: Rule1d,
    mu: Rule1d,
    /// `(Gφ_E)^#/κ` stored `[c][a · n_μ + m]`.
    amps: Vec<Vec<Complex64>>,
    /// `∫ u_n j_{l_n}(q_c r) χ u_E dr` per bound state and `q_c`.
    bound: Vec<Vec<f64>>,
}

fn norm_const() -> f64 {
    4.0 * PI * (2.0 * PI).powf(-1.5)
}

/// `(Gφ_E)^#(k)/κ` at `k̂·Σ = μ` for photon wave number `q`: the plane-wave
/// part `F(|k − qΣ|)` plus the phase-shifted partial waves.
fn amplitude(engine: &OverlapEngine, ov: &WaveOverlaps, k: f64, q: f64, c: usize, n_c: usize, mu: f64, p_leg: &[f64]) -> Complex64 {
    let p = (k * k + q * q - 2.0 * k * q * mu).max(0.0).sqrt();
    let mut sc = Complex64::new(0.0, 0.0);
    for l in 0..ov.l_count {
        sc += ov.scattered[l * n_c + c] * ((2 * l + 1) as f64 * p_leg[l]);
    }
    sc * norm_const() + engine.free_amplitude(p)
}

fn photon_index(ugrid: &UGrid) -> (Vec<f64>, Vec<usize>) {
    // wave numbers |u| shared by both signs
    let mut q: Vec<f64> = ugrid.nodes.iter().filter(|&&u| u > 0.0).cloned().collect();
    q.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ugrid
        .nodes
        .iter()
        .map(|u| q.iter().position(|x| (x - u.abs()).abs() <= 1e-15 * x).unwrap())
        .collect();
    (q, idx)
}

fn ingredients<'a>(
    setting: &'a FgrSetting,
    g: &'a InteractionG,
    ugrid: &UGrid,
    k: Rule1d,
    mu_nodes: usize,
) -> (Ingredients<'a>, Vec<usize>) {
    let (q, idx) = photon_index(ugrid);
    let q_wave: Vec<f64> = q.iter().map(|&u| g.wave_number(u)).collect();
    let k_max = *k.nodes.last().unwrap();
    let q_max = q_wave.iter().cloned().fold(0.0, f64::max);
    let engine = OverlapEngine::new(setting, |r| g.chi(r) * setting.phi(r), k_max, q_max);
    let overlaps = engine.overlaps(&k.nodes, &q_wave);
    let mu = Rule1d::gauss(mu_nodes, -1.0, 1.0);
    let l_max = overlaps.iter().map(|o| o.l_count).max().unwrap_or(0).max(1);
    let legs: Vec<Vec<f64>> = mu.nodes.iter().map(|&x| legendre(l_max, x)).collect();
    let n_c = q_wave.len();
    let amps = (0..n_c)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::with_capacity(k.len() * mu.len());
            for (a, &kk) in k.nodes.iter().enumerate() {
                for (m, &x) in mu.nodes.iter().enumerate() {
                    out.push(amplitude(&engine, &overlaps[a], kk, q_wave[c], c, n_c, x, &legs[m]));
                }
            }
            out
        })
        .collect();
    let rule = setting.radial_rule(q_max + 1.0, 16);
    let ue = |r: f64| setting.bound().radial(r) * r;
    let bound = setting
        .states
        .iter()
        .map(|st| {
            let l = st.angular_momentum;
            q_wave
                .iter()
                .map(|&qq| {
                    rule.nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&r, &w)| w * st.radial(r) * r * sph_j(l, qq * r)[l] * g.chi(r) * ue(r))
                        .sum()
                })
                .collect()
        })
        .collect();
    (Ingredients { setting, g, k, mu, amps, bound }, idx)
}

/// Rows of one sector at one photon node: `(L_0, W)` pairs.
fn block_rows(ing: &Ingredients, beta: f64, ugrid: &UGrid, i: usize, c: usize, sector: Sector) -> Vec<(f64, Complex64)> {
    let u = ugrid.nodes[i];
    let e = ing.setting.energy();
    let kappa = ing.g.coupling.value(u.abs());
    // the right factor carries e^{−βu/2}, which swaps the thermal weights
    let (weight, sign) = match sector {
        Sector::LeftScattering | Sector::LeftBound => (glue_weight(beta, u), 1.0),
        Sector::RightScattering | Sector::RightBound => (glue_weight(beta, -u), -1.0),
    };
    let base = sign * weight * kappa * ugrid.weights[i].sqrt();
    let conj = matches!(sector, Sector::LeftScattering | Sector::LeftBound) == (u < 0.0);
    let fix = |z: Complex64| if conj { z.conj() } else { z };
    match sector {
        Sector::LeftScattering | Sector::RightScattering => {
            let mut out = Vec::with_capacity(ing.k.len() * ing.mu.len());
            for a in 0..ing.k.len() {
                let k = ing.k.nodes[a];
                let l0 = if sector == Sector::LeftScattering { k * k - e + u } else { e - k * k + u };
                let rad = (ing.k.weights[a] * k * k).sqrt();
                for m in 0..ing.mu.len() {
                    let amp = ing.amps[c][a * ing.mu.len() + m];
                    let s = base * rad * (8.0 * PI * PI * ing.mu.weights[m]).sqrt();
                    out.push((l0, fix(amp) * s));
                }
            }
            out
        }
        Sector::LeftBound | Sector::RightBound => ing
            .setting
            .states
            .iter()
            .zip(&ing.bound)
            .map(|(st, b)| {
                let d = st.energy - e;
                let l0 = if sector == Sector::LeftBound { d + u } else { -d + u };
                let s = base * (4.0 * PI * (2 * st.angular_momentum + 1) as f64).sqrt();
                (l0, Complex64::new(b[c] * s, 0.0))
            })
            .collect(),
    }
}

const SECTORS: [Sector; 4] = [Sector::LeftScattering, Sector::LeftBound, Sector::RightScattering, Sector::RightBound];

/// Builds the one-photon rows reached from `φ_E ⊗ φ_E ⊗ Ω`.
pub fn assemble_sectors(setting: &FgrSetting, g: &InteractionG, beta: f64, eps_rel: f64, grids: &OracleGrids) -> Result<ToySectors> {
    check_beta(beta)?;
    if !(eps_rel > 0.0) {
        return Err(invalid("ε must be positive"));
    }
    let eps = eps_rel * setting.energy().abs();
    let table = LevelShiftTable::build(setting, g, eps, &grids.fgr)?;
    let ugrid = UGrid::new(grids.u_min, table.omega_max, grids.u_step)?;
    let (ing, idx) = ingredients(setting, g, &ugrid, table.k.clone(), grids.mu_nodes);
    let parts: Vec<Vec<(Sector, f64, Vec<(f64, Complex64)>)>> = (0..ugrid.len())
        .into_par_iter()
        .map(|i| {
            SECTORS.iter().map(|&s| (s, ugrid.nodes[i], block_rows(&ing, beta, &ugrid, i, idx[i], s))).collect()
        })
        .collect();
    let mut blocks = Vec::new();
    let mut l0 = Vec::new();
    let mut w = Vec::new();
    for sector in SECTORS {
        for part in &parts {
            for (s, u, rows) in part {
                if *s != sector {
                    continue;
                }
                blocks.push(Block { sector, u: *u, start: l0.len(), len: rows.len() });
                for (a, b) in rows {
                    l0.push(*a);
                    w.push(*b);
                }
            }
        }
    }
    Ok(ToySectors {
        beta,
        energy: setting.energy(),
        ugrid,
        k: ing.k.clone(),
        mu: ing.mu.clone(),
        blocks,
        l0,
        w,
        // a*(·) always adds a photon
        pi_w_pi: Complex64::new(0.0, 0.0),
        table,
    })
}

impl ToySectors {
    pub fn rows(&self) -> usize {
        self.w.len()
    }

    /// `‖W Π‖²`.
    pub fn column_norm2(&self) -> f64 {
        self.w.iter().map(|z| z.norm_sqr()).sum()
    }

    fn sum_where(&self, eps: f64, keep: impl Fn(&Block) -> bool) -> f64 {
        self.blocks
            .iter()
            .filter(|b| keep(b))
            .map(|b| {
                (b.start..b.start + b.len).map(|r| self.w[r].norm_sqr() / (self.l0[r] * self.l0[r] + eps * eps)).sum::<f64>()
            })
            .sum()
    }
}

/// `Π W (L_0² + ε²)^{-1} W Π` on the rows kept by `P_ess ⊗ p_E`.
pub fn pi_w_resolvent_w_pi(sectors: &ToySectors, eps: f64) -> DMatrix<Complex64> {
    let m = sectors.sum_where(eps, |b| b.sector == Sector::LeftScattering);
    DMatrix::from_element(1, 1, Complex64::new(m, 0.0))
}

/// The same without the restriction.
pub fn pi_w_resolvent_w_pi_unrestricted(sectors: &ToySectors, eps: f64) -> DMatrix<Complex64> {
    DMatrix::from_element(1, 1, Complex64::new(sectors.sum_where(eps, |_| true), 0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSplit {
    /// `ε ×` the `u < 0` rows.
    pub absorption: f64,
    /// `ε ×` the `u > 0` rows.
    pub emission: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    pub rel_diff_absorption: f64,
    pub rel_diff_emission: f64,
}

pub fn branch_split(sectors: &ToySectors, eps: f64) -> Result<BranchSplit> {
    let absorption = eps * sectors.sum_where(eps, |b| b.sector == Sector::LeftScattering && b.u < 0.0);
    let emission = eps * sectors.sum_where(eps, |b| b.sector == Sector::LeftScattering && b.u > 0.0);
    let [f1, f2, ..] = sectors.table.integrals(sectors.beta, eps)?;
    Ok(BranchSplit {
        absorption,
        emission,
        f1,
        f2,
        rel_diff_absorption: rel(absorption, f1),
        rel_diff_emission: rel(emission, f2),
    })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `‖WΠ‖²` on the halved-step photon grid, computed without storing rows.
pub fn refined_column_norm2(setting: &FgrSetting, g: &InteractionG, sectors: &ToySectors, grids: &OracleGrids) -> f64 {
    let ugrid = sectors.ugrid.refined();
    let (ing, idx) = ingredients(setting, g, &ugrid, sectors.k.clone(), grids.mu_nodes);
    (0..ugrid.len())
        .into_par_iter()
        .map(|i| {
            SECTORS
                .iter()
                .map(|&s| block_rows(&ing, sectors.beta, &ugrid, i, idx[i], s).iter().map(|r| r.1.norm_sqr()).sum::<f64>())
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub beta: f64,
    pub eps: f64,
    pub eps_rel: f64,
    /// `ε Π W R² W Π` on the restricted rows.
    pub gamma_matrix: f64,
    /// `p_E(F1 + F2)p_E` by quadrature on the same `k` rule.
    pub gamma_quadrature: f64,
    pub rel_diff: f64,
    pub branch_split: BranchSplit,
    /// `ε ×` the unrestricted sum; never below `gamma_matrix`.
    pub gamma_unrestricted: f64,
    pub min_eigenvalue: f64,
    pub rows: usize,
    pub u_nodes: usize,
    pub column_norm2: f64,
    pub column_norm2_refined: f64,
    pub column_drift: f64,
    pub pi_w_pi: f64,
}

pub fn oracle_check(setting: &FgrSetting, g: &InteractionG, beta: f64, eps_rel: f64, grids: &OracleGrids) -> Result<OracleResult> {
    let eps = eps_rel * setting.energy().abs();
    let sectors = assemble_sectors(setting, g, beta, eps_rel, grids)?;
    let m = pi_w_resolvent_w_pi(&sectors, eps);
    let gamma_matrix = eps * m[(0, 0)].re;
    let split = branch_split(&sectors, eps)?;
    let gamma_quadrature = split.f1 + split.f2;
    let all = pi_w_resolvent_w_pi_unrestricted(&sectors, eps);
    let n0 = sectors.column_norm2();
    let n1 = refined_column_norm2(setting, g, &sectors, grids);
    Ok(OracleResult {
        beta,
        eps,
        eps_rel,
        gamma_matrix,
        gamma_quadrature,
        rel_diff: rel(gamma_matrix, gamma_quadrature),
        gamma_unrestricted: eps * all[(0, 0)].re,
        min_eigenvalue: min_eigenvalue(&m),
        rows: sectors.rows(),
        u_nodes: sectors.ugrid.len(),
        column_norm2: n0,
        column_norm2_refined: n1,
        column_drift: rel(n0, n1),
        pi_w_pi: sectors.pi_w_pi.norm(),
        branch_split: split,
    })
}
