//! Scattering states of a radial well by partial waves:
//! `φ(k, x) = Σ_l (2l+1) i^l R_l(|k|, |x|) P_l(k̂·x̂)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::potential::Potential;
use crate::quadrature::Vec3;
use crate::radial::{PartialWave, RadialGrid};
use crate::special::{legendre, sph_j, sph_y};

pub const L_CAP: usize = 200;

/// `i^l`.
pub fn i_pow(l: usize) -> Complex64 {
    match l % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[derive(Clone, Debug)]
pub struct PwSolver {
    pub grid: RadialGrid,
    pub support_radius: f64,
    pub free: bool,
}

impl PwSolver {
    /// Grid resolving wave numbers up to `k_max`.
    pub fn new(pot: &Potential, k_max: f64) -> Self {
        PwSolver {
            grid: RadialGrid::for_potential(pot, k_max, 2000),
            support_radius: pot.support_radius,
            free: pot.is_zero(),
        }
    }

    pub fn wave(&self, l: usize, k: f64) -> PartialWave {
        PartialWave::solve(&self.grid, l, k)
    }

    /// Waves `0..=l_max` at `k`.
    pub fn waves(&self, k: f64, l_max: usize) -> Vec<PartialWave> {
        (0..=l_max).map(|l| self.wave(l, k)).collect()
    }

    /// Waves up to the order where the scattering amplitude has died out.
    pub fn significant_waves(&self, k: f64) -> Vec<PartialWave> {
        let mut out = Vec::new();
        let kr = k * self.support_radius;
        for l in 0..=L_CAP {
            let w = self.wave(l, k);
            let small = w.t.norm() < 1e-16;
            out.push(w);
            if small && (l as f64) > kr + 2.0 {
                break;
            }
        }
        out
    }

    /// `φ(k, x)` at several points.
    pub fn phi(&self, k: &Vec3, points: &[Vec3]) -> Vec<Complex64> {
        let kn = k.norm();
        let waves = if self.free || kn == 0.0 { Vec::new() } else { self.significant_waves(kn) };
        points
            .iter()
            .map(|x| {
                let plane = Complex64::from_polar(1.0, k.dot(x));
                if waves.is_empty() {
                    return plane;
                }
                plane + scattered_sum(&waves, k, x)
            })
            .collect()
    }
}

/// `Σ_l (2l+1) i^l (R_l − j_l) P_l(k̂·x̂)`.
pub fn scattered_sum(waves: &[PartialWave], k: &Vec3, x: &Vec3) -> Complex64 {
    let lmax = waves.len() - 1;
    let r = x.norm();
    let kn = k.norm();
    let c = if r == 0.0 { 1.0 } else { k.dot(x) / (kn * r) };
    let p = legendre(lmax, c.clamp(-1.0, 1.0));
    let (j, y) = if r > 0.0 { (sph_j(lmax, kn * r), sph_y(lmax, kn * r)) } else { (sph_j(lmax, 0.0), vec![0.0; lmax + 1]) };
    let mut s = Complex64::new(0.0, 0.0);
    for (l, w) in waves.iter().enumerate() {
        if r == 0.0 && l > 0 {
            break;
        }
        let d = if r == 0.0 { w.radial(0.0) - j[0] } else { w.scattered_with(r, j[l], y[l]) };
        s += i_pow(l) * d * ((2 * l + 1) as f64 * p[l]);
    }
    s
}

/// `R_l(k_a, r_b)` for `l ≤ l_max`, stored `[(l * n_k + a) * n_r + b]`.
#[derive(Clone, Debug)]
pub struct RadialTable {
    pub l_max: usize,
    pub k: Vec<f64>,
    pub r: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl RadialTable {
    pub fn build(solver: &PwSolver, k: &[f64], r: &[f64], l_max: usize) -> Self {
        let nr = r.len();
        let rows: Vec<Vec<Complex64>> = k
            .par_iter()
            .map(|&kk| {
                let mut row = vec![Complex64::new(0.0, 0.0); (l_max + 1) * nr];
                let waves = if solver.free { Vec::new() } else { solver.waves(kk, l_max) };
                for (b, &rr) in r.iter().enumerate() {
                    let j = sph_j(l_max, kk * rr);
                    if solver.free {
                        for l in 0..=l_max {
                            row[l * nr + b] = Complex64::new(j[l], 0.0);
                        }
                        continue;
                    }
                    let y = sph_y(l_max, kk * rr);
                    for (l, w) in waves.iter().enumerate() {
                        row[l * nr + b] = w.scattered_with(rr, j[l], y[l]) + j[l];
                    }
                }
                row
            })
            .collect();
        let nk = k.len();
        let mut values = vec![Complex64::new(0.0, 0.0); (l_max + 1) * nk * nr];
        for (a, row) in rows.iter().enumerate() {
            for l in 0..=l_max {
                let dst = (l * nk + a) * nr;
                values[dst..dst + nr].copy_from_slice(&row[l * nr..(l + 1) * nr]);
            }
        }
        RadialTable { l_max, k: k.to_vec(), r: r.to_vec(), values }
    }

    pub fn get(&self, l: usize, a: usize, b: usize) -> Complex64 {
        self.values[(l * self.k.len() + a) * self.r.len() + b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_bump_well;
    use crate::scattering::grid::SupportGrid;
    use crate::scattering::nystrom::{recover_phi, solve_scattering_state};

    #[test]
    fn free_solver_returns_plane_waves() {
        let pot = Potential::zero(1.0);
        let s = PwSolver::new(&pot, 10.0);
        let k = Vec3::new(1.0, 2.0, -0.5);
        let pts = [Vec3::new(0.3, 0.1, 0.0), Vec3::new(5.0, -1.0, 2.0)];
        for (x, v) in pts.iter().zip(s.phi(&k, &pts)) {
            assert_eq!(v, Complex64::from_polar(1.0, k.dot(x)));
        }
    }

    #[test]
    fn partial_waves_agree_with_nystrom() {
        let pot = make_bump_well(6.0, 1.0, 0.4).unwrap();
        let s = PwSolver::new(&pot, 5.0);
        let k = Vec3::new(0.4, -0.3, 1.1);
        let pts = [Vec3::new(0.2, 0.1, -0.3), Vec3::new(1.5, 0.4, 0.9), Vec3::new(-3.0, 2.0, 0.5)];
        let pw = s.phi(&k, &pts);
        let mut prev = f64::INFINITY;
        for n in [8, 16] {
            let g = SupportGrid::new(&pot, n, "gauss6").unwrap();
            let st = solve_scattering_state(&pot, k, &g, 1e-10).unwrap();
            let ny = recover_phi(&st, &pts);
            let err = ny.iter().zip(&pw).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < prev, "n={n} err={err}");
            prev = err;
        }
        assert!(prev < 1e-2, "{prev}");
    }

    #[test]
    fn phi_solves_the_schrodinger_equation_outside() {
        let pot = make_bump_well(6.0, 1.0, 0.4).unwrap();
        let s = PwSolver::new(&pot, 5.0);
        let k = Vec3::new(0.0, 1.0, 1.0);
        let x = Vec3::new(1.3, -0.4, 0.8);
        let h = 1e-2;
        let mut pts = vec![x];
        for d in 0..3 {
            let mut e = Vec3::zeros();
            e[d] = h;
            pts.extend([x + e, x - e, x + 2.0 * e, x - 2.0 * e]);
        }
        let v = s.phi(&k, &pts);
        let mut lap = Complex64::new(0.0, 0.0);
        for d in 0..3 {
            let b = 1 + 4 * d;
            lap += (-v[b + 2] + 16.0 * v[b] - 30.0 * v[0] + 16.0 * v[b + 1] - v[b + 3]) / (12.0 * h * h);
        }
        let res = (-lap - v[0] * k.norm_squared()).norm();
        assert!(res < 1e-5, "{res}");
    }

    #[test]
    fn table_matches_wave_evaluation() {
        let pot = make_bump_well(6.0, 1.0, 0.4).unwrap();
        let s = PwSolver::new(&pot, 5.0);
        let t = RadialTable::build(&s, &[0.5, 2.0], &[0.3, 1.7], 4);
        for (a, &k) in [0.5, 2.0].iter().enumerate() {
            for (b, &r) in [0.3, 1.7].iter().enumerate() {
                for l in 0..=4 {
                    assert!((t.get(l, a, b) - s.wave(l, k).radial(r)).norm() < 1e-12);
                }
            }
        }
    }
}
