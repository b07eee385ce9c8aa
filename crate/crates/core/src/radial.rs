//! Radial Schrödinger equation `u'' = (l(l+1)/r² + V(r) − E) u` on a uniform grid.

use num_complex::Complex64;

use crate::potential::Potential;
use crate::quadrature::{lagrange_weights, Rule1d};
use crate::special::{riccati_k, sph_j, sph_y};

const RESCALE: f64 = 1e150;

/// Uniform grid `r_i = i h` covering the support `[0, R]` in `n` steps, plus
/// `extra` steps into the free region used for matching.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub h: f64,
    pub n: usize,
    pub extra: usize,
    pub v: Vec<f64>,
}

impl RadialGrid {
    /// Grid fine enough that `q h ≤ 0.01` for local wave numbers up to `q_max`.
    pub fn for_potential(pot: &Potential, k_max: f64, min_steps: usize) -> Self {
        let r = pot.support_radius;
        let q = (k_max * k_max + pot.depth).sqrt();
        let n = min_steps.max((100.0 * q * r).ceil() as usize);
        Self::with_steps(pot, n)
    }

    pub fn with_steps(pot: &Potential, n: usize) -> Self {
        let r = pot.support_radius;
        let h = r / n as f64;
        let extra = (n / 8).max(16);
        // mean of one-sided limits, so a jump at a node costs O(h²)
        let v = (0..=n + extra)
            .map(|i| {
                let r = i as f64 * h;
                0.5 * (pot.value(r * (1.0 - 1e-13)) + pot.value(r * (1.0 + 1e-13)))
            })
            .collect();
        RadialGrid { h, n, extra, v }
    }

    pub fn len(&self) -> usize {
        self.n + self.extra + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Regular solution for energy `e`, normalized so that `u_1 = 1` before rescaling.
    pub fn regular(&self, l: usize, e: f64) -> Vec<f64> {
        let h = self.h;
        let m = self.len();
        let mut u = vec![0.0; m];
        let lf = (l * (l + 1)) as f64;
        // exact solution in the constant core
        let q2 = e - self.v[0];
        u[1] = 1.0;
        u[2] = core_ratio(l, q2, h);
        let f = |i: usize| lf / (self.r(i) * self.r(i)) + self.v[i] - e;
        let c = h * h / 12.0;
        let mut f_prev = f(1);
        let mut f_cur = f(2);
        for i in 2..m - 1 {
            let f_next = f(i + 1);
            u[i + 1] = (2.0 * u[i] * (1.0 + 5.0 * c * f_cur) - u[i - 1] * (1.0 - c * f_prev))
                / (1.0 - c * f_next);
            if u[i + 1].abs() > RESCALE {
                for x in u.iter_mut().take(i + 2) {
                    *x /= RESCALE;
                }
            }
            f_prev = f_cur;
            f_cur = f_next;
        }
        u
    }

    /// Simpson-type integral of `g_i` over the grid indices `0..=last`.
    pub fn integrate(&self, g: &[f64], last: usize) -> f64 {
        let mut s = 0.0;
        let n = last;
        if n % 2 == 0 {
            for i in 0..=n {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * g[i];
            }
            s * self.h / 3.0
        } else {
            // Simpson on 0..n-3, 3/8 on the last three intervals
            for i in 0..=n - 3 {
                let w = if i == 0 || i == n - 3 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * g[i];
            }
            s *= self.h / 3.0;
            s + 3.0 * self.h / 8.0 * (g[n - 3] + 3.0 * g[n - 2] + 3.0 * g[n - 1] + g[n])
        }
    }
}

/// `ĵ_l(2 q h) / ĵ_l(q h)` for the free equation with `q² = E − V(0)`
/// (analytically continued for `q² < 0`).
fn core_ratio(l: usize, q2: f64, h: f64) -> f64 {
    // ĵ_l(z) ∝ z^{l+1} Σ_n (−z²/2)^n / (n! Π_{m=1..n}(2l+2m+1)), written in z² = q² r²
    let series = |z2: f64| {
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..200 {
            term *= -z2 / (2.0 * n as f64 * (2 * l + 2 * n + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    };
    let z2a = q2 * h * h;
    2f64.powi(l as i32 + 1) * series(4.0 * z2a) / series(z2a)
}

/// Interpolated `u(r)/r` from grid samples, using the parity of the regular solution.
pub fn interp_over_r(u: &[f64], h: f64, l: usize, r: f64) -> f64 {
    let g = |i: i64| -> f64 {
        let j = i.unsigned_abs() as usize;
        let val = if j == 0 {
            if l == 0 {
                (4.0 * u[1] / h - u[2] / (2.0 * h)) / 3.0
            } else {
                0.0
            }
        } else {
            u[j] / (j as f64 * h)
        };
        if i < 0 && l % 2 == 1 {
            -val
        } else {
            val
        }
    };
    let x = r / h;
    let i0 = (x.floor() as i64).min(u.len() as i64 - 3);
    let idx = [i0 - 1, i0, i0 + 1, i0 + 2];
    let xs: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
    let w = lagrange_weights(&xs, x);
    idx.iter().zip(&w).map(|(&i, &wi)| wi * g(i)).sum()
}

/// One partial wave at momentum `k`: phase data and the interior solution.
#[derive(Clone, Debug)]
pub struct PartialWave {
    pub l: usize,
    pub k: f64,
    /// `e^{iδ} sin δ`.
    pub t: Complex64,
    /// `e^{iδ}`.
    pub phase: Complex64,
    /// Interior samples scaled so that `R_l = e^{iδ} u(r) / r` inside the support.
    pub u: Vec<f64>,
    pub h: f64,
    pub support_radius: f64,
}

impl PartialWave {
    pub fn solve(grid: &RadialGrid, l: usize, k: f64) -> Self {
        if grid.v.iter().all(|&v| v == 0.0) {
            let u = (0..=grid.n).map(|i| riccati_jy(l, k * grid.r(i)).0 / k).collect();
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            return PartialWave { l, k, t: zero, phase: one, u, h: grid.h, support_radius: grid.r(grid.n) };
        }
        let u = grid.regular(l, k * k);
        let (a, b) = (grid.n, grid.n + grid.extra);
        let (ra, rb) = (grid.r(a), grid.r(b));
        let (ja, ya) = riccati_jy(l, k * ra);
        let (jb, yb) = riccati_jy(l, k * rb);
        // u ∝ ĵ cos δ − ŷ sin δ at both matching points
        let num = u[a] * jb - u[b] * ja;
        let den = u[a] * yb - u[b] * ya;
        let delta = (num / den).atan();
        let (s, c) = delta.sin_cos();
        let fa = ja * c - ya * s;
        let fb = jb * c - yb * s;
        let amp = (u[a] * fa + u[b] * fb) / (fa * fa + fb * fb);
        let phase = Complex64::from_polar(1.0, delta);
        let scale = 1.0 / (amp * k);
        let u: Vec<f64> = u[..=a].iter().map(|x| x * scale).collect();
        PartialWave { l, k, t: phase * s, phase, u, h: grid.h, support_radius: ra }
    }

    /// Radial function `R_l(k, r)`.
    pub fn radial(&self, r: f64) -> Complex64 {
        if r >= self.support_radius {
            let x = self.k * r;
            let j = sph_j(self.l, x)[self.l];
            if self.t.norm() == 0.0 {
                return Complex64::new(j, 0.0);
            }
            let y = sph_y(self.l, x)[self.l];
            Complex64::new(j, 0.0) + Complex64::i() * self.t * Complex64::new(j, y)
        } else {
            self.phase * interp_over_r(&self.u, self.h, self.l, r)
        }
    }

    /// `R_l − j_l` from precomputed `j_l(kr)`, `y_l(kr)`.
    pub fn scattered_with(&self, r: f64, j: f64, y: f64) -> Complex64 {
        if r >= self.support_radius {
            if self.t.norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::i() * self.t * Complex64::new(j, y)
        } else {
            self.phase * interp_over_r(&self.u, self.h, self.l, r) - j
        }
    }
}

/// Riccati functions `x j_l(x)`, `x y_l(x)`.
pub fn riccati_jy(l: usize, x: f64) -> (f64, f64) {
    let j = sph_j(l, x)[l];
    let y = sph_y(l, x)[l];
    (x * j, x * y)
}

/// Normalized bound-state radial function obtained by shooting.
#[derive(Clone, Debug)]
pub struct ShotState {
    pub energy: f64,
    pub u: Vec<f64>,
    pub h: f64,
    /// Tail amplitude: `u(r) = tail · k̂_l(κ r)` beyond the last grid point.
    pub tail: f64,
    pub kappa: f64,
}

/// Matching function whose zeros are the bound-state energies.
pub fn bound_mismatch(grid: &RadialGrid, l: usize, e: f64) -> f64 {
    let u = grid.regular(l, e);
    let kappa = (-e).sqrt();
    let (a, b) = (grid.n, grid.n + grid.extra);
    let ka = riccati_k(l, kappa * grid.r(a)).0;
    let kb = riccati_k(l, kappa * grid.r(b)).0;
    let nu = (u[a] * u[a] + u[b] * u[b]).sqrt();
    let nk = (ka * ka + kb * kb).sqrt();
    (u[a] * kb - u[b] * ka) / (nu * nk)
}

/// Refines a bracketed eigenvalue and returns the normalized state.
pub fn shoot_bound(grid: &RadialGrid, l: usize, lo: f64, hi: f64) -> Option<ShotState> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = bound_mismatch(grid, l, a);
    let fb = bound_mismatch(grid, l, b);
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= 1e-15 * m.abs().max(1e-300) {
            break;
        }
        let fm = bound_mismatch(grid, l, m);
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let e = 0.5 * (a + b);
    let kappa = (-e).sqrt();
    let mut u = grid.regular(l, e);
    let last = grid.n + grid.extra;
    u.truncate(last + 1);
    let rb = grid.r(last);
    let kb = riccati_k(l, kappa * rb).0;
    let mut tail = u[last] / kb;
    let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
    let inner = grid.integrate(&sq, last);
    let tail_rule = Rule1d::panels(rb, rb + 60.0 / kappa, 1.0 / kappa, 12);
    let outer = tail_rule.integrate(|r| riccati_k(l, kappa * r).0.powi(2));
    let norm = (inner + tail * tail * outer).sqrt();
    for x in u.iter_mut() {
        *x /= norm;
    }
    tail /= norm;
    Some(ShotState { energy: e, u, h: grid.h, tail, kappa })
}

/// Finite-difference radial Hamiltonian on `(0, box]` with Dirichlet ends.
#[derive(Clone, Debug)]
pub struct FdHamiltonian {
    pub h: f64,
    pub diag: Vec<f64>,
    pub off: f64,
}

impl FdHamiltonian {
    pub fn new(pot: &Potential, l: usize, box_radius: f64, n: usize) -> Self {
        let h = box_radius / n as f64;
        let lf = (l * (l + 1)) as f64;
        let diag = (1..n)
            .map(|i| {
                let r = i as f64 * h;
                2.0 / (h * h) + lf / (r * r) + pot.value(r)
            })
            .collect();
        FdHamiltonian { h, diag, off: -1.0 / (h * h) }
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        let e2 = self.off * self.off;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th eigenvalue (0-based) inside `[lo, hi]` by bisection.
    pub fn eigenvalue(&self, j: usize, lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if b - a <= 1e-14 * m.abs().max(1e-12) {
                break;
            }
            if self.count_below(m) > j {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_bump_well, square_well};

    #[test]
    fn free_partial_waves_have_zero_phase() {
        let pot = make_bump_well(0.0, 1.0, 0.3).unwrap();
        let grid = RadialGrid::for_potential(&pot, 5.0, 1000);
        for l in 0..6 {
            let pw = PartialWave::solve(&grid, l, 2.3);
            assert!(pw.t.norm() < 1e-12, "l={l} t={}", pw.t);
            for &r in &[0.01, 0.3, 0.77, 1.4] {
                let j = sph_j(l, 2.3 * r)[l];
                assert!((pw.radial(r) - j).norm() < 1e-9, "l={l} r={r}");
            }
        }
    }

    #[test]
    fn square_well_s_wave_phase_matches_closed_form() {
        let (v0, a) = (3.0, 1.0);
        let pot = square_well(v0, a).unwrap();
        let grid = RadialGrid::for_potential(&pot, 2.0, 20000);
        let k: f64 = 1.1;
        let q = (k * k + v0).sqrt();
        // tan(ka + δ) = (k/q) tan(qa)
        let delta = ((k / q) * (q * a).tan()).atan() - k * a;
        let pw = PartialWave::solve(&grid, 0, k);
        let t = Complex64::from_polar(1.0, delta) * delta.sin();
        assert!((pw.t - t).norm() < 1e-6, "{} vs {}", pw.t, t);
    }

    #[test]
    fn interior_and_exterior_representations_join() {
        let pot = make_bump_well(8.0, 1.0, 0.4).unwrap();
        let grid = RadialGrid::for_potential(&pot, 4.0, 2000);
        for l in 0..4 {
            let pw = PartialWave::solve(&grid, l, 1.7);
            let inside = pw.radial(1.0 - 1e-9);
            let outside = pw.radial(1.0);
            assert!((inside - outside).norm() < 1e-7, "l={l}");
        }
    }

    #[test]
    fn square_well_ground_state_energy() {
        // ka cot(qa)... : q cot(q a) = −κ with q² + κ² = V0
        let (v0, a) = (10.0, 1.0);
        let pot = square_well(v0, a).unwrap();
        let grid = RadialGrid::with_steps(&pot, 20000);
        let st = shoot_bound(&grid, 0, -9.9, -0.01).unwrap();
        let q = (v0 + st.energy).sqrt();
        let kappa = (-st.energy).sqrt();
        assert!((q / (q * a).tan() + kappa).abs() < 1e-5);
    }

    #[test]
    fn sturm_count_matches_dense_diagonalization() {
        let pot = make_bump_well(40.0, 1.0, 0.5).unwrap();
        let fd = FdHamiltonian::new(&pot, 0, 6.0, 300);
        let n = fd.diag.len();
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = fd.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = fd.off;
                m[(i + 1, i)] = fd.off;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
        let neg = eig.iter().filter(|&&e| e < 0.0).count();
        assert_eq!(neg, fd.count_below(0.0));
        let mut sorted: Vec<f64> = eig.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let e0 = fd.eigenvalue(0, -40.0, 0.0);
        assert!((e0 - sorted[0]).abs() < 1e-9);
    }
}
