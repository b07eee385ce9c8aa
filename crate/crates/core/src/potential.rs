//! Compactly supported radial wells and their discrete spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ThermionError};
use crate::fit::line_fit;
use crate::quadrature::Vec3;
use crate::radial::{bound_mismatch, interp_over_r, shoot_bound, FdHamiltonian, RadialGrid};
use crate::scattering::grid::SupportGrid;
use crate::scattering::nystrom::rollnik_operator;
use crate::special::{riccati_k, smooth_step};

const PROFILE_POINTS: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Flat core of depth `V0` on `r ≤ R − s`, C^∞ roll-off to zero on `[R − s, R]`.
    SmoothWell,
    /// Sharp reference well (not smooth; used only as a textbook check).
    SquareWell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub shape: Shape,
    pub depth: f64,
    pub support_radius: f64,
    pub smoothness: f64,
    /// `V(r_i)` on `r_i = i R / (n − 1)`.
    pub profile: Vec<f64>,
}

pub fn make_bump_well(depth: f64, r: f64, smoothness: f64) -> Result<Potential> {
    if !(depth >= 0.0 && depth.is_finite()) {
        return Err(invalid(format!("depth must be ≥ 0, got {depth}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("support radius must be > 0, got {r}")));
    }
    if !(smoothness > 0.0 && smoothness < r) {
        return Err(invalid(format!("smoothness must lie in (0, R), got {smoothness}")));
    }
    Ok(Potential::build(Shape::SmoothWell, depth, r, smoothness))
}

pub fn square_well(depth: f64, a: f64) -> Result<Potential> {
    if !(depth >= 0.0) || !(a > 0.0) {
        return Err(invalid("square well needs depth ≥ 0 and a > 0"));
    }
    Ok(Potential::build(Shape::SquareWell, depth, a, 0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub max_abs_value: f64,
    pub max_abs_d1: f64,
    pub max_abs_d2: f64,
    pub passes: bool,
}

impl Potential {
    fn build(shape: Shape, depth: f64, r: f64, smoothness: f64) -> Self {
        let mut p = Potential { shape, depth, support_radius: r, smoothness, profile: Vec::new() };
        p.profile = (0..PROFILE_POINTS)
            .map(|i| p.value(r * i as f64 / (PROFILE_POINTS - 1) as f64))
            .collect();
        p
    }

    pub fn zero(r: f64) -> Self {
        Self::build(Shape::SmoothWell, 0.0, r, 0.5 * r)
    }

    pub fn is_zero(&self) -> bool {
        self.depth == 0.0
    }

    /// `V(r)`.
    pub fn value(&self, r: f64) -> f64 {
        if self.depth == 0.0 || r >= self.support_radius {
            return 0.0;
        }
        match self.shape {
            Shape::SquareWell => -self.depth,
            Shape::SmoothWell => {
                let core = self.support_radius - self.smoothness;
                -self.depth * smooth_step((r - core) / self.smoothness)
            }
        }
    }

    pub fn at(&self, x: &Vec3) -> f64 {
        self.value(x.norm())
    }

    /// Radii where the profile changes character; quadrature panels break here.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.shape {
            Shape::SquareWell => vec![self.support_radius],
            Shape::SmoothWell => vec![self.support_radius - self.smoothness, self.support_radius],
        }
    }

    /// `‖V‖₂`.
    pub fn l2_norm(&self) -> f64 {
        let rule = crate::quadrature::Rule1d::composite(
            &crate::quadrature::breakpoints(0.0, self.support_radius, &self.breakpoints()),
            24,
        );
        (4.0 * std::f64::consts::PI * rule.integrate(|r| r * r * self.value(r).powi(2))).sqrt()
    }

    /// Value and first two finite-difference derivatives near `r = R`.
    pub fn boundary_smoothness(&self) -> SmoothnessReport {
        let r = self.support_radius;
        let h = 1e-4 * self.smoothness.max(0.01 * r);
        let mut m0: f64 = 0.0;
        let mut m1: f64 = 0.0;
        let mut m2: f64 = 0.0;
        for i in 0..20 {
            let x = r - (i as f64) * h;
            let v = |t: f64| self.value(t);
            m0 = m0.max(v(x).abs());
            m1 = m1.max(((v(x + h) - v(x - h)) / (2.0 * h)).abs());
            m2 = m2.max(((v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h)).abs());
        }
        let tol = 1e-10 * self.depth.max(f64::MIN_POSITIVE);
        let passes = self.shape == Shape::SmoothWell && m0 <= tol && m1 <= tol && m2 <= tol
            || self.depth == 0.0;
        SmoothnessReport { max_abs_value: m0, max_abs_d1: m1, max_abs_d2: m2, passes }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates a serialized potential.
    pub fn from_json(s: &str) -> Result<Self> {
        let p: Potential = serde_json::from_str(s)?;
        let rebuilt = match p.shape {
            Shape::SmoothWell => make_bump_well(p.depth, p.support_radius, p.smoothness)?,
            Shape::SquareWell => square_well(p.depth, p.support_radius)?,
        };
        if rebuilt.profile.len() != p.profile.len()
            || rebuilt.profile.iter().zip(&p.profile).any(|(a, b)| (a - b).abs() > 1e-12 * p.depth.max(1.0))
        {
            return Err(invalid("profile samples disagree with the stored parameters"));
        }
        Ok(rebuilt)
    }
}

/// Bound state with unit-norm radial function `u(r) = r R(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub energy: f64,
    pub angular_momentum: usize,
    /// Fitted exponential rate of `|u(r)|` beyond the support.
    pub decay_rate: f64,
    pub decay_fit_residual: f64,
    /// Relative residual of the radial eigen-equation on the grid.
    pub eigen_residual: f64,
    /// `u(r_i)` on `r_i = i h`.
    pub radial_wavefunction: Vec<f64>,
    pub h: f64,
    pub tail_amplitude: f64,
}

impl BoundState {
    pub fn kappa(&self) -> f64 {
        (-self.energy).sqrt()
    }

    fn last_radius(&self) -> f64 {
        (self.radial_wavefunction.len() - 1) as f64 * self.h
    }

    /// `u(r)/r`.
    pub fn radial(&self, r: f64) -> f64 {
        let rb = self.last_radius();
        if r >= rb {
            let l = self.angular_momentum;
            return self.tail_amplitude * riccati_k(l, self.kappa() * r).0 / r;
        }
        interp_over_r(&self.radial_wavefunction, self.h, self.angular_momentum, r)
    }

    /// `φ(x) = u(r)/(r √4π)`; only meaningful for `l = 0`.
    pub fn phi(&self, x: &Vec3) -> f64 {
        self.radial(x.norm()) / (4.0 * std::f64::consts::PI).sqrt()
    }

    /// Radius beyond which `|u|` is below `eps` relative to its maximum.
    pub fn extent(&self, eps: f64) -> f64 {
        self.last_radius() + (-eps.ln()) / self.kappa()
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    pub box_factor: f64,
    pub fd_points: usize,
    pub ode_steps: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { box_factor: 6.0, fd_points: 3000, ode_steps: 4000 }
    }
}

/// All bound states with `E < −tol` for `l ≤ l_max`, sorted by energy.
pub fn discrete_spectrum(pot: &Potential, l_max: usize, tol: f64) -> Result<Vec<BoundState>> {
    discrete_spectrum_with(pot, l_max, tol, &SpectrumOptions::default())
}

pub fn discrete_spectrum_with(
    pot: &Potential,
    l_max: usize,
    tol: f64,
    opts: &SpectrumOptions,
) -> Result<Vec<BoundState>> {
    if pot.is_zero() {
        return Ok(Vec::new());
    }
    let r = pot.support_radius;
    let vmin = -pot.depth;
    let grid = RadialGrid::with_steps(pot, opts.ode_steps);
    let mut states = Vec::new();
    for l in 0..=l_max {
        let fd = FdHamiltonian::new(pot, l, opts.box_factor * r, opts.fd_points);
        let count = fd.count_below(-tol);
        // one refinement: finer grid and doubled box must agree
        let fine = FdHamiltonian::new(pot, l, 2.0 * opts.box_factor * r, 4 * opts.fd_points);
        let count_fine = fine.count_below(-tol);
        if count != count_fine {
            // a state close to threshold: decide with the shooting mismatch on the exact tail
            let shoot_count = count_by_shooting(&grid, l, vmin, -tol);
            if shoot_count != count_fine && shoot_count != count {
                return Err(ThermionError::NoConvergence(format!(
                    "bound-state count unstable for l={l}: {count} vs {count_fine}"
                )));
            }
        }
        let count = count_fine;
        for j in 0..count {
            let e_fd = fine.eigenvalue(j, vmin, -tol);
            let state = refine_state(&grid, l, e_fd, vmin, tol)?;
            states.push(state);
        }
    }
    states.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    Ok(states)
}

fn count_by_shooting(grid: &RadialGrid, l: usize, lo: f64, hi: f64) -> usize {
    let n = 4000;
    let mut count = 0;
    let mut prev = bound_mismatch(grid, l, lo + 1e-12 * lo.abs());
    for i in 1..=n {
        let e = lo + (hi - lo) * i as f64 / n as f64;
        let m = bound_mismatch(grid, l, e);
        if m.signum() != prev.signum() {
            count += 1;
        }
        prev = m;
    }
    count
}

fn refine_state(grid: &RadialGrid, l: usize, e_fd: f64, vmin: f64, tol: f64) -> Result<BoundState> {
    let mut width = 0.02 * e_fd.abs() + 1e-6;
    for _ in 0..8 {
        let lo = (e_fd - width).max(vmin);
        let hi = (e_fd + width).min(-0.5 * tol);
        if let Some(shot) = shoot_bound(grid, l, lo, hi) {
            return Ok(finish_state(grid, l, shot));
        }
        width *= 2.0;
    }
    Err(ThermionError::NoConvergence(format!("shooting failed to bracket E ≈ {e_fd} (l={l})")))
}

fn finish_state(grid: &RadialGrid, l: usize, shot: crate::radial::ShotState) -> BoundState {
    let h = shot.h;
    let u = &shot.u;
    let e = shot.energy;
    let lf = (l * (l + 1)) as f64;
    let mut res2 = 0.0;
    let mut nrm2 = 0.0;
    for i in 1..u.len() - 1 {
        let r = i as f64 * h;
        let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
        let res = -lap + (lf / (r * r) + grid.v[i] - e) * u[i];
        res2 += res * res;
        nrm2 += u[i] * u[i];
    }
    let scale = grid.v.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + e.abs();
    let eigen_residual = (res2 / nrm2).sqrt() / scale;
    // exponential envelope from the tail
    let rb = (u.len() - 1) as f64 * h;
    let kappa = shot.kappa;
    let pts: Vec<(f64, f64)> = (0..20)
        .map(|i| {
            let r = rb + i as f64 * 0.5 / kappa;
            (r, (shot.tail * riccati_k(l, kappa * r).0).abs().ln())
        })
        .collect();
    let fit = line_fit(&pts).expect("tail fit");
    let resid = (pts.iter().map(|p| (p.1 - fit.intercept - fit.slope * p.0).powi(2)).sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    BoundState {
        energy: e,
        angular_momentum: l,
        decay_rate: -fit.slope,
        decay_fit_residual: resid,
        eigen_residual,
        radial_wavefunction: shot.u,
        h,
        tail_amplitude: shot.tail,
    }
}

/// Smallest singular value of `Id − L_0` across a refinement sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub sigma_min: Vec<f64>,
    pub grid_labels: Vec<String>,
    pub accepted: bool,
    pub resonance_warning: bool,
}

pub fn zero_energy_regularity(pot: &Potential) -> Result<Regularity> {
    zero_energy_regularity_on(pot, &[(16, "lebedev26"), (24, "lebedev38"), (32, "lebedev50")], 0.05)
}

pub fn zero_energy_regularity_on(
    pot: &Potential,
    grids: &[(usize, &str)],
    threshold: f64,
) -> Result<Regularity> {
    let mut sigma = Vec::new();
    let mut labels = Vec::new();
    for &(nr, rule) in grids {
        let grid = SupportGrid::new(pot, nr, rule)?;
        let l0 = rollnik_operator(pot, 0.0, &grid);
        let n = l0.nrows();
        let a = nalgebra::DMatrix::<num_complex::Complex64>::identity(n, n) - l0;
        let sv = a.singular_values();
        let s = sv.iter().copied().fold(f64::INFINITY, f64::min);
        sigma.push(if n == 0 { 1.0 } else { s });
        labels.push(format!("{nr}x{rule}"));
    }
    let last = *sigma.last().unwrap_or(&1.0);
    let prev = if sigma.len() >= 2 { sigma[sigma.len() - 2] } else { last };
    let stable = (last - prev).abs() <= 0.05 * prev.abs().max(last.abs());
    let shrinking = sigma.windows(2).all(|w| w[1] < w[0]) && !stable;
    Ok(Regularity {
        accepted: stable && last >= threshold,
        resonance_warning: shrinking || last < threshold,
        sigma_min: sigma,
        grid_labels: labels,
    })
}

/// Depth at which the `l = 0` channel acquires its `n`-th bound state at zero energy
/// (zero-energy solution with vanishing derivative at the support edge).
pub fn threshold_depth(r: f64, smoothness: f64, n: usize) -> Result<f64> {
    let edge = |depth: f64| -> Result<f64> {
        let pot = make_bump_well(depth, r, smoothness)?;
        let grid = RadialGrid::with_steps(&pot, 4000);
        let u = grid.regular(0, 0.0);
        let a = grid.n;
        Ok((u[a + 1] - u[a - 1]) / u.iter().take(a + 2).fold(0.0_f64, |m, x| m.max(x.abs())))
    };
    // u'(R) changes sign once per new bound state; scan then bisect
    let mut lo = 0.0;
    let mut f_lo = edge(1e-9)?;
    let mut found = 0;
    let mut d = 0.25;
    loop {
        let f = edge(d)?;
        if f.signum() != f_lo.signum() {
            found += 1;
            if found == n {
                let (mut a, mut b) = (lo, d);
                let fa0 = f_lo;
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    let fm = edge(m)?;
                    if fm.signum() == fa0.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return Ok(0.5 * (a + b));
            }
        }
        lo = d;
        f_lo = f;
        d += 0.25;
        if d > 1e5 {
            return Err(ThermionError::NoConvergence("threshold depth not found".into()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(make_bump_well(-1.0, 1.0, 0.2).is_err());
        assert!(make_bump_well(1.0, 0.0, 0.2).is_err());
        assert!(make_bump_well(1.0, 1.0, 1.0).is_err());
        assert!(make_bump_well(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_depth_is_identically_zero() {
        let p = make_bump_well(0.0, 1.0, 0.3).unwrap();
        assert!(p.profile.iter().all(|&v| v == 0.0));
        assert!(discrete_spectrum(&p, 2, 1e-8).unwrap().is_empty());
    }

    #[test]
    fn profile_satisfies_h1() {
        let p = make_bump_well(7.0, 2.0, 0.6).unwrap();
        assert!(p.profile.iter().all(|&v| v <= 0.0 && v >= -7.0));
        assert_eq!(p.value(2.0), 0.0);
        assert_eq!(p.value(3.5), 0.0);
        assert!(p.boundary_smoothness().passes);
        assert!(!square_well(1.0, 1.0).unwrap().boundary_smoothness().passes);
    }

    #[test]
    fn json_round_trip() {
        let p = make_bump_well(3.0, 1.5, 0.5).unwrap();
        let s = p.to_json().unwrap();
        assert_eq!(Potential::from_json(&s).unwrap(), p);
        let tampered = s.replacen("\"depth\": 3.0", "\"depth\": 3.5", 1);
        assert!(Potential::from_json(&tampered).is_err());
    }

    fn square_well_s_count(v0a2: f64) -> usize {
        // textbook condition: a new s-state at sqrt(V0) a = (2n − 1) π / 2
        let root = v0a2.sqrt();
        ((root / std::f64::consts::PI) + 0.5).floor() as usize
    }

    #[test]
    fn shallow_square_well_has_no_bound_state() {
        let p = square_well(2.0, 1.0).unwrap();
        assert_eq!(square_well_s_count(2.0), 0);
        let s = discrete_spectrum(&p, 0, 1e-8).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn square_well_counts_follow_transcendental_condition() {
        for &v0 in &[3.0, 12.0, 30.0] {
            let p = square_well(v0, 1.0).unwrap();
            let s = discrete_spectrum(&p, 0, 1e-6).unwrap();
            assert_eq!(s.len(), square_well_s_count(v0), "V0={v0}");
            for st in &s {
                let q = (v0 + st.energy).sqrt();
                let k = (-st.energy).sqrt();
                assert!((q / q.tan() + k).abs() < 1e-4, "V0={v0} E={}", st.energy);
            }
        }
    }

    #[test]
    fn bound_states_are_normalized_and_decay() {
        let p = make_bump_well(40.0, 1.0, 0.4).unwrap();
        let s = discrete_spectrum(&p, 2, 1e-8).unwrap();
        assert!(!s.is_empty());
        for st in &s {
            assert!(st.energy < 0.0);
            let rule = crate::quadrature::Rule1d::panels(0.0, st.extent(1e-18), 0.05, 10);
            let n2 = rule.integrate(|r| (r * st.radial(r)).powi(2));
            assert!((n2 - 1.0).abs() < 1e-8, "norm {n2}");
            if st.angular_momentum == 0 {
                assert!((st.decay_rate - st.kappa()).abs() < 1e-10);
            }
            assert!(st.eigen_residual < 1e-4, "residual {}", st.eigen_residual);
        }
        for w in s.windows(2) {
            assert!(w[0].energy <= w[1].energy);
        }
    }

    #[test]
    fn energies_match_dense_finite_difference_oracle() {
        let p = make_bump_well(40.0, 1.0, 0.4).unwrap();
        let s = discrete_spectrum(&p, 0, 1e-8).unwrap();
        // independent dense diagonalization with Richardson extrapolation
        let dense = |n: usize| {
            let h = 6.0 / n as f64;
            let m = n - 1;
            let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                let r = (i + 1) as f64 * h;
                a[(i, i)] = 2.0 / (h * h) + p.value(r);
                if i + 1 < m {
                    a[(i, i + 1)] = -1.0 / (h * h);
                    a[(i + 1, i)] = -1.0 / (h * h);
                }
            }
            let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(a)
                .eigenvalues
                .iter()
                .copied()
                .filter(|&e| e < 0.0)
                .collect();
            e.sort_by(|x, y| x.partial_cmp(y).unwrap());
            e
        };
        let e1 = dense(600);
        let e2 = dense(1200);
        assert_eq!(e2.len(), s.len());
        for (i, st) in s.iter().enumerate() {
            let rich = (4.0 * e2[i] - e1[i]) / 3.0;
            assert!((rich - st.energy).abs() < 1e-3 * st.energy.abs(), "{rich} vs {}", st.energy);
        }
    }

    #[test]
    fn count_is_monotone_in_depth() {
        let mut prev = 0;
        for d in [0.5, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0] {
            let p = make_bump_well(d, 1.0, 0.4).unwrap();
            let n = discrete_spectrum(&p, 2, 1e-8).unwrap().len();
            assert!(n >= prev, "depth {d}: {n} < {prev}");
            prev = n;
        }
    }
}
