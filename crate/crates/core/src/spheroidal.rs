//! The two-centre integral
//! `I = ∫ e^{iκ|x−y|} |x−y|^{n₁−1} V(y) e^{iκ|x′−y|} |x′−y|^{n₂−1} dy`
//! by direct quadrature and in prolate spheroidal coordinates, where it
//! becomes `∫_D^∞ e^{2iκξ} h(ξ) dξ`.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ThermionError};
use crate::fit::{loglog_slope, SlopeFit};
use crate::potential::Potential;
use crate::quadrature::{Rule1d, SphericalRule, Vec3};

/// Foci `x`, `x′`, half-distance `D`, half-sum norm `E` and a rotation taking
/// `e₃` to `(x − x′)/|x − x′|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProlateFrame {
    pub x: [f64; 3],
    pub x_prime: [f64; 3],
    pub d: f64,
    pub e: f64,
    pub rotation: Matrix3<f64>,
    pub degenerate: bool,
}

impl ProlateFrame {
    pub fn new(x: Vec3, xp: Vec3) -> Self {
        let diff = x - xp;
        let d = 0.5 * diff.norm();
        let e = 0.5 * (x + xp).norm();
        let degenerate = d <= 1e-14 * (1.0 + e);
        let rotation = if degenerate { Matrix3::identity() } else { rotation_to(diff / (2.0 * d)) };
        ProlateFrame { x: [x.x, x.y, x.z], x_prime: [xp.x, xp.y, xp.z], d: if degenerate { 0.0 } else { d }, e, rotation, degenerate }
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (Vec3::from(self.x) + Vec3::from(self.x_prime))
    }
}

/// Orthogonal matrix with third column `u`.
fn rotation_to(u: Vec3) -> Matrix3<f64> {
    let helper = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let a = (helper - u * helper.dot(&u)).normalize();
    let b = u.cross(&a);
    Matrix3::from_columns(&[a, b, u])
}

/// `Φ(ξ, η, φ)` and the jacobian `(ξ + Dη)(ξ − Dη)`, so that
/// `|x − y| = ξ + Dη` and `|x′ − y| = ξ − Dη`.
pub fn prolate_map(frame: &ProlateFrame, xi: f64, eta: f64, phi: f64) -> Result<(Vec3, f64)> {
    let d = frame.d;
    if xi < d || !(-1.0..=1.0).contains(&eta) {
        return Err(ThermionError::OutOfDomain(format!("ξ = {xi} < D = {d} or |η| > 1")));
    }
    let rho = ((xi * xi - d * d) * (1.0 - eta * eta)).max(0.0).sqrt();
    let local = Vec3::new(rho * phi.cos(), rho * phi.sin(), -xi * eta);
    Ok((frame.center() + frame.rotation * local, (xi + d * eta) * (xi - d * eta)))
}

fn kernel(kappa: f64, dist: f64, n: usize) -> Complex64 {
    Complex64::from_polar(dist.powi(n as i32 - 1), kappa * dist)
}

/// Resolution of [`klein_zemach_direct`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectOptions {
    pub polar: usize,
    pub panel: f64,
    pub per_panel: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions { polar: 80, panel: 0.04, per_panel: 16 }
    }
}

impl DirectOptions {
    /// Largest `κ` the angular rule resolves.
    pub fn kappa_budget(&self) -> f64 {
        self.polar as f64 / 16.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectValue {
    pub value: Complex64,
    pub accuracy_warning: bool,
}

/// Direct quadrature. A smooth partition `d′⁸/(d⁸ + d′⁸)` splits the integrand
/// into one piece singular only at `x` and one only at `x′`; each is integrated in
/// spherical coordinates about its singular point, where the `s²` jacobian
/// cancels `1/s`.
pub fn klein_zemach_direct(
    pot: &Potential,
    x: Vec3,
    xp: Vec3,
    kappa: f64,
    n1: usize,
    n2: usize,
    opts: &DirectOptions,
) -> Result<DirectValue> {
    check_orders(n1, n2)?;
    let warn = kappa > opts.kappa_budget();
    if pot.is_zero() {
        return Ok(DirectValue { value: Complex64::new(0.0, 0.0), accuracy_warning: warn });
    }
    let f = |y: &Vec3| -> Complex64 {
        let v = pot.at(y);
        if v == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        kernel(kappa, (x - y).norm(), n1) * kernel(kappa, (xp - y).norm(), n2) * v
    };
    let value = if (x - xp).norm() == 0.0 {
        about(pot, &x, opts, |y| f(y))
    } else {
        let part = |y: &Vec3| {
            let a = (x - y).norm_squared().powi(4);
            let b = (xp - y).norm_squared().powi(4);
            b / (a + b)
        };
        about(pot, &x, opts, |y| f(y) * part(y)) + about(pot, &xp, opts, |y| f(y) * (1.0 - part(y)))
    };
    Ok(DirectValue { value, accuracy_warning: warn })
}

/// `∫ g` over the support in spherical coordinates centred at `c`, with panel breaks
/// where each ray crosses the potential's breakpoint spheres.
fn about(pot: &Potential, c: &Vec3, opts: &DirectOptions, g: impl Fn(&Vec3) -> Complex64 + Sync) -> Complex64 {
    let sphere = SphericalRule::gauss_product(opts.polar);
    (0..sphere.len())
        .into_par_iter()
        .map(|q| {
            let w = sphere.point(q);
            let b = c.dot(&w);
            let mut brk = vec![0.0];
            for rho in pot.breakpoints() {
                let disc = b * b - c.norm_squared() + rho * rho;
                if disc > 0.0 {
                    for s in [-b - disc.sqrt(), -b + disc.sqrt()] {
                        if s > 0.0 {
                            brk.push(s);
                        }
                    }
                }
            }
            brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut fine = vec![0.0];
            for win in brk.windows(2) {
                let m = ((win[1] - win[0]) / opts.panel).ceil().max(1.0) as usize;
                for i in 1..=m {
                    fine.push(win[0] + (win[1] - win[0]) * i as f64 / m as f64);
                }
            }
            let rule = Rule1d::composite(&fine, opts.per_panel);
            let line: Complex64 = rule.nodes.iter().zip(&rule.weights).map(|(&s, &ws)| g(&(c + w * s)) * (ws * s * s)).sum();
            line * sphere.weights[q]
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

fn check_orders(n1: usize, n2: usize) -> Result<()> {
    if n1 > 3 || n2 > 3 {
        return Err(invalid(format!("kernel orders must be ≤ 3, got ({n1}, {n2})")));
    }
    Ok(())
}

/// Resolution of the `(η, φ)` integral defining `h(ξ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpheroidalOptions {
    pub eta_panels: usize,
    pub eta_per_panel: usize,
    pub phi_nodes: usize,
    /// Upper bound on the ξ panel width, on top of `π/(4κ)`.
    pub xi_panel: f64,
    pub xi_per_panel: usize,
}

impl Default for SpheroidalOptions {
    fn default() -> Self {
        SpheroidalOptions { eta_panels: 4, eta_per_panel: 16, phi_nodes: 64, xi_panel: 0.02, xi_per_panel: 8 }
    }
}

/// `h(ξ)` tabulated on Gauss panels over `[D, R + D + E]`, reusable for every
/// `κ` up to the one it was built for.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpheroidalTable {
    pub frame: ProlateFrame,
    pub n1: usize,
    pub n2: usize,
    pub kappa_max: f64,
    pub xi: Rule1d,
    pub h: Vec<f64>,
}

/// `h(ξ) = ∫∫ (ξ + Dη)^{n₁} (ξ − Dη)^{n₂} V(Φ(ξ, η, φ)) dη dφ`.
pub fn h_of_xi(pot: &Potential, frame: &ProlateFrame, n1: usize, n2: usize, xi: f64, opts: &SpheroidalOptions) -> f64 {
    let eta = Rule1d::panels(-1.0, 1.0, 2.0 / opts.eta_panels as f64, opts.eta_per_panel);
    let dphi = 2.0 * PI / opts.phi_nodes as f64;
    let d = frame.d;
    let mut total = 0.0;
    for (&et, &we) in eta.nodes.iter().zip(&eta.weights) {
        let weight = (xi + d * et).powi(n1 as i32) * (xi - d * et).powi(n2 as i32) * we * dphi;
        if weight == 0.0 {
            continue;
        }
        let mut ring = 0.0;
        for m in 0..opts.phi_nodes {
            let (y, _) = prolate_map(frame, xi, et, dphi * m as f64).expect("ξ ≥ D on the table");
            ring += pot.at(&y);
        }
        total += weight * ring;
    }
    total
}

impl SpheroidalTable {
    pub fn new(pot: &Potential, x: Vec3, xp: Vec3, n1: usize, n2: usize, kappa_max: f64, opts: &SpheroidalOptions) -> Result<Self> {
        check_orders(n1, n2)?;
        let frame = ProlateFrame::new(x, xp);
        let top = pot.support_radius + frame.d + frame.e;
        let width = opts.xi_panel.min(PI / (4.0 * kappa_max.max(1e-12)));
        // Gauss panels never place a node on ξ = D
        let xi = Rule1d::panels(frame.d, top, width, opts.xi_per_panel);
        let h = xi.nodes.par_iter().map(|&s| h_of_xi(pot, &frame, n1, n2, s, opts)).collect();
        Ok(SpheroidalTable { frame, n1, n2, kappa_max, xi, h })
    }

    /// `∫ e^{2iκξ} h(ξ) dξ`.
    pub fn integral(&self, kappa: f64) -> Result<Complex64> {
        if kappa > self.kappa_max * (1.0 + 1e-12) {
            return Err(ThermionError::QuadratureBudget(format!("κ = {kappa} beyond the table's {}", self.kappa_max)));
        }
        Ok(self.xi.nodes.iter().zip(&self.xi.weights).zip(&self.h).map(|((&s, &w), &h)| Complex64::from_polar(w * h, 2.0 * kappa * s)).sum())
    }
}

pub fn klein_zemach_spheroidal(pot: &Potential, x: Vec3, xp: Vec3, kappa: f64, n1: usize, n2: usize) -> Result<Complex64> {
    if pot.is_zero() {
        check_orders(n1, n2)?;
        return Ok(Complex64::new(0.0, 0.0));
    }
    SpheroidalTable::new(pot, x, xp, n1, n2, kappa.max(1.0), &SpheroidalOptions::default())?.integral(kappa)
}

/// Deterministic point pairs in `|x| ≤ R`; the first pair is diagonal.
pub fn sample_pairs(radius: f64, count: usize) -> Vec<(Vec3, Vec3)> {
    let halton = |i: usize, base: usize| {
        let (mut f, mut r, mut n) = (1.0, 0.0, i);
        while n > 0 {
            f /= base as f64;
            r += f * (n % base) as f64;
            n /= base;
        }
        r
    };
    let point = |i: usize| {
        let u = halton(i, 2);
        let z = 2.0 * halton(i, 3) - 1.0;
        let phi = 2.0 * PI * halton(i, 5);
        let s = (1.0 - z * z).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), z) * (radius * u.cbrt())
    };
    (0..count)
        .map(|i| {
            let x = point(2 * i + 1);
            if i == 0 {
                (x, x)
            } else {
                (x, point(2 * i + 2))
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KleinZemachSweep {
    pub n1: usize,
    pub n2: usize,
    pub kappa: Vec<f64>,
    pub sup: Vec<f64>,
    pub kappa_sup: Vec<f64>,
    pub fit: SlopeFit,
    pub passes: bool,
}

/// `sup` over the pairs of `|I|` for each `κ`, and its log–log slope.
pub fn klein_zemach_sweep(pot: &Potential, kappas: &[f64], pairs: &[(Vec3, Vec3)], n1: usize, n2: usize) -> Result<KleinZemachSweep> {
    let kmax = kappas.iter().copied().fold(0.0, f64::max);
    let opts = SpheroidalOptions::default();
    let tables: Vec<SpheroidalTable> =
        pairs.iter().map(|(x, xp)| SpheroidalTable::new(pot, *x, *xp, n1, n2, kmax, &opts)).collect::<Result<_>>()?;
    let mut sup = Vec::with_capacity(kappas.len());
    for &k in kappas {
        let mut m: f64 = 0.0;
        for t in &tables {
            m = m.max(t.integral(k)?.norm());
        }
        sup.push(m);
    }
    let kappa_sup = kappas.iter().zip(&sup).map(|(k, s)| k * s).collect();
    let fit = loglog_slope(kappas, &sup, 5)?;
    let passes = fit.slope <= -0.7;
    Ok(KleinZemachSweep { n1, n2, kappa: kappas.to_vec(), sup, kappa_sup, passes, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_bump_well;
    use rand::{Rng, SeedableRng};

    fn well() -> Potential {
        make_bump_well(50.0, 0.5, 0.2).unwrap()
    }

    #[test]
    fn round_trip_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let frame = ProlateFrame::new(Vec3::new(0.2, -0.1, 0.3), Vec3::new(-0.3, 0.25, 0.05));
        let r = frame.rotation;
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
        let (x, xp) = (Vec3::from(frame.x), Vec3::from(frame.x_prime));
        for _ in 0..100 {
            let xi = frame.d + rng.gen_range(0.0..2.0);
            let eta = rng.gen_range(-1.0..1.0);
            let phi = rng.gen_range(0.0..2.0 * PI);
            let (y, jac) = prolate_map(&frame, xi, eta, phi).unwrap();
            let (a, b) = ((x - y).norm(), (xp - y).norm());
            assert!((a + b - 2.0 * xi).abs() < 1e-10);
            assert!((a - b - 2.0 * frame.d * eta).abs() < 1e-10);
            assert!(jac >= 0.0);
        }
        assert!(prolate_map(&frame, 0.5 * frame.d, 0.0, 0.0).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let frame = ProlateFrame::new(Vec3::new(0.1, 0.2, -0.3), Vec3::new(0.4, -0.1, 0.1));
        let (xi, eta, phi) = (frame.d + 0.3, 0.3, 1.1);
        let h = 1e-6;
        let col = |f: &dyn Fn(f64) -> Vec3| (f(h) - f(-h)) / (2.0 * h);
        let m = Matrix3::from_columns(&[
            col(&|t| prolate_map(&frame, xi + t, eta, phi).unwrap().0),
            col(&|t| prolate_map(&frame, xi, eta + t, phi).unwrap().0),
            col(&|t| prolate_map(&frame, xi, eta, phi + t).unwrap().0),
        ]);
        let jac = prolate_map(&frame, xi, eta, phi).unwrap().1;
        assert!((m.determinant().abs() - jac).abs() < 1e-6 * jac);
    }

    #[test]
    fn degenerate_frame_is_spherical() {
        let x = Vec3::new(0.1, 0.1, 0.1);
        let frame = ProlateFrame::new(x, x);
        assert!(frame.degenerate);
        let (y, jac) = prolate_map(&frame, 0.7, 0.2, 2.0).unwrap();
        assert!(((x - y).norm() - 0.7).abs() < 1e-14);
        assert!((jac - 0.49).abs() < 1e-14);
    }

    #[test]
    fn zero_potential_gives_zero() {
        let pot = Potential::zero(1.0);
        let (x, xp) = (Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.0, 0.3, 0.0));
        assert_eq!(klein_zemach_spheroidal(&pot, x, xp, 2.0, 0, 0).unwrap(), Complex64::new(0.0, 0.0));
        let d = klein_zemach_direct(&pot, x, xp, 2.0, 0, 0, &DirectOptions::default()).unwrap();
        assert_eq!(d.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn both_kernels_trivial_at_zero_kappa() {
        let pot = well();
        let opts = DirectOptions { polar: 48, ..Default::default() };
        let a = klein_zemach_direct(&pot, Vec3::new(0.1, 0.0, 0.2), Vec3::new(-0.2, 0.1, 0.0), 0.0, 1, 1, &opts).unwrap().value;
        let b = klein_zemach_direct(&pot, Vec3::new(0.3, 0.3, 0.0), Vec3::new(0.0, 0.0, -0.4), 0.0, 1, 1, &opts).unwrap().value;
        let r = pot.support_radius;
        let exact = Rule1d::composite(&crate::quadrature::breakpoints(0.0, r, &pot.breakpoints()), 24)
            .integrate(|s| 4.0 * PI * s * s * pot.value(s));
        for v in [a, b] {
            assert!(v.im.abs() < 1e-12 * exact.abs());
            assert!((v.re - exact).abs() < 1e-6 * exact.abs(), "{v} {exact}");
        }
    }

    #[test]
    fn large_kappa_is_flagged() {
        let pot = well();
        let opts = DirectOptions { polar: 16, ..Default::default() };
        let x = Vec3::new(0.1, 0.0, 0.0);
        assert!(klein_zemach_direct(&pot, x, x, 2.0, 0, 0, &opts).unwrap().accuracy_warning);
        assert!(!klein_zemach_direct(&pot, x, x, 0.5, 0, 0, &opts).unwrap().accuracy_warning);
        assert!(klein_zemach_direct(&pot, x, x, 0.5, 4, 0, &opts).is_err());
    }

    #[test]
    fn h_vanishes_beyond_the_support_cutoff() {
        let pot = well();
        let frame = ProlateFrame::new(Vec3::new(0.2, 0.1, 0.0), Vec3::new(-0.1, 0.3, 0.2));
        let top = pot.support_radius + frame.d + frame.e;
        for t in [0.0, 0.01, 0.3] {
            assert_eq!(h_of_xi(&pot, &frame, 0, 0, top + t, &SpheroidalOptions::default()), 0.0);
        }
    }

    #[test]
    fn spheroidal_agrees_with_direct() {
        let pot = well();
        let pairs = [
            (Vec3::new(0.2, -0.1, 0.3), Vec3::new(-0.3, 0.25, 0.05)),
            (Vec3::new(0.1, 0.1, 0.1), Vec3::new(0.1, 0.1, 0.1)),
            (Vec3::new(0.4, 0.0, 0.0), Vec3::new(0.35, 0.05, 0.1)),
        ];
        for (x, xp) in pairs {
            for (n1, n2) in [(0, 0), (1, 0), (2, 3)] {
                let table = SpheroidalTable::new(&pot, x, xp, n1, n2, 5.0, &SpheroidalOptions::default()).unwrap();
                for kappa in [0.0, 1.0, 3.0, 5.0] {
                    let s = table.integral(kappa).unwrap();
                    let d = klein_zemach_direct(&pot, x, xp, kappa, n1, n2, &DirectOptions::default()).unwrap();
                    assert!(!d.accuracy_warning);
                    assert!((s - d.value).norm() <= 1e-6 * d.value.norm(), "{x:?} {xp:?} ({n1},{n2}) κ={kappa}: {s} vs {}", d.value);
                }
            }
        }
    }

    #[test]
    fn integral_decays_like_one_over_kappa() {
        let pot = well();
        let kappas = crate::fit::logspace(1.0, 100.0, 9);
        let sweep = klein_zemach_sweep(&pot, &kappas, &sample_pairs(pot.support_radius, 6), 0, 0).unwrap();
        assert!(sweep.passes, "{sweep:?}");
    }
}
