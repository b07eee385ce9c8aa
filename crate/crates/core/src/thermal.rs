//! Black-body occupation `ρ_β`, the gluing map `τ_β` onto `L²(ℝ × S²)`, its
//! `u`-derivatives and the infrared classification of form factors `κ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ThermionError};
use crate::fit::{loglog_slope, logspace};
use crate::jet::Jet;
use crate::quadrature::{Rule1d, SphericalRule, Vec3};
use crate::special::bump;

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("β must be positive, got {beta}")));
    }
    Ok(())
}

/// `ρ_β(ω) = 1/(e^{βω} − 1)`.
pub fn planck(beta: f64, omega: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(omega > 0.0) {
        return Err(ThermionError::OutOfDomain(format!("ω = {omega} ≤ 0")));
    }
    Ok(planck_unchecked(beta * omega))
}

pub(crate) fn planck_unchecked(x: f64) -> f64 {
    if x > 1.0 {
        let e = (-x).exp();
        e / -(-x).exp_m1()
    } else {
        1.0 / x.exp_m1()
    }
}

/// `x / (1 − e^{−x})`, smooth through `x = 0`.
pub fn bose_ratio(x: Jet) -> Jet {
    let x0 = x.value();
    if x0.abs() < 0.5 {
        // Bernoulli series; the x^12 term is below 1e-16 here
        const C: [f64; 6] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0, 1.0 / 47900160.0, -691.0 / 1307674368000.0];
        let x2 = x * x;
        let mut acc = Jet::constant(C[5]);
        for &c in C[..5].iter().rev() {
            acc = acc * x2 + c;
        }
        acc * x2 + x.scale(0.5) + 1.0
    } else if x0 > 0.0 {
        x / (-(-x).exp_m1())
    } else {
        let e = x.exp();
        (-x) * e / (-x.exp_m1())
    }
}

/// Form factor presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaPreset {
    /// `amp · ω^{-1/2} e^{−cω²}`.
    SqrtMinus { amp: f64, c: f64 },
    /// `amp · ω^{1/2} e^{−cω²}`.
    SqrtPlus { amp: f64, c: f64 },
    /// `ω^p e^{−cω²}`.
    Power { p: f64, c: f64 },
    /// `ω^p · bump(ω / width)`.
    PowerBump { p: f64, width: f64 },
    Zero,
}

impl KappaPreset {
    /// `κ = ω^s h(ω)` with `h` smooth at 0; the split keeps derivatives exact near 0.
    fn split(&self) -> (f64, Box<dyn Fn(Jet) -> Jet + Sync + '_>) {
        match *self {
            KappaPreset::SqrtMinus { amp, c } => (-0.5, Box::new(move |w: Jet| (w * w).scale(-c).exp().scale(amp))),
            KappaPreset::SqrtPlus { amp, c } => (0.5, Box::new(move |w: Jet| (w * w).scale(-c).exp().scale(amp))),
            KappaPreset::Power { p, c } => (0.0, Box::new(move |w: Jet| w.powf(p) * (w * w).scale(-c).exp())),
            KappaPreset::PowerBump { p, width } => (
                0.0,
                Box::new(move |w: Jet| {
                    let s = w.scale(1.0 / width);
                    if s.value() >= 1.0 {
                        return Jet::constant(0.0);
                    }
                    let inner = (Jet::constant(1.0) - s * s).recip();
                    w.powf(p) * (Jet::constant(1.0) - inner).exp()
                }),
            ),
            KappaPreset::Zero => (0.0, Box::new(|_| Jet::constant(0.0))),
        }
    }

    pub fn jet(&self, omega: f64) -> Jet {
        let (s, h) = self.split();
        let w = Jet::variable(omega);
        let hv = h(w);
        if s == 0.0 {
            hv
        } else {
            w.powf(s) * hv
        }
    }

    pub fn value(&self, omega: f64) -> f64 {
        match *self {
            KappaPreset::SqrtMinus { amp, c } => amp * omega.powf(-0.5) * (-c * omega * omega).exp(),
            KappaPreset::SqrtPlus { amp, c } => amp * omega.sqrt() * (-c * omega * omega).exp(),
            KappaPreset::Power { p, c } => omega.powf(p) * (-c * omega * omega).exp(),
            KappaPreset::PowerBump { p, width } => omega.powf(p) * bump(omega / width),
            KappaPreset::Zero => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, KappaPreset::Zero)
    }

    /// Named presets; `c` is the Gaussian UV constant where one applies.
    pub fn by_name(name: &str, c: f64) -> Result<Self> {
        Ok(match name {
            "sqrt_minus" => KappaPreset::SqrtMinus { amp: 1.0, c },
            "sqrt_plus" => KappaPreset::SqrtPlus { amp: 1.0, c },
            "cubic" => KappaPreset::Power { p: 3.0, c },
            "linear" => KappaPreset::Power { p: 1.0, c },
            "cubic_bump" => KappaPreset::PowerBump { p: 3.0, width: 2.0 },
            "zero" => KappaPreset::Zero,
            other => return Err(invalid(format!("unknown κ preset `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum IrClass {
    Polynomial { p: f64 },
    SqrtPlus,
    SqrtMinus,
    /// `κ ≡ 0`.
    Vanishing,
    Rejected,
}

/// `κ` and its first three derivatives at `ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaSample {
    pub omega: f64,
    pub d: [f64; 4],
}

pub fn sample_kappa(kappa: &KappaPreset, omegas: &[f64]) -> Vec<KappaSample> {
    omegas
        .iter()
        .map(|&w| {
            let j = kappa.jet(w);
            KappaSample { omega: w, d: [0, 1, 2, 3].map(|i| j.derivative(i)) }
        })
        .collect()
}

/// Near-zero grid used for classification.
pub fn ir_grid() -> Vec<f64> {
    logspace(1e-6, 1e-2, 25)
}

/// Detects `ω^{±1/2}·(smooth, nonvanishing)` by power division, otherwise fits
/// `|∂^j κ| ≤ k₂ ω^{p−j}` and accepts when `p > 2`.
pub fn classify_ir(samples: &[KappaSample]) -> IrClass {
    if samples.iter().all(|s| s.d.iter().all(|v| *v == 0.0)) {
        return IrClass::Vanishing;
    }
    if samples.len() < 5 || samples.iter().any(|s| !(s.omega > 0.0) || s.d.iter().any(|v| !v.is_finite())) {
        return IrClass::Rejected;
    }
    for (s, class) in [(0.5, IrClass::SqrtPlus), (-0.5, IrClass::SqrtMinus)] {
        let h: Vec<f64> = samples.iter().map(|x| x.d[0] * x.omega.powf(-s)).collect();
        let dh: Vec<f64> =
            samples.iter().map(|x| x.d[1] * x.omega.powf(-s) - s * x.d[0] * x.omega.powf(-s - 1.0)).collect();
        let top = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let smooth = dh.iter().all(|v| v.abs() <= 1e3 * top);
        let nonvanishing = h[0].abs() >= 1e-3 * top;
        if top.is_finite() && top > 0.0 && smooth && nonvanishing {
            return class;
        }
    }
    let w: Vec<f64> = samples.iter().map(|s| s.omega).collect();
    let v: Vec<f64> = samples.iter().map(|s| s.d[0].abs()).collect();
    let Ok(fit) = loglog_slope(&w, &v, 5) else { return IrClass::Rejected };
    let p = fit.slope;
    if p <= 2.0 + 1e-6 {
        return IrClass::Rejected;
    }
    // k₂ must not grow toward 0
    let ratio: Vec<f64> = samples
        .iter()
        .map(|s| (0..4).map(|j| s.d[j].abs() / s.omega.powf(p - j as f64)).fold(0.0, f64::max))
        .collect();
    match loglog_slope(&w, &ratio, 5) {
        Ok(r) if r.slope >= -0.05 => IrClass::Polynomial { p },
        _ => IrClass::Rejected,
    }
}

/// `sup_{ω ≥ 1} ω^n |κ|` is finite and decays on the samples, for `n ≤ 8`.
pub fn uv_certify(kappa: &KappaPreset) -> bool {
    let w = logspace(1.0, 1e3, 60);
    (0..=8).all(|n| {
        let v: Vec<f64> = w.iter().map(|&x| x.powi(n) * kappa.value(x).abs()).collect();
        let top = v.iter().fold(0.0f64, |m, x| m.max(*x));
        v.iter().all(|x| x.is_finite()) && *v.last().unwrap() <= 1e-12 * top.max(f64::MIN_POSITIVE)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub kappa: KappaPreset,
    pub ir_class: IrClass,
    pub uv_certified: bool,
}

impl Coupling {
    pub fn new(kappa: KappaPreset) -> Self {
        let ir_class = classify_ir(&sample_kappa(&kappa, &ir_grid()));
        let uv_certified = kappa.is_zero() || uv_certify(&kappa);
        Coupling { kappa, ir_class, uv_certified }
    }

    pub fn value(&self, omega: f64) -> f64 {
        self.kappa.value(omega)
    }

    pub fn accepted(&self) -> bool {
        self.ir_class != IrClass::Rejected
    }
}

/// Symmetric geometric grid `u = ±e^t`, `t ∈ [ln u_min, ln U]` with step `h`;
/// weights `h·|u|` (trapezoid in `t`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UGrid {
    pub u_min: f64,
    pub u_max: f64,
    pub step: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UGrid {
    pub fn new(u_min: f64, u_max: f64, step: f64) -> Result<Self> {
        if !(u_min > 0.0 && u_max > u_min && step > 0.0) {
            return Err(invalid("u-grid needs 0 < u_min < u_max and a positive step"));
        }
        let (a, b) = (u_min.ln(), u_max.ln());
        let n = ((b - a) / step).ceil() as usize;
        let h = (b - a) / n as f64;
        let pos: Vec<f64> = (0..=n).map(|i| (a + h * i as f64).exp()).collect();
        let mut nodes: Vec<f64> = pos.iter().rev().map(|u| -u).collect();
        nodes.extend(&pos);
        let weights = nodes.iter().map(|u| h * u.abs()).collect();
        Ok(UGrid { u_min, u_max, step: h, nodes, weights })
    }

    /// Cut-off where the UV tail of `ω²(1 + 2ρ)κ²` is below `1e-12` of the total.
    pub fn for_coupling(kappa: &KappaPreset, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let dens = |w: f64| w * w * (1.0 + 2.0 * planck_unchecked(beta * w)) * kappa.value(w).powi(2);
        let w = logspace(1e-3, 1e4, 281);
        let v: Vec<f64> = w.iter().map(|&x| dens(x) * x).collect();
        let peak = v.iter().fold(0.0f64, |m, x| m.max(*x));
        let last = w.iter().zip(&v).filter(|(_, y)| **y > 1e-16 * peak).map(|(x, _)| *x).fold(1.0, f64::max);
        UGrid::new(1e-14, 2.0 * last, 0.01)
    }

    /// Halves the step.
    pub fn refined(&self) -> Self {
        UGrid::new(self.u_min, self.u_max, 0.5 * self.step).expect("refining a valid grid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `|u|√(1+ρ_β(u))` for `u > 0`, `|u|√ρ_β(|u|)` for `u < 0`.
pub fn glue_weight(beta: f64, u: f64) -> f64 {
    let x = beta * u.abs();
    let w = u.abs() / (-(-x).exp_m1()).sqrt();
    if u > 0.0 {
        w
    } else {
        // e^{−x/2} applied last so ρ itself never underflows
        w * (-0.5 * x).exp()
    }
}

/// Samples of `τ_β f` on a `(u, Σ)` product grid, stored `[i * n_Σ + q]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GluedFunction {
    pub beta: f64,
    pub grid: UGrid,
    pub sphere: SphericalRule,
    pub values: Vec<Complex64>,
}

impl GluedFunction {
    pub fn norm2(&self) -> f64 {
        let nq = self.sphere.len();
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| v.norm_sqr() * self.grid.weights[n / nq] * self.sphere.weights[n % nq])
            .sum()
    }
}

/// `u√(1+ρ) f(u, Σ)` on `u > 0` and `−u√ρ(−u) conj f(−u, Σ)` on `u < 0`.
pub fn glue(f: impl Fn(f64, &Vec3) -> Complex64, beta: f64, grid: &UGrid, sphere: &SphericalRule) -> Result<GluedFunction> {
    check_beta(beta)?;
    let mut values = Vec::with_capacity(grid.len() * sphere.len());
    for &u in &grid.nodes {
        let w = glue_weight(beta, u);
        for q in 0..sphere.len() {
            let v = f(u.abs(), &sphere.point(q));
            values.push(if u > 0.0 { v * w } else { v.conj() * w });
        }
    }
    Ok(GluedFunction { beta, grid: grid.clone(), sphere: sphere.clone(), values })
}

/// `∫₀^∞ ∫ ω²(1 + 2ρ_β)|f|² dΣ dω` by Gauss panels, independent of the u-grid.
pub fn branch_norm2(f: impl Fn(f64, &Vec3) -> Complex64, beta: f64, u_max: f64, sphere: &SphericalRule) -> f64 {
    // the density is smooth at 0 but varies on the scale 1/β near it
    let mut brk = vec![0.0];
    let mut x = (0.05 / beta).min(u_max / 64.0);
    while x < u_max {
        brk.push(x);
        x *= 1.2;
    }
    brk.push(u_max);
    let rule = Rule1d::composite(&brk, 24);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&w, &ww)| {
            let occ = if w == 0.0 { 0.0 } else { w * w * (1.0 + 2.0 * planck_unchecked(beta * w)) };
            let ang: f64 = (0..sphere.len()).map(|q| sphere.weights[q] * f(w, &sphere.point(q)).norm_sqr()).sum();
            ww * occ * ang
        })
        .sum()
}

/// `∂_u^j (τ_β κ)(u)` for `j ≤ 3`.
pub fn glued_jet(kappa: &KappaPreset, beta: f64, u: f64) -> Jet {
    let (s, h) = kappa.split();
    let uj = Jet::variable(u);
    let au = if u > 0.0 { uj } else { -uj };
    let weight = (bose_ratio(uj.scale(beta)).scale(1.0 / beta)).sqrt();
    let e = 0.5 + s;
    let power = if e == 0.0 { Jet::constant(1.0) } else if e == 1.0 { au } else { au.powf(e) };
    weight * power * h(au)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedNorms {
    pub beta: f64,
    /// `‖∂_u^j τ_β κ‖` over `ℝ × S²`, `j = 0..=m`.
    pub norms: Vec<f64>,
    /// `norm / (1 + β^{-1})` for `j ≤ 1`.
    pub ratios: Vec<f64>,
}

pub fn glued_derivative_norms(coupling: &Coupling, beta: f64, m: usize) -> Result<GluedNorms> {
    check_beta(beta)?;
    if m > crate::jet::ORDER {
        return Err(invalid(format!("derivative order {m} > {}", crate::jet::ORDER)));
    }
    if !coupling.accepted() {
        return Err(ThermionError::RejectedCoupling(format!("{:?}", coupling.kappa)));
    }
    let grid = UGrid::for_coupling(&coupling.kappa, beta)?;
    let mut acc = vec![0.0; m + 1];
    for (&u, &w) in grid.nodes.iter().zip(&grid.weights) {
        let j = glued_jet(&coupling.kappa, beta, u);
        for (d, a) in acc.iter_mut().enumerate() {
            *a += w * j.derivative(d).powi(2);
        }
    }
    let norms: Vec<f64> = acc.iter().map(|a| (4.0 * PI * a).sqrt()).collect();
    let ratios = norms.iter().take(2).map(|n| n / (1.0 + 1.0 / beta)).collect();
    Ok(GluedNorms { beta, norms, ratios })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedSpread {
    pub rows: Vec<GluedNorms>,
    /// `(max − min)/max` of the ratio across `β`, for `j = 0, 1`.
    pub spread: Vec<f64>,
    pub passes: bool,
}

pub fn glued_norm_spread(coupling: &Coupling, betas: &[f64]) -> Result<GluedSpread> {
    let rows: Vec<GluedNorms> = betas.iter().map(|&b| glued_derivative_norms(coupling, b, 1)).collect::<Result<_>>()?;
    let spread: Vec<f64> = (0..2)
        .map(|j| {
            let v: Vec<f64> = rows.iter().map(|r| r.ratios[j]).collect();
            let hi = v.iter().copied().fold(0.0, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            if hi > 0.0 { (hi - lo) / hi } else { 0.0 }
        })
        .collect();
    let passes = spread.iter().all(|s| *s <= 0.25);
    Ok(GluedSpread { rows, spread, passes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoViolation {
    pub beta: f64,
    pub omega: f64,
    pub item: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoBoundsRow {
    pub beta: f64,
    /// Smallest `C` with `|∂_ω √ρ| ≤ C(ω^{-1} + β^{-1/2} ω^{-3/2})`.
    pub c_sqrt_rho: f64,
    /// Same for `√(1+ρ)`.
    pub c_sqrt_one_plus_rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoBoundsReport {
    pub rows: Vec<RhoBoundsRow>,
    pub violations: Vec<RhoViolation>,
    /// `(max − min)/max` of each constant across `β`.
    pub c_spread: [f64; 2],
    pub passes: bool,
}

/// Default `ω` grid: 241 log-spaced nodes on `[1e-6, 1e3]`.
pub fn rho_grid() -> Vec<f64> {
    logspace(1e-6, 1e3, 241)
}

pub fn rho_bounds_check(betas: &[f64], omegas: &[f64]) -> Result<RhoBoundsReport> {
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &beta in betas {
        let (mut c1, mut c2) = (0.0f64, 0.0f64);
        for &w in omegas {
            let rho = planck(beta, w)?;
            let x = beta * w;
            let mut check = |item: &str, lhs: f64, rhs: f64| {
                if lhs > rhs * (1.0 + 1e-12) {
                    violations.push(RhoViolation { beta, omega: w, item: item.into(), lhs, rhs });
                }
            };
            check("sqrt_rho", rho.sqrt(), x.powf(-0.5));
            check("sqrt_one_plus_rho", (1.0 + rho).sqrt(), 1.0 + x.powf(-0.5));
            let scale = 1.0 / w + beta.powf(-0.5) * w.powf(-1.5);
            let d1 = 0.5 * beta * rho.sqrt() * (1.0 + rho);
            let d2 = 0.5 * beta * rho * (1.0 + rho).sqrt();
            c1 = c1.max(d1 / scale);
            c2 = c2.max(d2 / scale);
        }
        rows.push(RhoBoundsRow { beta, c_sqrt_rho: c1, c_sqrt_one_plus_rho: c2 });
    }
    let spread = |g: fn(&RhoBoundsRow) -> f64| {
        let hi = rows.iter().map(g).fold(0.0, f64::max);
        let lo = rows.iter().map(g).fold(f64::INFINITY, f64::min);
        if hi > 0.0 { (hi - lo) / hi } else { 0.0 }
    };
    let c_spread = [spread(|r| r.c_sqrt_rho), spread(|r| r.c_sqrt_one_plus_rho)];
    let passes = violations.is_empty() && c_spread.iter().all(|s| *s <= 0.2);
    Ok(RhoBoundsReport { rows, violations, c_spread, passes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueIdentities {
    pub beta: f64,
    /// Worst `|ρ/(1+ρ) − e^{−βu}| / e^{−βu}` over `u > 0` nodes.
    pub detailed_balance: f64,
    /// Worst nodewise mismatch with the defining formula.
    pub formula: f64,
    /// `|‖τ_β f‖² − ∫ ω²(1+2ρ)|f|²| / ∫ ω²(1+2ρ)|f|²`.
    pub norm_identity: f64,
    pub uv_tail: f64,
}

/// Nodewise and integral identities of `τ_β κ`.
pub fn glue_identities(kappa: &KappaPreset, beta: f64) -> Result<GlueIdentities> {
    let grid = UGrid::for_coupling(kappa, beta)?;
    let sphere = SphericalRule::gauss_product(4);
    let f = |w: f64, _: &Vec3| Complex64::new(kappa.value(w), 0.0);
    let g = glue(f, beta, &grid, &sphere)?;
    let mut db: f64 = 0.0;
    let mut formula: f64 = 0.0;
    for (i, &u) in grid.nodes.iter().enumerate() {
        let rho = planck(beta, u.abs())?;
        if rho < 1e-280 {
            // the reference formula itself is subnormal here
            continue;
        }
        if u > 0.0 {
            let target = (-beta * u).exp();
            if target > 0.0 {
                db = db.max((rho / (1.0 + rho) - target).abs() / target);
            }
        }
        let expect = if u > 0.0 { u * (1.0 + rho).sqrt() } else { -u * rho.sqrt() } * kappa.value(u.abs());
        let got = g.values[i * sphere.len()];
        formula = formula.max(((got.re - expect).abs() + got.im.abs()) / expect.abs().max(f64::MIN_POSITIVE));
    }
    let lhs = g.norm2();
    let rhs = branch_norm2(f, beta, grid.u_max, &sphere);
    let tail = branch_norm2(|w, s| if w > grid.u_max { f(w, s) } else { Complex64::new(0.0, 0.0) }, beta, 4.0 * grid.u_max, &sphere);
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b };
    Ok(GlueIdentities {
        beta,
        detailed_balance: db,
        formula,
        norm_identity: rel(lhs, rhs),
        uv_tail: if rhs > 0.0 { tail / rhs } else { 0.0 },
    })
}
