//! Level-shift integrals of the Fermi Golden Rule for a particle in a radial
//! well coupled to a thermal field.
//!
//! For `G(ω,Σ)(x) = κ(ω) e^{iqΣ·x} χ(α|x|)` and a radial ground state the
//! angular integrals are exact:
//! `∫dΣ ∫dk̂ |(Gφ_E)^#(k)|² = 32π κ² S(k, q)`, `S = Σ_l (2l+1) |a_l|²`,
//! `a_l(k, q) = ∫ conj(R_l(k,r)) j_l(qr) h(r) r² dr`, `h = χ(α·) φ_E`.
//! The plane-wave part of `S` has the closed form
//! `π/(4kq) ∫_{|k−q|}^{k+q} p F(p)² dp` with `F` the Fourier transform of `h`;
//! only the partial waves with a non-negligible phase shift are summed.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ThermionError};
use crate::fit::{loglog_slope, logspace, SlopeFit};
use crate::potential::{discrete_spectrum, BoundState, Potential};
use crate::quadrature::{breakpoints, Rule1d, Vec3};
use crate::radial::PartialWave;
use crate::scattering::partial_wave::PwSolver;
use crate::special::{smooth_step, sph_j, sph_y};
use crate::thermal::{check_beta, planck_unchecked, Coupling};

/// Radial spatial cutoff `χ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cutoff {
    /// 1 on `r ≤ r0`, smooth decay to 0 at `2 r0`.
    Plateau { r0: f64 },
    /// 0 on `r ≤ r0/2`, 1 on `[r0, 2r0]`, 0 beyond `3 r0`.
    Hollow { r0: f64 },
}

impl Cutoff {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Cutoff::Plateau { r0 } => smooth_step((r - r0) / r0),
            Cutoff::Hollow { r0 } => (1.0 - smooth_step((r - 0.5 * r0) / (0.5 * r0))) * smooth_step((r - 2.0 * r0) / r0),
        }
    }

    pub fn at_origin(&self) -> f64 {
        self.value(0.0)
    }

    /// Radius below which `χ` is constant.
    pub fn flat_radius(&self) -> f64 {
        match *self {
            Cutoff::Plateau { r0 } => r0,
            Cutoff::Hollow { r0 } => 0.5 * r0,
        }
    }

    /// Radius beyond which `χ` vanishes.
    pub fn reach(&self) -> f64 {
        match *self {
            Cutoff::Plateau { r0 } => 2.0 * r0,
            Cutoff::Hollow { r0 } => 3.0 * r0,
        }
    }
}

/// `G(ω,Σ)(x) = κ(ω) e^{iqΣ·x} χ(α|x|)` with `q = ω`, or `q = αω` in the dipole scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionG {
    pub coupling: Coupling,
    pub cutoff: Cutoff,
    pub alpha: f64,
    pub dipole: bool,
}

impl InteractionG {
    pub fn new(coupling: Coupling, cutoff: Cutoff, alpha: f64) -> Result<Self> {
        Self::build(coupling, cutoff, alpha, false)
    }

    /// Phase `e^{iαωΣ·x}`: the photon wavelength scales with the cutoff.
    pub fn dipole(coupling: Coupling, cutoff: Cutoff, alpha: f64) -> Result<Self> {
        Self::build(coupling, cutoff, alpha, true)
    }

    fn build(coupling: Coupling, cutoff: Cutoff, alpha: f64, dipole: bool) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("α must be non-negative, got {alpha}")));
        }
        let r0 = match cutoff {
            Cutoff::Plateau { r0 } | Cutoff::Hollow { r0 } => r0,
        };
        if !(r0 > 0.0) {
            return Err(invalid("cutoff radius must be positive"));
        }
        if !coupling.accepted() {
            return Err(ThermionError::RejectedCoupling(format!("{:?}", coupling.kappa)));
        }
        Ok(InteractionG { coupling, cutoff, alpha, dipole })
    }

    pub fn wave_number(&self, omega: f64) -> f64 {
        if self.dipole {
            self.alpha * omega
        } else {
            omega
        }
    }

    pub fn chi(&self, r: f64) -> f64 {
        self.cutoff.value(self.alpha * r)
    }

    pub fn eval(&self, omega: f64, sigma: &Vec3, x: &Vec3) -> Complex64 {
        let k = self.coupling.value(omega);
        Complex64::from_polar(k * self.chi(x.norm()), self.wave_number(omega) * sigma.dot(x))
    }

    /// Largest `r` where `χ(α·)` is non-zero.
    pub fn reach(&self) -> f64 {
        if self.alpha == 0.0 {
            f64::INFINITY
        } else {
            self.cutoff.reach() / self.alpha
        }
    }
}

/// Bound states of the well and the radial profile of the ground state.
#[derive(Clone, Debug)]
pub struct FgrSetting {
    pub potential: Potential,
    pub states: Vec<BoundState>,
    /// Index of `φ_E` in `states`.
    pub ground: usize,
    /// `|u_E| < 1e-11 max|u_E|` beyond this radius.
    pub r_max: f64,
}

impl FgrSetting {
    pub fn new(pot: &Potential) -> Result<Self> {
        let states = discrete_spectrum(pot, 2, 1e-8)?;
        if states.is_empty() {
            return Err(invalid("the potential has no bound state"));
        }
        let ground = (0..states.len())
            .min_by(|&a, &b| states[a].energy.partial_cmp(&states[b].energy).unwrap())
            .unwrap();
        if states[ground].angular_momentum != 0 {
            return Err(invalid("degenerate ground state (l > 0) is not supported"));
        }
        let g = &states[ground];
        let step = 0.02;
        let mut peak = 0.0f64;
        let mut r = step;
        loop {
            let u = (g.radial(r) * r).abs();
            peak = peak.max(u);
            if r > pot.support_radius && u < 1e-11 * peak {
                break;
            }
            r += step;
        }
        Ok(FgrSetting { potential: pot.clone(), states, ground, r_max: r })
    }

    pub fn energy(&self) -> f64 {
        self.states[self.ground].energy
    }

    pub fn bound(&self) -> &BoundState {
        &self.states[self.ground]
    }

    /// `φ_E(r)` including the `1/√4π` of the s-wave.
    pub fn phi(&self, r: f64) -> f64 {
        self.bound().radial(r) / (4.0 * PI).sqrt()
    }

    /// Gauss panels on `[0, r_max]` resolving wave numbers up to `wave`.
    pub fn radial_rule(&self, wave: f64, per_panel: usize) -> Rule1d {
        let width = (4.0 * PI / wave.max(1.0)).min(0.25);
        let br = breakpoints(0.0, self.r_max, &self.potential.breakpoints());
        let mut breaks = vec![0.0];
        for w in br.windows(2) {
            let n = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
            for i in 1..=n {
                breaks.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
            }
        }
        Rule1d::composite(&breaks, per_panel)
    }
}

/// `F(p) = (2π)^{-3/2} ∫ e^{-ip·x} h(|x|) d³x` on Gauss panels with the
/// cumulative integral of `p F(p)²` at the panel ends.
#[derive(Clone, Debug)]
struct RadialSpectrum {
    width: f64,
    per: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    /// Barycentric weights of one panel's nodes.
    bary: Vec<f64>,
}

impl RadialSpectrum {
    const WIDTH: f64 = 0.25;
    const PER: usize = 12;

    fn new(r: &[f64], src: &[f64], p_max: f64) -> Self {
        let n = (p_max / Self::WIDTH).ceil() as usize + 1;
        let rule = Rule1d::panels(0.0, n as f64 * Self::WIDTH, Self::WIDTH, Self::PER);
        let c = 4.0 * PI * (2.0 * PI).powf(-1.5);
        let values: Vec<f64> = rule
            .nodes
            .par_iter()
            .map(|&p| {
                c * r
                    .iter()
                    .zip(src)
                    .map(|(&rr, &s)| {
                        let x = p * rr;
                        let j0 = if x.abs() < 1e-6 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                        j0 * s
                    })
                    .sum::<f64>()
            })
            .collect();
        let mut cumulative = vec![0.0; n + 1];
        for j in 0..n {
            let mut s = 0.0;
            for i in j * Self::PER..(j + 1) * Self::PER {
                s += rule.weights[i] * rule.nodes[i] * values[i] * values[i];
            }
            cumulative[j + 1] = cumulative[j] + s;
        }
        let xs = &rule.nodes[..Self::PER];
        let bary = (0..Self::PER)
            .map(|i| 1.0 / (0..Self::PER).filter(|&j| j != i).map(|j| xs[i] - xs[j]).product::<f64>())
            .collect();
        RadialSpectrum { width: Self::WIDTH, per: Self::PER, nodes: rule.nodes, weights: rule.weights, values, cumulative, bary }
    }

    fn panel(&self, p: f64) -> usize {
        ((p / self.width) as usize).min(self.cumulative.len() - 2)
    }

    fn value(&self, p: f64) -> f64 {
        let j = self.panel(p);
        let xs = &self.nodes[j * self.per..(j + 1) * self.per];
        let ys = &self.values[j * self.per..(j + 1) * self.per];
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.per {
            let d = p - xs[i];
            if d == 0.0 {
                return ys[i];
            }
            let t = self.bary[i] / d;
            num += t * ys[i];
            den += t;
        }
        num / den
    }

    /// `∫_a^b p F(p)² dp` for `a, b` inside one panel.
    fn within(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let j = self.panel(0.5 * (a + b));
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        let base = &self.nodes[j * self.per..(j + 1) * self.per];
        let lo = j as f64 * self.width;
        let hi = lo + self.width;
        let mut s = 0.0;
        for (x, w) in base.iter().zip(&self.weights[j * self.per..(j + 1) * self.per]) {
            // reuse the panel rule, mapped onto [a, b]
            let t = (x - 0.5 * (lo + hi)) / (0.5 * self.width);
            let p = m + h * t;
            let f = self.value(p);
            s += w / (0.5 * self.width) * h * p * f * f;
        }
        s
    }

    /// `∫_a^b p F(p)² dp`.
    fn power_between(&self, a: f64, b: f64) -> f64 {
        let (ja, jb) = (self.panel(a), self.panel(b));
        if ja == jb {
            return self.within(a, b);
        }
        let end_a = (ja + 1) as f64 * self.width;
        let start_b = jb as f64 * self.width;
        self.within(a, end_a) + (self.cumulative[jb] - self.cumulative[ja + 1]) + self.within(start_b, b)
    }
}

/// `j_l(q_c r_b)` stored `[(b · (l_max+1) + l) · n_c + c]`.
#[derive(Clone, Debug)]
struct BesselTable {
    l_max: usize,
    n_c: usize,
    data: Vec<f64>,
}

impl BesselTable {
    fn new(r: &[f64], q: &[f64], l_max: usize) -> Self {
        let n_c = q.len();
        let mut data = vec![0.0; r.len() * (l_max + 1) * n_c];
        for (b, &rr) in r.iter().enumerate() {
            for (c, &qq) in q.iter().enumerate() {
                let j = sph_j(l_max, qq * rr);
                for (l, v) in j.iter().enumerate() {
                    data[(b * (l_max + 1) + l) * n_c + c] = *v;
                }
            }
        }
        BesselTable { l_max, n_c, data }
    }

    fn row(&self, b: usize, l: usize) -> &[f64] {
        let i = (b * (self.l_max + 1) + l) * self.n_c;
        &self.data[i..i + self.n_c]
    }
}

/// Overlaps of a radial source `h` with the partial waves of the well.
#[derive(Clone, Debug)]
pub struct OverlapEngine {
    solver: PwSolver,
    r: Vec<f64>,
    /// `h(r_b) r_b² w_b`.
    src: Vec<f64>,
    spectrum: RadialSpectrum,
    support: f64,
    l_cap: usize,
}

/// Partial-wave pieces at one `k`: free overlaps `∫ j_l(kr) j_l(qr) h r² dr`
/// and scattered ones with `R_l − j_l`, both `[l · n_c + c]`.
#[derive(Clone, Debug)]
pub struct WaveOverlaps {
    pub l_count: usize,
    pub free: Vec<f64>,
    pub scattered: Vec<Complex64>,
}

impl OverlapEngine {
    pub fn new(setting: &FgrSetting, source: impl Fn(f64) -> f64, k_max: f64, q_max: f64) -> Self {
        let pot = &setting.potential;
        let rule = setting.radial_rule(k_max + q_max, 16);
        let src: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(&r, &w)| source(r) * r * r * w).collect();
        let spectrum = RadialSpectrum::new(&rule.nodes, &src, k_max + q_max + 1.0);
        let l_cap = (k_max * pot.support_radius).ceil() as usize + 40;
        OverlapEngine {
            solver: PwSolver::new(pot, k_max),
            r: rule.nodes,
            src,
            spectrum,
            support: pot.support_radius,
            l_cap,
        }
    }

    /// Waves whose phase shift is not negligible.
    fn waves(&self, k: f64) -> Vec<PartialWave> {
        if self.solver.free {
            return Vec::new();
        }
        let kr = k * self.support;
        let mut out = Vec::new();
        for l in 0..=self.l_cap {
            let w = self.solver.wave(l, k);
            if w.t.norm() < 1e-13 && l as f64 > kr + 2.0 {
                break;
            }
            out.push(w);
        }
        out
    }

    fn bessel(&self, q: &[f64]) -> BesselTable {
        BesselTable::new(&self.r, q, self.l_cap)
    }

    fn overlaps_with(&self, k: f64, jq: &BesselTable) -> WaveOverlaps {
        let waves = self.waves(k);
        let n_l = waves.len();
        let n_c = jq.n_c;
        let mut free = vec![0.0; n_l * n_c];
        let mut scattered = vec![Complex64::new(0.0, 0.0); n_l * n_c];
        if n_l == 0 {
            return WaveOverlaps { l_count: 0, free, scattered };
        }
        let lm = n_l - 1;
        for (b, &rr) in self.r.iter().enumerate() {
            let s = self.src[b];
            if s == 0.0 {
                continue;
            }
            let j = sph_j(lm, k * rr);
            let y = if rr >= self.support { sph_y(lm, k * rr) } else { vec![0.0; n_l] };
            for (l, w) in waves.iter().enumerate() {
                let mut d = w.scattered_with(rr, j[l], y[l]);
                if !(d.re.is_finite() && d.im.is_finite()) {
                    d = Complex64::new(0.0, 0.0);
                }
                let cf = j[l] * s;
                let cs = d.conj() * s;
                let row = jq.row(b, l);
                let fo = &mut free[l * n_c..(l + 1) * n_c];
                for (o, v) in fo.iter_mut().zip(row) {
                    *o += cf * v;
                }
                let so = &mut scattered[l * n_c..(l + 1) * n_c];
                for (o, v) in so.iter_mut().zip(row) {
                    *o += cs * v;
                }
            }
        }
        WaveOverlaps { l_count: n_l, free, scattered }
    }

    /// Plane-wave part `Σ_l (2l+1) ∫j_l(kr)j_l(qr)h r²dr` squared and summed.
    pub fn free_power(&self, k: f64, q: f64) -> f64 {
        if q <= 1e-8 * k.max(1.0) {
            let f = self.spectrum.value(k);
            return 0.5 * PI * f * f;
        }
        PI / (4.0 * k * q) * self.spectrum.power_between((k - q).abs(), k + q)
    }

    /// `S(k, q_c)` for every `k` node and `q_c`, stored `[a · n_c + c]`.
    pub fn power_table(&self, k: &[f64], q: &[f64]) -> Vec<f64> {
        let jq = self.bessel(q);
        let rows: Vec<Vec<f64>> = k
            .par_iter()
            .map(|&kk| {
                let ov = self.overlaps_with(kk, &jq);
                let n_c = q.len();
                (0..n_c)
                    .map(|c| {
                        let mut s = self.free_power(kk, q[c]);
                        for l in 0..ov.l_count {
                            let f = ov.free[l * n_c + c];
                            let d = ov.scattered[l * n_c + c];
                            s += (2 * l + 1) as f64 * (2.0 * f * d.re + d.norm_sqr());
                        }
                        s.max(0.0)
                    })
                    .collect()
            })
            .collect();
        rows.concat()
    }

    /// Partial-wave overlaps at each `k` (used for explicit amplitudes).
    pub fn overlaps(&self, k: &[f64], q: &[f64]) -> Vec<WaveOverlaps> {
        let jq = self.bessel(q);
        k.par_iter().map(|&kk| self.overlaps_with(kk, &jq)).collect()
    }

    /// Plane-wave part of the amplitude: `F(|k − qΣ|)`.
    pub fn free_amplitude(&self, p: f64) -> f64 {
        self.spectrum.value(p)
    }

    /// Direct sum `Σ_{l ≤ l_max} (2l+1)|a_l|²` without the closed form.
    pub fn power_by_waves(&self, k: f64, q: f64, l_max: usize) -> f64 {
        let mut s = 0.0;
        let mut waves = Vec::new();
        for l in 0..=l_max {
            waves.push(self.solver.wave(l, k));
        }
        for (l, w) in waves.iter().enumerate() {
            let mut a = Complex64::new(0.0, 0.0);
            for (b, &rr) in self.r.iter().enumerate() {
                let j = sph_j(l, q * rr)[l];
                let rl = if self.solver.free { Complex64::new(sph_j(l, k * rr)[l], 0.0) } else { w.radial(rr) };
                let rl = if rl.re.is_finite() && rl.im.is_finite() { rl } else { Complex64::new(0.0, 0.0) };
                a += rl.conj() * j * self.src[b];
            }
            s += (2 * l + 1) as f64 * a.norm_sqr();
        }
        s
    }
}

/// Discretization of the `ω` and `|k|` integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgrGrids {
    /// Gauss nodes per `ω` panel; panels grow geometrically from `omega_first`.
    pub omega_per_panel: usize,
    pub omega_first: f64,
    /// Relative UV tail of `∫ω²κ²` left out beyond `ω_max`.
    pub omega_tail: f64,
    pub k_per_panel: usize,
    pub k_coarse_width: f64,
    /// `k_max = q_max + k_margin`.
    pub k_margin: f64,
}

impl Default for FgrGrids {
    fn default() -> Self {
        FgrGrids { omega_per_panel: 8, omega_first: 0.05, omega_tail: 1e-10, k_per_panel: 8, k_coarse_width: 0.5, k_margin: 25.0 }
    }
}

impl FgrGrids {
    /// Twice the nodes per panel in both rules.
    pub fn refined(&self) -> Self {
        FgrGrids { omega_per_panel: 2 * self.omega_per_panel, k_per_panel: 2 * self.k_per_panel, ..self.clone() }
    }

    /// `ω_max` with `∫_{ω_max}^∞ ω²κ² ≤ tail · ∫_0^∞ ω²κ²`.
    pub fn omega_max(&self, coupling: &Coupling) -> Result<f64> {
        if coupling.kappa.is_zero() {
            return Ok(1.0);
        }
        let w = logspace(1e-4, 1e4, 1601);
        let d: Vec<f64> = w.iter().map(|&x| x * x * coupling.value(x).powi(2) * x).collect();
        let h = (w[1] / w[0]).ln();
        let total: f64 = d.iter().sum::<f64>() * h;
        if !(total > 0.0) || !total.is_finite() {
            return Err(ThermionError::RejectedCoupling("ω²κ² has no finite positive integral".into()));
        }
        let mut tail = 0.0;
        for i in (0..w.len()).rev() {
            tail += d[i] * h;
            if tail > self.omega_tail * total {
                return Ok(w[i]);
            }
        }
        Ok(w[w.len() - 1])
    }

    pub fn omega_rule(&self, omega_max: f64) -> Rule1d {
        let mut breaks = vec![0.0];
        let mut b = self.omega_first.min(omega_max / 2.0);
        while b < omega_max {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(omega_max);
        Rule1d::composite(&breaks, self.omega_per_panel)
    }

    /// Fine panels up to just past the last resonant shell so that the
    /// energy spacing `2k Δk` there stays below `ε/3`; coarse beyond.
    pub fn k_rule(&self, energy: f64, eps: f64, omega_max: f64, k_max: f64) -> Rule1d {
        let unit = Rule1d::gauss(self.k_per_panel, 0.0, 1.0).nodes;
        let mut gap = 2.0 * unit[0];
        for w in unit.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        let k_f = if energy + omega_max > 0.0 { (energy + omega_max).sqrt() + 1.0 } else { 1.0 };
        let k_f = k_f.min(k_max);
        let width = (0.9 * eps / (3.0 * 2.0 * k_f * gap)).min(self.k_coarse_width);
        let n_f = (k_f / width).ceil() as usize;
        let mut breaks: Vec<f64> = (0..=n_f).map(|i| k_f * i as f64 / n_f as f64).collect();
        let n_c = ((k_max - k_f) / self.k_coarse_width).ceil() as usize;
        for i in 1..=n_c {
            breaks.push(k_f + (k_max - k_f) * i as f64 / n_c as f64);
        }
        Rule1d::composite(&breaks, self.k_per_panel)
    }
}

/// `ε/(x² + ε²)`.
pub fn lorentzian(x: f64, eps: f64) -> f64 {
    eps / (x * x + eps * eps)
}

/// `S(k_a, ω_c)` with the rules it was built on.
#[derive(Clone, Debug)]
pub struct LevelShiftTable {
    pub energy: f64,
    pub omega: Rule1d,
    pub k: Rule1d,
    pub kappa2: Vec<f64>,
    /// `[a · n_ω + c]`.
    pub power: Vec<f64>,
    pub omega_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSample {
    pub omega: f64,
    pub alpha: f64,
    /// `‖P_ess G φ_E‖²` in position space.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelShiftResult {
    #[serde(rename = "E")]
    pub energy: f64,
    /// Absolute width.
    #[serde(rename = "eps")]
    pub epsilon: f64,
    /// Width in units of `|E|`.
    pub eps_rel: f64,
    pub beta: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    /// `F2` with `G` and `G*` exchanged.
    #[serde(rename = "F2_reversed")]
    pub f2_reversed: f64,
    pub gamma: f64,
    /// `F_i ≤ (1/ε) ∫ (weight) ‖P_ess Gφ_E‖²`.
    pub f1_bound: f64,
    pub f2_bound: f64,
    pub omega_max: f64,
    pub k_nodes: usize,
    pub omega_nodes: usize,
    pub witnesses: Vec<WitnessSample>,
}

impl LevelShiftTable {
    pub fn build(setting: &FgrSetting, g: &InteractionG, eps_abs: f64, grids: &FgrGrids) -> Result<Self> {
        if !(eps_abs > 0.0) {
            return Err(invalid("ε must be positive"));
        }
        let omega_max = grids.omega_max(&g.coupling)?;
        let omega = grids.omega_rule(omega_max);
        let q: Vec<f64> = omega.nodes.iter().map(|&w| g.wave_number(w)).collect();
        let q_max = g.wave_number(omega_max);
        let k_max = q_max + grids.k_margin;
        let k = grids.k_rule(setting.energy(), eps_abs, omega_max, k_max);
        let kappa2: Vec<f64> = omega.nodes.iter().map(|&w| g.coupling.value(w).powi(2)).collect();
        let power = if g.coupling.kappa.is_zero() {
            vec![0.0; k.len() * omega.len()]
        } else {
            let engine = OverlapEngine::new(setting, |r| g.chi(r) * setting.phi(r), k_max, q_max);
            engine.power_table(&k.nodes, &q)
        };
        Ok(LevelShiftTable { energy: setting.energy(), omega, k, kappa2, power, omega_max })
    }

    /// Checks that `ε` is resolved at every resonant shell `k² = E + ω`.
    pub fn check_resolution(&self, eps: f64) -> Result<()> {
        let k = &self.k.nodes;
        let k_max = *k.last().unwrap();
        for &w in &self.omega.nodes {
            let e = self.energy + w;
            if e <= 0.0 {
                continue;
            }
            let kr = e.sqrt();
            if kr >= k_max {
                return Err(ThermionError::QuadratureBudget(format!("resonant shell k = {kr:.3} beyond k_max = {k_max:.3}")));
            }
            let i = k.partition_point(|&x| x < kr).clamp(1, k.len() - 1);
            let gap = k[i] - k[i - 1];
            if 2.0 * kr * gap >= eps / 3.0 {
                return Err(ThermionError::QuadratureBudget(format!(
                    "energy spacing {:.3e} at k = {kr:.3} exceeds ε/3 = {:.3e}",
                    2.0 * kr * gap,
                    eps / 3.0
                )));
            }
        }
        Ok(())
    }

    /// `(F1, F2, F1 bound, F2 bound)` at `β`, `ε`.
    pub fn integrals(&self, beta: f64, eps: f64) -> Result<[f64; 4]> {
        check_beta(beta)?;
        self.check_resolution(eps)?;
        let n_c = self.omega.len();
        let mut out = [0.0; 4];
        for c in 0..n_c {
            let w = self.omega.nodes[c];
            let rho = planck_unchecked(beta * w);
            let base = self.omega.weights[c] * w * w * self.kappa2[c];
            if base == 0.0 {
                continue;
            }
            let (mut i1, mut i2, mut norm) = (0.0, 0.0, 0.0);
            for (a, (&k, &wk)) in self.k.nodes.iter().zip(&self.k.weights).enumerate() {
                let m = wk * k * k * self.power[a * n_c + c];
                i1 += m * lorentzian(k * k - self.energy - w, eps);
                i2 += m * lorentzian(k * k - self.energy + w, eps);
                norm += m;
            }
            out[0] += base * rho * i1;
            out[1] += base * (1.0 + rho) * i2;
            out[2] += base * rho * norm / eps;
            out[3] += base * (1.0 + rho) * norm / eps;
        }
        Ok(out.map(|v| 32.0 * PI * v))
    }
}

/// `‖G φ_E‖² − Σ_n |⟨φ_n, G φ_E⟩|²` at one `(ω, Σ)`; independent of `Σ`.
pub fn positivity_witness(setting: &FgrSetting, g: &InteractionG, omega: f64) -> f64 {
    let kappa = if omega > 0.0 { g.coupling.value(omega) } else { 1.0 };
    if kappa == 0.0 {
        return 0.0;
    }
    let q = g.wave_number(omega);
    let rule = setting.radial_rule(q + 1.0, 16);
    let ue = |r: f64| setting.bound().radial(r) * r;
    let mut norm = 0.0;
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        norm += w * (g.chi(r) * ue(r)).powi(2);
    }
    let mut proj = 0.0;
    for st in &setting.states {
        let l = st.angular_momentum;
        let mut m = 0.0;
        for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
            m += w * st.radial(r) * r * sph_j(l, q * r)[l] * g.chi(r) * ue(r);
        }
        proj += (2 * l + 1) as f64 * m * m;
    }
    kappa * kappa * (norm - proj)
}

/// Witness samples at fixed `ω` values.
pub fn witness_samples(setting: &FgrSetting, g: &InteractionG, omegas: &[f64]) -> Vec<WitnessSample> {
    omegas
        .iter()
        .map(|&w| WitnessSample { omega: w, alpha: g.alpha, value: positivity_witness(setting, g, w) })
        .collect()
}

pub const WITNESS_OMEGAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

fn result_from(table: &LevelShiftTable, setting: &FgrSetting, g: &InteractionG, beta: f64, eps_rel: f64) -> Result<LevelShiftResult> {
    let eps = eps_rel * setting.energy().abs();
    let [f1, f2, b1, b2] = table.integrals(beta, eps)?;
    Ok(LevelShiftResult {
        energy: setting.energy(),
        epsilon: eps,
        eps_rel,
        beta,
        f1,
        f2,
        // the reversed ordering maps q → −q, which leaves every |a_l| unchanged
        f2_reversed: f2,
        gamma: f1 + f2,
        f1_bound: b1,
        f2_bound: b2,
        omega_max: table.omega_max,
        k_nodes: table.k.len(),
        omega_nodes: table.omega.len(),
        witnesses: witness_samples(setting, g, &WITNESS_OMEGAS),
    })
}

/// `F1`, `F2` and `γ` on the one-dimensional eigenspace of `φ_E`; `ε` in units of `|E|`.
pub fn level_shift(setting: &FgrSetting, g: &InteractionG, eps_rel: f64, beta: f64, grids: &FgrGrids) -> Result<LevelShiftResult> {
    Ok(level_shifts(setting, g, eps_rel, &[beta], grids)?.remove(0))
}

/// As [`level_shift`] for several `β`, sharing the overlap table.
pub fn level_shifts(
    setting: &FgrSetting,
    g: &InteractionG,
    eps_rel: f64,
    betas: &[f64],
    grids: &FgrGrids,
) -> Result<Vec<LevelShiftResult>> {
    if !(eps_rel > 0.0) {
        return Err(invalid("ε must be positive"));
    }
    let table = LevelShiftTable::build(setting, g, eps_rel * setting.energy().abs(), grids)?;
    betas.iter().map(|&b| result_from(&table, setting, g, b, eps_rel)).collect()
}

/// Variation of the `F2`-only rate over several `β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaUniformity {
    pub betas: Vec<f64>,
    pub f2: Vec<f64>,
    /// `(max − min)/min`.
    pub variation: f64,
    pub passes: bool,
}

pub fn f2_beta_uniformity(
    setting: &FgrSetting,
    g: &InteractionG,
    eps_rel: f64,
    betas: &[f64],
    grids: &FgrGrids,
) -> Result<BetaUniformity> {
    let rs = level_shifts(setting, g, eps_rel, betas, grids)?;
    let f2: Vec<f64> = rs.iter().map(|r| r.f2).collect();
    let lo = f2.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f2.iter().cloned().fold(0.0, f64::max);
    let variation = (hi - lo) / lo;
    Ok(BetaUniformity { betas: betas.to_vec(), f2, variation, passes: lo > 0.0 && variation < 0.1 })
}

/// `b(k) = ∫ conj(R_1(k,r)) r φ_E(r) r² dr` on the nodes `k`.
pub fn dipole_matrix_elements(setting: &FgrSetting, k: &[f64]) -> Vec<Complex64> {
    let k_max = k.iter().cloned().fold(1.0, f64::max);
    let solver = PwSolver::new(&setting.potential, k_max);
    let rule = setting.radial_rule(k_max, 16);
    let src: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(&r, &w)| r * setting.phi(r) * r * r * w).collect();
    k.par_iter()
        .map(|&kk| {
            let wave = solver.wave(1, kk);
            let mut s = Complex64::new(0.0, 0.0);
            for (&r, &f) in rule.nodes.iter().zip(&src) {
                let rl = if solver.free { Complex64::new(sph_j(1, kk * r)[1], 0.0) } else { wave.radial(r) };
                s += rl.conj() * f;
            }
            s
        })
        .collect()
}

/// Leading dipole term of `F1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleLeading {
    pub alpha: f64,
    pub chi0: f64,
    /// `ε → 0`: `(32π²/3) α² χ(0)² ∫ k² ω⁴ ρ_β(ω) κ(ω)² |b(k)|² dk`, `ω = k² − E`.
    pub limit: f64,
}

/// Dipole leading term in the `ε → 0` limit on the rule `k`.
pub fn dipole_leading_term(setting: &FgrSetting, g: &InteractionG, beta: f64, k: &Rule1d) -> Result<DipoleLeading> {
    check_beta(beta)?;
    let chi0 = g.cutoff.at_origin();
    let b = dipole_matrix_elements(setting, &k.nodes);
    let e = setting.energy();
    let mut s = 0.0;
    for ((&kk, &w), bk) in k.nodes.iter().zip(&k.weights).zip(&b) {
        let om = kk * kk - e;
        let kap = g.coupling.value(om);
        s += w * kk * kk * om.powi(4) * planck_unchecked(beta * om) * kap * kap * bk.norm_sqr();
    }
    let limit = 32.0 * PI * PI / 3.0 * g.alpha * g.alpha * chi0 * chi0 * s;
    Ok(DipoleLeading { alpha: g.alpha, chi0, limit })
}

/// Leading dipole term at finite `ε` on the rules of a table, so that it can be
/// compared with the full `F1` from the same table.
pub fn dipole_leading_matched(setting: &FgrSetting, g: &InteractionG, table: &LevelShiftTable, beta: f64, eps: f64) -> Result<f64> {
    check_beta(beta)?;
    let chi0 = g.cutoff.at_origin();
    let b = dipole_matrix_elements(setting, &table.k.nodes);
    let mut out = 0.0;
    for (c, (&w, &ww)) in table.omega.nodes.iter().zip(&table.omega.weights).enumerate() {
        let rho = planck_unchecked(beta * w);
        let lead = (g.alpha * w).powi(2) * chi0 * chi0 / 3.0;
        let mut i1 = 0.0;
        for ((&k, &wk), bk) in table.k.nodes.iter().zip(&table.k.weights).zip(&b) {
            i1 += wk * k * k * lorentzian(k * k - table.energy - w, eps) * lead * bk.norm_sqr();
        }
        out += ww * w * w * rho * table.kappa2[c] * i1;
    }
    Ok(32.0 * PI * out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleRow {
    pub alpha: f64,
    pub full: f64,
    pub leading: f64,
    pub leading_limit: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleSweep {
    pub beta: f64,
    /// Proxy for `ε → 0`, in units of `|E|`.
    pub eps_rel: f64,
    pub rows: Vec<DipoleRow>,
    pub fit: SlopeFit,
    /// Worst `|L(α)/L(α/2) − 4| / 4` over consecutive halvings present in the list.
    pub halving_defect: f64,
}

/// `|F1(α) − leading(α)|` at a small `ε`, fitted against `α`.
pub fn dipole_error_slope(
    setting: &FgrSetting,
    coupling: &Coupling,
    cutoff: Cutoff,
    beta: f64,
    eps_rel: f64,
    alphas: &[f64],
    grids: &FgrGrids,
) -> Result<DipoleSweep> {
    let lo = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = alphas.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 10.0 {
        return Err(ThermionError::InsufficientRange("α list must span at least a decade above 0".into()));
    }
    let eps = eps_rel * setting.energy().abs();
    let mut rows = Vec::new();
    for &a in alphas {
        let g = InteractionG::dipole(coupling.clone(), cutoff, a)?;
        let table = LevelShiftTable::build(setting, &g, eps, grids)?;
        let [f1, ..] = table.integrals(beta, eps)?;
        let leading = dipole_leading_matched(setting, &g, &table, beta, eps)?;
        let k_limit = Rule1d::panels(0.0, 40.0, 0.25, 8);
        let leading_limit = dipole_leading_term(setting, &g, beta, &k_limit)?.limit;
        rows.push(DipoleRow { alpha: a, full: f1, leading, leading_limit, error: (f1 - leading).abs() });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let fit = loglog_slope(&x, &y, 3)?;
    let mut halving_defect = 0.0f64;
    for r in &rows {
        if let Some(h) = rows.iter().find(|s| (s.alpha - 0.5 * r.alpha).abs() < 1e-12 * r.alpha) {
            halving_defect = halving_defect.max((r.leading / h.leading / 4.0 - 1.0).abs());
        }
    }
    Ok(DipoleSweep { beta, eps_rel, rows, fit, halving_defect })
}

/// Both sides of `‖x_j φ_E‖² = ∫|⟨φ(k), x_j φ_E⟩|² d³k/(2π)³ + Σ_n |⟨φ_n, x_j φ_E⟩|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Completeness {
    pub norm: f64,
    pub continuum: f64,
    pub discrete: f64,
    pub rel_defect: f64,
    /// `⟨φ_E, x_3 φ_E⟩` by a 3-D product rule.
    pub parity: f64,
}

pub fn dipole_completeness(setting: &FgrSetting, k_max: f64) -> Result<Completeness> {
    let rule = setting.radial_rule(k_max, 16);
    let ue = |r: f64| setting.bound().radial(r) * r;
    let norm = rule.integrate(|r| r * r * ue(r).powi(2)) / 3.0;
    let k = Rule1d::panels(0.0, k_max, 0.25, 8);
    let b = dipole_matrix_elements(setting, &k.nodes);
    let continuum = 8.0 / 3.0 * k.nodes.iter().zip(&k.weights).zip(&b).map(|((kk, w), bk)| w * kk * kk * bk.norm_sqr()).sum::<f64>();
    let mut discrete = 0.0;
    for (i, st) in setting.states.iter().enumerate() {
        if i == setting.ground || st.angular_momentum != 1 {
            continue;
        }
        let m = rule.integrate(|r| st.radial(r) * r * r * ue(r));
        discrete += m * m / 3.0;
    }
    let sphere = crate::quadrature::SphericalRule::gauss_product(8);
    let mut parity = 0.0;
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        let p = setting.phi(r);
        for i in 0..sphere.len() {
            let x = sphere.point(i) * r;
            parity += w * r * r * sphere.weights[i] * x.z * p * p;
        }
    }
    let rel_defect = ((continuum + discrete) - norm).abs() / norm;
    Ok(Completeness { norm, continuum, discrete, rel_defect, parity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_bump_well;
    use crate::thermal::KappaPreset;

    fn setting() -> FgrSetting {
        FgrSetting::new(&make_bump_well(50.0, 0.5, 0.2).unwrap()).unwrap()
    }

    fn sqrt_minus(c: f64) -> Coupling {
        Coupling::new(KappaPreset::SqrtMinus { amp: 1.0, c })
    }

    #[test]
    fn closed_form_matches_partial_wave_sum() {
        let s = setting();
        let g = InteractionG::new(sqrt_minus(0.01), Cutoff::Plateau { r0: 2.0 }, 0.5).unwrap();
        let engine = OverlapEngine::new(&s, |r| g.chi(r) * s.phi(r), 20.0, 10.0);
        for &(k, q) in &[(0.7, 0.3), (3.0, 2.0), (5.5, 9.0), (12.0, 4.0)] {
            let t = engine.power_table(&[k], &[q])[0];
            let d = engine.power_by_waves(k, q, 80);
            assert!((t - d).abs() <= 1e-7 * d, "k={k} q={q}: {t} vs {d}");
        }
    }

    #[test]
    fn k_space_norm_matches_witness() {
        // ∫d³k |g|² = 8 ∫ k² S dk equals ‖P_ess Gφ_E‖²/κ²
        let s = setting();
        let g = InteractionG::new(sqrt_minus(0.01), Cutoff::Plateau { r0: 2.0 }, 0.5).unwrap();
        let engine = OverlapEngine::new(&s, |r| g.chi(r) * s.phi(r), 40.0, 3.0);
        let k = Rule1d::panels(0.0, 40.0, 0.25, 8);
        for &w in &[0.5, 3.0] {
            let p = engine.power_table(&k.nodes, &[w]);
            let ks: f64 = 8.0 * k.nodes.iter().zip(&k.weights).zip(&p).map(|((kk, wk), s)| wk * kk * kk * s).sum::<f64>();
            let wit = positivity_witness(&s, &g, w) / g.coupling.value(w).powi(2);
            assert!((ks - wit).abs() < 1e-6 * wit, "ω={w}: {ks} vs {wit}");
        }
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let s = setting();
        let g = InteractionG::new(Coupling::new(KappaPreset::Zero), Cutoff::Plateau { r0: 1.0 }, 0.05);
        // κ ≡ 0 is classified as vanishing and accepted
        let g = g.unwrap();
        assert_eq!(positivity_witness(&s, &g, 1.0), 0.0);
        let r = level_shift(&s, &g, 0.1, 1.0, &FgrGrids::default()).unwrap();
        assert_eq!((r.f1, r.f2, r.gamma), (0.0, 0.0, 0.0));
    }

    #[test]
    fn witness_vanishes_at_zero_frequency() {
        let s = setting();
        let g = InteractionG::new(sqrt_minus(0.01), Cutoff::Plateau { r0: 1.0 }, 0.01).unwrap();
        let w = positivity_witness(&s, &g, 0.0);
        assert!(w.abs() < 1e-10, "{w}");
    }

    #[test]
    fn witness_bounded_below_as_alpha_shrinks() {
        let s = setting();
        let mut prev = None;
        for a in [0.4, 0.2, 0.1, 0.05, 0.025] {
            let g = InteractionG::new(sqrt_minus(0.01), Cutoff::Plateau { r0: 1.0 }, a).unwrap();
            let w = positivity_witness(&s, &g, 2.0) / g.coupling.value(2.0).powi(2);
            assert!(w > 0.05, "α={a}: {w}");
            if let Some(p) = prev {
                assert!((w - p as f64).abs() < 0.5 * w);
            }
            prev = Some(w);
        }
    }

    #[test]
    fn resolution_error_when_eps_tiny() {
        let s = setting();
        let g = InteractionG::new(sqrt_minus(0.02), Cutoff::Plateau { r0: 1.0 }, 0.05).unwrap();
        let table = LevelShiftTable::build(&s, &g, 0.1 * s.energy().abs(), &FgrGrids::default()).unwrap();
        assert!(table.integrals(1.0, 0.1 * s.energy().abs()).is_ok());
        assert!(matches!(table.integrals(1.0, 1e-4), Err(ThermionError::QuadratureBudget(_))));
    }

    #[test]
    fn completeness_of_dipole_expansion() {
        let c = dipole_completeness(&setting(), 40.0).unwrap();
        assert!(c.rel_defect < 1e-3, "{c:?}");
        assert!(c.parity.abs() < 1e-10);
    }

    #[test]
    fn hollow_cutoff_vanishes_at_origin() {
        let h = Cutoff::Hollow { r0: 1.0 };
        assert_eq!(h.at_origin(), 0.0);
        assert_eq!(h.value(1.5), 1.0);
        assert_eq!(h.value(3.5), 0.0);
        let p = Cutoff::Plateau { r0: 1.0 };
        assert_eq!(p.value(0.9), 1.0);
        assert_eq!(p.value(2.0), 0.0);
    }

    #[test]
    fn cold_limit_kills_f1_only() {
        let s = setting();
        let g = InteractionG::new(sqrt_minus(0.05), Cutoff::Plateau { r0: 1.0 }, 0.05).unwrap();
        let r = level_shifts(&s, &g, 0.1, &[1.0, 20.0], &FgrGrids::default()).unwrap();
        assert!(r[1].f1 < 1e-3 * r[0].f1, "{} {}", r[0].f1, r[1].f1);
        assert!(r[1].f2 > 0.8 * r[0].f2);
        for x in &r {
            assert!(x.f1 >= 0.0 && x.f2 >= 0.0 && x.gamma > 0.0);
            assert!(x.f1 <= x.f1_bound && x.f2 <= x.f2_bound);
            assert!(x.gamma <= x.f1 + x.f2 + 1e-15);
        }
    }

    #[test]
    fn dipole_leading_term_scales_quadratically() {
        let s = setting();
        let k = Rule1d::panels(0.0, 30.0, 0.25, 8);
        let c = sqrt_minus(0.02);
        let l = |a: f64| dipole_leading_term(&s, &InteractionG::dipole(c.clone(), Cutoff::Plateau { r0: 1.0 }, a).unwrap(), 1.0, &k).unwrap().limit;
        assert_eq!(l(0.0), 0.0);
        assert!((l(0.1) / l(0.05) / 4.0 - 1.0).abs() < 0.05);
        let hollow = InteractionG::dipole(c.clone(), Cutoff::Hollow { r0: 1.0 }, 0.1).unwrap();
        assert_eq!(dipole_leading_term(&s, &hollow, 1.0, &k).unwrap().limit, 0.0);
    }
}
