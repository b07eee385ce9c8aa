//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ThermionError};

/// Every knob a command reads. Defaults reproduce the reference run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub well_depth: f64,
    pub well_radius: f64,
    pub smoothness: f64,
    /// Radial Gauss nodes of the Nyström support grid.
    pub radial_nodes: usize,
    /// Angular rule of the Nyström support grid (`lebedev26`, `gauss8`, ...).
    pub spherical_rule: String,
    /// Gauss nodes per x panel of the transform grid.
    pub x_nodes: usize,
    /// Gauss nodes per k panel of the transform grid.
    pub k_nodes: usize,
    /// Polar nodes of both transform spheres.
    pub polar: usize,
    /// Gauss nodes per panel of the level-shift ω and k rules.
    pub fgr_nodes: usize,
    /// Step in `ln u` of the oracle photon grid.
    pub u_step: f64,
    pub mu_nodes: usize,
    pub k: [f64; 3],
    pub p: Vec<usize>,
    pub kmin: f64,
    pub kmax: f64,
    pub samples: usize,
    pub kappa_sweep: Sweep,
    pub pairs: usize,
    pub betas: Vec<f64>,
    pub spread_betas: Vec<f64>,
    pub uniformity_betas: Vec<f64>,
    pub epsilon: f64,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub dipole_epsilon: f64,
    pub kappa: String,
    pub kappa_c: f64,
    pub thermal_kappa_c: f64,
    pub cutoff_r0: f64,
    pub out: PathBuf,
    pub seed: u64,
    /// 0 means the available parallelism.
    pub workers: usize,
}

/// `lo:hi:log[:n]` or `lo:hi:lin[:n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
    pub n: usize,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(cfg_err(format!("sweep `{s}` is not lo:hi:log[:n]")));
        }
        let lo = parse_f64("sweep", parts[0])?;
        let hi = parse_f64("sweep", parts[1])?;
        let log = match parts[2] {
            "log" => true,
            "lin" => false,
            other => return Err(cfg_err(format!("sweep spacing `{other}` is neither log nor lin"))),
        };
        let n = match parts.get(3) {
            Some(v) => parse_usize("sweep", v)?,
            None => 9,
        };
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(cfg_err(format!("sweep `{s}` needs 0 < lo < hi and n ≥ 2")));
        }
        Ok(Sweep { lo, hi, log, n })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.log {
            crate::fit::logspace(self.lo, self.hi, self.n)
        } else {
            (0..self.n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64).collect()
        }
    }
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}:{}", self.lo, self.hi, if self.log { "log" } else { "lin" }, self.n)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            well_depth: 50.0,
            well_radius: 0.5,
            smoothness: 0.2,
            radial_nodes: 12,
            spherical_rule: "gauss8".into(),
            x_nodes: 10,
            k_nodes: 8,
            polar: 8,
            fgr_nodes: 8,
            u_step: 0.2,
            mu_nodes: 24,
            k: [0.0, 0.0, 3.0],
            p: vec![3, 5],
            kmin: 5.0,
            kmax: 40.0,
            samples: 12,
            kappa_sweep: Sweep { lo: 1.0, hi: 100.0, log: true, n: 9 },
            pairs: 20,
            betas: vec![1.0],
            spread_betas: vec![0.25, 1.0, 4.0],
            uniformity_betas: vec![1.0, 2.0, 4.0, 10.0],
            epsilon: 0.1,
            alpha: 0.05,
            alphas: vec![0.01, 0.02, 0.04, 0.08, 0.16, 0.2],
            dipole_epsilon: 0.01,
            kappa: "sqrt_minus".into(),
            kappa_c: 0.02,
            thermal_kappa_c: 1.0,
            cutoff_r0: 1.0,
            out: PathBuf::from("thermion-out"),
            seed: 1,
            workers: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "well_depth",
    "well_radius",
    "smoothness",
    "radial_nodes",
    "spherical_rule",
    "x_nodes",
    "k_nodes",
    "polar",
    "fgr_nodes",
    "u_step",
    "mu_nodes",
    "k",
    "p",
    "kmin",
    "kmax",
    "samples",
    "kappa_sweep",
    "pairs",
    "betas",
    "spread_betas",
    "uniformity_betas",
    "epsilon",
    "alpha",
    "alphas",
    "dipole_epsilon",
    "kappa",
    "kappa_c",
    "thermal_kappa_c",
    "cutoff_r0",
    "out",
    "seed",
    "workers",
];

fn cfg_err(msg: impl Into<String>) -> ThermionError {
    ThermionError::Config(msg.into())
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| cfg_err(format!("{key}: `{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| cfg_err(format!("{key}: `{v}` is not a non-negative integer")))
}

fn parse_list<T>(key: &str, v: &str, one: fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    let out: Vec<T> = v.split(',').map(|s| one(key, s)).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(cfg_err(format!("{key}: empty list")));
    }
    Ok(out)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "well_depth" => self.well_depth = parse_f64(key, v)?,
            "well_radius" => self.well_radius = parse_f64(key, v)?,
            "smoothness" => self.smoothness = parse_f64(key, v)?,
            "radial_nodes" => self.radial_nodes = parse_usize(key, v)?,
            "spherical_rule" => self.spherical_rule = v.to_string(),
            "x_nodes" => self.x_nodes = parse_usize(key, v)?,
            "k_nodes" => self.k_nodes = parse_usize(key, v)?,
            "polar" => self.polar = parse_usize(key, v)?,
            "fgr_nodes" => self.fgr_nodes = parse_usize(key, v)?,
            "u_step" => self.u_step = parse_f64(key, v)?,
            "mu_nodes" => self.mu_nodes = parse_usize(key, v)?,
            "k" => {
                let k = parse_list(key, v, parse_f64)?;
                self.k = k.try_into().map_err(|_| cfg_err("k: need exactly three components"))?;
            }
            "p" => self.p = parse_list(key, v, parse_usize)?,
            "kmin" => self.kmin = parse_f64(key, v)?,
            "kmax" => self.kmax = parse_f64(key, v)?,
            "samples" => self.samples = parse_usize(key, v)?,
            "kappa_sweep" => self.kappa_sweep = Sweep::parse(v)?,
            "pairs" => self.pairs = parse_usize(key, v)?,
            "betas" => self.betas = parse_list(key, v, parse_f64)?,
            "spread_betas" => self.spread_betas = parse_list(key, v, parse_f64)?,
            "uniformity_betas" => self.uniformity_betas = parse_list(key, v, parse_f64)?,
            "epsilon" => self.epsilon = parse_f64(key, v)?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "alphas" => self.alphas = parse_list(key, v, parse_f64)?,
            "dipole_epsilon" => self.dipole_epsilon = parse_f64(key, v)?,
            "kappa" => self.kappa = v.to_string(),
            "kappa_c" => self.kappa_c = parse_f64(key, v)?,
            "thermal_kappa_c" => self.thermal_kappa_c = parse_f64(key, v)?,
            "cutoff_r0" => self.cutoff_r0 = parse_f64(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = v.parse().map_err(|_| cfg_err(format!("seed: `{v}` is not an integer")))?,
            "workers" => self.workers = parse_usize(key, v)?,
            other => return Err(cfg_err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. Repeated keys are an error.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| cfg_err(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(cfg_err(format!("line {}: `{key}` given twice", n + 1)));
            }
            self.set(key, value).map_err(|e| match e {
                ThermionError::Config(m) => cfg_err(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Text form of one key, as accepted by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "well_depth" => self.well_depth.to_string(),
            "well_radius" => self.well_radius.to_string(),
            "smoothness" => self.smoothness.to_string(),
            "radial_nodes" => self.radial_nodes.to_string(),
            "spherical_rule" => self.spherical_rule.clone(),
            "x_nodes" => self.x_nodes.to_string(),
            "k_nodes" => self.k_nodes.to_string(),
            "polar" => self.polar.to_string(),
            "fgr_nodes" => self.fgr_nodes.to_string(),
            "u_step" => self.u_step.to_string(),
            "mu_nodes" => self.mu_nodes.to_string(),
            "k" => join(&self.k),
            "p" => join(&self.p),
            "kmin" => self.kmin.to_string(),
            "kmax" => self.kmax.to_string(),
            "samples" => self.samples.to_string(),
            "kappa_sweep" => self.kappa_sweep.to_string(),
            "pairs" => self.pairs.to_string(),
            "betas" => join(&self.betas),
            "spread_betas" => join(&self.spread_betas),
            "uniformity_betas" => join(&self.uniformity_betas),
            "epsilon" => self.epsilon.to_string(),
            "alpha" => self.alpha.to_string(),
            "alphas" => join(&self.alphas),
            "dipole_epsilon" => self.dipole_epsilon.to_string(),
            "kappa" => self.kappa.clone(),
            "kappa_c" => self.kappa_c.to_string(),
            "thermal_kappa_c" => self.thermal_kappa_c.to_string(),
            "cutoff_r0" => self.cutoff_r0.to_string(),
            "out" => self.out.display().to_string(),
            "seed" => self.seed.to_string(),
            "workers" => self.workers.to_string(),
            _ => return None,
        })
    }

    /// The whole config as `key = value` lines, re-readable by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default())).collect()
    }

    /// Range checks on the resolved values.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("well_radius", self.well_radius),
            ("smoothness", self.smoothness),
            ("u_step", self.u_step),
            ("kmin", self.kmin),
            ("kmax", self.kmax),
            ("epsilon", self.epsilon),
            ("dipole_epsilon", self.dipole_epsilon),
            ("kappa_c", self.kappa_c),
            ("thermal_kappa_c", self.thermal_kappa_c),
            ("cutoff_r0", self.cutoff_r0),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg_err(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.well_depth >= 0.0 && self.well_depth.is_finite()) {
            return Err(cfg_err("well_depth must be non-negative"));
        }
        if self.smoothness > self.well_radius {
            return Err(cfg_err("smoothness cannot exceed well_radius"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(cfg_err("alpha must be non-negative"));
        }
        let counts = [
            ("radial_nodes", self.radial_nodes),
            ("x_nodes", self.x_nodes),
            ("k_nodes", self.k_nodes),
            ("polar", self.polar),
            ("fgr_nodes", self.fgr_nodes),
            ("mu_nodes", self.mu_nodes),
            ("samples", self.samples),
            ("pairs", self.pairs),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err(cfg_err(format!("{k} must be at least 1")));
            }
        }
        if self.kmax <= self.kmin {
            return Err(cfg_err("kmax must exceed kmin"));
        }
        for (k, list) in [("betas", &self.betas), ("spread_betas", &self.spread_betas), ("uniformity_betas", &self.uniformity_betas), ("alphas", &self.alphas)] {
            if list.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                return Err(cfg_err(format!("{k} entries must be positive")));
            }
        }
        if self.p.contains(&0) {
            return Err(cfg_err("p entries must be at least 1"));
        }
        if !self.k.iter().all(|c| c.is_finite()) {
            return Err(cfg_err("k must be finite"));
        }
        crate::quadrature::SphericalRule::by_name(&self.spherical_rule).map_err(|e| cfg_err(e.to_string()))?;
        crate::thermal::KappaPreset::by_name(&self.kappa, self.kappa_c).map_err(|e| cfg_err(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.set("betas", "1,10").unwrap();
        c.set("kappa_sweep", "1:100:log:5").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn unknown_and_repeated_keys_rejected() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("colour = blue"), Err(ThermionError::Config(_))));
        assert!(c.apply_text("epsilon = 0.1\nepsilon = 0.2").is_err());
        assert!(c.apply_text("epsilon 0.1").is_err());
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let mut c = RunConfig::default();
        c.apply_text("# run\n\nwell_depth = 40 # shallower\n").unwrap();
        assert_eq!(c.well_depth, 40.0);
    }

    #[test]
    fn every_key_has_a_text_form() {
        let c = RunConfig::default();
        for k in KEYS {
            assert!(c.get(k).is_some(), "{k}");
        }
        assert!(c.get("nope").is_none());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.kappa = "quartic".into();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.kmax = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_parsing() {
        let s = Sweep::parse("1:100:log").unwrap();
        assert_eq!(s.n, 9);
        let p = s.points();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[8] - 100.0).abs() < 1e-9);
        assert!(Sweep::parse("1:100").is_err());
        assert!(Sweep::parse("5:1:log").is_err());
        assert_eq!(Sweep::parse("1:3:lin:3").unwrap().points(), vec![1.0, 2.0, 3.0]);
    }
}
