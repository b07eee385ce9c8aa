//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::born::{born_expansion, eval_set, remainder_decay_fit, stationary_phase_probe, BumpFunction};
use crate::config::RunConfig;
use crate::error::{Result, ThermionError};
use crate::fgr::{
    dipole_completeness, dipole_error_slope, f2_beta_uniformity, level_shifts, Cutoff, FgrGrids, FgrSetting, InteractionG,
};
use crate::fit::logspace;
use crate::oracle::{oracle_check, OracleGrids};
use crate::potential::{make_bump_well, Potential};
use crate::quadrature::Vec3;
use crate::report::{write_csv, write_json, Check, Report, Table};
use crate::scattering::dilation::{dilation_commutator_check, DilationGrid, MomentumTest};
use crate::scattering::grid::SupportGrid;
use crate::scattering::nystrom::{plane_wave, recover_phi, solve_scattering_state};
use crate::scattering::partial_wave::PwSolver;
use crate::scattering::transform::{spectral_identities_check, TestFunction, Transform, TransformGrids};
use crate::spheroidal::{klein_zemach_direct, klein_zemach_spheroidal, klein_zemach_sweep, sample_pairs, DirectOptions, SpheroidalOptions, SpheroidalTable};
use crate::thermal::{glue_identities, glued_norm_spread, rho_bounds_check, rho_grid, Coupling, KappaPreset};

pub const WORKERS_ENV: &str = "THERMION_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "thermion", version, about = "Scattering, Born decay, spheroidal integrals and level-shift checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    /// Worker threads (falls back to THERMION_WORKERS, then the config, then all cores).
    #[arg(long, global = true, value_name = "N", allow_hyphen_values = true)]
    pub workers: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub well_depth: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub well_radius: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub smoothness: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub seed: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for one scattering state and compare with the partial-wave solution.
    Scatter {
        /// Momentum `kx,ky,kz`.
        #[arg(long, allow_hyphen_values = true)]
        k: Option<String>,
    },
    /// Parseval, intertwining, reconstruction and Mourre defects.
    SpectralCheck,
    /// Decay of Born remainders and of bump Fourier transforms.
    BornDecay {
        #[arg(long, allow_hyphen_values = true)]
        p: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        kmin: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        kmax: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        samples: Option<String>,
    },
    /// Two-centre oscillatory integrals against κ.
    KleinZemach {
        /// `lo:hi:log[:n]`.
        #[arg(long, allow_hyphen_values = true)]
        kappa_sweep: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        pairs: Option<String>,
    },
    /// Planck-factor bounds, glued norms and detailed balance.
    ThermalCheck {
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
    },
    /// Level-shift integrals, β-uniformity and the dipole expansion.
    Fgr {
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Matrix oracle for the level-shift operator.
    Oracle {
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Every command above.
    All,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Form factor preset name.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Scatter { .. } => "scatter",
            Command::SpectralCheck => "spectral-check",
            Command::BornDecay { .. } => "born-decay",
            Command::KleinZemach { .. } => "klein-zemach",
            Command::ThermalCheck { .. } => "thermal-check",
            Command::Fgr { .. } => "fgr",
            Command::Oracle { .. } => "oracle",
            Command::All => "all",
        }
    }

    fn overrides(&self) -> Vec<(&'static str, Option<&String>)> {
        match self {
            Command::Scatter { k } => vec![("k", k.as_ref())],
            Command::BornDecay { p, kmin, kmax, samples } => {
                vec![("p", p.as_ref()), ("kmin", kmin.as_ref()), ("kmax", kmax.as_ref()), ("samples", samples.as_ref())]
            }
            Command::KleinZemach { kappa_sweep, pairs } => vec![("kappa_sweep", kappa_sweep.as_ref()), ("pairs", pairs.as_ref())],
            Command::ThermalCheck { beta } => vec![("betas", beta.as_ref())],
            Command::Fgr { field } | Command::Oracle { field } => vec![
                ("betas", field.beta.as_ref()),
                ("epsilon", field.epsilon.as_ref()),
                ("alpha", field.alpha.as_ref()),
                ("kappa", field.kappa.as_ref()),
            ],
            Command::SpectralCheck | Command::All => Vec::new(),
        }
    }
}

/// Defaults, then the config file, then `THERMION_WORKERS`, then flags.
pub fn resolve_config(cli: &Cli, env_workers: Option<String>) -> Result<RunConfig> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let (None, Some(w)) = (&cli.global.workers, env_workers) {
        cfg.set("workers", &w).map_err(|e| ThermionError::Config(format!("{WORKERS_ENV}: {e}")))?;
    }
    let g = &cli.global;
    let mut flags = vec![
        ("out", g.out.as_ref()),
        ("workers", g.workers.as_ref()),
        ("well_depth", g.well_depth.as_ref()),
        ("well_radius", g.well_radius.as_ref()),
        ("smoothness", g.smoothness.as_ref()),
        ("seed", g.seed.as_ref()),
    ];
    flags.extend(cli.command.overrides());
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Result of one command before it is written out.
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

fn potential(cfg: &RunConfig) -> Result<Potential> {
    make_bump_well(cfg.well_depth, cfg.well_radius, cfg.smoothness)
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// `n` seeded points uniform in the shell `r_in ≤ |x| ≤ r_out`.
pub fn shell_points(seed: u64, r_in: f64, r_out: f64, n: usize) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = r_in / r_out;
    (0..n)
        .map(|_| loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let r = v.norm();
            if r <= 1.0 && r >= lo {
                break v * r_out;
            }
        })
        .collect()
}

pub fn ball_points(seed: u64, radius: f64, n: usize) -> Vec<Vec3> {
    shell_points(seed, 0.0, radius, n)
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn scatter(cfg: &RunConfig) -> Result<Outcome> {
    let pot = potential(cfg)?;
    let k = vec3(cfg.k);
    let tol = 1e-8;
    let grid = SupportGrid::new(&pot, cfg.radial_nodes, &cfg.spherical_rule)?;
    let state = solve_scattering_state(&pot, k, &grid, tol)?;
    // outside the support the recovery kernel is smooth
    let points = shell_points(cfg.seed, 1.1 * pot.support_radius, 3.0 * pot.support_radius, 16);
    let phi = recover_phi(&state, &points);
    let reference = PwSolver::new(&pot, k.norm().max(1.0)).phi(&k, &points);
    let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let agreement = max_abs_diff(&phi, &reference) / scale;

    let free = Potential::zero(pot.support_radius);
    let free_grid = SupportGrid::new(&free, cfg.radial_nodes, &cfg.spherical_rule)?;
    let free_state = solve_scattering_state(&free, k, &free_grid, tol)?;
    let plane: Vec<Complex64> = points.iter().map(|x| plane_wave(&k, x)).collect();
    let free_defect = max_abs_diff(&recover_phi(&free_state, &points), &plane);

    let checks = vec![
        Check::at_most("residual", state.residual, tol),
        Check::at_most("free_recover_phi", free_defect, 1e-12),
        Check::at_most("nystrom_vs_partial_wave", agreement, 2e-2),
    ];
    let mut st = Table::new("scatter_state", &["x", "y", "z", "weight", "re", "im"]);
    for (i, z) in state.phi_tilde.iter().enumerate() {
        let n = grid.nodes[i];
        st.push(vec![n[0], n[1], n[2], grid.weights[i], z.re, z.im]);
    }
    let mut pt = Table::new("scatter_phi", &["x", "y", "z", "re", "im", "re_partial_wave", "im_partial_wave"]);
    for ((x, a), b) in points.iter().zip(&phi).zip(&reference) {
        pt.push(vec![x.x, x.y, x.z, a.re, a.im, b.re, b.im]);
    }
    let result = json!({
        "k": cfg.k,
        "nodes": grid.len(),
        "residual": state.residual,
        "points": points.len(),
        "nystrom_vs_partial_wave": agreement,
        "free_recover_phi": free_defect,
    });
    Ok(Outcome { report: Report::new("scatter", cfg, checks, result), tables: vec![st, pt] })
}

pub fn transform_grids(cfg: &RunConfig) -> TransformGrids {
    TransformGrids { x_per_panel: cfg.x_nodes, k_per_panel: cfg.k_nodes, x_polar: cfg.polar, k_polar: cfg.polar, ..TransformGrids::default() }
}

pub fn spectral_check(cfg: &RunConfig) -> Result<Outcome> {
    let pot = potential(cfg)?;
    let grids = transform_grids(cfg);
    let battery = TestFunction::battery();
    let coarse = spectral_identities_check(&pot, &Transform::from_grids(&pot, &grids)?, &battery);
    let fine = spectral_identities_check(&pot, &Transform::from_grids(&pot, &grids.refined())?, &battery);
    let mourre = dilation_commutator_check(&DilationGrid::default(), &MomentumTest::battery())?;
    let mut checks = Vec::new();
    for (name, a, b) in [
        ("parseval", coarse.parseval_defect, fine.parseval_defect),
        ("intertwining", coarse.intertwining_defect, fine.intertwining_defect),
        ("reconstruction", coarse.reconstruction_defect, fine.reconstruction_defect),
    ] {
        checks.push(Check::at_most(format!("{name}_defect"), a, 1e-3));
        checks.push(Check::below(format!("{name}_refined_over_default"), b / a, 1.0));
    }
    checks.push(Check::at_most("bound_leakage", coarse.bound_leakage, 1e-3));
    checks.push(Check::at_most("mourre_defect", mourre.defect, 1e-2));
    checks.push(Check::at_most("mourre_refined_over_default", mourre.refined_defect / mourre.defect, 0.5));
    let mut t = Table::new("spectral", &["level", "function", "parseval", "intertwining", "reconstruction"]);
    for (level, rep) in [(0.0, &coarse), (1.0, &fine)] {
        for (i, r) in rep.rows.iter().enumerate() {
            t.push(vec![level, i as f64, r.parseval_defect, r.intertwining_defect, r.reconstruction_defect]);
        }
    }
    let mut m = Table::new("mourre", &["function", "defect", "refined_defect", "form_imag"]);
    for (i, r) in mourre.rows.iter().enumerate() {
        m.push(vec![i as f64, r.defect, r.refined_defect, r.form_imag]);
    }
    let result = json!({
        "grids": to_value(&grids)?,
        "default": to_value(&coarse)?,
        "refined": to_value(&fine)?,
        "mourre": to_value(&mourre)?,
    });
    Ok(Outcome { report: Report::new("spectral-check", cfg, checks, result), tables: vec![t, m] })
}

pub fn born_decay(cfg: &RunConfig) -> Result<Outcome> {
    let pot = potential(cfg)?;
    let dir = Vec3::new(0.0, 0.0, 1.0);
    let ks = logspace(cfg.kmin, cfg.kmax, cfg.samples);
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    let mut t = Table::new("born_decay", &["p", "k", "sup", "slope"]);
    for &p in &cfg.p {
        let fit = remainder_decay_fit(&pot, p, &ks, dir)?;
        checks.push(Check::at_least(format!("remainder_exponent_p{p}"), fit.exponent, fit.expected - fit.slack));
        for (k, s) in fit.k.iter().zip(&fit.sup) {
            t.push(vec![p as f64, *k, *s, fit.fit.slope]);
        }
        fits.push(fit);
    }
    let bump = BumpFunction { center: [0.1, 0.0, -0.2], radius: pot.support_radius };
    let mut probes = Vec::new();
    let mut s = Table::new("stationary_phase", &["n", "k", "value", "slope"]);
    for n in 1..=3 {
        let probe = stationary_phase_probe(&bump, n, &ks, Vec3::new(1.0, 2.0, 2.0))?;
        checks.push(Check::at_most(format!("stationary_phase_slope_n{n}"), probe.fit.slope, -(n as f64) + 0.3));
        for (k, v) in probe.k.iter().zip(&probe.values) {
            s.push(vec![n as f64, *k, *v, probe.fit.slope]);
        }
        probes.push(probe);
    }
    let free = Potential::zero(pot.support_radius);
    let exp = born_expansion(&free, dir * cfg.kmin, 3, &eval_set(&free))?;
    let free_terms = exp.terms[1..].iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    checks.push(Check::at_most("free_born_terms", free_terms, 1e-12));
    let result = json!({ "remainder": to_value(&fits)?, "stationary_phase": to_value(&probes)?, "free_born_terms": free_terms });
    Ok(Outcome { report: Report::new("born-decay", cfg, checks, result), tables: vec![t, s] })
}

pub fn klein_zemach(cfg: &RunConfig) -> Result<Outcome> {
    let pot = potential(cfg)?;
    let kappas = cfg.kappa_sweep.points();
    let pairs = sample_pairs(pot.support_radius, cfg.pairs);
    let sweep = klein_zemach_sweep(&pot, &kappas, &pairs, 0, 0)?;
    let mut checks = vec![Check::at_most("sup_slope", sweep.fit.slope, -0.7)];

    let mut small: Vec<f64> = kappas.iter().copied().filter(|k| *k <= 5.0).collect();
    small.extend([1.0, 3.0, 5.0]);
    small.sort_by(f64::total_cmp);
    small.dedup();
    let check_pairs: Vec<(Vec3, Vec3)> = {
        let p = ball_points(cfg.seed, pot.support_radius, 4);
        vec![(p[0], p[1]), (p[2], p[3])]
    };
    let mut worst: f64 = 0.0;
    let mut warned = 0.0;
    let mut a = Table::new("klein_zemach_agreement", &["pair", "n1", "n2", "kappa", "spheroidal_re", "spheroidal_im", "direct_re", "direct_im", "rel_diff"]);
    for (i, (x, xp)) in check_pairs.iter().enumerate() {
        for (n1, n2) in [(0, 0), (1, 2)] {
            let table = SpheroidalTable::new(&pot, *x, *xp, n1, n2, 5.0, &SpheroidalOptions::default())?;
            for &kappa in &small {
                let s = table.integral(kappa)?;
                let d = klein_zemach_direct(&pot, *x, *xp, kappa, n1, n2, &DirectOptions::default())?;
                if d.accuracy_warning {
                    warned += 1.0;
                }
                let rel = (s - d.value).norm() / d.value.norm();
                worst = worst.max(rel);
                a.push(vec![i as f64, n1 as f64, n2 as f64, kappa, s.re, s.im, d.value.re, d.value.im, rel]);
            }
        }
    }
    checks.push(Check::at_most("spheroidal_vs_direct", worst, 1e-6));
    checks.push(Check::at_most("direct_accuracy_warnings", warned, 0.0));

    let free = Potential::zero(pot.support_radius);
    let (x, xp) = pairs[0];
    let free_value = kappas.iter().map(|&k| klein_zemach_spheroidal(&free, x, xp, k, 0, 0).map(|z| z.norm())).collect::<Result<Vec<_>>>()?;
    let free_max = free_value.into_iter().fold(0.0, f64::max);
    checks.push(Check::at_most("free_integral", free_max, 1e-12));

    let mut t = Table::new("klein_zemach", &["kappa", "sup", "kappa_sup"]);
    for ((k, s), ks) in sweep.kappa.iter().zip(&sweep.sup).zip(&sweep.kappa_sup) {
        t.push(vec![*k, *s, *ks]);
    }
    let result = json!({ "sweep": to_value(&sweep)?, "agreement_max": worst, "free_integral": free_max });
    Ok(Outcome { report: Report::new("klein-zemach", cfg, checks, result), tables: vec![t, a] })
}

pub fn thermal_check(cfg: &RunConfig) -> Result<Outcome> {
    let rho = rho_bounds_check(&cfg.betas, &rho_grid())?;
    let kappa = KappaPreset::by_name(&cfg.kappa, cfg.thermal_kappa_c)?;
    let spread = glued_norm_spread(&Coupling::new(kappa.clone()), &cfg.spread_betas)?;
    let mut all_betas: Vec<f64> = cfg.betas.iter().chain(&cfg.spread_betas).copied().collect();
    all_betas.sort_by(f64::total_cmp);
    all_betas.dedup();
    let identities = all_betas.iter().map(|&b| glue_identities(&kappa, b)).collect::<Result<Vec<_>>>()?;
    let db = identities.iter().map(|g| g.detailed_balance).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("rho_violations", rho.violations.len() as f64, 0.0),
        Check::at_most("glued_spread_j0", spread.spread[0], 0.25),
        Check::at_most("glued_spread_j1", spread.spread[1], 0.25),
        Check::at_most("detailed_balance", db, 1e-12),
    ];
    let mut r = Table::new("thermal_rho", &["beta", "c_sqrt_rho", "c_sqrt_one_plus_rho"]);
    for row in &rho.rows {
        r.push(vec![row.beta, row.c_sqrt_rho, row.c_sqrt_one_plus_rho]);
    }
    let mut s = Table::new("thermal_spread", &["beta", "ratio_j0", "ratio_j1"]);
    for row in &spread.rows {
        s.push(vec![row.beta, row.ratios[0], row.ratios[1]]);
    }
    let result = json!({
        "kappa": to_value(&kappa)?,
        "rho_bounds": to_value(&rho)?,
        "glued_spread": to_value(&spread)?,
        "identities": to_value(&identities)?,
    });
    Ok(Outcome { report: Report::new("thermal-check", cfg, checks, result), tables: vec![r, s] })
}

fn field_setup(cfg: &RunConfig) -> Result<(FgrSetting, Coupling, Cutoff, FgrGrids)> {
    let setting = FgrSetting::new(&potential(cfg)?)?;
    let coupling = Coupling::new(KappaPreset::by_name(&cfg.kappa, cfg.kappa_c)?);
    let grids = FgrGrids { omega_per_panel: cfg.fgr_nodes, k_per_panel: cfg.fgr_nodes, ..FgrGrids::default() };
    Ok((setting, coupling, Cutoff::Plateau { r0: cfg.cutoff_r0 }, grids))
}

pub fn fgr(cfg: &RunConfig) -> Result<Outcome> {
    let (setting, coupling, cutoff, grids) = field_setup(cfg)?;
    let g = InteractionG::new(coupling.clone(), cutoff, cfg.alpha)?;
    let shifts = level_shifts(&setting, &g, cfg.epsilon, &cfg.betas, &grids)?;
    let mut checks: Vec<Check> = shifts.iter().map(|r| Check::above(format!("gamma_positive_beta{}", r.beta), r.gamma, 0.0)).collect();
    let uniform = f2_beta_uniformity(&setting, &g, cfg.epsilon, &cfg.uniformity_betas, &grids)?;
    checks.push(Check::above("f2_min", uniform.f2.iter().copied().fold(f64::INFINITY, f64::min), 0.0));
    checks.push(Check::below("f2_beta_variation", uniform.variation, 0.1));
    let dipole = dipole_error_slope(&setting, &coupling, cutoff, cfg.betas[0], cfg.dipole_epsilon, &cfg.alphas, &grids)?;
    checks.push(Check::at_most("dipole_alpha2_defect", dipole.halving_defect, 0.05));
    checks.push(Check::at_least("dipole_error_exponent", dipole.fit.slope, 2.7));
    let completeness = dipole_completeness(&setting, 40.0)?;
    checks.push(Check::at_most("dipole_completeness", completeness.rel_defect, 1e-3));

    let mut t = Table::new("fgr", &["beta", "E", "eps", "F1", "F2", "gamma"]);
    for r in &shifts {
        t.push(vec![r.beta, r.energy, r.epsilon, r.f1, r.f2, r.gamma]);
    }
    let mut u = Table::new("fgr_uniformity", &["beta", "F2"]);
    for (b, f) in uniform.betas.iter().zip(&uniform.f2) {
        u.push(vec![*b, *f]);
    }
    let mut d = Table::new("fgr_dipole", &["alpha", "full", "leading", "leading_limit", "error"]);
    for r in &dipole.rows {
        d.push(vec![r.alpha, r.full, r.leading, r.leading_limit, r.error]);
    }
    let result = json!({
        "level_shifts": to_value(&shifts)?,
        "beta_uniformity": to_value(&uniform)?,
        "dipole": to_value(&dipole)?,
        "completeness": to_value(&completeness)?,
    });
    Ok(Outcome { report: Report::new("fgr", cfg, checks, result), tables: vec![t, u, d] })
}

pub fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let (setting, coupling, cutoff, grids) = field_setup(cfg)?;
    let g = InteractionG::new(coupling, cutoff, cfg.alpha)?;
    let og = OracleGrids { u_step: cfg.u_step, mu_nodes: cfg.mu_nodes, fgr: grids, ..OracleGrids::default() };
    let records = cfg.betas.iter().map(|&b| oracle_check(&setting, &g, b, cfg.epsilon, &og)).collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut t = Table::new("oracle", &["beta", "gamma_matrix", "gamma_quadrature", "rel_diff", "absorption", "emission", "F1", "F2"]);
    for r in &records {
        let b = r.beta;
        checks.push(Check::at_most(format!("rel_diff_beta{b}"), r.rel_diff, 1e-2));
        checks.push(Check::at_most(format!("absorption_beta{b}"), r.branch_split.rel_diff_absorption, 2e-2));
        checks.push(Check::at_most(format!("emission_beta{b}"), r.branch_split.rel_diff_emission, 2e-2));
        let s = &r.branch_split;
        t.push(vec![b, r.gamma_matrix, r.gamma_quadrature, r.rel_diff, s.absorption, s.emission, s.f1, s.f2]);
    }
    let result = json!({ "records": to_value(&records)? });
    Ok(Outcome { report: Report::new("oracle", cfg, checks, result), tables: vec![t] })
}

pub const COMMANDS: [&str; 7] = ["scatter", "spectral-check", "born-decay", "klein-zemach", "thermal-check", "fgr", "oracle"];

/// Runs one named command.
pub fn run_named(name: &str, cfg: &RunConfig) -> Result<Outcome> {
    match name {
        "scatter" => scatter(cfg),
        "spectral-check" => spectral_check(cfg),
        "born-decay" => born_decay(cfg),
        "klein-zemach" => klein_zemach(cfg),
        "thermal-check" => thermal_check(cfg),
        "fgr" => fgr(cfg),
        "oracle" => oracle(cfg),
        other => Err(ThermionError::Config(format!("unknown command `{other}`"))),
    }
}

/// Writes the report and tables under `dir`; returns the written paths.
pub fn write_outcome(dir: &Path, cfg: &RunConfig, o: &Outcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = vec![write_json(dir, &o.report)?];
    for t in &o.tables {
        paths.push(write_csv(dir, cfg, t)?);
    }
    Ok(paths)
}

/// Runs `command` (every command for `all`) and writes its artifacts.
pub fn execute(command: &str, cfg: &RunConfig) -> Result<Report> {
    if command != "all" {
        let o = run_named(command, cfg)?;
        write_outcome(&cfg.out, cfg, &o)?;
        return Ok(o.report);
    }
    let mut checks = Vec::new();
    let mut summary = serde_json::Map::new();
    for name in COMMANDS {
        let o = run_named(name, cfg)?;
        write_outcome(&cfg.out, cfg, &o)?;
        for c in &o.report.checks {
            checks.push(Check { name: format!("{name}.{}", c.name), ..c.clone() });
        }
        summary.insert(name.to_string(), json!({ "passed": o.report.passed(), "failures": o.report.failures }));
    }
    let report = Report::new("all", cfg, checks, serde_json::Value::Object(summary));
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out, &report)?;
    Ok(report)
}

/// Process exit status for a finished run.
pub fn exit_code(report: &Report) -> i32 {
    if report.passed() {
        0
    } else {
        2
    }
}

/// Parses `args`, runs, and returns the exit status. Output goes to stdout/stderr.
pub fn main_with(args: Vec<String>, env_workers: Option<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let _ = e.print();
                    eprintln!("{}", <Cli as clap::CommandFactory>::command().render_usage());
                    1
                }
            };
        }
    };
    let cfg = match resolve_config(&cli, env_workers) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Err(e) = set_workers(cfg.workers) {
        eprintln!("error: {e}");
        return 1;
    }
    match execute(cli.command.name(), &cfg) {
        Ok(report) => {
            let status = if report.passed() { "pass" } else { "fail" };
            println!("{}", json!({ "command": report.command, "status": status, "failures": report.failures, "out": cfg.out }));
            exit_code(&report)
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn set_workers(n: usize) -> Result<()> {
    let n = if n == 0 { std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1) } else { n };
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
