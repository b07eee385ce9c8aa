//! One pass/fail line per acceptance criterion. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use thermion::born::{born_expansion, eval_set, remainder_decay_fit, stationary_phase_probe, BumpFunction};
use thermion::cli::{ball_points, transform_grids};
use thermion::config::RunConfig;
use thermion::fgr::{dipole_completeness, dipole_error_slope, f2_beta_uniformity, level_shifts, Cutoff, FgrGrids, FgrSetting, InteractionG};
use thermion::fit::logspace;
use thermion::oracle::{oracle_check, OracleGrids};
use thermion::potential::{make_bump_well, Potential};
use thermion::quadrature::Vec3;
use thermion::scattering::dilation::{dilation_commutator_check, DilationGrid, MomentumTest};
use thermion::scattering::grid::SupportGrid;
use thermion::scattering::nystrom::{plane_wave, recover_phi, solve_scattering_state};
use thermion::scattering::transform::{spectral_identities_check, TestFunction, Transform};
use thermion::spheroidal::{
    klein_zemach_direct, klein_zemach_spheroidal, klein_zemach_sweep, sample_pairs, DirectOptions, SpheroidalOptions, SpheroidalTable,
};
use thermion::thermal::{glue_identities, glued_norm_spread, rho_bounds_check, rho_grid, Coupling, KappaPreset};

type Outcome = Result<(bool, String), String>;

fn well() -> Potential {
    make_bump_well(50.0, 0.5, 0.2).unwrap()
}

fn setting() -> FgrSetting {
    FgrSetting::new(&well()).unwrap()
}

fn field_coupling() -> Coupling {
    Coupling::new(KappaPreset::SqrtMinus { amp: 1.0, c: 0.02 })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn free_case() -> Outcome {
    let free = Potential::zero(0.5);
    let grid = SupportGrid::new(&free, 12, "gauss8").map_err(err)?;
    let points: Vec<Vec3> = eval_set(&free).into_iter().chain([Vec3::new(3.0, -2.0, 1.0)]).collect();
    let mut phi_defect: f64 = 0.0;
    let mut born: f64 = 0.0;
    for k in [Vec3::new(0.0, 0.0, 1.0), Vec3::new(3.0, -4.0, 2.0), Vec3::new(0.0, 25.0, 0.0)] {
        let st = solve_scattering_state(&free, k, &grid, 1e-10).map_err(err)?;
        let phi = recover_phi(&st, &points);
        for (p, x) in phi.iter().zip(&points) {
            phi_defect = phi_defect.max((p - plane_wave(&k, x)).norm());
        }
        let e = born_expansion(&free, k, 5, &points).map_err(err)?;
        born = born.max(e.terms[1..].iter().flatten().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let mut kz: f64 = 0.0;
    let (x, xp) = (Vec3::new(0.1, 0.2, -0.1), Vec3::new(-0.3, 0.0, 0.2));
    for kappa in [0.0, 1.0, 5.0, 40.0] {
        kz = kz.max(klein_zemach_spheroidal(&free, x, xp, kappa, 1, 2).map_err(err)?.norm());
        kz = kz.max(klein_zemach_direct(&free, x, xp, kappa.min(4.0), 1, 2, &DirectOptions::default()).map_err(err)?.value.norm());
    }
    Ok((phi_defect <= 1e-12 && born == 0.0 && kz == 0.0, format!("|φ − e^{{ikx}}| = {phi_defect:.1e}, Born n ≥ 1 max {born:.1e}, KZ max {kz:.1e}")))
}

fn spectral() -> Outcome {
    let pot = well();
    let g = transform_grids(&RunConfig::default());
    let battery = TestFunction::battery();
    let a = spectral_identities_check(&pot, &Transform::from_grids(&pot, &g).map_err(err)?, &battery);
    let b = spectral_identities_check(&pot, &Transform::from_grids(&pot, &g.refined()).map_err(err)?, &battery);
    let pairs = [
        (a.parseval_defect, b.parseval_defect),
        (a.intertwining_defect, b.intertwining_defect),
        (a.reconstruction_defect, b.reconstruction_defect),
    ];
    let ok = pairs.iter().all(|(x, y)| *x <= 1e-3 && y < x) && a.bound_leakage <= 1e-3;
    Ok((
        ok,
        format!(
            "parseval {:.1e}→{:.1e}, intertwining {:.1e}→{:.1e}, reconstruction {:.1e}→{:.1e}, ‖V_c φ_E‖ {:.1e}",
            pairs[0].0, pairs[0].1, pairs[1].0, pairs[1].1, pairs[2].0, pairs[2].1, a.bound_leakage
        ),
    ))
}

fn born_decay() -> Outcome {
    let pot = well();
    let ks = logspace(5.0, 40.0, 12);
    let p3 = remainder_decay_fit(&pot, 3, &ks, Vec3::new(0.0, 0.0, 1.0)).map_err(err)?;
    let p5 = remainder_decay_fit(&pot, 5, &ks, Vec3::new(0.0, 0.0, 1.0)).map_err(err)?;
    Ok((p3.exponent >= 0.7 && p5.exponent >= 1.7, format!("exponent p=3 {:.2} (≥ 0.7), p=5 {:.2} (≥ 1.7)", p3.exponent, p5.exponent)))
}

fn stationary_phase() -> Outcome {
    let g = BumpFunction { center: [0.1, 0.0, -0.2], radius: 0.5 };
    let ks = logspace(5.0, 40.0, 12);
    let mut ok = true;
    let mut msg = Vec::new();
    for n in 1..=3 {
        let p = stationary_phase_probe(&g, n, &ks, Vec3::new(1.0, 2.0, 2.0)).map_err(err)?;
        ok &= p.fit.slope <= -(n as f64) + 0.3;
        msg.push(format!("n={n} slope {:.2}", p.fit.slope));
    }
    Ok((ok, msg.join(", ")))
}

fn klein_zemach() -> Outcome {
    let pot = well();
    let p = ball_points(11, pot.support_radius, 4);
    let pairs = [(Vec3::new(0.2, -0.1, 0.3), Vec3::new(-0.3, 0.25, 0.05)), (p[0], p[1]), (p[2], p[3])];
    let mut worst: f64 = 0.0;
    for (x, xp) in pairs {
        for (n1, n2) in [(0, 0), (1, 0), (1, 2)] {
            let t = SpheroidalTable::new(&pot, x, xp, n1, n2, 5.0, &SpheroidalOptions::default()).map_err(err)?;
            for kappa in [0.0, 1.0, 3.0, 5.0] {
                let s = t.integral(kappa).map_err(err)?;
                let d = klein_zemach_direct(&pot, x, xp, kappa, n1, n2, &DirectOptions::default()).map_err(err)?;
                worst = worst.max((s - d.value).norm() / d.value.norm());
            }
        }
    }
    let sweep = klein_zemach_sweep(&pot, &logspace(1.0, 100.0, 9), &sample_pairs(pot.support_radius, 20), 0, 0).map_err(err)?;
    Ok((worst <= 1e-6 && sweep.fit.slope <= -0.7, format!("spheroidal vs direct {worst:.1e} (κ ≤ 5), sup|I| slope {:.2}", sweep.fit.slope)))
}

fn thermal() -> Outcome {
    let rho = rho_bounds_check(&[0.1, 1.0, 10.0], &rho_grid()).map_err(err)?;
    let kappa = KappaPreset::SqrtMinus { amp: 1.0, c: 1.0 };
    let spread = glued_norm_spread(&Coupling::new(kappa.clone()), &[0.25, 1.0, 4.0]).map_err(err)?;
    let mut db: f64 = 0.0;
    for beta in [0.1, 0.25, 1.0, 4.0, 10.0] {
        db = db.max(glue_identities(&kappa, beta).map_err(err)?.detailed_balance);
    }
    let ok = rho.violations.is_empty() && spread.spread.iter().all(|s| *s <= 0.25) && db <= 1e-12;
    Ok((
        ok,
        format!("{} ρ violations, spread j=0 {:.3} j=1 {:.3}, detailed balance {db:.1e}", rho.violations.len(), spread.spread[0], spread.spread[1]),
    ))
}

fn oracle() -> Outcome {
    let s = setting();
    let g = InteractionG::new(field_coupling(), Cutoff::Plateau { r0: 1.0 }, 0.05).map_err(err)?;
    let r = oracle_check(&s, &g, 1.0, 0.1, &OracleGrids::default()).map_err(err)?;
    let b = &r.branch_split;
    let ok = r.rel_diff <= 1e-2 && b.rel_diff_absorption <= 2e-2 && b.rel_diff_emission <= 2e-2;
    Ok((ok, format!("rel diff {:.1e}, absorption {:.1e}, emission {:.1e}", r.rel_diff, b.rel_diff_absorption, b.rel_diff_emission)))
}

fn positivity() -> Outcome {
    let s = setting();
    let g = InteractionG::new(field_coupling(), Cutoff::Plateau { r0: 1.0 }, 0.05).map_err(err)?;
    let grids = FgrGrids::default();
    let gammas: Vec<f64> = level_shifts(&s, &g, 0.1, &[1.0, 4.0, 10.0], &grids).map_err(err)?.iter().map(|r| r.gamma).collect();
    let u = f2_beta_uniformity(&s, &g, 0.1, &[1.0, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0], &grids).map_err(err)?;
    let ok = gammas.iter().all(|g| *g > 0.0) && u.f2.iter().all(|f| *f > 0.0) && u.variation < 0.1;
    Ok((ok, format!("γ min {:.3e}, F2 variation over β ∈ [1, 10] {:.1}%", gammas.iter().cloned().fold(f64::INFINITY, f64::min), 100.0 * u.variation)))
}

fn dipole() -> Outcome {
    let s = setting();
    let sweep = dipole_error_slope(&s, &field_coupling(), Cutoff::Plateau { r0: 1.0 }, 1.0, 0.01, &[0.01, 0.02, 0.04, 0.08, 0.16, 0.2], &FgrGrids::default())
        .map_err(err)?;
    let c = dipole_completeness(&s, 40.0).map_err(err)?;
    let ok = sweep.halving_defect <= 0.05 && sweep.fit.slope >= 2.7 && c.rel_defect <= 1e-3;
    Ok((ok, format!("α² halving defect {:.1e}, error exponent {:.2}, completeness {:.1e}", sweep.halving_defect, sweep.fit.slope, c.rel_defect)))
}

fn mourre() -> Outcome {
    let r = dilation_commutator_check(&DilationGrid::default(), &MomentumTest::battery()).map_err(err)?;
    Ok((r.defect <= 1e-2 && r.refined_defect <= 0.5 * r.defect, format!("defect {:.1e} → {:.1e} under refinement", r.defect, r.refined_defect)))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let d = tempfile::tempdir().map_err(err)?;
    let mut cfg = RunConfig::default();
    cfg.out = "out".into();
    std::fs::write(d.path().join("default.cfg"), cfg.to_text()).map_err(err)?;
    let mut snaps = Vec::new();
    for _ in 0..2 {
        let o = Command::new(env!("CARGO_BIN_EXE_thermion"))
            .args(["all", "--config", "default.cfg"])
            .current_dir(d.path())
            .env_remove("THERMION_WORKERS")
            .output()
            .map_err(err)?;
        if o.status.code() != Some(0) {
            return Ok((false, format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stdout))));
        }
        snaps.push(snapshot(&d.path().join("out")));
        std::fs::remove_dir_all(d.path().join("out")).map_err(err)?;
    }
    let same = snaps[0] == snaps[1];
    Ok((same && !snaps[0].is_empty(), format!("{} files, byte-identical: {same}", snaps[0].len())))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("free-case exactness", free_case),
        ("spectral identities", spectral),
        ("Born remainder decay", born_decay),
        ("stationary phase", stationary_phase),
        ("Klein-Zemach", klein_zemach),
        ("thermal bounds", thermal),
        ("oracle equivalence", oracle),
        ("level-shift positivity", positivity),
        ("dipole expansion", dipole),
        ("Mourre identity", mourre),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {}: {} ({detail}) [{:.1}s]", i + 1, if ok { "PASS" } else { "FAIL" }, name, t.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
