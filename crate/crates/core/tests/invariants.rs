use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermion::born::{apply_t, born_expansion, eval_set};
use thermion::config::RunConfig;
use thermion::fgr::{lorentzian, Cutoff, FgrGrids, FgrSetting, InteractionG, LevelShiftTable};
use thermion::potential::{discrete_spectrum, make_bump_well};
use thermion::quadrature::Vec3;
use thermion::report::format_f64;
use thermion::scattering::grid::SupportGrid;
use thermion::thermal::{glue_weight, planck, Coupling, KappaPreset};

fn table() -> &'static (LevelShiftTable, f64) {
    static T: OnceLock<(LevelShiftTable, f64)> = OnceLock::new();
    T.get_or_init(|| {
        let s = FgrSetting::new(&make_bump_well(50.0, 0.5, 0.2).unwrap()).unwrap();
        let g = InteractionG::new(Coupling::new(KappaPreset::SqrtMinus { amp: 1.0, c: 0.05 }), Cutoff::Plateau { r0: 1.0 }, 0.05).unwrap();
        let eps = 0.1 * s.energy().abs();
        (LevelShiftTable::build(&s, &g, eps, &FgrGrids::default()).unwrap(), eps)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bump_well_is_compact_nonpositive_and_flat(depth in 0.0..120.0f64, r in 0.2..2.0f64, frac in 0.05..1.0f64, t in 0.0..1.5f64) {
        let pot = make_bump_well(depth, r, frac * r).unwrap();
        let v = pot.value(t * r);
        prop_assert!(v <= 0.0 && v >= -depth);
        if t >= 1.0 {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert_eq!(pot.value(0.0), -depth);
        prop_assert!(pot.boundary_smoothness().passes);
    }

    #[test]
    fn detailed_balance(beta in 0.01..100.0f64, lw in -6.0..3.0f64) {
        let w = 10f64.powf(lw);
        let rho = planck(beta, w).unwrap();
        let target = (-beta * w).exp();
        prop_assume!(target > 1e-300);
        prop_assert!((rho / (1.0 + rho) - target).abs() <= 1e-12 * target);
    }

    #[test]
    fn planck_square_root_bounds(beta in 0.01..100.0f64, lw in -6.0..3.0f64) {
        let w = 10f64.powf(lw);
        let rho = planck(beta, w).unwrap();
        let x = beta * w;
        prop_assert!(rho.sqrt() <= x.powf(-0.5) * (1.0 + 1e-12));
        prop_assert!((1.0 + rho).sqrt() <= (1.0 + x.powf(-0.5)) * (1.0 + 1e-12));
    }

    #[test]
    fn glue_weight_branches(beta in 0.05..20.0f64, lu in -4.0..1.5f64) {
        let u = 10f64.powf(lu);
        let rho = planck(beta, u).unwrap();
        let plus = glue_weight(beta, u).powi(2) / (u * u * (1.0 + rho));
        prop_assert!((plus - 1.0).abs() < 1e-12);
        if rho > 1e-280 {
            let minus = glue_weight(beta, -u).powi(2) / (u * u * rho);
            prop_assert!((minus - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lorentzian_is_bounded_by_inverse_width(x in -1e3..1e3f64, eps in 1e-4..10.0f64) {
        let l = lorentzian(x, eps);
        prop_assert!(l > 0.0 && l <= 1.0 / eps * (1.0 + 1e-15));
    }

    #[test]
    fn f17_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn config_text_round_trip(eps in 1e-3..1.0f64, betas in proptest::collection::vec(0.01..50.0f64, 1..5), seed in any::<u64>(), nodes in 1usize..40) {
        let mut c = RunConfig::default();
        c.epsilon = eps;
        c.betas = betas;
        c.seed = seed;
        c.radial_nodes = nodes;
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        prop_assert_eq!(c, d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn t_operator_is_linear(kappa in 0.0..6.0f64, a_re in -2.0..2.0f64, a_im in -2.0..2.0f64, seed in any::<u64>(), n in 0usize..3) {
        let pot = make_bump_well(20.0, 0.5, 0.2).unwrap();
        let grid = SupportGrid::new(&pot, 4, "lebedev14").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = || -> Vec<Complex64> { (0..grid.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect() };
        let p1 = field();
        let p2 = field();
        let a = Complex64::new(a_re, a_im);
        let mix: Vec<Complex64> = p1.iter().zip(&p2).map(|(x, y)| a * x + y).collect();
        let pts = [Vec3::new(0.1, 0.2, -0.3), Vec3::new(0.9, 0.0, 0.4), grid.node(3)];
        let t1 = apply_t(&pot, kappa, n, &grid, &p1, &pts).unwrap();
        let t2 = apply_t(&pot, kappa, n, &grid, &p2, &pts).unwrap();
        let tm = apply_t(&pot, kappa, n, &grid, &mix, &pts).unwrap();
        for i in 0..pts.len() {
            let want = a * t1[i] + t2[i];
            prop_assert!((tm[i] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn born_expansion_identity(kz in 0.5..12.0f64, kx in -3.0..3.0f64, order in 0usize..4) {
        let pot = make_bump_well(20.0, 0.5, 0.2).unwrap();
        let e = born_expansion(&pot, Vec3::new(kx, 0.0, kz), order, &eval_set(&pot)).unwrap();
        prop_assert!(e.identity_residual <= 1e-10, "{}", e.identity_residual);
    }

    #[test]
    fn level_shift_integrals_are_nonnegative_and_bounded(beta in 0.1..20.0f64, scale in 1.0..5.0f64) {
        let (t, eps0) = table();
        let [f1, f2, b1, b2] = t.integrals(beta, eps0 * scale).unwrap();
        prop_assert!(f1 >= 0.0 && f2 >= 0.0);
        prop_assert!(f1 <= b1 * (1.0 + 1e-12) && f2 <= b2 * (1.0 + 1e-12));
    }

    #[test]
    fn bound_state_count_is_monotone_in_depth(d1 in 0.0..80.0f64, dd in 0.0..40.0f64) {
        let a = discrete_spectrum(&make_bump_well(d1, 0.5, 0.2).unwrap(), 2, 1e-8).unwrap().len();
        let b = discrete_spectrum(&make_bump_well(d1 + dd, 0.5, 0.2).unwrap(), 2, 1e-8).unwrap().len();
        prop_assert!(a <= b);
    }
}
