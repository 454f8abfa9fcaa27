mod common;

use cm_vessel::constituent::{active_cauchy, fiber_deposition, fiber_in_plane, ActiveStressParams, MaterialModel};
use cm_vessel::growth::{aitken_step, linearized_cauchy, AitkenState, LinearizedMaterial};
use cm_vessel::hemodynamics::{inlet_pressure, pressure_field, segment_resistance, smooth_axial};
use cm_vessel::membrane::{current_geometry, segment_deformation};
use cm_vessel::mixture::{cohort_cauchy_green, cohort_cauchy_green_operator, Trial};
use cm_vessel::tensor::{polar_rotation, pullback_stress, pushforward_stress, Tensor2};
use cm_vessel::turnover::{
    ground_survival, stimulus_mechano, survival_fraction, DeviationHistory, StimulusInput, TurnoverParams,
};
use common::{constituent_defects, random_mixture, tangent_defect};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn stretch() -> impl Strategy<Value = f64> {
    0.9..1.3f64
}

/// Deformation gradients with stretches in `[0.8, 1.4]`, shear up to 0.3 and
/// an optional rigid rotation about the axis.
fn deformation() -> impl Strategy<Value = Tensor2> {
    (0.8..1.4f64, 0.8..1.4f64, 0.8..1.4f64, -0.3..0.3f64, -0.3..0.3f64, -3.0..3.0f64).prop_map(
        |(a, b, c, s1, s2, angle)| {
            let mut u = Tensor2::diag(a, b, c);
            u[(0, 1)] = s1;
            u[(1, 2)] = s2;
            Tensor2::rotation_z(angle) * u
        },
    )
}

fn spd(f: &Tensor2) -> Tensor2 {
    f.transpose() * *f
}

fn mechano(k_dsigma: f64) -> TurnoverParams {
    TurnoverParams::Mechano {
        k_h: 1.0 / 80.0,
        gain_stress: 1.0,
        gain_wss: 5.0,
        degradation_gain_stress: k_dsigma,
        degradation_gain_wss: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polar_rotation_is_proper(f in deformation()) {
        prop_assume!(f.det() > 0.05);
        let r = polar_rotation(&f).unwrap();
        prop_assert!((r.transpose() * r - Tensor2::identity()).norm_inf() < 1e-12);
        prop_assert!((r.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cohort_strain_operator_matches_product(ft in deformation(), fs in deformation(), g in 1.0..1.5f64, angle in -90.0..90.0f64) {
        prop_assume!(ft.det() > 0.05 && fs.det() > 0.05);
        let gt = fiber_deposition(g, fiber_in_plane(angle));
        let a = ft.inverse().unwrap() * gt * polar_rotation(&ft).unwrap();
        let c = spd(&fs);
        let direct = cohort_cauchy_green(&a, &c);
        let op = cohort_cauchy_green_operator(&a, &c);
        prop_assert!((direct - op).norm_inf() <= 1e-12 * direct.norm_inf());
    }

    #[test]
    fn pushforward_pullback_round_trip(f in deformation(), s in deformation()) {
        prop_assume!(f.det() > 0.05);
        let s = s.sym();
        let sigma = pushforward_stress(&f, &s, f.det()).unwrap();
        let back = pullback_stress(&f, &sigma, f.det()).unwrap();
        prop_assert!((back - s).norm_inf() <= 1e-10 * s.norm_inf());
    }

    #[test]
    fn constituent_stress_and_tangent_match_energy(l1 in stretch(), l2 in stretch(), l3 in stretch(), shear in -0.1..0.1f64, angle in -90.0..90.0f64, c2 in 0.5..20.0f64) {
        let mut f = Tensor2::diag(l1, l2, l3);
        f[(1, 2)] = shear;
        let cn = spd(&f);
        let fiber = fiber_in_plane(angle);
        let h = Tensor2::outer(fiber, fiber);
        for model in [MaterialModel::NeoHookean { c: 9.913 }, MaterialModel::Fung { c1: 2.696, c2, fiber }] {
            let (ds, dc) = constituent_defects(&model, &cn, &h);
            prop_assert!(ds < 1e-5, "stress defect {ds}");
            prop_assert!(dc < 1e-4, "tangent defect {dc}");
        }
    }

    #[test]
    fn fiber_deposition_is_unimodular(g in 1.0..1.5f64, angle in -90.0..90.0f64) {
        prop_assert!((fiber_deposition(g, fiber_in_plane(angle)).det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn active_stress_vanishes_outside_its_range(lambda in 0.0..3.0f64, phi in 0.0..0.2f64, dtau in -0.5..0.5f64, f in deformation()) {
        prop_assume!(f.det() > 0.05);
        let p = ActiveStressParams {
            t_max: 39.86,
            lambda_max: 1.4,
            lambda_0: 0.8,
            c_basal: 0.7,
            c_scaling: 1.2,
            k_act: 1.0 / 70.0,
            fiber: [0.0, 1.0, 0.0],
        };
        prop_assert_eq!(active_cauchy(&p, 0.0, lambda, dtau, &f).unwrap(), Tensor2::zeros());
        let off = ActiveStressParams { t_max: 0.0, ..p };
        prop_assert_eq!(active_cauchy(&off, phi, lambda, dtau, &f).unwrap(), Tensor2::zeros());
        if lambda <= 0.8 || lambda >= 1.4 {
            prop_assert_eq!(active_cauchy(&p, phi, lambda, dtau, &f).unwrap(), Tensor2::zeros());
        }
    }

    #[test]
    fn stimulus_is_floored(ds in -5.0..5.0f64, dt in -5.0..5.0f64) {
        let p = mechano(0.0);
        let u = stimulus_mechano(&p, &StimulusInput { delta_sigma: ds, delta_tau: dt, time: 0.0 });
        prop_assert!(u >= 0.1);
        prop_assert_eq!(stimulus_mechano(&p, &StimulusInput::default()), 1.0);
    }

    #[test]
    fn survival_is_bounded_and_non_increasing(ds in proptest::collection::vec(0.0..1.0f64, 10), tau in 0.0..20.0f64, s1 in 0.0..40.0f64, s2 in 0.0..40.0f64) {
        let times: Vec<f64> = (0..10).map(|i| 4.0 * i as f64).collect();
        let hist = DeviationHistory { times, delta_tau: vec![0.0; 10], delta_sigma: ds };
        let p = mechano(0.5);
        let (lo, hi) = (tau + s1.min(s2), tau + s1.max(s2));
        let q_lo = survival_fraction(&p, tau, lo, &hist).unwrap();
        let q_hi = survival_fraction(&p, tau, hi, &hist).unwrap();
        prop_assert!((0.0..=1.0).contains(&q_lo) && (0.0..=1.0).contains(&q_hi));
        prop_assert!(q_hi <= q_lo + 1e-15);
    }

    #[test]
    fn ground_matrix_survival(k in 0.001..0.1f64, eps in 0.0..0.5f64, onset in 0.0..30.0f64) {
        prop_assert_eq!(ground_survival(k, eps, onset, onset - 1e-12), 1.0);
        prop_assert!((ground_survival(k, eps, onset, onset) - 1.0).abs() < 1e-15);
        prop_assert!((ground_survival(k, eps, onset, onset + 1e5) - eps).abs() < 1e-9);
    }

    #[test]
    fn segment_volume_is_conserved(a0 in 0.1..2.0f64, h0 in 0.01..1.0f64, lt in 0.5..2.0f64, j in 0.5..3.0f64) {
        let (a, h) = current_geometry(a0, h0, lt, j);
        prop_assert!((a * h / (a0 * h0) - j).abs() < 1e-12 * j);
        prop_assert!((segment_deformation(lt, j).unwrap().det() - j).abs() < 1e-12 * j);
    }

    #[test]
    fn pressure_drop_is_the_poiseuille_sum(radii in proptest::collection::vec(0.3..1.2f64, 1..10), q in 1.0..100.0f64, r in 0.0..2000.0f64) {
        let geo: Vec<(f64, f64)> = radii.iter().map(|&a| (a, 0.4)).collect();
        let drop: f64 = geo.iter().map(|&(a, l)| segment_resistance(a, l, 0.04) * q).sum();
        let p_in = inlet_pressure(&geo, q, 0.04, r);
        prop_assert!((p_in - r * q - drop).abs() <= 1e-12 * p_in);
        let p = pressure_field(&geo, q, 0.04, r).unwrap();
        prop_assert!(p.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn stenosis_raises_upstream_pressure_only(radii in proptest::collection::vec(0.3..1.2f64, 3..10), pick in 0usize..100) {
        let geo: Vec<(f64, f64)> = radii.iter().map(|&a| (a, 0.4)).collect();
        let k = pick % geo.len();
        let mut narrowed = geo.clone();
        narrowed[k].0 *= 0.8;
        let before = pressure_field(&geo, 20.0, 0.04, 307.5).unwrap();
        let after = pressure_field(&narrowed, 20.0, 0.04, 307.5).unwrap();
        for i in 0..geo.len() {
            if i <= k {
                prop_assert!(after[i] > before[i]);
            } else {
                prop_assert_eq!(after[i], before[i]);
            }
        }
    }

    #[test]
    fn smoothing_preserves_the_mean(values in proptest::collection::vec(-10.0..10.0f64, 2..12), window in 0.0..2.0f64) {
        let z: Vec<f64> = (0..values.len()).map(|i| 0.43 * i as f64).collect();
        let out = smooth_axial(&values, &z, window).unwrap();
        let (m0, m1) = (values.iter().sum::<f64>(), out.iter().sum::<f64>());
        prop_assert!((m0 - m1).abs() <= 1e-12 * values.iter().map(|v| v.abs()).sum::<f64>().max(1e-300));
    }

    #[test]
    fn aitken_keeps_a_fixed_point(d in proptest::collection::vec(-1.0..1.0f64, 2..8), omega in 0.1..1.0f64) {
        let state = AitkenState { omega, residual: Some(vec![0.1; d.len()]), iteration: 3 };
        let (next, _) = aitken_step(&state, &d, &d).unwrap();
        for (a, b) in next.iter().zip(&d) {
            prop_assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn mixture_states_are_consistent(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ms, trial) = random_mixture(&mut rng);
        let ev = ms.evaluate(&trial, true).unwrap();
        prop_assert!((ev.pk2 - ev.pk2.transpose()).norm_inf() <= 1e-12 * ev.pk2.norm_inf());
        let c = ev.c_bar.clone().unwrap();
        prop_assert!(c.minor_symmetry_defect() <= 1e-12 * c.norm_inf().max(1.0));
        let direct = ms.cauchy_direct(&trial, &ev).unwrap();
        prop_assert!((direct - ev.sigma_bar).norm_inf() <= 1e-10 * ev.sigma_bar.norm_inf());
    }

    #[test]
    fn linearized_update_is_second_order(seed in 0u64..10_000, e in proptest::array::uniform6(-1.0..1.0f64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ms, trial) = random_mixture(&mut rng);
        let ev = ms.evaluate(&trial, true).unwrap();
        let p = 0.3;
        let mat = LinearizedMaterial {
            sigma_bar: ev.sigma_bar,
            c_bar: ev.c_bar.clone().unwrap(),
            pressure: p,
            j_star: 1.0,
            k_p: 1e4,
        };
        let total = ev.sigma_bar - Tensor2::identity() * p;
        prop_assert!((linearized_cauchy(&mat, &Tensor2::identity()).unwrap() - total).norm_inf() <= 1e-13 * total.norm_inf());
        // Isochoric perturbation of size 1e-4 with J* = det F*.
        let mut g = Tensor2::zeros();
        g[(0, 0)] = e[0];
        g[(1, 1)] = e[1];
        g[(2, 2)] = e[2];
        g[(0, 1)] = e[3];
        g[(1, 2)] = e[4];
        g[(0, 2)] = e[5];
        let scale = 1e-4 / g.norm_inf().max(1e-12);
        let f_star = Tensor2::identity() + g * scale;
        let mat = LinearizedMaterial { j_star: f_star.det(), ..mat };
        let lin = linearized_cauchy(&mat, &f_star).unwrap();
        let exact = ms.evaluate(&Trial { f: f_star * trial.f, ..trial }, false).unwrap().sigma_bar - Tensor2::identity() * p;
        prop_assert!((lin - exact).norm_inf() < 1e-3 * exact.norm_inf());
    }

    #[test]
    fn tangent_matches_finite_differences(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ms, trial) = random_mixture(&mut rng);
        prop_assert!(tangent_defect(&ms, &trial, 1e-5) < 1e-2);
    }
}
