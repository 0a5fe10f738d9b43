use enzyme_net::continuum::{
    fit, gamma_quantile, intensity_curve, kappa_from_rates, lambda_from_rates, mean_rate_eigenvalues, turnover_curve,
    CommonDraws, ContinuumParams, FitObjective, FitOptions, REFERENCE_FIT,
};
use enzyme_net::correlation::MixtureKind;
use enzyme_net::io::{curves_to_csv, parse_curves};
use enzyme_net::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

const DT: f64 = 1e-3;

fn t_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| DT * (1.0 + 3.0 * i as f64)).collect()
}

/// Parameters whose rate distributions are nearly point masses at `k2`
/// and `alpha`.
fn point_mass(k1: f64, k_neg1: f64, k2: f64, alpha: f64) -> ContinuumParams {
    let shape = 1e8;
    ContinuumParams {
        k1,
        k_neg1,
        a: shape,
        b: k2 / shape,
        a_alpha: shape,
        b_alpha: alpha / shape,
    }
}

#[test]
fn point_mass_limit_recovers_single_network_curves() {
    let p = point_mass(2.0, 3.0, 1.5, 4.0);
    for s in [0.5, 2.0] {
        let lam = lambda_from_rates(2.0, 3.0, 1.5, 4.0, s).unwrap();
        let kap = kappa_from_rates(2.0, 3.0, 1.5, 4.0, s).unwrap();
        let turn = turnover_curve(&p, s, 8, 2000, 1).unwrap();
        for (m, v) in turn.abscissa.iter().zip(&turn.values) {
            assert!((v - lam.powi(*m as i32 - 1)).abs() < 1e-6, "m {m}");
        }
        let grid: Vec<f64> = (1..10).map(|k| 0.2 * k as f64).collect();
        let int = intensity_curve(&p, s, &grid, 0.2, 2000, 1).unwrap();
        for (t, v) in int.abscissa.iter().zip(&int.values) {
            assert!((v - (kap * (t - 0.2)).exp()).abs() < 1e-6, "t {t}");
        }
        let (ml, mk) = mean_rate_eigenvalues(&p, s).unwrap();
        assert!((ml - lam).abs() < 1e-6 && (mk - kap).abs() < 1e-6);
    }
}

#[test]
fn latin_hypercube_curves_match_plain_monte_carlo() {
    let p = REFERENCE_FIT;
    let s = 100.0;
    let lhs = turnover_curve(&p, s, 6, 50_000, 3).unwrap();
    let lhs_int = intensity_curve(&p, s, &t_grid(10), DT, 50_000, 3).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let g_k2 = Gamma::new(p.a, p.b).unwrap();
    let g_al = Gamma::new(p.a_alpha, p.b_alpha).unwrap();
    let draws = 400_000;
    let mut turn = [0.0; 6];
    let grid = t_grid(10);
    let mut int = vec![0.0; grid.len()];
    for _ in 0..draws {
        let k2 = g_k2.sample(&mut rng);
        let al: f64 = g_al.sample(&mut rng);
        let lam = lambda_from_rates(p.k1, p.k_neg1, k2, al.max(1e-300), s).unwrap();
        let kap = kappa_from_rates(p.k1, p.k_neg1, k2, al.max(1e-300), s).unwrap();
        for (m, acc) in turn.iter_mut().enumerate() {
            *acc += lam.powi(m as i32 + 1);
        }
        for (t, acc) in grid.iter().zip(int.iter_mut()) {
            *acc += (kap * (t - DT)).exp();
        }
    }
    for (m, v) in lhs.values.iter().enumerate() {
        assert!(
            (v - turn[m] / turn[0]).abs() < 5e-3,
            "m {}: {v} vs {}",
            m + 1,
            turn[m] / turn[0]
        );
    }
    for (k, v) in lhs_int.values.iter().enumerate() {
        assert!((v - int[k] / int[0]).abs() < 5e-3, "t {}: {v}", grid[k]);
    }
}

#[test]
fn reference_curves_decay_slower_at_higher_concentration() {
    let p = REFERENCE_FIT;
    let turn: Vec<_> = [20.0, 100.0]
        .iter()
        .map(|&s| turnover_curve(&p, s, 10, 20_000, 5).unwrap())
        .collect();
    assert!(turn[1]
        .values
        .iter()
        .zip(&turn[0].values)
        .skip(1)
        .all(|(hi, lo)| hi > lo));
    let int: Vec<_> = [20.0, 100.0, 380.0]
        .iter()
        .map(|&s| intensity_curve(&p, s, &t_grid(30), DT, 20_000, 5).unwrap())
        .collect();
    for pair in int.windows(2) {
        assert!(pair[1]
            .values
            .iter()
            .zip(&pair[0].values)
            .skip(1)
            .all(|(hi, lo)| hi > lo));
    }
    for c in turn.iter().chain(&int) {
        assert!(c.values.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn common_draws_are_seeded_and_stratified() {
    let a = CommonDraws::new(1000, 7).unwrap();
    let b = CommonDraws::new(1000, 7).unwrap();
    let c = CommonDraws::new(1000, 8).unwrap();
    let (ka, _) = a.rates(&REFERENCE_FIT);
    assert_eq!(ka, b.rates(&REFERENCE_FIT).0);
    assert_ne!(ka, c.rates(&REFERENCE_FIT).0);
    // one draw per stratum: sorted quantile levels fall in their strata
    let unit = ContinuumParams {
        a: 1.0,
        b: 1.0,
        ..REFERENCE_FIT
    };
    let (mut k2, _) = a.rates(&unit);
    k2.sort_by(f64::total_cmp);
    for (i, x) in k2.iter().enumerate() {
        let u = 1.0 - (-x).exp();
        assert!(u >= i as f64 / 1000.0 - 1e-12 && u <= (i + 1) as f64 / 1000.0 + 1e-12);
    }
    assert!(CommonDraws::new(0, 1).is_err());
    assert!(gamma_quantile(2.0, 0.5) > 0.0);
}

fn synthetic_observed(
    params: &ContinuumParams,
    n_draws: usize,
    seed: u64,
) -> Vec<enzyme_net::continuum::CorrelationCurve> {
    let mut curves = vec![];
    for s in [20.0, 100.0] {
        curves.push(turnover_curve(params, s, 6, n_draws, seed).unwrap());
    }
    for s in [20.0, 100.0, 380.0] {
        curves.push(intensity_curve(params, s, &t_grid(12), DT, n_draws, seed).unwrap());
    }
    curves
}

#[test]
fn objective_vanishes_at_generating_parameters_with_shared_draws() {
    let observed = synthetic_observed(&REFERENCE_FIT, 3000, 11);
    let objective = FitObjective::new(observed.clone(), 3000, 11).unwrap();
    assert!(objective.evaluate(&REFERENCE_FIT).unwrap() < 1e-25);
    let options = FitOptions {
        n_draws: 3000,
        seed: 11,
        restarts: 2,
        max_evals: 600,
        tol: 1e-6,
    };
    let result = fit(observed, &REFERENCE_FIT, &options).unwrap();
    assert!(result.objective < 1e-25);
    for ((name, got), (_, want)) in result.params.named().iter().zip(REFERENCE_FIT.named()) {
        assert!((got - want).abs() < 1e-12 * want, "{name}");
    }
}

#[test]
fn fit_improves_on_a_perturbed_start() {
    let observed = synthetic_observed(&REFERENCE_FIT, 20_000, 1234);
    let options = FitOptions {
        n_draws: 3000,
        seed: 5,
        restarts: 2,
        max_evals: 1500,
        tol: 1e-4,
    };
    let objective = FitObjective::new(observed.clone(), options.n_draws, options.seed).unwrap();
    let at_truth = objective.evaluate(&REFERENCE_FIT).unwrap();
    let init = ContinuumParams {
        k1: REFERENCE_FIT.k1 * 1.5,
        b_alpha: REFERENCE_FIT.b_alpha * 0.7,
        ..REFERENCE_FIT
    };
    let start = objective.evaluate(&init).unwrap();
    let result = match fit(observed, &init, &options) {
        Ok(r) => r,
        Err(Error::IterationCap { best }) => *best,
        Err(e) => panic!("{e}"),
    };
    assert!(result.objective < start);
    assert!(
        result.objective <= 1.05 * at_truth,
        "{} vs {at_truth}",
        result.objective
    );
    assert!(result.trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn evaluation_cap_is_reported_with_best_point() {
    let observed = synthetic_observed(&REFERENCE_FIT, 2000, 3);
    let init = ContinuumParams {
        a: REFERENCE_FIT.a * 2.0,
        ..REFERENCE_FIT
    };
    let options = FitOptions {
        n_draws: 1000,
        seed: 1,
        restarts: 1,
        max_evals: 15,
        tol: 1e-12,
    };
    let f0 = FitObjective::new(observed.clone(), 1000, 1)
        .unwrap()
        .evaluate(&init)
        .unwrap();
    match fit(observed, &init, &options) {
        Err(Error::IterationCap { best }) => assert!(best.objective <= f0),
        other => panic!("expected an evaluation cap, got {other:?}"),
    }
}

#[test]
fn objective_needs_both_curve_kinds() {
    let observed: Vec<_> = synthetic_observed(&REFERENCE_FIT, 500, 3)
        .into_iter()
        .filter(|c| c.kind == MixtureKind::Turnover)
        .collect();
    assert!(FitObjective::new(observed, 500, 1).is_err());
    let bad = ContinuumParams {
        a: -1.0,
        ..REFERENCE_FIT
    };
    assert!(turnover_curve(&bad, 1.0, 3, 10, 1).is_err());
}

#[test]
fn curves_survive_csv_round_trip() {
    let curves = synthetic_observed(&REFERENCE_FIT, 500, 4);
    assert_eq!(parse_curves(&curves_to_csv(&curves)).unwrap(), curves);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigenvalues_stay_in_range(
        k1 in 1e-2f64..1e5,
        km in 1e-2f64..1e5,
        k2 in 1e-3f64..1e4,
        alpha in 1e-6f64..1e5,
        s in 1e-2f64..1e3,
    ) {
        let lam = lambda_from_rates(k1, km, k2, alpha, s).unwrap();
        prop_assert!(lam > 0.0 && lam < 1.0);
        let kap = kappa_from_rates(k1, km, k2, alpha, s).unwrap();
        prop_assert!(kap < 0.0);
        // the smaller-magnitude root of kappa^2 + (a + alpha + c) kappa + alpha c
        let sum = s * k1 + alpha + km + k2;
        let resid = (kap * kap + sum * kap + alpha * (km + k2)).abs() / (alpha * (km + k2));
        prop_assert!(resid < 1e-8);
        prop_assert!(kap >= -alpha * (1.0 + 1e-12));
    }
}
