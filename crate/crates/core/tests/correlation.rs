mod common;

use common::{correlated_pair, correlated_triple, random_spec};
use enzyme_net::correlation::{
    intensity_covariance, intensity_spectrum, intensity_spectrum_fast_reset, mm_intensity_rate, mm_turnover_cdf,
    mm_turnover_density, mm_turnover_mean, turnover_covariance, turnover_curve, turnover_spectrum, DetectionModel,
};
use enzyme_net::linalg::matrix_exponential;
use enzyme_net::sim::{simulate_photon_trace, simulate_turnovers};
use enzyme_net::stats::{batch_means, ks_critical_1pct, ks_statistic, lag_covariance};
use enzyme_net::{NetworkSpec, PassageSet};
use nalgebra::DVector;
use proptest::prelude::*;

#[test]
fn single_conformation_turnovers_are_uncorrelated() {
    for (k1, km, k2, d, s) in [
        (1.0, 1.0, 1.0, 1.0, 1.0),
        (3.0, 0.2, 7.0, 50.0, 0.1),
        (0.4, 9.0, 0.3, 2.0, 20.0),
    ] {
        let spec = NetworkSpec::michaelis_menten(k1, km, k2, d, s).unwrap();
        for m in 2..=10 {
            assert!(turnover_covariance(&spec, m).unwrap().abs() < 1e-12);
        }
        assert!(turnover_spectrum(&spec).unwrap().terms.is_empty());
        assert!(turnover_curve(&spec, 5).unwrap().is_empty());
    }
}

#[test]
fn spectral_and_matrix_routes_agree_and_decay() {
    for (i, spec) in [correlated_pair(), correlated_triple(), random_spec(4, 3)]
        .iter()
        .enumerate()
    {
        let mix = turnover_spectrum(spec).unwrap();
        let scale = turnover_covariance(spec, 2).unwrap().abs();
        assert!(scale > 0.0);
        for m in 2..=20 {
            let direct = turnover_covariance(spec, m).unwrap();
            let spectral = mix.evaluate_lag(m);
            assert!(spectral.im.abs() < 1e-10 * scale);
            assert!(
                (spectral.re - direct).abs() <= 1e-8 * scale,
                "spec {i} m {m}: {} vs {direct}",
                spectral.re
            );
        }
        let far = turnover_covariance(spec, 400).unwrap();
        assert!(far.abs() < 1e-6 * scale, "spec {i}: {far}");
        let rates: Vec<f64> = mix.terms.iter().map(|t| t.rate.norm()).collect();
        assert!(rates.iter().all(|&r| r < 1.0));
    }
}

#[test]
fn slowly_switching_pair_has_positive_memory() {
    let curve = turnover_curve(&correlated_pair(), 30).unwrap();
    assert_eq!(curve[0], (2, 1.0));
    assert!(curve.windows(2).all(|w| w[1].1 < w[0].1 && w[1].1 > 0.0));
}

#[test]
fn simulated_turnover_covariance_matches() {
    for (spec, seed) in [(correlated_pair(), 3), (correlated_triple(), 4)] {
        let rec = simulate_turnovers(&spec, 600_000, seed).unwrap();
        for m in 2..=5 {
            let est = lag_covariance(&rec.durations, m - 1).unwrap();
            let exact = turnover_covariance(&spec, m).unwrap();
            assert!(est.within(exact, 3.5), "m {m}: {est:?} vs {exact}");
        }
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `nu^2` times the on-time correlation integrated over two bins, with the
/// transition kernel from the matrix exponential.
fn intensity_oracle(spec: &NetworkSpec, det: &DetectionModel, k: usize) -> f64 {
    let q = spec.generator().into_matrix();
    let pi = PassageSet::compute(spec).unwrap().stationary();
    let n = spec.n();
    let on = DVector::from_fn(3 * n, |i, _| if i >= 2 * n { 1.0 } else { 0.0 });
    let pi_on = pi.component_mul(&on);
    let mass = pi_on.sum();
    let f = |tau: f64| (pi_on.transpose() * matrix_exponential(&q, tau).unwrap() * &on)[(0, 0)] - mass * mass;
    let dt = det.bin_width;
    let t = k as f64 * dt;
    let g = |r: f64| (dt - r.abs()) * f(t + r);
    det.nu * det.nu * (simpson(g, -dt, 0.0, 200) + simpson(g, 0.0, dt, 200))
}

#[test]
fn intensity_covariance_matches_exponential_quadrature() {
    let det = DetectionModel::new(80.0, 2.0, 0.3).unwrap();
    for spec in [
        correlated_pair(),
        random_spec(3, 8),
        NetworkSpec::michaelis_menten(1.0, 2.0, 3.0, 4.0, 1.0).unwrap(),
    ] {
        for k in [1, 2, 5, 12] {
            let c = intensity_covariance(&spec, &det, k as f64 * det.bin_width).unwrap();
            let oracle = intensity_oracle(&spec, &det, k);
            assert!(
                (c - oracle).abs() <= 1e-8 * oracle.abs().max(1e-6 * det.nu * det.nu),
                "k {k}: {c} vs {oracle}"
            );
        }
    }
}

#[test]
fn intensity_covariance_rejects_overlapping_bins() {
    let det = DetectionModel::new(10.0, 1.0, 0.1).unwrap();
    assert!(intensity_covariance(&correlated_pair(), &det, 0.05).is_err());
    assert!(DetectionModel::new(1.0, 2.0, 0.1).is_err());
    assert!(DetectionModel::new(0.0, 2.0, 0.1).is_ok());
}

#[test]
fn simulated_photon_covariance_matches() {
    let spec = correlated_pair();
    let det = DetectionModel::new(100.0, 1.0, 0.05).unwrap();
    let trace = simulate_photon_trace(&spec, &det, 2e6 * det.bin_width, 5, 6).unwrap();
    let x: Vec<f64> = trace.counts.iter().map(|&c| f64::from(c)).collect();
    for k in [1, 2, 5] {
        let est = lag_covariance(&x, k).unwrap();
        let exact = intensity_covariance(&spec, &det, k as f64 * det.bin_width).unwrap();
        assert!(est.within(exact, 3.5), "lag {k}: {est:?} vs {exact}");
    }
}

#[test]
fn fast_reset_modes_approach_full_generator() {
    let det = DetectionModel::new(50.0, 0.0, 0.2).unwrap();
    let base = correlated_pair();
    let mut previous = f64::INFINITY;
    for factor in [1e2, 1e4, 1e6] {
        let spec = base.with_delta(base.delta() * factor).unwrap();
        let full = intensity_spectrum(&spec, &det).unwrap();
        let reduced = intensity_spectrum_fast_reset(&spec, &det).unwrap();
        let ts: Vec<f64> = (1..=6).map(|k| k as f64 * det.bin_width).collect();
        // the curve crosses zero near the first lag, so errors are taken
        // relative to its largest magnitude
        let scale = ts.iter().map(|&t| reduced.evaluate(t).abs()).fold(0.0, f64::max);
        let worst = ts
            .iter()
            .map(|&t| (full.evaluate(t) - reduced.evaluate(t)).abs())
            .fold(0.0, f64::max)
            / scale;
        assert!(worst < previous * 0.05, "factor {factor}: {worst}");
        previous = worst;
    }
    assert!(previous < 1e-4);
}

#[test]
fn single_conformation_density_integrates_and_matches_passage_mean() {
    for (k1, km, k2, s) in [(1.0, 1.0, 1.0, 1.0), (2.0, 0.3, 5.0, 0.4), (0.5, 4.0, 0.7, 3.0)] {
        let spec = NetworkSpec::michaelis_menten(k1, km, k2, 10.0, s).unwrap();
        let mean = mm_turnover_mean(k1, km, k2, s).unwrap();
        let p = PassageSet::compute(&spec).unwrap();
        assert!((mean - p.mean_turnover_time()).abs() < 1e-12 * mean);
        let upper = 60.0 * mean;
        let f = |t: f64| mm_turnover_density(k1, km, k2, s, t).unwrap();
        let mass = simpson(f, 0.0, upper, 200_000);
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
        let first = simpson(|t| t * f(t), 0.0, upper, 200_000);
        assert!((first - mean).abs() < 1e-8 * mean);
        for t in [0.1, 1.0, 3.0] {
            let cdf = simpson(f, 0.0, t * mean, 20_000);
            assert!((mm_turnover_cdf(k1, km, k2, s, t * mean).unwrap() - cdf).abs() < 1e-10);
        }
        assert_eq!(mm_turnover_density(k1, km, k2, s, 0.0).unwrap(), 0.0);
    }
}

#[test]
fn single_conformation_simulation_matches_density() {
    let (k1, km, k2, s) = (1.5, 0.8, 2.5, 1.2);
    let spec = NetworkSpec::michaelis_menten(k1, km, k2, 5.0, s).unwrap();
    let rec = simulate_turnovers(&spec, 100_000, 17).unwrap();
    let ks = ks_statistic(&rec.durations, |t| mm_turnover_cdf(k1, km, k2, s, t).unwrap());
    assert!(ks < ks_critical_1pct(rec.len()), "{ks}");
    let est = batch_means(&rec.durations).unwrap();
    assert!(est.within(mm_turnover_mean(k1, km, k2, s).unwrap(), 3.5));
}

#[test]
fn single_conformation_intensity_rate() {
    for s in [0.5, 1.0, 2.0, 7.0] {
        let spec = NetworkSpec::michaelis_menten(1.0, 1.0, 1.0, 1e6, s).unwrap();
        let det = DetectionModel::new(10.0, 0.0, 1e-3).unwrap();
        let mix = intensity_spectrum(&spec, &det).unwrap();
        let slow = mix.terms.iter().map(|t| t.rate.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((slow - mm_intensity_rate(1.0, 1.0, 1.0, s).unwrap()).abs() < 1e-3 * slow.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_equivalence_on_random_networks(seed in 0u64..100_000, n in 2usize..5) {
        let spec = random_spec(n, seed);
        let mix = turnover_spectrum(&spec).unwrap();
        let scale = (2..=20).map(|m| turnover_covariance(&spec, m).unwrap().abs()).fold(0.0, f64::max);
        for m in 2..=20 {
            let direct = turnover_covariance(&spec, m).unwrap();
            prop_assert!((mix.evaluate_lag(m).re - direct).abs() <= 1e-8 * scale.max(1e-300));
        }
    }

    #[test]
    fn intensity_covariance_is_real_and_finite(seed in 0u64..100_000, n in 1usize..4) {
        let spec = random_spec(n, seed);
        let det = DetectionModel::new(20.0, 1.0, 0.1).unwrap();
        let mix = intensity_spectrum(&spec, &det).unwrap();
        for k in 1..10 {
            let z = mix.evaluate_complex(k as f64 * det.bin_width);
            prop_assert!(z.re.is_finite());
            prop_assert!(z.im.abs() <= 1e-9 * z.norm().max(1e-12));
        }
    }
}
