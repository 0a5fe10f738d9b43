mod common;

use common::{absorption_oracle, correlated_pair, random_spec, stationary_oracle};
use enzyme_net::passage::{absorption_matrix, compute_lmnr, mean_first_passage, off_state_block};
use enzyme_net::sim::simulate_turnovers;
use enzyme_net::stats::batch_means;
use enzyme_net::{NetworkSpec, PassageSet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn assembled_inverse(spec: &NetworkSpec) -> DMatrix<f64> {
    let n = spec.n();
    let b = compute_lmnr(spec).unwrap();
    let mut inv = DMatrix::zeros(2 * n, 2 * n);
    inv.view_mut((0, 0), (n, n)).copy_from(&b.l);
    inv.view_mut((0, n), (n, n)).copy_from(&b.m);
    inv.view_mut((n, 0), (n, n)).copy_from(&b.n);
    inv.view_mut((n, n), (n, n)).copy_from(&b.r);
    inv
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn michaelis_menten_closed_forms() {
    let (k1, km, k2, d, s) = (2.0, 1.5, 3.0, 4.0, 0.7);
    let spec = NetworkSpec::michaelis_menten(k1, km, k2, d, s).unwrap();
    let p = PassageSet::compute(&spec).unwrap();
    let a = k1 * s;
    let mean = (a + km + k2) / (a * k2);
    assert!((p.mu_a[0] - mean).abs() < 1e-14);
    assert!((p.mu_b[0] - (1.0 + km * mean) / (k2 + km)).abs() < 1e-12);
    assert_eq!(p.w[0], 1.0);
    assert!((p.p_ac[(0, 0)] - 1.0).abs() < 1e-15);
    // renewal cycle: (k2 + k_neg1)/(a k2) in E, 1/k2 in ES, 1/delta in E0
    let cycle = mean + 1.0 / d;
    assert!((p.pi_a[0] - (k2 + km) / (a * k2) / cycle).abs() < 1e-14);
    assert!((p.pi_b[0] - 1.0 / k2 / cycle).abs() < 1e-14);
    assert!((p.pi_c[0] - 1.0 / d / cycle).abs() < 1e-14);
    let q = spec.generator().into_matrix();
    assert!((p.stationary() - stationary_oracle(&q)).amax() < 1e-14);
}

#[test]
fn block_inverse_times_block_is_identity() {
    for (n, seed) in [(1, 1), (2, 2), (3, 3), (5, 4)] {
        let spec = random_spec(n, seed);
        let g = off_state_block(&spec);
        let prod = &g * assembled_inverse(&spec);
        assert!((prod - DMatrix::identity(2 * n, 2 * n)).amax() < 1e-10, "n {n}");
    }
}

#[test]
fn means_match_absorbing_chain() {
    for (n, seed) in [(1, 5), (2, 6), (3, 7), (5, 8)] {
        let spec = random_spec(n, seed);
        let g = off_state_block(&spec);
        let oracle = -g.try_inverse().unwrap() * DVector::from_element(2 * n, 1.0);
        let (mu_a, mu_b) = mean_first_passage(&spec).unwrap();
        assert!(rel(&mu_a, &oracle.rows(0, n).into_owned()) < 1e-10);
        assert!(rel(&mu_b, &oracle.rows(n, n).into_owned()) < 1e-10);
    }
}

#[test]
fn passage_probabilities_match_jump_chain() {
    for (n, seed) in [(1, 9), (2, 10), (3, 11), (5, 12)] {
        let spec = random_spec(n, seed);
        let p = PassageSet::compute(&spec).unwrap();
        let q = spec.generator().into_matrix();
        let a: Vec<usize> = (0..n).collect();
        let c: Vec<usize> = (2 * n..3 * n).collect();
        let off: Vec<usize> = (0..2 * n).collect();
        let to_c = absorption_oracle(&q, &off, &c);
        assert!((&p.p_ac - to_c.rows(0, n)).amax() < 1e-10, "P_AC n {n}");
        assert!((&p.p_bc - to_c.rows(n, n)).amax() < 1e-10, "P_BC n {n}");
        let c_to_a = absorption_oracle(&q, &c, &a);
        assert!((&p.p_ca - c_to_a).amax() < 1e-10, "P_CA n {n}");
        assert!((absorption_matrix(&spec).unwrap() - &p.p_ac).amax() < 1e-15);
    }
}

#[test]
fn conditional_times_match_squared_inverse() {
    for (n, seed) in [(1, 13), (2, 14), (3, 15)] {
        let spec = random_spec(n, seed);
        let p = PassageSet::compute(&spec).unwrap();
        let g_inv = off_state_block(&spec).try_inverse().unwrap();
        let mut exits = DMatrix::zeros(2 * n, n);
        exits.view_mut((n, 0), (n, n)).copy_from(&spec.q_bc());
        let oracle = &g_inv * &g_inv * exits;
        assert!((&p.e_ac - oracle.rows(0, n)).amax() < 1e-10);
        assert!((&p.e_bc - oracle.rows(n, n)).amax() < 1e-10);
    }
}

#[test]
fn start_weights_are_normalized_reset_flux() {
    for (n, seed) in [(1, 16), (2, 17), (3, 18), (5, 19)] {
        let spec = random_spec(n, seed);
        let p = PassageSet::compute(&spec).unwrap();
        let flux = p.pi_c.component_mul(spec.delta());
        let oracle = &flux / flux.sum();
        assert!((&p.w - oracle).amax() < 1e-10);
        let fixed = (p.w.transpose() * &p.p_ac * &p.p_ca).transpose();
        assert!((fixed - &p.w).amax() < 1e-10);
    }
}

#[test]
fn simulated_turnovers_match_weights_and_mean() {
    let spec = correlated_pair();
    let p = PassageSet::compute(&spec).unwrap();
    let rec = simulate_turnovers(&spec, 200_000, 31).unwrap();
    let mean = batch_means(&rec.durations).unwrap();
    assert!(
        mean.within(p.mean_turnover_time(), 3.5),
        "{mean:?} vs {}",
        p.mean_turnover_time()
    );
    for i in 0..2 {
        let ind: Vec<f64> = rec.start_states.iter().map(|&s| f64::from(u8::from(s == i))).collect();
        let est = batch_means(&ind).unwrap();
        assert!(
            est.within(p.w[i as usize], 3.5),
            "w[{i}] {est:?} vs {}",
            p.w[i as usize]
        );
    }
    // per-start E0 conformation frequencies
    for i in 0..2u32 {
        let from_i: Vec<u32> = rec
            .start_states
            .iter()
            .zip(&rec.end_states)
            .filter(|(s, _)| **s == i)
            .map(|(_, e)| *e)
            .collect();
        let frac = from_i.iter().filter(|&&e| e == 0).count() as f64 / from_i.len() as f64;
        let se = (p.p_ac[(i as usize, 0)] * (1.0 - p.p_ac[(i as usize, 0)]) / from_i.len() as f64).sqrt();
        assert!(
            (frac - p.p_ac[(i as usize, 0)]).abs() < 4.0 * se.max(1e-4),
            "P_AC[{i}][0]: {frac}"
        );
    }
}

#[test]
fn reducible_network_is_rejected() {
    let ones = DVector::from_element(2, 1.0);
    let spec = enzyme_net::NetworkBuilder::new(2)
        .k1(ones.clone())
        .k_neg1(ones.clone())
        .k2(ones.clone())
        .delta(ones)
        .build()
        .unwrap();
    assert!(matches!(
        PassageSet::compute(&spec),
        Err(enzyme_net::Error::Reducible(_))
    ));
    // absorption alone does not need a single recurrent class
    assert!((absorption_matrix(&spec).unwrap() - DMatrix::identity(2, 2)).amax() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn passage_invariants(seed in 0u64..100_000, n in 1usize..5) {
        let spec = random_spec(n, seed);
        let p = PassageSet::compute(&spec).unwrap();
        let pi = p.stationary();
        prop_assert!((pi.sum() - 1.0).abs() < 1e-12);
        prop_assert!(pi.iter().all(|&x| x > 0.0));
        let oracle = stationary_oracle(spec.generator().matrix());
        prop_assert!((&pi - oracle).amax() < 1e-8);
        for m in [&p.p_ac, &p.p_bc, &p.p_ca] {
            prop_assert!(m.iter().all(|&x| x >= 0.0));
            for r in 0..n {
                prop_assert!((m.row(r).sum() - 1.0).abs() < 1e-9);
            }
        }
        let ones = DVector::from_element(n, 1.0);
        prop_assert!(rel(&(&p.e_ac * &ones), &p.mu_a) < 1e-8);
        prop_assert!(rel(&(&p.e_bc * &ones), &p.mu_b) < 1e-8);
        // first step analysis out of E_i: mu_a = (1 + Q_AA-part + binding) / exit
        let g = off_state_block(&spec);
        let mu = DVector::from_fn(2 * n, |i, _| if i < n { p.mu_a[i] } else { p.mu_b[i - n] });
        prop_assert!((g * mu + DVector::from_element(2 * n, 1.0)).amax() < 1e-8 * p.mu_a.amax().max(1.0));
        prop_assert!((p.w.sum() - 1.0).abs() < 1e-12);
    }
}
