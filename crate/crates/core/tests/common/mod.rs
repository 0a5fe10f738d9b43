#![allow(dead_code)]

use enzyme_net::{NetworkBuilder, NetworkSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fluctuation(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            scale * rng.random_range(0.05..1.0)
        }
    })
}

fn rates(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// A seeded network with all fluctuation rates present.
pub fn random_spec(n: usize, seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NetworkBuilder::new(n)
        .concentration(rng.random_range(0.5..2.0))
        .q_aa(fluctuation(&mut rng, n, 0.3))
        .q_bb(fluctuation(&mut rng, n, 0.3))
        .q_cc(fluctuation(&mut rng, n, 0.3))
        .k1(rates(&mut rng, n, 0.5, 3.0))
        .k_neg1(rates(&mut rng, n, 0.2, 2.0))
        .k2(rates(&mut rng, n, 0.3, 4.0))
        .delta(rates(&mut rng, n, 1.0, 5.0))
        .build()
        .unwrap()
}

/// Two conformations with slow switching and very different catalytic
/// rates, so successive turnovers are strongly correlated.
pub fn correlated_pair() -> NetworkSpec {
    let slow = DMatrix::from_row_slice(2, 2, &[0.0, 0.05, 0.05, 0.0]);
    NetworkBuilder::new(2)
        .concentration(1.0)
        .q_aa(slow.clone())
        .q_bb(slow)
        .q_cc(DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.2, 0.0]))
        .k1(DVector::from_vec(vec![1.0, 2.0]))
        .k_neg1(DVector::from_vec(vec![1.0, 0.5]))
        .k2(DVector::from_vec(vec![0.5, 5.0]))
        .delta(DVector::from_vec(vec![2.0, 3.0]))
        .build()
        .unwrap()
}

/// Three conformations in a ring with slow switching.
pub fn correlated_triple() -> NetworkSpec {
    let ring = |r: f64| DMatrix::from_row_slice(3, 3, &[0.0, r, 0.0, 0.0, 0.0, r, r, 0.0, 0.0]);
    NetworkBuilder::new(3)
        .concentration(1.5)
        .q_aa(ring(0.08))
        .q_bb(ring(0.04))
        .q_cc(ring(0.5))
        .k1(DVector::from_vec(vec![1.0, 2.0, 0.7]))
        .k_neg1(DVector::from_vec(vec![0.5, 1.0, 0.3]))
        .k2(DVector::from_vec(vec![0.4, 3.0, 1.2]))
        .delta(DVector::from_vec(vec![2.0, 4.0, 3.0]))
        .build()
        .unwrap()
}

/// Stationary law from `pi Q = 0`, `sum pi = 1` by replacing one equation.
pub fn stationary_oracle(q: &DMatrix<f64>) -> DVector<f64> {
    let d = q.nrows();
    let mut a = q.transpose();
    let mut b = DVector::zeros(d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    b[d - 1] = 1.0;
    a.lu().solve(&b).unwrap()
}

/// Jump-chain absorption probabilities: from each state in `from`, the
/// probability of first entering the set `to`, at each of its states.
pub fn absorption_oracle(q: &DMatrix<f64>, from: &[usize], to: &[usize]) -> DMatrix<f64> {
    let k = from.len();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DMatrix::zeros(k, to.len());
    for (r, &i) in from.iter().enumerate() {
        let exit = -q[(i, i)];
        a[(r, r)] = 1.0;
        for (c, &j) in from.iter().enumerate() {
            if j != i {
                a[(r, c)] -= q[(i, j)] / exit;
            }
        }
        for (c, &j) in to.iter().enumerate() {
            b[(r, c)] = q[(i, j)] / exit;
        }
    }
    a.lu().solve(&b).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
