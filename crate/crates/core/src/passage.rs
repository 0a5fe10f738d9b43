//! Stationary distribution, turnover start weights, first-passage means,
//! passage probabilities and conditional passage times.
//!
//! Everything is expressed through the block inverse
//! `[[L, M], [N, R]] = G^{-1}` of the generator restricted to the off
//! states, `G = [[Q_AA - Q_AB, Q_AB], [Q_BA, Q_BB - Q_BA - Q_BC]]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inverse, left_null_vector_scaled, norm1, solve_linear};
use crate::network::NetworkSpec;

/// Round-off negatives up to this size are clamped to zero in probability
/// matrices; anything larger is an error.
const CLAMP_TOL: f64 = 1e-12;

/// The four `n x n` blocks of `G^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmnr {
    pub l: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassageSet {
    pub l: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub pi_a: DVector<f64>,
    pub pi_b: DVector<f64>,
    pub pi_c: DVector<f64>,
    pub w: DVector<f64>,
    pub mu_a: DVector<f64>,
    pub mu_b: DVector<f64>,
    pub p_ac: DMatrix<f64>,
    pub p_bc: DMatrix<f64>,
    pub p_ca: DMatrix<f64>,
    pub e_ac: DMatrix<f64>,
    pub e_bc: DMatrix<f64>,
}

/// `G`, the generator of the off states with exits to E0 removed.
pub fn off_state_block(spec: &NetworkSpec) -> DMatrix<f64> {
    let n = spec.n();
    let q_ab = spec.q_ab();
    let q_ba = spec.q_ba();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(&(spec.q_aa() - &q_ab));
    g.view_mut((0, n), (n, n)).copy_from(&q_ab);
    g.view_mut((n, 0), (n, n)).copy_from(&q_ba);
    g.view_mut((n, n), (n, n))
        .copy_from(&(spec.q_bb() - &q_ba - spec.q_bc()));
    g
}

fn diag_inv_times(d: &DVector<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row /= d[i];
    }
    out
}

/// The block inverse of `G`, each block from its own closed form.
pub fn compute_lmnr(spec: &NetworkSpec) -> Result<Lmnr> {
    let q_aa = spec.q_aa();
    let q_bb = spec.q_bb();
    let q_ab = spec.q_ab();
    let q_ba = spec.q_ba();
    let q_bc = spec.q_bc();
    let assoc = spec.k1() * spec.concentration();
    let d = q_bb - &q_ba - &q_bc;
    let a_minus = q_aa - &q_ab;

    let l_inner = &a_minus - &q_ab * solve_linear(&d, &q_ba, "L: Q_BB - Q_BA - Q_BC")?;
    let l = inverse(&l_inner, "L")?;

    let m_inner = q_bb - &q_bc - &d * diag_inv_times(&assoc, q_aa);
    let m = inverse(&m_inner, "M")?;

    let n_inner = q_aa - &a_minus * diag_inv_times(spec.k_neg1(), &(q_bb - &q_bc));
    let n_blk = inverse(&n_inner, "N")?;

    let r_inner = &d - &q_ba * solve_linear(&a_minus, &q_ab, "R: Q_AA - Q_AB")?;
    let r = inverse(&r_inner, "R")?;

    Ok(Lmnr { l, m, n: n_blk, r })
}

fn check_irreducible(spec: &NetworkSpec) -> Result<()> {
    if spec.generator().is_irreducible() {
        Ok(())
    } else {
        Err(Error::Reducible(
            "the state graph of the generator is not strongly connected".into(),
        ))
    }
}

fn stationary_from(spec: &NetworkSpec, lmnr: &Lmnr) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let q_ca = spec.q_ca();
    let coupling = &q_ca * &lmnr.m * spec.q_bc();
    let x_c = spec.q_cc() - &q_ca - &coupling;
    let scale = norm1(spec.q_cc()) + norm1(&q_ca) + norm1(&coupling);
    let pi_c = left_null_vector_scaled(&x_c, scale)?;
    let flux = pi_c.transpose() * &q_ca;
    let pi_a: DVector<f64> = -(&flux * &lmnr.l).transpose();
    let pi_b: DVector<f64> = -(&flux * &lmnr.m).transpose();
    let total = pi_a.sum() + pi_b.sum() + pi_c.sum();
    let clean = |v: DVector<f64>| -> Result<DVector<f64>> { clamp_nonnegative(v / total, "stationary distribution") };
    Ok((clean(pi_a)?, clean(pi_b)?, clean(pi_c)?))
}

fn weights_from(spec: &NetworkSpec, lmnr: &Lmnr) -> Result<DVector<f64>> {
    let n = spec.n();
    let reset = diag_inv_times(spec.delta(), spec.q_cc());
    let coupling = &lmnr.m * spec.q_bc();
    let a = DMatrix::identity(n, n) + &coupling - &reset;
    let scale = 1.0 + norm1(&coupling) + norm1(&reset);
    let w = left_null_vector_scaled(&a, scale)?;
    if w.iter().any(|&x| x < 0.0) {
        return Err(Error::numerical("start weights are not of one sign"));
    }
    Ok(w)
}

fn clamp_nonnegative(mut v: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            if *x < -CLAMP_TOL {
                return Err(Error::numerical(format!("{what} has negative entry {x:e}")));
            }
            *x = 0.0;
        }
    }
    Ok(v)
}

fn stochastic(mut p: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    for x in p.iter_mut() {
        if *x < 0.0 {
            if *x < -CLAMP_TOL {
                return Err(Error::numerical(format!("{what} has negative entry {x:e}")));
            }
            *x = 0.0;
        }
    }
    for (i, row) in p.row_iter().enumerate() {
        let s = row.sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::numerical(format!("row {i} of {what} sums to {s}")));
        }
    }
    Ok(p)
}

/// `(pi_a, pi_b, pi_c)`, jointly summing to one.
pub fn stationary_distribution(spec: &NetworkSpec) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    check_irreducible(spec)?;
    stationary_from(spec, &compute_lmnr(spec)?)
}

/// Distribution of the free-enzyme conformation in which a turnover starts.
pub fn start_weights(spec: &NetworkSpec) -> Result<DVector<f64>> {
    check_irreducible(spec)?;
    weights_from(spec, &compute_lmnr(spec)?)
}

/// Mean times to reach the E0 stage from each `E_i` and each `ES_i`.
pub fn mean_first_passage(spec: &NetworkSpec) -> Result<(DVector<f64>, DVector<f64>)> {
    check_irreducible(spec)?;
    let lmnr = compute_lmnr(spec)?;
    Ok(means_from(&lmnr))
}

fn means_from(lmnr: &Lmnr) -> (DVector<f64>, DVector<f64>) {
    let mu_a: DVector<f64> = -(&lmnr.l + &lmnr.m).column_sum();
    let mu_b: DVector<f64> = -(&lmnr.n + &lmnr.r).column_sum();
    (mu_a, mu_b)
}

/// `(P_AC, P_BC, P_CA)`: E0 conformation reached from each `E_i` and
/// `ES_i`, and E conformation reached from each `E0_i`.
pub fn passage_probabilities(spec: &NetworkSpec) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    check_irreducible(spec)?;
    probabilities_from(spec, &compute_lmnr(spec)?)
}

/// `P_AC = -M Q_BC`, the E0 conformation reached from each `E_i`. Needs
/// no irreducibility.
pub fn absorption_matrix(spec: &NetworkSpec) -> Result<DMatrix<f64>> {
    let lmnr = compute_lmnr(spec)?;
    Ok(-(&lmnr.m * spec.q_bc()))
}

fn probabilities_from(spec: &NetworkSpec, lmnr: &Lmnr) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = spec.n();
    let q_bc = spec.q_bc();
    let p_ac = stochastic(-(&lmnr.m * &q_bc), "P_AC")?;
    let p_bc = stochastic(-(&lmnr.r * &q_bc), "P_BC")?;
    let a = DMatrix::identity(n, n) - diag_inv_times(spec.delta(), spec.q_cc());
    let p_ca = stochastic(inverse(&a, "P_CA")?, "P_CA")?;
    Ok((p_ac, p_bc, p_ca))
}

/// `(E_AC, E_BC)`: entry `(i, j)` is the probability of reaching `E0_j`
/// times the mean time to get there, starting from `E_i` (resp. `ES_i`).
pub fn conditional_time_matrices(spec: &NetworkSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_irreducible(spec)?;
    Ok(times_from(spec, &compute_lmnr(spec)?))
}

fn times_from(spec: &NetworkSpec, lmnr: &Lmnr) -> (DMatrix<f64>, DMatrix<f64>) {
    let q_bc = spec.q_bc();
    let e_ac = (&lmnr.l * &lmnr.m + &lmnr.m * &lmnr.r) * &q_bc;
    let e_bc = (&lmnr.n * &lmnr.m + &lmnr.r * &lmnr.r) * &q_bc;
    (e_ac, e_bc)
}

impl PassageSet {
    pub fn compute(spec: &NetworkSpec) -> Result<Self> {
        check_irreducible(spec)?;
        let lmnr = compute_lmnr(spec)?;
        let (pi_a, pi_b, pi_c) = stationary_from(spec, &lmnr)?;
        let w = weights_from(spec, &lmnr)?;
        let (mu_a, mu_b) = means_from(&lmnr);
        let (p_ac, p_bc, p_ca) = probabilities_from(spec, &lmnr)?;
        let (e_ac, e_bc) = times_from(spec, &lmnr);
        let Lmnr { l, m, n, r } = lmnr;
        Ok(PassageSet {
            l,
            m,
            n,
            r,
            pi_a,
            pi_b,
            pi_c,
            w,
            mu_a,
            mu_b,
            p_ac,
            p_bc,
            p_ca,
            e_ac,
            e_bc,
        })
    }

    /// The full stationary vector in generator state order.
    pub fn stationary(&self) -> DVector<f64> {
        let n = self.pi_a.len();
        DVector::from_fn(3 * n, |i, _| match i / n {
            0 => self.pi_a[i],
            1 => self.pi_b[i - n],
            _ => self.pi_c[i - 2 * n],
        })
    }

    /// `w . mu_a`, the mean turnover time.
    pub fn mean_turnover_time(&self) -> f64 {
        self.w.dot(&self.mu_a)
    }
}
