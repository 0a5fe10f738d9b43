//! Conformational-fluctuation scenarios, their eigenvalue laws, and the
//! fast-reset convergence study.
//!
//! Scenario 1 has no transitions among the free-enzyme conformations,
//! scenario 2 none among the complex conformations. Scenarios 3 and 4
//! speed up the free-enzyme (resp. complex) fluctuations by a factor `tau`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, C64};
use crate::network::NetworkSpec;
use crate::passage::absorption_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Scenario {
    FrozenFree,
    FrozenComplex,
    FastFree,
    FastComplex,
}

impl TryFrom<u8> for Scenario {
    type Error = Error;

    fn try_from(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Scenario::FrozenFree),
            2 => Ok(Scenario::FrozenComplex),
            3 => Ok(Scenario::FastFree),
            4 => Ok(Scenario::FastComplex),
            _ => Err(Error::arg(format!("scenario must be 1, 2, 3 or 4, got {k}"))),
        }
    }
}

impl From<Scenario> for u8 {
    fn from(s: Scenario) -> u8 {
        match s {
            Scenario::FrozenFree => 1,
            Scenario::FrozenComplex => 2,
            Scenario::FastFree => 3,
            Scenario::FastComplex => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub base: NetworkSpec,
    pub scenario: Scenario,
    /// Fluctuation speed-up, used by scenarios 3 and 4.
    pub tau: f64,
}

impl ScenarioSpec {
    pub fn new(base: NetworkSpec, scenario: Scenario, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::arg(format!("tau must be finite and positive, got {tau}")));
        }
        Ok(ScenarioSpec { base, scenario, tau })
    }

    pub fn build(&self) -> Result<NetworkSpec> {
        build_scenario(self)
    }

    /// Diagonal of the free-enzyme fluctuation matrix of the built spec.
    pub fn i_alpha(&self) -> Result<DVector<f64>> {
        Ok(self.build()?.q_aa().diagonal())
    }

    /// Diagonal of the complex fluctuation matrix of the built spec.
    pub fn i_beta(&self) -> Result<DVector<f64>> {
        Ok(self.build()?.q_bb().diagonal())
    }
}

pub fn build_scenario(s: &ScenarioSpec) -> Result<NetworkSpec> {
    if !(s.tau.is_finite() && s.tau > 0.0) {
        return Err(Error::arg(format!("tau must be finite and positive, got {}", s.tau)));
    }
    let n = s.base.n();
    let b = s.base.to_builder();
    match s.scenario {
        Scenario::FrozenFree => b.q_aa(DMatrix::zeros(n, n)).build(),
        Scenario::FrozenComplex => b.q_bb(DMatrix::zeros(n, n)).build(),
        Scenario::FastFree => b.q_aa(s.base.q_aa() * s.tau).build(),
        Scenario::FastComplex => b.q_bb(s.base.q_bb() * s.tau).build(),
    }
}

/// The reduced generator with both fluctuation matrices replaced by their
/// diagonals. It is block diagonal over conformations, so each of its
/// eigenvalues is a root of the per-conformation quadratic
/// [`root_equation_solve`].
pub fn diagonal_approximation(spec: &NetworkSpec) -> DMatrix<f64> {
    let n = spec.n();
    let q_ab = spec.q_ab();
    let back = spec.q_ba() + spec.q_bc();
    let i_alpha = DMatrix::from_diagonal(&spec.q_aa().diagonal());
    let i_beta = DMatrix::from_diagonal(&spec.q_bb().diagonal());
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&(i_alpha - &q_ab));
    t.view_mut((0, n), (n, n)).copy_from(&q_ab);
    t.view_mut((n, 0), (n, n)).copy_from(&back);
    t.view_mut((n, n), (n, n)).copy_from(&(i_beta - &back));
    t
}

/// Non-unit eigenvalues of `P_AC = -M Q_BC`, the turnover-to-turnover
/// conformation map in the fast-reset limit.
pub fn turnover_eigenvalues(spec: &NetworkSpec) -> Result<Vec<C64>> {
    let mut vals = eigenvalues(&absorption_matrix(spec)?)?;
    let one = nearest(&vals, C64::new(1.0, 0.0));
    vals.remove(one);
    Ok(vals)
}

/// Nonzero eigenvalues of the reduced generator.
pub fn intensity_rates(spec: &NetworkSpec) -> Result<Vec<C64>> {
    let mut vals = eigenvalues(spec.reduced().matrix())?;
    let zero = nearest(&vals, C64::new(0.0, 0.0));
    vals.remove(zero);
    Ok(vals)
}

fn nearest(vals: &[C64], z: C64) -> usize {
    let mut best = 0;
    for (k, v) in vals.iter().enumerate() {
        if (v - z).norm() < (vals[best] - z).norm() {
            best = k;
        }
    }
    best
}

/// Turnover eigenvalue at concentration `s` in scenario 2, given its value
/// at unit concentration.
pub fn turnover_eigenvalue_rescale(lambda_at_unit: f64, concentration: f64) -> Result<f64> {
    if !(lambda_at_unit > 0.0 && lambda_at_unit < 1.0) {
        return Err(Error::arg(format!(
            "eigenvalue at unit concentration must lie in (0, 1), got {lambda_at_unit}"
        )));
    }
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(Error::arg(format!(
            "concentration must be positive, got {concentration}"
        )));
    }
    Ok(1.0 / (1.0 - (1.0 - 1.0 / lambda_at_unit) / concentration))
}

/// Same law for a complex eigenvalue.
pub fn turnover_eigenvalue_rescale_complex(lambda_at_unit: C64, concentration: f64) -> C64 {
    let one = C64::new(1.0, 0.0);
    one / (one - (one - one / lambda_at_unit) / concentration)
}

fn check_rates(rates: &[(&str, f64)]) -> Result<()> {
    for (name, x) in rates {
        if !(x.is_finite() && *x > 0.0) {
            return Err(Error::arg(format!("{name} must be finite and positive, got {x}")));
        }
    }
    Ok(())
}

/// Both roots of
/// `(kappa - beta + k2 + k_neg1)(kappa - alpha + [S] k1) = [S] k1 (k2 + k_neg1)`,
/// the one closer to zero first.
pub fn root_equation_solve(
    alpha_ii: f64,
    beta_ii: f64,
    k1: f64,
    k_neg1: f64,
    k2: f64,
    concentration: f64,
) -> Result<(f64, f64)> {
    check_rates(&[
        ("k1", k1),
        ("k_neg1", k_neg1),
        ("k2", k2),
        ("concentration", concentration),
    ])?;
    if !(alpha_ii <= 0.0 && beta_ii <= 0.0) {
        return Err(Error::arg(format!(
            "diagonal fluctuation rates must be nonpositive, got alpha {alpha_ii}, beta {beta_ii}"
        )));
    }
    let a = concentration * k1;
    let c = k2 + k_neg1;
    // kappa^2 + b kappa + cc = 0
    let b = (a - alpha_ii) + (c - beta_ii);
    let cc = alpha_ii * beta_ii - c * alpha_ii - a * beta_ii;
    let disc = ((a - alpha_ii) - (c - beta_ii)).powi(2) + 4.0 * a * c;
    if !(disc >= 0.0) {
        return Err(Error::numerical("complex roots of the dominant-eigenvalue quadratic"));
    }
    let far = -0.5 * (b + disc.sqrt());
    let near = cc / far;
    Ok((near, far))
}

/// Residual of the quadratic at `kappa`, relative to `[S] k1 (k2 + k_neg1)`.
pub fn root_equation_residual(
    kappa: f64,
    alpha_ii: f64,
    beta_ii: f64,
    k1: f64,
    k_neg1: f64,
    k2: f64,
    concentration: f64,
) -> f64 {
    let a = concentration * k1;
    let c = k2 + k_neg1;
    ((kappa - beta_ii + c) * (kappa - alpha_ii + a) - a * c).abs() / (a * c)
}

/// The dominating intensity eigenvalue of conformation `i` in scenario 1
/// (`fluct_diag = beta_ii`) or 2 (`fluct_diag = alpha_ii`).
pub fn kappa_dominant(
    scenario: Scenario,
    k1: f64,
    fluct_diag: f64,
    k_neg1: f64,
    k2: f64,
    concentration: f64,
) -> Result<f64> {
    let (alpha, beta) = match scenario {
        Scenario::FrozenFree => (0.0, fluct_diag),
        Scenario::FrozenComplex => (fluct_diag, 0.0),
        _ => {
            return Err(Error::arg(
                "the dominant-eigenvalue law holds for scenarios 1 and 2 only",
            ))
        }
    };
    Ok(root_equation_solve(alpha, beta, k1, k_neg1, k2, concentration)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    /// Largest distance between a nonzero eigenvalue of `K` and its
    /// matched eigenvalue of `Q`.
    pub slow_gap: f64,
    /// Largest distance between a remaining eigenvalue of `Q` and its
    /// matched `-delta q_i`.
    pub far_gap: f64,
}

/// Convergence of the generator spectrum to the reduced spectrum as the
/// reset rates `delta q_i` grow, with `q` taken from `base.delta()`.
pub fn fast_reset_convergence_study(base: &NetworkSpec, delta_grid: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if delta_grid.is_empty() {
        return Err(Error::arg("delta grid is empty"));
    }
    if delta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("delta grid must be strictly increasing"));
    }
    let q = base.delta().clone();
    let threshold = 10.0 * base.max_non_reset_rate();
    let q_min = q.min();
    if let Some(&d) = delta_grid.iter().find(|&&d| !(d.is_finite() && d * q_min >= threshold)) {
        return Err(Error::Precondition(format!(
            "reset rate {d} x {q_min} is below 10 x the largest other rate ({threshold})"
        )));
    }
    let kappa = intensity_rates(base)?;
    delta_grid
        .iter()
        .map(|&delta| {
            let spec = base.with_delta(&q * delta)?;
            let mut mu = eigenvalues(spec.generator().matrix())?;
            let zero = nearest(&mu, C64::new(0.0, 0.0));
            mu.remove(zero);

            let mut taken = vec![false; mu.len()];
            let mut slow_gap = 0.0f64;
            for k in &kappa {
                let j = nearest(&mu, *k);
                if taken[j] {
                    return Err(Error::MatchingAmbiguity(format!(
                        "two reduced eigenvalues share the nearest generator eigenvalue {} at delta {delta}",
                        mu[j]
                    )));
                }
                taken[j] = true;
                slow_gap = slow_gap.max((mu[j] - k).norm());
            }
            let mut far_gap = 0.0f64;
            for qi in q.iter() {
                let target = C64::new(-delta * qi, 0.0);
                let j = (0..mu.len())
                    .filter(|&j| !taken[j])
                    .min_by(|&x, &y| (mu[x] - target).norm().total_cmp(&(mu[y] - target).norm()))
                    .ok_or_else(|| Error::numerical("ran out of generator eigenvalues while matching"))?;
                taken[j] = true;
                far_gap = far_gap.max((mu[j] - target).norm());
            }
            Ok(ConvergenceRow {
                delta,
                slow_gap,
                far_gap,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepQuantity {
    /// Non-unit eigenvalues of `P_AC`.
    Turnover,
    /// Nonzero eigenvalues of `K`.
    Intensity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub concentration: f64,
    pub quantity: SweepQuantity,
    pub eigenvalue_index: usize,
    pub value: C64,
}

/// Turnover and intensity eigenvalues of a scenario across concentrations.
pub fn concentration_sweep(s: &ScenarioSpec, concentrations: &[f64]) -> Result<Vec<SweepRow>> {
    let spec = s.build()?;
    let mut rows = Vec::new();
    for &c in concentrations {
        let at = spec.with_concentration(c)?;
        for (quantity, vals) in [
            (SweepQuantity::Turnover, turnover_eigenvalues(&at)?),
            (SweepQuantity::Intensity, intensity_rates(&at)?),
        ] {
            rows.extend(vals.into_iter().enumerate().map(|(i, value)| SweepRow {
                concentration: c,
                quantity,
                eigenvalue_index: i,
                value,
            }));
        }
    }
    Ok(rows)
}
