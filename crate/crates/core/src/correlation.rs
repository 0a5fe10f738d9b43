//! Turnover-time covariance between turnovers `1` and `m`, binned
//! fluorescence-intensity autocovariance, and the closed forms for the
//! single-conformation scheme.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_full, left_null_vector, solve_vector, C64};
use crate::network::NetworkSpec;
use crate::passage::PassageSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureKind {
    Turnover,
    Intensity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTerm {
    pub coefficient: C64,
    pub rate: C64,
}

/// A finite sum of geometric (turnover) or exponential (intensity) modes.
///
/// Turnover mixtures evaluate `sum sigma_i lambda_i^(m-1)` at lag `m`;
/// intensity mixtures evaluate `sum C_i exp(mu_i (t - bin_width))` at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMixture {
    pub kind: MixtureKind,
    pub terms: Vec<MixtureTerm>,
    pub bin_width: f64,
}

impl SpectralMixture {
    pub fn evaluate_complex(&self, x: f64) -> C64 {
        self.terms
            .iter()
            .map(|t| match self.kind {
                MixtureKind::Turnover => t.coefficient * t.rate.powf(x - 1.0),
                MixtureKind::Intensity => t.coefficient * (t.rate * (x - self.bin_width)).exp(),
            })
            .sum()
    }

    /// Real part of the mixture. Conjugate pairs make the imaginary part
    /// round-off.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.evaluate_complex(x).re
    }

    /// Turnover covariance at integer lag `m >= 2`, by repeated products
    /// rather than `powf`.
    pub fn evaluate_lag(&self, m: usize) -> C64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.rate.powi(m as i32 - 1))
            .sum()
    }
}

/// Photon detection parameters of the binned intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    /// Burst photon rate while an E0 state is occupied, per second.
    pub nu: f64,
    /// Background photon rate, per second.
    pub nu0: f64,
    /// Bin width in seconds.
    pub bin_width: f64,
}

impl DetectionModel {
    /// `nu = 0` is accepted so that the burst contribution can be switched
    /// off; otherwise bursts must outshine the background.
    pub fn new(nu: f64, nu0: f64, bin_width: f64) -> Result<Self> {
        let det = DetectionModel { nu, nu0, bin_width };
        det.validate()?;
        Ok(det)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::arg(format!(
                "nu must be finite and nonnegative, got {}",
                self.nu
            )));
        }
        if !(self.nu0.is_finite() && self.nu0 >= 0.0) {
            return Err(Error::arg(format!(
                "nu0 must be finite and nonnegative, got {}",
                self.nu0
            )));
        }
        if self.nu > 0.0 && self.nu <= self.nu0 {
            return Err(Error::arg("burst rate nu must exceed background rate nu0"));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::arg(format!(
                "bin width must be finite and positive, got {}",
                self.bin_width
            )));
        }
        Ok(())
    }
}

/// `exp(z) - 1` without cancellation for small `|z|`.
pub fn expm1_complex(z: C64) -> C64 {
    let half = (z.im * 0.5).sin();
    C64::new(z.re.exp_m1() * z.im.cos() - 2.0 * half * half, z.re.exp() * z.im.sin())
}

/// `((exp(mu dt) - 1) / mu)^2`, the weight of a mode integrated over two bins.
fn bin_weight(mu: C64, dt: f64) -> C64 {
    let z = mu * dt;
    let g = if z.norm() < 1e-8 {
        C64::new(dt, 0.0) * (C64::new(1.0, 0.0) + z * 0.5)
    } else {
        expm1_complex(z) / mu
    };
    g * g
}

/// Row vector `-w (L + M (I - Q_AB^{-1} Q_AA))` of the turnover covariance.
fn turnover_row(spec: &NetworkSpec, p: &PassageSet) -> DVector<f64> {
    let n = spec.n();
    let assoc = spec.k1() * spec.concentration();
    let mut scaled = spec.q_aa().clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row /= assoc[i];
    }
    let z = &p.l + &p.m * (DMatrix::identity(n, n) - scaled);
    -(p.w.transpose() * z).transpose()
}

fn turnover_transition(p: &PassageSet) -> DMatrix<f64> {
    &p.p_ac * &p.p_ca
}

/// Covariance of the durations of turnovers `1` and `m` in a stationary
/// sequence, `m >= 2`.
pub fn turnover_covariance(spec: &NetworkSpec, m: usize) -> Result<f64> {
    let p = PassageSet::compute(spec)?;
    turnover_covariance_from(spec, &p, m)
}

pub fn turnover_covariance_from(spec: &NetworkSpec, p: &PassageSet, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::arg(format!("turnover lag must be at least 2, got {m}")));
    }
    let r = turnover_row(spec, p);
    let trans = turnover_transition(p);
    // P^(m-1) - 1 w applied to mu_a equals P^(m-1) applied to the centred
    // vector, which avoids subtracting two nearly equal numbers.
    let mean = p.w.dot(&p.mu_a);
    let mut v = p.mu_a.add_scalar(-mean);
    for _ in 0..m - 1 {
        v = &trans * v;
    }
    Ok(r.dot(&v))
}

/// Geometric modes of the turnover covariance. The eigenvalue nearest one
/// belongs to the stationary projection and is left out.
pub fn turnover_spectrum(spec: &NetworkSpec) -> Result<SpectralMixture> {
    let p = PassageSet::compute(spec)?;
    turnover_spectrum_from(spec, &p)
}

pub fn turnover_spectrum_from(spec: &NetworkSpec, p: &PassageSet) -> Result<SpectralMixture> {
    let r = turnover_row(spec, p).map(|x| C64::new(x, 0.0));
    let mu = p.mu_a.map(|x| C64::new(x, 0.0));
    let eig = eig_full(&turnover_transition(p))?;
    let skip = eig.nearest(C64::new(1.0, 0.0));
    let terms = (0..eig.len())
        .filter(|&k| k != skip)
        .map(|k| MixtureTerm {
            coefficient: r.dot(&eig.right.column(k)) * eig.left.row(k).transpose().dot(&mu),
            rate: eig.values[k],
        })
        .collect();
    Ok(SpectralMixture {
        kind: MixtureKind::Turnover,
        terms,
        bin_width: 0.0,
    })
}

/// Normalized turnover correlation `cov(T1, Tm) / cov(T1, T2)` for
/// `m = 2..=m_max`. Empty when the lag-one covariance vanishes.
pub fn turnover_curve(spec: &NetworkSpec, m_max: usize) -> Result<Vec<(usize, f64)>> {
    let p = PassageSet::compute(spec)?;
    let covs: Vec<f64> = (2..=m_max)
        .map(|m| turnover_covariance_from(spec, &p, m))
        .collect::<Result<_>>()?;
    let Some(&first) = covs.first() else {
        return Ok(vec![]);
    };
    if first == 0.0 {
        return Ok(vec![]);
    }
    Ok(covs.iter().enumerate().map(|(i, c)| (i + 2, c / first)).collect())
}

fn build_intensity_terms(
    values: &[C64],
    row: &DMatrix<C64>,
    col: &DMatrix<C64>,
    skip: usize,
    det: &DetectionModel,
) -> Vec<MixtureTerm> {
    let nu2 = det.nu * det.nu;
    (0..values.len())
        .filter(|&k| k != skip)
        .map(|k| {
            let a = row[(k, 0)] * col[(k, 0)];
            MixtureTerm {
                coefficient: a * bin_weight(values[k], det.bin_width) * nu2,
                rate: values[k],
            }
        })
        .collect()
}

/// Exponential modes of the binned intensity covariance for bins at least
/// one bin width apart.
///
/// With `exp(Qt) = 1 pi + sum_k exp(mu_k t) xi_k eta_k`, integrating the
/// on-time correlation over two disjoint bins gives
/// `C_k = nu^2 (pi_on . xi_k)(eta_k . 1_on) ((exp(mu_k dt) - 1)/mu_k)^2`.
pub fn intensity_spectrum(spec: &NetworkSpec, det: &DetectionModel) -> Result<SpectralMixture> {
    det.validate()?;
    let p = PassageSet::compute(spec)?;
    let pi = p.stationary();
    let q = spec.generator();
    let on = q.on_mask();
    let eig = eig_full(q.matrix())?;
    let d = q.dim();
    let skip = eig.nearest(C64::new(0.0, 0.0));
    let mut row = DMatrix::<C64>::zeros(d, 1);
    let mut col = DMatrix::<C64>::zeros(d, 1);
    for k in 0..d {
        for i in (0..d).filter(|&i| on[i]) {
            row[(k, 0)] += eig.right[(i, k)] * pi[i];
            col[(k, 0)] += eig.left[(k, i)];
        }
    }
    Ok(SpectralMixture {
        kind: MixtureKind::Intensity,
        terms: build_intensity_terms(&eig.values, &row, &col, skip, det),
        bin_width: det.bin_width,
    })
}

/// `cov(I(0), I(t))` for `t >= bin_width`.
pub fn intensity_covariance(spec: &NetworkSpec, det: &DetectionModel, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= det.bin_width) {
        return Err(Error::arg(format!(
            "lag {t} is shorter than the bin width {}; overlapping bins are not supported",
            det.bin_width
        )));
    }
    Ok(intensity_spectrum(spec, det)?.evaluate(t))
}

/// Intensity modes in the fast-reset limit, with rates from the reduced
/// generator `K`.
///
/// Each `ES_j -> E_j` move of `K` that passes through E0 deposits an
/// expected on-time `h_j`, the mean E0 dwell starting from `E0_j`. The
/// on-time is then a weighted jump count whose covariance has the same
/// modal form, with `pi_on` replaced by the jump flux `pi_K(ES_j) k2_j h_j`
/// landing on `E_j` and `1_on` by the jump intensity `k2_l h_l` out of
/// `ES_l`.
pub fn intensity_spectrum_fast_reset(spec: &NetworkSpec, det: &DetectionModel) -> Result<SpectralMixture> {
    det.validate()?;
    let n = spec.n();
    let k = spec.reduced();
    if !k.is_irreducible() {
        return Err(Error::Reducible(
            "the state graph of the reduced generator is not strongly connected".into(),
        ));
    }
    let pi_k = left_null_vector(k.matrix())?;
    let dwell = solve_vector(
        &(spec.q_ca() - spec.q_cc()),
        &DVector::from_element(n, 1.0),
        "E0 dwell times",
    )?;
    let eig = eig_full(k.matrix())?;
    let d = 2 * n;
    let skip = eig.nearest(C64::new(0.0, 0.0));
    let k2 = spec.k2();
    let mut row = DMatrix::<C64>::zeros(d, 1);
    let mut col = DMatrix::<C64>::zeros(d, 1);
    for m in 0..d {
        for j in 0..n {
            let flux = pi_k[n + j] * k2[j] * dwell[j];
            row[(m, 0)] += eig.right[(j, m)] * flux;
            col[(m, 0)] += eig.left[(m, n + j)] * (k2[j] * dwell[j]);
        }
    }
    Ok(SpectralMixture {
        kind: MixtureKind::Intensity,
        terms: build_intensity_terms(&eig.values, &row, &col, skip, det),
        bin_width: det.bin_width,
    })
}

fn check_mm_rates(rates: &[(&str, f64)]) -> Result<()> {
    for (name, x) in rates {
        if !(x.is_finite() && *x > 0.0) {
            return Err(Error::arg(format!("{name} must be finite and positive, got {x}")));
        }
    }
    Ok(())
}

/// `(p, q)` of the single-conformation turnover density.
fn mm_pq(k1: f64, k_neg1: f64, k2: f64, s: f64) -> (f64, f64) {
    let q = 0.5 * (k1 * s + k2 + k_neg1);
    // q^2 - k1 k2 [S] written without cancellation.
    let disc = 0.25 * (k1 * s - k2 - k_neg1).powi(2) + k1 * s * k_neg1;
    (disc.sqrt(), q)
}

/// Density of a single-conformation turnover time.
pub fn mm_turnover_density(k1: f64, k_neg1: f64, k2: f64, concentration: f64, t: f64) -> Result<f64> {
    check_mm_rates(&[
        ("k1", k1),
        ("k_neg1", k_neg1),
        ("k2", k2),
        ("concentration", concentration),
    ])?;
    if !(t >= 0.0) {
        return Err(Error::arg(format!("time must be nonnegative, got {t}")));
    }
    let (p, q) = mm_pq(k1, k_neg1, k2, concentration);
    let slow = q - p;
    // e^{-(q-p)t} - e^{-(q+p)t} = e^{-(q-p)t} (1 - e^{-2pt})
    Ok(k1 * k2 * concentration / (2.0 * p) * (-slow * t).exp() * -(-2.0 * p * t).exp_m1())
}

/// Distribution function of a single-conformation turnover time.
pub fn mm_turnover_cdf(k1: f64, k_neg1: f64, k2: f64, concentration: f64, t: f64) -> Result<f64> {
    check_mm_rates(&[
        ("k1", k1),
        ("k_neg1", k_neg1),
        ("k2", k2),
        ("concentration", concentration),
    ])?;
    if !(t >= 0.0) {
        return Err(Error::arg(format!("time must be nonnegative, got {t}")));
    }
    let (p, q) = mm_pq(k1, k_neg1, k2, concentration);
    let c = k1 * k2 * concentration / (2.0 * p);
    let slow = q - p;
    let fast = q + p;
    // Written as c (1 - e^{-s t})/s - c (1 - e^{-f t})/f, which is exact
    // at t = 0 and uses c/s - c/f = 1.
    let tail = c * (-(-slow * t).exp_m1() / slow + (-fast * t).exp_m1() / fast);
    Ok(tail.clamp(0.0, 1.0))
}

/// Mean single-conformation turnover time, `2q / (q^2 - p^2)`.
pub fn mm_turnover_mean(k1: f64, k_neg1: f64, k2: f64, concentration: f64) -> Result<f64> {
    check_mm_rates(&[
        ("k1", k1),
        ("k_neg1", k_neg1),
        ("k2", k2),
        ("concentration", concentration),
    ])?;
    let (_, q) = mm_pq(k1, k_neg1, k2, concentration);
    Ok(2.0 * q / (k1 * k2 * concentration))
}

/// The only nonzero eigenvalue of the single-conformation reduced generator.
pub fn mm_intensity_rate(k1: f64, k_neg1: f64, k2: f64, concentration: f64) -> Result<f64> {
    check_mm_rates(&[
        ("k1", k1),
        ("k_neg1", k_neg1),
        ("k2", k2),
        ("concentration", concentration),
    ])?;
    Ok(-(k_neg1 + k2 + k1 * concentration))
}
