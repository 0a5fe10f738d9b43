//! Continuum limit with Gamma-distributed catalytic and fluctuation rates,
//! the resulting model correlation curves, and their least-squares fit.
//!
//! Gamma distributions are parameterized by (shape, scale), so the mean of
//! `Gamma(a, b)` is `a b`.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::correlation::MixtureKind;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::optimize::{nelder_mead, SimplexOptions};
use crate::passage::PassageSet;

/// The six parameters of the continuum model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumParams {
    pub k1: f64,
    pub k_neg1: f64,
    /// Shape of the catalytic rate distribution.
    pub a: f64,
    /// Scale of the catalytic rate distribution, per second.
    pub b: f64,
    /// Shape of the fluctuation rate distribution.
    pub a_alpha: f64,
    /// Scale of the fluctuation rate distribution, per second.
    pub b_alpha: f64,
}

/// Parameters fitted to beta-galactosidase correlation data at
/// `[S] = 20, 100, 380` micromolar.
pub const REFERENCE_FIT: ContinuumParams = ContinuumParams {
    k1: 1.785e3,
    k_neg1: 6.170e3,
    a: 13.49,
    b: 2.279,
    a_alpha: 0.6489,
    b_alpha: 1.461e3,
};

impl ContinuumParams {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in self.named() {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::arg(format!("{name} must be finite and positive, got {x}")));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("k1", self.k1),
            ("k_neg1", self.k_neg1),
            ("a", self.a),
            ("b", self.b),
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
        ]
    }

    fn to_log(self) -> Vec<f64> {
        self.named().iter().map(|(_, x)| x.ln()).collect()
    }

    fn from_log(x: &[f64]) -> Self {
        ContinuumParams {
            k1: x[0].exp(),
            k_neg1: x[1].exp(),
            a: x[2].exp(),
            b: x[3].exp(),
            a_alpha: x[4].exp(),
            b_alpha: x[5].exp(),
        }
    }
}

/// A normalized correlation curve, observed or modelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub kind: MixtureKind,
    pub concentration: f64,
    /// Turnover lag `m >= 1`, or time `t >= bin_width` in seconds.
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    /// Bin width in seconds; intensity curves only.
    pub bin_width: Option<f64>,
}

impl CorrelationCurve {
    pub fn validate(&self) -> Result<()> {
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::arg(format!(
                "curve concentration must be positive, got {}",
                self.concentration
            )));
        }
        if self.abscissa.is_empty() || self.abscissa.len() != self.values.len() {
            return Err(Error::arg(
                "curve needs equally many abscissae and values, at least one",
            ));
        }
        if self.abscissa.iter().chain(&self.values).any(|x| !x.is_finite()) {
            return Err(Error::arg("curve contains non-finite numbers"));
        }
        if self.abscissa.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::arg("curve abscissae must be strictly increasing"));
        }
        if (self.values[0] - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!(
                "curve must be normalized to 1 at its first point, got {}",
                self.values[0]
            )));
        }
        match self.kind {
            MixtureKind::Turnover => {
                if self.abscissa.iter().any(|&m| m < 1.0 || m.fract() != 0.0) {
                    return Err(Error::arg("turnover lags must be integers >= 1"));
                }
            }
            MixtureKind::Intensity => {
                let dt = self
                    .bin_width
                    .ok_or_else(|| Error::arg("intensity curve needs a bin width"))?;
                if !(dt.is_finite() && dt > 0.0) {
                    return Err(Error::arg(format!("bin width must be positive, got {dt}")));
                }
                if self.abscissa[0] < dt {
                    return Err(Error::arg("intensity lags must be at least one bin width"));
                }
            }
        }
        Ok(())
    }
}

fn check_positive(rates: &[(&str, f64)]) -> Result<()> {
    for (name, x) in rates {
        if !(x.is_finite() && *x > 0.0) {
            return Err(Error::arg(format!("{name} must be finite and positive, got {x}")));
        }
    }
    Ok(())
}

fn lambda_unchecked(k1: f64, k_neg1: f64, k2: f64, alpha_star: f64, s: f64) -> f64 {
    1.0 / (1.0 + alpha_star * (k_neg1 + k2) / (s * k1 * k2))
}

fn kappa_unchecked(k1: f64, k_neg1: f64, k2: f64, alpha_star: f64, s: f64) -> f64 {
    let c = k_neg1 + k2;
    let sum = s * k1 + alpha_star + c;
    // The root of smaller magnitude, written as a product over the larger
    // one so that it does not cancel.
    -2.0 * alpha_star * c / (sum + (sum * sum - 4.0 * alpha_star * c).sqrt())
}

/// Turnover eigenvalue of one molecule with rates `k2` and `alpha_star`.
pub fn lambda_from_rates(k1: f64, k_neg1: f64, k2: f64, alpha_star: f64, concentration: f64) -> Result<f64> {
    check_positive(&[
        ("k1", k1),
        ("k_neg1", k_neg1),
        ("k2", k2),
        ("alpha_star", alpha_star),
        ("concentration", concentration),
    ])?;
    Ok(lambda_unchecked(k1, k_neg1, k2, alpha_star, concentration))
}

/// Dominant intensity eigenvalue of one molecule with rates `k2` and
/// `alpha_star`.
pub fn kappa_from_rates(k1: f64, k_neg1: f64, k2: f64, alpha_star: f64, concentration: f64) -> Result<f64> {
    check_positive(&[
        ("k1", k1),
        ("k_neg1", k_neg1),
        ("k2", k2),
        ("alpha_star", alpha_star),
        ("concentration", concentration),
    ])?;
    Ok(kappa_unchecked(k1, k_neg1, k2, alpha_star, concentration))
}

/// Above this shape the Wilson–Hilferty transform is used as is; its
/// relative error is below 6e-5 here and falls roughly like `shape^-1.5`,
/// while the incomplete gamma series costs `O(sqrt(shape))` terms.
pub const LARGE_SHAPE: f64 = 1e3;

/// Quantile of the unit-scale Gamma distribution with the given shape.
///
/// Halley iteration on the regularized incomplete gamma function from a
/// Wilson–Hilferty (shape > 1) or small-shape starting point. Shapes of
/// at least [`LARGE_SHAPE`] skip the iteration.
pub fn gamma_quantile(shape: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let a = shape;
    if a >= LARGE_SHAPE {
        let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
        return (a * (1.0 - 1.0 / (9.0 * a) + z / (3.0 * a.sqrt())).powi(3)).max(0.0);
    }
    let a1 = a - 1.0;
    let gln = ln_gamma(a);
    let (lna1, afac) = if a > 1.0 {
        let lna1 = a1.ln();
        (lna1, (a1 * (lna1 - 1.0) - gln).exp())
    } else {
        (0.0, 0.0)
    };
    let mut x = if a > 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        (a * (1.0 - 1.0 / (9.0 * a) - z / (3.0 * a.sqrt())).powi(3)).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            (p / t).powf(1.0 / a)
        } else {
            1.0 - (1.0 - (p - t) / (1.0 - t)).ln()
        }
    };
    for _ in 0..100 {
        if x <= 0.0 {
            return 0.0;
        }
        let err = if p < 0.5 {
            gamma_lr(a, x) - p
        } else {
            (1.0 - p) - gamma_ur(a, x)
        };
        let density = if a > 1.0 {
            afac * (-(x - a1) + a1 * (x.ln() - lna1)).exp()
        } else {
            (-x + a1 * x.ln() - gln).exp()
        };
        if density == 0.0 {
            break;
        }
        let u = err / density;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - 1.0)).min(1.0));
        x -= step;
        if x <= 0.0 {
            x = 0.5 * (x + step);
        }
        if step.abs() < 1e-14 * x {
            break;
        }
    }
    x
}

/// Stratified uniforms shared by every evaluation of the model curves.
///
/// Each coordinate is a Latin-hypercube sample: one point in each of the
/// `n` equal strata of `(0, 1)`, with strata paired across the two
/// coordinates by a seeded permutation.
#[derive(Debug, Clone)]
pub struct CommonDraws {
    u_k2: Vec<f64>,
    u_alpha: Vec<f64>,
}

impl CommonDraws {
    pub fn new(n_draws: usize, seed: u64) -> Result<Self> {
        if n_draws == 0 {
            return Err(Error::arg("at least one draw is needed"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n_draws as f64;
        let strata = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut idx: Vec<usize> = (0..n_draws).collect();
            idx.shuffle(rng);
            idx.into_iter()
                .map(|i| {
                    // Open interval: keep away from the endpoints.
                    let u: f64 = rng.random();
                    ((i as f64 + u) / n).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
                })
                .collect()
        };
        let u_k2 = strata(&mut rng);
        let u_alpha = strata(&mut rng);
        Ok(CommonDraws { u_k2, u_alpha })
    }

    pub fn len(&self) -> usize {
        self.u_k2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_k2.is_empty()
    }

    /// `(k2, alpha_star)` samples for the given parameters.
    pub fn rates(&self, params: &ContinuumParams) -> (Vec<f64>, Vec<f64>) {
        let k2 = self
            .u_k2
            .iter()
            .map(|&u| params.b * gamma_quantile(params.a, u))
            .collect();
        let alpha = self
            .u_alpha
            .iter()
            .map(|&u| params.b_alpha * gamma_quantile(params.a_alpha, u))
            .collect();
        (k2, alpha)
    }
}

/// Model curve values at the given abscissae for pre-drawn rates.
fn model_values(
    params: &ContinuumParams,
    k2: &[f64],
    alpha: &[f64],
    kind: MixtureKind,
    concentration: f64,
    abscissa: &[f64],
    bin_width: f64,
) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; abscissa.len()];
    for (&k2, &al) in k2.iter().zip(alpha) {
        // Degenerate draws (zero rate from a vanishing quantile) carry no
        // fluctuation and contribute the no-decay limit.
        match kind {
            MixtureKind::Turnover => {
                let lam = if al > 0.0 && k2 > 0.0 {
                    lambda_unchecked(params.k1, params.k_neg1, k2, al, concentration)
                } else if k2 > 0.0 {
                    1.0
                } else {
                    0.0
                };
                for (s, &m) in sums.iter_mut().zip(abscissa) {
                    *s += lam.powi(m as i32);
                }
            }
            MixtureKind::Intensity => {
                let kap = if al > 0.0 {
                    kappa_unchecked(params.k1, params.k_neg1, k2, al, concentration)
                } else {
                    0.0
                };
                for (s, &t) in sums.iter_mut().zip(abscissa) {
                    *s += (kap * (t - bin_width)).exp();
                }
            }
        }
    }
    let first = sums[0];
    if !(first.is_finite() && first > 0.0) {
        return Err(Error::numerical(format!(
            "model curve underflowed at its first point ({first:e})"
        )));
    }
    let values: Vec<f64> = sums.iter().map(|s| s / first).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("model curve is not finite"));
    }
    Ok(values)
}

fn turnover_abscissa(m_max: usize) -> Result<Vec<f64>> {
    if m_max == 0 {
        return Err(Error::arg("m_max must be at least 1"));
    }
    Ok((1..=m_max).map(|m| m as f64).collect())
}

/// `E[lambda^m] / E[lambda]` for `m = 1..=m_max`.
pub fn turnover_curve(
    params: &ContinuumParams,
    concentration: f64,
    m_max: usize,
    n_draws: usize,
    seed: u64,
) -> Result<CorrelationCurve> {
    params.validate()?;
    check_positive(&[("concentration", concentration)])?;
    let abscissa = turnover_abscissa(m_max)?;
    let (k2, alpha) = CommonDraws::new(n_draws, seed)?.rates(params);
    let values = model_values(
        params,
        &k2,
        &alpha,
        MixtureKind::Turnover,
        concentration,
        &abscissa,
        0.0,
    )?;
    Ok(CorrelationCurve {
        kind: MixtureKind::Turnover,
        concentration,
        abscissa,
        values,
        bin_width: None,
    })
}

/// `E[exp(kappa (t - dt))]` over `t_grid`, normalized at its first point.
pub fn intensity_curve(
    params: &ContinuumParams,
    concentration: f64,
    t_grid: &[f64],
    bin_width: f64,
    n_draws: usize,
    seed: u64,
) -> Result<CorrelationCurve> {
    params.validate()?;
    check_positive(&[("concentration", concentration), ("bin_width", bin_width)])?;
    let shape = CorrelationCurve {
        kind: MixtureKind::Intensity,
        concentration,
        abscissa: t_grid.to_vec(),
        values: vec![1.0; t_grid.len()],
        bin_width: Some(bin_width),
    };
    shape.validate()?;
    let (k2, alpha) = CommonDraws::new(n_draws, seed)?.rates(params);
    let values = model_values(
        params,
        &k2,
        &alpha,
        MixtureKind::Intensity,
        concentration,
        t_grid,
        bin_width,
    )?;
    Ok(CorrelationCurve { values, ..shape })
}

/// Steady-state turnover velocity `1 / (w . mu_a)`.
pub fn mm_velocity(spec: &NetworkSpec) -> Result<f64> {
    Ok(1.0 / PassageSet::compute(spec)?.mean_turnover_time())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolaFit {
    pub vmax: f64,
    pub c: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `v = vmax [S] / ([S] + c)`.
pub fn fit_hyperbola(concentrations: &[f64], velocities: &[f64]) -> Result<HyperbolaFit> {
    if concentrations.len() != velocities.len() || concentrations.len() < 2 {
        return Err(Error::arg(
            "hyperbola fit needs at least two (concentration, velocity) pairs",
        ));
    }
    if concentrations.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::arg("concentrations must be positive"));
    }
    // For fixed c the best vmax is linear least squares, leaving a 1-D
    // search over log c.
    let profile = |log_c: f64| -> (f64, f64) {
        let c = log_c.exp();
        let x: Vec<f64> = concentrations.iter().map(|s| s / (s + c)).collect();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(velocities).map(|(a, b)| a * b).sum();
        let vmax = sxy / sxx;
        let sse = x.iter().zip(velocities).map(|(a, b)| (vmax * a - b).powi(2)).sum();
        (sse, vmax)
    };
    let s_min = concentrations.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = concentrations.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = ((s_min * 1e-4).ln(), (s_max * 1e4).ln());
    let grid = 400;
    let mut best = lo;
    for i in 0..=grid {
        let x = lo + (hi - lo) * i as f64 / grid as f64;
        if profile(x).0 < profile(best).0 {
            best = x;
        }
    }
    let h = (hi - lo) / grid as f64;
    let (mut a, mut b) = (best - h, best + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if profile(x1).0 < profile(x2).0 {
            b = x2;
        } else {
            a = x1;
        }
    }
    let log_c = 0.5 * (a + b);
    let (sse, vmax) = profile(log_c);
    let mean = velocities.iter().sum::<f64>() / velocities.len() as f64;
    let sst: f64 = velocities.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(HyperbolaFit {
        vmax,
        c: log_c.exp(),
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub n_draws: usize,
    pub seed: u64,
    /// Number of simplex runs, the first from `init` and the rest from
    /// seeded perturbations of it by factors in `[0.5, 2]`.
    pub restarts: usize,
    /// Evaluation cap per simplex run.
    pub max_evals: usize,
    /// Simplex diameter in log-parameter space at which a run stops.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_draws: 100_000,
            seed: 0,
            restarts: 8,
            max_evals: 4000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: ContinuumParams,
    pub objective: f64,
    /// Objective evaluations across all runs.
    pub n_evals: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Best objective after each iteration of the winning run.
    pub trace: Vec<f64>,
}

/// The least-squares objective with its random numbers fixed.
#[derive(Debug, Clone)]
pub struct FitObjective {
    observed: Vec<CorrelationCurve>,
    draws: CommonDraws,
}

impl FitObjective {
    pub fn new(observed: Vec<CorrelationCurve>, n_draws: usize, seed: u64) -> Result<Self> {
        for c in &observed {
            c.validate()?;
        }
        let has = |k| observed.iter().any(|c| c.kind == k);
        if !has(MixtureKind::Turnover) || !has(MixtureKind::Intensity) {
            return Err(Error::arg(
                "the fit needs at least one turnover and one intensity curve",
            ));
        }
        Ok(FitObjective {
            observed,
            draws: CommonDraws::new(n_draws, seed)?,
        })
    }

    /// Model curves at the observed abscissae.
    pub fn model_curves(&self, params: &ContinuumParams) -> Result<Vec<CorrelationCurve>> {
        params.validate()?;
        let (k2, alpha) = self.draws.rates(params);
        self.observed
            .iter()
            .map(|c| {
                let values = model_values(
                    params,
                    &k2,
                    &alpha,
                    c.kind,
                    c.concentration,
                    &c.abscissa,
                    c.bin_width.unwrap_or(0.0),
                )?;
                Ok(CorrelationCurve { values, ..c.clone() })
            })
            .collect()
    }

    /// Sum of squared residuals over every point of every curve.
    pub fn evaluate(&self, params: &ContinuumParams) -> Result<f64> {
        let model = self.model_curves(params)?;
        let sse: f64 = model
            .iter()
            .zip(&self.observed)
            .flat_map(|(m, o)| m.values.iter().zip(&o.values).map(|(a, b)| (a - b).powi(2)))
            .sum();
        if !sse.is_finite() {
            return Err(Error::numerical("objective is not finite"));
        }
        Ok(sse)
    }

    pub fn observed(&self) -> &[CorrelationCurve] {
        &self.observed
    }
}

/// Fits the six continuum parameters to the observed curves by multi-start
/// simplex search in log-parameter space.
///
/// The objective at the returned parameters never exceeds the objective
/// at `init`. If the winning run exhausted its evaluation budget the
/// result is returned inside [`Error::IterationCap`].
pub fn fit(observed: Vec<CorrelationCurve>, init: &ContinuumParams, options: &FitOptions) -> Result<FitResult> {
    init.validate()?;
    if options.restarts == 0 {
        return Err(Error::arg("at least one restart is needed"));
    }
    let objective = FitObjective::new(observed, options.n_draws, options.seed)?;
    let f0 = objective.evaluate(init)?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x05ee_df17);
    let starts: Vec<Vec<f64>> = (0..options.restarts)
        .map(|r| {
            let base = init.to_log();
            if r == 0 {
                base
            } else {
                base.iter()
                    .map(|x| x + rng.random_range(-std::f64::consts::LN_2..std::f64::consts::LN_2))
                    .collect()
            }
        })
        .collect();

    let simplex = SimplexOptions {
        step: 0.1,
        tol: options.tol,
        max_evals: options.max_evals,
    };
    let f = |x: &[f64]| {
        objective
            .evaluate(&ContinuumParams::from_log(x))
            .unwrap_or(f64::INFINITY)
    };
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| {
            let first = nelder_mead(f, x0, simplex);
            // Restarting from the end point refreshes a collapsed simplex.
            let polish = nelder_mead(f, &first.x, simplex);
            let n = first.n_evals + polish.n_evals;
            let mut trace = first.trace;
            trace.extend(polish.trace);
            (polish.x, polish.fx, n, polish.converged, trace)
        })
        .collect();

    let total_evals = 1 + runs.iter().map(|r| r.2).sum::<usize>();
    let (mut best_x, mut best_f, mut converged, mut trace) = (init.to_log(), f0, true, vec![f0]);
    for (x, fx, _, conv, tr) in runs {
        if fx < best_f {
            best_x = x;
            best_f = fx;
            converged = conv;
            trace = tr;
        }
    }
    let result = FitResult {
        params: ContinuumParams::from_log(&best_x),
        objective: best_f,
        n_evals: total_evals,
        restarts: options.restarts,
        seed: options.seed,
        trace,
    };
    if !converged {
        return Err(Error::IterationCap { best: Box::new(result) });
    }
    Ok(result)
}

/// Convenience for a single deterministic mean-rate network: the turnover
/// eigenvalue and intensity rate at the means of both distributions.
pub fn mean_rate_eigenvalues(params: &ContinuumParams, concentration: f64) -> Result<(f64, f64)> {
    params.validate()?;
    let k2 = params.a * params.b;
    let al = params.a_alpha * params.b_alpha;
    Ok((
        lambda_from_rates(params.k1, params.k_neg1, k2, al, concentration)?,
        kappa_from_rates(params.k1, params.k_neg1, k2, al, concentration)?,
    ))
}

/// Concentration-velocity pairs for a hyperbola check.
pub fn velocity_sweep(spec: &NetworkSpec, concentrations: &[f64]) -> Result<DVector<f64>> {
    let v: Vec<f64> = concentrations
        .iter()
        .map(|&s| mm_velocity(&spec.with_concentration(s)?))
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(v))
}
