//! Experiment configs. Unknown keys are rejected, and every stochastic
//! command requires an explicit `seed`.

use std::path::{Path, PathBuf};

use enzyme_net::continuum::ContinuumParams;
use enzyme_net::correlation::DetectionModel;
use enzyme_net::scenario::Scenario;
use enzyme_net::NetworkSpec;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub spec: NetworkSpec,
    pub detection: DetectionModel,
    /// Turnover covariances are reported for lags `2..=turnover_max_lag`.
    #[serde(default = "default_turnover_max_lag")]
    pub turnover_max_lag: usize,
    /// Intensity lags in seconds; defaults to `k * bin_width`, `k = 1..=50`.
    #[serde(default)]
    pub intensity_times: Option<Vec<f64>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub spec: NetworkSpec,
    pub detection: DetectionModel,
    pub seed: u64,
    /// Length of the recorded path behind `trajectory.csv` and `trace.csv`.
    pub horizon: f64,
    /// Number of turnovers in `turnovers.csv`.
    pub turnovers: usize,
    #[serde(default = "default_sim_turnover_max_lag")]
    pub turnover_max_lag: usize,
    /// Intensity lags in bins.
    #[serde(default = "default_intensity_lags")]
    pub intensity_lags: Vec<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenariosConfig {
    pub spec: NetworkSpec,
    pub scenario: Scenario,
    #[serde(default = "one")]
    pub tau: f64,
    /// Reset-rate multipliers applied to `spec.delta`.
    pub delta_grid: Vec<f64>,
    pub concentrations: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub seed: u64,
    /// Curve CSV, relative to the config file. Not used with `--synthetic`.
    #[serde(default)]
    pub observed: Option<PathBuf>,
    #[serde(default)]
    pub init: Option<ContinuumParams>,
    /// Generating parameters for `--synthetic`.
    #[serde(default)]
    pub truth: Option<ContinuumParams>,
    #[serde(default = "default_fit_draws")]
    pub n_draws: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub synthetic: SyntheticConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Layout of synthetic observed curves.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub turnover_concentrations: Vec<f64>,
    pub intensity_concentrations: Vec<f64>,
    pub turnover_max_lag: usize,
    pub bin_width: f64,
    /// Defaults to `(1 + 4 i) * bin_width`, `i = 0..25`.
    pub times: Option<Vec<f64>>,
    /// Draws behind the synthetic curves; kept larger than the fit's own
    /// draw count and taken from a different seed so that the fit cannot
    /// reproduce the sampling noise exactly.
    pub n_draws: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            turnover_concentrations: vec![20.0, 100.0],
            intensity_concentrations: vec![20.0, 100.0, 380.0],
            turnover_max_lag: 10,
            bin_width: 1e-3,
            times: None,
            n_draws: 200_000,
        }
    }
}

impl SyntheticConfig {
    pub fn time_grid(&self) -> Vec<f64> {
        self.times
            .clone()
            .unwrap_or_else(|| (0..25).map(|i| self.bin_width * (1.0 + 4.0 * i as f64)).collect())
    }
}

fn default_turnover_max_lag() -> usize {
    20
}

fn default_sim_turnover_max_lag() -> usize {
    5
}

fn default_intensity_lags() -> Vec<usize> {
    vec![1, 2, 5]
}

fn one() -> f64 {
    1.0
}

fn default_fit_draws() -> usize {
    10_000
}

fn default_restarts() -> usize {
    8
}

fn default_max_evals() -> usize {
    1500
}

fn default_tol() -> f64 {
    1e-4
}

/// A config document with its raw bytes, for hashing.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub config: T,
    pub sha256: String,
    pub path: PathBuf,
}

impl<T> Loaded<T> {
    /// Resolves a path given in the config relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a config; syntax and schema errors carry line and column. A
/// missing key is reported at the close of its enclosing object.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    // serde_json already appends "at line L column C"
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text =
        std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: not UTF-8: {e}", path.display())))?;
    let config = parse(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Loaded {
        config,
        sha256: sha256_hex(&bytes),
        path: path.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"{"n": 1, "concentration": 1, "q_aa": [[0]], "q_bb": [[0]], "q_cc": [[0]],
        "k1": [1], "k_neg1": [1], "k2": [1], "delta": [1]}"#;

    #[test]
    fn missing_seed_is_reported_with_position() {
        let text = format!(
            "{{\"spec\": {SPEC},\n \"detection\": {{\"nu\": 10, \"nu0\": 1, \"bin_width\": 0.1}},\n \"horizon\": 10, \"turnovers\": 10\n}}"
        );
        let err = parse::<SimulateConfig>(&text).unwrap_err().to_string();
        assert!(err.contains("seed") && err.contains("line 5"), "{err}");
    }

    #[test]
    fn invalid_spec_inside_config_is_anchored() {
        let text = format!(
            "{{\"spec\": {},\n \"detection\": {{\"nu\": 10, \"nu0\": 1, \"bin_width\": 0.1}}}}",
            SPEC.replace("\"k2\": [1]", "\"k2\": [-1]")
        );
        let err = parse::<AnalyzeConfig>(&text).unwrap_err().to_string();
        assert!(err.contains("k2") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text =
            format!("{{\"spec\": {SPEC}, \"detection\": {{\"nu\": 1, \"nu0\": 0, \"bin_width\": 1}}, \"sed\": 1}}");
        assert!(parse::<AnalyzeConfig>(&text).unwrap_err().to_string().contains("sed"));
    }

    #[test]
    fn fit_defaults() {
        let c: FitConfig = parse("{\"seed\": 3}").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.synthetic.intensity_concentrations, vec![20.0, 100.0, 380.0]);
        assert_eq!(c.synthetic.time_grid().len(), 25);
        assert!(parse::<FitConfig>("{}").unwrap_err().to_string().contains("seed"));
    }
}
