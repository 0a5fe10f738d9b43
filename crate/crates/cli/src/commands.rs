//! The four subcommands.

use std::path::{Path, PathBuf};

use enzyme_net::continuum::{
    fit, intensity_curve, turnover_curve, ContinuumParams, CorrelationCurve, FitObjective, FitOptions, FitResult,
    REFERENCE_FIT,
};
use enzyme_net::correlation::{
    intensity_spectrum, turnover_covariance_from, turnover_spectrum_from, DetectionModel, MixtureKind, SpectralMixture,
};
use enzyme_net::io::parse_curves;
use enzyme_net::scenario::{concentration_sweep, fast_reset_convergence_study, ScenarioSpec, SweepQuantity};
use enzyme_net::sim::{
    photon_trace, simulate, simulate_turnovers, StopRule, Trajectory, TurnoverRecord, WindowedOccupancy,
};
use enzyme_net::stats::{batch_means, lag_covariance, BATCHES};
use enzyme_net::{Error, NetworkSpec, PassageSet};
use serde::Serialize;

use crate::config::{load, AnalyzeConfig, FitConfig, Loaded, ScenariosConfig, SimulateConfig};
use crate::output::{num, write_file, Provenance, Table};
use crate::{Cli, CliError, Command, CommonArgs, Preset};

/// Runs a command and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    configure_threads()?;
    let args = cli.command.args();
    if args.preset.is_some() && !matches!(cli.command, Command::Fit(_)) {
        return Err(CliError::Config(format!(
            "--preset applies to fit only, not {}",
            cli.command.name()
        )));
    }
    if args.synthetic && !matches!(cli.command, Command::Fit(_)) {
        return Err(CliError::Config(format!(
            "--synthetic applies to fit only, not {}",
            cli.command.name()
        )));
    }
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Scenarios(a) => scenarios(a),
        Command::Fit(a) => fit_cmd(a),
    }
}

/// Caps the global rayon pool at `ENZYME_NET_THREADS`. Outputs never
/// depend on the thread count.
fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("ENZYME_NET_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("ENZYME_NET_THREADS must be a positive integer, got '{value}'")))?;
    // A pool that already exists (repeated in-process runs) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn output_dir(args: &CommonArgs, from_config: &Option<PathBuf>, loaded_path: &Path) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    match from_config {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => loaded_path.parent().unwrap_or(Path::new(".")).join(p),
        None => PathBuf::from("out"),
    }
}

struct Writer {
    dir: PathBuf,
    prov: Provenance,
    written: Vec<PathBuf>,
}

impl Writer {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let path = write_file(&self.dir, name, &table.render(&self.prov))?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("reports serialize") + "\n";
        let path = write_file(&self.dir, name, &text)?;
        self.written.push(path);
        Ok(())
    }
}

fn writer<T>(args: &CommonArgs, loaded: &Loaded<T>, dir: &Option<PathBuf>, seed: Option<u64>) -> Writer {
    Writer {
        dir: output_dir(args, dir, &loaded.path),
        prov: Provenance {
            config_sha256: loaded.sha256.clone(),
            seed,
        },
        written: vec![],
    }
}

fn spectrum_rows(table: &mut Table, mix: &SpectralMixture) {
    let kind = match mix.kind {
        MixtureKind::Turnover => "turnover",
        MixtureKind::Intensity => "intensity",
    };
    for (k, t) in mix.terms.iter().enumerate() {
        table.push(vec![
            kind.into(),
            k.to_string(),
            num(t.rate.re),
            num(t.rate.im),
            num(t.coefficient.re),
            num(t.coefficient.im),
        ]);
    }
}

fn analyze(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let loaded: Loaded<AnalyzeConfig> = load(&args.config)?;
    let c = &loaded.config;
    let mut out = writer(args, &loaded, &c.output_dir, None);
    let spec = &c.spec;
    let p = PassageSet::compute(spec)?;
    let labels = spec.generator().state_labels();
    let n = spec.n();

    let mut t = Table::new(&["state", "label", "probability"]);
    for (i, x) in p.stationary().iter().enumerate() {
        t.push(vec![i.to_string(), labels[i].clone(), num(*x)]);
    }
    out.table("stationary.csv", &t)?;

    let mut t = Table::new(&["conformation", "w"]);
    for i in 0..n {
        t.push(vec![(i + 1).to_string(), num(p.w[i])]);
    }
    out.table("weights.csv", &t)?;

    let mut t = Table::new(&["conformation", "mu_a", "mu_b"]);
    for i in 0..n {
        t.push(vec![(i + 1).to_string(), num(p.mu_a[i]), num(p.mu_b[i])]);
    }
    out.table("mfpt.csv", &t)?;

    let mut t = Table::new(&["matrix", "from", "to", "probability"]);
    for (name, m) in [("P_AC", &p.p_ac), ("P_BC", &p.p_bc), ("P_CA", &p.p_ca)] {
        for i in 0..n {
            for j in 0..n {
                t.push(vec![
                    name.into(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    num(m[(i, j)]),
                ]);
            }
        }
    }
    out.table("passage_probs.csv", &t)?;

    if c.turnover_max_lag < 2 {
        return Err(CliError::Config("turnover_max_lag must be at least 2".into()));
    }
    let covs: Vec<f64> = (2..=c.turnover_max_lag)
        .map(|m| turnover_covariance_from(spec, &p, m))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&["m", "covariance", "normalized"]);
    for (k, cov) in covs.iter().enumerate() {
        let normalized = if covs[0] == 0.0 { 0.0 } else { cov / covs[0] };
        t.push(vec![(k + 2).to_string(), num(*cov), num(normalized)]);
    }
    out.table("turnover_cov.csv", &t)?;

    let det = c.detection;
    let times = c
        .intensity_times
        .clone()
        .unwrap_or_else(|| (1..=50).map(|k| k as f64 * det.bin_width).collect());
    let intensity = intensity_spectrum(spec, &det)?;
    let mut t = Table::new(&["t", "covariance"]);
    for &time in &times {
        if !(time >= det.bin_width) {
            return Err(CliError::Config(format!(
                "intensity time {time} is shorter than the bin width {}",
                det.bin_width
            )));
        }
        t.push(vec![num(time), num(intensity.evaluate(time))]);
    }
    out.table("intensity_cov.csv", &t)?;

    let mut t = Table::new(&[
        "kind",
        "index",
        "rate_re",
        "rate_im",
        "coefficient_re",
        "coefficient_im",
    ]);
    spectrum_rows(&mut t, &turnover_spectrum_from(spec, &p)?);
    spectrum_rows(&mut t, &intensity);
    out.table("spectra.csv", &t)?;
    Ok(out.written)
}

fn comparison_row(t: &mut Table, quantity: &str, index: usize, empirical: f64, se: f64, analytic: f64) {
    let z = if se > 0.0 {
        (empirical - analytic) / se
    } else {
        f64::NAN
    };
    t.push(vec![
        quantity.into(),
        index.to_string(),
        num(empirical),
        num(se),
        num(analytic),
        num(z),
    ]);
}

fn occupancy_windows(traj: &Trajectory) -> Vec<Vec<f64>> {
    let mut w = WindowedOccupancy::new(3 * traj.n, traj.horizon, BATCHES);
    for (&s, &t) in traj.states.iter().zip(&traj.times) {
        w.push(s, t);
    }
    w.finish(traj.horizon)
}

fn compare(
    spec: &NetworkSpec,
    det: &DetectionModel,
    traj: &Trajectory,
    counts: &[f64],
    rec: &TurnoverRecord,
    c: &SimulateConfig,
) -> Result<Table, CliError> {
    let p = PassageSet::compute(spec)?;
    let mut t = Table::new(&["quantity", "index", "empirical", "std_error", "analytic", "z"]);
    let pi = p.stationary();
    let windows = occupancy_windows(traj);
    for (i, &analytic) in pi.iter().enumerate() {
        let series: Vec<f64> = windows.iter().map(|w| w[i]).collect();
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (series.len() - 1) as f64;
        comparison_row(
            &mut t,
            "occupancy",
            i,
            mean,
            (var / series.len() as f64).sqrt(),
            analytic,
        );
    }
    let mean = batch_means(&rec.durations)?;
    comparison_row(
        &mut t,
        "mean_turnover_time",
        0,
        mean.value,
        mean.std_error,
        p.mean_turnover_time(),
    );
    for i in 0..spec.n() {
        let ind: Vec<f64> = rec
            .start_states
            .iter()
            .map(|&s| if s as usize == i { 1.0 } else { 0.0 })
            .collect();
        let e = batch_means(&ind)?;
        comparison_row(&mut t, "start_weight", i + 1, e.value, e.std_error, p.w[i]);
    }
    for m in 2..=c.turnover_max_lag {
        let e = lag_covariance(&rec.durations, m - 1)?;
        comparison_row(
            &mut t,
            "turnover_cov",
            m,
            e.value,
            e.std_error,
            turnover_covariance_from(spec, &p, m)?,
        );
    }
    let on: f64 = pi.rows(2 * spec.n(), spec.n()).sum();
    let e = batch_means(counts)?;
    comparison_row(
        &mut t,
        "mean_count",
        0,
        e.value,
        e.std_error,
        (det.nu * on + det.nu0) * det.bin_width,
    );
    let mix = intensity_spectrum(spec, det)?;
    for &lag in &c.intensity_lags {
        if lag == 0 {
            return Err(CliError::Config("intensity lags must be at least 1 bin".into()));
        }
        let e = lag_covariance(counts, lag)?;
        comparison_row(
            &mut t,
            "intensity_cov",
            lag,
            e.value,
            e.std_error,
            mix.evaluate(lag as f64 * det.bin_width),
        );
    }
    Ok(t)
}

fn simulate_cmd(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let loaded: Loaded<SimulateConfig> = load(&args.config)?;
    let c = &loaded.config;
    let mut out = writer(args, &loaded, &c.output_dir, Some(c.seed));
    let spec = &c.spec;
    let det = c.detection;
    // one seed drives three independent streams
    let traj = simulate(spec, StopRule::Horizon(c.horizon), c.seed)?;
    let trace = photon_trace(&traj, &det, c.seed.wrapping_add(1))?;
    if c.turnovers < 2 * BATCHES {
        return Err(CliError::Config(format!("turnovers must be at least {}", 2 * BATCHES)));
    }
    let rec = simulate_turnovers(spec, c.turnovers, c.seed.wrapping_add(2))?;

    let labels = spec.generator().state_labels();
    let mut t = Table::new(&["time", "state", "label"]);
    for (&s, &time) in traj.states.iter().zip(&traj.times) {
        t.push(vec![num(time), s.to_string(), labels[s as usize].clone()]);
    }
    out.table("trajectory.csv", &t)?;

    let mut t = Table::new(&["bin", "start", "count"]);
    for (k, &n) in trace.counts.iter().enumerate() {
        t.push(vec![k.to_string(), num(k as f64 * det.bin_width), n.to_string()]);
    }
    out.table("trace.csv", &t)?;

    let mut t = Table::new(&["index", "duration", "start_conformation", "end_conformation"]);
    for k in 0..rec.len() {
        t.push(vec![
            k.to_string(),
            num(rec.durations[k]),
            (rec.start_states[k] + 1).to_string(),
            (rec.end_states[k] + 1).to_string(),
        ]);
    }
    out.table("turnovers.csv", &t)?;

    let counts: Vec<f64> = trace.counts.iter().map(|&n| f64::from(n)).collect();
    let t = compare(spec, &det, &traj, &counts, &rec, c)?;
    out.table("comparison.csv", &t)?;
    Ok(out.written)
}

fn scenarios(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let loaded: Loaded<ScenariosConfig> = load(&args.config)?;
    let c = &loaded.config;
    let mut out = writer(args, &loaded, &c.output_dir, None);
    let s = ScenarioSpec::new(c.spec.clone(), c.scenario, c.tau)?;
    let built = s.build()?;

    let rows = fast_reset_convergence_study(&built, &c.delta_grid)?;
    let mut t = Table::new(&["delta", "slow_gap", "slow_gap_sqrt_delta", "far_gap"]);
    for r in &rows {
        t.push(vec![
            num(r.delta),
            num(r.slow_gap),
            num(r.slow_gap * r.delta.sqrt()),
            num(r.far_gap),
        ]);
    }
    out.table("convergence.csv", &t)?;

    let rows = concentration_sweep(&s, &c.concentrations)?;
    let mut t = Table::new(&["scenario", "concentration", "quantity", "index", "re", "im"]);
    let scenario = u8::from(c.scenario).to_string();
    for r in &rows {
        let q = match r.quantity {
            SweepQuantity::Turnover => "turnover",
            SweepQuantity::Intensity => "intensity",
        };
        t.push(vec![
            scenario.clone(),
            num(r.concentration),
            q.into(),
            r.eigenvalue_index.to_string(),
            num(r.value.re),
            num(r.value.im),
        ]);
    }
    out.table("eigen_vs_concentration.csv", &t)?;
    Ok(out.written)
}

#[derive(Serialize)]
struct FitReport<'a> {
    version: &'static str,
    config_sha256: &'a str,
    seed: u64,
    preset: Option<&'static str>,
    synthetic: bool,
    converged: bool,
    init: ContinuumParams,
    objective_at_init: f64,
    /// Objective at the generating parameters, synthetic runs only.
    objective_at_truth: Option<f64>,
    result: &'a FitResult,
}

fn synthetic_curves(c: &FitConfig, truth: &ContinuumParams) -> Result<Vec<CorrelationCurve>, CliError> {
    let syn = &c.synthetic;
    // independent of the fit's own draws
    let seed = c.seed.wrapping_add(0x5157);
    let mut curves = vec![];
    for &s in &syn.turnover_concentrations {
        curves.push(turnover_curve(truth, s, syn.turnover_max_lag, syn.n_draws, seed)?);
    }
    let grid = syn.time_grid();
    for &s in &syn.intensity_concentrations {
        curves.push(intensity_curve(truth, s, &grid, syn.bin_width, syn.n_draws, seed)?);
    }
    Ok(curves)
}

fn fit_cmd(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let loaded: Loaded<FitConfig> = load(&args.config)?;
    let c = &loaded.config;
    let mut out = writer(args, &loaded, &c.output_dir, Some(c.seed));
    let preset = args.preset.map(|Preset::Paper2012| REFERENCE_FIT);
    let init = c
        .init
        .or(preset)
        .ok_or_else(|| CliError::Config("fit needs 'init' in the config or --preset".into()))?;
    let truth = if args.synthetic {
        Some(
            c.truth
                .or(preset)
                .ok_or_else(|| CliError::Config("--synthetic needs 'truth' in the config or --preset".into()))?,
        )
    } else {
        None
    };
    let observed = match &truth {
        Some(t) => synthetic_curves(c, t)?,
        None => {
            let rel = c
                .observed
                .as_ref()
                .ok_or_else(|| CliError::Config("fit needs 'observed' curves or --synthetic".into()))?;
            let path = loaded.resolve(rel);
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            parse_curves(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    let options = FitOptions {
        n_draws: c.n_draws,
        seed: c.seed,
        restarts: c.restarts,
        max_evals: c.max_evals,
        tol: c.tol,
    };
    let objective = FitObjective::new(observed.clone(), options.n_draws, options.seed)?;
    let objective_at_init = objective.evaluate(&init)?;
    let objective_at_truth = truth.as_ref().map(|t| objective.evaluate(t)).transpose()?;
    let (result, capped) = match fit(observed.clone(), &init, &options) {
        Ok(r) => (r, None),
        Err(Error::IterationCap { best }) => {
            let r = (*best).clone();
            (r, Some(Error::IterationCap { best }))
        }
        Err(e) => return Err(e.into()),
    };

    let model = objective.model_curves(&result.params)?;
    let mut t = Table::new(&["kind", "concentration", "abscissa", "observed", "model"]);
    for (o, m) in observed.iter().zip(&model) {
        let kind = match o.kind {
            MixtureKind::Turnover => "turnover",
            MixtureKind::Intensity => "intensity",
        };
        for k in 0..o.values.len() {
            t.push(vec![
                kind.into(),
                num(o.concentration),
                num(o.abscissa[k]),
                num(o.values[k]),
                num(m.values[k]),
            ]);
        }
    }
    out.table("fitted_curves.csv", &t)?;
    out.json(
        "fit_report.json",
        &FitReport {
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: &loaded.sha256,
            seed: c.seed,
            preset: args.preset.map(|_| "paper2012"),
            synthetic: args.synthetic,
            converged: capped.is_none(),
            init,
            objective_at_init,
            objective_at_truth,
            result: &result,
        },
    )?;
    // outputs are written either way; a run that hit its evaluation cap
    // still reports failure through the exit code
    match capped {
        Some(e) => Err(e.into()),
        None => Ok(out.written),
    }
}
