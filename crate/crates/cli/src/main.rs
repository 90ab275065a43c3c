mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lwa_orient::estimators::{estimate, EstimatorConfig, EstimatorKind};
use lwa_orient::experiments::{self, fmt_num, CsvTable, ExperimentSpec, Manifest};
use lwa_orient::geometry::Scene;
use lwa_orient::radiation::{subcarrier_frequencies, RadiationTable};
use lwa_orient::rng::trial_rng;
use lwa_orient::signal::{synthesize, Noise, SubcarrierPlan};
use lwa_orient::special::FitMode;
use lwa_orient::validation;
use serde_json::json;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "lwa-orient",
    version,
    about = "Orientation estimation of leaky-wave-antenna backscatter tags"
)]
struct Cli {
    /// TOML configuration; missing keys take the default system parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `run.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Special-function evaluation used by the estimators.
    #[arg(long, global = true, value_enum)]
    fit_mode: Option<FitArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitArg {
    Exact,
    Fit,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the LWA radiation pattern.
    ///
    /// radiation.csv: theta_deg, then abs_r_<i>, arg_r_<i> per subcarrier.
    /// radiation_summary.csv: subcarrier, freq_ghz, theta0_deg, beamwidth_deg, efficiency.
    Radiation,
    /// Objective curves of the likelihood estimators for one measurement.
    ///
    /// loglik.csv: phi_deg, then <estimator>_norm (min-max normalized objective)
    /// per estimator. Orientation, tag angle and noise come from the config.
    Loglik {
        /// Comma-separated estimators (mle, pmle, amle); overrides `loglik.estimators`.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
    },
    /// Monte Carlo sweeps.
    ///
    /// sigma: sweep_sigma.csv with subcarriers, sigma_cm, <estimator>_deg, trials, rpa_uncovered.
    /// F: sweep_F.csv with samples, subcarriers, <estimator>_lower_q3_deg, <estimator>_mean_deg,
    /// band_points, trials.
    /// heatmap: sweep_heatmap.csv with psi_deg, phi_deg, feasible, in_band, <estimator>_deg,
    /// trials, rpa_uncovered; sweep_heatmap_summary.csv with per-estimator region statistics.
    /// coverage: sweep_coverage.csv with gamma_db, antennas, subcarriers, target_deg, coverage.
    Sweep {
        #[arg(value_enum)]
        which: SweepKind,
        /// Heatmap lattice size per axis (overrides `sweep.heatmap.grid`).
        #[arg(long)]
        grid: Option<usize>,
        /// Trials per sweep point (overrides `run.trials`).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Statistical self-checks of the model; writes selftest.json.
    Selftest {
        /// Monte Carlo draws per check.
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Sigma,
    #[value(name = "F", alias = "f")]
    F,
    Heatmap,
    Coverage,
}

impl SweepKind {
    fn name(self) -> &'static str {
        match self {
            Self::Sigma => "sigma",
            Self::F => "F",
            Self::Heatmap => "heatmap",
            Self::Coverage => "coverage",
        }
    }
}

/// Exit code for configuration problems; runtime failures use 1.
const EXIT_CONFIG: u8 = 2;

/// Tracks written artifacts and emits the run manifest.
struct Session {
    out: PathBuf,
    manifest: Manifest,
    manifest_path: PathBuf,
    start: Instant,
}

impl Session {
    fn new(out: &Path, command: &str, seed: u64, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
        let stem = command.replace(' ', "_");
        Ok(Self {
            out: out.to_path_buf(),
            manifest: Manifest::new(command, seed, serde_json::to_value(cfg)?),
            manifest_path: out.join(format!("{stem}_manifest.json")),
            start: Instant::now(),
        })
    }

    fn write_table(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let path = self.out.join(name);
        table
            .write_file(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> lwa_orient::Result<()>,
    ) -> Result<()> {
        let path = self.out.join(name);
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = std::io::BufWriter::new(file);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, complete: bool) -> Result<()> {
        self.manifest.complete = complete;
        self.manifest.runtime_s = self.start.elapsed().as_secs_f64();
        self.manifest.write_file(&self.manifest_path)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let (cfg, spec) = match load(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    let command = match &cli.command {
        Command::Radiation => "radiation".to_string(),
        Command::Loglik { .. } => "loglik".to_string(),
        Command::Sweep { which, .. } => format!("sweep {}", which.name()),
        Command::Selftest { .. } => "selftest".to_string(),
    };
    let mut session = match Session::new(&cli.out, &command, spec.seed, &cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };

    let result = match &cli.command {
        Command::Radiation => cmd_radiation(&spec, &mut session),
        Command::Loglik { estimators } => cmd_loglik(&cfg, &spec, estimators.as_deref(), &mut session),
        Command::Sweep { which, grid, trials } => {
            let spec = ExperimentSpec {
                trials: trials.unwrap_or(spec.trials),
                ..spec.clone()
            };
            cmd_sweep(&cfg, &spec, *which, *grid, &mut session)
        }
        Command::Selftest { draws } => cmd_selftest(&spec, *draws, &mut session),
    };

    let code = match &result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    };
    if let Err(e) = session.finish(matches!(result, Ok(true))) {
        eprintln!("error: cannot write manifest: {e:#}");
        return ExitCode::FAILURE;
    }
    code
}

fn load(cli: &Cli) -> Result<(RunConfig, ExperimentSpec)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(fit) = cli.fit_mode {
        cfg.estimators.fit_mode = match fit {
            FitArg::Exact => FitMode::Exact,
            FitArg::Fit => FitMode::CurveFit,
        };
    }
    let spec = cfg.to_spec()?;
    Ok((cfg, spec))
}

fn cmd_radiation(spec: &ExperimentSpec, session: &mut Session) -> Result<bool> {
    let freqs = subcarrier_frequencies(spec.f_first, spec.f_last, spec.subcarriers);
    let table = RadiationTable::tabulate(&spec.design, &freqs, spec.table_grid, spec.phi_az)?;
    session.write_with("radiation.csv", |w| table.write_csv(w))?;
    session.write_with("radiation_summary.csv", |w| table.write_summary_csv(w))?;
    session.manifest.summary = json!({
        "subcarriers": table.subcarriers(),
        "theta0_deg": table.theta0.iter().map(|t| t.to_degrees()).collect::<Vec<_>>(),
        "beamwidth_deg": table.beamwidth.iter().map(|t| t.to_degrees()).collect::<Vec<_>>(),
        "efficiency": table.efficiency,
    });
    Ok(true)
}

fn cmd_loglik(cfg: &RunConfig, spec: &ExperimentSpec, names: Option<&[String]>, session: &mut Session) -> Result<bool> {
    let names = names
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| cfg.loglik.estimators.clone());
    let kinds = RunConfig::parse_estimators(&names).map_err(|e| anyhow::Error::new(Usage(format!("{e:#}"))))?;
    if kinds.contains(&EstimatorKind::Rpa) {
        bail!(Usage("RPA has no objective curve; choose among mle, pmle, amle".into()));
    }
    let plan = SubcarrierPlan::new(
        spec.subcarriers,
        spec.f_first,
        spec.f_last,
        spec.gamma_total_db,
        spec.samples,
    )?;
    let table = RadiationTable::tabulate(&spec.design, &plan.frequencies, spec.table_grid, spec.phi_az)?;
    let scene = Scene::at_angle(
        spec.antennas,
        spec.spacing,
        spec.range,
        spec.psi,
        spec.sigma,
        spec.phi,
        spec.phi_az,
    )?;
    let noise = if spec.noise { Noise::Unit } else { Noise::None };
    let obs = synthesize(&scene, &plan, &table, noise, &mut trial_rng(spec.seed, "loglik", &[]))?;
    let est_cfg = EstimatorConfig {
        record_curve: true,
        mle_seed: spec.seed,
        ..spec.estimator.clone()
    };

    let mut columns = vec!["phi_deg".to_string()];
    let mut curves = Vec::new();
    let mut summary = serde_json::Map::new();
    for kind in &kinds {
        let report = estimate(*kind, &obs, &table, &est_cfg)?;
        let curve = report.curve.expect("curve requested");
        summary.insert(
            kind.id().into(),
            json!({
                "phi_hat_deg": report.phi_hat.to_degrees(),
                "error_deg": (report.phi_hat - spec.phi).abs().to_degrees(),
                "peaks_above_90pct": curve.count_peaks(0.9),
            }),
        );
        columns.push(format!("{}_norm", kind.id()));
        curves.push(curve);
    }
    let mut out = CsvTable::new(columns);
    let normalized: Vec<Vec<f64>> = curves.iter().map(|c| c.normalized()).collect();
    for (g, phi) in curves[0].phi.iter().enumerate() {
        let mut row = vec![fmt_num(phi.to_degrees())];
        row.extend(normalized.iter().map(|n| fmt_num(n[g])));
        out.rows.push(row);
    }
    session.write_table("loglik.csv", &out)?;
    session.manifest.summary = serde_json::Value::Object(summary);
    Ok(true)
}

/// Command-line or config problem detected after loading.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn cmd_sweep(
    cfg: &RunConfig,
    spec: &ExperimentSpec,
    which: SweepKind,
    grid: Option<usize>,
    session: &mut Session,
) -> Result<bool> {
    match which {
        SweepKind::Sigma => {
            let sw = &cfg.sweep.sigma;
            let sigmas: Vec<f64> = sw.values_cm.iter().map(|s| s * 1e-2).collect();
            session.manifest.parameters = json!({ "sigma_cm": sw.values_cm, "subcarriers": sw.subcarriers });
            let table = experiments::sweep_sigma(spec, &sigmas, &sw.subcarriers)?;
            session.write_table("sweep_sigma.csv", &table)?;
        }
        SweepKind::Heatmap => {
            let hm = &cfg.sweep.heatmap;
            let grid = grid.unwrap_or(hm.grid);
            session.manifest.parameters = json!({
                "grid": grid,
                "mle_stride": hm.mle_stride,
                "angles_deg": experiments::linspace(-90.0, 90.0, grid),
            });
            let map = experiments::heatmap(spec, grid, hm.mle_stride)?;
            session.write_table("sweep_heatmap.csv", &map.to_csv())?;
            session.write_table("sweep_heatmap_summary.csv", &map.summary_csv())?;
            session.manifest.summary = serde_json::to_value(map.summary())?;
        }
        SweepKind::F => {
            let fs = &cfg.sweep.f;
            let kinds = RunConfig::parse_estimators(&fs.estimators).context("sweep.F.estimators")?;
            let spec = ExperimentSpec {
                estimators: kinds,
                ..spec.clone()
            };
            session.manifest.parameters = json!({
                "subcarriers": fs.subcarriers,
                "samples": fs.samples,
                "band_points": fs.band_points,
                "psi_deg": spec.psi.to_degrees(),
            });
            let sweep = experiments::sweep_f(&spec, &fs.subcarriers, &fs.samples, fs.band_points)?;
            session.write_table("sweep_F.csv", &sweep.table)?;
            session.manifest.summary = json!({ "optima": sweep.optima });
        }
        SweepKind::Coverage => {
            let cv = &cfg.sweep.coverage;
            session.manifest.parameters = json!({
                "subcarriers": cv.subcarriers,
                "links": cv.links,
                "targets_deg": cv.targets_deg,
                "band_points": cv.band_points,
                "psi_deg": spec.psi.to_degrees(),
            });
            let table =
                experiments::coverage_quantile(spec, &cv.subcarriers, &cfg.links(), &cv.targets_deg, cv.band_points)?;
            session.write_table("sweep_coverage.csv", &table)?;
        }
    }
    Ok(true)
}

fn cmd_selftest(spec: &ExperimentSpec, draws: usize, session: &mut Session) -> Result<bool> {
    let mut checks = Vec::new();
    let mut record = |name: &str, passed: bool, detail: serde_json::Value| {
        println!("{} {name}", if passed { "PASS" } else { "FAIL" });
        checks.push(json!({ "check": name, "passed": passed, "detail": detail }));
        passed
    };
    let mut all = true;

    let freqs = subcarrier_frequencies(spec.f_first, spec.f_last, spec.subcarriers);
    let table = RadiationTable::tabulate(&spec.design, &freqs, spec.table_grid, spec.phi_az)?;
    let increasing = table.theta0.windows(2).all(|w| w[0] < w[1]);
    let argmax_ok = (0..table.subcarriers())
        .all(|i| (table.theta_at(table.argmax_index(i)) - table.theta0[i]).abs() <= table.grid_step() * (1.0 + 1e-9));
    all &= record(
        "radiation main lobes",
        increasing && argmax_ok,
        json!({ "increasing": increasing, "argmax_within_step": argmax_ok }),
    );

    let z_hat = [spec.range * spec.psi.cos(), spec.range * spec.psi.sin()];
    let mut rng = trial_rng(spec.seed, "selftest", &[0]);
    let runs = 20;
    let passes = (0..runs)
        .map(|_| validation::tag_angle_distribution(z_hat, spec.sigma, 10_000, &mut rng).map(|r| r.passes(0.01)))
        .collect::<lwa_orient::Result<Vec<_>>>()?
        .into_iter()
        .filter(|&p| p)
        .count();
    all &= record(
        "tag-angle distribution",
        passes * 100 >= 95 * runs,
        json!({ "passed_runs": passes, "runs": runs }),
    );

    let ks = validation::precoded_phase_distribution(
        z_hat,
        spec.sigma.max(0.1),
        44e9,
        spec.antennas,
        spec.spacing,
        10_000,
        &mut rng,
    )?;
    all &= record("precoded phase uniformity", ks.passes(0.01), serde_json::to_value(ks)?);

    let mut bias = Vec::new();
    let mut bias_ok = true;
    let mut var = Vec::new();
    let mut var_ok = true;
    for amp in [0.5, 2.0, 10.0] {
        for v in [5.0, 20.0, 100.0] {
            let b = validation::amplitude_bias(amp, v, draws, FitMode::Exact, &mut rng)?;
            bias_ok &= b.relative_bias().abs() < 0.01;
            bias.push(b);
            let c = validation::rice_variance_check(amp, v, draws, &mut rng)?;
            var_ok &= c.relative_error().abs() < 0.03;
            var.push(c);
        }
    }
    all &= record("unbiased amplitude", bias_ok, serde_json::to_value(&bias)?);
    all &= record("rice variance", var_ok, serde_json::to_value(&var)?);

    let fit = validation::fit_fidelity(400)?;
    all &= record(
        "1F1 curve fit",
        fit.hyp1f1_max_rel_error < 0.02,
        serde_json::to_value(fit)?,
    );

    let path = session.out.join("selftest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&checks)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    session.manifest.artifacts.push("selftest.json".into());
    session.manifest.parameters = json!({ "draws": draws });
    Ok(all)
}
