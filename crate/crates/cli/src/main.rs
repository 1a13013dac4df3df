//! `qsd`: simulate, calibrate, and analyze a time-multiplexed
//! minimum-error receiver for polarization-frequency encoded photons.
//!
//! Machine-readable JSON goes to stdout; human logs go to stderr.
//! Exit codes: 0 success, 1 runtime/numerical failure, 2 usage/config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qsd_cli::config::{ParamsDto, Preset, RunConfig};
use qsd_cli::formats;
use qsd_cli::mcpar::mc_guess_error_parallel;
use qsd_cli::pipeline;
use qsd_core::calibration::{optimize_receiver, ParameterMask};
use qsd_core::discrimination::{
    argmax_guess_probability, assign_guesses, average_guess_probability, bayes_posteriors,
    gus_bound, srm_oracle, GuessAssignment, PosteriorTable,
};
use qsd_core::montecarlo::mc_guess_error;
use qsd_core::optics::timing_report;
use qsd_core::receiver::{collected_fraction, simulate_distribution, ProbabilityTable};

#[derive(Parser)]
#[command(name = "qsd", version, about = "Time-multiplexed quantum state discrimination receiver toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the optimal guess probability d/n for n symmetric states
    /// spanning a d-dimensional space.
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
    },
    /// Simulate the receiver and report detection distributions, posteriors,
    /// the guess rule, and the average guess probability.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: OutDir,
    },
    /// Maximize the average guess probability over the free angles.
    Optimize {
        #[command(flatten)]
        source: Source,
        /// Which parameters to free: angles, prep, loop, phases, or all.
        #[arg(long, default_value = "angles")]
        free: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Propagate parameter uncertainties to the guess probability.
    Montecarlo {
        #[command(flatten)]
        source: Source,
        /// Override the number of draws.
        #[arg(long)]
        samples: Option<usize>,
        /// Override the RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run draws on one thread (bitwise identical to the default).
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Analyze a measured (or synthesized) count table.
    Analyze {
        /// Counts CSV with header `state,t,pi,counts`.
        #[arg(long)]
        counts: PathBuf,
        /// Background-rate CSV with header `t,pi,rate_hz`.
        #[arg(long)]
        background: Option<PathBuf>,
        /// Acquisition time per state, seconds.
        #[arg(long, default_value_t = 180.0)]
        duration_s: f64,
        /// Monte Carlo draws for the systematic error (0 = Poissonian only).
        #[arg(long, default_value_t = 0)]
        mc_samples: usize,
        #[arg(long)]
        mc_seed: Option<u64>,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: OutDir,
    },
    /// Join a simulation dump with an analysis dump.
    Compare {
        /// `probabilities.json` from `simulate --out`.
        #[arg(long)]
        sim: PathBuf,
        /// `analysis.json` from `analyze --out`.
        #[arg(long)]
        exp: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
}

/// Receiver parameter source: a config file or a built-in preset.
#[derive(Args)]
struct Source {
    /// TOML run configuration.
    #[arg(long, conflicts_with_all = ["ideal", "paper"])]
    config: Option<PathBuf>,
    /// Built-in preset: the lossless design-point receiver (default).
    #[arg(long, conflicts_with = "paper")]
    ideal: bool,
    /// Built-in preset: the measured hardware imperfections.
    #[arg(long)]
    paper: bool,
}

impl Source {
    fn resolve(&self) -> Result<RunConfig, AppError> {
        if let Some(path) = &self.config {
            RunConfig::load(path).map_err(|e| AppError::Usage(anyhow!(e)))
        } else if self.paper {
            Ok(RunConfig::preset(Preset::Paper))
        } else {
            Ok(RunConfig::preset(Preset::Ideal))
        }
    }
}

#[derive(Args)]
struct OutDir {
    /// Directory for report files (defaults to $QSD_OUT_DIR if set).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self) -> Option<PathBuf> {
        self.out
            .clone()
            .or_else(|| std::env::var_os("QSD_OUT_DIR").map(PathBuf::from))
    }
}

/// Errors split by exit code.
enum AppError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for AppError {
    fn from(e: anyhow::Error) -> Self {
        AppError::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.cmd {
        Cmd::Bound { n, d } => cmd_bound(n, d),
        Cmd::Simulate { source, out } => cmd_simulate(&source, &out),
        Cmd::Optimize {
            source,
            free,
            tol,
            restarts,
            seed,
            out,
        } => cmd_optimize(&source, &free, tol, restarts, seed, &out),
        Cmd::Montecarlo {
            source,
            samples,
            seed,
            serial,
            out,
        } => cmd_montecarlo(&source, samples, seed, serial, &out),
        Cmd::Analyze {
            counts,
            background,
            duration_s,
            mc_samples,
            mc_seed,
            source,
            out,
        } => cmd_analyze(
            &counts,
            background.as_deref(),
            duration_s,
            mc_samples,
            mc_seed,
            &source,
            &out,
        ),
        Cmd::Compare { sim, exp, out } => cmd_compare(&sim, &exp, &out),
    }
}

fn emit<T: Serialize>(value: &T) -> Result<(), AppError> {
    let json = serde_json::to_string_pretty(value).context("serializing report")?;
    println!("{json}");
    Ok(())
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_bound(n: usize, d: usize) -> Result<(), AppError> {
    #[derive(Serialize)]
    struct BoundDto {
        n: usize,
        d: usize,
        p_guess: f64,
        p_err: f64,
    }
    let p = gus_bound(n, d).map_err(|e| AppError::Usage(anyhow!(e)))?;
    emit(&BoundDto {
        n,
        d,
        p_guess: p,
        p_err: 1.0 - p,
    })
}

/// Everything the simulate pipeline produces, shared with analyze/compare.
struct SimRun {
    table: ProbabilityTable,
    post: PosteriorTable,
    assign: GuessAssignment,
    priors: Vec<f64>,
    pguess: f64,
    pguess_argmax: f64,
}

fn run_sim(cfg: &RunConfig) -> Result<SimRun, AppError> {
    let ens = cfg.ensemble();
    let table =
        simulate_distribution(&ens, &cfg.receiver).map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let post = bayes_posteriors(&table, &ens.priors).map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let assign = assign_guesses(&post).map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let pguess = average_guess_probability(&post, &table, &assign, &ens.priors);
    let pguess_argmax = argmax_guess_probability(&post);
    Ok(SimRun {
        table,
        post,
        assign,
        priors: ens.priors,
        pguess,
        pguess_argmax,
    })
}

#[derive(Serialize)]
struct DupleDto {
    state: usize,
    h_bin: Option<usize>,
    v_bin: Option<usize>,
}

fn duples_dto(assign: &GuessAssignment) -> Vec<DupleDto> {
    assign
        .duples
        .iter()
        .enumerate()
        .map(|(s, d)| DupleDto {
            state: s + 1,
            h_bin: d.h.map(|x| x.t),
            v_bin: d.v.map(|x| x.t),
        })
        .collect()
}

fn cmd_simulate(source: &Source, out: &OutDir) -> Result<(), AppError> {
    let cfg = source.resolve()?;
    let run = run_sim(&cfg)?;

    #[derive(Serialize)]
    struct TimingDto {
        loop_time_s: f64,
        delay_s: f64,
        span_s: f64,
        span_from_first_bin_s: f64,
        rep_period_s: f64,
        fits: bool,
    }
    #[derive(Serialize)]
    struct SummaryDto {
        p_guess: f64,
        p_guess_argmax: f64,
        collected_fraction: f64,
        gus_bound: f64,
        srm_oracle: f64,
        duples: Vec<DupleDto>,
        timing: TimingDto,
        params: ParamsDto,
    }

    let timing = timing_report(&cfg.timing, cfg.receiver.n_passes)
        .map_err(|e| AppError::Usage(anyhow!(e)))?;
    let ens = cfg.ensemble();
    let srm = srm_oracle(&ens).map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let space_dim = match cfg.ensemble_kind {
        qsd_cli::config::EnsembleKind::Canonical => 4,
        qsd_cli::config::EnsembleKind::FourOmega1 => 2,
    };
    let summary = SummaryDto {
        p_guess: run.pguess,
        p_guess_argmax: run.pguess_argmax,
        collected_fraction: collected_fraction(&run.table, &run.priors),
        gus_bound: gus_bound(ens.len(), space_dim).map_err(|e| AppError::Runtime(anyhow!(e)))?,
        srm_oracle: srm,
        duples: duples_dto(&run.assign),
        timing: TimingDto {
            loop_time_s: timing.loop_time,
            delay_s: timing.delay,
            span_s: timing.span,
            span_from_first_bin_s: timing.span_from_first_bin,
            rep_period_s: timing.rep_period,
            fits: timing.fits,
        },
        params: ParamsDto::from(&cfg.receiver),
    };

    if let Some(dir) = out.resolve() {
        write_out(
            &dir,
            "probabilities.csv",
            &formats::probability_table_to_csv(&run.table),
        )?;
        let table_json = serde_json::to_string_pretty(&formats::TableDto::from_table(
            &run.table,
            &run.priors,
        ))
        .context("serializing table")?;
        write_out(&dir, "probabilities.json", &table_json)?;
        let posteriors = serde_json::to_string_pretty(&formats::posterior_rows(&run.post, None))
            .context("serializing posteriors")?;
        write_out(&dir, "posteriors.json", &posteriors)?;
        let duples =
            serde_json::to_string_pretty(&duples_dto(&run.assign)).context("serializing duples")?;
        write_out(&dir, "duples.json", &duples)?;
        let summary_json = serde_json::to_string_pretty(&summary).context("serializing summary")?;
        write_out(&dir, "summary.json", &summary_json)?;
    }
    emit(&summary)
}

fn cmd_optimize(
    source: &Source,
    free: &str,
    tol: f64,
    restarts: usize,
    seed: u64,
    out: &OutDir,
) -> Result<(), AppError> {
    let cfg = source.resolve()?;
    let mask = match free {
        "angles" => ParameterMask::ANGLES,
        "all" => ParameterMask::ALL,
        "prep" => ParameterMask {
            prep_set: true,
            loop_set: false,
            phases: false,
        },
        "loop" => ParameterMask {
            prep_set: false,
            loop_set: true,
            phases: false,
        },
        "phases" => ParameterMask {
            prep_set: false,
            loop_set: false,
            phases: true,
        },
        other => {
            return Err(AppError::Usage(anyhow!(
                "unknown --free value {other:?}; use angles|prep|loop|phases|all"
            )))
        }
    };
    let ens = cfg.ensemble();
    let res = optimize_receiver(&cfg.receiver, &ens, mask, tol, restarts, seed)
        .map_err(|e| AppError::Usage(anyhow!(e)))?;

    #[derive(Serialize)]
    struct OptimizeDto {
        objective: f64,
        iterations: usize,
        converged: bool,
        restarts_used: usize,
        params: ParamsDto,
    }
    let dto = OptimizeDto {
        objective: res.objective,
        iterations: res.iterations,
        converged: res.converged,
        restarts_used: res.restarts_used,
        params: ParamsDto::from(&res.params),
    };
    if let Some(dir) = out.resolve() {
        let json = serde_json::to_string_pretty(&dto).context("serializing result")?;
        write_out(&dir, "optimize.json", &json)?;
    }
    emit(&dto)
}

fn cmd_montecarlo(
    source: &Source,
    samples: Option<usize>,
    seed: Option<u64>,
    serial: bool,
    out: &OutDir,
) -> Result<(), AppError> {
    let cfg = source.resolve()?;
    let mut model = cfg.uncertainty;
    if let Some(n) = samples {
        model.n_samples = n;
    }
    if let Some(s) = seed {
        model.seed = s;
    }
    let ens = cfg.ensemble();
    let report = if serial {
        mc_guess_error(&cfg.receiver, &ens, &model)
    } else {
        mc_guess_error_parallel(&cfg.receiver, &ens, &model)
    }
    .map_err(|e| AppError::Runtime(anyhow!(e)))?;

    #[derive(Serialize)]
    struct McDto {
        mean: f64,
        std: f64,
        samples_used: usize,
        samples_failed: usize,
        sigma_angle_deg: f64,
        sigma_r: f64,
        seed: u64,
    }
    let dto = McDto {
        mean: report.mean,
        std: report.std,
        samples_used: report.samples_used,
        samples_failed: report.samples_failed,
        sigma_angle_deg: model.sigma_angle.to_degrees(),
        sigma_r: model.sigma_r,
        seed: model.seed,
    };
    if let Some(dir) = out.resolve() {
        let json = serde_json::to_string_pretty(&dto).context("serializing report")?;
        write_out(&dir, "mc.json", &json)?;
        write_out(&dir, "per_bin_std.csv", &formats::per_bin_std_to_csv(&report))?;
    }
    emit(&dto)
}

#[derive(Serialize, serde::Deserialize)]
struct AnalysisDto {
    p_guess: f64,
    sigma: f64,
    sigma_poisson: f64,
    sigma_mc: f64,
    events_used: f64,
    count_rate_hz: f64,
    posteriors: Vec<formats::PosteriorRow>,
}

fn cmd_analyze(
    counts_path: &Path,
    background: Option<&Path>,
    duration_s: f64,
    mc_samples: usize,
    mc_seed: Option<u64>,
    source: &Source,
    out: &OutDir,
) -> Result<(), AppError> {
    let cfg = source.resolve()?;
    let raw = pipeline::load_counts(counts_path, background, duration_s)
        .map_err(|e| AppError::Usage(anyhow!(e)))?;
    let clean = pipeline::subtract_background(&raw);

    // guess rule from the simulation of the matching parameters
    let run = run_sim(&cfg)?;

    let mc_report = if mc_samples > 0 {
        let mut model = cfg.uncertainty;
        model.n_samples = mc_samples;
        if let Some(s) = mc_seed {
            model.seed = s;
        }
        Some(
            mc_guess_error_parallel(&cfg.receiver, &cfg.ensemble(), &model)
                .map_err(|e| AppError::Runtime(anyhow!(e)))?,
        )
    } else {
        None
    };

    let exp = pipeline::counts_to_posteriors(&clean, &run.priors, mc_report.as_ref())
        .map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let (p, sigma_stat) = pipeline::experimental_pguess(&exp, &run.assign);
    let sigma_mc = mc_report.as_ref().map(|r| r.std).unwrap_or(0.0);
    let sigma = (sigma_stat * sigma_stat + sigma_mc * sigma_mc).sqrt();

    // Poissonian-only error on the headline, for the detailed report
    let exp_poisson = pipeline::counts_to_posteriors(&clean, &run.priors, None)
        .map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let (_, sigma_poisson) = pipeline::experimental_pguess(&exp_poisson, &run.assign);

    let dto = AnalysisDto {
        p_guess: p,
        sigma,
        sigma_poisson,
        sigma_mc,
        events_used: clean.total(),
        count_rate_hz: clean.count_rate_hz,
        posteriors: formats::posterior_rows(&exp.post, Some(&exp.sigma)),
    };
    if let Some(dir) = out.resolve() {
        let json = serde_json::to_string_pretty(&dto).context("serializing analysis")?;
        write_out(&dir, "analysis.json", &json)?;
    }
    emit(&dto)
}

fn cmd_compare(sim_path: &Path, exp_path: &Path, out: &OutDir) -> Result<(), AppError> {
    let sim_text = std::fs::read_to_string(sim_path)
        .with_context(|| format!("reading {}", sim_path.display()))
        .map_err(AppError::Usage)?;
    let sim_dto: formats::TableDto = serde_json::from_str(&sim_text)
        .context("parsing simulation table JSON")
        .map_err(AppError::Usage)?;
    let table = sim_dto.to_table().map_err(|e| AppError::Usage(anyhow!(e)))?;
    let priors = sim_dto.priors.clone();

    let exp_text = std::fs::read_to_string(exp_path)
        .with_context(|| format!("reading {}", exp_path.display()))
        .map_err(AppError::Usage)?;
    let exp_dto: AnalysisDto = serde_json::from_str(&exp_text)
        .context("parsing analysis JSON")
        .map_err(AppError::Usage)?;

    let post = bayes_posteriors(&table, &priors).map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let assign = assign_guesses(&post).map_err(|e| AppError::Runtime(anyhow!(e)))?;
    let sim_pguess = average_guess_probability(&post, &table, &assign, &priors);

    // rebuild the experimental posterior table from the analysis dump
    let n = table.n_states();
    let n_bins = table.n_bins();
    let mut q = vec![0.0; n_bins * 2 * n];
    let mut evidence = vec![0.0; n_bins * 2];
    let mut sigma = vec![0.0; n_bins * 2 * n];
    for row in &exp_dto.posteriors {
        let pi = if row.pi == "H" {
            qsd_core::receiver::Polarization::H
        } else {
            qsd_core::receiver::Polarization::V
        };
        let slot = row.t * 2 + pi.index();
        evidence[slot] = row.evidence;
        for (s, v) in row.q.iter().enumerate() {
            q[slot * n + s] = *v;
        }
        if let Some(sig) = &row.sigma {
            for (s, v) in sig.iter().enumerate() {
                sigma[slot * n + s] = *v;
            }
        }
    }
    let exp_post =
        PosteriorTable::from_parts(n, n_bins, q, evidence).map_err(|e| AppError::Usage(anyhow!(e)))?;
    let exp = pipeline::ExperimentalPosteriors {
        post: exp_post,
        sigma: sigma.clone(),
        sigma_poisson: sigma,
    };

    let report = pipeline::compare(&post, sim_pguess, &exp, (exp_dto.p_guess, exp_dto.sigma))
        .map_err(|e| AppError::Runtime(anyhow!(e)))?;
    if let Some(dir) = out.resolve() {
        let json = serde_json::to_string_pretty(&report).context("serializing comparison")?;
        write_out(&dir, "compare.json", &json)?;
    }
    emit(&report)
}
