use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvavg::averaging::{
    default_burn_in, estimate_fbar, simulate_averaged, write_fbar_cache, AveragedOptions, AveragingError, FbarMode,
    FrozenKey, FrozenParams,
};
use mvavg::integrate::{simulate_full, NoisePlan, RunOptions, SimError};
use mvavg::measure::MeasureMoments;
use mvavg::model::{build_model, probe_hypothesis, ModelParams, SamplerConfig};
use mvavg::study::{
    load_config, run_aux_diagnostic, run_rate_study, summary_text, with_workers, write_report, ConfigError,
    StudyConfig, StudyError,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_BLOW_UP: u8 = 3;
const EXIT_VERDICT: u8 = 4;

#[derive(Parser)]
#[command(name = "mvavg", version, about = "Slow-fast McKean-Vlasov averaging experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides MVAVG_SEED and the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Model id.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Model parameter override `key=value`, repeatable.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Subcommand)]
enum Command {
    /// One full slow-fast run; dumps trajectories.
    Simulate {
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also record fast states.
        #[arg(long)]
        fast: bool,
    },
    /// Estimate f̄ at a slow state and measure moments.
    Freeze {
        /// Slow state, comma separated (default: the model's initial state).
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        /// Measure mean, comma separated (default: x).
        #[arg(long, value_delimiter = ',')]
        mu_mean: Vec<f64>,
        /// Measure second moment (default: squared norm of the mean).
        #[arg(long)]
        mu_m2: Option<f64>,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Averaged-equation run.
    Average {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Strong-error sweep over the epsilon grid with fit and verdict.
    RateStudy,
    /// Randomised hypothesis probes of the model's declared suite.
    Probe {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Block-frozen auxiliary-process gap table.
    Aux {
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

enum Failure {
    Config(String),
    BlowUp(String),
    Verdict,
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Config(c) => Failure::Config(c.to_string()),
            e if e.is_blow_up() => Failure::BlowUp(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<AveragingError> for Failure {
    fn from(e: AveragingError) -> Self {
        match e {
            AveragingError::Sim(SimError::BlowUp { .. }) => Failure::BlowUp(e.to_string()),
            AveragingError::Sim(SimError::InvalidParams(_)) | AveragingError::InvalidParams(_) => {
                Failure::Config(e.to_string())
            }
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        AveragingError::from(e).into()
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Other(format!("{}: {e}", path.display()))
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("parameter {k}: {v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn resolve(c: &Common) -> Result<StudyConfig, Failure> {
    let mut cfg = match (&c.config, &c.model) {
        (Some(path), model) => {
            let mut cfg = load_config(path)?;
            if let Some(m) = model {
                cfg.model = m.clone();
            }
            cfg
        }
        (None, Some(m)) => StudyConfig::for_model(m)?,
        (None, None) => StudyConfig::for_model("linear-benchmark")?,
    };
    let overrides: ModelParams = c.params.iter().cloned().collect();
    cfg = cfg.with_params(&overrides)?;
    if let Ok(s) = std::env::var("MVAVG_SEED") {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("MVAVG_SEED: {s:?} is not a u64")))?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = c.workers {
        if w == 0 {
            return Err(Failure::Config("invalid workers: must be >= 1".into()));
        }
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

fn out_file(cfg: &StudyConfig, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&cfg.output_dir).map_err(io(&cfg.output_dir))?;
    Ok(cfg.output_dir.join(name))
}

fn epsilon_or_first(cfg: &StudyConfig, e: Option<f64>) -> f64 {
    e.unwrap_or(cfg.epsilons[0])
}

fn simulate(cfg: &StudyConfig, epsilon: Option<f64>, fast: bool) -> Result<(), Failure> {
    let model = build_model::<f64>(&cfg.model, &cfg.params).map_err(ConfigError::from)?;
    let eps = epsilon_or_first(cfg, epsilon);
    let p = cfg.multiscale(eps);
    let (x0, y0) = model.initial_state();
    let rec = with_workers(cfg.workers, || {
        simulate_full(
            model.as_ref(),
            &x0,
            &y0,
            cfg.n_particles,
            &p,
            NoisePlan::new(cfg.seed).replication(0),
            &RunOptions {
                record_stride_steps: cfg.record_stride(&p),
                record_fast: fast,
                aux_delta_steps: vec![p.delta_steps()],
                increment_delta_steps: None,
                initial_spread: cfg.initial_spread,
            },
        )
    })??;
    let path = out_file(cfg, "trajectories.csv")?;
    let file = fs::File::create(&path).map_err(io(&path))?;
    rec.write_csv(std::io::BufWriter::new(file)).map_err(io(&path))?;
    let m = &rec.diagnostics.moments;
    println!("wrote {} ({} records)", path.display(), rec.len());
    println!(
        "sup fast m2 {:.4e}  sup slow m2 {:.4e}  bound {:.4e}{}",
        m.sup_fast_m2,
        m.sup_slow_m2,
        m.bound,
        if m.exceeded { "  EXCEEDED" } else { "" }
    );
    for g in &rec.diagnostics.aux_gaps {
        println!("aux gap at delta {:.4e}: {:.6e}", g.delta, g.gap);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn freeze(
    cfg: &StudyConfig,
    x: Vec<f64>,
    mu_mean: Vec<f64>,
    mu_m2: Option<f64>,
    horizon: f64,
    burn_in: Option<f64>,
    step: f64,
) -> Result<(), Failure> {
    let model = build_model::<f64>(&cfg.model, &cfg.params).map_err(ConfigError::from)?;
    let (x0, y0) = model.initial_state();
    let x = if x.is_empty() { x0 } else { x };
    if x.len() != model.slow_dim() {
        return Err(Failure::Config(format!(
            "x has {} entries, model expects {}",
            x.len(),
            model.slow_dim()
        )));
    }
    let mean = if mu_mean.is_empty() { x.clone() } else { mu_mean };
    if mean.len() != model.slow_dim() {
        return Err(Failure::Config(format!(
            "mu-mean has {} entries, model expects {}",
            mean.len(),
            model.slow_dim()
        )));
    }
    let m2 = mu_m2.unwrap_or_else(|| model.slow_norm().norm_sq(&mean));
    let fp = FrozenParams {
        x_frozen: x,
        mu_frozen: MeasureMoments {
            mean,
            second_moment: m2,
        },
        y_init: y0,
        burn_in: burn_in.unwrap_or_else(|| default_burn_in(model.as_ref(), None)),
        sample_horizon: horizon,
        step,
    };
    let est = estimate_fbar(model.as_ref(), &fp, &FrozenKey::new(NoisePlan::new(cfg.seed), 0, 0))?;
    println!("component,fbar,std_error");
    for (c, (f, s)) in est.fbar.iter().zip(&est.std_error).enumerate() {
        println!("{c},{f:.16e},{s:.16e}");
    }
    println!("# n_effective {:.1}", est.n_effective);
    if let Some(exact) = exact_fbar(model.as_ref(), &fp) {
        let joined: Vec<String> = exact.iter().map(|v| format!("{v:.16e}")).collect();
        println!("# closed form {}", joined.join(","));
    }
    Ok(())
}

fn exact_fbar(model: &dyn mvavg::model::SlowFastModel<f64>, fp: &FrozenParams<f64>) -> Option<Vec<f64>> {
    let mut out = vec![0.0; model.slow_dim()];
    model.fbar_exact(&fp.x_frozen, &fp.mu_frozen, &mut out).then_some(out)
}

fn average(cfg: &StudyConfig, epsilon: Option<f64>) -> Result<(), Failure> {
    let model = build_model::<f64>(&cfg.model, &cfg.params).map_err(ConfigError::from)?;
    let eps = epsilon_or_first(cfg, epsilon);
    let p = cfg.multiscale(eps);
    let mode = match cfg.fbar_mode() {
        FbarMode::Hmm(mut h) => {
            h.keep_cache = true;
            FbarMode::Hmm(h)
        }
        m => m,
    };
    let (x0, _) = model.initial_state();
    let run = with_workers(cfg.workers, || {
        simulate_averaged(
            model.as_ref(),
            &x0,
            cfg.n_particles,
            &p,
            NoisePlan::new(cfg.seed).replication(0),
            &AveragedOptions {
                mode,
                macro_factor: 1,
                record_stride: cfg.record_stride(&p),
                initial_spread: cfg.initial_spread,
            },
        )
    })??;
    let path = out_file(cfg, "averaged.csv")?;
    let file = fs::File::create(&path).map_err(io(&path))?;
    run.recorder
        .write_csv(std::io::BufWriter::new(file))
        .map_err(io(&path))?;
    println!("wrote {} ({} records)", path.display(), run.recorder.len());
    if !run.cache.is_empty() {
        let path = out_file(cfg, "fbar_cache.csv")?;
        let file = fs::File::create(&path).map_err(io(&path))?;
        write_fbar_cache(&run.cache, std::io::BufWriter::new(file)).map_err(io(&path))?;
        println!("wrote {} ({} evaluations)", path.display(), run.cache.len());
    }
    if run.noisy_evaluations > 0 {
        eprintln!(
            "warning: {} f̄ evaluations had a standard error above {} of the drift",
            run.noisy_evaluations, cfg.hmm.warn_fraction
        );
    }
    Ok(())
}

fn rate_study(cfg: &StudyConfig) -> Result<(), Failure> {
    let report = run_rate_study(cfg)?;
    write_report(&report, &cfg.output_dir)?;
    print!("{}", summary_text(&report));
    if !report.complete {
        if report.failures.iter().any(|f| f.blow_up) {
            return Err(Failure::BlowUp("one or more grid points blew up".into()));
        }
        return Err(Failure::Other("one or more grid points failed".into()));
    }
    if report.fit.pass {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn probe(cfg: &StudyConfig, samples: usize) -> Result<(), Failure> {
    let model = build_model::<f64>(&cfg.model, &cfg.params).map_err(ConfigError::from)?;
    let sampler = SamplerConfig::default();
    let mut all = true;
    println!("property,samples,worst_margin,result");
    for prop in model.probe_suite() {
        let r = probe_hypothesis(model.as_ref(), prop, samples, &sampler, cfg.seed)
            .map_err(|e| Failure::Other(e.to_string()))?;
        let ok = r.passed();
        all &= ok;
        println!(
            "{},{},{:.6e},{}",
            prop.name(),
            r.samples,
            r.worst_margin,
            if ok { "pass" } else { "fail" }
        );
        if let Some(w) = &r.violating_witness {
            println!(
                "# witness u1={:?} u2={:?} v1={:?} v2={:?} slack={:.6e}",
                w.u1, w.u2, w.v1, w.v2, w.slack
            );
        }
    }
    println!("# suite {}", if all { "pass" } else { "fail" });
    Ok(())
}

fn aux(cfg: &StudyConfig, epsilon: Option<f64>) -> Result<(), Failure> {
    let eps = epsilon_or_first(cfg, epsilon);
    let table = run_aux_diagnostic(cfg, eps)?;
    let path = out_file(cfg, "aux.csv")?;
    let mut body = String::from("delta,gap,gap_over_delta\n");
    for r in &table.rows {
        body.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.delta, r.gap, r.gap_over_delta));
    }
    fs::write(&path, &body).map_err(io(&path))?;
    print!("{body}");
    println!("# monotone {}  ratio spread {:.3}", table.monotone, table.ratio_spread);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Simulate { epsilon, fast } => simulate(&cfg, epsilon, fast),
        Command::Freeze {
            x,
            mu_mean,
            mu_m2,
            horizon,
            burn_in,
            step,
        } => freeze(&cfg, x, mu_mean, mu_m2, horizon, burn_in, step),
        Command::Average { epsilon } => average(&cfg, epsilon),
        Command::RateStudy => rate_study(&cfg),
        Command::Probe { samples } => probe(&cfg, samples),
        Command::Aux { epsilon } => aux(&cfg, epsilon),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Config(m) => (EXIT_CONFIG, format!("config error: {m}")),
                Failure::BlowUp(m) => (EXIT_BLOW_UP, format!("blow-up: {m}")),
                Failure::Verdict => (EXIT_VERDICT, "verdict: fail".to_string()),
                Failure::Other(m) => (1, format!("error: {m}")),
            };
            let _ = writeln!(std::io::stderr(), "{msg}");
            ExitCode::from(code)
        }
    }
}
