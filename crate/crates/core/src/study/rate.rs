use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, StudyConfig};
use crate::averaging::{least_squares, simulate_averaged, AveragedOptions, AveragingError};
use crate::integrate::{simulate_full, NoisePlan, RunOptions, TrajectoryRecorder};
use crate::model::{build_model, ModelError, SlowFastModel};
use crate::scalar::Real;
use crate::spatial::Norm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run at epsilon = {epsilon}, seed = {seed} failed: {source}")]
    Run {
        epsilon: f64,
        seed: u64,
        #[source]
        source: AveragingError,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<ModelError> for StudyError {
    fn from(e: ModelError) -> Self {
        StudyError::Config(e.into())
    }
}

impl StudyError {
    pub fn is_blow_up(&self) -> bool {
        matches!(
            self,
            StudyError::Run {
                source: AveragingError::Sim(crate::integrate::SimError::BlowUp { .. }),
                ..
            }
        )
    }
}

/// One replication at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationResult {
    /// `mean_i sup_k ‖X^ε_i(t_k) − X̄_i(t_k)‖²`.
    pub error_sq: f64,
    pub aux_gap: f64,
    pub increment_stat: f64,
}

/// Monte Carlo strong error at one `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongError {
    pub epsilon: f64,
    pub error_sq: f64,
    /// Standard error across replications (0 for a single replication).
    pub std_error: f64,
    pub aux_gap: f64,
    pub increment_stat: f64,
    pub replications: Vec<ReplicationResult>,
}

/// One row of `rate_report.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub epsilon: f64,
    pub error_sq: f64,
    pub std_error: f64,
    pub aux_gap: f64,
    pub increment_stat: f64,
}

/// Least-squares fit of `log error_sq` against `log ε` and its verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Slope on `error_sq`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Implied rate on the error itself, `slope / 2`.
    pub error_rate: f64,
    pub strictly_decreasing: bool,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFailure {
    pub epsilon: f64,
    pub replication: usize,
    pub message: String,
    pub blow_up: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub model: String,
    pub rows: Vec<RateRow>,
    pub fit: RateFit,
    pub complete: bool,
    pub failures: Vec<GridFailure>,
    pub n_particles: usize,
    pub replications: usize,
    pub seed: u64,
    pub t_end: f64,
    pub record_points: usize,
    pub delta_exponent: f64,
    pub norm: String,
}

impl RateReport {
    /// Builds a report from a per-`ε` table, as produced by a study or injected by tests.
    pub fn from_rows(model: &str, rows: Vec<RateRow>, threshold: f64) -> Self {
        let fit = fit_rate(&rows, threshold);
        Self {
            model: model.to_string(),
            rows,
            fit,
            complete: true,
            failures: Vec::new(),
            n_particles: 0,
            replications: 0,
            seed: 0,
            t_end: 0.0,
            record_points: 0,
            delta_exponent: 2.0 / 3.0,
            norm: String::new(),
        }
    }
}

/// Pure verdict logic: slope of `log error_sq` on `log ε`, pass iff
/// `slope >= threshold` and `error_sq` strictly decreases along the grid.
pub fn fit_rate(rows: &[RateRow], threshold: f64) -> RateFit {
    let x: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error_sq.ln()).collect();
    let (slope, intercept) = if rows.len() >= 2 {
        least_squares(&x, &y)
    } else {
        (f64::NAN, f64::NAN)
    };
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    let strictly_decreasing = rows.windows(2).all(|w| w[1].error_sq < w[0].error_sq);
    RateFit {
        slope,
        intercept,
        r_squared,
        error_rate: slope / 2.0,
        strictly_decreasing,
        threshold,
        pass: slope.is_finite() && slope >= threshold && strictly_decreasing,
    }
}

fn error_norm<T: Real>(model: &dyn SlowFastModel<T>, cfg: &StudyConfig) -> Result<Norm<T>, StudyError> {
    match cfg.slow_norm {
        None => Ok(model.slow_norm()),
        Some(tag) => Norm::from_tag(tag, model.grid()).ok_or_else(|| {
            ConfigError::Invalid {
                key: "slow_norm",
                reason: format!("norm {tag:?} needs a spatial grid, model {} has none", model.id()),
            }
            .into()
        }),
    }
}

/// `mean_i sup_k ‖a_i(t_k) − b_i(t_k)‖²` over records shared by both runs.
pub fn sup_error_sq<T: Real>(a: &TrajectoryRecorder<T>, b: &TrajectoryRecorder<T>, norm: &Norm<T>) -> f64 {
    let n = a.n;
    let ds = a.slow_dim;
    let k_max = a.len().min(b.len());
    let mut total = 0.0;
    for i in 0..n {
        let mut sup = 0.0f64;
        for k in 0..k_max {
            debug_assert_eq!(a.steps[k], b.steps[k]);
            let d = norm.dist_sq(&a.slow[k][i * ds..(i + 1) * ds], &b.slow[k][i * ds..(i + 1) * ds]);
            sup = sup.max(d.as_f64());
        }
        total += sup;
    }
    total / n as f64
}

/// Full and averaged runs of one replication. With `independent`, the
/// averaged run draws a different slow noise (control for the coupling).
fn replication<T: Real>(
    model: &dyn SlowFastModel<T>,
    cfg: &StudyConfig,
    epsilon: f64,
    plan: NoisePlan,
    independent: bool,
) -> Result<ReplicationResult, AveragingError> {
    let p = cfg.multiscale(epsilon);
    let stride = cfg.record_stride(&p);
    let delta = p.delta_steps();
    let (x0, y0) = model.initial_state();
    let full = simulate_full(
        model,
        &x0,
        &y0,
        cfg.n_particles,
        &p,
        plan,
        &RunOptions {
            record_stride_steps: stride,
            record_fast: false,
            aux_delta_steps: vec![delta],
            increment_delta_steps: Some(delta),
            initial_spread: cfg.initial_spread,
        },
    )?;
    let avg_plan = if independent { plan.replication(u64::MAX) } else { plan };
    let avg = simulate_averaged(
        model,
        &x0,
        cfg.n_particles,
        &p,
        avg_plan,
        &AveragedOptions {
            mode: cfg.fbar_mode(),
            macro_factor: 1,
            record_stride: stride,
            initial_spread: cfg.initial_spread,
        },
    )?;
    let norm = error_norm(model, cfg).map_err(|e| AveragingError::InvalidParams(e.to_string()))?;
    Ok(ReplicationResult {
        error_sq: sup_error_sq(&full, &avg.recorder, &norm),
        aux_gap: full.diagnostics.aux_gaps.first().map_or(0.0, |g| g.gap),
        increment_stat: full.diagnostics.increment.map_or(0.0, |(_, v)| v),
    })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn aggregate(epsilon: f64, reps: Vec<ReplicationResult>) -> StrongError {
    let e: Vec<f64> = reps.iter().map(|r| r.error_sq).collect();
    let (error_sq, std_error) = mean_se(&e);
    let aux_gap = reps.iter().map(|r| r.aux_gap).sum::<f64>() / reps.len() as f64;
    let increment_stat = reps.iter().map(|r| r.increment_stat).sum::<f64>() / reps.len() as f64;
    StrongError {
        epsilon,
        error_sq,
        std_error,
        aux_gap,
        increment_stat,
        replications: reps,
    }
}

fn strong_error_impl<T: Real>(
    model: &dyn SlowFastModel<T>,
    cfg: &StudyConfig,
    epsilon: f64,
    seed: u64,
    independent: bool,
) -> Result<StrongError, StudyError> {
    error_norm(model, cfg)?;
    let root = NoisePlan::new(seed);
    let reps: Result<Vec<_>, _> = (0..cfg.replications)
        .into_par_iter()
        .with_min_len(1)
        .map(|r| {
            replication(model, cfg, epsilon, root.replication(r as u64), independent)
                .map_err(|source| StudyError::Run { epsilon, seed, source })
        })
        .collect();
    Ok(aggregate(epsilon, reps?))
}

/// Strong error `E sup_t ‖X^ε − X̄‖²` at one `ε` under common slow noise,
/// averaged over particles and `cfg.replications` replications.
pub fn strong_error<T: Real>(
    model: &dyn SlowFastModel<T>,
    cfg: &StudyConfig,
    epsilon: f64,
    seed: u64,
) -> Result<StrongError, StudyError> {
    strong_error_impl(model, cfg, epsilon, seed, false)
}

/// As [`strong_error`] but with independent slow noise in the averaged run.
pub fn strong_error_uncoupled<T: Real>(
    model: &dyn SlowFastModel<T>,
    cfg: &StudyConfig,
    epsilon: f64,
    seed: u64,
) -> Result<StrongError, StudyError> {
    strong_error_impl(model, cfg, epsilon, seed, true)
}

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, StudyError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    let pool = b.build().map_err(|e| StudyError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Strong error over the `ε` grid, fit and verdict. Grid points whose runs
/// fail are listed in `failures` and the report is flagged incomplete.
pub fn run_rate_study(cfg: &StudyConfig) -> Result<RateReport, StudyError> {
    if cfg.epsilons.len() < 3 {
        return Err(ConfigError::Invalid {
            key: "epsilons",
            reason: "a rate study needs at least 3 grid points".into(),
        }
        .into());
    }
    let model = build_model::<f64>(&cfg.model, &cfg.params)?;
    let norm = error_norm(model.as_ref(), cfg)?;
    let root = NoisePlan::new(cfg.seed);
    let jobs: Vec<(usize, usize)> = (0..cfg.epsilons.len())
        .flat_map(|e| (0..cfg.replications).map(move |r| (e, r)))
        .collect();
    let results: Vec<Result<ReplicationResult, AveragingError>> = with_workers(cfg.workers, || {
        jobs.par_iter()
            .with_min_len(1)
            .map(|&(e, r)| replication(model.as_ref(), cfg, cfg.epsilons[e], root.replication(r as u64), false))
            .collect()
    })?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (e, &eps) in cfg.epsilons.iter().enumerate() {
        let mut reps = Vec::new();
        for r in 0..cfg.replications {
            match &results[e * cfg.replications + r] {
                Ok(v) => reps.push(*v),
                Err(err) => failures.push(GridFailure {
                    epsilon: eps,
                    replication: r,
                    message: err.to_string(),
                    blow_up: matches!(err, AveragingError::Sim(crate::integrate::SimError::BlowUp { .. })),
                }),
            }
        }
        if reps.len() == cfg.replications {
            let s = aggregate(eps, reps);
            rows.push(RateRow {
                epsilon: eps,
                error_sq: s.error_sq,
                std_error: s.std_error,
                aux_gap: s.aux_gap,
                increment_stat: s.increment_stat,
            });
        }
    }
    let complete = failures.is_empty();
    let mut fit = fit_rate(&rows, cfg.slope_threshold);
    fit.pass &= complete;
    Ok(RateReport {
        model: cfg.model.clone(),
        rows,
        fit,
        complete,
        failures,
        n_particles: cfg.n_particles,
        replications: cfg.replications,
        seed: cfg.seed,
        t_end: cfg.t_end,
        record_points: cfg.record_points,
        delta_exponent: cfg.delta_exponent,
        norm: format!("{:?}", norm.tag()).to_lowercase(),
    })
}

/// One block size of the auxiliary-process diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxRow {
    pub delta: f64,
    pub gap: f64,
    pub gap_over_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxTable {
    pub epsilon: f64,
    pub rows: Vec<AuxRow>,
    /// Gap non-decreasing in `δ`.
    pub monotone: bool,
    /// `max / min` of `gap / δ`.
    pub ratio_spread: f64,
}

/// Time-integrated mean-square gap between `Y` and the block-frozen `Ŷ` for
/// `δ ∈ {ε, ε^{2/3}, ε^{1/2}}`, averaged over replications.
pub fn run_aux_diagnostic(cfg: &StudyConfig, epsilon: f64) -> Result<AuxTable, StudyError> {
    let model = build_model::<f64>(&cfg.model, &cfg.params)?;
    let p = cfg.multiscale(epsilon);
    let deltas: Vec<usize> = [1.0, 2.0 / 3.0, 0.5]
        .iter()
        .map(|a| p.steps_for(epsilon.powf(*a)))
        .collect();
    let (x0, y0) = model.initial_state();
    let root = NoisePlan::new(cfg.seed);
    let runs: Result<Vec<Vec<f64>>, StudyError> = with_workers(cfg.workers, || {
        (0..cfg.replications)
            .into_par_iter()
            .with_min_len(1)
            .map(|r| {
                let rec = simulate_full(
                    model.as_ref(),
                    &x0,
                    &y0,
                    cfg.n_particles,
                    &p,
                    root.replication(r as u64),
                    &RunOptions {
                        record_stride_steps: p.n_steps().max(1),
                        aux_delta_steps: deltas.clone(),
                        initial_spread: cfg.initial_spread,
                        ..Default::default()
                    },
                )
                .map_err(|e| StudyError::Run {
                    epsilon,
                    seed: cfg.seed,
                    source: e.into(),
                })?;
                Ok(rec.diagnostics.aux_gaps.iter().map(|g| g.gap).collect())
            })
            .collect()
    })?;
    let runs = runs?;
    let rows: Vec<AuxRow> = deltas
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let delta = d as f64 * p.h_micro;
            let gap = runs.iter().map(|g| g[j]).sum::<f64>() / runs.len() as f64;
            AuxRow {
                delta,
                gap,
                gap_over_delta: gap / delta,
            }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].gap >= w[0].gap);
    let ratios: Vec<f64> = rows.iter().map(|r| r.gap_over_delta).collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok(AuxTable {
        epsilon,
        rows,
        monotone,
        ratio_spread: hi / lo,
    })
}
