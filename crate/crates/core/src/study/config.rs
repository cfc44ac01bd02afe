use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::averaging::{FbarMode, HmmSettings};
use crate::integrate::noise::MAX_PARTICLES;
use crate::integrate::MultiscaleParams;
use crate::model::{ModelError, ModelParams, MODEL_IDS};
use crate::spatial::NormTag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config key `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeTag {
    Exact,
    Hmm,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawHmm {
    replicas: Option<usize>,
    burn_in: Option<f64>,
    horizon: Option<f64>,
    refresh_stride: Option<usize>,
    frozen_step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    n_particles: Option<usize>,
    epsilons: Option<Vec<f64>>,
    t_end: Option<f64>,
    h_divisor: Option<f64>,
    h_max: Option<f64>,
    delta_exponent: Option<f64>,
    replications: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    mode: Option<ModeTag>,
    hmm: Option<RawHmm>,
    record_points: Option<usize>,
    slow_norm: Option<NormTag>,
    slope_threshold: Option<f64>,
    taming: Option<bool>,
    initial_spread: Option<f64>,
    workers: Option<usize>,
}

/// A fully resolved and validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: String,
    pub params: ModelParams,
    pub n_particles: usize,
    /// Strictly decreasing, all in `(0, 1]`.
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    /// `h = min(ε / h_divisor, h_max)`, adjusted to divide `t_end`.
    pub h_divisor: f64,
    pub h_max: f64,
    /// `δ = ε^{delta_exponent}`, rounded to a multiple of `h`.
    pub delta_exponent: f64,
    pub replications: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub mode: ModeTag,
    pub hmm: HmmSettings,
    /// Recorded times per run; the sup in the strong error is over these.
    pub record_points: usize,
    /// Overrides the model's slow error norm.
    pub slow_norm: Option<NormTag>,
    /// Threshold on the fitted slope of `error_sq` against `ε`.
    pub slope_threshold: f64,
    pub taming: bool,
    pub initial_spread: f64,
    /// Worker threads; `None` uses all available cores.
    pub workers: Option<usize>,
}

/// `2/3 · 0.9`: the squared-error slope implied by the `ε^{1/3}` rate with a 10% tolerance.
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 2.0 / 3.0 * 0.9;

fn is_pde(model: &str) -> bool {
    matches!(model, "porous-media-1d" | "plaplace-1d")
}

/// Largest micro step keeping the explicit slow drift of the reduced PDE
/// discretisations stable.
fn default_h_max(model: &str) -> f64 {
    match model {
        "porous-media-1d" => 2.5e-4,
        "plaplace-1d" => 1e-4,
        _ => f64::INFINITY,
    }
}

impl StudyConfig {
    /// All defaults for `model`.
    pub fn for_model(model: &str) -> Result<Self, ConfigError> {
        Self::resolve(RawConfig {
            model: model.to_string(),
            params: BTreeMap::new(),
            n_particles: None,
            epsilons: None,
            t_end: None,
            h_divisor: None,
            h_max: None,
            delta_exponent: None,
            replications: None,
            seed: None,
            output_dir: None,
            mode: None,
            hmm: None,
            record_points: None,
            slow_norm: None,
            slope_threshold: None,
            taming: None,
            initial_spread: None,
            workers: None,
        })
    }

    fn resolve(raw: RawConfig) -> Result<Self, ConfigError> {
        if !MODEL_IDS.contains(&raw.model.as_str()) {
            return Err(ModelError::UnknownModel(raw.model).into());
        }
        let pde = is_pde(&raw.model);
        let has_exact = crate::model::build_model::<f64>(&raw.model, &raw.params)?.has_exact_fbar();
        let h = raw.hmm.unwrap_or_default();
        let dh = HmmSettings::default();
        let cfg = Self {
            n_particles: raw.n_particles.unwrap_or(if pde { 200 } else { 1000 }),
            epsilons: raw.epsilons.unwrap_or_else(|| {
                if pde {
                    vec![0.1, 0.05, 0.02]
                } else {
                    vec![0.1, 0.05, 0.02, 0.01, 0.005]
                }
            }),
            t_end: raw.t_end.unwrap_or(1.0),
            h_divisor: raw.h_divisor.unwrap_or(50.0),
            h_max: raw.h_max.unwrap_or_else(|| default_h_max(&raw.model)),
            delta_exponent: raw.delta_exponent.unwrap_or(2.0 / 3.0),
            replications: raw.replications.unwrap_or(if pde { 2 } else { 8 }),
            seed: raw.seed.unwrap_or(0),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("mvavg-out")),
            mode: raw
                .mode
                .unwrap_or(if has_exact { ModeTag::Exact } else { ModeTag::Hmm }),
            hmm: HmmSettings {
                replicas: h.replicas.unwrap_or(dh.replicas),
                burn_in: h.burn_in.unwrap_or(dh.burn_in),
                horizon: h.horizon.unwrap_or(dh.horizon),
                refresh_stride: h.refresh_stride.unwrap_or(dh.refresh_stride),
                frozen_step: h.frozen_step,
                ..dh
            },
            record_points: raw.record_points.unwrap_or(200),
            slow_norm: raw.slow_norm,
            slope_threshold: raw.slope_threshold.unwrap_or(DEFAULT_SLOPE_THRESHOLD),
            taming: raw.taming.unwrap_or(true),
            initial_spread: raw.initial_spread.unwrap_or(0.0),
            workers: raw.workers,
            model: raw.model,
            params: raw.params,
        };
        cfg.validate(has_exact)?;
        Ok(cfg)
    }

    fn validate(&self, has_exact: bool) -> Result<(), ConfigError> {
        if self.n_particles < 2 || self.n_particles > MAX_PARTICLES {
            return Err(invalid(
                "n_particles",
                format!("must lie in 2..={MAX_PARTICLES}, got {}", self.n_particles),
            ));
        }
        if self.epsilons.is_empty() {
            return Err(invalid("epsilons", "must not be empty"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(invalid(
                "epsilons",
                format!("every epsilon must lie in (0, 1], got {e}"),
            ));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilons", "epsilon grid must be strictly decreasing"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", format!("must be > 0, got {}", self.t_end)));
        }
        if !(self.h_divisor >= 1.0 / crate::integrate::H_FRACTION) {
            return Err(invalid(
                "h_divisor",
                format!(
                    "must be >= {} to resolve the fast scale, got {}",
                    1.0 / crate::integrate::H_FRACTION,
                    self.h_divisor
                ),
            ));
        }
        if !(self.h_max > 0.0) {
            return Err(invalid("h_max", format!("must be > 0, got {}", self.h_max)));
        }
        if !(self.delta_exponent > 0.0 && self.delta_exponent < 1.0) {
            return Err(invalid(
                "delta_exponent",
                format!("must lie in (0, 1), got {}", self.delta_exponent),
            ));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be >= 1"));
        }
        if self.record_points == 0 {
            return Err(invalid("record_points", "must be >= 1"));
        }
        if !self.slope_threshold.is_finite() {
            return Err(invalid("slope_threshold", "must be finite"));
        }
        if !(self.initial_spread >= 0.0) {
            return Err(invalid("initial_spread", "must be >= 0"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be >= 1"));
        }
        if self.mode == ModeTag::Exact && !has_exact {
            return Err(invalid(
                "mode",
                format!("model {} has no closed-form f̄; use \"hmm\"", self.model),
            ));
        }
        let h = &self.hmm;
        if h.replicas == 0 || h.replicas > 1024 {
            return Err(invalid(
                "hmm.replicas",
                format!("must lie in 1..=1024, got {}", h.replicas),
            ));
        }
        if h.refresh_stride == 0 {
            return Err(invalid("hmm.refresh_stride", "must be >= 1"));
        }
        if !(h.burn_in >= 0.0) {
            return Err(invalid("hmm.burn_in", "must be >= 0"));
        }
        if !(h.horizon > 0.0) {
            return Err(invalid("hmm.horizon", "must be > 0"));
        }
        if let Some(s) = h.frozen_step {
            if !(s > 0.0) {
                return Err(invalid("hmm.frozen_step", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Time-scale parameters at `epsilon` under the configured `h` rule.
    pub fn multiscale(&self, epsilon: f64) -> MultiscaleParams {
        let mut p = MultiscaleParams::with_divisor(epsilon, self.t_end, self.h_divisor, self.h_max);
        p.taming = self.taming;
        p.delta_block = Some(p.steps_for(epsilon.powf(self.delta_exponent)) as f64 * p.h_micro);
        p
    }

    /// Recording stride in micro steps for `T / record_points`.
    pub fn record_stride(&self, p: &MultiscaleParams) -> usize {
        (p.n_steps() / self.record_points).max(1)
    }

    pub fn fbar_mode(&self) -> FbarMode {
        match self.mode {
            ModeTag::Exact => FbarMode::Exact,
            ModeTag::Hmm => FbarMode::Hmm(self.hmm.clone()),
        }
    }

    /// Applies `--param key=value` style overrides and revalidates.
    pub fn with_params(mut self, overrides: &ModelParams) -> Result<Self, ConfigError> {
        self.params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
        let has_exact = crate::model::build_model::<f64>(&self.model, &self.params)?.has_exact_fbar();
        self.validate(has_exact)?;
        Ok(self)
    }
}

/// Parses and validates a TOML config.
pub fn parse_config(text: &str) -> Result<StudyConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    StudyConfig::resolve(raw)
}

/// Reads, parses and validates a TOML config file.
pub fn load_config(path: &Path) -> Result<StudyConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}
