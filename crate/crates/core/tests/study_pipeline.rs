use mvavg::averaging::{simulate_averaged, AveragedOptions, FbarMode};
use mvavg::integrate::{simulate_full, NoisePlan, RunOptions};
use mvavg::model::{build_model, LinearBenchmark, LinearParams, ModelParams, SlowFastModel};
use mvavg::spatial::Norm;
use mvavg::study::{
    fit_rate, load_config, parse_config, run_rate_study, strong_error, strong_error_uncoupled, sup_error_sq,
    ConfigError, RateRow, StudyConfig,
};
use nalgebra::{DMatrix, DVector};

fn small_linear(params: &[(&str, f64)]) -> StudyConfig {
    let overrides: ModelParams = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let mut cfg = StudyConfig::for_model("linear-benchmark")
        .unwrap()
        .with_params(&overrides)
        .unwrap();
    cfg.n_particles = 200;
    cfg.replications = 4;
    cfg
}

#[test]
fn decoupled_slow_drift_gives_zero_error() {
    let cfg = small_linear(&[("f0", 0.0)]);
    let m = build_model::<f64>(&cfg.model, &cfg.params).unwrap();
    let e = strong_error(m.as_ref(), &cfg, 0.05, 3).unwrap();
    assert!(e.error_sq <= 1e-20, "{}", e.error_sq);
}

#[test]
fn error_shrinks_with_epsilon() {
    let cfg = small_linear(&[]);
    let m = build_model::<f64>(&cfg.model, &cfg.params).unwrap();
    let coarse = strong_error(m.as_ref(), &cfg, 0.05, 1).unwrap();
    let fine = strong_error(m.as_ref(), &cfg, 0.005, 1).unwrap();
    assert!(
        fine.error_sq * 2.0 <= coarse.error_sq,
        "{} vs {}",
        fine.error_sq,
        coarse.error_sq
    );
}

#[test]
fn sup_error_dominates_terminal_error() {
    let m = LinearBenchmark::<f64>::new(LinearParams::default()).unwrap();
    let cfg = small_linear(&[]);
    let p = cfg.multiscale(0.05);
    let (x0, y0) = m.initial_state();
    let n = 100;
    let plan = NoisePlan::new(8);
    let stride = cfg.record_stride(&p);
    let full = simulate_full(
        &m,
        &x0,
        &y0,
        n,
        &p,
        plan,
        &RunOptions {
            record_stride_steps: stride,
            ..Default::default()
        },
    )
    .unwrap();
    let avg = simulate_averaged(
        &m,
        &x0,
        n,
        &p,
        plan,
        &AveragedOptions {
            mode: FbarMode::Exact,
            record_stride: stride,
            ..Default::default()
        },
    )
    .unwrap();
    let sup = sup_error_sq(&full, &avg.recorder, &Norm::Euclidean);
    let a = full.final_ensemble.unwrap().slow;
    let b = avg.recorder.final_ensemble.unwrap().slow;
    let terminal = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64;
    assert!(terminal > 0.0);
    assert!(sup >= terminal, "{sup} vs {terminal}");
}

#[test]
fn common_noise_reduces_the_error_bar() {
    let cfg = small_linear(&[]);
    let m = build_model::<f64>(&cfg.model, &cfg.params).unwrap();
    let coupled = strong_error(m.as_ref(), &cfg, 0.05, 2).unwrap();
    let uncoupled = strong_error_uncoupled(m.as_ref(), &cfg, 0.05, 2).unwrap();
    assert!(
        coupled.std_error < uncoupled.std_error,
        "{} vs {}",
        coupled.std_error,
        uncoupled.std_error
    );
    assert!(coupled.error_sq < uncoupled.error_sq);
}

#[test]
fn aux_gap_vanishes_without_slow_to_fast_coupling() {
    let mut cfg = small_linear(&[("k1", 0.0), ("k2", 0.0)]);
    cfg.replications = 2;
    let m = build_model::<f64>(&cfg.model, &cfg.params).unwrap();
    let e = strong_error(m.as_ref(), &cfg, 0.05, 5).unwrap();
    assert_eq!(e.aux_gap, 0.0);
}

#[test]
fn fitted_slope_matches_normal_equations() {
    let eps = [0.1, 0.05, 0.02, 0.01, 0.005];
    let errs = [3.1e-2, 1.7e-2, 8.2e-3, 3.9e-3, 2.2e-3];
    let rows: Vec<RateRow> = eps
        .iter()
        .zip(&errs)
        .map(|(&epsilon, &error_sq)| RateRow {
            epsilon,
            error_sq,
            std_error: 0.0,
            aux_gap: 0.0,
            increment_stat: 0.0,
        })
        .collect();
    let fit = fit_rate(&rows, 0.6);
    let a = DMatrix::from_fn(5, 2, |i, j| if j == 0 { eps[i].ln() } else { 1.0 });
    let y = DVector::from_iterator(5, errs.iter().map(|e| e.ln()));
    let beta = (a.transpose() * &a).lu().solve(&(a.transpose() * y)).unwrap();
    assert!((fit.slope - beta[0]).abs() < 1e-10);
    assert!((fit.intercept - beta[1]).abs() < 1e-10);
    assert!(fit.pass && fit.strictly_decreasing);
}

#[test]
fn config_file_round_trip_and_named_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.toml");
    std::fs::write(
        &path,
        "model = \"linear-benchmark\"\nn_particles = 64\nepsilons = [0.1, 0.05, 0.02]\nseed = 9\n[params]\nk1 = 0.5\n",
    )
    .unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.n_particles, 64);
    assert_eq!(cfg.epsilons, vec![0.1, 0.05, 0.02]);
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.params["k1"], 0.5);

    let err = parse_config("model = \"linear-benchmark\"\nepsilons = [0.01, 0.1, 0.05]\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { key: "epsilons", .. }), "{err}");
    let err = parse_config("model = \"linear-benchmark\"\nn_particles = 1\n").unwrap_err();
    assert!(err.to_string().contains("n_particles"), "{err}");
    let err = parse_config("model = \"linear-benchmark\"\nbogus = 1\n").unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    let err = parse_config("model = \"linear-benchmark\"\n[params]\nbogus = 1.0\n").unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    assert!(load_config(&dir.path().join("missing.toml")).is_err());
}

#[test]
fn plaplace_error_decreases_on_default_grid() {
    let mut cfg = StudyConfig::for_model("plaplace-1d").unwrap();
    cfg.n_particles = 50;
    let report = run_rate_study(&cfg).unwrap();
    assert!(report.complete);
    assert!(report.fit.strictly_decreasing, "{:?}", report.rows);
}
