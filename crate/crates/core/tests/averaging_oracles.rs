use mvavg::averaging::{
    estimate_fbar, estimate_mixing_rate, frozen_simulate, simulate_averaged, AveragedOptions, AveragingError, FbarMode,
    FrozenKey, FrozenParams, HmmSettings,
};
use mvavg::integrate::{MultiscaleParams, NoisePlan};
use mvavg::measure::MeasureMoments;
use mvavg::model::{
    AntiDissipative, CubicParams, LinearBenchmark, LinearParams, MvSdeCubic, PdeParams, PorousMedia1d, SlowFastModel,
};

fn linear(p: LinearParams) -> LinearBenchmark<f64> {
    LinearBenchmark::new(p).unwrap()
}

fn frozen(x: f64, m: f64, y0: f64, burn_in: f64, horizon: f64, step: f64) -> FrozenParams<f64> {
    FrozenParams {
        x_frozen: vec![x],
        mu_frozen: MeasureMoments {
            mean: vec![m],
            second_moment: m * m,
        },
        y_init: vec![y0],
        burn_in,
        sample_horizon: horizon,
        step,
    }
}

fn key(seed: u64) -> FrozenKey {
    FrozenKey::new(NoisePlan::new(seed), 0, 0)
}

#[test]
fn frozen_mean_matches_gaussian_invariant_law() {
    let p = LinearParams {
        gamma: 1.5,
        k1: 0.8,
        k2: -0.6,
        f0: 1.0,
        ..LinearParams::default()
    };
    let m = linear(p.clone());
    let (x, mu) = (0.7, -0.4);
    let path = frozen_simulate(&m, &frozen(x, mu, 0.0, 8.0, 400.0, 0.01), &key(1)).unwrap();
    let n = path.len();
    let mean = path.samples.iter().sum::<f64>() / n as f64;
    let est = estimate_fbar(&m, &frozen(x, mu, 0.0, 8.0, 400.0, 0.01), &key(1)).unwrap();
    let exact = (p.k1 * x + p.k2 * mu) / p.gamma;
    assert!((mean - est.fbar[0]).abs() < 1e-9);
    assert!(
        (mean - exact).abs() <= 3.0 * est.std_error[0],
        "{mean} vs {exact} ± {}",
        est.std_error[0]
    );
    let var = path.samples.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    let exact_var = p.sigma2 * p.sigma2 / (2.0 * p.gamma);
    assert!((var - exact_var).abs() < 0.1 * exact_var);
}

#[test]
fn noiseless_frozen_path_sits_at_the_fixed_point() {
    let p = LinearParams {
        sigma2: 0.0,
        k2: 0.5,
        ..LinearParams::default()
    };
    let m = linear(p.clone());
    let path = frozen_simulate(&m, &frozen(1.5, 0.2, -3.0, 40.0, 5.0, 0.01), &key(2)).unwrap();
    let fixed = (p.k1 * 1.5 + p.k2 * 0.2) / p.gamma;
    assert!(path.samples.iter().all(|y| (y - fixed).abs() < 1e-12));
}

#[test]
fn slow_independent_coupling_is_reproduced_exactly() {
    let pp = PdeParams {
        c_f: 0.0,
        n_interior: 15,
        ..PdeParams::default()
    };
    let m = PorousMedia1d::<f64>::new(pp.clone()).unwrap();
    let (x0, y0) = m.initial_state();
    let mu = MeasureMoments {
        mean: x0.clone(),
        second_moment: 0.3,
    };
    let fp = FrozenParams {
        x_frozen: x0,
        mu_frozen: mu.clone(),
        y_init: y0,
        burn_in: 0.5,
        sample_horizon: 1.0,
        step: 0.01,
    };
    let est = estimate_fbar(&m, &fp, &key(3)).unwrap();
    let mut direct = vec![0.0; m.slow_dim()];
    m.f(&fp.x_frozen, &mu, &fp.y_init, &mut direct);
    assert_eq!(est.fbar, direct);
    assert!(est.std_error.iter().all(|&s| s == 0.0));
}

/// `f̄ = f0 ∫ y p(y) dy` with `p ∝ σ⁻² exp(∫ 2b/σ²)`, the stationary density
/// of the one-dimensional frozen diffusion.
fn cubic_fbar_by_quadrature(p: &CubicParams, x: f64) -> f64 {
    let b = |y: f64| -p.kappa * y - y * y * y + p.k1 * x;
    let s2 = |y: f64| (p.sigma_c + p.l_sigma2 * y.tanh()).powi(2);
    let (lo, hi, n) = (-6.0, 6.0, 240_000usize);
    let dy = (hi - lo) / n as f64;
    let mut phi = 0.0;
    let mut prev = 2.0 * b(lo) / s2(lo);
    let (mut z, mut first) = (0.0, 0.0);
    let mut log_w = Vec::with_capacity(n + 1);
    log_w.push(-s2(lo).ln());
    for i in 1..=n {
        let y = lo + i as f64 * dy;
        let cur = 2.0 * b(y) / s2(y);
        phi += 0.5 * (prev + cur) * dy;
        prev = cur;
        log_w.push(phi - s2(y).ln());
    }
    let peak = log_w.iter().cloned().fold(f64::MIN, f64::max);
    for (i, lw) in log_w.iter().enumerate() {
        let y = lo + i as f64 * dy;
        let w = (lw - peak).exp() * if i == 0 || i == n { 0.5 } else { 1.0 };
        z += w;
        first += w * y;
    }
    p.f0 * first / z
}

#[test]
fn cubic_long_run_matches_stationary_density_quadrature() {
    let p = CubicParams::default();
    let m = MvSdeCubic::<f64>::new(p.clone()).unwrap();
    let exact = cubic_fbar_by_quadrature(&p, 1.0);
    let mut fp = frozen(1.0, 0.0, 0.0, 8.0, 20_000.0, 0.002);
    fp.mu_frozen = MeasureMoments::dirac_zero(1);
    let est = estimate_fbar(&m, &fp, &key(4)).unwrap();
    let tol = 3.0 * est.std_error[0] + fp.step;
    assert!(
        (est.fbar[0] - exact).abs() <= tol,
        "{} vs {exact} (tol {tol})",
        est.fbar[0]
    );
}

#[test]
fn cubic_contracts_at_least_twice_kappa() {
    let p = CubicParams::default();
    let m = MvSdeCubic::<f64>::new(p.clone()).unwrap();
    let mut fp = frozen(1.0, 0.0, 1.5, 0.0, 8.0, 0.001);
    fp.mu_frozen = MeasureMoments::dirac_zero(1);
    for seed in 0..5 {
        let fit = estimate_mixing_rate(&m, &fp, &[-1.5], &key(seed)).unwrap();
        assert!(fit.rate >= 2.0 * p.kappa, "seed {seed}: rate {}", fit.rate);
    }
}

#[test]
fn anti_dissipative_model_fails_to_mix() {
    let m = AntiDissipative::<f64>::default();
    let fp = frozen(0.5, 0.0, 0.1, 0.0, 5.0, 0.01);
    let r = estimate_mixing_rate(&m, &fp, &[-0.1], &key(5));
    assert!(matches!(r, Err(AveragingError::MixingFailure { .. })), "{r:?}");
}

#[test]
fn doubling_the_horizon_shrinks_the_error_bar_by_root_two() {
    let m = linear(LinearParams::default());
    let mean_se = |horizon: f64| {
        (0..12)
            .map(|s| {
                estimate_fbar(&m, &frozen(1.0, 0.5, 0.0, 8.0, horizon, 0.01), &key(100 + s))
                    .unwrap()
                    .std_error[0]
            })
            .sum::<f64>()
            / 12.0
    };
    let ratio = mean_se(400.0) / mean_se(200.0);
    let expected = 1.0 / 2f64.sqrt();
    assert!((ratio - expected).abs() < 0.3 * expected, "ratio {ratio}");
}

#[test]
fn invariant_second_moment_bound_is_stable_across_reruns() {
    let m = linear(LinearParams::default());
    let states = [(0.0, 0.0), (1.0, 0.5), (-2.0, 1.0), (3.0, -2.0), (0.5, 4.0)];
    let constant = |seed: u64| {
        states
            .iter()
            .map(|&(x, mu)| {
                let path = frozen_simulate(&m, &frozen(x, mu, 0.0, 8.0, 100.0, 0.01), &key(seed)).unwrap();
                let m2 = path.samples.iter().map(|y| y * y).sum::<f64>() / path.len() as f64;
                m2 / (1.0 + x * x + mu * mu)
            })
            .fold(0.0, f64::max)
    };
    let c1 = constant(10);
    let c2 = constant(11);
    assert!(c1.is_finite() && c1 > 0.0);
    assert!((c2 / c1 - 1.0).abs() < 0.2, "{c1} vs {c2}");
}

#[test]
fn windowed_averages_forget_the_initial_state() {
    let p = LinearParams {
        k2: 0.0,
        ..LinearParams::default()
    };
    let m = linear(p.clone());
    let x = 2.0;
    let fbar = p.f0 * p.k1 * x / p.gamma;
    let replicas = 200;
    let windows = 4;
    let mut err = vec![0.0; windows];
    for r in 0..replicas {
        let path = frozen_simulate(&m, &frozen(x, 0.0, 12.0, 0.0, windows as f64, 0.01), &key(1000 + r)).unwrap();
        let per = path.len() / windows;
        for (w, e) in err.iter_mut().enumerate() {
            let avg = path.samples[w * per..(w + 1) * per].iter().sum::<f64>() / per as f64;
            *e += (p.f0 * avg - fbar) / replicas as f64;
        }
    }
    assert!(err.windows(2).all(|w| w[1].abs() < w[0].abs()), "{err:?}");
    for (w, e) in err.iter().enumerate() {
        let envelope = (12.0 - fbar) * (-(w as f64)).exp();
        assert!(e.abs() <= envelope, "window {w}: {e} vs {envelope}");
    }
}

#[test]
fn hmm_terminal_state_agrees_with_exact_averaging() {
    let m = linear(LinearParams::default());
    let params = MultiscaleParams::new(0.05, 0.5);
    let n = 200;
    let (x0, _) = m.initial_state();
    let run = |mode: FbarMode| {
        let r = simulate_averaged(
            &m,
            &x0,
            n,
            &params,
            NoisePlan::new(12),
            &AveragedOptions {
                mode,
                ..Default::default()
            },
        )
        .unwrap();
        r.recorder.final_ensemble.unwrap().slow
    };
    let exact = run(FbarMode::Exact);
    let hmm = run(FbarMode::Hmm(HmmSettings::default()));
    let stats = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (mean, var / v.len() as f64)
    };
    let (me, ve) = stats(&exact);
    let (mh, vh) = stats(&hmm);
    assert!((me - mh).abs() <= 3.0 * (ve + vh).sqrt(), "{me} vs {mh}");
}
