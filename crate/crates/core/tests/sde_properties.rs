use num_complex::Complex64;
use optomech_sr::analysis::{symbolize_trajectory, Separatrices, Well};
use optomech_sr::model::{effective_potential, steady_state_field, steady_state_positions};
use optomech_sr::rng::NoiseStream;
use optomech_sr::sde::{
    em_step, ensemble, ensemble_range, heun_step, simulate, simulate_stream, with_jobs,
    IntegratorConfig, ModelKind, NoiseSchedule, Scheme,
};
use optomech_sr::{SystemParams, SystemState};

fn fig3() -> SystemParams {
    SystemParams::synchronization().without_signals()
}

#[test]
fn momentum_increment_variance() {
    let p = SystemParams {
        noise_d: 0.09,
        ..fig3()
    };
    let dt = 0.01;
    let mut noise = NoiseStream::new(42, 0);
    let start = SystemState::new(steady_state_field(0.0, &p), 0.0, 0.0, 0.0);
    let drift_only = em_step(&start, dt, 0.0, 0.0, ModelKind::Full4D, &p).unwrap();
    let n = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let dw = dt.sqrt() * noise.standard_normal();
        let next = em_step(&start, dt, p.noise_d, dw, ModelKind::Full4D, &p).unwrap();
        assert_eq!(next.x, drift_only.x);
        assert_eq!(next.alpha, drift_only.alpha);
        let inc = next.p - drift_only.p;
        sum += inc;
        sum2 += inc * inc;
    }
    let mean = sum / n as f64;
    let var = sum2 / n as f64 - mean * mean;
    assert!((var / 0.0018 - 1.0).abs() < 0.01, "variance {var}");
}

#[test]
fn full_model_relaxes_to_a_stable_fixed_point() {
    let p = fig3();
    let mut cfg = IntegratorConfig::new(ModelKind::Full4D, 2000.0, &p);
    cfg.initial = SystemState::new(Complex64::new(0.0, 0.0), 2.0, 0.0, 0.0);
    let traj = simulate(&cfg, &NoiseSchedule::constant(0.0), &p).unwrap();
    let x_end = *traj.x.last().unwrap();
    let nearest = steady_state_positions(&p)
        .into_iter()
        .map(|x| (x - x_end).abs())
        .fold(f64::INFINITY, f64::min);
    assert!(nearest < 1e-3, "ended at {x_end}");
}

#[test]
fn heun_and_em_share_the_noise_draw() {
    let p = SystemParams::synchronization();
    let mut cfg = IntegratorConfig::new(ModelKind::Adiabatic2D, 50.0, &p);
    cfg.seed = 9;
    let heun = simulate(&cfg, &NoiseSchedule::constant(0.0), &p).unwrap();
    cfg.scheme = Scheme::EulerMaruyama;
    let em = simulate(&cfg, &NoiseSchedule::constant(0.0), &p).unwrap();
    // Deterministic runs differ only by the O(dt) global error of EM.
    let gap = heun.x.iter().zip(&em.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap > 0.0 && gap < 0.05, "gap {gap}");

    let s = SystemState::new(steady_state_field(0.5, &p), 0.5, 0.1, 3.0);
    let a = heun_step(&s, 0.01, 0.09, 0.05, ModelKind::Full4D, &p).unwrap();
    let b = heun_step(&s, 0.01, 0.0, 0.0, ModelKind::Full4D, &p).unwrap();
    // The predictor carries the kick into the damping term of the corrector.
    let kick = (2.0f64 * 0.09).sqrt() * 0.05;
    assert!(((a.p - b.p) - kick * (1.0 - 0.5 * p.gamma_m * 0.01)).abs() < 1e-14);
}

#[test]
fn noiseless_mechanical_signal_stays_in_middle_well() {
    let p = SystemParams {
        e_s: 0.0,
        noise_d: 0.0,
        ..SystemParams::synchronization()
    };
    let cfg = IntegratorConfig::new(ModelKind::Adiabatic2D, 5.0 * 2500.0, &p);
    let traj = simulate(&cfg, &NoiseSchedule::constant(0.0), &p).unwrap();
    let peak = traj.x.iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(peak > 0.01 && peak < 2.0107, "max |x| = {peak}");
}

#[test]
fn optical_signal_alone_never_moves_a_resting_membrane() {
    for model in [ModelKind::Adiabatic2D, ModelKind::Full4D] {
        let p = SystemParams {
            e_s: 1.5,
            f_s: 0.0,
            noise_d: 0.0,
            ..SystemParams::synchronization()
        };
        let cfg = IntegratorConfig::new(model, 5000.0, &p);
        let traj = simulate(&cfg, &NoiseSchedule::constant(0.0), &p).unwrap();
        assert!(traj.x.iter().chain(&traj.p).all(|&v| v == 0.0));
        if let Some(alpha) = &traj.alpha {
            // The field still follows the modulated drive.
            let spread = alpha.iter().map(|a| a.norm()).fold(0.0, f64::max)
                - alpha.iter().map(|a| a.norm()).fold(f64::INFINITY, f64::min);
            assert!(spread > 0.1);
        }
    }
}

#[test]
fn full_and_adiabatic_models_agree_after_transient() {
    let p = SystemParams {
        e_s: 0.0,
        noise_d: 0.0,
        ..SystemParams::synchronization()
    };
    let t_end = 3000.0;
    let mut full = IntegratorConfig::new(ModelKind::Full4D, t_end, &p);
    full.decimate = 100;
    let mut reduced = IntegratorConfig::new(ModelKind::Adiabatic2D, t_end, &p);
    reduced.dt = 0.01;
    reduced.decimate = 100;
    let a = simulate(&full, &NoiseSchedule::constant(0.0), &p).unwrap();
    let b = simulate(&reduced, &NoiseSchedule::constant(0.0), &p).unwrap();
    assert_eq!(a.times, b.times);
    let worst = a
        .times
        .iter()
        .zip(a.x.iter().zip(&b.x))
        .filter(|(t, _)| **t > 10.0 / p.gamma_m)
        .map(|(_, (x, y))| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "max deviation {worst}");
}

#[test]
fn ensembles_are_reproducible_and_worker_independent() {
    let p = fig3();
    let mut cfg = IntegratorConfig::new(ModelKind::Adiabatic2D, 200.0, &p);
    cfg.seed = 77;
    let schedule = NoiseSchedule::constant(0.09);
    let one = with_jobs(1, || ensemble(&cfg, &schedule, &p, 12).unwrap());
    let four = with_jobs(4, || ensemble(&cfg, &schedule, &p, 12).unwrap());
    for (a, b) in one.trajectories.iter().zip(&four.trajectories) {
        assert_eq!(a, b);
    }
    let single = ensemble(&cfg, &schedule, &p, 1).unwrap();
    assert_eq!(single.trajectories[0], simulate(&cfg, &schedule, &p).unwrap());
    let tail = ensemble_range(&cfg, &schedule, &p, 5..12).unwrap();
    assert_eq!(tail.trajectories[0], one.trajectories[5]);
    assert_eq!(tail.trajectories[0], simulate_stream(&cfg, &schedule, &p, 5).unwrap());
}

#[test]
fn disjoint_stream_ranges_are_uncorrelated() {
    let n = 100_000;
    let draws = |stream: u64| {
        let mut s = NoiseStream::new(2024, stream);
        (0..n).map(|_| s.standard_normal()).collect::<Vec<f64>>()
    };
    let a: Vec<Vec<f64>> = (0..10).map(draws).collect();
    let b: Vec<Vec<f64>> = (10..20).map(draws).collect();
    // Null: sample correlation of independent unit normals has sd 1/sqrt(n).
    let bound = 3.0 / (n as f64).sqrt();
    for x in &a {
        for y in &b {
            let r: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() / n as f64;
            assert!(r.abs() < bound * 1.5, "correlation {r}");
        }
    }
}

/// `<x^2>` under the Boltzmann density `exp(-U(x) gamma_m / D)` of the
/// signal-free reduced model, by trapezoidal quadrature.
fn boltzmann_second_moment(p: &SystemParams) -> f64 {
    let temperature = p.noise_d / p.gamma_m;
    let (lo, hi, n) = (-8.0, 8.0, 160_001);
    let h = (hi - lo) / (n - 1) as f64;
    let u_min = steady_state_positions(p)
        .into_iter()
        .map(|x| effective_potential(x, 0.0, p))
        .fold(f64::INFINITY, f64::min);
    let (mut z, mut m2) = (0.0, 0.0);
    for i in 0..n {
        let x = lo + h * i as f64;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let rho = w * (-(effective_potential(x, 0.0, p) - u_min) / temperature).exp();
        z += rho;
        m2 += rho * x * x;
    }
    m2 / z
}

#[test]
fn stationary_spread_matches_boltzmann_density() {
    let p = SystemParams {
        noise_d: 0.15,
        ..fig3()
    };
    let mut cfg = IntegratorConfig::new(ModelKind::Adiabatic2D, 200_000.0, &p);
    cfg.decimate = 32;
    let moments: Vec<f64> = (0..20)
        .map(|seed| {
            cfg.seed = seed;
            let traj = simulate(&cfg, &NoiseSchedule::constant(p.noise_d), &p).unwrap();
            let xs = &traj.x[traj.len() / 10..];
            xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
        })
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let expected = boltzmann_second_moment(&p);
    let pooled = mean(&moments);
    assert!((pooled / expected - 1.0).abs() < 0.05, "{pooled} vs {expected}");
    // Independent seed groups estimate the same stationary moment.
    let (a, b) = (mean(&moments[..10]), mean(&moments[10..]));
    assert!((a / b - 1.0).abs() < 0.1, "{moments:?}");
}

#[test]
fn noise_switches_between_all_three_wells() {
    let p = SystemParams {
        e_s: 0.0,
        ..SystemParams::synchronization()
    };
    let sep = Separatrices::from_params(&p).unwrap();
    let mut cfg = IntegratorConfig::new(ModelKind::Adiabatic2D, 20.0 * 2500.0, &p);
    cfg.decimate = 8;
    let runs = ensemble(&cfg, &NoiseSchedule::constant(0.09), &p, 50).unwrap();
    for traj in &runs.trajectories {
        let symbols = symbolize_trajectory(traj, &sep);
        let mut seen = vec![symbols.initial];
        seen.extend(symbols.transitions.iter().map(|t| t.to));
        for well in [Well::Left, Well::Middle, Well::Right] {
            assert!(seen.contains(&well), "stream {} never reached {well:?}", traj.meta.stream);
        }
    }
}

#[test]
fn two_stage_schedule_switches_only_when_noise_is_on() {
    let p = SystemParams {
        e_s: 0.0,
        ..SystemParams::synchronization()
    };
    let sep = Separatrices::from_params(&p).unwrap();
    let switch = 12_500.0;
    let schedule = NoiseSchedule::decode(&format!("{switch}:inf:0.09")).unwrap();
    let mut cfg = IntegratorConfig::new(ModelKind::Adiabatic2D, 2.0 * switch, &p);
    cfg.seed = 3;
    let traj = simulate(&cfg, &schedule, &p).unwrap();
    let symbols = symbolize_trajectory(&traj, &sep);
    assert_eq!(symbols.transitions_between(0.0, switch), 0);
    assert!(symbols.transitions_between(switch, 2.0 * switch) > 0);
}
