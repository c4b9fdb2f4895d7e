//! Stochastic integration of the full and field-eliminated models.
//!
//! Thermal noise is additive and acts on the momentum only, so the Itô and
//! Stratonovich readings coincide. One standard normal is drawn per step
//! whatever the current noise strength, which keeps noise streams aligned
//! across schedules and schemes.

use std::fmt::Write as _;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{self, ModelError};
use crate::params::{SystemParams, SystemState};
use crate::rng::NoiseStream;

/// Default step for the full model.
pub const DEFAULT_DT_FULL: f64 = 0.01;
/// Default step for the field-eliminated model (`2^-5`).
pub const DEFAULT_DT_ADIABATIC: f64 = 0.031_25;

/// Largest admissible fraction of the fastest rate per step.
const STEP_GUARD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EulerMaruyama,
    StochasticHeun,
}

impl Scheme {
    pub fn key(self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "em",
            Scheme::StochasticHeun => "heun",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "em" | "euler-maruyama" => Some(Scheme::EulerMaruyama),
            "heun" => Some(Scheme::StochasticHeun),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Field amplitude, position and momentum.
    Full4D,
    /// Position and momentum with the cavity field slaved to the membrane.
    Adiabatic2D,
}

impl ModelKind {
    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Full4D => "full",
            ModelKind::Adiabatic2D => "adiabatic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(ModelKind::Full4D),
            "adiabatic" => Some(ModelKind::Adiabatic2D),
            _ => None,
        }
    }

    pub fn default_dt(self) -> f64 {
        match self {
            ModelKind::Full4D => DEFAULT_DT_FULL,
            ModelKind::Adiabatic2D => DEFAULT_DT_ADIABATIC,
        }
    }

    /// Largest step allowed by the stability guard.
    pub fn max_dt(self, params: &SystemParams) -> f64 {
        let fastest = match self {
            ModelKind::Full4D => params.kappa.max(params.omega_m).max(params.gamma_m),
            ModelKind::Adiabatic2D => params.omega_m.max(params.gamma_m),
        };
        STEP_GUARD / fastest
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),
    #[error("integration diverged at t = {t} (last finite sample x = {}, p = {} at t = {})",
        last_finite.x, last_finite.p, last_finite.t)]
    Divergence {
        t: f64,
        state: SystemState,
        last_finite: SystemState,
    },
    #[error("{diverged} of {total} realizations diverged (first at index {first_index}: {first})")]
    EnsembleDivergence {
        diverged: usize,
        total: usize,
        first_index: usize,
        first: Box<SdeError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `decimate`-th step.
    pub decimate: usize,
    pub model: ModelKind,
    pub initial: SystemState,
    pub seed: u64,
}

impl IntegratorConfig {
    /// Heun scheme with the model's default step, starting from rest in the
    /// middle well with the field at its steady value.
    pub fn new(model: ModelKind, t_end: f64, params: &SystemParams) -> Self {
        Self {
            scheme: Scheme::StochasticHeun,
            dt: model.default_dt(),
            t_end,
            decimate: 1,
            model,
            initial: Self::rest_state(params),
            seed: 0,
        }
    }

    pub fn rest_state(params: &SystemParams) -> SystemState {
        SystemState::new(model::steady_state_field(0.0, params), 0.0, 0.0, 0.0)
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), SdeError> {
        params.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SdeError::InvalidConfig(format!("dt = {} must be > 0", self.dt)));
        }
        let max_dt = self.model.max_dt(params);
        if self.dt > max_dt * (1.0 + 1e-12) {
            return Err(SdeError::InvalidConfig(format!(
                "dt = {} exceeds the stability guard {} for the {} model",
                self.dt,
                max_dt,
                self.model.key()
            )));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(SdeError::InvalidConfig(format!(
                "t_end = {} must be finite and >= dt",
                self.t_end
            )));
        }
        if self.decimate == 0 {
            return Err(SdeError::InvalidConfig("decimate must be >= 1".into()));
        }
        if !self.initial.is_finite() {
            return Err(SdeError::InvalidConfig("initial state is not finite".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.decimate + 1
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.decimate as f64
    }

    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scheme", self.scheme.key().to_string()),
            ("model", self.model.key().to_string()),
            ("dt", self.dt.to_string()),
            ("t_end", self.t_end.to_string()),
            ("decimate", self.decimate.to_string()),
            ("seed", self.seed.to_string()),
            ("x0", self.initial.x.to_string()),
            ("p0", self.initial.p.to_string()),
            ("alpha0_re", self.initial.alpha.re.to_string()),
            ("alpha0_im", self.initial.alpha.im.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSegment {
    pub t_start: f64,
    pub t_stop: f64,
    pub d: f64,
}

/// Piecewise-constant noise strength. Times not covered by a segment are
/// noiseless.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    segments: Vec<NoiseSegment>,
}

impl NoiseSchedule {
    pub fn new(segments: Vec<NoiseSegment>) -> Result<Self, SdeError> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.d >= 0.0 && s.d.is_finite()) {
                return Err(SdeError::InvalidSchedule(format!("segment {i}: D = {} must be >= 0", s.d)));
            }
            if !(s.t_start < s.t_stop) || s.t_start.is_nan() {
                return Err(SdeError::InvalidSchedule(format!(
                    "segment {i}: start {} must precede stop {}",
                    s.t_start, s.t_stop
                )));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            if w[1].t_start < w[0].t_stop {
                return Err(SdeError::InvalidSchedule(format!(
                    "segments {i} and {} overlap or are unsorted",
                    i + 1
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(d: f64) -> Self {
        Self {
            segments: vec![NoiseSegment {
                t_start: 0.0,
                t_stop: f64::INFINITY,
                d,
            }],
        }
    }

    pub fn segments(&self) -> &[NoiseSegment] {
        &self.segments
    }

    #[inline]
    pub fn strength_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| s.t_start <= t && t < s.t_stop)
            .map_or(0.0, |s| s.d)
    }

    /// `t_start:t_stop:D` entries joined by commas.
    pub fn encode(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}:{}:{}", s.t_start, s.t_stop, s.d);
        }
        out
    }

    pub fn decode(text: &str) -> Result<Self, SdeError> {
        let mut segments = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let fields: Vec<&str> = item.split(':').collect();
            if fields.len() != 3 {
                return Err(SdeError::InvalidSchedule(format!("malformed segment `{item}`")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| SdeError::InvalidSchedule(format!("bad number `{s}` in `{item}`")))
            };
            segments.push(NoiseSegment {
                t_start: parse(fields[0])?,
                t_stop: parse(fields[1])?,
                d: parse(fields[2])?,
            });
        }
        Self::new(segments)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub config: IntegratorConfig,
    pub schedule: NoiseSchedule,
    pub params: SystemParams,
    /// Noise stream index within the master seed.
    pub stream: u64,
}

impl TrajectoryMeta {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let mut kv = self.config.key_values();
        kv.push(("stream", self.stream.to_string()));
        kv.push(("noise_schedule", self.schedule.encode()));
        kv.extend(self.params.key_values());
        kv
    }

    /// FNV-1a hash of the `key=value` record.
    pub fn config_hash(&self) -> u64 {
        let mut text = String::new();
        for (k, v) in self.key_values() {
            let _ = writeln!(text, "{k}={v}");
        }
        fnv1a(text.as_bytes())
    }

    pub fn write_sidecar<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (k, v) in self.key_values() {
            writeln!(w, "{k}={v}")?;
        }
        writeln!(w, "config_hash={:016x}", self.config_hash())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Decimated time series on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Present for the full model only.
    pub alpha: Option<Vec<Complex64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample_interval(&self) -> f64 {
        self.meta.config.sample_interval()
    }

    /// CSV with header `t,x,p[,re_alpha,im_alpha]`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        match &self.alpha {
            Some(_) => writeln!(w, "t,x,p,re_alpha,im_alpha")?,
            None => writeln!(w, "t,x,p")?,
        }
        for i in 0..self.len() {
            write!(w, "{:.16e},{:.16e},{:.16e}", self.times[i], self.x[i], self.p[i])?;
            if let Some(alpha) = &self.alpha {
                write!(w, ",{:.16e},{:.16e}", alpha[i].re, alpha[i].im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Time-dependent drive terms, cached between the end of one step and the
/// start of the next.
#[derive(Debug, Clone, Copy)]
struct Drive {
    force: f64,
    intensity_numerator: f64,
    optical_signal: Complex64,
}

impl Drive {
    #[inline]
    fn at(t: f64, model: ModelKind, params: &SystemParams) -> Self {
        let force = params.force(t);
        match model {
            ModelKind::Full4D => Drive {
                force,
                intensity_numerator: 0.0,
                optical_signal: Complex64::from_polar(params.e_s, params.delta_s * t),
            },
            ModelKind::Adiabatic2D => Drive {
                force,
                intensity_numerator: params.drive_intensity(t),
                optical_signal: Complex64::new(0.0, 0.0),
            },
        }
    }
}

type Vec4 = [f64; 4];

#[inline]
fn drift(model: ModelKind, y: &Vec4, drive: &Drive, params: &SystemParams) -> Vec4 {
    let [ar, ai, x, p] = *y;
    let detuning = params.delta_c + params.g * x * x;
    let dx = params.omega_m * p;
    match model {
        ModelKind::Full4D => {
            // d(alpha)/dt = -(i detuning + kappa) alpha - i E_c - i E_s e^{i delta t}
            let dar = -params.kappa * ar + detuning * ai + drive.optical_signal.im;
            let dai = -detuning * ar - params.kappa * ai - params.e_c - drive.optical_signal.re;
            let intensity = ar * ar + ai * ai;
            let dp = -params.gamma_m * p - params.omega_m * x - 2.0 * params.g * intensity * x - drive.force;
            [dar, dai, dx, dp]
        }
        ModelKind::Adiabatic2D => {
            let intensity =
                drive.intensity_numerator / (detuning * detuning + params.kappa * params.kappa);
            let dp = -params.gamma_m * p - params.omega_m * x - 2.0 * params.g * intensity * x - drive.force;
            [0.0, 0.0, dx, dp]
        }
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn advance(
    scheme: Scheme,
    model: ModelKind,
    y: &Vec4,
    dt: f64,
    kick: f64,
    now: &Drive,
    next: &Drive,
    params: &SystemParams,
) -> Vec4 {
    let f0 = drift(model, y, now, params);
    let mut out = [0.0; 4];
    match scheme {
        Scheme::EulerMaruyama => {
            for k in 0..4 {
                out[k] = y[k] + f0[k] * dt;
            }
        }
        Scheme::StochasticHeun => {
            let mut pred = [0.0; 4];
            for k in 0..4 {
                pred[k] = y[k] + f0[k] * dt;
            }
            pred[3] += kick;
            let f1 = drift(model, &pred, next, params);
            for k in 0..4 {
                out[k] = y[k] + 0.5 * (f0[k] + f1[k]) * dt;
            }
        }
    }
    out[3] += kick;
    out
}

fn to_vec(s: &SystemState) -> Vec4 {
    [s.alpha.re, s.alpha.im, s.x, s.p]
}

fn to_state(y: &Vec4, t: f64) -> SystemState {
    SystemState::new(Complex64::new(y[0], y[1]), y[2], y[3], t)
}

fn step_public(
    scheme: Scheme,
    state: &SystemState,
    dt: f64,
    d: f64,
    dw: f64,
    model: ModelKind,
    params: &SystemParams,
) -> Result<SystemState, SdeError> {
    let now = Drive::at(state.t, model, params);
    let next = Drive::at(state.t + dt, model, params);
    let kick = (2.0 * d).sqrt() * dw;
    let y = advance(scheme, model, &to_vec(state), dt, kick, &now, &next, params);
    let out = to_state(&y, state.t + dt);
    if !out.is_finite() {
        return Err(SdeError::Divergence {
            t: out.t,
            state: out,
            last_finite: *state,
        });
    }
    Ok(out)
}

/// Euler–Maruyama step. `dw` is the Wiener increment over the step
/// (variance `dt`); the momentum receives `sqrt(2 D) dw`.
pub fn em_step(
    state: &SystemState,
    dt: f64,
    d: f64,
    dw: f64,
    model: ModelKind,
    params: &SystemParams,
) -> Result<SystemState, SdeError> {
    step_public(Scheme::EulerMaruyama, state, dt, d, dw, model, params)
}

/// Stochastic Heun (predictor-corrector) step sharing the noise increment
/// convention of [`em_step`].
pub fn heun_step(
    state: &SystemState,
    dt: f64,
    d: f64,
    dw: f64,
    model: ModelKind,
    params: &SystemParams,
) -> Result<SystemState, SdeError> {
    step_public(Scheme::StochasticHeun, state, dt, d, dw, model, params)
}

/// Integrate one realization on noise stream 0 of `config.seed`.
pub fn simulate(
    config: &IntegratorConfig,
    schedule: &NoiseSchedule,
    params: &SystemParams,
) -> Result<Trajectory, SdeError> {
    simulate_stream(config, schedule, params, 0)
}

/// Integrate one realization on an explicit noise stream.
pub fn simulate_stream(
    config: &IntegratorConfig,
    schedule: &NoiseSchedule,
    params: &SystemParams,
    stream: u64,
) -> Result<Trajectory, SdeError> {
    config.validate(params)?;
    let mut noise = NoiseStream::new(config.seed, stream);
    let n_steps = config.n_steps();
    let n_samples = config.n_samples();
    let dt = config.dt;
    let sqrt_dt = dt.sqrt();
    let model = config.model;
    let keep_alpha = model == ModelKind::Full4D;

    let mut times = Vec::with_capacity(n_samples);
    let mut xs = Vec::with_capacity(n_samples);
    let mut ps = Vec::with_capacity(n_samples);
    let mut alphas = Vec::with_capacity(if keep_alpha { n_samples } else { 0 });

    let t0 = config.initial.t;
    let mut y = to_vec(&config.initial);
    let mut record = |y: &Vec4, t: f64| {
        times.push(t);
        xs.push(y[2]);
        ps.push(y[3]);
        if keep_alpha {
            alphas.push(Complex64::new(y[0], y[1]));
        }
    };
    record(&y, t0);

    let mut now = Drive::at(t0, model, params);
    for n in 0..n_steps {
        let t = t0 + n as f64 * dt;
        let t_next = t0 + (n + 1) as f64 * dt;
        let next = Drive::at(t_next, model, params);
        let noise_amp = (2.0 * schedule.strength_at(t)).sqrt();
        let kick = noise_amp * sqrt_dt * noise.standard_normal();
        let y_next = advance(config.scheme, model, &y, dt, kick, &now, &next, params);
        if !y_next.iter().all(|v| v.is_finite()) {
            return Err(SdeError::Divergence {
                t: t_next,
                state: to_state(&y_next, t_next),
                last_finite: to_state(&y, t),
            });
        }
        y = y_next;
        now = next;
        if (n + 1) % config.decimate == 0 {
            record(&y, t_next);
        }
    }

    Ok(Trajectory {
        times,
        x: xs,
        p: ps,
        alpha: keep_alpha.then_some(alphas),
        meta: TrajectoryMeta {
            config: *config,
            schedule: schedule.clone(),
            params: *params,
            stream,
        },
    })
}

/// Realizations `0..n` of the master seed in `config.seed`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    /// `(realization index, error)` for realizations that diverged.
    pub divergences: Vec<(usize, SdeError)>,
}

/// Largest tolerated fraction of diverging realizations.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;

/// Parallel map over realizations `0..n`; realization `i` uses noise stream
/// `i`, so the result does not depend on scheduling or worker count.
pub fn ensemble(
    config: &IntegratorConfig,
    schedule: &NoiseSchedule,
    params: &SystemParams,
    n_realizations: usize,
) -> Result<Ensemble, SdeError> {
    ensemble_range(config, schedule, params, 0..n_realizations)
}

/// Like [`ensemble`] for an arbitrary range of realization indices.
pub fn ensemble_range(
    config: &IntegratorConfig,
    schedule: &NoiseSchedule,
    params: &SystemParams,
    indices: std::ops::Range<usize>,
) -> Result<Ensemble, SdeError> {
    if indices.is_empty() {
        return Err(SdeError::InvalidConfig("ensemble needs at least one realization".into()));
    }
    config.validate(params)?;
    let total = indices.len();
    let results: Vec<(usize, Result<Trajectory, SdeError>)> = indices
        .into_par_iter()
        .map(|i| (i, simulate_stream(config, schedule, params, i as u64)))
        .collect();
    let mut trajectories = Vec::with_capacity(total);
    let mut divergences = Vec::new();
    for (i, r) in results {
        match r {
            Ok(t) => trajectories.push(t),
            Err(e) => divergences.push((i, e)),
        }
    }
    if divergences.len() as f64 > MAX_DIVERGED_FRACTION * total as f64 {
        let (first_index, first) = divergences.swap_remove(0);
        return Err(SdeError::EnsembleDivergence {
            diverged: divergences.len() + 1,
            total,
            first_index,
            first: Box::new(first),
        });
    }
    Ok(Ensemble {
        trajectories,
        divergences,
    })
}

/// Run `f` on a dedicated pool of `jobs` worker threads (`0` = rayon default).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
