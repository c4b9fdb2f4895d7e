//! Flat `key = value` run configuration and the named presets.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use optomech_sr::analysis::{WelchSettings, Window, DEFAULT_PEAK_THRESHOLD_DB};
use optomech_sr::model::{self, SweepParameter};
use optomech_sr::sde::{IntegratorConfig, ModelKind, NoiseSchedule, Scheme};
use optomech_sr::{SystemParams, SystemState};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown preset `{0}` (try --list-presets)")]
    UnknownPreset(String),
}

/// Sample interval of the scaled runs that feed SNR sweeps: 125 steps of 1/32.
pub const SCALED_SWEEP_DECIMATE: usize = 125;
/// Sample interval of the beating and phase runs: 625 steps of 1/32.
pub const SPECTRAL_DECIMATE: usize = 625;

/// Signal frequency `omega_f / 2pi` of the reference operating point.
pub const REFERENCE_FREQUENCY: f64 = 0.0004;
/// Five times faster, for runs that fit a desk-side budget.
pub const SCALED_FREQUENCY: f64 = 0.002;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub scheme: Scheme,
    pub model: ModelKind,
    /// `None` selects the model's default step.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub decimate: usize,
    pub seed: u64,
    pub x0: f64,
    pub p0: f64,
    /// Unset components default to the steady field at `x0`.
    pub alpha0_re: Option<f64>,
    pub alpha0_im: Option<f64>,
    /// `None` means constant noise at `params.noise_d`.
    pub noise_schedule: Option<NoiseSchedule>,
    pub realizations: usize,
    pub window: Window,
    pub segment_len: usize,
    pub overlap: f64,
    pub peak_threshold_db: f64,
    pub d_grid: Vec<f64>,
    pub phase_grid: Vec<f64>,
    pub sweep_param: SweepParameter,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    pub potential_times: Vec<f64>,
    /// Write a well-transition table next to the trajectory.
    pub symbolize: bool,
    /// Add a `cos((omega_f - delta_s) t)` column to the trajectory.
    pub beat_reference: bool,
    pub out: PathBuf,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("paper-fig3", "reference operating point, both signals, D = 0.09"),
    ("paper-fig3-stages", "noise off then on, mechanical signal only; symbolized"),
    ("fig2", "stability diagram over E_c in [3, 8]"),
    ("fig2-detuning", "region sequence over the detuning at E_c = 5.8"),
    ("fig4", "potential snapshots over one signal period"),
    ("fig5-scaled", "SNR versus D, F_s = 0.15, signal at 0.002 x 2pi"),
    ("fig5-paper", "SNR versus D at the unscaled frequency (long-running)"),
    ("fig6a-scaled", "both signals in phase, symbolized trajectory"),
    ("fig6b-scaled", "spectrum, delta = omega_f"),
    ("fig6c-scaled", "trajectory with beat reference, omega_f - delta = omega_f / 10"),
    ("fig6d-scaled", "spectrum, omega_f - delta = omega_f / 10"),
    ("fig6b-paper", "spectrum, delta = omega_f, unscaled frequency (long-running)"),
    ("fig6d-paper", "beating spectrum at the unscaled frequency (long-running)"),
    ("fig7-scaled", "SNR versus phase, delta = omega_f"),
    ("fig7-beat-scaled", "SNR versus phase, omega_f - delta = omega_f / 10"),
    ("fig7-paper", "SNR versus phase at the unscaled frequency (long-running)"),
    ("fig7-beat-paper", "beating phase sweep at the unscaled frequency (long-running)"),
];

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` phases `k 2pi / n`, `k = 0..n`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

fn with_frequency(params: SystemParams, f: f64, beat: bool) -> SystemParams {
    let omega = f * 2.0 * PI;
    SystemParams {
        omega_f: omega,
        delta_s: if beat { 0.9 * omega } else { omega },
        ..params
    }
}

fn beating_params() -> SystemParams {
    SystemParams {
        e_s: 0.25,
        f_s: 0.08,
        noise_d: 0.05,
        ..SystemParams::synchronization()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let period = 1.0 / REFERENCE_FREQUENCY;
        Self {
            params: SystemParams::synchronization(),
            scheme: Scheme::StochasticHeun,
            model: ModelKind::Adiabatic2D,
            dt: None,
            t_end: 4.0 * period,
            decimate: 32,
            seed: 1,
            x0: 0.0,
            p0: 0.0,
            alpha0_re: None,
            alpha0_im: None,
            noise_schedule: None,
            realizations: 16,
            window: Window::Hann,
            segment_len: 2048,
            overlap: 0.5,
            peak_threshold_db: DEFAULT_PEAK_THRESHOLD_DB,
            d_grid: linspace(0.02, 0.25, 8),
            phase_grid: phase_grid(12),
            sweep_param: SweepParameter::ControlAmplitude,
            sweep_min: 3.0,
            sweep_max: 8.0,
            sweep_points: 500,
            x_min: -5.0,
            x_max: 5.0,
            x_points: 1001,
            potential_times: vec![0.0, 0.25 * period, 0.5 * period, 0.75 * period],
            symbolize: false,
            beat_reference: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let base = Self::default();
        let scaled_period = 1.0 / SCALED_FREQUENCY;
        let reference_period = 1.0 / REFERENCE_FREQUENCY;
        let spectral = |params: SystemParams, period: f64| Self {
            params,
            t_end: 400.0 * scaled_period.max(period),
            decimate: SPECTRAL_DECIMATE,
            realizations: 16,
            ..base.clone()
        };
        let cfg = match name {
            "paper-fig3" | "fig4" => base,
            "paper-fig3-stages" => {
                let switch = 5.0 * reference_period;
                Self {
                    params: SystemParams {
                        e_s: 0.0,
                        ..SystemParams::synchronization()
                    },
                    t_end: 2.0 * switch,
                    noise_schedule: Some(
                        NoiseSchedule::decode(&format!("{switch}:inf:0.09"))
                            .expect("static schedule"),
                    ),
                    symbolize: true,
                    ..base
                }
            }
            "fig2" => Self {
                params: SystemParams::stability_diagram(5.8),
                ..base
            },
            "fig2-detuning" => Self {
                params: SystemParams::stability_diagram(5.8),
                sweep_param: SweepParameter::Detuning,
                sweep_min: -2.0,
                sweep_max: 6.0,
                sweep_points: 401,
                ..base
            },
            "fig5-scaled" | "fig5-paper" => {
                let f = if name == "fig5-scaled" { SCALED_FREQUENCY } else { REFERENCE_FREQUENCY };
                Self {
                    params: with_frequency(
                        SystemParams {
                            e_s: 0.0,
                            ..SystemParams::synchronization()
                        },
                        f,
                        false,
                    ),
                    t_end: 64.0 / f,
                    decimate: (SCALED_SWEEP_DECIMATE as f64 * SCALED_FREQUENCY / f).round() as usize,
                    realizations: 32,
                    ..base
                }
            }
            "fig6a-scaled" | "fig6c-scaled" => Self {
                params: with_frequency(beating_params(), SCALED_FREQUENCY, name == "fig6c-scaled"),
                t_end: 20.0 * scaled_period,
                decimate: 32,
                symbolize: name == "fig6a-scaled",
                beat_reference: name == "fig6c-scaled",
                ..base
            },
            "fig6b-scaled" | "fig6d-scaled" | "fig7-scaled" | "fig7-beat-scaled" => {
                let beat = name == "fig6d-scaled" || name == "fig7-beat-scaled";
                spectral(with_frequency(beating_params(), SCALED_FREQUENCY, beat), scaled_period)
            }
            "fig6b-paper" | "fig6d-paper" | "fig7-paper" | "fig7-beat-paper" => {
                let beat = name == "fig6d-paper" || name == "fig7-beat-paper";
                Self {
                    decimate: SPECTRAL_DECIMATE * 5,
                    ..spectral(with_frequency(beating_params(), REFERENCE_FREQUENCY, beat), reference_period)
                }
            }
            _ => return Err(ConfigError::UnknownPreset(name.to_string())),
        };
        Ok(cfg)
    }

    /// Apply `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: line.to_string(),
                });
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        match pair.split_once('=') {
            Some((k, v)) => self.set(k.trim(), v.trim()),
            None => Err(ConfigError::Syntax {
                line: 0,
                text: pair.to_string(),
            }),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        let float = || value.parse::<f64>().map_err(|_| bad("not a number"));
        let count = || value.parse::<usize>().map_err(|_| bad("not a non-negative integer"));
        let flag = || value.parse::<bool>().map_err(|_| bad("expected true or false"));
        let grid = || -> Result<Vec<f64>, ConfigError> {
            value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad("not a comma-separated list of numbers")))
                .collect()
        };

        if let Some(field) = self.params.field_mut(key) {
            *field = float()?;
            return Ok(());
        }
        match key {
            "scheme" => self.scheme = Scheme::parse(value).ok_or_else(|| bad("expected em or heun"))?,
            "model" => {
                self.model = ModelKind::parse(value).ok_or_else(|| bad("expected full or adiabatic"))?
            }
            "dt" => self.dt = Some(float()?),
            "t_end" => self.t_end = float()?,
            "decimate" => self.decimate = count()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("not an unsigned integer"))?,
            "x0" => self.x0 = float()?,
            "p0" => self.p0 = float()?,
            "alpha0_re" => self.alpha0_re = Some(float()?),
            "alpha0_im" => self.alpha0_im = Some(float()?),
            "noise_schedule" => {
                self.noise_schedule = if value.is_empty() {
                    None
                } else {
                    Some(NoiseSchedule::decode(value).map_err(|e| bad(&e.to_string()))?)
                }
            }
            "realizations" => self.realizations = count()?,
            "window" => self.window = Window::parse(value).ok_or_else(|| bad("expected hann or rect"))?,
            "segment_len" => self.segment_len = count()?,
            "overlap" => self.overlap = float()?,
            "peak_threshold_db" => self.peak_threshold_db = float()?,
            "d_grid" => self.d_grid = grid()?,
            "phase_grid" => self.phase_grid = grid()?,
            "sweep_param" => {
                self.sweep_param = match value {
                    "E_c" => SweepParameter::ControlAmplitude,
                    "delta_c" => SweepParameter::Detuning,
                    _ => return Err(bad("expected E_c or delta_c")),
                }
            }
            "sweep_min" => self.sweep_min = float()?,
            "sweep_max" => self.sweep_max = float()?,
            "sweep_points" => self.sweep_points = count()?,
            "x_min" => self.x_min = float()?,
            "x_max" => self.x_max = float()?,
            "x_points" => self.x_points = count()?,
            "potential_times" => self.potential_times = grid()?,
            "symbolize" => self.symbolize = flag()?,
            "beat_reference" => self.beat_reference = flag()?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn initial_state(&self) -> SystemState {
        let rest = model::steady_state_field(self.x0, &self.params);
        let alpha = Complex64::new(
            self.alpha0_re.unwrap_or(rest.re),
            self.alpha0_im.unwrap_or(rest.im),
        );
        SystemState::new(alpha, self.x0, self.p0, 0.0)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.scheme,
            dt: self.dt.unwrap_or_else(|| self.model.default_dt()),
            t_end: self.t_end,
            decimate: self.decimate,
            model: self.model,
            initial: self.initial_state(),
            seed: self.seed,
        }
    }

    pub fn schedule(&self) -> NoiseSchedule {
        self.noise_schedule
            .clone()
            .unwrap_or_else(|| NoiseSchedule::constant(self.params.noise_d))
    }

    pub fn welch(&self) -> WelchSettings {
        WelchSettings {
            window: self.window,
            segment_len: self.segment_len,
            overlap: self.overlap,
        }
    }

    pub fn sweep_grid(&self) -> Vec<f64> {
        linspace(self.sweep_min, self.sweep_max, self.sweep_points)
    }

    pub fn x_grid(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.x_points)
    }

    /// Every key with its resolved value, in a fixed order. Feeding the
    /// result back through [`RunConfig::apply_text`] reproduces `self`
    /// up to the defaults it resolves.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let integ = self.integrator();
        let mut kv = self.params.key_values();
        kv.extend(integ.key_values());
        kv.push(("noise_schedule", self.schedule().encode()));
        kv.extend([
            ("realizations", self.realizations.to_string()),
            ("window", self.window.name().to_string()),
            ("segment_len", self.segment_len.to_string()),
            ("overlap", self.overlap.to_string()),
            ("peak_threshold_db", self.peak_threshold_db.to_string()),
            ("d_grid", join(&self.d_grid)),
            ("phase_grid", join(&self.phase_grid)),
            ("sweep_param", self.sweep_param.key().to_string()),
            ("sweep_min", self.sweep_min.to_string()),
            ("sweep_max", self.sweep_max.to_string()),
            ("sweep_points", self.sweep_points.to_string()),
            ("x_min", self.x_min.to_string()),
            ("x_max", self.x_max.to_string()),
            ("x_points", self.x_points.to_string()),
            ("potential_times", join(&self.potential_times)),
            ("symbolize", self.symbolize.to_string()),
            ("beat_reference", self.beat_reference.to_string()),
            ("out", self.out.display().to_string()),
        ]);
        kv
    }

    pub fn to_text(&self) -> String {
        let mut text = String::new();
        for (k, v) in self.key_values() {
            let _ = writeln!(text, "{k} = {v}");
        }
        text
    }
}
