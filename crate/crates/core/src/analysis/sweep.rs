//! Ensemble SNR estimates and their dependence on noise strength and on
//! the relative phase of the two signals.

use std::f64::consts::PI;
use std::io::{self, Write};

use super::spectrum::{periodograms, snr_at, spectrum_from_sums, SnrResult, WelchSettings};
use super::wells::Separatrices;
use super::AnalysisError;
use crate::params::SystemParams;
use crate::sde::{ensemble, IntegratorConfig, NoiseSchedule, Trajectory};

/// Fewest noise strengths accepted by [`snr_vs_noise`].
pub const MIN_NOISE_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub config: IntegratorConfig,
    pub n_realizations: usize,
    pub welch: WelchSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub snr_db: f64,
    pub err_db: f64,
    pub floored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: &'static str,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn argmax_index(&self) -> usize {
        self.points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.snr_db.total_cmp(&b.1.snr_db))
            .map_or(0, |(i, _)| i)
    }

    pub fn argmax(&self) -> f64 {
        self.points[self.argmax_index()].value
    }

    pub fn max_db(&self) -> f64 {
        self.points[self.argmax_index()].snr_db
    }

    pub fn min_db(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.snr_db)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn peak_to_peak(&self) -> f64 {
        self.max_db() - self.min_db()
    }

    pub fn mean_db(&self) -> f64 {
        self.points.iter().map(|p| p.snr_db).sum::<f64>() / self.points.len() as f64
    }

    /// Values at the interior local maxima (strictly above both neighbours).
    pub fn interior_maxima(&self) -> Vec<f64> {
        self.points
            .windows(3)
            .filter(|w| w[1].snr_db > w[0].snr_db && w[1].snr_db > w[2].snr_db)
            .map(|w| w[1].value)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "param,snr_db,err_db")?;
        for p in &self.points {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p.value, p.snr_db, p.err_db)?;
        }
        Ok(())
    }
}

/// SNR of the realization-averaged spectrum at `f_target`, with a jackknife
/// (leave-one-realization-out) standard error in `err_db`.
pub fn ensemble_snr(
    trajs: &[Trajectory],
    welch: &WelchSettings,
    f_target: f64,
) -> Result<SnrResult, AnalysisError> {
    let Some(first) = trajs.first() else {
        return Err(AnalysisError::InvalidSpectrum("no trajectories".into()));
    };
    let dt = first.sample_interval();
    let per: Vec<_> = trajs
        .iter()
        .map(|t| periodograms(&t.x, dt, welch))
        .collect::<Result<_, _>>()?;
    let bins = per[0].sum.len();
    let mut total = vec![0.0; bins];
    let mut segments = 0;
    let mut variance = 0.0;
    for pg in &per {
        for (a, b) in total.iter_mut().zip(&pg.sum) {
            *a += b;
        }
        segments += pg.n_segments;
        variance += pg.variance_sum;
    }
    let mut result = snr_at(&spectrum_from_sums(&total, segments, variance, dt, welch), f_target)?;

    let n = per.len();
    if n >= 2 {
        let mut leave_out = Vec::with_capacity(n);
        let mut partial = vec![0.0; bins];
        for pg in &per {
            for ((p, t), s) in partial.iter_mut().zip(&total).zip(&pg.sum) {
                *p = t - s;
            }
            let spec = spectrum_from_sums(
                &partial,
                segments - pg.n_segments,
                variance - pg.variance_sum,
                dt,
                welch,
            );
            leave_out.push(snr_at(&spec, f_target)?.snr_db);
        }
        let mean = leave_out.iter().sum::<f64>() / n as f64;
        let ss: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
        result.err_db = ((n - 1) as f64 / n as f64 * ss).sqrt();
    }
    Ok(result)
}

fn signal_frequency(params: &SystemParams) -> f64 {
    params.omega_f / (2.0 * PI)
}

fn point_at(
    params: &SystemParams,
    value: f64,
    settings: &SweepSettings,
) -> Result<SweepPoint, AnalysisError> {
    let schedule = NoiseSchedule::constant(params.noise_d);
    let runs = ensemble(&settings.config, &schedule, params, settings.n_realizations)?;
    let snr = ensemble_snr(&runs.trajectories, &settings.welch, signal_frequency(params))?;
    Ok(SweepPoint {
        value,
        snr_db: snr.snr_db,
        err_db: snr.err_db,
        floored: snr.floored,
    })
}

/// Ensemble SNR at the mechanical signal frequency for each noise strength.
/// Every grid point reuses the same noise streams.
pub fn snr_vs_noise(
    params: &SystemParams,
    d_grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult, AnalysisError> {
    if d_grid.len() < MIN_NOISE_GRID {
        return Err(AnalysisError::InvalidSweep(format!(
            "noise grid has {} points, need at least {MIN_NOISE_GRID}",
            d_grid.len()
        )));
    }
    Separatrices::from_params(params)?;
    let points = d_grid
        .iter()
        .map(|&d| {
            let p = SystemParams {
                noise_d: d,
                ..*params
            };
            point_at(&p, d, settings)
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepResult {
        parameter: "D",
        points,
    })
}

/// Ensemble SNR at the mechanical signal frequency as a function of the
/// mechanical signal phase `phi_f`, both signals on.
pub fn snr_vs_phase(
    params: &SystemParams,
    phase_grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult, AnalysisError> {
    if !(params.e_s > 0.0 && params.f_s > 0.0) {
        return Err(AnalysisError::InvalidSweep(
            "phase sweep needs both E_s and F_s nonzero".into(),
        ));
    }
    if phase_grid.is_empty() {
        return Err(AnalysisError::InvalidSweep("empty phase grid".into()));
    }
    let points = phase_grid
        .iter()
        .map(|&phi| {
            let p = SystemParams {
                phi_f: phi,
                ..*params
            };
            point_at(&p, phi, settings)
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepResult {
        parameter: "phi_f",
        points,
    })
}
