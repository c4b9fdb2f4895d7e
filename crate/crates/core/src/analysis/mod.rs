//! Observables extracted from trajectories: well occupation and hopping,
//! power spectra, signal-to-noise ratios and parameter sweeps.

mod spectrum;
mod sweep;
mod wells;

use thiserror::Error;

use crate::model::{ModelError, Region};
use crate::sde::SdeError;

pub use spectrum::{
    detect_peaks, psd, psd_series, snr_at, write_peaks_csv, Peak, SnrResult, Spectrum, WelchSettings,
    Window, BACKGROUND_BINS, DEFAULT_PEAK_THRESHOLD_DB, MIN_BACKGROUND_BINS, PEAK_CORE_HALF_WIDTH,
};
pub use sweep::{
    ensemble_snr, snr_vs_noise, snr_vs_phase, SweepPoint, SweepResult, SweepSettings, MIN_NOISE_GRID,
};
pub use wells::{
    direction_stats, direction_stats_pooled, directional_exit_rates, switching_rate, symbolize,
    symbolize_trajectory, DirectionStats, RateEstimate, Residence, Separatrices, Symbolization,
    Transition, Well, GUARD_FRACTION, MIN_DIRECTION_EVENTS, MIN_RESIDENCES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("well symbolization needs a tristable system, found {}", .0.name())]
    NotTristable(Region),
    #[error("too few events: found {found}, need at least {required}")]
    TooFewEvents { found: usize, required: usize },
    #[error("segment of {segment} samples is longer than the series ({series} samples)")]
    SegmentTooLong { segment: usize, series: usize },
    #[error("frequency {f} outside [0, {nyquist}]")]
    OutOfRange { f: f64, nyquist: f64 },
    #[error("invalid spectrum request: {0}")]
    InvalidSpectrum(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sde(#[from] SdeError),
}
