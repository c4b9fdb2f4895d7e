//! Welch power spectra, signal-to-noise ratios and peak detection.
//!
//! Frequencies are in cycles per unit time (`f = omega / 2 pi`). The PSD is
//! one-sided and normalized so that `sum(psd) * df` equals the mean over
//! segments of `sum((w x)^2) / sum(w^2)` for the detrended segments `x`.

use std::f64::consts::PI;
use std::io::{self, Write};

use rustfft::{num_complex::Complex, FftPlanner};

use super::AnalysisError;
use crate::sde::Trajectory;

/// Bins on each side of a peak excluded from its background estimate.
pub const PEAK_CORE_HALF_WIDTH: usize = 2;
/// Number of neighbouring bins whose median forms the background.
pub const BACKGROUND_BINS: usize = 16;
/// Fewest background bins accepted by [`snr_at`].
pub const MIN_BACKGROUND_BINS: usize = 8;
pub const DEFAULT_PEAK_THRESHOLD_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rect,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rect => "rect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hann" => Some(Window::Hann),
            "rect" => Some(Window::Rect),
            _ => None,
        }
    }

    /// Periodic window coefficients.
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchSettings {
    pub window: Window,
    /// Samples per segment; a power of two.
    pub segment_len: usize,
    /// Fractional overlap of consecutive segments in `[0, 1)`.
    pub overlap: f64,
}

impl WelchSettings {
    pub fn hann(segment_len: usize) -> Self {
        Self {
            window: Window::Hann,
            segment_len,
            overlap: 0.5,
        }
    }

    fn hop(&self) -> usize {
        let overlap = (self.overlap * self.segment_len as f64).round() as usize;
        (self.segment_len - overlap).max(1)
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if !self.segment_len.is_power_of_two() || self.segment_len < 2 {
            return Err(AnalysisError::InvalidSpectrum(format!(
                "segment length {} is not a power of two >= 2",
                self.segment_len
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(AnalysisError::InvalidSpectrum(format!(
                "overlap {} outside [0, 1)",
                self.overlap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// `k * resolution` for `k = 0..=segment_len / 2`.
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub n_segments: usize,
    pub window: Window,
    pub resolution: f64,
    /// Mean windowed variance of the detrended segments; equals
    /// `sum(psd) * resolution`.
    pub windowed_variance: f64,
}

impl Spectrum {
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }

    pub fn nyquist(&self) -> f64 {
        *self.freqs.last().unwrap_or(&0.0)
    }

    pub fn bin_of(&self, f: f64) -> usize {
        (f / self.resolution).round() as usize
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "freq,psd")?;
        for (f, s) in self.freqs.iter().zip(&self.psd) {
            writeln!(w, "{f:.16e},{s:.16e}")?;
        }
        Ok(())
    }
}

/// Running sum of windowed periodograms for one series.
#[derive(Debug, Clone)]
pub(crate) struct Periodograms {
    pub sum: Vec<f64>,
    pub n_segments: usize,
    pub variance_sum: f64,
}

pub(crate) fn periodograms(
    series: &[f64],
    dt: f64,
    settings: &WelchSettings,
) -> Result<Periodograms, AnalysisError> {
    settings.validate()?;
    let n = settings.segment_len;
    if series.len() < n {
        return Err(AnalysisError::SegmentTooLong {
            segment: n,
            series: series.len(),
        });
    }
    let window = settings.window.coefficients(n);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;
    let mut sum = vec![0.0; half + 1];
    let mut variance_sum = 0.0;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut n_segments = 0;
    let scale = dt / window_power;
    let mut start = 0;
    while start + n <= series.len() {
        let seg = &series[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        let mut windowed_energy = 0.0;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            let y = (v - mean) * w;
            windowed_energy += y * y;
            *b = Complex::new(y, 0.0);
        }
        fft.process(&mut buf);
        for (k, s) in sum.iter_mut().enumerate() {
            let one_sided = if k == 0 || k == half { 1.0 } else { 2.0 };
            *s += one_sided * scale * buf[k].norm_sqr();
        }
        variance_sum += windowed_energy / window_power;
        n_segments += 1;
        start += settings.hop();
    }
    Ok(Periodograms {
        sum,
        n_segments,
        variance_sum,
    })
}

pub(crate) fn spectrum_from_sums(
    sum: &[f64],
    n_segments: usize,
    variance_sum: f64,
    dt: f64,
    settings: &WelchSettings,
) -> Spectrum {
    let n = settings.segment_len;
    let resolution = 1.0 / (n as f64 * dt);
    Spectrum {
        freqs: (0..sum.len()).map(|k| k as f64 * resolution).collect(),
        psd: sum.iter().map(|s| s / n_segments as f64).collect(),
        n_segments,
        window: settings.window,
        resolution,
        windowed_variance: variance_sum / n_segments as f64,
    }
}

/// Welch average over segments of every series, sampled at interval `dt`.
pub fn psd_series<S: AsRef<[f64]>>(
    series: &[S],
    dt: f64,
    settings: &WelchSettings,
) -> Result<Spectrum, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::InvalidSpectrum("no input series".into()));
    }
    let len = series[0].as_ref().len();
    let half = settings.segment_len / 2;
    let mut sum = vec![0.0; half + 1];
    let mut n_segments = 0;
    let mut variance_sum = 0.0;
    for s in series {
        if s.as_ref().len() != len {
            return Err(AnalysisError::InvalidSpectrum("series lengths differ".into()));
        }
        let pg = periodograms(s.as_ref(), dt, settings)?;
        for (a, b) in sum.iter_mut().zip(&pg.sum) {
            *a += b;
        }
        n_segments += pg.n_segments;
        variance_sum += pg.variance_sum;
    }
    Ok(spectrum_from_sums(&sum, n_segments, variance_sum, dt, settings))
}

/// Welch spectrum of the membrane position across realizations and segments.
pub fn psd(trajs: &[Trajectory], settings: &WelchSettings) -> Result<Spectrum, AnalysisError> {
    let Some(first) = trajs.first() else {
        return Err(AnalysisError::InvalidSpectrum("no trajectories".into()));
    };
    let dt = first.sample_interval();
    if trajs.iter().any(|t| t.sample_interval() != dt) {
        return Err(AnalysisError::InvalidSpectrum("sampling intervals differ".into()));
    }
    let series: Vec<&[f64]> = trajs.iter().map(|t| t.x.as_slice()).collect();
    psd_series(&series, dt, settings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrResult {
    pub snr_db: f64,
    /// Peak power above the background.
    pub signal_power: f64,
    pub background: f64,
    pub f_target: f64,
    pub bin: usize,
    /// Standard error over the ensemble, when known.
    pub err_db: f64,
    /// The peak did not clear the background; `snr_db` was floored to 0.
    pub floored: bool,
}

/// Median of the nearest bins to `k0`, skipping DC and the peak core.
fn local_background(psd: &[f64], k0: usize) -> Option<(f64, usize)> {
    let last = psd.len() - 1;
    let mut candidates: Vec<usize> = (1..=last)
        .filter(|&k| k.abs_diff(k0) > PEAK_CORE_HALF_WIDTH)
        .collect();
    candidates.sort_by_key(|&k| (k.abs_diff(k0), k));
    candidates.truncate(BACKGROUND_BINS);
    if candidates.is_empty() {
        return None;
    }
    let mut values: Vec<f64> = candidates.iter().map(|&k| psd[k]).collect();
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let median = if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    };
    Some((median, m))
}

/// Peak height above the local median background at the bin nearest
/// `f_target`.
pub fn snr_at(spec: &Spectrum, f_target: f64) -> Result<SnrResult, AnalysisError> {
    if !(f_target >= 0.0 && f_target <= spec.nyquist()) {
        return Err(AnalysisError::OutOfRange {
            f: f_target,
            nyquist: spec.nyquist(),
        });
    }
    let bin = spec.bin_of(f_target);
    let (background, used) = local_background(&spec.psd, bin).unwrap_or((0.0, 0));
    if used < MIN_BACKGROUND_BINS {
        return Err(AnalysisError::InvalidSpectrum(format!(
            "only {used} background bins around {f_target}"
        )));
    }
    if background <= 0.0 {
        return Err(AnalysisError::InvalidSpectrum("background power is zero".into()));
    }
    let signal_power = spec.psd[bin] - background;
    let floored = signal_power <= 0.0;
    Ok(SnrResult {
        snr_db: if floored {
            0.0
        } else {
            10.0 * (signal_power / background).log10()
        },
        signal_power,
        background,
        f_target,
        bin,
        err_db: 0.0,
        floored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq: f64,
    pub height_db: f64,
}

/// Local maxima standing at least `threshold_db` above their local
/// background, highest first. DC and Nyquist bins are never reported.
pub fn detect_peaks(spec: &Spectrum, threshold_db: f64) -> Vec<Peak> {
    let psd = &spec.psd;
    if psd.len() < 3 {
        return Vec::new();
    }
    let mut peaks: Vec<Peak> = (1..psd.len() - 1)
        .filter(|&k| psd[k] > psd[k - 1] && psd[k] >= psd[k + 1])
        .filter_map(|k| {
            let (bg, _) = local_background(psd, k)?;
            if bg <= 0.0 {
                return None;
            }
            let height_db = 10.0 * (psd[k] / bg).log10();
            (height_db >= threshold_db).then_some(Peak {
                freq: spec.freqs[k],
                height_db,
            })
        })
        .collect();
    peaks.sort_by(|a, b| b.height_db.total_cmp(&a.height_db));
    peaks
}

pub fn write_peaks_csv<W: Write>(peaks: &[Peak], mut w: W) -> io::Result<()> {
    writeln!(w, "freq,height_db")?;
    for p in peaks {
        writeln!(w, "{:.16e},{:.16e}", p.freq, p.height_db)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseStream;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut s = NoiseStream::new(seed, 0);
        (0..n).map(|_| s.standard_normal()).collect()
    }

    #[test]
    fn parseval_holds_for_both_windows() {
        let x = white(5000, 3);
        for window in [Window::Hann, Window::Rect] {
            let settings = WelchSettings {
                window,
                segment_len: 256,
                overlap: 0.5,
            };
            let spec = psd_series(&[&x], 0.5, &settings).unwrap();
            assert!((spec.total_power() / spec.windowed_variance - 1.0).abs() < 1e-10);
            assert!(spec.psd.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn on_bin_sinusoid_concentrates_in_one_bin() {
        let n = 1024;
        let dt = 0.25;
        let f0 = 37.0 / (n as f64 * dt);
        let x: Vec<f64> = (0..4 * n).map(|i| (2.0 * PI * f0 * i as f64 * dt).sin()).collect();
        let settings = WelchSettings {
            window: Window::Rect,
            segment_len: n,
            overlap: 0.0,
        };
        let spec = psd_series(&[&x], dt, &settings).unwrap();
        let k = spec.bin_of(f0);
        assert_eq!(k, 37);
        assert!(spec.psd[k] * spec.resolution > 0.99 * spec.total_power());
    }

    #[test]
    fn white_noise_is_flat() {
        let x = white(64 * 256, 11);
        let settings = WelchSettings {
            window: Window::Rect,
            segment_len: 256,
            overlap: 0.0,
        };
        let spec = psd_series(&[&x], 1.0, &settings).unwrap();
        assert_eq!(spec.n_segments, 64);
        let mut v: Vec<f64> = spec.psd[1..spec.psd.len() - 1].to_vec();
        v.sort_by(f64::total_cmp);
        let median = v[v.len() / 2];
        assert!(v[v.len() - 1] / median < 10.0);
    }

    #[test]
    fn segment_too_long_is_an_error() {
        let x = white(100, 1);
        assert!(matches!(
            psd_series(&[&x], 1.0, &WelchSettings::hann(128)),
            Err(AnalysisError::SegmentTooLong { .. })
        ));
        assert!(psd_series(&[&x], 1.0, &WelchSettings::hann(48)).is_err());
    }

    #[test]
    fn snr_of_constructed_tone() {
        // unit-variance noise (PSD 2 dt one-sided) plus a tone whose bin power is 100x that
        let n = 512;
        let dt = 1.0;
        let k0 = 60;
        let f0 = k0 as f64 / n as f64;
        let noise_psd = 2.0 * dt;
        let segments = 256;
        let amplitude = (2.0 * 100.0 * noise_psd / (n as f64 * dt)).sqrt();
        let mut x = white(n * segments, 5);
        for (i, v) in x.iter_mut().enumerate() {
            *v += amplitude * (2.0 * PI * f0 * i as f64 * dt).cos();
        }
        let settings = WelchSettings {
            window: Window::Rect,
            segment_len: n,
            overlap: 0.0,
        };
        let spec = psd_series(&[&x], dt, &settings).unwrap();
        let r = snr_at(&spec, f0).unwrap();
        assert_eq!(r.bin, k0);
        assert!((r.snr_db - 20.0).abs() < 1.0, "snr {}", r.snr_db);
        assert!(!r.floored);
    }

    #[test]
    fn snr_outside_band_is_an_error() {
        let x = white(1024, 2);
        let spec = psd_series(&[&x], 1.0, &WelchSettings::hann(256)).unwrap();
        assert!(matches!(snr_at(&spec, 0.6), Err(AnalysisError::OutOfRange { .. })));
        assert!(snr_at(&spec, -0.1).is_err());
    }

    #[test]
    fn peaks_are_reported_at_bin_centres() {
        let n = 256;
        let dt = 1.0;
        let x: Vec<f64> = (0..n * 16)
            .map(|i| (2.0 * PI * 20.5 / n as f64 * i as f64).sin() + (2.0 * PI * 70.0 / n as f64 * i as f64).sin())
            .collect();
        let spec = psd_series(&[&x], dt, &WelchSettings::hann(n)).unwrap();
        let peaks = detect_peaks(&spec, DEFAULT_PEAK_THRESHOLD_DB);
        assert!(peaks.len() >= 2);
        let mut found: Vec<f64> = peaks.iter().map(|p| p.freq).collect();
        found.truncate(2);
        found.sort_by(f64::total_cmp);
        assert!((found[0] - 20.5 / n as f64).abs() <= spec.resolution / 2.0 + 1e-15);
        assert!((found[1] - 70.0 / n as f64).abs() <= spec.resolution / 2.0 + 1e-15);
    }
}
