//! Subcommand bodies. Each one computes all of its outputs in memory first,
//! so a failing run leaves the output directory untouched.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use optomech_sr::analysis::{
    detect_peaks, psd, snr_at, snr_vs_noise, snr_vs_phase, symbolize_trajectory, write_peaks_csv,
    AnalysisError, Separatrices, SweepResult, SweepSettings,
};
use optomech_sr::model::{self, bifurcation_sweep, fixed_points, ModelError};
use optomech_sr::sde::{ensemble, simulate, SdeError, Trajectory};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 1,
            // An unwritable output directory is a bad `--out`.
            CliError::Config(_) | CliError::Invalid(_) | CliError::Io { .. } => 2,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter { .. }
            | ModelError::EmptyGrid
            | ModelError::NonMonotoneGrid { .. } => CliError::Invalid(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SdeError> for CliError {
    fn from(e: SdeError) -> Self {
        match e {
            SdeError::InvalidConfig(_) | SdeError::InvalidSchedule(_) => CliError::Invalid(e.to_string()),
            SdeError::Model(m) => m.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Model(m) => m.into(),
            AnalysisError::Sde(s) => s.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

/// One output file; every file is written together with a `.meta` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub contents: Vec<u8>,
}

/// Files plus a human-readable summary for stdout.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub outputs: Vec<Output>,
    pub summary: String,
}

impl Report {
    fn file(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) {
        let mut contents = Vec::new();
        write(&mut contents).expect("writing to memory");
        self.outputs.push(Output {
            name: name.to_string(),
            contents,
        });
    }
}

/// Sidecar text: the full resolved configuration, readable by `--config`.
/// The output directory is left out so that sidecars, like the data, do not
/// depend on where a run was written.
pub fn sidecar(command: &str, file: &str, cfg: &RunConfig) -> String {
    let mut text = String::new();
    for (k, v) in cfg.key_values().into_iter().filter(|(k, _)| *k != "out") {
        let _ = writeln!(text, "{k} = {v}");
    }
    format!(
        "# trisr {command}\n# output {file}\n# config_fnv1a {:016x}\n{text}",
        fnv1a(text.as_bytes())
    )
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn write_report(command: &str, cfg: &RunConfig, report: &Report) -> Result<(), CliError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    for out in &report.outputs {
        let path = cfg.out.join(&out.name);
        fs::write(&path, &out.contents).map_err(io_err(&path))?;
        let meta = cfg.out.join(format!("{}.meta", out.name));
        fs::write(&meta, sidecar(command, &out.name, cfg)).map_err(io_err(&meta))?;
    }
    Ok(())
}

fn stable_tag(stable: bool) -> &'static str {
    if stable {
        "S"
    } else {
        "U"
    }
}

pub fn fixed_points_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.params.validate()?;
    let fps = fixed_points(&cfg.params)?;
    let mut report = Report::default();
    let _ = writeln!(report.summary, "{:>14} {:>14} {:>14}  stability", "x_s", "|alpha_s|^2", "max Re(lambda)");
    for fp in &fps {
        let _ = writeln!(
            report.summary,
            "{:>14.8} {:>14.8} {:>14.6e}  {}",
            fp.x_s,
            fp.intensity(),
            fp.max_real_part(),
            stable_tag(fp.stable)
        );
    }
    report.file("fixed_points.csv", |w| {
        use std::io::Write;
        writeln!(w, "x_s,intensity,max_re,stable")?;
        for fp in &fps {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{}", fp.x_s, fp.intensity(), fp.max_real_part(), stable_tag(fp.stable))?;
        }
        Ok(())
    });
    Ok(report)
}

pub fn bifurcation_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.params.validate()?;
    let diagram = bifurcation_sweep(&cfg.params, cfg.sweep_param, &cfg.sweep_grid())?;
    let key = cfg.sweep_param.key();
    let mut report = Report::default();
    let _ = writeln!(report.summary, "{} columns over {key}", diagram.columns.len());
    for b in &diagram.boundaries {
        let _ = writeln!(report.summary, "boundary {key} = {:.7}: {} -> {}", b.value, b.from.name(), b.to.name());
    }
    report.file("bifurcation_branches.csv", |w| {
        use std::io::Write;
        writeln!(w, "{key},x_s,intensity,max_re,stable")?;
        for c in &diagram.columns {
            for b in &c.branches {
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{}", c.value, b.x_s, b.intensity, b.max_re, stable_tag(b.stable))?;
            }
        }
        Ok(())
    });
    report.file("bifurcation_regions.csv", |w| {
        use std::io::Write;
        writeln!(w, "{key},region,n_stable,n_unstable")?;
        for c in &diagram.columns {
            match c.region {
                Some(r) => writeln!(w, "{:.16e},{},{},{}", c.value, r.region.name(), r.n_stable, r.n_unstable)?,
                None => writeln!(w, "{:.16e},marginal,,", c.value)?,
            }
        }
        Ok(())
    });
    report.file("bifurcation_boundaries.csv", |w| {
        use std::io::Write;
        writeln!(w, "{key},from,to")?;
        for b in &diagram.boundaries {
            writeln!(w, "{:.16e},{},{}", b.value, b.from.name(), b.to.name())?;
        }
        Ok(())
    });
    Ok(report)
}

fn write_trajectory(traj: &Trajectory, beat: Option<f64>, w: &mut Vec<u8>) -> io::Result<()> {
    use std::io::Write;
    let Some(omega) = beat else {
        return traj.write_csv(w);
    };
    write!(w, "t,x,p")?;
    if traj.alpha.is_some() {
        write!(w, ",re_alpha,im_alpha")?;
    }
    writeln!(w, ",beat_ref")?;
    for i in 0..traj.len() {
        let t = traj.times[i];
        write!(w, "{:.16e},{:.16e},{:.16e}", t, traj.x[i], traj.p[i])?;
        if let Some(a) = &traj.alpha {
            write!(w, ",{:.16e},{:.16e}", a[i].re, a[i].im)?;
        }
        writeln!(w, ",{:.16e}", (omega * t).cos())?;
    }
    Ok(())
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let integ = cfg.integrator();
    let schedule = cfg.schedule();
    let separatrices = if cfg.symbolize {
        Some(Separatrices::from_params(&cfg.params)?)
    } else {
        None
    };
    let traj = simulate(&integ, &schedule, &cfg.params)?;
    let mut report = Report::default();
    let _ = writeln!(report.summary, "{} samples, dt = {}, t_end = {}", traj.len(), integ.dt, integ.t_end);
    let beat = cfg
        .beat_reference
        .then_some(cfg.params.omega_f - cfg.params.delta_s);
    report.file("trajectory.csv", |w| write_trajectory(&traj, beat, w));

    if let Some(sep) = separatrices {
        let symbols = symbolize_trajectory(&traj, &sep);
        // Stage edges: every change of the noise strength inside the run.
        let mut edges = vec![0.0];
        for s in schedule.segments() {
            for t in [s.t_start, s.t_stop] {
                if t > 0.0 && t < integ.t_end && !edges.contains(&t) {
                    edges.push(t);
                }
            }
        }
        edges.push(integ.t_end + integ.dt);
        for w in edges.windows(2) {
            let _ = writeln!(
                report.summary,
                "stage [{}, {}) D = {}: {} transitions",
                w[0],
                w[1].min(integ.t_end),
                schedule.strength_at(w[0]),
                symbols.transitions_between(w[0], w[1])
            );
        }
        report.file("transitions.csv", |w| {
            use std::io::Write;
            writeln!(w, "t,from,to")?;
            for tr in &symbols.transitions {
                writeln!(w, "{:.16e},{},{}", tr.t, tr.from.name(), tr.to.name())?;
            }
            Ok(())
        });
    }
    Ok(report)
}

fn signal_frequency(cfg: &RunConfig) -> f64 {
    cfg.params.omega_f / (2.0 * PI)
}

pub fn spectrum_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let integ = cfg.integrator();
    integ.validate(&cfg.params)?;
    let runs = ensemble(&integ, &cfg.schedule(), &cfg.params, cfg.realizations)?;
    let spec = psd(&runs.trajectories, &cfg.welch())?;
    let peaks = detect_peaks(&spec, cfg.peak_threshold_db);
    let mut report = Report::default();
    let _ = writeln!(
        report.summary,
        "{} realizations, {} segments, resolution {:e}",
        runs.trajectories.len(),
        spec.n_segments,
        spec.resolution
    );
    let f = signal_frequency(cfg);
    if f > 0.0 {
        let snr = snr_at(&spec, f)?;
        let _ = writeln!(report.summary, "SNR at {f:e}: {:.3} dB{}", snr.snr_db, if snr.floored { " (floored)" } else { "" });
    }
    for p in peaks.iter().take(10) {
        let _ = writeln!(report.summary, "peak {:e}: {:.2} dB", p.freq, p.height_db);
    }
    report.file("spectrum.csv", |w| spec.write_csv(w));
    report.file("peaks.csv", |w| write_peaks_csv(&peaks, w));
    Ok(report)
}

fn sweep_settings(cfg: &RunConfig) -> SweepSettings {
    SweepSettings {
        config: cfg.integrator(),
        n_realizations: cfg.realizations,
        welch: cfg.welch(),
    }
}

fn sweep_report(result: &SweepResult, file: &str) -> Report {
    let mut report = Report::default();
    for p in &result.points {
        let _ = writeln!(
            report.summary,
            "{} = {:<10.6} SNR {:8.3} +- {:.3} dB{}",
            result.parameter,
            p.value,
            p.snr_db,
            p.err_db,
            if p.floored { " (floored)" } else { "" }
        );
    }
    let _ = writeln!(report.summary, "argmax {} = {}", result.parameter, result.argmax());
    report.file(file, |w| result.write_csv(w));
    report
}

pub fn snr_sweep_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let result = snr_vs_noise(&cfg.params, &cfg.d_grid, &sweep_settings(cfg))?;
    Ok(sweep_report(&result, "snr_vs_noise.csv"))
}

pub fn phase_sweep_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let result = snr_vs_phase(&cfg.params, &cfg.phase_grid, &sweep_settings(cfg))?;
    Ok(sweep_report(&result, "snr_vs_phase.csv"))
}

pub fn potential_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.params.validate()?;
    let xs = cfg.x_grid();
    if xs.is_empty() || cfg.potential_times.is_empty() {
        return Err(CliError::Invalid("potential needs x_points >= 1 and at least one time".into()));
    }
    let mut report = Report::default();
    let _ = writeln!(report.summary, "{} x {} grid", cfg.potential_times.len(), xs.len());
    report.file("potential.csv", |w| {
        use std::io::Write;
        writeln!(w, "t,x,U")?;
        for &t in &cfg.potential_times {
            for &x in &xs {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", t, x, model::effective_potential(x, t, &cfg.params))?;
            }
        }
        Ok(())
    });
    Ok(report)
}
