//! Deterministic mathematics of the membrane system: drift fields, effective
//! potential, steady states, linear stability and stability-region
//! classification.

use num_complex::Complex64;
use thiserror::Error;

use crate::eigen::{eigenvalues4, CMatrix4, EigenError};
use crate::params::{StateDerivative, SystemParams, SystemState};

/// Half-width of the band around zero in which the largest eigenvalue real
/// part is considered marginal.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

/// Resolution of bifurcation boundaries in the swept parameter.
pub const BOUNDARY_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("state has non-finite component at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("marginal stability at x_s = {x_s}: max Re(lambda) = {max_re:e}")]
    MarginalStability { x_s: f64, max_re: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep grid is not strictly monotone at index {index}")]
    NonMonotoneGrid { index: usize },
}

/// Right-hand side of the full mean-field equations, without thermal noise.
///
/// The optical signal enters as `-i E_s e^{i delta t}` and the mechanical
/// signal as `-F_s cos(omega_f t + phi_f)`.
pub fn full_drift(state: &SystemState, params: &SystemParams) -> Result<StateDerivative, ModelError> {
    if !state.is_finite() {
        return Err(ModelError::NonFiniteState { t: state.t });
    }
    Ok(full_drift_unchecked(state, params))
}

#[inline]
pub(crate) fn full_drift_unchecked(state: &SystemState, params: &SystemParams) -> StateDerivative {
    let SystemState { alpha, x, p, t } = *state;
    let i = Complex64::i();
    let detuning = params.delta_c + params.g * x * x;
    let signal = Complex64::from_polar(params.e_s, params.delta_s * t);
    let d_alpha = -(i * detuning + params.kappa) * alpha - i * params.e_c - i * signal;
    let dx = params.omega_m * p;
    let dp = -params.gamma_m * p - params.omega_m * x - 2.0 * params.g * alpha.norm_sqr() * x
        - params.force(t);
    StateDerivative { d_alpha, dx, dp }
}

/// Cavity intensity `|alpha|^2` after adiabatic elimination of the field.
#[inline]
pub fn adiabatic_intensity(x: f64, t: f64, params: &SystemParams) -> f64 {
    let detuning = params.delta_c + params.g * x * x;
    params.drive_intensity(t) / (detuning * detuning + params.kappa * params.kappa)
}

/// Reduced mechanical drift `(dx/dt, dp/dt)` with the field eliminated.
#[inline]
pub fn adiabatic_drift(x: f64, p: f64, t: f64, params: &SystemParams) -> (f64, f64) {
    let dx = params.omega_m * p;
    let dp = -params.gamma_m * p - params.omega_m * x
        - 2.0 * params.g * adiabatic_intensity(x, t, params) * x
        - params.force(t);
    (dx, dp)
}

/// Effective potential `U(x, t)` whose negative gradient is the reduced force.
pub fn effective_potential(x: f64, t: f64, params: &SystemParams) -> f64 {
    0.5 * params.omega_m * x * x
        + params.drive_intensity(t) / params.kappa
            * ((params.delta_c + params.g * x * x) / params.kappa).atan()
        + params.force(t) * x
}

/// Steady-state membrane positions with the weak signals switched off,
/// sorted ascending. Always contains 0; the nonzero roots come in `+-` pairs.
///
/// `g = 0` yields only the trivial root.
pub fn steady_state_positions(params: &SystemParams) -> Vec<f64> {
    let mut roots = vec![0.0];
    let g = params.g;
    if g == 0.0 {
        return roots;
    }
    let radicand = -g * g * (2.0 * g * params.e_c * params.e_c / params.omega_m + params.kappa * params.kappa);
    if radicand < 0.0 {
        return roots;
    }
    let a = radicand.sqrt();
    let base = -params.delta_c * g;
    let mut squares = vec![(base + a) / (g * g)];
    if a > 0.0 {
        squares.push((base - a) / (g * g));
    }
    for x2 in squares {
        if x2 > 0.0 {
            let x = x2.sqrt();
            roots.push(x);
            roots.push(-x);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Steady-state cavity amplitude at membrane position `x_s`.
pub fn steady_state_field(x_s: f64, params: &SystemParams) -> Complex64 {
    let i = Complex64::i();
    let denom = i * (params.delta_c + params.g * x_s * x_s) + params.kappa;
    -i * params.e_c / denom
}

/// Residuals of the two steady-state conditions (field and force balance).
pub fn steady_state_residuals(x_s: f64, alpha_s: Complex64, params: &SystemParams) -> (f64, f64) {
    let i = Complex64::i();
    let field = -(i * (params.delta_c + params.g * x_s * x_s) + params.kappa) * alpha_s - i * params.e_c;
    let force = -params.omega_m * x_s - 2.0 * params.g * alpha_s.norm_sqr() * x_s;
    (field.norm(), force.abs())
}

/// Linearization matrix about `(x_s, alpha_s)` with entries laid out as in
/// the standard presentation of this model.
///
/// Rows and columns 0 and 1 are the field fluctuations `(a, a^dagger)`. In
/// the literal layout, row 2 is the momentum equation (with `-gamma_m` on
/// the diagonal) and row 3 is `dx/dt = omega_m p`; so the last two
/// indices act as `(p, x)`. The spectrum does not depend on that labelling.
pub fn jacobian(x_s: f64, alpha_s: Complex64, params: &SystemParams) -> CMatrix4 {
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let re = |v: f64| Complex64::new(v, 0.0);
    let g = params.g;
    let detuning = params.delta_c + g * x_s * x_s;
    [
        [
            -i * detuning - params.kappa,
            zero,
            zero,
            -i * 2.0 * g * alpha_s * x_s,
        ],
        [
            zero,
            i * detuning - params.kappa,
            zero,
            i * 2.0 * g * alpha_s.conj() * x_s,
        ],
        [
            -2.0 * g * alpha_s.conj() * x_s,
            -2.0 * g * alpha_s * x_s,
            re(-params.gamma_m),
            re(-params.omega_m - 2.0 * g * alpha_s.norm_sqr()),
        ],
        [zero, zero, re(params.omega_m), zero],
    ]
}

/// A steady state together with its linear-stability spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub x_s: f64,
    pub alpha_s: Complex64,
    pub eigenvalues: [Complex64; 4],
    /// `max Re(lambda) < -STABILITY_TOLERANCE`.
    pub stable: bool,
}

impl FixedPoint {
    pub fn at(x_s: f64, params: &SystemParams) -> Result<Self, ModelError> {
        let alpha_s = steady_state_field(x_s, params);
        let eigenvalues = eigenvalues4(&jacobian(x_s, alpha_s, params))?;
        let mut fp = Self {
            x_s,
            alpha_s,
            eigenvalues,
            stable: false,
        };
        fp.stable = fp.max_real_part() < -STABILITY_TOLERANCE;
        Ok(fp)
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn intensity(&self) -> f64 {
        self.alpha_s.norm_sqr()
    }
}

/// All steady states of the signal-free system with their spectra.
pub fn fixed_points(params: &SystemParams) -> Result<Vec<FixedPoint>, ModelError> {
    params.validate()?;
    steady_state_positions(params)
        .into_iter()
        .map(|x| FixedPoint::at(x, params))
        .collect()
}

/// Linear stability of a fixed point; marginal spectra are an error so the
/// caller can refine the parameter.
pub fn classify_stability(fp: &FixedPoint) -> Result<bool, ModelError> {
    let max_re = fp.max_real_part();
    if max_re.abs() <= STABILITY_TOLERANCE {
        return Err(ModelError::MarginalStability {
            x_s: fp.x_s,
            max_re,
        });
    }
    Ok(max_re < 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Monostable,
    Bistable,
    Tristable,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Monostable => "monostable",
            Region::Bistable => "bistable",
            Region::Tristable => "tristable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionClass {
    pub region: Region,
    pub n_stable: usize,
    pub n_unstable: usize,
}

pub fn classify_region(params: &SystemParams) -> Result<RegionClass, ModelError> {
    let mut n_stable = 0;
    let mut n_unstable = 0;
    for fp in fixed_points(params)? {
        if classify_stability(&fp)? {
            n_stable += 1;
        } else {
            n_unstable += 1;
        }
    }
    let region = match n_stable {
        1 => Region::Monostable,
        2 => Region::Bistable,
        _ => Region::Tristable,
    };
    Ok(RegionClass {
        region,
        n_stable,
        n_unstable,
    })
}

/// Parameters a bifurcation diagram can be swept over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    ControlAmplitude,
    Detuning,
}

impl SweepParameter {
    pub fn key(self) -> &'static str {
        match self {
            SweepParameter::ControlAmplitude => "E_c",
            SweepParameter::Detuning => "delta_c",
        }
    }

    pub fn apply(self, params: &SystemParams, value: f64) -> SystemParams {
        let mut p = *params;
        match self {
            SweepParameter::ControlAmplitude => p.e_c = value,
            SweepParameter::Detuning => p.delta_c = value,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub x_s: f64,
    pub intensity: f64,
    pub max_re: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationColumn {
    pub value: f64,
    pub branches: Vec<Branch>,
    /// `None` when some branch is marginally stable at this grid value.
    pub region: Option<RegionClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionBoundary {
    pub value: f64,
    pub from: Region,
    pub to: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationDiagram {
    pub parameter: SweepParameter,
    pub columns: Vec<BifurcationColumn>,
    pub boundaries: Vec<RegionBoundary>,
}

/// Branches and region boundaries along a strictly monotone grid. Region
/// changes between neighbouring grid points are refined by bisection.
pub fn bifurcation_sweep(
    params: &SystemParams,
    parameter: SweepParameter,
    grid: &[f64],
) -> Result<BifurcationDiagram, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    let increasing = grid.len() < 2 || grid[1] > grid[0];
    for (index, w) in grid.windows(2).enumerate() {
        if (increasing && w[1] <= w[0]) || (!increasing && w[1] >= w[0]) || !w[1].is_finite() {
            return Err(ModelError::NonMonotoneGrid { index: index + 1 });
        }
    }

    let mut columns = Vec::with_capacity(grid.len());
    for &value in grid {
        let p = parameter.apply(params, value);
        let branches = fixed_points(&p)?
            .into_iter()
            .map(|fp| Branch {
                x_s: fp.x_s,
                intensity: fp.intensity(),
                max_re: fp.max_real_part(),
                stable: fp.stable,
            })
            .collect();
        let region = match classify_region(&p) {
            Ok(r) => Some(r),
            Err(ModelError::MarginalStability { .. }) => None,
            Err(e) => return Err(e),
        };
        columns.push(BifurcationColumn {
            value,
            branches,
            region,
        });
    }

    let mut boundaries = Vec::new();
    let classified: Vec<(f64, Region)> = columns
        .iter()
        .filter_map(|c| c.region.map(|r| (c.value, r.region)))
        .collect();
    for w in classified.windows(2) {
        let (lo, from) = w[0];
        let (hi, to) = w[1];
        if from != to {
            let value = refine_boundary(params, parameter, lo, hi, from)?;
            boundaries.push(RegionBoundary { value, from, to });
        }
    }

    Ok(BifurcationDiagram {
        parameter,
        columns,
        boundaries,
    })
}

fn refine_boundary(
    params: &SystemParams,
    parameter: SweepParameter,
    mut inside: f64,
    mut outside: f64,
    region: Region,
) -> Result<f64, ModelError> {
    while (outside - inside).abs() > BOUNDARY_RESOLUTION {
        let mid = 0.5 * (inside + outside);
        let same = match classify_region(&parameter.apply(params, mid)) {
            Ok(r) => r.region == region,
            Err(ModelError::MarginalStability { .. }) => false,
            Err(e) => return Err(e),
        };
        if same {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}
