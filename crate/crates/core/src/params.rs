//! Physical parameters and dynamical state of the membrane-in-the-middle system.
//!
//! Every rate, amplitude and frequency is expressed in units of the mechanical
//! frequency `omega_m`; times are in units of `1/omega_m`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::model::ModelError;

/// Constants, drives and noise strength of the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Mechanical frequency. Sets the unit; 1 in all presets.
    pub omega_m: f64,
    /// Optical decay rate.
    pub kappa: f64,
    /// Mechanical damping rate.
    pub gamma_m: f64,
    /// Cavity detuning from the control field.
    pub delta_c: f64,
    /// Quadratic optomechanical coupling (negative in the tristable setting).
    pub g: f64,
    /// Control-field amplitude.
    pub e_c: f64,
    /// Optical signal amplitude.
    pub e_s: f64,
    /// Optical signal detuning from the control field.
    pub delta_s: f64,
    /// Mechanical signal amplitude.
    pub f_s: f64,
    /// Mechanical signal angular frequency.
    pub omega_f: f64,
    /// Initial phase of the mechanical signal relative to the optical one.
    pub phi_f: f64,
    /// Thermal noise strength, `<xi(t) xi(t')> = 2 D delta(t - t')`.
    pub noise_d: f64,
}

impl SystemParams {
    /// Stability-diagram constants with the given control amplitude and
    /// all signals and noise switched off.
    pub fn stability_diagram(e_c: f64) -> Self {
        Self {
            omega_m: 1.0,
            kappa: 5.0,
            gamma_m: 2.5,
            delta_c: 3.0,
            g: -0.4,
            e_c,
            e_s: 0.0,
            delta_s: 0.0,
            f_s: 0.0,
            omega_f: 0.0,
            phi_f: 0.0,
            noise_d: 0.0,
        }
    }

    /// Operating point of the single-trajectory synchronization runs:
    /// `E_c = 5.8`, `E_s = 0.45`, `F_s = 0.15`, `delta = omega_f = 0.0004 * 2 pi`, `D = 0.09`.
    pub fn synchronization() -> Self {
        Self {
            e_s: 0.45,
            delta_s: 0.0004 * 2.0 * PI,
            f_s: 0.15,
            omega_f: 0.0004 * 2.0 * PI,
            noise_d: 0.09,
            ..Self::stability_diagram(5.8)
        }
    }

    /// Copy with both weak signals removed.
    pub fn without_signals(&self) -> Self {
        Self {
            e_s: 0.0,
            f_s: 0.0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("omega_m", self.omega_m),
            ("kappa", self.kappa),
            ("gamma_m", self.gamma_m),
            ("delta_c", self.delta_c),
            ("g", self.g),
            ("E_c", self.e_c),
            ("E_s", self.e_s),
            ("delta_s", self.delta_s),
            ("F_s", self.f_s),
            ("omega_f", self.omega_f),
            ("phi_f", self.phi_f),
            ("D", self.noise_d),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        let positive = [("omega_m", self.omega_m), ("kappa", self.kappa)];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be > 0",
                });
            }
        }
        let non_negative = [
            ("gamma_m", self.gamma_m),
            ("D", self.noise_d),
            ("E_c", self.e_c),
            ("E_s", self.e_s),
            ("F_s", self.f_s),
        ];
        for (name, value) in non_negative {
            if value < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be >= 0",
                });
            }
        }
        Ok(())
    }

    /// Mechanical signal value `F_s cos(omega_f t + phi_f)`.
    #[inline]
    pub fn force(&self, t: f64) -> f64 {
        self.f_s * (self.omega_f * t + self.phi_f).cos()
    }

    /// `|E_c + E_s e^{i delta t}|^2`, the drive intensity seen by the cavity.
    #[inline]
    pub fn drive_intensity(&self, t: f64) -> f64 {
        self.e_c * self.e_c
            + self.e_s * self.e_s
            + 2.0 * self.e_c * self.e_s * (self.delta_s * t).cos()
    }
}

/// Expectation values `(alpha, x, p)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub alpha: Complex64,
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

impl SystemState {
    pub fn new(alpha: Complex64, x: f64, p: f64, t: f64) -> Self {
        Self { alpha, x, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.re.is_finite()
            && self.alpha.im.is_finite()
            && self.x.is_finite()
            && self.p.is_finite()
            && self.t.is_finite()
    }
}

/// Time derivative of a [`SystemState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub d_alpha: Complex64,
    pub dx: f64,
    pub dp: f64,
}

impl SystemParams {
    /// `(key, value)` pairs using the run-configuration key names. Values are
    /// printed in shortest round-trip form.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("omega_m", self.omega_m.to_string()),
            ("kappa", self.kappa.to_string()),
            ("gamma_m", self.gamma_m.to_string()),
            ("delta_c", self.delta_c.to_string()),
            ("g", self.g.to_string()),
            ("E_c", self.e_c.to_string()),
            ("E_s", self.e_s.to_string()),
            ("delta_s", self.delta_s.to_string()),
            ("F_s", self.f_s.to_string()),
            ("omega_f", self.omega_f.to_string()),
            ("phi_f", self.phi_f.to_string()),
            ("D", self.noise_d.to_string()),
        ]
    }

    /// Mutable access by run-configuration key.
    pub fn field_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "omega_m" => &mut self.omega_m,
            "kappa" => &mut self.kappa,
            "gamma_m" => &mut self.gamma_m,
            "delta_c" => &mut self.delta_c,
            "g" => &mut self.g,
            "E_c" => &mut self.e_c,
            "E_s" => &mut self.e_s,
            "delta_s" => &mut self.delta_s,
            "F_s" => &mut self.f_s,
            "omega_f" => &mut self.omega_f,
            "phi_f" => &mut self.phi_f,
            "D" => &mut self.noise_d,
            _ => return None,
        })
    }
}
