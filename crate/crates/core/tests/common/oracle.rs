//! Independent reference computations used only by tests: a generic
//! polynomial root finder and a characteristic-polynomial eigenvalue route.

#![allow(dead_code)]

use num_complex::Complex64;
use optomech_sr::SystemParams;

/// Horner evaluation; `coeffs[0]` is the leading coefficient.
pub fn poly_eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// All roots of a polynomial by Weierstrass (Durand–Kerner) iteration,
/// followed by a few Newton polishing steps per root.
pub fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    let lead = coeffs[0];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let n = monic.len() - 1;
    let radius = 1.0 + monic[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::from_polar(0.4 * radius, 0.9);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| seed * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.25))
        .collect();
    for _ in 0..5000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = poly_eval(&monic, z[i]) / denom;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 * radius {
            break;
        }
    }
    let deriv: Vec<Complex64> = monic[..n]
        .iter()
        .enumerate()
        .map(|(k, c)| c * (n - k) as f64)
        .collect();
    for r in &mut z {
        for _ in 0..3 {
            let d = poly_eval(&deriv, *r);
            if d.norm() > 0.0 {
                *r -= poly_eval(&monic, *r) / d;
            }
        }
    }
    z
}

/// Real roots (|Im| below `tol`) of a real polynomial, ascending.
pub fn real_roots(coeffs: &[f64], tol: f64) -> Vec<f64> {
    let c: Vec<Complex64> = coeffs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut out: Vec<f64> = durand_kerner(&c)
        .into_iter()
        .filter(|r| r.im.abs() < tol)
        .map(|r| r.re)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Steady-state condition `x (g^2 x^4 + 2 Delta g x^2 + Delta^2 + kappa^2 + 2 g E_c^2 / omega_m) = 0`
/// written out in powers of x, leading coefficient first.
pub fn steady_state_polynomial(p: &SystemParams) -> Vec<f64> {
    let g = p.g;
    vec![
        g * g,
        0.0,
        2.0 * p.delta_c * g,
        0.0,
        p.delta_c * p.delta_c + p.kappa * p.kappa + 2.0 * g * p.e_c * p.e_c / p.omega_m,
        0.0,
    ]
}

/// Characteristic polynomial `det(lambda I - M)` of a 4x4 matrix by the
/// Faddeev–LeVerrier recursion, leading coefficient first.
pub fn char_poly4(m: &[[Complex64; 4]; 4]) -> [Complex64; 5] {
    let zero = Complex64::new(0.0, 0.0);
    let mul = |a: &[[Complex64; 4]; 4], b: &[[Complex64; 4]; 4]| {
        let mut c = [[zero; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    };
    let mut coeffs = [zero; 5];
    coeffs[0] = Complex64::new(1.0, 0.0);
    let mut mk = [[zero; 4]; 4];
    for k in 1..=4 {
        // M_k = M (M_{k-1} + c_{k-1} I), c_k = -tr(M_k) / k
        let mut shifted = mk;
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] += coeffs[k - 1];
        }
        mk = mul(m, &shifted);
        let trace: Complex64 = (0..4).map(|i| mk[i][i]).sum();
        coeffs[k] = -trace / k as f64;
    }
    coeffs
}

/// Eigenvalues via the characteristic polynomial, sorted by (Re, Im).
pub fn eigenvalues_by_char_poly(m: &[[Complex64; 4]; 4]) -> Vec<Complex64> {
    let mut roots = durand_kerner(&char_poly4(m));
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Closed-form region thresholds on `E_c`: `(lower, upper)` with tristability
/// for `lower < E_c < upper` (valid for `g < 0`, `Delta > 0`).
pub fn control_thresholds(p: &SystemParams) -> (f64, f64) {
    let lower = (p.omega_m * p.kappa * p.kappa / (-2.0 * p.g)).sqrt();
    let upper = (p.omega_m * (p.delta_c * p.delta_c + p.kappa * p.kappa) / (-2.0 * p.g)).sqrt();
    (lower, upper)
}
