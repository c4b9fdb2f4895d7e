//! Eigenvalues of small dense complex matrices.
//!
//! Householder reduction to upper Hessenberg form followed by single-shift
//! complex QR iterations with Wilkinson shifts and deflation. Only the
//! eigenvalues are accumulated; eigenvectors are recovered on demand by
//! inverse iteration.

use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix4 = [[Complex64; 4]; 4];

const N: usize = 4;
const MAX_SWEEPS: usize = 60 * N;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("matrix has non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error(
        "QR iteration did not converge after {iterations} sweeps \
         (active block ends at {active_end}, last subdiagonal {subdiagonal:e})"
    )]
    NoConvergence {
        iterations: usize,
        active_end: usize,
        subdiagonal: f64,
    },
}

/// All four eigenvalues of `m`, sorted by real part and then imaginary part.
pub fn eigenvalues4(m: &CMatrix4) -> Result<[Complex64; 4], EigenError> {
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(EigenError::NonFinite { row: i, col: j });
            }
        }
    }
    let mut h = *m;
    hessenberg(&mut h);
    let mut eig = [Complex64::new(0.0, 0.0); N];
    shifted_qr(&mut h, &mut eig)?;
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eig)
}

/// Unit-norm eigenvector for the eigenvalue `lambda` of `m` by inverse iteration.
pub fn eigenvector4(m: &CMatrix4, lambda: Complex64) -> [Complex64; 4] {
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v.norm())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let shift = lambda + Complex64::new(scale * 1e-10, scale * 1e-10);
    let mut shifted = *m;
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] -= shift;
    }
    let mut v = [Complex64::new(1.0, 0.0); N];
    for (i, vi) in v.iter_mut().enumerate() {
        // generic start vector so no component of the eigenvector is missed
        *vi = Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64);
    }
    for _ in 0..3 {
        v = solve4(&shifted, &v, scale);
        let norm = vec_norm(&v);
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    }
    v
}

/// `||m v - lambda v|| / ||v||`.
pub fn eigen_residual(m: &CMatrix4, lambda: Complex64, v: &[Complex64; 4]) -> f64 {
    let mut r = [Complex64::new(0.0, 0.0); N];
    for i in 0..N {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..N {
            acc += m[i][j] * v[j];
        }
        r[i] = acc - lambda * v[i];
    }
    vec_norm(&r) / vec_norm(v)
}

fn vec_norm(v: &[Complex64; 4]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn hessenberg(h: &mut CMatrix4) {
    for k in 0..N - 2 {
        let norm_x: f64 = (k + 1..N).map(|i| h[i][k].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = h[k + 1][k];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm_x;
        let mut v = [Complex64::new(0.0, 0.0); N];
        for i in k + 1..N {
            v[i] = h[i][k];
        }
        v[k + 1] -= alpha;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vnorm;
        }
        // H <- (I - 2 v v^H) H
        for j in 0..N {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in k + 1..N {
                dot += v[i].conj() * h[i][j];
            }
            for i in k + 1..N {
                h[i][j] -= v[i] * dot * 2.0;
            }
        }
        // H <- H (I - 2 v v^H)
        for row in h.iter_mut() {
            let mut dot = Complex64::new(0.0, 0.0);
            for j in k + 1..N {
                dot += row[j] * v[j];
            }
            for j in k + 1..N {
                row[j] -= dot * v[j].conj() * 2.0;
            }
        }
        for row in h.iter_mut().skip(k + 2) {
            row[k] = Complex64::new(0.0, 0.0);
        }
    }
}

fn shifted_qr(h: &mut CMatrix4, eig: &mut [Complex64; 4]) -> Result<(), EigenError> {
    let mut hi = N - 1;
    let mut sweeps = 0usize;
    let mut since_deflation = 0usize;
    loop {
        if hi == 0 {
            eig[0] = h[0][0];
            return Ok(());
        }
        let mut lo = hi;
        while lo > 0 {
            let sub = h[lo][lo - 1].norm();
            let diag = h[lo][lo].norm() + h[lo - 1][lo - 1].norm();
            if sub <= f64::EPSILON * diag || sub < f64::MIN_POSITIVE {
                h[lo][lo - 1] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[hi][hi];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        sweeps += 1;
        since_deflation += 1;
        if sweeps > MAX_SWEEPS {
            return Err(EigenError::NoConvergence {
                iterations: sweeps,
                active_end: hi,
                subdiagonal: h[hi][hi - 1].norm(),
            });
        }

        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[hi][hi] + Complex64::new(h[hi][hi - 1].norm(), 0.0)
        } else {
            wilkinson_shift(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };

        for i in lo..=hi {
            h[i][i] -= shift;
        }
        let mut rotations = [(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)); N];
        for k in lo..hi {
            let a = h[k][k];
            let b = h[k + 1][k];
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (a / r, b / r)
            };
            rotations[k] = (c, s);
            for j in k..=hi {
                let top = h[k][j];
                let bottom = h[k + 1][j];
                h[k][j] = c.conj() * top + s.conj() * bottom;
                h[k + 1][j] = -s * top + c * bottom;
            }
        }
        for k in lo..hi {
            let (c, s) = rotations[k];
            for row in h.iter_mut().take((k + 2).min(hi) + 1).skip(lo) {
                let left = row[k];
                let right = row[k + 1];
                row[k] = left * c + right * s;
                row[k + 1] = -left * s.conj() + right * c.conj();
            }
        }
        for i in lo..=hi {
            h[i][i] += shift;
        }
    }
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let root = (half_diff * half_diff + b * c).sqrt();
    let mu1 = half_tr + root;
    let mu2 = half_tr - root;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

fn solve4(a: &CMatrix4, b: &[Complex64; 4], scale: f64) -> [Complex64; 4] {
    let mut m = *a;
    let mut rhs = *b;
    let tiny = scale * f64::EPSILON;
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .unwrap_or(col);
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        if m[col][col].norm() < tiny {
            m[col][col] = Complex64::new(tiny, 0.0);
        }
        for row in col + 1..N {
            let factor = m[row][col] / m[col][col];
            for k in col..N {
                let sub = factor * m[col][k];
                m[row][k] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[row] -= sub;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); N];
    for row in (0..N).rev() {
        let mut acc = rhs[row];
        for k in row + 1..N {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}
