//! Schmidt decomposition of the joint amplitude.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::amplitude::JointAmplitude;
use crate::error::{CoreError, Result};

/// Minimum grid size for a trustworthy decomposition.
pub const MIN_SCHMIDT_GRID: usize = 256;

/// Normalized Schmidt eigenvalues and mode count K = 1/sum(lambda^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    /// Leading eigenvalues, descending; truncated to the requested count.
    pub eigenvalues: Vec<f64>,
    pub k: f64,
}

/// Schmidt spectrum via SVD of the measure-weighted amplitude matrix
/// F * sqrt(da_i * da_s). Truncation to `n_modes` only affects the reported
/// eigenvalue list, never K.
pub fn schmidt_spectrum(amp: &JointAmplitude, n_modes: usize) -> Result<SchmidtSpectrum> {
    let (ni, ns) = (amp.n_i(), amp.n_s());
    if ni != ns {
        return Err(CoreError::invalid_one(format!(
            "Schmidt decomposition expects a square grid, got {ni}x{ns}"
        )));
    }
    if ni < MIN_SCHMIDT_GRID {
        return Err(CoreError::invalid_one(format!(
            "Schmidt decomposition needs n >= {MIN_SCHMIDT_GRID}, got {ni}"
        )));
    }
    let weight = (amp.step_i() * amp.step_s()).sqrt();
    let singular = if amp.is_real() {
        let m = DMatrix::<f64>::from_fn(ni, ns, |i, s| amp.values[[i, s]].re * weight);
        singular_values(m, ni)?
    } else {
        // real embedding [[Re, -Im], [Im, Re]]: singular values of the
        // complex matrix appear twice each
        let m = DMatrix::<f64>::from_fn(2 * ni, 2 * ns, |r, c| {
            let v = amp.values[[r % ni, c % ns]] * weight;
            match (r >= ni, c >= ns) {
                (false, false) | (true, true) => v.re,
                (false, true) => -v.im,
                (true, false) => v.im,
            }
        });
        let all = singular_values(m, 2 * ni)?;
        all.into_iter().step_by(2).collect()
    };

    let total: f64 = singular.iter().map(|s| s * s).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(CoreError::Numeric(format!(
            "singular values do not normalize (sum of squares = {total}); \
             grid {ni}x{ns}"
        )));
    }
    let lambdas: Vec<f64> = singular.iter().map(|s| s * s / total).collect();
    let k = 1.0 / lambdas.iter().map(|l| l * l).sum::<f64>();
    Ok(SchmidtSpectrum {
        eigenvalues: lambdas.into_iter().take(n_modes).collect(),
        k,
    })
}

fn singular_values(m: DMatrix<f64>, n: usize) -> Result<Vec<f64>> {
    let svd = nalgebra::linalg::SVD::try_new(m, false, false, f64::EPSILON, 0).ok_or_else(
        || CoreError::Numeric(format!("SVD failed to converge on a {n}x{n} grid")),
    )?;
    let mut values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    values.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(values)
}

/// Analytic Schmidt number of the double-Gaussian amplitude
/// exp(-(x+y)^2/(4a^2) - (x-y)^2/(4b^2)): K = (a^2+b^2)/(2ab), with
/// geometric eigenvalue spectrum lambda_n = (1-mu) mu^n, mu = ((a-b)/(a+b))^2.
pub fn double_gaussian_schmidt_number(a: f64, b: f64) -> f64 {
    (a * a + b * b) / (2.0 * a * b)
}

/// Geometric spectrum of the double-Gaussian amplitude.
pub fn double_gaussian_spectrum(a: f64, b: f64, n_modes: usize) -> Vec<f64> {
    let mu = ((a - b) / (a + b)).powi(2);
    (0..n_modes).map(|n| (1.0 - mu) * mu.powi(n as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{Domain, JointAmplitude, PhotonMeta};
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use num_complex::Complex64;

    fn amp_from_fn(n: usize, extent: f64, f: impl Fn(f64, f64) -> Complex64) -> JointAmplitude {
        let axis: Vec<f64> = (0..n)
            .map(|j| -extent + 2.0 * extent * j as f64 / (n - 1) as f64)
            .collect();
        let mut values = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for s in 0..n {
                values[[i, s]] = f(axis[i], axis[s]);
            }
        }
        let mut amp = JointAmplitude {
            domain: Domain::FarFieldAngle,
            axis_i: axis.clone(),
            axis_s: axis,
            values,
            norm_constant: 1.0,
            photon: PhotonMeta {
                k_i: 1.0,
                k_s: 1.0,
                length_um: 1.0,
            },
        };
        amp.normalize().unwrap();
        amp
    }

    #[test]
    fn separable_amplitude_is_rank_one() {
        let amp = amp_from_fn(257, 5.0, |x, y| {
            Complex64::new((-(x * x) / 2.0).exp() * (-(y * y) / 1.3).exp(), 0.0)
        });
        let s = schmidt_spectrum(&amp, 4).unwrap();
        assert!((s.k - 1.0).abs() < 1e-6, "K = {}", s.k);
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn double_gaussian_matches_mehler() {
        for &ratio in &[2.0f64, 5.0] {
            let ab = ratio + (ratio * ratio - 1.0).sqrt();
            let amp = amp_from_fn(513, 3.5 * ab, |x, y| {
                Complex64::new(
                    (-(x + y) * (x + y) / (4.0 * ab * ab) - (x - y) * (x - y) / 4.0).exp(),
                    0.0,
                )
            });
            let s = schmidt_spectrum(&amp, 8).unwrap();
            let k_exact = double_gaussian_schmidt_number(ab, 1.0);
            assert_relative_eq!(s.k, k_exact, max_relative = 1e-3);
            assert_relative_eq!(s.k, ratio, max_relative = 1e-3);
            // leading eigenvalues follow the geometric law
            let expect = double_gaussian_spectrum(ab, 1.0, 4);
            for (got, want) in s.eigenvalues.iter().zip(&expect) {
                assert_relative_eq!(got, want, max_relative = 1e-2);
            }
        }
    }

    #[test]
    fn eigenvalues_sum_to_one_and_descend() {
        let amp = amp_from_fn(257, 8.0, |x, y| {
            Complex64::new((-(x + y) * (x + y) / 16.0 - (x - y) * (x - y) / 0.5).exp(), 0.0)
        });
        let s = schmidt_spectrum(&amp, 257).unwrap();
        let total: f64 = s.eigenvalues.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "sum = {total}");
        for w in s.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(s.k >= 1.0);
    }

    #[test]
    fn truncation_does_not_change_k() {
        let amp = amp_from_fn(257, 8.0, |x, y| {
            Complex64::new((-(x + y) * (x + y) / 16.0 - (x - y) * (x - y) / 0.5).exp(), 0.0)
        });
        let k_full = schmidt_spectrum(&amp, 257).unwrap().k;
        let k_trunc = schmidt_spectrum(&amp, 2).unwrap().k;
        assert_eq!(k_full, k_trunc);
    }

    #[test]
    fn complex_amplitude_uses_real_embedding() {
        // separable complex phases leave K invariant
        let plain = amp_from_fn(257, 6.0, |x, y| {
            Complex64::new((-(x + y) * (x + y) / 9.0 - (x - y) * (x - y) / 0.7).exp(), 0.0)
        });
        let phased = amp_from_fn(257, 6.0, |x, y| {
            Complex64::from_polar(
                (-(x + y) * (x + y) / 9.0 - (x - y) * (x - y) / 0.7).exp(),
                1.3 * x - 0.4 * y,
            )
        });
        let k0 = schmidt_spectrum(&plain, 4).unwrap().k;
        let k1 = schmidt_spectrum(&phased, 4).unwrap().k;
        assert_relative_eq!(k0, k1, max_relative = 1e-8);
    }

    #[test]
    fn small_grid_rejected() {
        let amp = amp_from_fn(65, 5.0, |x, y| {
            Complex64::new((-(x * x + y * y)).exp(), 0.0)
        });
        assert!(schmidt_spectrum(&amp, 4).is_err());
    }
}
