//! Far-field / near-field transforms.
//!
//! The near field is obtained by a unitary discrete Fourier transform of the
//! far-field amplitude over its transverse-wavevector axes, with position
//! conjugate to q/2pi. The idler axis uses the mirrored kernel so that the
//! position-space correlation stripe lies along x_i = x_s. Zero-padding by an
//! integer factor refines the position sampling; discrete Parseval holds
//! exactly at any padding.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::amplitude::{Domain, JointAmplitude};
use crate::dispersion::TWO_PI;
use crate::error::{CoreError, Result};

/// Minimum points per axis for a meaningful transform.
const MIN_POINTS: usize = 64;

/// Kernel sign per axis: signal +1, idler -1 (mirror).
const SIGN_IDLER: f64 = -1.0;
const SIGN_SIGNAL: f64 = 1.0;

/// Catmull-Rom interpolation of uniformly sampled values at fractional
/// index `u`; boundary samples are clamped.
pub(crate) fn catmull_rom(y: &[f64], u: f64) -> f64 {
    let n = y.len();
    let j = (u.floor() as isize).clamp(0, n as isize - 1);
    let t = u - j as f64;
    let at = |k: isize| y[k.clamp(0, n as isize - 1) as usize];
    let (p0, p1, p2, p3) = (at(j - 1), at(j), at(j + 1), at(j + 2));
    0.5 * (2.0 * p1
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

/// Resamples a far-field angular amplitude onto uniform transverse-wavevector
/// axes q = k sin(theta), rad/um. Cubic interpolation per axis.
pub fn to_wavevector(amp: &JointAmplitude) -> Result<JointAmplitude> {
    if amp.domain != Domain::FarFieldAngle {
        return Err(CoreError::domain(format!(
            "to_wavevector expects a far-field angular amplitude, got {:?}",
            amp.domain
        )));
    }
    let (ni, ns) = (amp.n_i(), amp.n_s());
    let make_axis = |k: f64, axis_deg: &[f64], n: usize| -> (Vec<f64>, Vec<f64>) {
        let q_max = k * axis_deg[n - 1].to_radians().sin();
        let half = (n / 2) as isize;
        let step = q_max / half as f64;
        let q: Vec<f64> = (-half..=half).map(|j| j as f64 * step).collect();
        // fractional index of theta(q) on the uniform angle axis
        let h = axis_deg[1] - axis_deg[0];
        let idx = q
            .iter()
            .map(|&qv| ((qv / k).asin().to_degrees() - axis_deg[0]) / h)
            .collect();
        (q, idx)
    };
    let (q_i, idx_i) = make_axis(amp.photon.k_i, &amp.axis_i, ni);
    let (q_s, idx_s) = make_axis(amp.photon.k_s, &amp.axis_s, ns);

    // separable resampling: axis 0 (idler), then axis 1 (signal)
    let mut mid = Array2::<Complex64>::zeros((ni, ns));
    let mut col_re = vec![0.0; ni];
    let mut col_im = vec![0.0; ni];
    for s in 0..ns {
        for i in 0..ni {
            col_re[i] = amp.values[[i, s]].re;
            col_im[i] = amp.values[[i, s]].im;
        }
        for (i, &u) in idx_i.iter().enumerate() {
            mid[[i, s]] = Complex64::new(catmull_rom(&col_re, u), catmull_rom(&col_im, u));
        }
    }
    let mut out = Array2::<Complex64>::zeros((ni, ns));
    let mut row_re = vec![0.0; ns];
    let mut row_im = vec![0.0; ns];
    for i in 0..ni {
        for s in 0..ns {
            row_re[s] = mid[[i, s]].re;
            row_im[s] = mid[[i, s]].im;
        }
        for (s, &u) in idx_s.iter().enumerate() {
            out[[i, s]] = Complex64::new(catmull_rom(&row_re, u), catmull_rom(&row_im, u));
        }
    }

    let mut res = JointAmplitude {
        domain: Domain::FarFieldWavevector,
        axis_i: q_i,
        axis_s: q_s,
        values: out,
        norm_constant: amp.norm_constant,
        photon: amp.photon,
    };
    res.normalize()?;
    Ok(res)
}

/// One unitary padded DFT along `axis`, kernel e^{sign * i * (q/2pi) * x}.
/// Returns the canonical position axis and the transformed matrix.
fn dft_axis(
    values: &Array2<Complex64>,
    axis_q: &[f64],
    axis: usize,
    pad: usize,
    sign: f64,
) -> (Vec<f64>, Array2<Complex64>) {
    let n = axis_q.len();
    let big = pad * n;
    let dq = axis_q[1] - axis_q[0];
    let dnu = dq / TWO_PI;
    let dx = TWO_PI / (big as f64 * dnu);
    let m_c = (big / 2) as isize;
    let x: Vec<f64> = (0..big).map(|m| (m as isize - m_c) as f64 * dx).collect();
    let nu0 = axis_q[0] / TWO_PI;
    let scale = dq / TWO_PI;

    // input twiddle e^{-sign*2pi*i*j*m_c/big}, output twiddle e^{sign*i*nu0*x_m}
    let pre: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -sign * TWO_PI * (j as f64) * (m_c as f64) / big as f64))
        .collect();
    let post: Vec<Complex64> = (0..big)
        .map(|m| Complex64::from_polar(1.0, sign * nu0 * x[m]) * scale)
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = if sign > 0.0 {
        planner.plan_fft_inverse(big)
    } else {
        planner.plan_fft_forward(big)
    };

    let (rows, cols) = (values.nrows(), values.ncols());
    let mut out = if axis == 0 {
        Array2::<Complex64>::zeros((big, cols))
    } else {
        Array2::<Complex64>::zeros((rows, big))
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); big];
    let lanes = if axis == 0 { cols } else { rows };
    for lane in 0..lanes {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for j in 0..n {
            let v = if axis == 0 {
                values[[j, lane]]
            } else {
                values[[lane, j]]
            };
            buf[j] = v * pre[j];
        }
        fft.process(&mut buf);
        for m in 0..big {
            let v = buf[m] * post[m];
            if axis == 0 {
                out[[m, lane]] = v;
            } else {
                out[[lane, m]] = v;
            }
        }
    }
    (x, out)
}

/// Transforms a far-field amplitude to the near field (position coordinates,
/// micrometres). Accepts angular input (resampled to wavevectors first) or
/// wavevector input. `pad >= 1` zero-pads the transform for finer position
/// sampling.
pub fn to_near_field_padded(amp: &JointAmplitude, pad: usize) -> Result<JointAmplitude> {
    let wv;
    let src = match amp.domain {
        Domain::FarFieldAngle => {
            wv = to_wavevector(amp)?;
            &wv
        }
        Domain::FarFieldWavevector => amp,
        Domain::NearFieldPosition => {
            return Err(CoreError::domain(
                "to_near_field expects a far-field amplitude".to_string(),
            ))
        }
    };
    if src.n_i() < MIN_POINTS || src.n_s() < MIN_POINTS {
        return Err(CoreError::Resolution(format!(
            "grid too coarse for a near-field transform: {}x{} (need >= {MIN_POINTS} per axis)",
            src.n_i(),
            src.n_s()
        )));
    }
    if pad == 0 {
        return Err(CoreError::invalid_one("padding factor must be >= 1"));
    }
    let (x_i, mid) = dft_axis(&src.values, &src.axis_i, 0, pad, SIGN_IDLER);
    let (x_s, out) = dft_axis(&mid, &src.axis_s, 1, pad, SIGN_SIGNAL);
    Ok(JointAmplitude {
        domain: Domain::NearFieldPosition,
        axis_i: x_i,
        axis_s: x_s,
        values: out,
        norm_constant: src.norm_constant,
        photon: src.photon,
    })
}

/// Near-field transform at unit padding.
pub fn to_near_field(amp: &JointAmplitude) -> Result<JointAmplitude> {
    to_near_field_padded(amp, 1)
}

/// Inverse of [`to_near_field`]: position back to transverse wavevectors.
/// Exact (to rounding) when the near field was produced at pad = 1.
pub fn to_far_field(amp: &JointAmplitude) -> Result<JointAmplitude> {
    if amp.domain != Domain::NearFieldPosition {
        return Err(CoreError::domain(
            "to_far_field expects a near-field amplitude".to_string(),
        ));
    }
    let inverse_axis = |values: &Array2<Complex64>,
                        axis_x: &[f64],
                        axis: usize,
                        sign: f64|
     -> (Vec<f64>, Array2<Complex64>) {
        let big = axis_x.len();
        let dx = axis_x[1] - axis_x[0];
        let dnu = TWO_PI / (big as f64 * dx);
        let dq = dnu * TWO_PI;
        let j_c = (big / 2) as isize;
        let q: Vec<f64> = (0..big).map(|j| (j as isize - j_c) as f64 * dq).collect();
        let nu0 = q[0] / TWO_PI;
        let scale = dx / TWO_PI;
        // f[j] = scale * e^{-s i nu_j x_0} * sum_m (g[m] e^{-s i nu0 m dx}) e^{-s 2pi i jm/N}
        let pre: Vec<Complex64> = (0..big)
            .map(|m| Complex64::from_polar(1.0, -sign * nu0 * m as f64 * dx))
            .collect();
        let post: Vec<Complex64> = (0..big)
            .map(|j| {
                Complex64::from_polar(
                    1.0,
                    -sign * (q[0] / TWO_PI + j as f64 * dnu) * axis_x[0],
                ) * scale
            })
            .collect();
        let mut planner = FftPlanner::<f64>::new();
        // inverse kernel e^{-sign * ...}
        let fft = if sign > 0.0 {
            planner.plan_fft_forward(big)
        } else {
            planner.plan_fft_inverse(big)
        };
        let (rows, cols) = (values.nrows(), values.ncols());
        let mut out = values.clone();
        let mut buf = vec![Complex64::new(0.0, 0.0); big];
        let lanes = if axis == 0 { cols } else { rows };
        for lane in 0..lanes {
            for m in 0..big {
                let v = if axis == 0 {
                    values[[m, lane]]
                } else {
                    values[[lane, m]]
                };
                buf[m] = v * pre[m];
            }
            fft.process(&mut buf);
            for j in 0..big {
                let v = buf[j] * post[j];
                if axis == 0 {
                    out[[j, lane]] = v;
                } else {
                    out[[lane, j]] = v;
                }
            }
        }
        (q, out)
    };
    let (q_i, mid) = inverse_axis(&amp.values, &amp.axis_i, 0, SIGN_IDLER);
    let (q_s, out) = inverse_axis(&mid, &amp.axis_s, 1, SIGN_SIGNAL);
    Ok(JointAmplitude {
        domain: Domain::FarFieldWavevector,
        axis_i: q_i,
        axis_s: q_s,
        values: out,
        norm_constant: amp.norm_constant,
        photon: amp.photon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{build_joint_amplitude, build_joint_amplitude_wavevector};
    use crate::dispersion::IndexModel;
    use crate::setup::{AngularGrid, OpticalSetup};
    use approx::assert_relative_eq;

    fn setup_138() -> OpticalSetup {
        OpticalSetup::new(1.38, 50.0, 532.0, 1064.0, 1064.0, IndexModel::mgo_ln_e()).unwrap()
    }

    fn norm_sq(amp: &JointAmplitude) -> f64 {
        amp.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * amp.step_i() * amp.step_s()
    }

    #[test]
    fn parseval_exact() {
        let grid = AngularGrid::new(50.0, 129).unwrap();
        let far = build_joint_amplitude_wavevector(&setup_138(), &grid).unwrap();
        assert_relative_eq!(norm_sq(&far), 1.0, epsilon = 1e-12);
        for pad in [1, 3] {
            let near = to_near_field_padded(&far, pad).unwrap();
            assert_eq!(near.domain, Domain::NearFieldPosition);
            assert_relative_eq!(norm_sq(&near), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn roundtrip_reproduces_far_field_tpi() {
        let grid = AngularGrid::new(50.0, 129).unwrap();
        let far = build_joint_amplitude_wavevector(&setup_138(), &grid).unwrap();
        let near = to_near_field(&far).unwrap();
        let back = to_far_field(&near).unwrap();
        assert_eq!(back.n_i(), far.n_i());
        let tpi_a = far.tpi();
        let tpi_b = back.tpi();
        let mut max_diff = 0.0f64;
        for (a, b) in tpi_a.iter().zip(tpi_b.iter()) {
            max_diff = max_diff.max((a - b).abs());
        }
        let peak = tpi_a.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            max_diff / peak < 1e-9,
            "roundtrip max-norm error {max_diff:.3e} vs peak {peak:.3e}"
        );
        for (qa, qb) in far.axis_i.iter().zip(back.axis_i.iter()) {
            assert_relative_eq!(qa, qb, epsilon = 1e-9);
        }
    }

    #[test]
    fn angular_input_resampled_automatically() {
        let grid = AngularGrid::new(50.0, 129).unwrap();
        let ang = build_joint_amplitude(&setup_138(), &grid).unwrap();
        let near = to_near_field(&ang).unwrap();
        assert_eq!(near.domain, Domain::NearFieldPosition);
        assert_relative_eq!(norm_sq(&near), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn resample_agrees_with_direct_wavevector_build() {
        let setup = setup_138();
        let err_at = |n: usize| -> f64 {
            let grid = AngularGrid::new(50.0, n).unwrap();
            let ang = build_joint_amplitude(&setup, &grid).unwrap();
            let res = to_wavevector(&ang).unwrap();
            let direct = build_joint_amplitude_wavevector(&setup, &grid).unwrap();
            let mut max_diff = 0.0f64;
            for (a, b) in res.values.iter().zip(direct.values.iter()) {
                max_diff = max_diff.max((a - b).norm());
            }
            let peak = direct
                .values
                .iter()
                .map(|v| v.norm())
                .fold(0.0f64, f64::max);
            max_diff / peak
        };
        let coarse = err_at(257);
        let fine = err_at(513);
        assert!(fine < 2.5e-3, "resample error at n=513: {fine:.3e}");
        // cubic interpolation converges around 4th order
        assert!(
            fine < coarse / 8.0,
            "resample error should drop fast: {coarse:.3e} -> {fine:.3e}"
        );
        let grid = AngularGrid::new(50.0, 257).unwrap();
        let res = to_wavevector(&build_joint_amplitude(&setup, &grid).unwrap()).unwrap();
        let direct = build_joint_amplitude_wavevector(&setup, &grid).unwrap();
        for (qa, qb) in res.axis_s.iter().zip(direct.axis_s.iter()) {
            assert_relative_eq!(qa, qb, epsilon = 1e-12);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let grid = AngularGrid::new(50.0, 33).unwrap();
        let far = build_joint_amplitude_wavevector(&setup_138(), &grid).unwrap();
        match to_near_field(&far) {
            Err(CoreError::Resolution(_)) => {}
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn near_field_stripe_on_diagonal() {
        // anti-correlated momenta -> photons born at the same transverse spot
        let grid = AngularGrid::new(50.0, 129).unwrap();
        let far = build_joint_amplitude_wavevector(&setup_138(), &grid).unwrap();
        let near = to_near_field(&far).unwrap();
        let tpi = near.tpi();
        let n = near.n_i();
        let c = n / 2;
        // compare diagonal vs anti-diagonal mass away from the center
        let mut diag = 0.0;
        let mut anti = 0.0;
        for d in 1..(n / 4) {
            diag += tpi[[c + d, c + d]] + tpi[[c - d, c - d]];
            anti += tpi[[c + d, c - d]] + tpi[[c - d, c + d]];
        }
        assert!(
            diag > 5.0 * anti,
            "expected correlation along x_i = x_s: diag={diag:.3e} anti={anti:.3e}"
        );
    }
}
