//! Forward simulation of the coincidence measurements: knife-edge scan,
//! slit scan, Poisson counting with accidentals, and the detection
//! efficiency budget.
//!
//! Counting draws are reproducible: each scan position uses an independent
//! RNG stream derived from (rng_seed, position index), so results do not
//! depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::amplitude::{Domain, JointAmplitude};
use crate::error::{CoreError, Result};
use crate::setup::OpticalSetup;

/// Acquisition and rate parameters for coincidence counting.
/// `acquisition_time_s` is the dwell time per scan position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingConfig {
    pub acquisition_time_s: f64,
    pub coincidence_window_ns: f64,
    pub singles_rate_signal_hz: f64,
    pub singles_rate_idler_hz: f64,
    /// True pair rate with nothing blocked.
    pub pair_rate_open_hz: f64,
    pub rng_seed: u64,
}

impl CountingConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.acquisition_time_s > 0.0) {
            problems.push(format!(
                "acquisition time {} s must be > 0",
                self.acquisition_time_s
            ));
        }
        if !(self.coincidence_window_ns > 0.0) {
            problems.push(format!(
                "coincidence window {} ns must be > 0",
                self.coincidence_window_ns
            ));
        }
        for (name, r) in [
            ("signal singles rate", self.singles_rate_signal_hz),
            ("idler singles rate", self.singles_rate_idler_hz),
            ("open pair rate", self.pair_rate_open_hz),
        ] {
            if !(r >= 0.0) {
                problems.push(format!("{name} {r} /s must be >= 0"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CoreError::Invalid(problems))
        }
    }

    /// Accidental-coincidence rate R_s * R_i * tau in counts/s.
    pub fn accidental_rate_hz(&self) -> f64 {
        self.singles_rate_signal_hz * self.singles_rate_idler_hz * self.coincidence_window_ns * 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Knife,
    Slit,
    SetRow,
}

/// One simulated scan: positions, expected true-pair counts, raw and
/// accidental draws, and (after subtraction) corrected counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResult {
    pub scan_kind: ScanKind,
    /// Scan coordinate per record (degrees).
    pub positions: Vec<f64>,
    /// Noise-free expected true-pair counts per dwell.
    pub expected: Vec<f64>,
    pub raw_counts: Vec<u64>,
    pub accidental_counts: Vec<u64>,
    /// raw - accidental, present once accidentals have been subtracted.
    pub corrected_counts: Option<Vec<f64>>,
    pub counting: CountingConfig,
}

impl ScanResult {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Counts used for fitting: corrected when available, raw otherwise.
    pub fn fit_counts(&self) -> Vec<f64> {
        match &self.corrected_counts {
            Some(c) => c.clone(),
            None => self.raw_counts.iter().map(|&v| v as f64).collect(),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

fn poisson_draw(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("positive finite Poisson mean");
    dist.sample(rng).round() as u64
}

/// Draws (raw, accidental) counts for one dwell at the given expected true
/// pair rate. `stream` selects the deterministic RNG stream; scans pass the
/// position index.
pub fn simulate_counts(
    expected_rate_hz: f64,
    counting: &CountingConfig,
    stream: u64,
) -> Result<(u64, u64)> {
    if !(expected_rate_hz >= 0.0) || !expected_rate_hz.is_finite() {
        return Err(CoreError::domain(format!(
            "expected rate {expected_rate_hz} /s must be finite and >= 0"
        )));
    }
    counting.validate()?;
    let t = counting.acquisition_time_s;
    let r_acc = counting.accidental_rate_hz();
    let mut rng = stream_rng(counting.rng_seed, stream);
    let raw = poisson_draw(&mut rng, (expected_rate_hz + r_acc) * t);
    let accidental = poisson_draw(&mut rng, r_acc * t);
    Ok((raw, accidental))
}

/// Subtracts the measured accidentals from the raw counts. Corrected counts
/// may be negative; they are an unbiased estimator and are not clamped.
pub fn subtract_accidentals(result: &ScanResult) -> Result<ScanResult> {
    if result.corrected_counts.is_some() {
        return Err(CoreError::AlreadyCorrected);
    }
    let corrected = result
        .raw_counts
        .iter()
        .zip(&result.accidental_counts)
        .map(|(&r, &a)| r as f64 - a as f64)
        .collect();
    let mut out = result.clone();
    out.corrected_counts = Some(corrected);
    Ok(out)
}

/// Cumulative transverse-plane knife transmission.
///
/// The pair density in the transverse plane is the on-stripe TPI extended
/// azimuthally, sampled on an n x n Cartesian (k_x, k_y) grid; a knife at
/// angle theta_k passes pairs with |k_x| <= min(k_s, k_i) sin(theta_k).
pub(crate) struct KnifeIntegrator {
    k_min: f64,
    q_max: f64,
    kx: Vec<f64>,
    /// Column marginal g(k_x) (integral over k_y).
    g: Vec<f64>,
}

impl KnifeIntegrator {
    /// `stripe(q)` is the pair intensity at radial transverse wavevector
    /// q in [0, q_max]; values beyond q_max are clamped.
    pub fn new(stripe: &dyn Fn(f64) -> f64, k_min: f64, q_max: f64, n: usize) -> Self {
        let half = (n / 2) as isize;
        let step = q_max / half as f64;
        let kx: Vec<f64> = (-half..=half).map(|j| j as f64 * step).collect();
        // radial lookup table, then column sums
        let table: Vec<f64> = (0..n)
            .map(|j| stripe((j as f64 / (n - 1) as f64) * q_max))
            .collect();
        let lookup = |q: f64| -> f64 {
            let u = (q.min(q_max) / q_max) * (n - 1) as f64;
            let j = (u.floor() as usize).min(n - 2);
            let t = u - j as f64;
            table[j] * (1.0 - t) + table[j + 1] * t
        };
        let mut g = vec![0.0; n];
        for (jx, &x) in kx.iter().enumerate() {
            let mut col = 0.0;
            for &y in &kx {
                col += lookup((x * x + y * y).sqrt());
            }
            g[jx] = col * step;
        }
        KnifeIntegrator {
            k_min,
            q_max,
            kx,
            g,
        }
    }

    /// Fraction of pairs passing a knife at `theta_k_deg`, in [0, 1],
    /// smooth in the angle (trapezoid integral with an interpolated tip).
    pub fn fraction(&self, theta_k_deg: f64) -> f64 {
        let c = (self.k_min * theta_k_deg.to_radians().sin()).clamp(0.0, self.q_max);
        self.integral_abs_below(c) / self.integral_abs_below(self.q_max)
    }

    fn integral_abs_below(&self, c: f64) -> f64 {
        // 2 * int_0^c g(kx) dkx using the even symmetry of g
        let n = self.kx.len();
        let half = n / 2;
        let step = self.kx[1] - self.kx[0];
        let u = (c / step).min((half) as f64);
        let j_full = u.floor() as usize;
        let mut acc = 0.0;
        for j in 0..j_full {
            acc += 0.5 * (self.g[half + j] + self.g[half + j + 1]) * step;
        }
        if j_full < half {
            let t = u - j_full as f64;
            let g0 = self.g[half + j_full];
            let g1 = self.g[half + j_full + 1];
            let g_c = g0 * (1.0 - t) + g1 * t;
            acc += 0.5 * (g0 + g_c) * t * step;
        }
        2.0 * acc
    }
}

fn catmull_1d(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    0.5 * (2.0 * p1
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

/// Bicubic TPI lookup on a uniform-axis amplitude. The knife model traces
/// the sharp correlation ridge, where bilinear sampling would bias the peak.
fn bicubic_tpi(amp: &JointAmplitude, tpi: &ndarray::Array2<f64>, ti: f64, ts: f64) -> f64 {
    let ui = (ti - amp.axis_i[0]) / amp.step_i();
    let us = (ts - amp.axis_s[0]) / amp.step_s();
    let (ni, ns) = (amp.n_i() as isize, amp.n_s() as isize);
    let i0 = (ui.floor() as isize).clamp(0, ni - 1);
    let s0 = (us.floor() as isize).clamp(0, ns - 1);
    let (fi, fs) = (ui - i0 as f64, us - s0 as f64);
    let mut rows = [0.0; 4];
    for (r, row) in rows.iter_mut().enumerate() {
        let i = (i0 + r as isize - 1).clamp(0, ni - 1) as usize;
        let at = |d: isize| tpi[[i, (s0 + d).clamp(0, ns - 1) as usize]];
        *row = catmull_1d(at(-1), at(0), at(1), at(2), fs);
    }
    catmull_1d(rows[0], rows[1], rows[2], rows[3], fi).max(0.0)
}

/// Builds the knife integrator from an angular-domain amplitude by tracing
/// the TPI along the anti-correlated ridge q -> (asin(q/k_i), asin(q/k_s)).
pub(crate) fn knife_integrator_from_amplitude(
    amp: &JointAmplitude,
    n: usize,
) -> Result<KnifeIntegrator> {
    if amp.domain != Domain::FarFieldAngle {
        return Err(CoreError::domain(
            "knife scan expects a far-field angular amplitude".to_string(),
        ));
    }
    let k_min = amp.photon.k_i.min(amp.photon.k_s);
    let theta_edge = amp.axis_i[amp.n_i() - 1]
        .min(amp.axis_s[amp.n_s() - 1])
        .to_radians();
    let q_max = k_min * theta_edge.sin();
    let tpi = amp.tpi();
    let k_i = amp.photon.k_i;
    let k_s = amp.photon.k_s;
    let stripe = move |q: f64| -> f64 {
        let ti = (q / k_i).asin().to_degrees();
        let ts = (q / k_s).asin().to_degrees();
        bicubic_tpi(amp, &tpi, ti, ts)
    };
    Ok(KnifeIntegrator::new(&stripe, k_min, q_max, n))
}

/// Builds the knife integrator from a setup at the given crystal length
/// (the fit's forward model); same integration routine as the simulator.
pub(crate) fn knife_integrator_from_setup(
    setup: &OpticalSetup,
    length_um: f64,
    theta_max_deg: f64,
    n: usize,
) -> Result<KnifeIntegrator> {
    let (k_p, k_s, k_i) = setup.wavevectors()?;
    let k_min = k_i.min(k_s);
    let q_max = k_min * theta_max_deg.to_radians().sin();
    let stripe = move |q: f64| -> f64 {
        let dk_par = k_p - (k_s * k_s - q * q).sqrt() - (k_i * k_i - q * q).sqrt();
        let a = crate::amplitude::phase_matching(dk_par, length_um);
        a * a
    };
    Ok(KnifeIntegrator::new(&stripe, k_min, q_max, n))
}

/// Simulates a knife-edge coincidence scan. Knife positions are angles from
/// the collinear direction, degrees, within [0, theta_max] of the grid.
pub fn knife_edge_scan(
    amp: &JointAmplitude,
    knife_positions_deg: &[f64],
    counting: &CountingConfig,
) -> Result<ScanResult> {
    counting.validate()?;
    let theta_max = amp.axis_i[amp.n_i() - 1].min(amp.axis_s[amp.n_s() - 1]);
    for &p in knife_positions_deg {
        if !(0.0..=theta_max).contains(&p) {
            return Err(CoreError::domain(format!(
                "knife position {p} deg outside [0, {theta_max}]"
            )));
        }
    }
    let integrator = knife_integrator_from_amplitude(amp, amp.n_i())?;
    let t = counting.acquisition_time_s;
    let mut expected = Vec::with_capacity(knife_positions_deg.len());
    let mut raw = Vec::with_capacity(knife_positions_deg.len());
    let mut acc = Vec::with_capacity(knife_positions_deg.len());
    for (idx, &p) in knife_positions_deg.iter().enumerate() {
        let rate = counting.pair_rate_open_hz * integrator.fraction(p);
        let (r, a) = simulate_counts(rate, counting, idx as u64)?;
        expected.push(rate * t);
        raw.push(r);
        acc.push(a);
    }
    Ok(ScanResult {
        scan_kind: ScanKind::Knife,
        positions: knife_positions_deg.to_vec(),
        expected,
        raw_counts: raw,
        accidental_counts: acc,
        corrected_counts: None,
        counting: counting.clone(),
    })
}

/// Per-sample overlap weights of a rectangular window with each grid cell
/// [a_j - h/2, a_j + h/2]; boundary cells enter fractionally so the window
/// integral is smooth in the window position.
fn window_weights(axis: &[f64], center: f64, width: f64) -> (usize, usize, Vec<f64>) {
    let h = axis[1] - axis[0];
    let (lo_edge, hi_edge) = (center - width / 2.0, center + width / 2.0);
    let lo = axis.partition_point(|&a| a + h / 2.0 <= lo_edge);
    let hi = axis.partition_point(|&a| a - h / 2.0 < hi_edge);
    let weights = (lo..hi)
        .map(|j| {
            let cell_lo = axis[j] - h / 2.0;
            let cell_hi = axis[j] + h / 2.0;
            ((cell_hi.min(hi_edge) - cell_lo.max(lo_edge)) / h).clamp(0.0, 1.0)
        })
        .collect();
    (lo, hi, weights)
}

/// Noise-free expected pair fraction through a slit of width `w` centred at
/// lab angle `theta0`: the signal passes W(theta_s; theta0, w) and the idler,
/// whose lab angle is mirrored, passes W(theta_i; -theta0, w).
fn slit_fraction(amp: &JointAmplitude, tpi: &ndarray::Array2<f64>, theta0: f64, w: f64) -> f64 {
    let da = amp.step_i() * amp.step_s();
    let (i_lo, i_hi, wi) = window_weights(&amp.axis_i, -theta0, w);
    let (s_lo, s_hi, ws) = window_weights(&amp.axis_s, theta0, w);
    let mut total = 0.0;
    for i in i_lo..i_hi {
        let mut row = 0.0;
        for s in s_lo..s_hi {
            row += tpi[[i, s]] * ws[s - s_lo];
        }
        total += row * wi[i - i_lo];
    }
    total * da
}

/// Simulates a slit coincidence scan across the collinear direction.
pub fn slit_scan(
    amp: &JointAmplitude,
    slit_centers_deg: &[f64],
    slit_width_deg: f64,
    counting: &CountingConfig,
) -> Result<ScanResult> {
    counting.validate()?;
    if amp.domain != Domain::FarFieldAngle {
        return Err(CoreError::domain(
            "slit scan expects a far-field angular amplitude".to_string(),
        ));
    }
    let step = amp.step_i().max(amp.step_s());
    if slit_width_deg < 2.0 * step {
        return Err(CoreError::Resolution(format!(
            "slit width {slit_width_deg} deg below twice the grid step {step} deg"
        )));
    }
    let theta_max = amp.axis_s[amp.n_s() - 1];
    for &c in slit_centers_deg {
        if c.abs() > theta_max {
            return Err(CoreError::domain(format!(
                "slit center {c} deg outside the grid (|theta| <= {theta_max})"
            )));
        }
    }
    let tpi = amp.tpi();
    let t = counting.acquisition_time_s;
    let mut expected = Vec::with_capacity(slit_centers_deg.len());
    let mut raw = Vec::with_capacity(slit_centers_deg.len());
    let mut acc = Vec::with_capacity(slit_centers_deg.len());
    for (idx, &c) in slit_centers_deg.iter().enumerate() {
        let rate = counting.pair_rate_open_hz * slit_fraction(amp, &tpi, c, slit_width_deg);
        let (r, a) = simulate_counts(rate, counting, idx as u64)?;
        expected.push(rate * t);
        raw.push(r);
        acc.push(a);
    }
    Ok(ScanResult {
        scan_kind: ScanKind::Slit,
        positions: slit_centers_deg.to_vec(),
        expected,
        raw_counts: raw,
        accidental_counts: acc,
        corrected_counts: None,
        counting: counting.clone(),
    })
}

/// Per-arm transmission and loss fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConfig {
    pub detector_qe: f64,
    pub filter_transmission: f64,
    /// Fraction lost to internal reflection at the crystal exit.
    pub fresnel_loss: f64,
    pub coupling: f64,
}

impl EfficiencyConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("detector_qe", self.detector_qe),
            ("filter_transmission", self.filter_transmission),
            ("fresnel_loss", self.fresnel_loss),
            ("coupling", self.coupling),
        ] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CoreError::Invalid(problems))
        }
    }
}

/// (per-photon detection efficiency, pair correlation efficiency).
pub fn efficiency_budget(cfg: &EfficiencyConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let per_photon =
        cfg.detector_qe * cfg.filter_transmission * (1.0 - cfg.fresnel_loss) * cfg.coupling;
    Ok((per_photon, per_photon * per_photon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::build_joint_amplitude;
    use crate::dispersion::IndexModel;
    use crate::setup::AngularGrid;
    use approx::assert_relative_eq;

    fn counting(seed: u64) -> CountingConfig {
        CountingConfig {
            acquisition_time_s: 100.0,
            coincidence_window_ns: 1.0,
            singles_rate_signal_hz: 1e5,
            singles_rate_idler_hz: 1e5,
            pair_rate_open_hz: 50.0,
            rng_seed: seed,
        }
    }

    fn fig3_amp() -> JointAmplitude {
        let setup =
            OpticalSetup::with_derived_idler(6.6, 60.0, 532.0, 797.0, IndexModel::mgo_ln_e())
                .unwrap();
        build_joint_amplitude(&setup, &AngularGrid::new(35.0, 257).unwrap()).unwrap()
    }

    #[test]
    fn counts_deterministic_and_zero_when_silent() {
        let quiet = CountingConfig {
            singles_rate_signal_hz: 0.0,
            singles_rate_idler_hz: 0.0,
            ..counting(7)
        };
        assert_eq!(simulate_counts(0.0, &quiet, 0).unwrap(), (0, 0));
        let a = simulate_counts(12.5, &counting(42), 3).unwrap();
        let b = simulate_counts(12.5, &counting(42), 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_counts(12.5, &counting(42), 4).unwrap();
        assert_ne!(a, c, "different streams should differ");
    }

    #[test]
    fn accidental_mean_matches_rate_law() {
        // R_s = R_i = 1e5 /s, tau = 1 ns, T = 100 s -> mean 1000
        let cfg = counting(42);
        assert_relative_eq!(cfg.accidental_rate_hz() * 100.0, 1000.0, epsilon = 1e-9);
        let n = 1000;
        let mut sum = 0.0;
        for stream in 0..n {
            let (_, acc) = simulate_counts(0.0, &cfg, stream).unwrap();
            sum += acc as f64;
        }
        let mean = sum / n as f64;
        // standard error of the mean is sqrt(1000/1000) = 1
        assert!(
            (mean - 1000.0).abs() < 3.0,
            "accidental sample mean {mean} outside 3 sigma of 1000"
        );
    }

    #[test]
    fn subtraction_examples() {
        let base = ScanResult {
            scan_kind: ScanKind::Knife,
            positions: vec![0.0, 1.0],
            expected: vec![80.0, 0.0],
            raw_counts: vec![100, 5],
            accidental_counts: vec![20, 9],
            corrected_counts: None,
            counting: counting(1),
        };
        let sub = subtract_accidentals(&base).unwrap();
        let c = sub.corrected_counts.as_ref().unwrap();
        assert_eq!(c[0], 80.0);
        assert_eq!(c[1], -4.0); // preserved, not clamped
        match subtract_accidentals(&sub) {
            Err(CoreError::AlreadyCorrected) => {}
            other => panic!("expected idempotence error, got {other:?}"),
        }
    }

    #[test]
    fn knife_profile_monotone_with_limits() {
        let amp = fig3_amp();
        let positions: Vec<f64> = (0..11).map(|j| j as f64 * 3.5).collect();
        let scan = knife_edge_scan(&amp, &positions, &counting(5)).unwrap();
        for w in scan.expected.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "expected profile must be monotone");
        }
        // closed: ~0; open: pair_rate * T
        assert!(scan.expected[0] < 1e-9);
        assert_relative_eq!(
            scan.expected[10],
            50.0 * 100.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn knife_rejects_out_of_grid_position() {
        let amp = fig3_amp();
        assert!(knife_edge_scan(&amp, &[36.0], &counting(5)).is_err());
        assert!(knife_edge_scan(&amp, &[-1.0], &counting(5)).is_err());
    }

    #[test]
    fn knife_fraction_agrees_with_high_resolution_integration() {
        // oracle: the same geometry integrated at 10x the resolution
        let amp = fig3_amp();
        let coarse = knife_integrator_from_amplitude(&amp, 257).unwrap();
        let fine = knife_integrator_from_amplitude(&amp, 2571).unwrap();
        for p in [3.0, 7.0, 12.0, 20.0, 30.0] {
            let a = coarse.fraction(p);
            let b = fine.fraction(p);
            assert!(
                (a - b).abs() < 5e-3,
                "knife fraction at {p} deg: coarse {a} vs fine {b}"
            );
        }
    }

    #[test]
    fn slit_profile_even_and_peaked_at_collinear() {
        let setup =
            OpticalSetup::new(6.6, 60.0, 532.0, 1064.0, 1064.0, IndexModel::mgo_ln_e()).unwrap();
        let amp = build_joint_amplitude(&setup, &AngularGrid::new(35.0, 513).unwrap()).unwrap();
        let centers: Vec<f64> = (-20..=20).map(|j| j as f64 * 0.05).collect();
        let scan = slit_scan(&amp, &centers, 0.3, &counting(9)).unwrap();
        let n = centers.len();
        let mid = n / 2;
        for j in 0..n {
            assert_relative_eq!(
                scan.expected[j],
                scan.expected[n - 1 - j],
                max_relative = 1e-9
            );
        }
        for j in 0..n {
            assert!(scan.expected[j] <= scan.expected[mid] + 1e-12);
        }
    }

    #[test]
    fn slit_narrower_than_grid_rejected() {
        let amp = fig3_amp();
        match slit_scan(&amp, &[0.0], 0.1, &counting(1)) {
            Err(CoreError::Resolution(_)) => {}
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn efficiency_budget_products() {
        let all_unity = EfficiencyConfig {
            detector_qe: 1.0,
            filter_transmission: 1.0,
            fresnel_loss: 0.0,
            coupling: 1.0,
        };
        assert_eq!(efficiency_budget(&all_unity).unwrap(), (1.0, 1.0));
        let qe_half = EfficiencyConfig {
            detector_qe: 0.5,
            ..all_unity.clone()
        };
        let (_, pair) = efficiency_budget(&qe_half).unwrap();
        assert_relative_eq!(pair, 0.25, epsilon = 1e-15);
        let lossy = EfficiencyConfig {
            detector_qe: 0.5,
            filter_transmission: 0.5,
            fresnel_loss: 0.2,
            coupling: 1.0,
        };
        let (per, pair) = efficiency_budget(&lossy).unwrap();
        assert_relative_eq!(per, 0.2, epsilon = 1e-15);
        assert_relative_eq!(pair, 0.04, epsilon = 1e-15);
    }

    #[test]
    fn efficiency_rejects_out_of_range() {
        let bad = EfficiencyConfig {
            detector_qe: 1.4,
            filter_transmission: 0.5,
            fresnel_loss: -0.1,
            coupling: 1.0,
        };
        match efficiency_budget(&bad) {
            Err(CoreError::Invalid(problems)) => assert_eq!(problems.len(), 2),
            other => panic!("expected Invalid, got {other:?}"),
        }
    }
}
