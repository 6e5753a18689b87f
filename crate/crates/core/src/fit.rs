//! Nonlinear least-squares recovery of physical parameters from scan data.
//!
//! Damped (Levenberg-Marquardt) least squares with Poisson weighting.
//! The Gaussian model carries an analytic Jacobian; the knife-edge model
//! differentiates its integrated forward profile by central differences and
//! evaluates it with the same integrator the scan simulator uses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scans::{knife_integrator_from_setup, ScanResult};
use crate::setup::OpticalSetup;

const MAX_ITERATIONS: usize = 200;
const PARAM_TOL: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-10;
const FD_REL_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// 1-sigma uncertainty from the scaled covariance.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// Row-major covariance matrix.
    pub covariance: Vec<Vec<f64>>,
    /// Weighted sum of squared residuals at the solution.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted cost after every accepted step (non-increasing).
    pub cost_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Fit options for the knife profile model.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Cartesian grid size of the knife integrator.
    pub integrator_n: usize,
    /// Angular aperture of the collection geometry, degrees. Defaults to the
    /// largest scan position; set it to the true aperture when the scan does
    /// not reach full opening.
    pub aperture_deg: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            integrator_n: 257,
            aperture_deg: None,
        }
    }
}

/// Model evaluated at every scan position for a parameter vector; returns
/// predictions and, if available, the analytic Jacobian (m x p).
trait FitModel {
    fn predict(&self, params: &[f64], out: &mut [f64]);
    fn jacobian(&self, params: &[f64]) -> Option<DMatrix<f64>>;
    fn names(&self) -> Vec<String>;
}

struct GaussianModel {
    x: Vec<f64>,
}

impl FitModel for GaussianModel {
    fn predict(&self, p: &[f64], out: &mut [f64]) {
        let (a, x0, w, b) = (p[0], p[1], p[2], p[3]);
        for (o, &x) in out.iter_mut().zip(&self.x) {
            let d = x - x0;
            *o = a * (-d * d / (2.0 * w * w)).exp() + b;
        }
    }

    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        let (a, x0, w) = (p[0], p[1], p[2]);
        let m = self.x.len();
        let mut j = DMatrix::<f64>::zeros(m, 4);
        for (row, &x) in self.x.iter().enumerate() {
            let d = x - x0;
            let e = (-d * d / (2.0 * w * w)).exp();
            j[(row, 0)] = e;
            j[(row, 1)] = a * e * d / (w * w);
            j[(row, 2)] = a * e * d * d / (w * w * w);
            j[(row, 3)] = 1.0;
        }
        Some(j)
    }

    fn names(&self) -> Vec<String> {
        ["amplitude", "center", "width", "offset"]
            .map(String::from)
            .to_vec()
    }
}

struct KnifeModel<'a> {
    positions: Vec<f64>,
    setup: &'a OpticalSetup,
    theta_max_deg: f64,
    integrator_n: usize,
}

impl KnifeModel<'_> {
    fn profile(&self, length_um: f64, out: &mut [f64]) {
        // invalid lengths yield a flat profile, pushing the optimizer back
        if !(length_um > 0.0) {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let integ = knife_integrator_from_setup(
            self.setup,
            length_um,
            self.theta_max_deg,
            self.integrator_n,
        )
        .expect("validated setup");
        for (o, &p) in out.iter_mut().zip(&self.positions) {
            *o = integ.fraction(p);
        }
    }
}

impl FitModel for KnifeModel<'_> {
    fn predict(&self, p: &[f64], out: &mut [f64]) {
        let (length, scale, offset) = (p[0], p[1], p[2]);
        self.profile(length, out);
        for v in out.iter_mut() {
            *v = scale * *v + offset;
        }
    }

    fn jacobian(&self, _params: &[f64]) -> Option<DMatrix<f64>> {
        None // finite differences
    }

    fn names(&self) -> Vec<String> {
        ["effective_L", "scale", "offset"].map(String::from).to_vec()
    }
}

fn fd_jacobian(model: &dyn FitModel, params: &[f64], m: usize) -> DMatrix<f64> {
    let p = params.len();
    let mut j = DMatrix::<f64>::zeros(m, p);
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    let mut work = params.to_vec();
    for col in 0..p {
        let h = FD_REL_STEP * params[col].abs().max(1e-8);
        work[col] = params[col] + h;
        model.predict(&work, &mut plus);
        work[col] = params[col] - h;
        model.predict(&work, &mut minus);
        work[col] = params[col];
        for row in 0..m {
            j[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    j
}

fn weighted_cost(y: &[f64], f: &[f64], w: &[f64]) -> f64 {
    y.iter()
        .zip(f)
        .zip(w)
        .map(|((y, f), w)| w * (y - f) * (y - f))
        .sum()
}

fn lm_fit(
    model: &dyn FitModel,
    y: &[f64],
    weights: &[f64],
    init: Vec<f64>,
) -> Result<FitResult> {
    let m = y.len();
    let p = init.len();
    let mut params = init;
    let mut pred = vec![0.0; m];
    model.predict(&params, &mut pred);
    let mut cost = weighted_cost(y, &pred, weights);
    if !cost.is_finite() {
        return Err(CoreError::Numeric(
            "initial model evaluation is not finite".to_string(),
        ));
    }
    let mut lambda = 1e-3;
    let mut cost_trace = vec![cost];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let j = model
            .jacobian(&params)
            .unwrap_or_else(|| fd_jacobian(model, &params, m));
        // weighted normal equations
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut g = DVector::<f64>::zeros(p);
        for row in 0..m {
            let r = y[row] - pred[row];
            let w = weights[row];
            for c1 in 0..p {
                g[c1] += w * j[(row, c1)] * r;
                for c2 in 0..p {
                    a[(c1, c2)] += w * j[(row, c1)] * j[(row, c2)];
                }
            }
        }
        grad_norm = g.amax();
        if grad_norm < GRAD_TOL {
            converged = true;
            break;
        }

        let mut stepped = false;
        while lambda < 1e12 {
            let mut damped = a.clone();
            for d in 0..p {
                damped[(d, d)] += lambda * a[(d, d)].max(1e-30);
            }
            let Some(delta) = damped.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params
                .iter()
                .zip(delta.iter())
                .map(|(p, d)| p + d)
                .collect();
            let mut trial_pred = vec![0.0; m];
            model.predict(&trial, &mut trial_pred);
            let trial_cost = weighted_cost(y, &trial_pred, weights);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_step = params
                    .iter()
                    .zip(delta.iter())
                    .map(|(p, d)| d.abs() / p.abs().max(1e-12))
                    .fold(0.0f64, f64::max);
                params = trial;
                pred = trial_pred;
                cost = trial_cost;
                cost_trace.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                if rel_step < PARAM_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped || converged {
            // damping exhausted without improvement also terminates
            converged = converged || !stepped && grad_norm < 1e-6;
            break;
        }
    }

    // covariance: (J^T W J)^-1 scaled by reduced chi-square
    let j = model
        .jacobian(&params)
        .unwrap_or_else(|| fd_jacobian(model, &params, m));
    let mut a = DMatrix::<f64>::zeros(p, p);
    for row in 0..m {
        let w = weights[row];
        for c1 in 0..p {
            for c2 in 0..p {
                a[(c1, c2)] += w * j[(row, c1)] * j[(row, c2)];
            }
        }
    }
    let dof = (m.saturating_sub(p)).max(1) as f64;
    let scale = cost / dof;
    let covariance = a
        .clone()
        .try_inverse()
        .map(|inv| inv * scale)
        .unwrap_or_else(|| DMatrix::<f64>::from_element(p, p, f64::NAN));
    let names = model.names();
    let parameters = (0..p)
        .map(|k| FitParameter {
            name: names[k].clone(),
            value: params[k],
            sigma: covariance[(k, k)].abs().sqrt(),
        })
        .collect();
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "no convergence after {iterations} iterations (gradient norm {grad_norm:.3e})"
        ));
    }
    Ok(FitResult {
        parameters,
        covariance: (0..p)
            .map(|r| (0..p).map(|c| covariance[(r, c)]).collect())
            .collect(),
        residual_norm: cost,
        iterations,
        converged,
        cost_trace,
        warnings,
    })
}

/// Poisson weights 1/max(raw, 1).
fn poisson_weights(raw: &[u64]) -> Vec<f64> {
    raw.iter().map(|&r| 1.0 / (r.max(1) as f64)).collect()
}

/// Fits A exp(-(x-x0)^2/(2 w^2)) + b to a scan. Width is reported with its
/// 1-sigma uncertainty from the covariance.
pub fn fit_gaussian(data: &ScanResult) -> Result<FitResult> {
    if data.len() < 5 {
        return Err(CoreError::FitInput(format!(
            "need at least 5 data points, got {}",
            data.len()
        )));
    }
    let y = data.fit_counts();
    let all_equal = y.windows(2).all(|w| w[0] == w[1]);
    if all_equal {
        return Err(CoreError::FitInput(
            "all counts are equal; nothing to fit".to_string(),
        ));
    }
    let weights = poisson_weights(&data.raw_counts);
    let model = GaussianModel {
        x: data.positions.clone(),
    };
    // moment initialization
    let b0 = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let a0 = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b0;
    let excess: Vec<f64> = y.iter().map(|&v| (v - b0).max(0.0)).collect();
    let total: f64 = excess.iter().sum();
    let x0 = data
        .positions
        .iter()
        .zip(&excess)
        .map(|(x, e)| x * e)
        .sum::<f64>()
        / total;
    let var = data
        .positions
        .iter()
        .zip(&excess)
        .map(|(x, e)| (x - x0) * (x - x0) * e)
        .sum::<f64>()
        / total;
    let step = (data.positions[1] - data.positions[0]).abs();
    let w0 = var.sqrt().max(step);
    let mut result = lm_fit(&model, &y, &weights, vec![a0, x0, w0, b0])?;
    // width sign is a gauge freedom of the model
    if let Some(w) = result.parameters.iter_mut().find(|p| p.name == "width") {
        w.value = w.value.abs();
    }
    Ok(result)
}

/// Fits the knife forward model (free effective length, scale, baseline) to
/// a knife-edge scan using the simulator's integrator.
pub fn fit_knife_profile(
    data: &ScanResult,
    setup_prior: &OpticalSetup,
    opts: FitOptions,
) -> Result<FitResult> {
    if data.len() < 8 {
        return Err(CoreError::FitInput(format!(
            "need at least 8 data points spanning closed to open, got {}",
            data.len()
        )));
    }
    let y = data.fit_counts();
    let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(y_max > y_min) {
        return Err(CoreError::FitInput(
            "profile has no dynamic range".to_string(),
        ));
    }
    let weights = poisson_weights(&data.raw_counts);
    let theta_max = opts.aperture_deg.unwrap_or_else(|| {
        data.positions
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let model = KnifeModel {
        positions: data.positions.clone(),
        setup: setup_prior,
        theta_max_deg: theta_max,
        integrator_n: opts.integrator_n,
    };
    let init = vec![setup_prior.length_um, y_max - y_min, y_min];
    let mut result = lm_fit(&model, &y, &weights, init)?;

    // data-quality check: monotone within counting noise?
    let mut violations = 0usize;
    for w in y.windows(2) {
        let noise = 3.0 * w[0].abs().max(1.0).sqrt();
        if w[1] < w[0] - noise {
            violations += 1;
        }
    }
    if violations > 0 {
        result.warnings.push(format!(
            "knife profile decreases beyond noise at {violations} step(s)"
        ));
    }
    if let Some(l) = result.parameters.iter_mut().find(|p| p.name == "effective_L") {
        l.value = l.value.abs();
    }
    Ok(result)
}
