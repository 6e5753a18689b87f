//! Physics configuration: crystal, pump, and discretization grid.

use serde::{Deserialize, Serialize};

use crate::dispersion::{wavevector, IndexModel};
use crate::error::{CoreError, Result};

/// Relative tolerance on the energy-conservation invariant
/// 1/lambda_p = 1/lambda_s + 1/lambda_i.
pub const ENERGY_CONSERVATION_TOL: f64 = 1e-9;

/// Crystal length, pump waist, wavelengths, and dispersion model.
///
/// The idler wavelength always satisfies energy conservation to
/// [`ENERGY_CONSERVATION_TOL`]; use [`OpticalSetup::with_derived_idler`]
/// when only pump and signal are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalSetup {
    /// Crystal length in micrometres.
    pub length_um: f64,
    /// Pump waist (one standard deviation of the pump amplitude profile),
    /// micrometres.
    pub waist_um: f64,
    /// Vacuum wavelengths in nanometres.
    pub lambda_p_nm: f64,
    pub lambda_s_nm: f64,
    pub lambda_i_nm: f64,
    pub index_model: IndexModel,
}

impl OpticalSetup {
    pub fn new(
        length_um: f64,
        waist_um: f64,
        lambda_p_nm: f64,
        lambda_s_nm: f64,
        lambda_i_nm: f64,
        index_model: IndexModel,
    ) -> Result<Self> {
        let setup = OpticalSetup {
            length_um,
            waist_um,
            lambda_p_nm,
            lambda_s_nm,
            lambda_i_nm,
            index_model,
        };
        setup.validate()?;
        Ok(setup)
    }

    /// Builds a setup with the idler wavelength derived exactly from
    /// 1/lambda_i = 1/lambda_p - 1/lambda_s.
    pub fn with_derived_idler(
        length_um: f64,
        waist_um: f64,
        lambda_p_nm: f64,
        lambda_s_nm: f64,
        index_model: IndexModel,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if !(lambda_p_nm > 0.0) {
            problems.push(format!("pump wavelength {lambda_p_nm} nm must be positive"));
        }
        if !(lambda_s_nm > lambda_p_nm) {
            problems.push(format!(
                "signal wavelength {lambda_s_nm} nm must exceed the pump wavelength"
            ));
        }
        if !problems.is_empty() {
            return Err(CoreError::Invalid(problems));
        }
        let inv_i = 1.0 / lambda_p_nm - 1.0 / lambda_s_nm;
        Self::new(
            length_um,
            waist_um,
            lambda_p_nm,
            lambda_s_nm,
            1.0 / inv_i,
            index_model,
        )
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.length_um > 0.0) {
            problems.push(format!("crystal length {} um must be > 0", self.length_um));
        }
        if !(self.waist_um > 0.0) {
            problems.push(format!("pump waist {} um must be > 0", self.waist_um));
        }
        for (name, l) in [
            ("pump", self.lambda_p_nm),
            ("signal", self.lambda_s_nm),
            ("idler", self.lambda_i_nm),
        ] {
            if !(l > 0.0) {
                problems.push(format!("{name} wavelength {l} nm must be > 0"));
            }
        }
        if problems.is_empty() {
            let lhs = 1.0 / self.lambda_p_nm;
            let rhs = 1.0 / self.lambda_s_nm + 1.0 / self.lambda_i_nm;
            if ((lhs - rhs) / lhs).abs() > ENERGY_CONSERVATION_TOL {
                problems.push(format!(
                    "energy conservation violated: 1/{} != 1/{} + 1/{} (relative {:.2e})",
                    self.lambda_p_nm,
                    self.lambda_s_nm,
                    self.lambda_i_nm,
                    ((lhs - rhs) / lhs).abs()
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CoreError::Invalid(problems))
        }
    }

    /// Wavevector magnitudes (k_p, k_s, k_i) in rad/um.
    pub fn wavevectors(&self) -> Result<(f64, f64, f64)> {
        Ok((
            wavevector(self.lambda_p_nm, &self.index_model)?,
            wavevector(self.lambda_s_nm, &self.index_model)?,
            wavevector(self.lambda_i_nm, &self.index_model)?,
        ))
    }
}

/// Uniform symmetric angular grid over [-theta_max, theta_max] degrees.
///
/// `n` is odd so theta = 0 is a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub theta_max_deg: f64,
    pub n: usize,
}

impl AngularGrid {
    pub fn new(theta_max_deg: f64, n: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if !(theta_max_deg > 0.0 && theta_max_deg < 90.0) {
            problems.push(format!(
                "theta_max {theta_max_deg} deg must lie in (0, 90)"
            ));
        }
        if n < 3 || n % 2 == 0 {
            problems.push(format!("grid n = {n} must be odd and >= 3"));
        }
        if problems.is_empty() {
            Ok(AngularGrid { theta_max_deg, n })
        } else {
            Err(CoreError::Invalid(problems))
        }
    }

    /// Axis values in degrees, strictly increasing, symmetric about 0.
    pub fn axis_deg(&self) -> Vec<f64> {
        let half = (self.n / 2) as isize;
        let step = self.theta_max_deg / half as f64;
        (-half..=half).map(|j| j as f64 * step).collect()
    }

    pub fn step_deg(&self) -> f64 {
        self.theta_max_deg / (self.n / 2) as f64
    }
}

impl Default for AngularGrid {
    /// Default grid: covers the widest emission treated here with margin.
    fn default() -> Self {
        AngularGrid {
            theta_max_deg: 35.0,
            n: 1025,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_idler_is_exact() {
        let s = OpticalSetup::with_derived_idler(
            6.7,
            60.0,
            532.0,
            797.0,
            IndexModel::mgo_ln_e(),
        )
        .unwrap();
        let lhs = 1.0 / s.lambda_p_nm;
        let rhs = 1.0 / s.lambda_s_nm + 1.0 / s.lambda_i_nm;
        assert!(((lhs - rhs) / lhs).abs() < 1e-15);
        // 1/532 - 1/797 = 265/424004 -> idler 1600.0151 nm
        assert!((s.lambda_i_nm - 1600.0150943396).abs() < 1e-6);
    }

    #[test]
    fn off_conservation_idler_rejected() {
        let err = OpticalSetup::new(
            6.7,
            60.0,
            532.0,
            797.0,
            1600.0,
            IndexModel::mgo_ln_e(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("energy conservation"));
    }

    #[test]
    fn validation_lists_every_problem() {
        let err = OpticalSetup::new(-1.0, 0.0, 532.0, 797.0, 1600.0151, IndexModel::constant(2.0))
            .unwrap_err();
        match err {
            CoreError::Invalid(problems) => assert!(problems.len() >= 2, "{problems:?}"),
            other => panic!("expected Invalid, got {other}"),
        }
    }

    #[test]
    fn grid_axis_symmetric_and_increasing() {
        let g = AngularGrid::new(35.0, 9).unwrap();
        let ax = g.axis_deg();
        assert_eq!(ax.len(), 9);
        assert_eq!(ax[4], 0.0);
        assert_eq!(ax[0], -35.0);
        assert_eq!(ax[8], 35.0);
        for w in ax.windows(2) {
            assert!(w[1] > w[0]);
        }
        for j in 0..ax.len() {
            assert_eq!(ax[j], -ax[ax.len() - 1 - j]);
        }
    }

    #[test]
    fn even_or_tiny_grid_rejected() {
        assert!(AngularGrid::new(35.0, 1024).is_err());
        assert!(AngularGrid::new(35.0, 1).is_err());
        assert!(AngularGrid::new(0.0, 9).is_err());
    }
}
