//! Refractive-index models and wavevector magnitudes.
//!
//! The shipped default is an extraordinary-ray Sellmeier model for 5%
//! MgO-doped congruent lithium niobate, stored as data in
//! `data/sellmeier_mgo_ln_e.toml` and parsed at first use.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Sellmeier form `n^2 = constant + sum_j b_j/(lambda^2 - c_j) - d*lambda^2`,
/// lambda in micrometres, `c_j` in um^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierModel {
    pub name: String,
    /// Wavelength validity window in micrometres.
    pub valid_range_um: [f64; 2],
    pub constant: f64,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl SellmeierModel {
    pub fn n_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        let mut n2 = self.constant - self.d * l2;
        for (b, c) in self.b.iter().zip(&self.c) {
            n2 += b / (l2 - c);
        }
        n2
    }
}

/// Per-wavelength refractive index, either constant or Sellmeier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexModel {
    Constant { n: f64 },
    Sellmeier(SellmeierModel),
}

static MGO_LN_E_TOML: &str = include_str!("../data/sellmeier_mgo_ln_e.toml");

impl IndexModel {
    /// The shipped MgO:LN extraordinary-ray dispersion.
    pub fn mgo_ln_e() -> Self {
        let model: SellmeierModel =
            toml::from_str(MGO_LN_E_TOML).expect("shipped Sellmeier data is well-formed");
        IndexModel::Sellmeier(model)
    }

    pub fn constant(n: f64) -> Self {
        IndexModel::Constant { n }
    }

    /// Refractive index at a vacuum wavelength in nanometres.
    pub fn index(&self, lambda_nm: f64) -> Result<f64> {
        if !(lambda_nm > 0.0) {
            return Err(CoreError::IndexUndefined {
                lambda_nm,
                reason: "wavelength must be positive".into(),
            });
        }
        match self {
            IndexModel::Constant { n } => {
                if *n > 0.0 {
                    Ok(*n)
                } else {
                    Err(CoreError::IndexUndefined {
                        lambda_nm,
                        reason: format!("constant index {n} is not positive"),
                    })
                }
            }
            IndexModel::Sellmeier(m) => {
                let lambda_um = lambda_nm * 1e-3;
                if lambda_um < m.valid_range_um[0] || lambda_um > m.valid_range_um[1] {
                    return Err(CoreError::IndexUndefined {
                        lambda_nm,
                        reason: format!(
                            "outside validity range [{}, {}] um of model '{}'",
                            m.valid_range_um[0], m.valid_range_um[1], m.name
                        ),
                    });
                }
                let l2 = lambda_um * lambda_um;
                for c in &m.c {
                    if (l2 - c).abs() < 1e-12 {
                        return Err(CoreError::IndexUndefined {
                            lambda_nm,
                            reason: format!("Sellmeier pole at c = {c} um^2"),
                        });
                    }
                }
                let n2 = m.n_squared(lambda_um);
                if n2 > 0.0 && n2.is_finite() {
                    Ok(n2.sqrt())
                } else {
                    Err(CoreError::IndexUndefined {
                        lambda_nm,
                        reason: format!("n^2 = {n2} is not positive"),
                    })
                }
            }
        }
    }
}

/// Wavevector magnitude 2*pi*n(lambda)/lambda in rad/um for a vacuum
/// wavelength in nanometres.
pub fn wavevector(lambda_nm: f64, model: &IndexModel) -> Result<f64> {
    let n = model.index(lambda_nm)?;
    Ok(TWO_PI * n / (lambda_nm * 1e-3))
}
