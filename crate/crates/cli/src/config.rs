//! Run configuration: strict TOML schema with explicit units in key names,
//! documented defaults for every omitted section, and validation that
//! reports every problem at once.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spdc_core::{
    AngularGrid, ConditionalSlice, CountingConfig, EfficiencyConfig, IndexModel, OpticalSetup,
    SetScanConfig, WidthConvention, WidthKind,
};

/// Raw config document. Only `crystal`, `pump`, and `signal` are required;
/// every other section falls back to the defaults below.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub crystal: CrystalSection,
    pub pump: PumpSection,
    pub signal: SignalSection,
    #[serde(default)]
    pub idler: IdlerSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub widths: WidthsSection,
    #[serde(default)]
    pub counting: CountingSection,
    #[serde(default)]
    pub efficiency: EfficiencySection,
    #[serde(default)]
    pub knife: KnifeSection,
    #[serde(default)]
    pub slit: SlitSection,
    #[serde(default)]
    pub set: SetSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub nearfield: NearfieldSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub rng: RngSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub length_um: f64,
    /// "mgo_ln_e" (shipped Sellmeier data) or "constant".
    #[serde(default = "default_index")]
    pub index: String,
    /// Refractive index when `index = "constant"`.
    pub constant_n: Option<f64>,
}

fn default_index() -> String {
    "mgo_ln_e".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub wavelength_nm: f64,
    pub waist_um: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IdlerSection {
    /// Derived from energy conservation when omitted. When given, it must
    /// agree with the derived value to 1e-3 relative and is snapped to it.
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub theta_max_deg: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            theta_max_deg: 35.0,
            n: 1025,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WidthsSection {
    /// "fwhm" or "std_dev".
    pub convention: String,
    /// "marginal_peak" or "fixed".
    pub conditional_slice: String,
    pub conditional_fixed_deg: Option<f64>,
}

impl Default for WidthsSection {
    fn default() -> Self {
        WidthsSection {
            convention: "fwhm".to_string(),
            conditional_slice: "marginal_peak".to_string(),
            conditional_fixed_deg: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CountingSection {
    pub acquisition_time_s: f64,
    pub coincidence_window_ns: f64,
    pub singles_rate_signal_hz: f64,
    pub singles_rate_idler_hz: f64,
    pub pair_rate_open_hz: f64,
}

impl Default for CountingSection {
    fn default() -> Self {
        CountingSection {
            acquisition_time_s: 60.0,
            coincidence_window_ns: 1.0,
            singles_rate_signal_hz: 5e4,
            singles_rate_idler_hz: 5e4,
            pair_rate_open_hz: 2000.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EfficiencySection {
    pub detector_qe: f64,
    pub filter_transmission: f64,
    pub fresnel_loss: f64,
    pub coupling: f64,
}

impl Default for EfficiencySection {
    fn default() -> Self {
        EfficiencySection {
            detector_qe: 0.5,
            filter_transmission: 0.5,
            fresnel_loss: 0.2,
            coupling: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KnifeSection {
    pub start_deg: f64,
    /// Defaults to the grid extent.
    pub stop_deg: Option<f64>,
    pub steps: usize,
}

impl Default for KnifeSection {
    fn default() -> Self {
        KnifeSection {
            start_deg: 0.0,
            stop_deg: None,
            steps: 36,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SlitSection {
    pub width_deg: f64,
    pub start_deg: f64,
    pub stop_deg: f64,
    pub steps: usize,
}

impl Default for SlitSection {
    fn default() -> Self {
        SlitSection {
            width_deg: 0.15,
            start_deg: -1.0,
            stop_deg: 1.0,
            steps: 41,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SetSection {
    pub seed_start_deg: f64,
    pub seed_stop_deg: f64,
    pub seed_steps: usize,
    /// Blocked seed interval, e.g. [-3.0, 3.0].
    pub mask_deg: Option<[f64; 2]>,
    pub gain: f64,
    pub noise: bool,
}

impl Default for SetSection {
    fn default() -> Self {
        SetSection {
            seed_start_deg: -25.0,
            seed_stop_deg: 25.0,
            seed_steps: 201,
            mask_deg: None,
            gain: 1.0,
            noise: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lengths_um: Vec<f64>,
    pub waists_um: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            lengths_um: vec![5.8, 6.0, 6.2, 6.4, 6.6, 6.8],
            waists_um: vec![60.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NearfieldSection {
    /// Zero-padding factor of the position-space transform.
    pub pad: usize,
}

impl Default for NearfieldSection {
    fn default() -> Self {
        NearfieldSection { pad: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub integrator_n: usize,
    /// Initial crystal length for the knife fit; defaults to crystal.length_um.
    pub prior_length_um: Option<f64>,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            integrator_n: 257,
            prior_length_um: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    pub seed: u64,
}

impl Default for RngSection {
    fn default() -> Self {
        RngSection { seed: 42 }
    }
}

/// Fully validated configuration with core types resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub setup: OpticalSetup,
    pub grid: AngularGrid,
    pub convention: WidthConvention,
    pub counting: CountingConfig,
    pub efficiency: EfficiencyConfig,
    pub set: SetScanConfig,
    pub knife_positions: Vec<f64>,
    pub slit_centers: Vec<f64>,
    pub slit_width_deg: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub config_sha256: String,
}

fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![start];
    }
    (0..steps)
        .map(|j| start + (stop - start) * j as f64 / (steps - 1) as f64)
        .collect()
}

/// CLI-level overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub grid_n: Option<usize>,
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<RunConfig, Vec<String>> {
    let mut raw: RawConfig =
        toml::from_str(text).map_err(|e| vec![format!("config parse error: {e}")])?;
    if let Some(n) = overrides.grid_n {
        raw.grid.n = n;
    }
    let seed = overrides.seed.unwrap_or(raw.rng.seed);
    raw.rng.seed = seed;
    resolve(raw, overrides.out_dir.clone())
}

fn resolve(raw: RawConfig, out_override: Option<PathBuf>) -> Result<RunConfig, Vec<String>> {
    let mut problems: Vec<String> = Vec::new();

    if !(raw.crystal.length_um > 0.0) {
        problems.push(format!(
            "crystal.length_um = {} violates length > 0",
            raw.crystal.length_um
        ));
    }
    if !(raw.pump.waist_um > 0.0) {
        problems.push(format!(
            "pump.waist_um = {} violates waist > 0",
            raw.pump.waist_um
        ));
    }
    if !(raw.pump.wavelength_nm > 0.0) {
        problems.push(format!(
            "pump.wavelength_nm = {} must be > 0",
            raw.pump.wavelength_nm
        ));
    }
    if raw.signal.wavelength_nm <= raw.pump.wavelength_nm {
        problems.push(format!(
            "signal.wavelength_nm = {} must exceed pump.wavelength_nm = {}",
            raw.signal.wavelength_nm, raw.pump.wavelength_nm
        ));
    }

    let index_model = match raw.crystal.index.as_str() {
        "mgo_ln_e" => {
            if raw.crystal.constant_n.is_some() {
                problems
                    .push("crystal.constant_n is only valid with crystal.index = \"constant\"".into());
            }
            IndexModel::mgo_ln_e()
        }
        "constant" => match raw.crystal.constant_n {
            Some(n) if n > 0.0 => IndexModel::constant(n),
            Some(n) => {
                problems.push(format!("crystal.constant_n = {n} must be > 0"));
                IndexModel::constant(1.0)
            }
            None => {
                problems.push("crystal.index = \"constant\" requires crystal.constant_n".into());
                IndexModel::constant(1.0)
            }
        },
        other => {
            problems.push(format!(
                "crystal.index = \"{other}\" is not one of: mgo_ln_e, constant"
            ));
            IndexModel::constant(1.0)
        }
    };

    // idler: derived from energy conservation, cross-checked when given
    let derived_idler = if raw.pump.wavelength_nm > 0.0
        && raw.signal.wavelength_nm > raw.pump.wavelength_nm
    {
        1.0 / (1.0 / raw.pump.wavelength_nm - 1.0 / raw.signal.wavelength_nm)
    } else {
        f64::NAN
    };
    if let Some(given) = raw.idler.wavelength_nm {
        if derived_idler.is_finite() && ((given - derived_idler) / derived_idler).abs() > 1e-3 {
            problems.push(format!(
                "idler.wavelength_nm = {given} violates energy conservation \
                 (derived value {derived_idler:.4})"
            ));
        }
    }

    let setup = if problems.is_empty() {
        match OpticalSetup::new(
            raw.crystal.length_um,
            raw.pump.waist_um,
            raw.pump.wavelength_nm,
            raw.signal.wavelength_nm,
            derived_idler,
            index_model,
        ) {
            Ok(s) => Some(s),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        }
    } else {
        None
    };

    let grid = match AngularGrid::new(raw.grid.theta_max_deg, raw.grid.n) {
        Ok(g) => Some(g),
        Err(e) => {
            problems.push(format!("grid: {e}"));
            None
        }
    };

    let kind = match raw.widths.convention.as_str() {
        "fwhm" => WidthKind::Fwhm,
        "std_dev" => WidthKind::StdDev,
        other => {
            problems.push(format!(
                "widths.convention = \"{other}\" is not one of: fwhm, std_dev"
            ));
            WidthKind::Fwhm
        }
    };
    let conditional_slice = match raw.widths.conditional_slice.as_str() {
        "marginal_peak" => ConditionalSlice::AtMarginalPeak,
        "fixed" => match raw.widths.conditional_fixed_deg {
            Some(v) => ConditionalSlice::AtFixedAngle(v),
            None => {
                problems.push(
                    "widths.conditional_slice = \"fixed\" requires widths.conditional_fixed_deg"
                        .into(),
                );
                ConditionalSlice::AtMarginalPeak
            }
        },
        other => {
            problems.push(format!(
                "widths.conditional_slice = \"{other}\" is not one of: marginal_peak, fixed"
            ));
            ConditionalSlice::AtMarginalPeak
        }
    };

    let counting = CountingConfig {
        acquisition_time_s: raw.counting.acquisition_time_s,
        coincidence_window_ns: raw.counting.coincidence_window_ns,
        singles_rate_signal_hz: raw.counting.singles_rate_signal_hz,
        singles_rate_idler_hz: raw.counting.singles_rate_idler_hz,
        pair_rate_open_hz: raw.counting.pair_rate_open_hz,
        rng_seed: raw.rng.seed,
    };
    if let Err(e) = counting.validate() {
        problems.push(format!("counting: {e}"));
    }

    let efficiency = EfficiencyConfig {
        detector_qe: raw.efficiency.detector_qe,
        filter_transmission: raw.efficiency.filter_transmission,
        fresnel_loss: raw.efficiency.fresnel_loss,
        coupling: raw.efficiency.coupling,
    };
    if let Err(e) = efficiency.validate() {
        problems.push(format!("efficiency: {e}"));
    }

    let set = SetScanConfig {
        seed_angles_deg: linspace(raw.set.seed_start_deg, raw.set.seed_stop_deg, raw.set.seed_steps),
        mask_deg: raw.set.mask_deg.map(|m| (m[0], m[1])),
        gain: raw.set.gain,
    };
    if let Some(g) = &grid {
        if let Err(e) = set.validate(-g.theta_max_deg, g.theta_max_deg) {
            problems.push(format!("set: {e}"));
        }
    }

    let knife_stop = raw.knife.stop_deg.unwrap_or(raw.grid.theta_max_deg);
    if raw.knife.start_deg < 0.0 || knife_stop > raw.grid.theta_max_deg {
        problems.push(format!(
            "knife scan [{}, {knife_stop}] deg must lie within [0, {}]",
            raw.knife.start_deg, raw.grid.theta_max_deg
        ));
    }
    if raw.knife.steps < 2 {
        problems.push(format!("knife.steps = {} must be >= 2", raw.knife.steps));
    }
    if raw.slit.steps < 2 {
        problems.push(format!("slit.steps = {} must be >= 2", raw.slit.steps));
    }
    if !(raw.slit.width_deg > 0.0) {
        problems.push(format!(
            "slit.width_deg = {} must be > 0",
            raw.slit.width_deg
        ));
    }
    if raw.nearfield.pad == 0 {
        problems.push("nearfield.pad must be >= 1".into());
    }
    if raw.fit.integrator_n < 65 {
        problems.push(format!(
            "fit.integrator_n = {} must be >= 65",
            raw.fit.integrator_n
        ));
    }
    if raw.sweep.lengths_um.is_empty() || raw.sweep.waists_um.is_empty() {
        problems.push("sweep.lengths_um and sweep.waists_um must be non-empty".into());
    }

    if !problems.is_empty() {
        return Err(problems);
    }

    let raw_for_hash = raw.clone();
    let canonical = toml::to_string(&raw_for_hash).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let config_sha256 = hex_string(&hasher.finalize());

    let output_dir = out_override
        .or_else(|| raw.output.dir.clone())
        .or_else(|| std::env::var_os("SPDC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(RunConfig {
        seed: raw.rng.seed,
        setup: setup.expect("validated"),
        grid: grid.expect("validated"),
        convention: WidthConvention {
            kind,
            conditional_slice,
        },
        counting,
        efficiency,
        set,
        knife_positions: linspace(raw.knife.start_deg, knife_stop, raw.knife.steps),
        slit_centers: linspace(raw.slit.start_deg, raw.slit.stop_deg, raw.slit.steps),
        slit_width_deg: raw.slit.width_deg,
        output_dir,
        config_sha256,
        raw,
    })
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes the effective configuration; reparsing it reproduces every
/// effective value.
pub fn effective_toml(cfg: &RunConfig) -> String {
    toml::to_string(&cfg.raw).expect("config serializes")
}
