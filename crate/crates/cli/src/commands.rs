//! One function per subcommand; each writes deterministic artifacts into the
//! output directory and returns the list of files written.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use spdc_core::{
    build_joint_amplitude, efficiency_budget, entanglement_report, fit_gaussian,
    fit_knife_profile, knife_edge_scan, parameter_scan, set_scan, slit_scan,
    subtract_accidentals, to_near_field_padded, CountingConfig, FitOptions, FitResult,
    JointAmplitude, OpticalSetup, ScanKind, ScanResult,
};

use crate::config::{effective_toml, RunConfig};
use crate::error::AppError;
use crate::output::{read_scan_csv, write_matrix_csv, write_pgm, write_scan_csv, MatrixMeta};

pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn ensure_outdir(cfg: &RunConfig) -> Result<(), AppError> {
    fs::create_dir_all(&cfg.output_dir).map_err(AppError::io)
}

fn write_effective_config(cfg: &RunConfig) -> Result<PathBuf, AppError> {
    let path = cfg.output_dir.join("effective_config.toml");
    fs::write(&path, effective_toml(cfg)).map_err(AppError::io)?;
    Ok(path)
}

fn build_amplitude(cfg: &RunConfig) -> Result<JointAmplitude, AppError> {
    build_joint_amplitude(&cfg.setup, &cfg.grid).map_err(AppError::domain)
}

pub fn tpi(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let amp = build_amplitude(cfg)?;
    let tpi = amp.tpi();
    let csv = cfg.output_dir.join("tpi.csv");
    write_matrix_csv(
        &csv,
        &MatrixMeta {
            name: "joint two-photon intensity",
            row_axis: "theta_i_deg",
            col_axis: "theta_s_deg",
            value_desc: "|F|^2 per deg^2",
            config_sha256: &cfg.config_sha256,
            seed: cfg.seed,
            masked_rows: None,
        },
        &amp.axis_i,
        &amp.axis_s,
        |r, c| tpi[[r, c]],
    )
    .map_err(AppError::io)?;
    let pgm = cfg.output_dir.join("tpi.pgm");
    write_pgm(&pgm, &tpi, &cfg.config_sha256, cfg.seed).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![csv, pgm, eff],
        summary: "far-field TPI matrix written".to_string(),
    })
}

pub fn nearfield(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let amp = build_amplitude(cfg)?;
    let near = to_near_field_padded(&amp, cfg.raw.nearfield.pad).map_err(AppError::domain)?;
    let tpi = near.tpi();
    let csv = cfg.output_dir.join("nearfield.csv");
    write_matrix_csv(
        &csv,
        &MatrixMeta {
            name: "near-field two-photon intensity",
            row_axis: "x_i_um",
            col_axis: "x_s_um",
            value_desc: "|F|^2 per um^2",
            config_sha256: &cfg.config_sha256,
            seed: cfg.seed,
            masked_rows: None,
        },
        &near.axis_i,
        &near.axis_s,
        |r, c| tpi[[r, c]],
    )
    .map_err(AppError::io)?;
    let pgm = cfg.output_dir.join("nearfield.pgm");
    write_pgm(&pgm, &tpi, &cfg.config_sha256, cfg.seed).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![csv, pgm, eff],
        summary: "near-field TPI matrix written".to_string(),
    })
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    delta_unconditional_deg: f64,
    delta_conditional_deg: f64,
    r_1d: f64,
    r_2d: f64,
    k: f64,
    width_kind: &'a str,
    notes: &'a [String],
    config_sha256: &'a str,
    seed: u64,
}

pub fn report(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let amp = build_amplitude(cfg)?;
    let rep = entanglement_report(&amp, &cfg.convention).map_err(AppError::domain)?;
    let doc = ReportDoc {
        delta_unconditional_deg: rep.delta_unconditional,
        delta_conditional_deg: rep.delta_conditional,
        r_1d: rep.r_1d,
        r_2d: rep.r_2d,
        k: rep.k,
        width_kind: match cfg.convention.kind {
            spdc_core::WidthKind::Fwhm => "fwhm",
            spdc_core::WidthKind::StdDev => "std_dev",
        },
        notes: &rep.notes,
        config_sha256: &cfg.config_sha256,
        seed: cfg.seed,
    };
    let path = cfg.output_dir.join("report.toml");
    fs::write(&path, toml::to_string(&doc).expect("report serializes")).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![path, eff],
        summary: format!(
            "Delta = {:.3} deg, delta = {:.4} deg, R_1D = {:.2}, R_2D = {:.1}, K = {:.2}",
            rep.delta_unconditional, rep.delta_conditional, rep.r_1d, rep.r_2d, rep.k
        ),
    })
}

fn run_knife(cfg: &RunConfig) -> Result<ScanResult, AppError> {
    let amp = build_amplitude(cfg)?;
    let scan =
        knife_edge_scan(&amp, &cfg.knife_positions, &cfg.counting).map_err(AppError::domain)?;
    subtract_accidentals(&scan).map_err(AppError::domain)
}

pub fn scan_knife(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let scan = run_knife(cfg)?;
    let path = cfg.output_dir.join("knife.csv");
    write_scan_csv(&path, &scan, &cfg.config_sha256, cfg.seed).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![path, eff],
        summary: format!("knife scan with {} positions written", scan.len()),
    })
}

fn run_slit(cfg: &RunConfig) -> Result<ScanResult, AppError> {
    let amp = build_amplitude(cfg)?;
    let scan = slit_scan(&amp, &cfg.slit_centers, cfg.slit_width_deg, &cfg.counting)
        .map_err(AppError::domain)?;
    subtract_accidentals(&scan).map_err(AppError::domain)
}

pub fn scan_slit(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let scan = run_slit(cfg)?;
    let path = cfg.output_dir.join("slit.csv");
    write_scan_csv(&path, &scan, &cfg.config_sha256, cfg.seed).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![path, eff],
        summary: format!("slit scan with {} positions written", scan.len()),
    })
}

pub fn scan_set(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let amp = build_amplitude(cfg)?;
    let noise = cfg.raw.set.noise.then_some(&cfg.counting);
    let rec = set_scan(&amp, &cfg.set, noise).map_err(AppError::domain)?;
    let masked = rec.masked_row_indices();
    let csv = cfg.output_dir.join("set_tpi.csv");
    write_matrix_csv(
        &csv,
        &MatrixMeta {
            name: "SET-reconstructed two-photon intensity",
            row_axis: "seed_angle_deg",
            col_axis: "theta_s_deg",
            value_desc: "gain*|F|^2 per deg^2",
            config_sha256: &cfg.config_sha256,
            seed: cfg.seed,
            masked_rows: Some(&masked),
        },
        &rec.seed_angles_deg,
        &rec.signal_axis_deg,
        |r, c| rec.intensity[[r, c]],
    )
    .map_err(AppError::io)?;
    let pgm = cfg.output_dir.join("set_tpi.pgm");
    write_pgm(&pgm, &rec.intensity, &cfg.config_sha256, cfg.seed).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![csv, pgm, eff],
        summary: format!(
            "SET reconstruction written ({} rows, {} masked)",
            rec.seed_angles_deg.len(),
            masked.len()
        ),
    })
}

#[derive(Serialize)]
struct FitDoc<'a> {
    model: &'a str,
    converged: bool,
    iterations: usize,
    residual_norm: f64,
    parameters: Vec<FitParamDoc>,
    warnings: &'a [String],
    covariance: &'a [Vec<f64>],
    config_sha256: &'a str,
    seed: u64,
}

#[derive(Serialize)]
struct FitParamDoc {
    name: String,
    value: f64,
    sigma: f64,
}

fn write_fit(
    cfg: &RunConfig,
    model: &str,
    fit: &FitResult,
    file: &str,
) -> Result<PathBuf, AppError> {
    let doc = FitDoc {
        model,
        converged: fit.converged,
        iterations: fit.iterations,
        residual_norm: fit.residual_norm,
        parameters: fit
            .parameters
            .iter()
            .map(|p| FitParamDoc {
                name: p.name.clone(),
                value: p.value,
                sigma: p.sigma,
            })
            .collect(),
        warnings: &fit.warnings,
        covariance: &fit.covariance,
        config_sha256: &cfg.config_sha256,
        seed: cfg.seed,
    };
    let path = cfg.output_dir.join(file);
    fs::write(&path, toml::to_string(&doc).expect("fit serializes")).map_err(AppError::io)?;
    Ok(path)
}

/// Reads a scan CSV into a ScanResult (counting echo comes from the current
/// config; the file carries positions and counts).
fn scan_from_csv(path: &PathBuf, kind: ScanKind, counting: &CountingConfig) -> Result<ScanResult, AppError> {
    let text = fs::read_to_string(path).map_err(AppError::io)?;
    let (positions, raw, accidental, corrected) =
        read_scan_csv(&text).map_err(AppError::config)?;
    Ok(ScanResult {
        scan_kind: kind,
        expected: vec![0.0; positions.len()],
        positions,
        raw_counts: raw,
        accidental_counts: accidental,
        corrected_counts: Some(corrected),
        counting: counting.clone(),
    })
}

fn fit_prior(cfg: &RunConfig) -> Result<OpticalSetup, AppError> {
    match cfg.raw.fit.prior_length_um {
        Some(l) => OpticalSetup::new(
            l,
            cfg.setup.waist_um,
            cfg.setup.lambda_p_nm,
            cfg.setup.lambda_s_nm,
            cfg.setup.lambda_i_nm,
            cfg.setup.index_model.clone(),
        )
        .map_err(AppError::domain),
        None => Ok(cfg.setup.clone()),
    }
}

pub fn fit_knife(cfg: &RunConfig, scan_path: Option<PathBuf>) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let mut files = Vec::new();
    let scan = match scan_path {
        Some(p) => scan_from_csv(&p, ScanKind::Knife, &cfg.counting)?,
        None => {
            let s = run_knife(cfg)?;
            let path = cfg.output_dir.join("knife.csv");
            write_scan_csv(&path, &s, &cfg.config_sha256, cfg.seed).map_err(AppError::io)?;
            files.push(path);
            s
        }
    };
    let prior = fit_prior(cfg)?;
    let opts = FitOptions {
        integrator_n: cfg.raw.fit.integrator_n,
        aperture_deg: Some(cfg.grid.theta_max_deg),
    };
    let fit = fit_knife_profile(&scan, &prior, opts).map_err(AppError::domain)?;
    let summary = format!(
        "effective_L = {:.4} +- {:.4} um (converged: {})",
        fit.parameter("effective_L").map(|p| p.value).unwrap_or(f64::NAN),
        fit.parameter("effective_L").map(|p| p.sigma).unwrap_or(f64::NAN),
        fit.converged
    );
    files.push(write_fit(cfg, "knife_integrated_profile", &fit, "fit_knife.toml")?);
    files.push(write_effective_config(cfg)?);
    Ok(CommandOutput { files, summary })
}

pub fn fit_slit(cfg: &RunConfig, scan_path: Option<PathBuf>) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let mut files = Vec::new();
    let scan = match scan_path {
        Some(p) => scan_from_csv(&p, ScanKind::Slit, &cfg.counting)?,
        None => {
            let s = run_slit(cfg)?;
            let path = cfg.output_dir.join("slit.csv");
            write_scan_csv(&path, &s, &cfg.config_sha256, cfg.seed).map_err(AppError::io)?;
            files.push(path);
            s
        }
    };
    let fit = fit_gaussian(&scan).map_err(AppError::domain)?;
    let summary = format!(
        "width = {:.4} +- {:.4} deg (converged: {})",
        fit.parameter("width").map(|p| p.value).unwrap_or(f64::NAN),
        fit.parameter("width").map(|p| p.sigma).unwrap_or(f64::NAN),
        fit.converged
    );
    files.push(write_fit(cfg, "gaussian", &fit, "fit_slit.toml")?);
    files.push(write_effective_config(cfg)?);
    Ok(CommandOutput { files, summary })
}

pub fn sweep(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let rows = parameter_scan(
        &cfg.setup,
        &cfg.grid,
        &cfg.raw.sweep.lengths_um,
        &cfg.raw.sweep.waists_um,
        &cfg.convention,
    )
    .map_err(AppError::domain)?;
    let mut text = String::new();
    use std::fmt::Write as _;
    writeln!(
        text,
        "# parameter sweep; config_sha256={}; seed={}",
        cfg.config_sha256, cfg.seed
    )
    .unwrap();
    writeln!(text, "length_um,waist_um,delta_deg,delta_cond_deg,r_1d,k,error").unwrap();
    let f = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
    for row in &rows {
        writeln!(
            text,
            "{:.9e},{:.9e},{},{},{},{},{}",
            row.length_um,
            row.waist_um,
            f(row.delta_unconditional),
            f(row.delta_conditional),
            f(row.r_1d),
            f(row.k),
            row.error.clone().unwrap_or_default()
        )
        .unwrap();
    }
    let path = cfg.output_dir.join("sweep.csv");
    fs::write(&path, text).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![path, eff],
        summary: format!("{} sweep rows written", rows.len()),
    })
}

#[derive(Serialize)]
struct BudgetDoc<'a> {
    per_photon: f64,
    pair: f64,
    config_sha256: &'a str,
    seed: u64,
}

pub fn budget(cfg: &RunConfig) -> Result<CommandOutput, AppError> {
    ensure_outdir(cfg)?;
    let (per_photon, pair) = efficiency_budget(&cfg.efficiency).map_err(AppError::domain)?;
    let doc = BudgetDoc {
        per_photon,
        pair,
        config_sha256: &cfg.config_sha256,
        seed: cfg.seed,
    };
    let path = cfg.output_dir.join("budget.toml");
    fs::write(&path, toml::to_string(&doc).expect("budget serializes")).map_err(AppError::io)?;
    let eff = write_effective_config(cfg)?;
    Ok(CommandOutput {
        files: vec![path, eff],
        summary: format!("per-photon efficiency {per_photon:.4}, pair {pair:.4}"),
    })
}
