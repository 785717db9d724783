use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyons::defect::{
    c_alpha, c_alpha_quadrature, cross_gram, cross_gram_quadrature, DefectFunction,
};
use anyons::forms::{
    extension_form_terms, lower_bound, potential_energy, ExtensionParameter, FormDecomposition,
    FormTerms, RadialProfile,
};
use anyons::potentials::Potential;
use anyons::specfun::{bessel_k, bessel_k_prime, EvalResult};
use anyons::spectral::{
    closed_form_ground_energy, convergence_check, eigenfunction_residual, extract_charge_condition,
    run_spectrum, ChargeReport, ConvergenceCheck, SpectralResult, SpectrumSettings,
};
use anyons::Order;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{hash_json, parse_grid, Auto, CommonArgs, OutputFormat, RunConfig};
use crate::error::{CliError, CliResult};
use crate::statefile;

pub const SCHEMA_VERSION: u32 = 1;
const ABS_FLOOR: f64 = 1e-8;
const CONTINUUM: &str = "discretized continuum, not an eigenvalue";

fn emit(out: &mut impl Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("records serialize")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

#[derive(Debug, Args)]
pub struct SpecfunArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long = "format", value_enum, default_value = "json")]
    pub output_format: OutputFormat,
}

#[derive(Serialize)]
struct SpecfunRecord {
    alpha: f64,
    x: f64,
    bessel_k: EvalResult,
    bessel_k_prime: EvalResult,
}

pub fn specfun(args: &SpecfunArgs, out: &mut impl Write) -> CliResult<()> {
    let order = Order::new(args.alpha)?;
    let rec = SpecfunRecord {
        alpha: args.alpha,
        x: args.x,
        bessel_k: bessel_k(order, args.x)?,
        bessel_k_prime: bessel_k_prime(order, args.x)?,
    };
    let text = match args.output_format {
        OutputFormat::Json => json(&rec),
        OutputFormat::Csv => format!(
            "alpha,x,k,k_abs_error,regime,k_prime\n{:?},{:?},{:?},{:?},{},{:?}\n",
            rec.alpha,
            rec.x,
            rec.bessel_k.value,
            rec.bessel_k.abs_error_bound,
            serde_json::to_value(rec.bessel_k.regime)
                .unwrap()
                .as_str()
                .unwrap_or(""),
            rec.bessel_k_prime.value
        ),
    };
    emit(out, &text)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn new(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorRecord {
    pub sector: i32,
    pub eigenvalues: Vec<f64>,
    pub labels: Vec<&'static str>,
    /// `(c_0, ..., c_{N-1}, q)`; `q` only in the s-wave sector.
    pub ground_vector: Vec<f64>,
    pub charge: Option<f64>,
    pub lambda_used: Option<f64>,
    pub basis_scale: f64,
    pub closed_form_reference: Option<f64>,
    pub free_closed_form: Option<f64>,
    pub lower_bound: f64,
    pub residual: Option<f64>,
    pub charge_condition: Option<ChargeReport>,
    pub convergence: ConvergenceCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub schema: &'static str,
    pub schema_version: u32,
    pub artifact_version: &'static str,
    pub config: RunConfig,
    pub config_hash: String,
    pub sectors: Vec<SectorRecord>,
    pub identity_checks: Vec<IdentityCheck>,
    pub converged: bool,
    pub wall_time_s: f64,
}

fn settings(cfg: &RunConfig, sector: i32) -> SpectrumSettings {
    SpectrumSettings {
        sector,
        size: cfg.basis_size,
        scale: cfg.basis_scale.value(),
        lambda: cfg.lambda.value(),
    }
}

fn labels(result: &SpectralResult) -> Vec<&'static str> {
    result
        .reported()
        .iter()
        .map(|&e| if e < 0.0 { "bound state" } else { CONTINUUM })
        .collect()
}

/// Strong-form residual of the ground state, when it is a bound state.
fn bound_state_residual(result: &SpectralResult, v: &Potential) -> Option<f64> {
    if result.ground_energy() < 0.0 {
        eigenfunction_residual(result, v, 0).ok()
    } else {
        None
    }
}

fn sector_record(
    cfg: &RunConfig,
    order: Order,
    v: &Potential,
    sector: i32,
) -> CliResult<SectorRecord> {
    let result = run_spectrum(order, cfg.beta, v, settings(cfg, sector))?;
    let convergence = convergence_check(&result, v, ABS_FLOOR, cfg.tolerance)?;
    let charge_condition = match cfg.beta {
        ExtensionParameter::Finite(_) if sector == 0 => {
            extract_charge_condition(&result, v, 0).ok()
        }
        _ => None,
    };
    let free_closed_form = match cfg.beta {
        ExtensionParameter::Finite(b) if b < 0.0 && sector == 0 => {
            Some(closed_form_ground_energy(order, b)?)
        }
        _ => None,
    };
    Ok(SectorRecord {
        sector,
        eigenvalues: result.reported().to_vec(),
        labels: labels(&result),
        ground_vector: result.ground().coefficients(),
        charge: result.ground().charge,
        lambda_used: result.lambda_used,
        basis_scale: result.basis.scale,
        closed_form_reference: result.closed_form_reference,
        free_closed_form,
        lower_bound: lower_bound(order, cfg.beta, v.v0()),
        residual: bound_state_residual(&result, v),
        charge_condition,
        convergence,
    })
}

fn identity_checks(order: Order, lambda: f64) -> CliResult<Vec<IdentityCheck>> {
    let c = c_alpha(order);
    let cq = c_alpha_quadrature(order)?;
    let g = cross_gram(order, lambda, 2.0 * lambda)?;
    let gq = cross_gram_quadrature(order, lambda, 2.0 * lambda)?;
    let norm = DefectFunction::new(order, lambda)?.l2_norm_sq();
    Ok(vec![
        IdentityCheck::new("c_alpha quadrature", (cq - c).abs() / c, 1e-8),
        IdentityCheck::new("cross-Gram (lambda, 2 lambda)", (g - gq).abs() / gq, 1e-8),
        IdentityCheck::new(
            "defect norm positive",
            if norm > 0.0 { 0.0 } else { 1.0 },
            0.0,
        ),
    ])
}

pub fn build_record(cfg: &RunConfig) -> CliResult<ResultRecord> {
    let start = Instant::now();
    let order = cfg.order()?;
    let v = cfg.potential()?;
    let sectors = cfg
        .sectors
        .iter()
        .map(|&k| sector_record(cfg, order, &v, k))
        .collect::<CliResult<Vec<_>>>()?;
    let lambda = sectors.iter().find_map(|s| s.lambda_used).unwrap_or(1.0);
    let converged = sectors.iter().all(|s| s.convergence.converged);
    Ok(ResultRecord {
        schema: "anyons.result-record",
        schema_version: SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        sectors,
        identity_checks: identity_checks(order, lambda)?,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn record_csv(rec: &ResultRecord) -> String {
    let mut s = String::from(
        "sector,E0,E1,E2,E3,E4,charge,lambda_used,closed_form_reference,residual,converged\n",
    );
    for sec in &rec.sectors {
        let e: Vec<String> = (0..5)
            .map(|i| opt(sec.eigenvalues.get(i).copied()))
            .collect();
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            sec.sector,
            e.join(","),
            opt(sec.charge),
            opt(sec.lambda_used),
            opt(sec.closed_form_reference),
            opt(sec.residual),
            sec.convergence.converged
        );
    }
    s
}

pub fn spectrum(args: &CommonArgs, out: &mut impl Write) -> CliResult<()> {
    let (cfg, _) = RunConfig::resolve(args)?;
    let rec = build_record(&cfg)?;
    let text = match cfg.output_format {
        OutputFormat::Json => json(&rec),
        OutputFormat::Csv => record_csv(&rec),
    };
    emit(out, &text)?;
    if !rec.converged {
        let worst = rec
            .sectors
            .iter()
            .find(|s| !s.convergence.converged)
            .unwrap();
        return Err(CliError::Convergence(format!(
            "sector {}: E0 moved from {} to {} when the basis was doubled (tolerance {})",
            worst.sector,
            worst.convergence.e0,
            worst.convergence.e0_doubled,
            worst.convergence.tolerance
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `lo:hi:n` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_grid: Option<String>,
    /// `lo:hi:n` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub beta_grid: Option<String>,
}

pub const SWEEP_COLUMNS: &str = "alpha,beta,E0,E0_closed_form,q_abs,lambda_used,residual,converged";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub e0: Option<f64>,
    pub closed_form: Option<f64>,
    pub q_abs: Option<f64>,
    pub lambda_used: Option<f64>,
    pub residual: Option<f64>,
    pub converged: bool,
}

impl SweepRow {
    fn failed(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            e0: None,
            closed_form: None,
            q_abs: None,
            lambda_used: None,
            residual: None,
            converged: false,
        }
    }

    fn csv(&self) -> String {
        format!(
            "{:?},{:?},{},{},{},{},{},{}",
            self.alpha,
            self.beta,
            opt(self.e0),
            opt(self.closed_form),
            opt(self.q_abs),
            opt(self.lambda_used),
            opt(self.residual),
            self.converged
        )
    }
}

fn sweep_row(cfg: &RunConfig, v: &Potential, alpha: f64, beta: f64) -> CliResult<SweepRow> {
    let order = Order::new(alpha)?;
    let beta_p = ExtensionParameter::finite(beta)?;
    let result = run_spectrum(order, beta_p, v, settings(cfg, 0))?;
    let conv = convergence_check(&result, v, ABS_FLOOR, cfg.tolerance)?;
    Ok(SweepRow {
        alpha,
        beta,
        e0: Some(result.ground_energy()),
        closed_form: result.closed_form_reference,
        q_abs: result.ground().charge.map(f64::abs),
        lambda_used: result.lambda_used,
        residual: bound_state_residual(&result, v),
        converged: conv.converged,
    })
}

pub fn sweep_rows(cfg: &RunConfig, alphas: &[f64], betas: &[f64]) -> CliResult<Vec<SweepRow>> {
    let v = cfg.potential()?;
    let points: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect();
    Ok(points
        .par_iter()
        .map(|&(a, b)| sweep_row(cfg, &v, a, b).unwrap_or_else(|_| SweepRow::failed(a, b)))
        .collect())
}

pub fn sweep(args: &SweepArgs, out: &mut impl Write) -> CliResult<()> {
    let mut common = args.common.clone();
    let file = match &common.config {
        Some(p) => crate::config::ConfigFile::load(p)?,
        None => Default::default(),
    };
    let alpha_grid = file.pick(args.alpha_grid.clone(), "alpha_grid")?;
    let beta_grid = file.pick(args.beta_grid.clone(), "beta_grid")?;
    let alphas = match (&alpha_grid, file.pick(common.alpha, "alpha")?) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(a)) => vec![a],
        (None, None) => {
            return Err(CliError::Config(
                "sweep needs --alpha-grid or --alpha".into(),
            ))
        }
    };
    let betas = match beta_grid {
        Some(g) => parse_grid(&g)?,
        None => match file.pick(common.beta, "beta")? {
            Some(ExtensionParameter::Finite(b)) => vec![b],
            _ => {
                return Err(CliError::Config(
                    "sweep needs --beta-grid or a finite --beta".into(),
                ))
            }
        },
    };
    common.alpha = Some(alphas[0]);
    common.beta = Some(ExtensionParameter::finite(betas[0])?);
    let (cfg, _) = RunConfig::resolve(&common)?;
    for &a in &alphas {
        Order::new(a).map_err(|e| CliError::Config(format!("alpha grid: {e}")))?;
    }
    let rows = sweep_rows(&cfg, &alphas, &betas)?;
    let mut text = String::from(SWEEP_COLUMNS);
    text.push('\n');
    for r in &rows {
        text += &r.csv();
        text.push('\n');
    }
    emit(out, &text)?;
    if rows.iter().all(|r| r.e0.is_none()) {
        return Err(CliError::Convergence("every sweep row failed".into()));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FormEvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// State file with `r,psi0` samples.
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct FormEvalRecord {
    pub schema: &'static str,
    pub schema_version: u32,
    pub artifact_version: &'static str,
    pub config: RunConfig,
    pub config_hash: String,
    pub state_hash: String,
    pub samples: usize,
    pub charge: f64,
    pub lambda: f64,
    pub terms: FormTerms,
    pub potential_term: f64,
    pub extension_form: f64,
    pub interacting_form: f64,
    pub norm_sq: f64,
    pub rayleigh_quotient: f64,
    pub lower_bound: f64,
}

pub fn form_eval(args: &FormEvalArgs, out: &mut impl Write) -> CliResult<()> {
    let mut common = args.common.clone();
    let file = match &common.config {
        Some(p) => crate::config::ConfigFile::load(p)?,
        None => Default::default(),
    };
    let path = file
        .pick(args.state.clone(), "state")?
        .ok_or_else(|| CliError::Config("form-eval needs --state".into()))?;
    let state = statefile::read(&path)?;
    if common.alpha.is_none() && file.get("alpha").is_none() {
        common.alpha = state.alpha;
    }
    if common.lambda.is_none() && file.get("lambda").is_none() {
        common.lambda = state.lambda.map(Auto::Value);
    }
    let (cfg, _) = RunConfig::resolve(&common)?;
    let order = cfg.order()?;
    let v = cfg.potential()?;
    let q = state.charge;
    let lambda = match cfg.lambda {
        Auto::Value(l) => l,
        Auto::Auto if q == 0.0 => 1.0,
        Auto::Auto => {
            return Err(CliError::Config(
                "a charged state needs lambda (header or --lambda)".into(),
            ))
        }
    };
    let g = DefectFunction::new(order, lambda)?;
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (&r, &psi) in state.nodes.iter().zip(&state.values) {
        if r <= cfg.rmax {
            let gr = if q == 0.0 { 0.0 } else { g.eval(r)? };
            nodes.push(r);
            values.push(psi - q * gr);
        }
    }
    let profile = RadialProfile::grid(nodes, values)
        .map_err(|e| CliError::Config(format!("state file: {e}")))?;
    let decomp = FormDecomposition::new(order, profile, q, lambda)?;
    let terms = extension_form_terms(&decomp, cfg.beta)?;
    let potential_term = potential_energy(&decomp.regular, &v)?;
    let value = terms.value();
    let rec = FormEvalRecord {
        schema: "anyons.form-eval",
        schema_version: SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        state_hash: hash_json(&(&state.nodes, &state.values, q)),
        samples: state.nodes.len(),
        charge: q,
        lambda,
        terms,
        potential_term,
        extension_form: value,
        interacting_form: value + potential_term,
        norm_sq: terms.psi_norm_sq,
        rayleigh_quotient: (value + potential_term) / terms.psi_norm_sq,
        lower_bound: lower_bound(order, cfg.beta, v.v0()),
        config: cfg.clone(),
    };
    let text = match cfg.output_format {
        OutputFormat::Json => json(&rec),
        OutputFormat::Csv => format!(
            "extension_form,interacting_form,norm_sq,rayleigh_quotient,lower_bound\n{:?},{:?},{:?},{:?},{:?}\n",
            rec.extension_form, rec.interacting_form, rec.norm_sq, rec.rayleigh_quotient, rec.lower_bound
        ),
    };
    emit(out, &text)
}
