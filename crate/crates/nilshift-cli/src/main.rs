//! Command-line front end for the shift construction: weight tables,
//! spectral-radius data, annihilation checks, trajectory runs, and the
//! verification suites.
//!
//! Exit codes: 0 on success, 1 when a certificate fails, 2 on usage or
//! configuration errors.

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nilshift::certificates::{run_suite, CertificateError, CertificateReport, Suite, SuiteConfig};
use nilshift::logspace::LogScalar;
use nilshift::shift::rho_estimate;
use nilshift::sparse::SparseVec;
use nilshift::trajectory::{iterate, TrajectoryRecord};
use nilshift::weights::WeightProfile;

use config::{OutputFormat, PartialConfig, RunConfig};

#[derive(Parser)]
#[command(
    name = "nilshift",
    about = "Weighted shifts, nilpotent truncations, and stability certificates for the induced dynamics",
    version
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Larger construction parameter (requires M > K > 1)
    #[arg(long = "M", global = true, value_name = "REAL")]
    m: Option<f64>,
    /// Smaller construction parameter (requires M > K > 1)
    #[arg(long = "K", global = true, value_name = "REAL")]
    k: Option<f64>,
    /// Seed for all randomized sampling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trajectory length
    #[arg(long, global = true)]
    steps: Option<u64>,
    /// Window horizon for operator-norm scans
    #[arg(long, global = true)]
    horizon: Option<u64>,
    /// Output format: csv or json
    #[arg(long, global = true)]
    format: Option<String>,
    /// Write output to this path instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Flat key=value configuration file (flags take precedence)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the weight sequence of a shift profile
    Weights {
        /// Number of leading positions to print
        #[arg(long, default_value_t = 32)]
        count: u64,
        /// Profile: full, level:M, or complement:M
        #[arg(long, default_value = "full")]
        profile: String,
    },
    /// Partial spectral-radius data converging to M/K
    SpectralRadius {
        /// Number of rows (p = 1..=P)
        #[arg(long)]
        p: u32,
    },
    /// Index-of-nilpotency checks for the truncation complements
    Nilpotency {
        /// Highest truncation level to check
        #[arg(long, default_value_t = 8)]
        m_max: u32,
        /// Basis vectors e_1..e_N to annihilate
        #[arg(long, default_value_t = 512)]
        basis_max: u64,
    },
    /// Iterate the map and emit per-step records
    Trajectory {
        /// Initial vector file (index:sign:log_mag lines)
        #[arg(long, value_name = "PATH", conflicts_with_all = ["basis", "lognorm_pow"])]
        init: Option<PathBuf>,
        /// Start from a single basis vector e_I
        #[arg(long, value_name = "I", requires = "lognorm_pow")]
        basis: Option<u64>,
        /// Initial norm as a power: |x_0| = M^(-L)
        #[arg(long, value_name = "L", requires = "basis")]
        lognorm_pow: Option<f64>,
    },
    /// Run a verification suite and emit a machine-readable report
    Verify {
        /// One of: stability, exponential, bounds, nilpotency, derivative,
        /// linear-instability, all
        #[arg(long)]
        suite: String,
        /// Lower envelope exponent (0 < c1 < ln K / ln 2)
        #[arg(long)]
        c1: Option<f64>,
        /// Upper envelope exponent (c2 > ln K / ln 2)
        #[arg(long)]
        c2: Option<f64>,
        /// Depth for the linear-instability root table
        #[arg(long)]
        p: Option<u32>,
    },
}

/// Distinguishes usage errors (exit 2) from certificate violations (exit 1).
enum Outcome {
    Clean,
    CertificateViolation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::CertificateViolation) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let flags = PartialConfig {
        m: cli.global.m,
        k: cli.global.k,
        seed: cli.global.seed,
        steps: cli.global.steps,
        horizon: cli.global.horizon,
        format: cli
            .global
            .format
            .as_deref()
            .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
            .transpose()?,
        out: cli.global.out.clone(),
    };
    let base = match &cli.global.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            PartialConfig::from_file_text(&text)?
        }
        None => PartialConfig::default(),
    };
    let cfg = flags.over(base).resolve()?;

    match cli.command {
        Command::Weights { count, profile } => cmd_weights(&cfg, count, &profile),
        Command::SpectralRadius { p } => cmd_spectral_radius(&cfg, p),
        Command::Nilpotency { m_max, basis_max } => cmd_nilpotency(&cfg, m_max, basis_max),
        Command::Trajectory { init, basis, lognorm_pow } => {
            cmd_trajectory(&cfg, init, basis, lognorm_pow)
        }
        Command::Verify { suite, c1, c2, p } => cmd_verify(&cfg, &suite, c1, c2, p),
    }
}

fn write_output(cfg: &RunConfig, content: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn parse_profile(cfg: &RunConfig, spec: &str) -> Result<WeightProfile> {
    let params = cfg.params;
    if spec == "full" {
        return Ok(WeightProfile::full(params));
    }
    if let Some(rest) = spec.strip_prefix("level:") {
        let m: u32 = rest.parse().context("bad level in --profile")?;
        return WeightProfile::level(params, m).map_err(|e| anyhow!("{e}"));
    }
    if let Some(rest) = spec.strip_prefix("complement:") {
        let m: u32 = rest.parse().context("bad level in --profile")?;
        return WeightProfile::complement(params, m).map_err(|e| anyhow!("{e}"));
    }
    bail!("unknown profile {spec:?}; expected full, level:M, or complement:M")
}

fn cmd_weights(cfg: &RunConfig, count: u64, profile_spec: &str) -> Result<Outcome> {
    if count == 0 {
        bail!("--count must be at least 1");
    }
    let profile = parse_profile(cfg, profile_spec)?;
    let ln10 = 10f64.ln();
    let format = cfg.format.unwrap_or(OutputFormat::Csv);
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str("n,valuation,eps_index,log10_weight,weight\n");
            for n in 1..=count {
                let v = n.trailing_zeros();
                let w = profile.weight(n);
                if w.is_zero() {
                    out.push_str(&format!("{n},{v},{},ZERO,\n", v + 1));
                } else {
                    let log10 = w.log_mag() / ln10;
                    let linear = if log10.abs() <= 300.0 {
                        format!("{}", w.to_real())
                    } else {
                        String::new()
                    };
                    out.push_str(&format!("{n},{v},{},{log10},{linear}\n", v + 1));
                }
            }
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = (1..=count)
                .map(|n| {
                    let v = n.trailing_zeros();
                    let w = profile.weight(n);
                    if w.is_zero() {
                        json!({"n": n, "valuation": v, "eps_index": v + 1, "log10_weight": "ZERO"})
                    } else {
                        json!({
                            "n": n,
                            "valuation": v,
                            "eps_index": v + 1,
                            "log10_weight": w.log_mag() / ln10,
                        })
                    }
                })
                .collect();
            out = serde_json::to_string_pretty(&json!({
                "M": cfg.params.m(),
                "K": cfg.params.k(),
                "profile": profile.label(),
                "rows": rows,
            }))? + "\n";
        }
    }
    write_output(cfg, &out)?;
    Ok(Outcome::Clean)
}

fn cmd_spectral_radius(cfg: &RunConfig, p: u32) -> Result<Outcome> {
    let params = &cfg.params;
    // Rows within the horizon also get an independent windowed-scan root.
    let full = nilshift::shift::ShiftSpec::from_profile(WeightProfile::full(*params));
    let mut rows = Vec::with_capacity(p as usize);
    for pp in 1..=p {
        let rho = rho_estimate(pp, params).map_err(|e| anyhow!("{e}"))?;
        let n = (1u64 << pp.min(63)) - 1;
        let windowed = if pp < 63 && n <= cfg.horizon {
            let norm = nilshift::shift::op_norm_power(&full, n, cfg.horizon)
                .map_err(|e| anyhow!("{e}"))?;
            Some((norm.log_mag() / n as f64).exp())
        } else {
            None
        };
        rows.push((pp, rho, windowed));
    }
    if rows.is_empty() {
        bail!("--p must be at least 1");
    }
    let limit = params.m() / params.k();
    let format = cfg.format.unwrap_or(OutputFormat::Csv);
    let out = match format {
        OutputFormat::Csv => {
            let mut s = String::from("p,rho_estimate,windowed_root\n");
            for (pp, rho, windowed) in &rows {
                let w = windowed.map(|v| v.to_string()).unwrap_or_default();
                s.push_str(&format!("{pp},{rho},{w}\n"));
            }
            s.push_str(&format!("limit,{limit},\n"));
            s
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|(pp, rho, windowed)| json!({"p": pp, "rho": rho, "windowed_root": windowed}))
                .collect();
            serde_json::to_string_pretty(&json!({
                "M": params.m(),
                "K": params.k(),
                "horizon": cfg.horizon,
                "rows": rows,
                "limit": limit,
            }))? + "\n"
        }
    };
    write_output(cfg, &out)?;
    Ok(Outcome::Clean)
}

fn cmd_nilpotency(cfg: &RunConfig, m_max: u32, basis_max: u64) -> Result<Outcome> {
    let report = nilshift::certificates::check_nilpotency(m_max, basis_max, &cfg.params)
        .map_err(usage_error)?;
    let pass = report.pass;
    emit_reports(cfg, "nilpotency", &[report])?;
    Ok(if pass { Outcome::Clean } else { Outcome::CertificateViolation })
}

fn cmd_trajectory(
    cfg: &RunConfig,
    init: Option<PathBuf>,
    basis: Option<u64>,
    lognorm_pow: Option<f64>,
) -> Result<Outcome> {
    let x0 = match (init, basis, lognorm_pow) {
        (Some(path), None, None) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            SparseVec::parse(&text).map_err(|e| anyhow!("{e}"))?
        }
        (None, Some(i), Some(pow)) => {
            SparseVec::basis(i, LogScalar::pos(-pow * cfg.params.ln_m()))
                .map_err(|e| anyhow!("{e}"))?
        }
        _ => bail!("provide either --init FILE or both --basis I and --lognorm-pow L"),
    };
    let x0_log = if x0.is_zero() { None } else { Some(x0.norm().log_mag()) };
    let records = iterate(x0, cfg.steps.unwrap_or(1000), &cfg.params);
    let violated = records.iter().any(|r| !r.growth_cap_ok);

    let ln10 = 10f64.ln();
    let ln_m = cfg.params.ln_m();
    let bound_quarter = x0_log.filter(|l| *l < -4.0 * ln_m).map(|l| l / 4.0 / ln10);
    let bound_decay =
        |n: u64| x0_log.map(|l| (-(n as f64) / 2.0 * ln_m + l / 8.0) / ln10);

    let format = cfg.format.unwrap_or(OutputFormat::Csv);
    let out = match format {
        OutputFormat::Csv => {
            let mut s = String::from(
                "n,log10_norm,support_min,support_max,band_k,bound_32_log10,bound_38_log10\n",
            );
            for r in &records {
                s.push_str(&trajectory_csv_row(r, ln10, bound_quarter, bound_decay(r.step)));
            }
            s
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = records
                .iter()
                .map(|r| {
                    json!({
                        "n": r.step,
                        "log10_norm": r.log_norm.map(|l| json!(l / ln10)).unwrap_or(json!("ZERO")),
                        "support_min": r.support_min,
                        "support_max": r.support_max,
                        "band_k": r.band_k,
                        "bound_32_log10": bound_quarter,
                        "bound_38_log10": bound_decay(r.step),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&json!({
                "M": cfg.params.m(),
                "K": cfg.params.k(),
                "records": rows,
            }))? + "\n"
        }
    };
    write_output(cfg, &out)?;
    Ok(if violated { Outcome::CertificateViolation } else { Outcome::Clean })
}

fn trajectory_csv_row(
    r: &TrajectoryRecord,
    ln10: f64,
    bound_quarter: Option<f64>,
    bound_decay: Option<f64>,
) -> String {
    let opt_u64 = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt_u32 = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt_f64 = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let norm = match r.log_norm {
        Some(l) => (l / ln10).to_string(),
        None => "ZERO".to_string(),
    };
    format!(
        "{},{norm},{},{},{},{},{}\n",
        r.step,
        opt_u64(r.support_min),
        opt_u64(r.support_max),
        opt_u32(r.band_k),
        opt_f64(bound_quarter),
        opt_f64(bound_decay),
    )
}

fn usage_error(e: CertificateError) -> anyhow::Error {
    anyhow!("{e}")
}

fn cmd_verify(
    cfg: &RunConfig,
    suite_name: &str,
    c1: Option<f64>,
    c2: Option<f64>,
    p: Option<u32>,
) -> Result<Outcome> {
    let suite: Suite = suite_name.parse().map_err(|e: String| anyhow!(e))?;
    let mut suite_cfg = SuiteConfig::new(cfg.params, cfg.seed);
    if let Some(steps) = cfg.steps {
        suite_cfg.steps = steps.max(1);
    }
    if let Some(c1) = c1 {
        suite_cfg.c1 = c1;
    }
    if let Some(c2) = c2 {
        suite_cfg.c2 = c2;
    }
    if let Some(p) = p {
        suite_cfg.p_max = p;
    }
    let mut reports = run_suite(suite, &suite_cfg).map_err(usage_error)?;
    reports.sort_by(|a, b| a.certificate.cmp(&b.certificate));
    let pass = reports.iter().all(|r| r.pass);
    emit_reports(cfg, suite_name, &reports)?;
    Ok(if pass { Outcome::Clean } else { Outcome::CertificateViolation })
}

fn emit_reports(cfg: &RunConfig, suite: &str, reports: &[CertificateReport]) -> Result<()> {
    let pass = reports.iter().all(|r| r.pass);
    let format = cfg.format.unwrap_or(OutputFormat::Json);
    let out = match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&json!({
                "suite": suite,
                "M": cfg.params.m(),
                "K": cfg.params.k(),
                "seed": cfg.seed,
                "pass": pass,
                "reports": reports,
            }))? + "\n"
        }
        OutputFormat::Csv => {
            let mut s = String::from("certificate,pass,tolerance,runtime_ms,note\n");
            for r in reports {
                let note = r
                    .witness
                    .as_ref()
                    .map(|w| w.context.clone())
                    .or_else(|| r.note.clone())
                    .unwrap_or_default()
                    .replace(',', ";");
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.certificate, r.pass, r.tolerance, r.runtime_ms, note
                ));
            }
            s
        }
    };
    write_output(cfg, &out)
}
