//! `calcium-gspt` command-line front end.

mod commands;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use calcium_gspt::{DimensionlessParameterSet, IntegratorConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "calcium-gspt", version, about = "Slow-fast analysis of the open-cell calcium model")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// JSON object of dimensionless parameter values applied over the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Parameter override, applied after the file; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    rtol: Option<f64>,
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// IP₃ concentration (shorthand for `--set p=...`).
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Section level `c = χ` of the R1 map.
    #[arg(long, global = true)]
    chi: Option<f64>,
    /// Section level `C = 1/χ` of the R2 map.
    #[arg(long = "chi-r2", global = true)]
    chi_r2: Option<f64>,
    /// Small parameter ε (defaults to K_τ); R1 uses ϵ = ε⁴.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Coupling ν (defaults to V_s); R2 uses ν̃ = ν/ε².
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Seed for the map-grid jitter.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Uniform jitter amplitude added to map entry points (0 disables it).
    #[arg(long, global = true, default_value_t = 0.0)]
    jitter: f64,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Integrate the full model and write the trajectory.
    Simulate {
        /// Integration horizon in dimensionless time.
        #[arg(long, default_value_t = 1.5e6)]
        t_end: f64,
    },
    /// Small-parameter identification.
    ScaleReport,
    /// R1 landmarks, S1 samples and the unstable-cycle branch.
    AnalyzeR1,
    /// R2 fold curve and reduced flow.
    AnalyzeR2,
    /// Transition maps of both regimes and the fold-passage scaling.
    Maps,
    /// Equilibrium branch with Hopf detection.
    Bifurcate {
        #[arg(long, default_value_t = 0.001)]
        p_min: f64,
        #[arg(long, default_value_t = 0.2)]
        p_max: f64,
    },
    /// Periodic-attractor amplitude scan over p.
    Scan {
        /// `lo,hi,n`; defaults to 12 values in [0.03, 0.1001].
        #[arg(long)]
        grid: Option<String>,
    },
    /// Every CSV needed to re-plot the figures.
    ExportFigs,
}

/// Resolved inputs shared by all subcommands.
pub struct RunConfig {
    pub params: DimensionlessParameterSet,
    pub integrator: IntegratorConfig,
    pub out: PathBuf,
    pub chi: f64,
    pub chi_r2: f64,
    pub eps: f64,
    pub nu: f64,
    pub seed: u64,
    pub jitter: f64,
}

impl RunConfig {
    pub fn nu_tilde(&self) -> f64 {
        self.nu / (self.eps * self.eps)
    }

    /// ϵ of the R1 formulation.
    pub fn epsilon_r1(&self) -> f64 {
        self.eps.powi(4)
    }
}

/// Usage-class failures exit with 2, everything else with 1.
enum Failure {
    /// `None` once the message has been printed already.
    Usage(Option<anyhow::Error>),
    Analysis(anyhow::Error),
}

fn parse_override(s: &str) -> anyhow::Result<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("override `{s}` is not KEY=VALUE"))?;
    let v: f64 = v.trim().parse().with_context(|| format!("override `{s}`: value is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn resolve(g: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut params = DimensionlessParameterSet::table2();
    if let Some(path) = &g.params {
        if !path.is_file() {
            return Err(anyhow!("params file {} not found", path.display()));
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let values: BTreeMap<String, f64> =
            serde_json::from_str(&text).with_context(|| format!("{}: expected a flat JSON object of numbers", path.display()))?;
        for (k, v) in values {
            params = params.with_override(&k, v)?;
        }
    }
    for s in &g.set {
        let (k, v) = parse_override(s)?;
        params = params.with_override(&k, v)?;
    }
    if let Some(p) = g.p {
        params = params.with_override("p", p)?;
    }
    let mut integrator = IntegratorConfig::default();
    if let Some(r) = g.rtol {
        integrator.rtol = r;
    }
    if let Some(a) = g.atol {
        integrator.atol = a;
    }
    integrator.validate()?;
    let eps = g.eps.unwrap_or(params.scaled.k_tau);
    let nu = g.nu.unwrap_or(params.scaled.v_s);
    let chi = g.chi.unwrap_or(0.05);
    let chi_r2 = g.chi_r2.unwrap_or(0.5);
    for (name, v) in [("eps", eps), ("nu", nu), ("chi", chi), ("chi-r2", chi_r2)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(anyhow!("--{name} must be > 0"));
        }
    }
    if !(g.jitter.is_finite() && g.jitter >= 0.0) {
        return Err(anyhow!("--jitter must be >= 0"));
    }
    Ok(RunConfig { params, integrator, out: g.out.clone(), chi, chi_r2, eps, nu, seed: g.seed, jitter: g.jitter })
}

fn run(argv: Vec<String>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        // --help / --version
        Err(e) if e.exit_code() == 0 => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let _ = e.print();
            return Err(Failure::Usage(None));
        }
    };
    let cfg = resolve(&cli.global).map_err(|e| Failure::Usage(Some(e)))?;
    commands::dispatch(&cli.command, &cfg).map_err(Failure::Analysis)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            if let Some(e) = e {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Analysis(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
