//! `qvrep`: price claims on log price and quadratic variation, tabulate
//! payoffs, check pricing identities by simulation and study hedges.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use qvrep_core::charfun::{Branch, CharFunError};
use qvrep_core::levy::LevyError;
use qvrep_core::mcengine::{check_pricing_identity, price_by_simulation, McError};
use qvrep_core::pricing::{payoff_fn, payoff_table, write_payoff_csv, PricingError};
use qvrep_core::replication::{hedge_convergence, write_hedge_csv, HedgeContext, HedgeError};
use serde_json::json;
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{message}")]
    Core { category: &'static str, message: String },
}

impl CliError {
    fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core { category, .. } => category,
        }
    }

    fn exit_code(&self) -> u8 {
        match self.category() {
            "config" | "assumption" | "assumption2" => 2,
            "branch_point" => 3,
            "numerical" => 4,
            "io" => 5,
            _ => 1,
        }
    }
}

macro_rules! core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core { category: e.category(), message: e.to_string() }
            }
        }
    )*};
}
core_error!(CharFunError, LevyError, McError, PricingError, HedgeError);

#[derive(Parser)]
#[command(name = "qvrep", version, about = "Claims on log price and quadratic variation under jump diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    branch: Option<Branch>,
}

#[derive(Subcommand)]
enum Command {
    /// Price of the configured claim: simulated mean of `g(X_T)`.
    Price {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// CSV of `g(log S)` over a grid of prices.
    PayoffTable {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s_min: Option<f64>,
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Monte Carlo check of `E phi = E g(X_T)`.
    McCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// Terminal error of the dynamic hedge for several rebalancing grids.
    HedgeSim {
        #[command(flatten)]
        common: Common,
        /// Comma separated, e.g. 64,256,1024
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<usize>>,
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// `psi` of the configured measure: closed form and quadrature.
    PsiEval {
        #[command(flatten)]
        common: Common,
        /// `re` or `re,im`
        #[arg(long, allow_hyphen_values = true)]
        omega: String,
        #[arg(long, allow_hyphen_values = true)]
        eta: String,
    },
}

fn parse_complex(s: &str) -> Result<Complex64, CliError> {
    let bad = || CliError::Config(format!("cannot parse complex number {s:?}"));
    let mut parts = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad()));
    let re = parts.next().ok_or_else(bad)??;
    let im = parts.next().transpose()?.unwrap_or(0.0);
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    if let Some(b) = common.branch {
        cfg.branch = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cfg: &RunConfig, body: &[u8]) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(body).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn json_line(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price { common, n_paths } => {
            let cfg = load(&common)?;
            let seed = cfg.seed()?;
            let n = n_paths.unwrap_or(cfg.mc.n_paths);
            let report = price_by_simulation(&cfg.claim, &cfg.model, cfg.branch, n, seed, &cfg.identity_options())?;
            println!("{:?} {:?}", report.price_re, report.price_im);
            if let Some(path) = &cfg.out {
                std::fs::write(path, json_line(&report)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
        }
        Command::PayoffTable { common, s_min, s_max, n_points } => {
            let mut cfg = load(&common)?;
            let t = &mut cfg.payoff_table;
            t.s_min = s_min.unwrap_or(t.s_min);
            t.s_max = s_max.unwrap_or(t.s_max);
            t.n_points = n_points.unwrap_or(t.n_points);
            let (lo, hi, n) = (t.s_min, t.s_max, t.n_points);
            if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && (lo < hi || (n == 1 && lo <= hi)) && n >= 1) {
                return Err(CliError::Config(format!("need 0 < s_min < s_max and n_points >= 1, got ({lo}, {hi}, {n})")));
            }
            let grid: Vec<f64> = if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            };
            let g = payoff_fn(&cfg.claim, &cfg.model, cfg.branch, &cfg.spectral())?;
            let rows = payoff_table(&g, &grid)?;
            let mut buf = Vec::new();
            write_payoff_csv(&rows, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            emit(&cfg, &buf)?;
        }
        Command::McCheck { common, n_paths } => {
            let cfg = load(&common)?;
            let seed = cfg.seed()?;
            let n = n_paths.unwrap_or(cfg.mc.n_paths);
            let report = check_pricing_identity(&cfg.claim, &cfg.model, cfg.branch, n, seed, &cfg.identity_options())?;
            emit(&cfg, &json_line(&report))?;
        }
        Command::HedgeSim { common, steps, n_paths } => {
            let cfg = load(&common)?;
            let seed = cfg.seed()?;
            let steps = steps.unwrap_or_else(|| cfg.hedge.n_steps.clone());
            let n = n_paths.unwrap_or(cfg.hedge.n_paths);
            if steps.is_empty() || steps.contains(&0) || n == 0 {
                return Err(CliError::Config("need positive step counts and n_paths".into()));
            }
            let (sc, omega, eta, collar) = cfg.hedge_problem()?;
            let ctx = HedgeContext::new(sc, omega, eta, cfg.branch, collar)?;
            let rows = hedge_convergence(&ctx, &steps, n, seed)?;
            let mut buf = Vec::new();
            write_hedge_csv(&rows, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            emit(&cfg, &buf)?;
        }
        Command::PsiEval { common, omega, eta } => {
            let mut cfg = RunConfig::load(&common.config)?;
            cfg.out = common.out.clone().or(cfg.out);
            cfg.model.measure.validate()?;
            let (w, e) = (parse_complex(&omega)?, parse_complex(&eta)?);
            let closed = cfg.model.measure.psi(w, e)?;
            let quad = cfg.model.measure.psi_quadrature(w, e)?;
            let body = json_line(&json!({
                "omega": w,
                "eta": e,
                "psi_re": closed.re,
                "psi_im": closed.im,
                "quad_re": quad.re,
                "quad_im": quad.im,
                "abs_diff": (closed - quad).norm(),
            }));
            emit(&cfg, &body)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", json!({"error": {"category": err.category(), "message": err.to_string()}}));
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", json!({"error": {"category": err.category(), "message": err.to_string()}}));
            ExitCode::from(err.exit_code())
        }
    }
}
