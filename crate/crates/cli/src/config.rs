use std::path::{Path, PathBuf};

use num_complex::Complex64;
use qvrep_core::charfun::{u_branch, Branch, ClosedFormScenario, ModelSpec};
use qvrep_core::mcengine::{IdentityOptions, VolScenario};
use qvrep_core::pricing::{Claim, SpectralOptions};
use qvrep_core::replication::CollarSpec;
use serde::Deserialize;

use crate::CliError;

/// Run configuration. Horizon in years, jump sizes in log space.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub claim: Claim,
    #[serde(default)]
    pub branch: Branch,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub payoff_table: TableSettings,
    #[serde(default)]
    pub hedge: HedgeSettings,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub spectral_tol: f64,
    pub x_range: (f64, f64),
    pub table_tol: f64,
    pub z_threshold: f64,
    pub numeric_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let id = IdentityOptions::default();
        Tolerances {
            spectral_tol: id.spectral.tol,
            x_range: id.spectral.x_range,
            table_tol: id.table_tol,
            z_threshold: id.z_threshold,
            numeric_tol: id.numeric_tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub n_paths: usize,
    pub n_steps: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { n_paths: 100_000, n_steps: 50 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableSettings {
    pub s_min: f64,
    pub s_max: f64,
    pub n_points: usize,
}

impl Default for TableSettings {
    fn default() -> Self {
        TableSettings { s_min: 0.5, s_max: 1.5, n_points: 101 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedgeSettings {
    pub n_steps: Vec<usize>,
    pub n_paths: usize,
    /// Collar frequencies; chosen automatically when absent.
    pub collar: Option<Vec<Complex64>>,
}

impl Default for HedgeSettings {
    fn default() -> Self {
        HedgeSettings { n_steps: vec![64, 256, 1024], n_paths: 1000, collar: None }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks every model and claim invariant before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        self.claim.validate()?;
        if let Claim::PowerExponential { omega, eta, .. } = self.claim {
            let root = u_branch(omega, eta, self.branch);
            if root.near_branch_point {
                return Err(CliError::Core { category: "branch_point", message: format!("(omega, eta) = ({omega}, {eta}) is a branch point") });
            }
        }
        if let Claim::LetfCall { beta, .. } = self.claim {
            self.model.measure.check_assumption2(beta).map_err(CliError::from)?;
        }
        let t = &self.tolerances;
        let positive = [t.spectral_tol, t.table_tol, t.z_threshold, t.numeric_tol];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(t.x_range.0 < t.x_range.1) {
            return Err(CliError::Config("tolerances must be positive and x_range increasing".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("this command needs a seed (config `seed` or --seed)".into()))
    }

    pub fn spectral(&self) -> SpectralOptions {
        SpectralOptions { x_range: self.tolerances.x_range, tol: self.tolerances.spectral_tol, ..SpectralOptions::default() }
    }

    pub fn identity_options(&self) -> IdentityOptions {
        IdentityOptions {
            n_steps: self.mc.n_steps,
            spectral: self.spectral(),
            table_tol: self.tolerances.table_tol,
            z_threshold: self.tolerances.z_threshold,
            numeric_tol: self.tolerances.numeric_tol,
            ..IdentityOptions::default()
        }
    }

    /// Constant-volatility scenario and the exponential claim to hedge.
    pub fn hedge_problem(&self) -> Result<(ClosedFormScenario, Complex64, Complex64, Option<CollarSpec>), CliError> {
        let sigma = match self.model.vol {
            VolScenario::Constant { sigma } => sigma,
            _ => return Err(CliError::Config("hedge-sim needs constant volatility".into())),
        };
        if self.model.x0 != 0.0 || self.model.qv0 != 0.0 {
            return Err(CliError::Config("hedge-sim starts from x0 = qv0 = 0".into()));
        }
        let (omega, eta) = match self.claim {
            Claim::PowerExponential { n: 0, m: 0, omega, eta } => (omega, eta),
            _ => return Err(CliError::Config("hedge-sim needs a power_exponential claim with n = m = 0".into())),
        };
        let sc = ClosedFormScenario { sigma, measure: self.model.measure.clone(), horizon: self.model.horizon };
        let collar = self.hedge.collar.clone().map(|q_list| CollarSpec { q_list });
        Ok((sc, omega, eta, collar))
    }
}
