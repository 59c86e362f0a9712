//! Equilibrium search: backward induction, best-response iteration, the
//! symmetric single-agent reduction and a brute-force oracle.

mod backward;
mod iterate;
mod oracle;

pub use backward::{backward_induction, ReflectionReport, RegimeResiduals, RegimeValueSurface};
pub use iterate::{best_response_iteration, canonical_joins, solve_symmetric, symmetry_diagnostics, SymmetricSolution};
pub use oracle::{brute_force_oracle, OracleResult, PathOracle};

use serde::{Deserialize, Serialize};

use crate::game::CertifyConfig;
use crate::regression::{BasisSpec, Conditioning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    Game,
    Symmetric,
    ZeroSumBanal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub conditioning: Conditioning,
    /// `auto` conditioning is exact up to this many paths.
    #[serde(default = "default_exact_paths_max")]
    pub exact_paths_max: usize,
    /// Switch budget `M` of each player.
    #[serde(default = "default_max_switches")]
    pub max_switches: usize,
    #[serde(default = "default_br_max_iters")]
    pub br_max_iters: usize,
    /// Optional value tolerance; `0` means only identical realised pairs count as converged.
    #[serde(default)]
    pub br_tol: f64,
    /// Largest per-path number of strategy pairs the oracle may enumerate.
    #[serde(default = "default_exhaustive_bound")]
    pub exhaustive_bound: usize,
    #[serde(default)]
    pub mode: SolverMode,
    /// Initial regime (1: no collateral).
    #[serde(default = "default_z0")]
    pub initial_regime: u8,
    /// Restrict A to even and B to odd decision steps.
    #[serde(default)]
    pub alternating: bool,
    #[serde(default)]
    pub banal_eps: f64,
    #[serde(default)]
    pub certify: CertifyConfig,
}

fn default_exact_paths_max() -> usize {
    16
}
fn default_max_switches() -> usize {
    2
}
fn default_br_max_iters() -> usize {
    20
}
fn default_exhaustive_bound() -> usize {
    20_000
}
fn default_z0() -> u8 {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            basis: BasisSpec::default(),
            conditioning: Conditioning::Auto,
            exact_paths_max: default_exact_paths_max(),
            max_switches: default_max_switches(),
            br_max_iters: default_br_max_iters(),
            br_tol: 0.0,
            exhaustive_bound: default_exhaustive_bound(),
            mode: SolverMode::Game,
            initial_regime: default_z0(),
            alternating: false,
            banal_eps: 0.0,
            certify: CertifyConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_switches < 1 {
            out.push("solver.max_switches must be >= 1".into());
        }
        if self.br_max_iters < 1 {
            out.push("solver.br_max_iters must be >= 1".into());
        }
        if self.initial_regime > 1 {
            out.push(format!("solver.initial_regime = {} must be 0 or 1", self.initial_regime));
        }
        if !(0.0..=1.0).contains(&self.banal_eps) {
            out.push(format!("solver.banal_eps = {} must lie in [0, 1]", self.banal_eps));
        }
        if !(self.br_tol >= 0.0) {
            out.push("solver.br_tol must be >= 0".into());
        }
        if self.basis.vars.is_empty() && self.basis.degree > 0 {
            out.push("solver.basis.vars is empty".into());
        }
        out
    }

    pub fn resolved_conditioning(&self, n_paths: usize) -> Conditioning {
        self.conditioning.resolve(n_paths, self.exact_paths_max)
    }
}
