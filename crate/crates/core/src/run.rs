//! Orchestration of the engine modes and their artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::costs::{Player, RegimeCosts};
use crate::error::{EngineError, Result};
use crate::game::{compose_regimes, write_policy_csv, Certificate, Game, GameOutcome, SwitchingStrategy};
use crate::market::{simulate_paths, PathBundle};
use crate::regression::Conditioning;
use crate::solver::{
    best_response_iteration, brute_force_oracle, solve_symmetric, RegimeValueSurface, SolverMode,
};
use crate::valuation::{exposure_surface, ExposureSurface, ValuationConfig};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit statuses of a run.
pub mod exit {
    pub const OK: i32 = 0;
    pub const RUNTIME: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const INCONCLUSIVE: i32 = 3;
    pub const REFUTED: i32 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Value,
    Game,
    Symmetric,
    Oracle,
    Residuals,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Value => "value",
            Mode::Game => "game",
            Mode::Symmetric => "symmetric",
            Mode::Oracle => "oracle",
            Mode::Residuals => "residuals",
            Mode::Validate => "validate",
        }
    }
}

/// Simulated bundle, exposure surface and both players' cost tables.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub bundle: PathBundle,
    pub conditioning: Conditioning,
    pub surface: ExposureSurface,
    pub costs: [RegimeCosts; 2],
}

impl Prepared {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let bundle = simulate_paths(&config.model)?;
        Self::with_bundle(config, bundle)
    }

    /// Build on an externally supplied bundle (its grid overrides the model's).
    pub fn with_bundle(config: &RunConfig, bundle: PathBundle) -> Result<Self> {
        let conditioning = config.solver.resolved_conditioning(bundle.n_paths());
        let vcfg = ValuationConfig {
            conditioning,
            degree: config.solver.basis.degree,
            constant_drift: config.model.mu.as_constant(),
        };
        let surface = exposure_surface(&bundle, &config.claim, &config.collateral, &vcfg)?;
        let form = config.cost_form();
        let costs = [
            RegimeCosts::build(Player::A, form, &config.costs.a, &surface, &bundle)?,
            RegimeCosts::build(Player::B, form, &config.costs.b, &surface, &bundle)?,
        ];
        Ok(Self { config: config.clone(), bundle, conditioning, surface, costs })
    }

    pub fn game(&self) -> Result<Game<'_>> {
        let mut g = Game::new(&self.bundle, &self.costs[0], &self.costs[1], self.config.solver.initial_regime)?;
        g.alternating = self.config.solver.alternating;
        Ok(g)
    }
}

/// Summary of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Resolved configuration with a provenance header; re-running it reproduces the outputs.
pub fn manifest_text(config: &RunConfig, mode: Mode) -> Result<String> {
    Ok(format!(
        "# csa-game {ENGINE_VERSION}\n# mode = {}\n# seed = {}\n{}",
        mode.name(),
        config.model.seed,
        config.to_toml()?
    ))
}

fn write_paths_csv(bundle: &PathBundle, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["path", "step", "time", "x", "lambda_a", "lambda_b", "bank"])?;
    for p in 0..bundle.n_paths() {
        for (k, t) in bundle.grid.iter().enumerate() {
            w.write_record(&[
                p.to_string(),
                k.to_string(),
                t.to_string(),
                bundle.x[p][k].to_string(),
                bundle.lam_a[p][k].to_string(),
                bundle.lam_b[p][k].to_string(),
                bundle.bank[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_defaults_csv(bundle: &PathBundle, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["path", "tau_a", "tau_b", "tau", "stop_step"])?;
    for p in 0..bundle.n_paths() {
        w.write_record(&[
            p.to_string(),
            bundle.tau_a[p].to_string(),
            bundle.tau_b[p].to_string(),
            bundle.tau[p].to_string(),
            bundle.stop_index(p).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_costs_csv(game: &Game, a: &SwitchingStrategy, b: &SwitchingStrategy, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["path", "player", "running", "switching", "terminal", "total"])?;
    for p in 0..game.bundle.n_paths() {
        for who in [Player::A, Player::B] {
            let [r, s, t] = game.breakdown(who, p, &a.times[p], &b.times[p]);
            w.write_record(&[
                p.to_string(),
                who.to_string(),
                r.to_string(),
                s.to_string(),
                t.to_string(),
                (r + s + t).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean value per `(player, regime, l, step)` with regression coefficients where fitted.
fn write_values_csv(surfaces: &[&RegimeValueSurface], grid: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["player", "regime", "l", "step", "time", "mean_value", "coefficients"])?;
    for s in surfaces {
        for (l, per_z) in s.values.iter().enumerate() {
            for (z, per_k) in per_z.iter().enumerate() {
                for (k, v) in per_k.iter().enumerate() {
                    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
                    // coefficients of E[U_{k+1} | state_k] live on step k
                    let coef = s
                        .coefficients
                        .iter()
                        .find(|c| c.l == l && c.regime as usize == z && c.step == k)
                        .map(|c| c.coefficients.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
                        .unwrap_or_default();
                    w.write_record(&[
                        s.player.to_string(),
                        z.to_string(),
                        l.to_string(),
                        k.to_string(),
                        grid[k].to_string(),
                        mean.to_string(),
                        coef,
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn certificate_exit(c: Certificate) -> i32 {
    match c {
        Certificate::Certified => exit::OK,
        Certificate::Inconclusive => exit::INCONCLUSIVE,
        Certificate::Refuted => exit::REFUTED,
    }
}

fn outcome_json(outcome: &GameOutcome, mode: SolverMode) -> serde_json::Value {
    let mut v = serde_json::to_value(outcome).unwrap_or_default();
    v["solver_mode"] = json!(mode);
    v
}

struct Ctx {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Ctx {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

/// Execute `mode` and write its artifacts into `config.output.dir`.
pub fn run(config: &RunConfig, mode: Mode) -> Result<RunReport> {
    let diags = config.diagnostics();
    for w in &diags.warnings {
        log::warn!("{w}");
    }
    if mode == Mode::Validate || !diags.is_ok() {
        let code = if diags.is_ok() { exit::OK } else { exit::INVALID };
        return Ok(RunReport { exit_code: code, files: Vec::new(), summary: json!({ "diagnostics": diags.lines() }) });
    }

    let mut ctx = Ctx { dir: config.output.dir.clone(), files: Vec::new() };
    fs::create_dir_all(&ctx.dir)?;
    fs::write(ctx.path("manifest.toml"), manifest_text(config, mode)?)?;

    if mode == Mode::Simulate {
        let bundle = simulate_paths(&config.model)?;
        if config.output.paths {
            write_paths_csv(&bundle, &ctx.path("paths.csv"))?;
        }
        write_defaults_csv(&bundle, &ctx.path("defaults.csv"))?;
        let defaulted = bundle.tau.iter().filter(|t| t.is_finite()).count();
        let summary = json!({
            "n_paths": bundle.n_paths(),
            "n_steps": bundle.n_steps(),
            "default_fraction": defaulted as f64 / bundle.n_paths() as f64,
        });
        write_json(&ctx.path("simulation.json"), &summary)?;
        return Ok(RunReport { exit_code: exit::OK, files: ctx.files, summary });
    }

    let prep = Prepared::new(config)?;
    if config.output.exposure {
        prep.surface.write_csv(&ctx.path("exposure.csv"))?;
    }
    let mean0 = |m: &[Vec<f64>]| m.iter().map(|r| r[0]).sum::<f64>() / m.len() as f64;
    let valuation = json!({
        "pricing": prep.surface.pricing,
        "conditioning": prep.conditioning,
        "s_rf_0": mean0(&prep.surface.s_rf),
        "s_0": mean0(&prep.surface.s),
        "cva_0": mean0(&prep.surface.cva),
        "dva_0": mean0(&prep.surface.dva),
        "bcva_0": mean0(&prep.surface.bcva),
    });
    write_json(&ctx.path("valuation.json"), &valuation)?;
    if mode == Mode::Value {
        return Ok(RunReport { exit_code: exit::OK, files: ctx.files, summary: valuation });
    }

    let game = prep.game()?;
    let grid = &prep.bundle.grid;
    let solver = &config.solver;
    match mode {
        Mode::Symmetric => {
            let (sol, surface) = solve_symmetric(&game, solver)?;
            let never = SwitchingStrategy::never(prep.bundle.n_paths());
            if config.output.paths {
                write_policy_csv(&sol.strategy, &never, grid, &ctx.path("policy.csv"))?;
            }
            write_values_csv(&[&surface], grid, &ctx.path("values.csv"))?;
            let summary = serde_json::to_value(&sol)?;
            write_json(&ctx.path("symmetric.json"), &summary)?;
            Ok(RunReport { exit_code: exit::OK, files: ctx.files, summary })
        }
        Mode::Game => {
            let (outcome, surfaces) = best_response_iteration(&game, solver)?;
            let (a, b) = outcome.strategies.clone().expect("iteration keeps its strategies");
            if config.output.paths {
                compose_regimes(&a, &b, &prep.bundle, game.z0)?.write_csv(grid, &ctx.path("regimes.csv"))?;
                write_policy_csv(&a, &b, grid, &ctx.path("policy.csv"))?;
                write_costs_csv(&game, &a, &b, &ctx.path("costs.csv"))?;
            }
            write_values_csv(&[&surfaces[0], &surfaces[1]], grid, &ctx.path("values.csv"))?;
            let summary = outcome_json(&outcome, solver.mode);
            write_json(&ctx.path("outcome.json"), &summary)?;
            Ok(RunReport { exit_code: certificate_exit(outcome.certificate), files: ctx.files, summary })
        }
        Mode::Oracle => {
            if prep.conditioning != Conditioning::Exact {
                return Err(EngineError::Config(
                    "oracle mode needs exact conditioning (raise solver.exact_paths_max or set conditioning = \"exact\")"
                        .into(),
                ));
            }
            let oracle = brute_force_oracle(&prep.bundle, [&prep.costs[0], &prep.costs[1]], solver)?;
            let (outcome, _) = best_response_iteration(&game, solver)?;
            let (a, b) = outcome.strategies.clone().expect("iteration keeps its strategies");
            let in_set = oracle.is_nep(&a, &b);
            let consistent = match outcome.certificate {
                Certificate::Certified => in_set && oracle.nep_exists,
                _ => true,
            };
            let summary = json!({
                "single_agent_value": oracle.single_agent_value,
                "nep_exists": oracle.nep_exists,
                "nep_pairs_per_path": oracle.nep_pairs_per_path,
                "game_certificate": outcome.certificate,
                "game_pair_in_oracle_nep_set": in_set,
                "consistent": consistent,
                "j_a": outcome.j_a.mean,
                "j_b": outcome.j_b.mean,
            });
            write_json(&ctx.path("oracle.json"), &summary)?;
            let code = if consistent { exit::OK } else { exit::REFUTED };
            Ok(RunReport { exit_code: code, files: ctx.files, summary })
        }
        Mode::Residuals => {
            let (_, surfaces) = best_response_iteration(&game, solver)?;
            let mut reports = Vec::new();
            for s in &surfaces {
                reports.push(json!({
                    "report": s.reflection,
                    "budget_monotonicity_gap": budget_gap(s),
                }));
            }
            let summary = json!({ "players": reports });
            write_json(&ctx.path("residuals.json"), &summary)?;
            Ok(RunReport { exit_code: exit::OK, files: ctx.files, summary })
        }
        Mode::Simulate | Mode::Value | Mode::Validate => unreachable!("handled above"),
    }
}

/// `max (V^l - V^{l-1})` over paths, steps and regimes; `<= 0` when extra budget never hurts.
pub fn budget_gap(s: &RegimeValueSurface) -> f64 {
    let mut gap = f64::NEG_INFINITY;
    for l in 1..s.values.len() {
        for z in 0..2 {
            for (hi, lo) in s.values[l][z].iter().zip(&s.values[l - 1][z]) {
                for (a, b) in hi.iter().zip(lo) {
                    gap = gap.max(a - b);
                }
            }
        }
    }
    gap
}
