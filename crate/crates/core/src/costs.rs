//! Running, terminal and switching costs of the two players.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::market::PathBundle;
use crate::valuation::{ExposureSurface, FundingSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Player {
    A,
    B,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::A => Player::B,
            Player::B => Player::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self)
    }
}

/// Piecewise-constant switching cost curve on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostCurve {
    Constant(f64),
    /// One value per grid point `0..=n_steps`.
    Grid(Vec<f64>),
}

impl CostCurve {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            CostCurve::Constant(c) => *c,
            CostCurve::Grid(v) => v[k.min(v.len() - 1)],
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            CostCurve::Constant(c) => *c,
            CostCurve::Grid(v) => v.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    fn scaled(&self, s: f64) -> CostCurve {
        match self {
            CostCurve::Constant(c) => CostCurve::Constant(c * s),
            CostCurve::Grid(v) => CostCurve::Grid(v.iter().map(|c| c * s).collect()),
        }
    }
}

/// Where the threshold `δ` in a player's costs comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    #[default]
    Constant,
    /// The opponent's realised cost-to-go under the current strategy pair, floored at 0.
    Response,
}

/// Cost parameters of one player. `delta` is the response threshold that enters
/// this player's costs (the opponent's `δ` in the two-player notation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerCostParams {
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub delta_mode: DeltaMode,
    /// Cost of switching into regime 0 (collateral on).
    pub c_to0: CostCurve,
    /// Cost of switching into regime 1 (collateral off).
    pub c_to1: CostCurve,
    #[serde(default)]
    pub funding: FundingSpec,
}

impl PlayerCostParams {
    pub fn switch_cost(&self, k: usize, new_regime: u8) -> f64 {
        if new_regime == 0 {
            self.c_to0.at(k)
        } else {
            self.c_to1.at(k)
        }
    }

    /// Same parameters with both switching-cost curves multiplied by `s`.
    pub fn with_cost_scale(&self, s: f64) -> Self {
        Self { c_to0: self.c_to0.scaled(s), c_to1: self.c_to1.scaled(s), ..self.clone() }
    }

    pub fn diagnostics(&self, who: Player, n_steps: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            out.push(format!("costs.{who}.delta = {} must be finite and >= 0", self.delta));
        }
        for (name, c) in [("c_to0", &self.c_to0), ("c_to1", &self.c_to1)] {
            if let CostCurve::Grid(v) = c {
                if v.len() != n_steps + 1 {
                    out.push(format!(
                        "costs.{who}.{name} has {} values, expected {}",
                        v.len(),
                        n_steps + 1
                    ));
                }
            }
            let m = c.min();
            if !(m >= 0.0) || !m.is_finite() {
                out.push(format!("costs.{who}.{name} must be finite and >= 0"));
            }
        }
        out.extend(self.funding.diagnostics(&format!("costs.{who}")));
        out
    }

    /// Hp3: switching costs bounded below by a positive constant.
    pub fn hp3_violation(&self, who: Player) -> Option<String> {
        let floor = self.c_to0.min().min(self.c_to1.min());
        (floor <= 0.0).then(|| {
            format!("Hp3: costs.{who} switching cost floor min(c_to0, c_to1) = {floor} is not > 0")
        })
    }
}

/// Shape of the running and terminal cost functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostForm {
    #[default]
    Quadratic,
    /// Signed linear costs of the zero-sum configuration.
    Linear,
}

/// Funding factor `R(t)` while collateral is active.
pub fn funding_factor(t: f64, regime: u8, npv: f64, f: &FundingSpec) -> Result<f64> {
    if regime != 0 {
        return Err(EngineError::Contract("funding factor requested without collateral".into()));
    }
    Ok(if npv < 0.0 {
        -(-(f.borrow_spread - f.remuneration_basis) * t).exp()
    } else if npv > 0.0 {
        (-(f.opportunity_premium - f.remuneration_basis) * t).exp()
    } else {
        0.0
    })
}

/// Bracket of the collateralised running cost over one grid interval.
pub fn regime0_inner(r_factor: f64, npv: f64, dt: f64, delta: f64) -> f64 {
    r_factor * npv.abs() * dt - npv - delta
}

/// Running cost rate `F_z` for one grid interval.
pub fn running_cost(form: CostForm, regime: u8, bcva: f64, npv: f64, r_factor: f64, dt: f64, delta: f64) -> f64 {
    match (form, regime) {
        (CostForm::Quadratic, 1) => (bcva - delta).powi(2),
        (CostForm::Quadratic, _) => regime0_inner(r_factor, npv, dt, delta).powi(2),
        (CostForm::Linear, 1) => bcva - delta,
        (CostForm::Linear, _) => -delta,
    }
}

/// Terminal cost at `T ∧ τ`; `npv_t` is the settlement amount at that time.
pub fn terminal_cost(form: CostForm, regime: u8, npv_t: f64, delta: f64) -> f64 {
    match (form, regime) {
        (CostForm::Quadratic, 0) => (-npv_t - delta).powi(2),
        (CostForm::Quadratic, _) => delta * delta,
        (CostForm::Linear, _) => -delta,
    }
}

/// Discounted instantaneous cost of entering `new_regime` at grid step `k`.
pub fn switching_cost(params: &PlayerCostParams, k: usize, new_regime: u8, bundle: &PathBundle) -> f64 {
    if k >= bundle.n_steps() {
        return 0.0;
    }
    params.switch_cost(k, new_regime) * bundle.deflator(k)
}

/// One player's oriented cost inputs on a bundle. `δ` is passed at evaluation
/// time so that response mode can vary it per path and step.
#[derive(Debug, Clone)]
pub struct RegimeCosts {
    pub player: Player,
    pub form: CostForm,
    pub params: PlayerCostParams,
    /// Player-oriented BCVA and NPV, `[path][k]`.
    pub bcva: Vec<Vec<f64>>,
    pub npv: Vec<Vec<f64>>,
    /// Funding factor in regime 0, `[path][k]`.
    pub r_factor: Vec<Vec<f64>>,
    pub terminal_npv: Vec<f64>,
    pub dt: Vec<f64>,
    pub deflator: Vec<f64>,
    pub stop: Vec<usize>,
}

impl RegimeCosts {
    /// `surface` is B-oriented; A receives the mirrored view.
    pub fn build(
        player: Player,
        form: CostForm,
        params: &PlayerCostParams,
        surface: &ExposureSurface,
        bundle: &PathBundle,
    ) -> Result<Self> {
        if surface.n_paths() != bundle.n_paths() || surface.time.len() != bundle.grid.len() {
            return Err(EngineError::Shape("exposure surface does not match the bundle".into()));
        }
        let view = match player {
            Player::B => surface.clone(),
            Player::A => surface.mirrored(),
        };
        let n = bundle.n_steps();
        let mut r_factor = vec![vec![0.0; n + 1]; bundle.n_paths()];
        for (p, row) in r_factor.iter_mut().enumerate() {
            for (k, r) in row.iter_mut().enumerate() {
                *r = funding_factor(bundle.grid[k], 0, view.s_rf[p][k], &params.funding)?;
            }
        }
        Ok(Self {
            player,
            form,
            params: params.clone(),
            bcva: view.bcva,
            npv: view.s_rf,
            r_factor,
            terminal_npv: view.terminal_npv,
            dt: (0..n).map(|k| bundle.dt(k)).collect(),
            deflator: (0..=n).map(|k| bundle.deflator(k)).collect(),
            stop: (0..bundle.n_paths()).map(|p| bundle.stop_index(p)).collect(),
        })
    }

    pub fn n_paths(&self) -> usize {
        self.bcva.len()
    }

    pub fn n_steps(&self) -> usize {
        self.dt.len()
    }

    /// Discounted running cost `F_z Δt / B` on interval `[t_k, t_{k+1})`.
    pub fn running(&self, p: usize, k: usize, z: u8, delta: f64) -> f64 {
        let f = running_cost(
            self.form,
            z,
            self.bcva[p][k],
            self.npv[p][k],
            self.r_factor[p][k],
            self.dt[k],
            delta,
        );
        f * self.dt[k] * self.deflator[k]
    }

    /// Discounted terminal cost at the stop index under regime `z`.
    pub fn terminal(&self, p: usize, z: u8, delta: f64) -> f64 {
        terminal_cost(self.form, z, self.terminal_npv[p], delta) * self.deflator[self.stop[p]]
    }

    /// Discounted cost of a regime change into `z` at step `k`.
    pub fn switching(&self, k: usize, z: u8) -> f64 {
        if k >= self.n_steps() {
            return 0.0;
        }
        self.params.switch_cost(k, z) * self.deflator[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn funding(s: f64, bp: f64, pi: f64) -> FundingSpec {
        FundingSpec { borrow_spread: s, remuneration_basis: bp, opportunity_premium: pi }
    }

    #[test]
    fn funding_factor_table() {
        assert_eq!(funding_factor(3.0, 0, -1.0, &funding(0.02, 0.02, 0.0)).unwrap(), -1.0);
        let r = funding_factor(1.0, 0, 2.0, &funding(0.0, 0.01, 0.02)).unwrap();
        assert!((r - (-0.01f64).exp()).abs() < 1e-15);
        assert_eq!(funding_factor(1.0, 0, 0.0, &funding(0.1, 0.0, 0.1)).unwrap(), 0.0);
        assert!(matches!(funding_factor(1.0, 1, 1.0, &FundingSpec::default()), Err(EngineError::Contract(_))));
    }

    #[test]
    fn running_cost_examples() {
        assert!((running_cost(CostForm::Quadratic, 1, 0.3, 0.0, 0.0, 1.0, 0.0) - 0.09).abs() < 1e-15);
        assert_eq!(running_cost(CostForm::Quadratic, 0, 0.0, 0.0, 0.0, 1.0, 0.0), 0.0);
        assert_eq!(running_cost(CostForm::Quadratic, 0, 0.0, 1.0, -1.0, 1.0, 0.0), 4.0);
        assert_eq!(running_cost(CostForm::Linear, 0, 0.7, 1.0, -1.0, 1.0, 0.1), -0.1);
    }

    #[test]
    fn terminal_cost_examples() {
        assert_eq!(terminal_cost(CostForm::Quadratic, 1, 0.5, 0.0), 0.0);
        assert_eq!(terminal_cost(CostForm::Quadratic, 0, 0.5, 0.0), 0.25);
        assert!((terminal_cost(CostForm::Quadratic, 1, 0.5, 0.1) - 0.01).abs() < 1e-17);
    }

    #[test]
    fn switching_cost_discounted() {
        let params = PlayerCostParams {
            delta: 0.0,
            delta_mode: DeltaMode::Constant,
            c_to0: CostCurve::Constant(0.02),
            c_to1: CostCurve::Constant(0.02),
            funding: FundingSpec::default(),
        };
        let grid: Vec<f64> = vec![0.0, 1.0, 2.0];
        let bank: Vec<f64> = grid.iter().map(|t: &f64| (0.05 * t).exp()).collect();
        let b = PathBundle::from_parts(
            grid,
            vec![vec![1.0; 3]],
            vec![vec![0.0; 3]],
            vec![vec![0.0; 3]],
            bank,
            vec![f64::INFINITY],
            vec![f64::INFINITY],
        )
        .unwrap();
        assert!((switching_cost(&params, 1, 0, &b) - 0.02 * (-0.05f64).exp()).abs() < 1e-15);
        assert_eq!(switching_cost(&params, 2, 0, &b), 0.0);
        assert!(params.hp3_violation(Player::A).is_none());
        let free = params.with_cost_scale(0.0);
        assert!(free.hp3_violation(Player::A).is_some());
    }
}
