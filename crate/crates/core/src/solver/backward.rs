use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::costs::Player;
use crate::error::{EngineError, Result};
use crate::game::{Game, SwitchingStrategy};
use crate::regression::{Conditioner, Conditioning, Design, StateVar};

/// Reflection diagnostics for one regime at the top switch budget.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegimeResiduals {
    pub regime: u8,
    /// `max(0, Y - (Y_other + c))` together with `max(0, Y - continuation)`.
    pub max_violation: f64,
    /// `sum slack * dK`, zero when `K` only grows where the obstacle binds.
    pub complementarity: f64,
    /// Total compensator increase `sum dK` (deflated, summed over paths and steps).
    pub k_total: f64,
    pub max_dk: f64,
    pub binding_points: usize,
    pub decision_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub player: Player,
    pub regimes: Vec<RegimeResiduals>,
    /// Largest `|Y|` seen, for relative tolerances.
    pub value_scale: f64,
}

impl ReflectionReport {
    pub fn max_violation(&self) -> f64 {
        self.regimes.iter().map(|r| r.max_violation).fold(0.0, f64::max)
    }

    pub fn complementarity(&self) -> f64 {
        self.regimes.iter().map(|r| r.complementarity.abs()).fold(0.0, f64::max)
    }
}

/// Regression coefficients of `E[U^l_{k+1}(z) | state_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub l: usize,
    pub regime: u8,
    pub step: usize,
    pub coefficients: Vec<f64>,
}

/// Output of one backward induction.
#[derive(Debug, Clone)]
pub struct RegimeValueSurface {
    pub player: Player,
    pub max_switches: usize,
    pub conditioning: Conditioning,
    /// Realised value-to-go `[l][z][k][path]` (time-0 money), before decisions at `k`.
    pub values: Vec<[Vec<Vec<f64>>; 2]>,
    /// Decision `[l][z][k][path]`: switch, or join the opponent when it switches.
    pub decisions: Vec<[Vec<Vec<bool>>; 2]>,
    pub coefficients: Vec<CoefficientRow>,
    pub reflection: ReflectionReport,
}

impl RegimeValueSurface {
    /// Mean over paths of `U^l_0(z)`.
    pub fn value0(&self, l: usize, z: u8) -> f64 {
        let v = &self.values[l][z as usize][0];
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    /// Roll the feedback policy forward against the opponent's realised switches.
    pub fn realize(&self, game: &Game, opp: &SwitchingStrategy) -> SwitchingStrategy {
        let np = game.bundle.n_paths();
        let stop = &game.cost(self.player).stop;
        let times = (0..np)
            .map(|p| {
                let mut z = game.z0 as usize;
                let mut l = self.max_switches;
                let mut own = Vec::new();
                for k in 0..stop[p] {
                    let o = opp.times[p].binary_search(&k).is_ok();
                    if self.decisions[l][z][k][p] {
                        own.push(k);
                        l -= 1;
                        z = 1 - z;
                    } else if o {
                        z = 1 - z;
                    }
                }
                own
            })
            .collect();
        SwitchingStrategy { times }
    }
}

fn state_rows(game: &Game, vars: &[StateVar], paths: &[usize], k: usize) -> Vec<Vec<f64>> {
    let b = game.bundle;
    paths
        .iter()
        .map(|&p| {
            vars.iter()
                .map(|v| match v {
                    StateVar::X => b.x[p][k],
                    StateVar::LambdaA => b.lam_a[p][k],
                    StateVar::LambdaB => b.lam_b[p][k],
                })
                .collect()
        })
        .collect()
}

struct StepResult {
    /// `[l][z]` realised value, decision, and (at l = M) `(continuation, obstacle, value)` estimates.
    u: Vec<[f64; 2]>,
    d: Vec<[bool; 2]>,
    top: [Option<(f64, f64, f64)>; 2],
}

/// Optimal switching for `who` against the opponent's realised switch times.
/// `delta[p][k]` is the threshold used in `who`'s costs (`k <= stop`); `None`
/// uses the constant parameter.
pub fn backward_induction(
    game: &Game,
    who: Player,
    opp: &SwitchingStrategy,
    delta: Option<&[Vec<f64>]>,
    cfg: &SolverConfig,
) -> Result<RegimeValueSurface> {
    let bundle = game.bundle;
    let cost = game.cost(who);
    let n = bundle.n_steps();
    let np = bundle.n_paths();
    let m = cfg.max_switches;
    opp.validate(np, n, usize::MAX)?;
    let conditioning = cfg.resolved_conditioning(np);
    if conditioning == Conditioning::Regression {
        let basis = cfg.basis.size();
        if np < 10 * basis {
            return Err(EngineError::IllConditioned { needed: 10 * basis, basis, paths: np });
        }
    }
    let const_delta = cost.params.delta;
    let delta_at = |p: usize, k: usize| delta.map_or(const_delta, |d| d[p][k]);

    let mut values: Vec<[Vec<Vec<f64>>; 2]> =
        (0..=m).map(|_| [vec![vec![0.0; np]; n + 1], vec![vec![0.0; np]; n + 1]]).collect();
    let mut decisions: Vec<[Vec<Vec<bool>>; 2]> =
        (0..=m).map(|_| [vec![vec![false; np]; n + 1], vec![vec![false; np]; n + 1]]).collect();
    for p in 0..np {
        let stop = cost.stop[p];
        for z in 0..2u8 {
            let g = cost.terminal(p, z, delta_at(p, stop));
            for l in 0..=m {
                for k in stop..=n {
                    values[l][z as usize][k][p] = g;
                }
            }
        }
    }

    let mut coefficients = Vec::new();
    let mut residuals: [RegimeResiduals; 2] =
        [RegimeResiduals { regime: 0, ..Default::default() }, RegimeResiduals { regime: 1, ..Default::default() }];
    let mut value_scale: f64 = 0.0;

    for k in (0..n).rev() {
        let alive: Vec<usize> = (0..np).filter(|&p| k < cost.stop[p]).collect();
        if alive.is_empty() {
            continue;
        }
        let cond = match conditioning {
            Conditioning::Exact => Conditioner::Exact,
            _ => Conditioner::Regression(Design::new(&state_rows(game, &cfg.basis.vars, &alive, k), cfg.basis.degree)),
        };
        // est[l][z][i]: conditional expectation of next values on alive path i
        let mut est: Vec<[Vec<f64>; 2]> = Vec::with_capacity(m + 1);
        for l in 0..=m {
            let mut pair: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for z in 0..2 {
                let y: Vec<f64> = alive.iter().map(|&p| values[l][z][k + 1][p]).collect();
                let (fit, coef) = cond.expect(&y);
                if !coef.is_empty() {
                    coefficients.push(CoefficientRow { l, regime: z as u8, step: k, coefficients: coef });
                }
                pair[z] = fit;
            }
            est.push(pair);
        }

        let can = game.can_decide(who, k);
        let values_ref = &values;
        let est_ref = &est;
        let results: Vec<StepResult> = alive
            .par_iter()
            .enumerate()
            .map(|(i, &p)| {
                let o = opp.times[p].binary_search(&k).is_ok();
                let d = delta_at(p, k);
                let run = [cost.running(p, k, 0, d), cost.running(p, k, 1, d)];
                let c_est = |l: usize, z: usize| run[z] + est_ref[l][z][i];
                let c_real = |l: usize, z: usize| run[z] + values_ref[l][z][k + 1][p];
                let mut u = vec![[0.0; 2]; m + 1];
                let mut dec = vec![[false; 2]; m + 1];
                let mut top = [None, None];
                for l in 0..=m {
                    for z in 0..2 {
                        let zo = 1 - z;
                        let sw = cost.switching(k, zo as u8);
                        if o {
                            let join = can && l >= 1 && c_est(l - 1, zo) <= c_est(l, zo);
                            let lp = if join { l - 1 } else { l };
                            u[l][z] = sw + c_real(lp, zo);
                            dec[l][z] = join;
                        } else {
                            let cont = c_est(l, z);
                            if can && l >= 1 {
                                let obst = sw + c_est(l - 1, zo);
                                let switch = obst < cont;
                                dec[l][z] = switch;
                                u[l][z] = if switch { sw + c_real(l - 1, zo) } else { c_real(l, z) };
                                if l == m {
                                    top[z] = Some((cont, obst, cont.min(obst)));
                                }
                            } else {
                                u[l][z] = c_real(l, z);
                            }
                        }
                    }
                }
                StepResult { u, d: dec, top }
            })
            .collect();

        for (r, &p) in results.iter().zip(&alive) {
            for l in 0..=m {
                for z in 0..2 {
                    values[l][z][k][p] = r.u[l][z];
                    decisions[l][z][k][p] = r.d[l][z];
                    value_scale = value_scale.max(r.u[l][z].abs());
                }
            }
            for z in 0..2 {
                if let Some((cont, obst, y)) = r.top[z] {
                    let res = &mut residuals[z];
                    let dk = cont - y;
                    let slack = obst - y;
                    res.decision_points += 1;
                    res.max_violation = res.max_violation.max((y - obst).max(0.0)).max((y - cont).max(0.0));
                    res.complementarity += slack * dk;
                    res.k_total += dk;
                    res.max_dk = res.max_dk.max(dk);
                    if dk > 0.0 {
                        res.binding_points += 1;
                    }
                }
            }
        }
    }

    Ok(RegimeValueSurface {
        player: who,
        max_switches: m,
        conditioning,
        values,
        decisions,
        coefficients,
        reflection: ReflectionReport { player: who, regimes: residuals.to_vec(), value_scale },
    })
}
