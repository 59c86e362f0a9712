use serde::{Deserialize, Serialize};

use super::backward::{backward_induction, RegimeValueSurface};
use super::SolverConfig;
use crate::costs::{DeltaMode, Player, PlayerCostParams};
use crate::error::{EngineError, Result};
use crate::game::{
    certify_nep, compose_path, detect_banal, CertifyScope, Certificate, CycleReport, Estimate, Game, GameOutcome,
    SwitchingStrategy,
};
use crate::regression::Conditioning;

/// Threshold field for `who` along the joint path of `(a, b)`, or `None` in constant mode.
fn response_field(game: &Game, who: Player, a: &SwitchingStrategy, b: &SwitchingStrategy) -> Option<Vec<Vec<f64>>> {
    if game.cost(who).params.delta_mode != DeltaMode::Response {
        return None;
    }
    let n = game.bundle.n_steps();
    Some(
        (0..game.bundle.n_paths())
            .map(|p| {
                let stop = game.cost(who).stop[p];
                let (regime, _) = compose_path(n, stop, game.z0, &a.times[p], &b.times[p]);
                game.delta_field(who, p, &regime)
            })
            .collect(),
    )
}

fn scope(game: &Game, cfg: &SolverConfig) -> CertifyScope {
    CertifyScope {
        max_switches: cfg.max_switches,
        exhaustive: cfg.resolved_conditioning(game.bundle.n_paths()) == Conditioning::Exact,
        bound: cfg.exhaustive_bound,
    }
}

/// Let each player join every opponent switch it may decide at, budget permitting.
/// Payoffs depend on the joint regime path only, so the pair is payoff-equivalent;
/// this picks the equilibrium in which both players name the same switch times.
pub fn canonical_joins(
    game: &Game,
    a: &SwitchingStrategy,
    b: &SwitchingStrategy,
    max_switches: usize,
) -> (SwitchingStrategy, SwitchingStrategy, usize) {
    let mut added = 0;
    let mut join = |who: Player, own: &SwitchingStrategy, opp: &SwitchingStrategy| {
        let times = own
            .times
            .iter()
            .zip(&opp.times)
            .map(|(mine, theirs)| {
                let mut out = mine.clone();
                for &t in theirs {
                    if out.len() >= max_switches {
                        break;
                    }
                    if game.can_decide(who, t) && !out.contains(&t) {
                        out.push(t);
                        added += 1;
                    }
                }
                out.sort_unstable();
                out
            })
            .collect();
        SwitchingStrategy { times }
    };
    let a2 = join(Player::A, a, b);
    let b2 = join(Player::B, b, a);
    (a2, b2, added)
}

/// Gauss-Seidel best responses on realised switch sets until the pair repeats.
/// Returns the certified outcome and the last value surfaces of A and B.
pub fn best_response_iteration(
    game: &Game,
    cfg: &SolverConfig,
) -> Result<(GameOutcome, [RegimeValueSurface; 2])> {
    let np = game.bundle.n_paths();
    let mut a = SwitchingStrategy::never(np);
    let mut b = SwitchingStrategy::never(np);
    let mut history: Vec<(SwitchingStrategy, SwitchingStrategy)> = vec![(a.clone(), b.clone())];
    let mut last_j: Option<[f64; 2]> = None;
    let mut converged = false;
    let mut cycle = None;
    let mut notes = Vec::new();
    let mut surfaces = None;
    let mut iterations = 0;

    for it in 1..=cfg.br_max_iters {
        iterations = it;
        let da = response_field(game, Player::A, &a, &b);
        let sa = backward_induction(game, Player::A, &b, da.as_deref(), cfg)?;
        let a_new = sa.realize(game, &b);
        let db = response_field(game, Player::B, &a_new, &b);
        let sb = backward_induction(game, Player::B, &a_new, db.as_deref(), cfg)?;
        let b_new = sb.realize(game, &a_new);
        surfaces = Some([sa, sb]);
        log::info!(
            "best response {it}: A {} switches, B {} switches",
            a_new.total_switches(),
            b_new.total_switches()
        );

        if a_new == a && b_new == b {
            converged = true;
            break;
        }
        if let Some(j) = history.iter().position(|(x, y)| *x == a_new && *y == b_new) {
            let trace = history[j..].iter().map(|(x, y)| (x.total_switches(), y.total_switches())).collect();
            cycle = Some(CycleReport { kind: "war-type cycle".into(), period: history.len() - j, trace });
            a = a_new;
            b = b_new;
            break;
        }
        history.push((a_new.clone(), b_new.clone()));
        a = a_new;
        b = b_new;

        if cfg.br_tol > 0.0 {
            let [ja, jb] = game.evaluate(&a, &b)?;
            if let Some([pa, pb]) = last_j {
                if (ja.mean - pa).abs() <= cfg.br_tol && (jb.mean - pb).abs() <= cfg.br_tol {
                    converged = true;
                    notes.push(format!("value change below br_tol = {}", cfg.br_tol));
                    break;
                }
            }
            last_j = Some([ja.mean, jb.mean]);
        }
    }

    if converged {
        let (a2, b2, added) = canonical_joins(game, &a, &b, cfg.max_switches);
        if added > 0 {
            notes.push(format!("{added} payoff-neutral joins added to align switch times"));
            a = a2;
            b = b2;
        }
    }
    let mut outcome = certify_nep(game, &a, &b, scope(game, cfg), &cfg.certify)?;
    outcome.iterations = iterations;
    outcome.converged = converged;
    outcome.banal = detect_banal(&a, &b, cfg.banal_eps);
    if cycle.is_some() {
        notes.push("best responses cycle; no fixed point reached".into());
        outcome.certificate = Certificate::Inconclusive;
    } else if !converged {
        notes.push(format!("iteration cap {} reached", cfg.br_max_iters));
        outcome.certificate = Certificate::Inconclusive;
    }
    outcome.cycle = cycle;
    outcome.notes = notes;
    let surfaces = surfaces.ok_or_else(|| EngineError::Config("br_max_iters must be >= 1".into()))?;
    Ok((outcome, surfaces))
}

/// Parameter mismatches that break the symmetric reduction.
pub fn symmetry_diagnostics(a: &PlayerCostParams, b: &PlayerCostParams) -> Vec<String> {
    let mut out = Vec::new();
    for (who, p) in [(Player::A, a), (Player::B, b)] {
        if p.delta_mode != DeltaMode::Constant || p.delta != 0.0 {
            out.push(format!("costs.{who}.delta must be the constant 0 in symmetric mode"));
        }
        if let Some(msg) = p.hp3_violation(who) {
            out.push(msg);
        }
    }
    if a.c_to0 != b.c_to0 {
        out.push("costs.A.c_to0 and costs.B.c_to0 differ".into());
    }
    if a.c_to1 != b.c_to1 {
        out.push("costs.A.c_to1 and costs.B.c_to1 differ".into());
    }
    let post_a = a.funding.borrow_spread - a.funding.remuneration_basis;
    let recv_a = a.funding.opportunity_premium - a.funding.remuneration_basis;
    let post_b = b.funding.borrow_spread - b.funding.remuneration_basis;
    let recv_b = b.funding.opportunity_premium - b.funding.remuneration_basis;
    if post_a != recv_b || post_b != recv_a {
        out.push(format!(
            "funding not mirrored: A posts at {post_a} while B receives at {recv_b}; B posts at {post_b} while A receives at {recv_a}"
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricSolution {
    /// `V*` at time 0 in the initial regime.
    pub value: f64,
    /// Payoff of the optimal strategy against a passive opponent.
    pub estimate: Estimate,
    #[serde(skip)]
    pub strategy: SwitchingStrategy,
    pub total_switches: usize,
}

/// Single-agent optimal switching, valid as the common equilibrium value
/// when the two players' costs coincide.
pub fn solve_symmetric(game: &Game, cfg: &SolverConfig) -> Result<(SymmetricSolution, RegimeValueSurface)> {
    let diag = symmetry_diagnostics(&game.cost(Player::A).params, &game.cost(Player::B).params);
    if !diag.is_empty() {
        return Err(EngineError::Symmetry(diag));
    }
    let np = game.bundle.n_paths();
    let never = SwitchingStrategy::never(np);
    let surface = backward_induction(game, Player::A, &never, None, cfg)?;
    let strategy = surface.realize(game, &never);
    let estimate = game.evaluate_player(Player::A, &strategy, &never);
    let value = surface.value0(cfg.max_switches, game.z0);
    Ok((
        SymmetricSolution { value, estimate, total_switches: strategy.total_switches(), strategy },
        surface,
    ))
}
