//! Exhaustive enumeration on tiny bundles, written independently of the
//! regime composition and payoff code it is used to check.

use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::costs::{running_cost, terminal_cost, DeltaMode, RegimeCosts};
use crate::error::{EngineError, Result};
use crate::game::SwitchingStrategy;
use crate::market::PathBundle;

/// Enumeration results on one path (the path is its own atom).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathOracle {
    pub strategies_a: Vec<Vec<usize>>,
    pub strategies_b: Vec<Vec<usize>>,
    /// `j[i][j]` for A's strategy `i` against B's strategy `j`.
    pub j_a: Vec<Vec<f64>>,
    pub j_b: Vec<Vec<f64>>,
    /// Pure equilibria as index pairs.
    pub nep: Vec<(usize, usize)>,
    /// `min_S J^A(S, never)`.
    pub single_agent_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub paths: Vec<PathOracle>,
    /// Mean over paths of the single-agent minimum.
    pub single_agent_value: f64,
    pub nep_exists: bool,
    pub nep_pairs_per_path: Vec<usize>,
    pub abs_tol: f64,
}

impl OracleResult {
    /// Whether `(a, b)` is an equilibrium of the game on the bundle: neither
    /// player can lower its mean payoff by more than `abs_tol`.
    pub fn is_nep(&self, a: &SwitchingStrategy, b: &SwitchingStrategy) -> bool {
        let np = self.paths.len();
        if a.times.len() != np || b.times.len() != np {
            return false;
        }
        let mut gap_a = 0.0;
        let mut gap_b = 0.0;
        for (p, o) in self.paths.iter().enumerate() {
            let Some(i) = o.strategies_a.iter().position(|s| *s == a.times[p]) else { return false };
            let Some(j) = o.strategies_b.iter().position(|s| *s == b.times[p]) else { return false };
            let best_a = o.j_a.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min);
            let best_b = o.j_b[i].iter().cloned().fold(f64::INFINITY, f64::min);
            gap_a += o.j_a[i][j] - best_a;
            gap_b += o.j_b[i][j] - best_b;
        }
        gap_a / np as f64 <= self.abs_tol && gap_b / np as f64 <= self.abs_tol
    }

    pub fn payoffs(&self, a: &SwitchingStrategy, b: &SwitchingStrategy) -> Option<[f64; 2]> {
        let mut out = [0.0; 2];
        for (p, o) in self.paths.iter().enumerate() {
            let i = o.strategies_a.iter().position(|s| *s == a.times[p])?;
            let j = o.strategies_b.iter().position(|s| *s == b.times[p])?;
            out[0] += o.j_a[i][j];
            out[1] += o.j_b[i][j];
        }
        let n = self.paths.len() as f64;
        Some([out[0] / n, out[1] / n])
    }
}

fn choose_upto(points: &[usize], m: usize) -> Vec<Vec<usize>> {
    // bitmask enumeration, then sort for a stable order
    let n = points.len();
    let mut out: Vec<Vec<usize>> = (0u64..(1u64 << n))
        .filter(|mask| mask.count_ones() as usize <= m)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| points[i]).collect())
        .collect();
    out.sort();
    out
}

fn payoff(c: &RegimeCosts, p: usize, z0: u8, sa: &[usize], sb: &[usize]) -> f64 {
    let stop = c.stop[p];
    let delta = c.params.delta;
    let mut z = z0;
    let mut total = 0.0;
    for k in 0..stop {
        if sa.contains(&k) || sb.contains(&k) {
            z = 1 - z;
            total += c.params.switch_cost(k, z) * c.deflator[k];
        }
        let f = running_cost(c.form, z, c.bcva[p][k], c.npv[p][k], c.r_factor[p][k], c.dt[k], delta);
        total += f * c.dt[k] * c.deflator[k];
    }
    total + terminal_cost(c.form, z, c.terminal_npv[p], delta) * c.deflator[stop]
}

/// Enumerate all admissible strategy pairs path by path.
pub fn brute_force_oracle(
    bundle: &PathBundle,
    costs: [&RegimeCosts; 2],
    cfg: &SolverConfig,
) -> Result<OracleResult> {
    let [ca, cb] = costs;
    if ca.params.delta_mode != DeltaMode::Constant || cb.params.delta_mode != DeltaMode::Constant {
        return Err(EngineError::Config("the oracle supports constant thresholds only".into()));
    }
    let m = cfg.max_switches;
    let z0 = cfg.initial_regime;
    let tol = cfg.certify.abs_tol;
    let mut paths = Vec::with_capacity(bundle.n_paths());
    for p in 0..bundle.n_paths() {
        let stop = bundle.stop_index(p);
        let pts = |parity: usize| -> Vec<usize> {
            (0..stop).filter(|k| !cfg.alternating || k % 2 == parity).collect()
        };
        let (pa, pb) = (pts(0), pts(1));
        if pa.len() > 40 || pb.len() > 40 {
            return Err(EngineError::BoundExceeded { path: p, count: usize::MAX, bound: cfg.exhaustive_bound });
        }
        let sa = choose_upto(&pa, m);
        let sb = choose_upto(&pb, m);
        let count = sa.len().saturating_mul(sb.len());
        if count > cfg.exhaustive_bound {
            return Err(EngineError::BoundExceeded { path: p, count, bound: cfg.exhaustive_bound });
        }
        let j_a: Vec<Vec<f64>> = sa.iter().map(|x| sb.iter().map(|y| payoff(ca, p, z0, x, y)).collect()).collect();
        let j_b: Vec<Vec<f64>> = sa.iter().map(|x| sb.iter().map(|y| payoff(cb, p, z0, x, y)).collect()).collect();
        let best_a: Vec<f64> =
            (0..sb.len()).map(|j| (0..sa.len()).map(|i| j_a[i][j]).fold(f64::INFINITY, f64::min)).collect();
        let best_b: Vec<f64> = j_b.iter().map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min)).collect();
        let mut nep = Vec::new();
        for i in 0..sa.len() {
            for j in 0..sb.len() {
                if j_a[i][j] <= best_a[j] + tol && j_b[i][j] <= best_b[i] + tol {
                    nep.push((i, j));
                }
            }
        }
        // index of the empty strategy is 0 after sorting
        let single_agent_min = (0..sa.len()).map(|i| j_a[i][0]).fold(f64::INFINITY, f64::min);
        paths.push(PathOracle { strategies_a: sa, strategies_b: sb, j_a, j_b, nep, single_agent_min });
    }
    let n = paths.len().max(1) as f64;
    let single_agent_value = paths.iter().map(|o| o.single_agent_min).sum::<f64>() / n;
    let nep_pairs_per_path: Vec<usize> = paths.iter().map(|o| o.nep.len()).collect();
    Ok(OracleResult {
        nep_exists: nep_pairs_per_path.iter().all(|&c| c > 0),
        nep_pairs_per_path,
        single_agent_value,
        paths,
        abs_tol: tol,
    })
}
