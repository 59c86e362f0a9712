//! Strategies, joint regime paths, payoff functionals and equilibrium checks.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{DeltaMode, Player, RegimeCosts};
use crate::error::{EngineError, Result};
use crate::market::PathBundle;

/// Realised switching decisions: per path, the strictly increasing grid steps
/// at which the player elects to switch. Each election targets the regime
/// opposite to the one prevailing at that step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchingStrategy {
    pub times: Vec<Vec<usize>>,
}

impl SwitchingStrategy {
    pub fn never(n_paths: usize) -> Self {
        Self { times: vec![Vec::new(); n_paths] }
    }

    /// Same switch times on every path.
    pub fn uniform(n_paths: usize, times: &[usize]) -> Self {
        Self { times: vec![times.to_vec(); n_paths] }
    }

    /// Build from explicit `(step, target regime)` sequences. Targets must
    /// alternate starting from the regime opposite to `z0`.
    pub fn from_indicated(seqs: &[Vec<(usize, u8)>], z0: u8) -> Result<Self> {
        let mut times = Vec::with_capacity(seqs.len());
        for (p, seq) in seqs.iter().enumerate() {
            let mut prev = z0;
            for &(_, z) in seq {
                if z > 1 || z == prev {
                    return Err(EngineError::MalformedStrategy {
                        path: p,
                        reason: format!("indicator {z} does not alternate from {prev}"),
                    });
                }
                prev = z;
            }
            times.push(seq.iter().map(|s| s.0).collect());
        }
        let s = Self { times };
        s.check_times(usize::MAX)?;
        Ok(s)
    }

    pub fn n_paths(&self) -> usize {
        self.times.len()
    }

    pub fn switch_count(&self, p: usize) -> usize {
        self.times[p].len()
    }

    pub fn total_switches(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    /// Fraction of paths on which at least one switch is elected.
    pub fn active_fraction(&self) -> f64 {
        let n = self.n_paths().max(1) as f64;
        self.times.iter().filter(|t| !t.is_empty()).count() as f64 / n
    }

    fn check_times(&self, n_steps: usize) -> Result<()> {
        for (p, t) in self.times.iter().enumerate() {
            if t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(EngineError::MalformedStrategy {
                    path: p,
                    reason: "switch times are not strictly increasing".into(),
                });
            }
            if let Some(&last) = t.last() {
                if last > n_steps {
                    return Err(EngineError::MalformedStrategy {
                        path: p,
                        reason: format!("switch at step {last} beyond the grid"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, n_paths: usize, n_steps: usize, max_switches: usize) -> Result<()> {
        if self.n_paths() != n_paths {
            return Err(EngineError::Shape(format!(
                "strategy has {} paths, bundle has {n_paths}",
                self.n_paths()
            )));
        }
        self.check_times(n_steps)?;
        for (p, t) in self.times.iter().enumerate() {
            if t.len() > max_switches {
                return Err(EngineError::MalformedStrategy {
                    path: p,
                    reason: format!("{} switches exceed the budget {max_switches}", t.len()),
                });
            }
        }
        Ok(())
    }
}

/// Who triggered a regime change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mover {
    A,
    B,
    Both,
}

impl Mover {
    fn label(self) -> &'static str {
        match self {
            Mover::A => "A",
            Mover::B => "B",
            Mover::Both => "both",
        }
    }
}

/// Prevailing regime per path and grid point (after the decisions taken there).
#[derive(Debug, Clone, PartialEq)]
pub struct JointRegimePath {
    pub regime: Vec<Vec<u8>>,
    /// Regime changes as `(step, mover)`.
    pub changes: Vec<Vec<(usize, Mover)>>,
}

/// Regime sequence on one path. Elections at or after `stop` are ignored.
pub fn compose_path(n_steps: usize, stop: usize, z0: u8, ta: &[usize], tb: &[usize]) -> (Vec<u8>, Vec<(usize, Mover)>) {
    let mut regime = Vec::with_capacity(n_steps + 1);
    let mut changes = Vec::new();
    let (mut ia, mut ib) = (0, 0);
    let mut z = z0;
    for k in 0..=n_steps {
        let a = ia < ta.len() && ta[ia] == k;
        let b = ib < tb.len() && tb[ib] == k;
        ia += a as usize;
        ib += b as usize;
        if k < stop && (a || b) {
            z = 1 - z;
            let m = match (a, b) {
                (true, true) => Mover::Both,
                (true, false) => Mover::A,
                _ => Mover::B,
            };
            changes.push((k, m));
        }
        regime.push(z);
    }
    (regime, changes)
}

pub fn compose_regimes(
    a: &SwitchingStrategy,
    b: &SwitchingStrategy,
    bundle: &PathBundle,
    z0: u8,
) -> Result<JointRegimePath> {
    let n = bundle.n_steps();
    let np = bundle.n_paths();
    a.validate(np, n, usize::MAX)?;
    b.validate(np, n, usize::MAX)?;
    let (regime, changes) = (0..np)
        .map(|p| compose_path(n, bundle.stop_index(p), z0, &a.times[p], &b.times[p]))
        .unzip();
    Ok(JointRegimePath { regime, changes })
}

impl JointRegimePath {
    pub fn write_csv(&self, grid: &[f64], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["path", "step", "time", "regime", "mover"])?;
        for (p, zs) in self.regime.iter().enumerate() {
            for (k, z) in zs.iter().enumerate() {
                let mover = self.changes[p].iter().find(|c| c.0 == k).map_or("", |c| c.1.label());
                w.write_record(&[p.to_string(), k.to_string(), grid[k].to_string(), z.to_string(), mover.into()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    #[serde(skip)]
    pub per_path: Vec<f64>,
}

impl Estimate {
    pub fn from_samples(per_path: Vec<f64>) -> Self {
        let n = per_path.len();
        let mean = per_path.iter().sum::<f64>() / n.max(1) as f64;
        let std_err = if n > 1 {
            let var = per_path.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_err, per_path }
    }

    /// Paired difference `self - base` on common scenarios.
    pub fn paired_diff(&self, base: &Estimate) -> Estimate {
        Estimate::from_samples(self.per_path.iter().zip(&base.per_path).map(|(a, b)| a - b).collect())
    }
}

/// Both players' cost data on a shared bundle.
#[derive(Debug, Clone)]
pub struct Game<'a> {
    pub bundle: &'a PathBundle,
    pub costs: [&'a RegimeCosts; 2],
    pub z0: u8,
    /// Restrict A to even and B to odd decision steps.
    pub alternating: bool,
}

impl<'a> Game<'a> {
    pub fn new(bundle: &'a PathBundle, a: &'a RegimeCosts, b: &'a RegimeCosts, z0: u8) -> Result<Self> {
        if a.player != Player::A || b.player != Player::B {
            return Err(EngineError::Config("cost tables passed in the wrong player order".into()));
        }
        for c in [a, b] {
            if c.n_paths() != bundle.n_paths() || c.n_steps() != bundle.n_steps() {
                return Err(EngineError::Shape("cost tables do not match the bundle".into()));
            }
        }
        if z0 > 1 {
            return Err(EngineError::Config(format!("initial regime {z0} is not 0 or 1")));
        }
        Ok(Self { bundle, costs: [a, b], z0, alternating: false })
    }

    pub fn cost(&self, who: Player) -> &RegimeCosts {
        self.costs[who.index()]
    }

    /// Whether `who` may elect a switch at step `k`.
    pub fn can_decide(&self, who: Player, k: usize) -> bool {
        !self.alternating || k % 2 == who.index()
    }

    /// Discounted cost stream of one player along a regime path: entry `k < stop`
    /// holds running plus switching cost at `k`, entry `stop` the terminal cost.
    fn stream(&self, who: Player, p: usize, regime: &[u8], delta: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let c = self.cost(who);
        let stop = c.stop[p];
        let mut out = Vec::with_capacity(stop + 1);
        let mut prev = self.z0;
        for (k, &z) in regime.iter().enumerate().take(stop) {
            let mut v = c.running(p, k, z, delta(k));
            if z != prev {
                v += c.switching(k, z);
            }
            prev = z;
            out.push(v);
        }
        out.push(c.terminal(p, prev, delta(stop)));
        out
    }

    /// Realised cost-to-go of `who` in time-`k` money, `[k]` for `k <= stop`,
    /// using the constant threshold.
    pub fn cost_to_go(&self, who: Player, p: usize, regime: &[u8]) -> Vec<f64> {
        let c = self.cost(who);
        let d = c.params.delta;
        let s = self.stream(who, p, regime, &|_| d);
        let mut ctg = vec![0.0; s.len()];
        let mut acc = 0.0;
        for k in (0..s.len()).rev() {
            acc += s[k];
            ctg[k] = acc / c.deflator[k];
        }
        ctg
    }

    /// Threshold applied in `who`'s costs at each step of a path.
    pub fn delta_field(&self, who: Player, p: usize, regime: &[u8]) -> Vec<f64> {
        let c = self.cost(who);
        match c.params.delta_mode {
            DeltaMode::Constant => vec![c.params.delta; c.stop[p] + 1],
            DeltaMode::Response => {
                self.cost_to_go(who.other(), p, regime).into_iter().map(|v| v.max(0.0)).collect()
            }
        }
    }

    /// Both players' discounted payoffs on path `p`.
    pub fn path_payoffs(&self, p: usize, ta: &[usize], tb: &[usize]) -> [f64; 2] {
        let n = self.bundle.n_steps();
        let stop = self.costs[0].stop[p];
        let (regime, _) = compose_path(n, stop, self.z0, ta, tb);
        let mut out = [0.0; 2];
        for who in [Player::A, Player::B] {
            let d = self.delta_field(who, p, &regime);
            out[who.index()] = self.stream(who, p, &regime, &|k| d[k]).iter().sum();
        }
        out
    }

    /// Payoff of `who` on path `p` with its own and the opponent's switch times.
    pub fn path_payoff(&self, who: Player, p: usize, own: &[usize], opp: &[usize]) -> f64 {
        let n = self.bundle.n_steps();
        let stop = self.costs[0].stop[p];
        let (ta, tb) = match who {
            Player::A => (own, opp),
            Player::B => (opp, own),
        };
        let (regime, _) = compose_path(n, stop, self.z0, ta, tb);
        let d = self.delta_field(who, p, &regime);
        self.stream(who, p, &regime, &|k| d[k]).iter().sum()
    }

    /// `(running, switching, terminal)` parts of `who`'s payoff on path `p`.
    pub fn breakdown(&self, who: Player, p: usize, ta: &[usize], tb: &[usize]) -> [f64; 3] {
        let c = self.cost(who);
        let stop = c.stop[p];
        let (regime, _) = compose_path(self.bundle.n_steps(), stop, self.z0, ta, tb);
        let d = self.delta_field(who, p, &regime);
        let mut out = [0.0; 3];
        let mut prev = self.z0;
        for (k, &z) in regime.iter().enumerate().take(stop) {
            out[0] += c.running(p, k, z, d[k]);
            if z != prev {
                out[1] += c.switching(k, z);
            }
            prev = z;
        }
        out[2] = c.terminal(p, prev, d[stop]);
        out
    }

    pub fn evaluate(&self, a: &SwitchingStrategy, b: &SwitchingStrategy) -> Result<[Estimate; 2]> {
        let n = self.bundle.n_steps();
        let np = self.bundle.n_paths();
        a.validate(np, n, usize::MAX)?;
        b.validate(np, n, usize::MAX)?;
        let pp: Vec<[f64; 2]> =
            (0..np).into_par_iter().map(|p| self.path_payoffs(p, &a.times[p], &b.times[p])).collect();
        Ok([
            Estimate::from_samples(pp.iter().map(|v| v[0]).collect()),
            Estimate::from_samples(pp.iter().map(|v| v[1]).collect()),
        ])
    }

    /// Payoff of one player only.
    pub fn evaluate_player(&self, who: Player, own: &SwitchingStrategy, opp: &SwitchingStrategy) -> Estimate {
        let per: Vec<f64> = (0..self.bundle.n_paths())
            .into_par_iter()
            .map(|p| self.path_payoff(who, p, &own.times[p], &opp.times[p]))
            .collect();
        Estimate::from_samples(per)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Certified,
    Refuted,
    Inconclusive,
}

/// Deviation family settings for equilibrium certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// Random per-path mutation deviations per player.
    #[serde(default = "default_random")]
    pub random_deviations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_abs_tol() -> f64 {
    1e-10
}

fn default_random() -> usize {
    16
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { abs_tol: default_abs_tol(), random_deviations: default_random(), seed: 0 }
    }
}

/// Best deviation found for one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    /// `min over deviations of (J(deviation) - J(candidate))`; negative means an improvement.
    pub margin: f64,
    pub std_err: f64,
    pub deviations_tested: usize,
    pub exhaustive: bool,
    pub best_deviation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub total_switches: usize,
    pub mean_switches: f64,
    pub active_fraction: f64,
    pub max_switches: usize,
}

impl StrategySummary {
    pub fn of(s: &SwitchingStrategy) -> Self {
        Self {
            total_switches: s.total_switches(),
            mean_switches: s.total_switches() as f64 / s.n_paths().max(1) as f64,
            active_fraction: s.active_fraction(),
            max_switches: s.times.iter().map(Vec::len).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub j_a: Estimate,
    pub j_b: Estimate,
    pub strategy_a: StrategySummary,
    pub strategy_b: StrategySummary,
    pub margin_a: Margin,
    pub margin_b: Margin,
    pub certificate: Certificate,
    pub banal: bool,
    pub iterations: usize,
    pub converged: bool,
    /// Set when best-response iteration revisits an earlier strategy pair.
    pub cycle: Option<CycleReport>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub strategies: Option<(SwitchingStrategy, SwitchingStrategy)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub kind: String,
    pub period: usize,
    /// Total switches of (A, B) at each iterate in the cycle.
    pub trace: Vec<(usize, usize)>,
}

/// All subsets of `points` with at most `m` elements, in lexicographic order.
pub fn subsets_upto(points: &[usize], m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut cur = Vec::new();
    fn rec(points: &[usize], start: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            return;
        }
        for i in start..points.len() {
            cur.push(points[i]);
            out.push(cur.clone());
            rec(points, i + 1, m, cur, out);
            cur.pop();
        }
    }
    rec(points, 0, m, &mut cur, &mut out);
    out
}

/// Number of subsets of an `n`-set with at most `m` elements (saturating).
pub fn count_subsets(n: usize, m: usize) -> usize {
    let mut total: usize = 0;
    let mut binom: usize = 1;
    for s in 0..=m.min(n) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul(n - s) / (s + 1);
    }
    total
}

fn decision_points(game: &Game, who: Player, p: usize) -> Vec<usize> {
    (0..game.cost(who).stop[p]).filter(|&k| game.can_decide(who, k)).collect()
}

/// Exhaustive per-path deviation scan (exact conditioning). `None` if some
/// path exceeds `bound` strategies.
fn exhaustive_margin(
    game: &Game,
    who: Player,
    opp: &SwitchingStrategy,
    base: &Estimate,
    m: usize,
    bound: usize,
) -> Option<Margin> {
    let np = game.bundle.n_paths();
    if (0..np).any(|p| count_subsets(decision_points(game, who, p).len(), m) > bound) {
        return None;
    }
    let results: Vec<(f64, usize)> = (0..np)
        .into_par_iter()
        .map(|p| {
            let pts = decision_points(game, who, p);
            let subs = subsets_upto(&pts, m);
            let best = subs
                .iter()
                .map(|s| game.path_payoff(who, p, s, &opp.times[p]))
                .fold(f64::INFINITY, f64::min);
            (best - base.per_path[p], subs.len())
        })
        .collect();
    let margin = results.iter().map(|r| r.0).sum::<f64>() / np.max(1) as f64;
    Some(Margin {
        margin,
        std_err: 0.0,
        deviations_tested: results.iter().map(|r| r.1).sum(),
        exhaustive: true,
        best_deviation: "per-path optimum".into(),
    })
}

/// Uniform insert / delete / shift deviations plus random per-path mutations.
fn sampled_margin(
    game: &Game,
    who: Player,
    own: &SwitchingStrategy,
    opp: &SwitchingStrategy,
    base: &Estimate,
    m: usize,
    cfg: &CertifyConfig,
) -> Margin {
    let n = game.bundle.n_steps();
    let np = game.bundle.n_paths();
    let mut devs: Vec<(String, SwitchingStrategy)> = Vec::new();

    let edit = |f: &dyn Fn(usize, &[usize]) -> Option<Vec<usize>>| -> SwitchingStrategy {
        let times = (0..np)
            .map(|p| {
                let cur = &own.times[p];
                match f(p, cur) {
                    Some(t) if t.len() <= m && t.windows(2).all(|w| w[0] < w[1]) => t,
                    _ => cur.clone(),
                }
            })
            .collect();
        SwitchingStrategy { times }
    };

    devs.push(("never".into(), SwitchingStrategy::never(np)));
    for k in 0..n {
        if !game.can_decide(who, k) {
            continue;
        }
        let ins = edit(&|p, cur| {
            if k >= game.cost(who).stop[p] || cur.contains(&k) {
                return None;
            }
            let mut t = cur.to_vec();
            t.push(k);
            t.sort_unstable();
            Some(t)
        });
        devs.push((format!("insert@{k}"), ins));
    }
    for j in 0..m {
        devs.push((
            format!("delete#{j}"),
            edit(&|_, cur| {
                (j < cur.len()).then(|| {
                    let mut t = cur.to_vec();
                    t.remove(j);
                    t
                })
            }),
        ));
        for step in [-1i64, 1] {
            devs.push((
                format!("shift#{j}{step:+}"),
                edit(&|p, cur| {
                    let t0 = *cur.get(j)? as i64 + step;
                    if t0 < 0 || t0 as usize >= game.cost(who).stop[p] || !game.can_decide(who, t0 as usize) {
                        return None;
                    }
                    let mut t = cur.to_vec();
                    t[j] = t0 as usize;
                    Some(t)
                }),
            ));
        }
    }
    for r in 0..cfg.random_deviations {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1 + r as u64 + 1000 * who.index() as u64);
        let times = (0..np)
            .map(|p| {
                let pts = decision_points(game, who, p);
                let mut t = own.times[p].clone();
                match rng.gen_range(0..3) {
                    0 if !pts.is_empty() && t.len() < m => {
                        let k = pts[rng.gen_range(0..pts.len())];
                        if !t.contains(&k) {
                            t.push(k);
                            t.sort_unstable();
                        }
                    }
                    1 if !t.is_empty() => {
                        let j = rng.gen_range(0..t.len());
                        t.remove(j);
                    }
                    2 if !t.is_empty() && !pts.is_empty() => {
                        let j = rng.gen_range(0..t.len());
                        let k = pts[rng.gen_range(0..pts.len())];
                        if !t.contains(&k) {
                            t[j] = k;
                            t.sort_unstable();
                        }
                    }
                    _ => {}
                }
                t
            })
            .collect();
        devs.push((format!("random#{r}"), SwitchingStrategy { times }));
    }

    let mut best = Margin {
        margin: f64::INFINITY,
        std_err: 0.0,
        deviations_tested: devs.len(),
        exhaustive: false,
        best_deviation: String::new(),
    };
    for (name, d) in &devs {
        let diff = game.evaluate_player(who, d, opp).paired_diff(base);
        if diff.mean < best.margin {
            best.margin = diff.mean;
            best.std_err = diff.std_err;
            best.best_deviation = name.clone();
        }
    }
    best
}

/// Settings for [`certify_nep`] that depend on the solver configuration.
#[derive(Debug, Clone, Copy)]
pub struct CertifyScope {
    pub max_switches: usize,
    /// Use the exhaustive per-path scan when every path fits in `bound`.
    pub exhaustive: bool,
    pub bound: usize,
}

pub fn classify(margins: [&Margin; 2], abs_tol: f64) -> Certificate {
    if margins.iter().any(|m| m.margin < -(abs_tol + 3.0 * m.std_err)) {
        Certificate::Refuted
    } else if margins.iter().all(|m| m.margin >= -(abs_tol + 2.0 * m.std_err)) {
        Certificate::Certified
    } else {
        Certificate::Inconclusive
    }
}

/// Test a candidate pair against unilateral deviations of each player.
pub fn certify_nep(
    game: &Game,
    a: &SwitchingStrategy,
    b: &SwitchingStrategy,
    scope: CertifyScope,
    cfg: &CertifyConfig,
) -> Result<GameOutcome> {
    let [ja, jb] = game.evaluate(a, b)?;
    let margin_for = |who: Player, own: &SwitchingStrategy, opp: &SwitchingStrategy, base: &Estimate| {
        let ex = if scope.exhaustive {
            exhaustive_margin(game, who, opp, base, scope.max_switches, scope.bound)
        } else {
            None
        };
        ex.unwrap_or_else(|| sampled_margin(game, who, own, opp, base, scope.max_switches, cfg))
    };
    let margin_a = margin_for(Player::A, a, b, &ja);
    let margin_b = margin_for(Player::B, b, a, &jb);
    let certificate = classify([&margin_a, &margin_b], cfg.abs_tol);
    Ok(GameOutcome {
        j_a: ja,
        j_b: jb,
        strategy_a: StrategySummary::of(a),
        strategy_b: StrategySummary::of(b),
        margin_a,
        margin_b,
        certificate,
        banal: detect_banal(a, b, 0.0),
        iterations: 0,
        converged: true,
        cycle: None,
        notes: Vec::new(),
        strategies: Some((a.clone(), b.clone())),
    })
}

/// True when neither player switches on at least a `1 - eps` fraction of paths.
pub fn detect_banal(a: &SwitchingStrategy, b: &SwitchingStrategy, eps: f64) -> bool {
    let n = a.n_paths().max(1);
    let quiet = a.times.iter().zip(&b.times).filter(|(x, y)| x.is_empty() && y.is_empty()).count();
    quiet as f64 >= (1.0 - eps) * n as f64 - 1e-12
}

/// Realised switch times as CSV rows `player,path,step,time`.
pub fn write_policy_csv(a: &SwitchingStrategy, b: &SwitchingStrategy, grid: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["player", "path", "step", "time"])?;
    for (who, s) in [("A", a), ("B", b)] {
        for (p, ts) in s.times.iter().enumerate() {
            for &k in ts {
                w.write_record(&[who.to_string(), p.to_string(), k.to_string(), grid[k].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_table() {
        let (z, ch) = compose_path(5, 5, 1, &[], &[]);
        assert_eq!(z, vec![1; 6]);
        assert!(ch.is_empty());
        let (z, _) = compose_path(5, 5, 1, &[3], &[]);
        assert_eq!(z, vec![1, 1, 1, 0, 0, 0]);
        let (z, ch) = compose_path(5, 5, 1, &[3], &[3]);
        assert_eq!(z, vec![1, 1, 1, 0, 0, 0]);
        assert_eq!(ch, vec![(3, Mover::Both)]);
        // frozen after the stop index
        let (z, _) = compose_path(5, 2, 1, &[1, 3], &[]);
        assert_eq!(z, vec![1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn composition_is_symmetric() {
        let (za, _) = compose_path(6, 6, 1, &[0, 4], &[2]);
        let (zb, _) = compose_path(6, 6, 1, &[2], &[0, 4]);
        assert_eq!(za, zb);
    }

    #[test]
    fn indicated_sequences_must_alternate() {
        assert!(SwitchingStrategy::from_indicated(&[vec![(1, 0), (3, 1)]], 1).is_ok());
        assert!(matches!(
            SwitchingStrategy::from_indicated(&[vec![(1, 0), (3, 0)]], 1),
            Err(EngineError::MalformedStrategy { .. })
        ));
        assert!(SwitchingStrategy::from_indicated(&[vec![(3, 0), (1, 1)]], 1).is_err());
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets_upto(&[0, 1, 2], 2).len(), 7);
        assert_eq!(count_subsets(3, 2), 7);
        assert_eq!(count_subsets(50, 2), 1 + 50 + 1225);
        assert_eq!(subsets_upto(&[5], 3), vec![vec![], vec![5]]);
    }

    #[test]
    fn banal_flag() {
        let never = SwitchingStrategy::never(4);
        let once = SwitchingStrategy { times: vec![vec![1], vec![], vec![], vec![]] };
        assert!(detect_banal(&never, &never, 0.0));
        assert!(!detect_banal(&once, &never, 0.0));
        assert!(detect_banal(&once, &never, 0.25));
    }
}
