//! Joint simulation of the price factor, the two default intensities, the
//! savings account and Cox-construction default times.
//!
//! Dynamics (Euler-Maruyama on a uniform grid, intensities floored at zero):
//!
//! ```text
//! dX   = mu(t,X)    X   dt + sigma(t,X) X   dW^x
//! dl^A = gamma(t,l) l^A dt + nu(t,l)    l^A dW^A
//! dl^B = chi(t,l)   l^B dt + eta(t,l)   l^B dW^B
//! ```
//!
//! Default of counterparty `i` is the first time the cumulative intensity
//! crosses an independent unit exponential draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

/// A drift or volatility coefficient, constant or affine in the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    /// `a + b * x`
    Affine { a: f64, b: f64 },
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant(v) => v,
            Coefficient::Affine { a, b } => a + b * x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Coefficient::Constant(v) => v == 0.0,
            Coefficient::Affine { a, b } => a == 0.0 && b == 0.0,
        }
    }

    /// The constant value, if the coefficient does not depend on the state.
    pub fn as_constant(&self) -> Option<f64> {
        match *self {
            Coefficient::Constant(v) => Some(v),
            Coefficient::Affine { a, b } if b == 0.0 => Some(a),
            Coefficient::Affine { .. } => None,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Coefficient::Constant(v) => v.is_finite(),
            Coefficient::Affine { a, b } => a.is_finite() && b.is_finite(),
        }
    }
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant(0.0)
    }
}

/// Deterministic short rate: a constant, or a curve linearly interpolated
/// between knots (flat outside them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShortRate {
    Constant(f64),
    Curve { times: Vec<f64>, rates: Vec<f64> },
}

impl Default for ShortRate {
    fn default() -> Self {
        ShortRate::Constant(0.0)
    }
}

impl ShortRate {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ShortRate::Constant(r) => *r,
            ShortRate::Curve { times, rates } => {
                if t <= times[0] {
                    return rates[0];
                }
                let last = times.len() - 1;
                if t >= times[last] {
                    return rates[last];
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                rates[i] + w * (rates[i + 1] - rates[i])
            }
        }
    }

    fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ShortRate::Constant(r) if !r.is_finite() => out.push("model.r must be finite".into()),
            ShortRate::Constant(_) => {}
            ShortRate::Curve { times, rates } => {
                if times.is_empty() || times.len() != rates.len() {
                    out.push("model.r curve needs equally many (>=1) times and rates".into());
                } else if times.windows(2).any(|w| w[1] <= w[0]) {
                    out.push("model.r curve times must be strictly increasing".into());
                }
                if rates.iter().chain(times.iter()).any(|v| !v.is_finite()) {
                    out.push("model.r curve contains non-finite values".into());
                }
            }
        }
        out
    }
}

/// Parameters of the joint market/default model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub x0: f64,
    pub lambda_a0: f64,
    pub lambda_b0: f64,
    #[serde(default)]
    pub mu: Coefficient,
    #[serde(default)]
    pub sigma: Coefficient,
    #[serde(default)]
    pub gamma: Coefficient,
    #[serde(default)]
    pub nu: Coefficient,
    #[serde(default)]
    pub chi: Coefficient,
    #[serde(default)]
    pub eta: Coefficient,
    #[serde(default)]
    pub rho_x_la: f64,
    #[serde(default)]
    pub rho_x_lb: f64,
    #[serde(default)]
    pub rho_la_lb: f64,
    #[serde(default)]
    pub r: ShortRate,
    pub maturity: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ModelParams {
    pub fn correlation(&self) -> [[f64; 3]; 3] {
        [
            [1.0, self.rho_x_la, self.rho_x_lb],
            [self.rho_x_la, 1.0, self.rho_la_lb],
            [self.rho_x_lb, self.rho_la_lb, 1.0],
        ]
    }

    /// All invariant violations, not only the first.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.x0.is_finite() {
            out.push("model.x0 must be finite".into());
        }
        if !(self.lambda_a0 >= 0.0 && self.lambda_a0.is_finite()) {
            out.push("model.lambda_a0 must be finite and >= 0".into());
        }
        if !(self.lambda_b0 >= 0.0 && self.lambda_b0.is_finite()) {
            out.push("model.lambda_b0 must be finite and >= 0".into());
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            out.push("model.maturity must be > 0".into());
        }
        if self.n_steps < 1 {
            out.push("model.n_steps must be >= 1".into());
        }
        if self.n_paths < 1 {
            out.push("model.n_paths must be >= 1".into());
        }
        for (name, c) in [
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("nu", self.nu),
            ("chi", self.chi),
            ("eta", self.eta),
        ] {
            if !c.is_finite() {
                out.push(format!("model.{name} must be finite"));
            }
        }
        for (name, rho) in [
            ("rho_x_la", self.rho_x_la),
            ("rho_x_lb", self.rho_x_lb),
            ("rho_la_lb", self.rho_la_lb),
        ] {
            if !(-1.0..=1.0).contains(&rho) {
                out.push(format!("model.{name} = {rho} is outside [-1, 1]"));
            }
        }
        if let Err(EngineError::NotPsd { pivot }) = pivoted_cholesky(&self.correlation()) {
            out.push(format!(
                "model correlation matrix [[1, {}, {}], [{}, 1, {}], [{}, {}, 1]] is not positive semi-definite (pivot {pivot:.3e})",
                self.rho_x_la, self.rho_x_lb, self.rho_x_la, self.rho_la_lb, self.rho_x_lb, self.rho_la_lb
            ));
        }
        out.extend(self.r.validate());
        out
    }

    pub fn validate(&self) -> Result<()> {
        pivoted_cholesky(&self.correlation())?;
        let diags = self.diagnostics();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(EngineError::Config(diags.join("; ")))
        }
    }
}

/// Lower-triangular factor `L` with `L L^T = C` for a PSD matrix, using
/// diagonal pivoting so rank-deficient inputs are accepted.
pub fn pivoted_cholesky(c: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    const TOL: f64 = 1e-12;
    let mut a = *c;
    let mut perm = [0usize, 1, 2];
    let mut l = [[0.0; 3]; 3];
    for k in 0..3 {
        // pick the largest remaining diagonal
        let mut piv = k;
        for i in k + 1..3 {
            if a[i][i] > a[piv][piv] {
                piv = i;
            }
        }
        if piv != k {
            a.swap(k, piv);
            for row in a.iter_mut() {
                row.swap(k, piv);
            }
            l.swap(k, piv);
            perm.swap(k, piv);
        }
        let d = a[k][k];
        if d < -TOL {
            return Err(EngineError::NotPsd { pivot: d });
        }
        if d <= TOL {
            // the remaining Schur complement must vanish
            for i in k..3 {
                for j in k..3 {
                    if a[i][j].abs() > 1e-9 {
                        return Err(EngineError::NotPsd { pivot: d.min(-a[i][j].abs()) });
                    }
                }
            }
            break;
        }
        let s = d.sqrt();
        l[k][k] = s;
        for i in k + 1..3 {
            l[i][k] = a[i][k] / s;
        }
        for i in k + 1..3 {
            for j in k + 1..3 {
                a[i][j] -= l[i][k] * l[j][k];
            }
        }
    }
    // undo the permutation: rows of L follow the original variable order
    let mut out = [[0.0; 3]; 3];
    for (k, &p) in perm.iter().enumerate() {
        out[p] = l[k];
    }
    Ok(out)
}

/// Simulated scenarios on a fixed grid. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub lam_a: Vec<Vec<f64>>,
    pub lam_b: Vec<Vec<f64>>,
    /// Savings account `B_t` per grid point.
    pub bank: Vec<f64>,
    /// Default times; `f64::INFINITY` when beyond maturity.
    pub tau_a: Vec<f64>,
    pub tau_b: Vec<f64>,
    pub tau: Vec<f64>,
}

impl PathBundle {
    /// Assemble a bundle from externally supplied paths.
    pub fn from_parts(
        grid: Vec<f64>,
        x: Vec<Vec<f64>>,
        lam_a: Vec<Vec<f64>>,
        lam_b: Vec<Vec<f64>>,
        bank: Vec<f64>,
        tau_a: Vec<f64>,
        tau_b: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        let p = x.len();
        if n < 2 {
            return Err(EngineError::Shape("grid needs at least two points".into()));
        }
        if grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::Shape("grid must start at 0 and increase".into()));
        }
        if bank.len() != n
            || lam_a.len() != p
            || lam_b.len() != p
            || tau_a.len() != p
            || tau_b.len() != p
            || x.iter().chain(lam_a.iter()).chain(lam_b.iter()).any(|r| r.len() != n)
        {
            return Err(EngineError::Shape("path arrays disagree with grid / path count".into()));
        }
        let maturity = grid[n - 1];
        let clip = |t: f64| if t > maturity { f64::INFINITY } else { t };
        let tau_a: Vec<f64> = tau_a.into_iter().map(clip).collect();
        let tau_b: Vec<f64> = tau_b.into_iter().map(clip).collect();
        let tau = tau_a.iter().zip(&tau_b).map(|(a, b)| a.min(*b)).collect();
        Ok(Self { grid, x, lam_a, lam_b, bank, tau_a, tau_b, tau })
    }

    pub fn n_paths(&self) -> usize {
        self.x.len()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn maturity(&self) -> f64 {
        self.grid[self.n_steps()]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.grid[k + 1] - self.grid[k]
    }

    /// First-default indicator `H_t = 1{tau <= t}` at grid point `k`.
    pub fn defaulted(&self, path: usize, k: usize) -> bool {
        self.grid[k] >= self.tau[path]
    }

    /// Index of the first grid point at or after `tau ∧ T`. Costs accrue on
    /// intervals before it; terminal data is read there.
    pub fn stop_index(&self, path: usize) -> usize {
        let tau = self.tau[path];
        if tau.is_infinite() {
            return self.n_steps();
        }
        self.grid.partition_point(|&t| t < tau).min(self.n_steps())
    }

    /// Largest grid index strictly before `tau` (grid proxy of `tau-`).
    pub fn pre_default_index(&self, path: usize) -> usize {
        let tau = self.tau[path];
        if tau.is_infinite() {
            return self.n_steps();
        }
        self.grid.partition_point(|&t| t < tau).saturating_sub(1)
    }

    /// `B_t / B_s` for grid indices `t <= s`.
    pub fn discount(&self, t_index: usize, s_index: usize) -> Result<f64> {
        let n = self.grid.len();
        if t_index > s_index || s_index >= n {
            return Err(EngineError::Index(format!(
                "discount({t_index}, {s_index}) on a grid of {n} points"
            )));
        }
        Ok(self.bank[t_index] / self.bank[s_index])
    }

    /// `1 / B_t`, the time-0 discount factor at grid point `k`.
    pub fn deflator(&self, k: usize) -> f64 {
        1.0 / self.bank[k]
    }

    /// Savings account at an arbitrary time in `[0, T]`, log-linear between grid points.
    pub fn bank_at(&self, t: f64) -> f64 {
        let n = self.n_steps();
        if t <= 0.0 {
            return self.bank[0];
        }
        if t >= self.grid[n] {
            return self.bank[n];
        }
        let i = self.grid.partition_point(|&s| s <= t) - 1;
        let w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        (self.bank[i].ln() * (1.0 - w) + self.bank[i + 1].ln() * w).exp()
    }
}

fn bank_account(grid: &[f64], r: &ShortRate) -> Vec<f64> {
    let mut bank = Vec::with_capacity(grid.len());
    bank.push(1.0);
    let mut integral = 0.0;
    for w in grid.windows(2) {
        integral += 0.5 * (r.at(w[0]) + r.at(w[1])) * (w[1] - w[0]);
        bank.push(integral.exp());
    }
    bank
}

/// First crossing of `threshold` by the piecewise-linear cumulative intensity.
fn cox_time(grid: &[f64], cumulative: &[f64], threshold: f64) -> f64 {
    for k in 1..grid.len() {
        if cumulative[k] >= threshold {
            let lo = cumulative[k - 1];
            let w = if cumulative[k] > lo { (threshold - lo) / (cumulative[k] - lo) } else { 1.0 };
            return grid[k - 1] + w.clamp(0.0, 1.0) * (grid[k] - grid[k - 1]);
        }
    }
    f64::INFINITY
}

struct SimulatedPath {
    x: Vec<f64>,
    lam_a: Vec<f64>,
    lam_b: Vec<f64>,
    tau_a: f64,
    tau_b: f64,
}

fn simulate_one(
    params: &ModelParams,
    grid: &[f64],
    chol: &[[f64; 3]; 3],
    path: usize,
) -> Result<SimulatedPath> {
    let n = params.n_steps;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(path as u64);

    let mut x = Vec::with_capacity(n + 1);
    let mut la = Vec::with_capacity(n + 1);
    let mut lb = Vec::with_capacity(n + 1);
    x.push(params.x0);
    la.push(params.lambda_a0);
    lb.push(params.lambda_b0);

    for k in 0..n {
        let dt = grid[k + 1] - grid[k];
        let sq = dt.sqrt();
        let e: [f64; 3] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        let mut z = [0.0; 3];
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = chol[i][0] * e[0] + chol[i][1] * e[1] + chol[i][2] * e[2];
        }
        let (xk, ak, bk) = (x[k], la[k], lb[k]);
        let xn = xk + params.mu.eval(xk) * xk * dt + params.sigma.eval(xk) * xk * sq * z[0];
        let an = ak + params.gamma.eval(ak) * ak * dt + params.nu.eval(ak) * ak * sq * z[1];
        let bn = bk + params.chi.eval(bk) * bk * dt + params.eta.eval(bk) * bk * sq * z[2];
        if !(xn.is_finite() && an.is_finite() && bn.is_finite()) {
            return Err(EngineError::NonFinite { path, step: k + 1 });
        }
        x.push(xn);
        la.push(an.max(0.0));
        lb.push(bn.max(0.0));
    }

    let cumulate = |lam: &[f64]| {
        let mut c = Vec::with_capacity(n + 1);
        c.push(0.0);
        for k in 0..n {
            let prev = c[k];
            c.push(prev + 0.5 * (lam[k] + lam[k + 1]) * (grid[k + 1] - grid[k]));
        }
        c
    };
    let ea: f64 = Exp1.sample(&mut rng);
    let eb: f64 = Exp1.sample(&mut rng);
    let tau_a = cox_time(grid, &cumulate(&la), ea);
    let tau_b = cox_time(grid, &cumulate(&lb), eb);
    Ok(SimulatedPath { x, lam_a: la, lam_b: lb, tau_a, tau_b })
}

/// Simulate the joint model. Each path draws from its own ChaCha stream
/// keyed by `(seed, path index)`, so output is independent of thread count.
pub fn simulate_paths(params: &ModelParams) -> Result<PathBundle> {
    let chol = pivoted_cholesky(&params.correlation())?;
    params.validate()?;
    let n = params.n_steps;
    let grid: Vec<f64> = (0..=n).map(|k| params.maturity * k as f64 / n as f64).collect();
    let bank = bank_account(&grid, &params.r);

    let paths: Vec<SimulatedPath> = (0..params.n_paths)
        .into_par_iter()
        .map(|p| simulate_one(params, &grid, &chol, p))
        .collect::<Result<_>>()?;

    let mut x = Vec::with_capacity(paths.len());
    let mut lam_a = Vec::with_capacity(paths.len());
    let mut lam_b = Vec::with_capacity(paths.len());
    let mut tau_a = Vec::with_capacity(paths.len());
    let mut tau_b = Vec::with_capacity(paths.len());
    for p in paths {
        x.push(p.x);
        lam_a.push(p.lam_a);
        lam_b.push(p.lam_b);
        tau_a.push(p.tau_a);
        tau_b.push(p.tau_b);
    }
    PathBundle::from_parts(grid, x, lam_a, lam_b, bank, tau_a, tau_b)
}
