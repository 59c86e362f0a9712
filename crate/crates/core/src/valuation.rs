//! Clean and risky prices, CVA/DVA, collateral and the contingent overlay.
//!
//! Every surface is expressed from B's side of the trade. The A-side view is
//! the pointwise negation (see [`ExposureSurface::mirrored`]).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::market::PathBundle;
use crate::regression::{Conditioner, Conditioning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// Pays `notional * (X_T - strike)` at maturity.
    Forward { strike: f64, notional: f64 },
    /// Pays `notional * (X_d - strike)` at each payment step `d`.
    Swap { strike: f64, notional: f64, payment_steps: Vec<usize> },
    /// Only the explicit dividend schedule.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSpec {
    pub payoff: Payoff,
    /// Extra promised dividends as `(grid step, amount)`.
    #[serde(default)]
    pub dividends: Vec<(usize, f64)>,
    pub recovery_a: f64,
    pub recovery_b: f64,
    #[serde(default)]
    pub pricing: PricingMethod,
}

/// How the clean price is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PricingMethod {
    /// Closed form when the drift is constant, otherwise the engine conditioning.
    #[default]
    Auto,
    ClosedForm,
    Regression,
    Exact,
}

impl ClaimSpec {
    pub fn diagnostics(&self, n_steps: usize) -> Vec<String> {
        let mut out = Vec::new();
        for (name, r) in [("recovery_a", self.recovery_a), ("recovery_b", self.recovery_b)] {
            if !(0.0..=1.0).contains(&r) {
                out.push(format!("claim.{name} = {r} is outside [0, 1]"));
            }
        }
        for &(d, a) in &self.dividends {
            if d > n_steps {
                out.push(format!("dividend step {d} is beyond the last grid step {n_steps}"));
            }
            if !a.is_finite() {
                out.push(format!("dividend at step {d} is not finite"));
            }
        }
        if let Payoff::Swap { payment_steps, .. } = &self.payoff {
            for &d in payment_steps {
                if d == 0 || d > n_steps {
                    out.push(format!("swap payment step {d} must lie in 1..={n_steps}"));
                }
            }
        }
        out
    }

    /// Cash flow paid at grid step `k` on `path` (the terminal payoff is folded into step n).
    pub fn cash_flow(&self, bundle: &PathBundle, path: usize, k: usize) -> f64 {
        let n = bundle.n_steps();
        let x = bundle.x[path][k];
        let mut cf: f64 = self.dividends.iter().filter(|d| d.0 == k).map(|d| d.1).sum();
        match &self.payoff {
            Payoff::Forward { strike, notional } if k == n => cf += notional * (x - strike),
            Payoff::Swap { strike, notional, payment_steps } => {
                let hits = payment_steps.iter().filter(|&&d| d == k).count();
                cf += hits as f64 * notional * (x - strike);
            }
            _ => {}
        }
        cf
    }

    /// `sum_{d>k} B_k/B_d E[cf_d | x_k]` for Euler dynamics with constant drift `mu`.
    fn closed_form(&self, bundle: &PathBundle, path: usize, k: usize, mu: f64) -> f64 {
        let n = bundle.n_steps();
        let xk = bundle.x[path][k];
        let mut growth = 1.0;
        let mut v = 0.0;
        for d in (k + 1)..=n {
            growth *= 1.0 + mu * bundle.dt(d - 1);
            let df = bundle.bank[k] / bundle.bank[d];
            let fwd = xk * growth;
            let mut cf: f64 = self.dividends.iter().filter(|e| e.0 == d).map(|e| e.1).sum();
            match &self.payoff {
                Payoff::Forward { strike, notional } if d == n => cf += notional * (fwd - strike),
                Payoff::Swap { strike, notional, payment_steps } => {
                    let hits = payment_steps.iter().filter(|&&s| s == d).count();
                    cf += hits as f64 * notional * (fwd - strike);
                }
                _ => {}
            }
            v += df * cf;
        }
        v
    }
}

/// Collateral regime of the CSA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CollateralMode {
    Zero,
    #[default]
    Perfect,
    Thresholded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollateralSpec {
    #[serde(default)]
    pub gamma_a: f64,
    #[serde(default)]
    pub gamma_b: f64,
    #[serde(default)]
    pub mta: f64,
    #[serde(default)]
    pub mode: CollateralMode,
}

impl Default for CollateralSpec {
    fn default() -> Self {
        Self { gamma_a: 0.0, gamma_b: 0.0, mta: 0.0, mode: CollateralMode::Perfect }
    }
}

impl CollateralSpec {
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.mta >= 0.0) {
            out.push(format!("collateral.mta = {} must be >= 0", self.mta));
        }
        if !(self.gamma_a <= 0.0) {
            out.push(format!("collateral.gamma_a = {} must be <= 0", self.gamma_a));
        }
        if !(self.gamma_b >= 0.0) {
            out.push(format!("collateral.gamma_b = {} must be >= 0", self.gamma_b));
        }
        out
    }

    /// Thresholded posting for a clean value `s`.
    pub fn posted(&self, s: f64) -> f64 {
        match self.mode {
            CollateralMode::Zero => 0.0,
            CollateralMode::Perfect => s,
            CollateralMode::Thresholded => {
                if s > self.gamma_b + self.mta {
                    s - self.gamma_b
                } else if s < self.gamma_a - self.mta {
                    s - self.gamma_a
                } else {
                    0.0
                }
            }
        }
    }
}

/// Spreads driving the funding assets of one counterparty (rates per year).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FundingSpec {
    #[serde(default)]
    pub borrow_spread: f64,
    #[serde(default)]
    pub remuneration_basis: f64,
    #[serde(default)]
    pub opportunity_premium: f64,
}

impl FundingSpec {
    pub fn diagnostics(&self, who: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("borrow_spread", self.borrow_spread),
            ("remuneration_basis", self.remuneration_basis),
            ("opportunity_premium", self.opportunity_premium),
        ] {
            if !v.is_finite() {
                out.push(format!("{who}.funding.{name} is not finite"));
            }
        }
        if self.borrow_spread < 0.0 || self.opportunity_premium < 0.0 {
            log::warn!("{who}: negative borrow spread or opportunity premium");
        }
        out
    }
}

/// Inputs shared by the conditional-expectation steps.
#[derive(Debug, Clone, Copy)]
pub struct ValuationConfig {
    /// Already resolved: `Exact` or `Regression`.
    pub conditioning: Conditioning,
    pub degree: usize,
    /// Constant drift of `X`, when known, enabling the closed-form clean price.
    pub constant_drift: Option<f64>,
}

fn check_paths(n_paths: usize, basis: usize) -> Result<()> {
    let needed = 10 * basis;
    if n_paths < needed {
        return Err(EngineError::IllConditioned { needed, basis, paths: n_paths });
    }
    Ok(())
}

/// Default-free price `S_rf[path][k]` (ex-dividend, so `S_rf(T) = 0`) and the
/// method actually used. Values are not masked at default.
pub fn clean_price(
    bundle: &PathBundle,
    claim: &ClaimSpec,
    cfg: &ValuationConfig,
) -> Result<(Vec<Vec<f64>>, PricingMethod)> {
    let n = bundle.n_steps();
    let np = bundle.n_paths();
    let method = match (claim.pricing, cfg.constant_drift) {
        (PricingMethod::Auto, Some(_)) => PricingMethod::ClosedForm,
        (PricingMethod::Auto, None) => match cfg.conditioning {
            Conditioning::Exact => PricingMethod::Exact,
            _ => PricingMethod::Regression,
        },
        (PricingMethod::ClosedForm, None) => {
            return Err(EngineError::Config(
                "closed-form pricing needs a state-independent drift".into(),
            ))
        }
        (m, _) => m,
    };

    if method == PricingMethod::ClosedForm {
        let mu = cfg.constant_drift.unwrap_or(0.0);
        let s = (0..np)
            .into_par_iter()
            .map(|p| (0..=n).map(|k| claim.closed_form(bundle, p, k, mu)).collect())
            .collect();
        return Ok((s, method));
    }

    // realised discounted cash flows after k, seen from k
    let flows: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map(|p| {
            let mut tail = vec![0.0; n + 1];
            for k in (0..n).rev() {
                let df = bundle.bank[k] / bundle.bank[k + 1];
                tail[k] = df * (claim.cash_flow(bundle, p, k + 1) + tail[k + 1]);
            }
            tail
        })
        .collect();

    let mut s = vec![vec![0.0; n + 1]; np];
    if method == PricingMethod::Exact {
        return Ok((flows, method));
    }
    check_paths(np, cfg.degree + 1)?;
    for k in 0..n {
        let rows: Vec<Vec<f64>> = (0..np).map(|p| vec![bundle.x[p][k]]).collect();
        let y: Vec<f64> = flows.iter().map(|f| f[k]).collect();
        let (fit, _) = Conditioner::new(Conditioning::Regression, &rows, cfg.degree).expect(&y);
        for (p, v) in fit.into_iter().enumerate() {
            s[p][k] = v;
        }
    }
    Ok((s, method))
}

/// CVA, DVA and their difference, each `[path][k]`, zero from the default step on.
#[derive(Debug, Clone, PartialEq)]
pub struct Xva {
    pub cva: Vec<Vec<f64>>,
    pub dva: Vec<Vec<f64>>,
    pub bcva: Vec<Vec<f64>>,
}

pub fn state_row(bundle: &PathBundle, p: usize, k: usize) -> Vec<f64> {
    vec![bundle.x[p][k], bundle.lam_a[p][k], bundle.lam_b[p][k]]
}

/// Bilateral CVA from B's side. `s_rf` is the unmasked clean price.
pub fn bcva(
    bundle: &PathBundle,
    claim: &ClaimSpec,
    s_rf: &[Vec<f64>],
    cfg: &ValuationConfig,
) -> Result<Xva> {
    let n = bundle.n_steps();
    let np = bundle.n_paths();
    let basis = crate::regression::monomials(3, cfg.degree).len();
    if cfg.conditioning != Conditioning::Exact {
        check_paths(np, basis)?;
    }

    // loss at default, deflated to time 0
    let mut loss_c = vec![0.0; np];
    let mut loss_d = vec![0.0; np];
    for p in 0..np {
        let tau = bundle.tau[p];
        if tau.is_infinite() {
            continue;
        }
        let pre = s_rf[p][bundle.pre_default_index(p)];
        let defl = 1.0 / bundle.bank_at(tau);
        if bundle.tau_b[p] <= bundle.tau_a[p] {
            loss_c[p] = defl * (1.0 - claim.recovery_b) * (-pre).max(0.0);
        } else {
            loss_d[p] = defl * (1.0 - claim.recovery_a) * pre.max(0.0);
        }
    }

    let mut cva = vec![vec![0.0; n + 1]; np];
    let mut dva = vec![vec![0.0; n + 1]; np];
    for k in 0..n {
        let alive: Vec<usize> = (0..np).filter(|&p| !bundle.defaulted(p, k)).collect();
        if alive.is_empty() {
            // nothing left to condition on; only a regression has to fail here
            if cfg.conditioning == Conditioning::Exact {
                continue;
            }
            return Err(EngineError::NoSurvivors { step: k });
        }
        let rows: Vec<Vec<f64>> = alive.iter().map(|&p| state_row(bundle, p, k)).collect();
        let cond = Conditioner::new(cfg.conditioning, &rows, cfg.degree);
        let yc: Vec<f64> = alive.iter().map(|&p| loss_c[p]).collect();
        let yd: Vec<f64> = alive.iter().map(|&p| loss_d[p]).collect();
        let (fc, _) = cond.expect(&yc);
        let (fd, _) = cond.expect(&yd);
        let bk = bundle.bank[k];
        for (i, &p) in alive.iter().enumerate() {
            cva[p][k] = bk * fc[i];
            dva[p][k] = bk * fd[i];
        }
    }
    let bcva = cva
        .iter()
        .zip(&dva)
        .map(|(c, d)| c.iter().zip(d).map(|(a, b)| a - b).collect())
        .collect();
    Ok(Xva { cva, dva, bcva })
}

/// Collateral per `[path][k]`: thresholded rule before default, the same rule on
/// the last pre-default clean value at the default step, and zero afterwards.
pub fn collateral(bundle: &PathBundle, s_rf: &[Vec<f64>], spec: &CollateralSpec) -> Vec<Vec<f64>> {
    let n = bundle.n_steps();
    (0..bundle.n_paths())
        .map(|p| {
            let stop = bundle.stop_index(p);
            let defaults = bundle.tau[p].is_finite();
            (0..=n)
                .map(|k| {
                    if k < stop || (k == stop && !defaults) {
                        spec.posted(s_rf[p][k])
                    } else if k == stop {
                        spec.posted(s_rf[p][bundle.pre_default_index(p)])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// All exposure processes on the grid, masked to zero from the default step on
/// (collateral keeps its at-default value at the default step).
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSurface {
    pub time: Vec<f64>,
    pub s_rf: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub cva: Vec<Vec<f64>>,
    pub dva: Vec<Vec<f64>>,
    pub bcva: Vec<Vec<f64>>,
    /// Collateral under the configured CSA.
    pub coll: Vec<Vec<f64>>,
    /// Collateral under perfect collateralisation.
    pub coll_perfect: Vec<Vec<f64>>,
    /// Cum-dividend settlement at T, zero on paths that default by T.
    pub terminal_npv: Vec<f64>,
    pub pricing: PricingMethod,
}

pub fn exposure_surface(
    bundle: &PathBundle,
    claim: &ClaimSpec,
    coll_spec: &CollateralSpec,
    cfg: &ValuationConfig,
) -> Result<ExposureSurface> {
    let n = bundle.n_steps();
    let np = bundle.n_paths();
    let (raw, pricing) = clean_price(bundle, claim, cfg)?;
    let xva = bcva(bundle, claim, &raw, cfg)?;
    let coll = collateral(bundle, &raw, coll_spec);
    let perfect = CollateralSpec { mode: CollateralMode::Perfect, ..coll_spec.clone() };
    let coll_perfect = collateral(bundle, &raw, &perfect);

    let mask = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..np)
            .map(|p| {
                let stop = bundle.stop_index(p);
                let alive = |k: usize| k < stop || (k == n && bundle.tau[p].is_infinite());
                (0..=n).map(|k| if alive(k) { m[p][k] } else { 0.0 }).collect()
            })
            .collect()
    };
    let s_rf = mask(&raw);
    let cva = mask(&xva.cva);
    let dva = mask(&xva.dva);
    let bcva = mask(&xva.bcva);
    let s = s_rf
        .iter()
        .zip(&bcva)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let terminal_npv = (0..np)
        .map(|p| if bundle.tau[p].is_infinite() { claim.cash_flow(bundle, p, n) } else { 0.0 })
        .collect();
    Ok(ExposureSurface {
        time: bundle.grid.clone(),
        s_rf,
        s,
        cva,
        dva,
        bcva,
        coll,
        coll_perfect,
        terminal_npv,
        pricing,
    })
}

fn neg(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| -v).collect()).collect()
}

impl ExposureSurface {
    pub fn n_paths(&self) -> usize {
        self.s_rf.len()
    }

    /// The surface seen by the other counterparty: every amount changes sign,
    /// and CVA and DVA trade places.
    pub fn mirrored(&self) -> Self {
        Self {
            time: self.time.clone(),
            s_rf: neg(&self.s_rf),
            s: neg(&self.s),
            cva: self.dva.clone(),
            dva: self.cva.clone(),
            bcva: neg(&self.bcva),
            coll: neg(&self.coll),
            coll_perfect: neg(&self.coll_perfect),
            terminal_npv: self.terminal_npv.iter().map(|v| -v).collect(),
            pricing: self.pricing,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["path", "time", "s_rf", "s", "cva", "dva", "bcva", "coll"])?;
        for p in 0..self.n_paths() {
            for (k, t) in self.time.iter().enumerate() {
                w.write_record(&[
                    p.to_string(),
                    t.to_string(),
                    self.s_rf[p][k].to_string(),
                    self.s[p][k].to_string(),
                    self.cva[p][k].to_string(),
                    self.dva[p][k].to_string(),
                    self.bcva[p][k].to_string(),
                    self.coll[p][k].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Contingent processes for a regime path (`0` collateralised, `1` not).
#[derive(Debug, Clone, PartialEq)]
pub struct Contingent {
    pub s: Vec<Vec<f64>>,
    pub bcva: Vec<Vec<f64>>,
    pub coll: Vec<Vec<f64>>,
}

pub fn contingent_overlay(surface: &ExposureSurface, regimes: &[Vec<u8>]) -> Result<Contingent> {
    let np = surface.n_paths();
    let len = surface.time.len();
    if regimes.len() != np {
        return Err(EngineError::Shape(format!("{} regime paths for {np} scenarios", regimes.len())));
    }
    let mut out = Contingent {
        s: vec![vec![0.0; len]; np],
        bcva: vec![vec![0.0; len]; np],
        coll: vec![vec![0.0; len]; np],
    };
    for (p, z) in regimes.iter().enumerate() {
        if z.len() != len {
            return Err(EngineError::Shape(format!(
                "regime path {p} has {} points, grid has {len}",
                z.len()
            )));
        }
        for k in 0..len {
            match z[k] {
                0 => {
                    out.s[p][k] = surface.s_rf[p][k];
                    out.coll[p][k] = surface.coll_perfect[p][k];
                }
                1 => {
                    out.s[p][k] = surface.s[p][k];
                    out.bcva[p][k] = surface.bcva[p][k];
                }
                other => {
                    return Err(EngineError::Shape(format!(
                        "regime {other} at path {p}, step {k} is not 0 or 1"
                    )))
                }
            }
        }
    }
    Ok(out)
}
