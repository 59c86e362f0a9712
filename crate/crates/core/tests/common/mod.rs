#![allow(dead_code)]

use csa_game::config::RunConfig;
use csa_game::costs::CostCurve;
use csa_game::regression::Conditioning;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SYMMETRIC: &str = include_str!("../data/symmetric.toml");

pub fn symmetric_config() -> RunConfig {
    RunConfig::from_toml_str(SYMMETRIC).expect("bundled config parses")
}

/// Randomised tiny exact-conditioning instance: at most 4 steps, 6 paths, M <= 2.
pub fn tiny_instance(seed: u64, symmetric: bool) -> RunConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = symmetric_config();
    c.scenario = format!("tiny-{seed}");
    c.model.seed = seed;
    c.model.n_steps = rng.gen_range(1..=4);
    c.model.n_paths = rng.gen_range(1..=6);
    c.model.maturity = rng.gen_range(0.5..2.0);
    c.model.lambda_a0 = rng.gen_range(0.05..1.5);
    c.model.lambda_b0 = rng.gen_range(0.05..1.5);
    c.model.sigma = csa_game::market::Coefficient::Constant(rng.gen_range(0.1..0.6));
    c.model.r = csa_game::market::ShortRate::Constant(rng.gen_range(0.0..0.05));
    c.claim.payoff = csa_game::valuation::Payoff::Forward { strike: rng.gen_range(0.8..1.2), notional: 1.0 };
    c.claim.recovery_a = rng.gen_range(0.0..0.8);
    c.claim.recovery_b = rng.gen_range(0.0..0.8);
    c.solver.max_switches = rng.gen_range(1..=2);
    c.solver.conditioning = Conditioning::Exact;
    let cost = rng.gen_range(0.0005..0.03);
    c.costs.a.c_to0 = CostCurve::Constant(cost);
    c.costs.a.c_to1 = CostCurve::Constant(cost);
    c.costs.b.c_to0 = CostCurve::Constant(cost);
    c.costs.b.c_to1 = CostCurve::Constant(cost);
    if !symmetric {
        c.costs.b.c_to0 = CostCurve::Constant(rng.gen_range(0.0005..0.03));
        c.costs.a.delta = rng.gen_range(0.0..0.3);
        c.costs.b.delta = rng.gen_range(0.0..0.3);
        c.costs.a.funding.borrow_spread = rng.gen_range(0.0..0.05);
        c.costs.b.funding.opportunity_premium = rng.gen_range(0.0..0.05);
    }
    c
}
