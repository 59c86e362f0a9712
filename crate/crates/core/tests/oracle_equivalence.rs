mod common;

use csa_game::game::Certificate;
use csa_game::run::Prepared;
use csa_game::solver::{best_response_iteration, brute_force_oracle, solve_symmetric};

#[test]
fn symmetric_value_matches_enumeration() {
    for seed in 0..30 {
        let cfg = common::tiny_instance(seed, true);
        let prep = Prepared::new(&cfg).unwrap();
        let game = prep.game().unwrap();
        let oracle = brute_force_oracle(&prep.bundle, [&prep.costs[0], &prep.costs[1]], &cfg.solver).unwrap();
        let (sol, _) = solve_symmetric(&game, &cfg.solver).unwrap();
        assert!(
            (sol.value - oracle.single_agent_value).abs() <= 1e-12,
            "seed {seed}: {} vs {}",
            sol.value,
            oracle.single_agent_value
        );
        assert!((sol.estimate.mean - sol.value).abs() <= 1e-12, "seed {seed}");
    }
}

#[test]
fn certified_pairs_are_oracle_equilibria() {
    let mut certified = 0;
    for seed in 0..40 {
        let cfg = common::tiny_instance(100 + seed, seed % 2 == 0);
        let prep = Prepared::new(&cfg).unwrap();
        let game = prep.game().unwrap();
        let oracle = brute_force_oracle(&prep.bundle, [&prep.costs[0], &prep.costs[1]], &cfg.solver).unwrap();
        let (outcome, _) = best_response_iteration(&game, &cfg.solver).unwrap();
        let (a, b) = outcome.strategies.clone().unwrap();
        if outcome.certificate == Certificate::Certified {
            certified += 1;
            assert!(oracle.nep_exists, "seed {seed}: certified but oracle has no equilibrium");
            assert!(oracle.is_nep(&a, &b), "seed {seed}: certified pair not in oracle set");
            let [ja, jb] = oracle.payoffs(&a, &b).unwrap();
            assert!((ja - outcome.j_a.mean).abs() < 1e-12 && (jb - outcome.j_b.mean).abs() < 1e-12);
        }
        if !oracle.nep_exists {
            assert_ne!(outcome.certificate, Certificate::Certified, "seed {seed}");
        }
    }
    assert!(certified > 0);
}
