mod common;

use csa_game::costs::{CostCurve, Player};
use csa_game::game::SwitchingStrategy;
use csa_game::run::{budget_gap, Prepared};
use csa_game::solver::{backward_induction, solve_symmetric};
use csa_game::valuation::Payoff;

fn scale_costs(cfg: &mut csa_game::config::RunConfig, f: f64) {
    for p in [&mut cfg.costs.a, &mut cfg.costs.b] {
        for c in [&mut p.c_to0, &mut p.c_to1] {
            *c = match c {
                CostCurve::Constant(v) => CostCurve::Constant(*v * f),
                CostCurve::Grid(g) => CostCurve::Grid(g.iter().map(|v| v * f).collect()),
            };
        }
    }
}

#[test]
fn zero_costs_give_zero_value_and_no_switches() {
    for seed in 0..10 {
        let mut cfg = common::tiny_instance(seed, true);
        cfg.claim.payoff = Payoff::None;
        scale_costs(&mut cfg, 0.0);
        let prep = Prepared::new(&cfg).unwrap();
        let game = prep.game().unwrap();
        let never = SwitchingStrategy::never(prep.bundle.n_paths());
        let surface = backward_induction(&game, Player::A, &never, None, &cfg.solver).unwrap();
        assert_eq!(surface.realize(&game, &never).total_switches(), 0);
        for per_l in &surface.values {
            for per_z in per_l.iter() {
                assert!(per_z.iter().flatten().all(|v| *v == 0.0));
            }
        }
    }
}

#[test]
fn one_step_value_by_hand() {
    for seed in 0..15 {
        let mut cfg = common::tiny_instance(seed, true);
        cfg.model.n_steps = 1;
        cfg.solver.max_switches = 1;
        let prep = Prepared::new(&cfg).unwrap();
        let game = prep.game().unwrap();
        let never = SwitchingStrategy::never(prep.bundle.n_paths());
        let s = backward_induction(&game, Player::A, &never, None, &cfg.solver).unwrap();
        let c = &prep.costs[0];
        for p in 0..prep.bundle.n_paths() {
            let expect = if c.stop[p] == 0 {
                c.terminal(p, 1, 0.0)
            } else {
                let stay = c.running(p, 0, 1, 0.0) + c.terminal(p, 1, 0.0);
                let switch = c.switching(0, 0) + c.running(p, 0, 0, 0.0) + c.terminal(p, 0, 0.0);
                stay.min(switch)
            };
            assert!((s.values[1][1][0][p] - expect).abs() <= 1e-14, "seed {seed} path {p}");
        }
    }
}

#[test]
fn more_budget_never_hurts() {
    for seed in 0..20 {
        let mut cfg = common::tiny_instance(seed, true);
        cfg.solver.max_switches = 3;
        let prep = Prepared::new(&cfg).unwrap();
        let game = prep.game().unwrap();
        let (_, surface) = solve_symmetric(&game, &cfg.solver).unwrap();
        assert!(budget_gap(&surface) <= 1e-12, "seed {seed}: {}", budget_gap(&surface));
    }
}

#[test]
fn dearer_switching_never_adds_switches() {
    for seed in 0..20 {
        let cfg = common::tiny_instance(seed, true);
        let prep = Prepared::new(&cfg).unwrap();
        let (base, _) = solve_symmetric(&prep.game().unwrap(), &cfg.solver).unwrap();
        let mut dear = cfg.clone();
        scale_costs(&mut dear, 2.0);
        let prep2 = Prepared::with_bundle(&dear, prep.bundle.clone()).unwrap();
        let (high, _) = solve_symmetric(&prep2.game().unwrap(), &dear.solver).unwrap();
        assert!(high.total_switches <= base.total_switches, "seed {seed}");
        assert!(high.value >= base.value - 1e-15, "seed {seed}");
    }
}
