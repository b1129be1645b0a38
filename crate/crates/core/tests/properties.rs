mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mpicheck_core::l0::check_l0;
use mpicheck_core::l2::{check_l2, counts, flatten, normalize, to_power_string};
use mpicheck_core::model::{classify, count_occurrences, unroll, EventQueues, ModelClass};
use mpicheck_core::oracle::{explore, OracleVerdict, Simulator, DEFAULT_MAX_STATES};
use mpicheck_core::ratio::{solve, RatioEquation, RatioEquationGroup};
use mpicheck_core::smodel::{build_mdg, check_by_queues, check_by_queues_with, find_deadlock_cycle};
use mpicheck_core::{balanced, check, CheckOptions, Details, Via};

const LIMIT: usize = 1 << 20;

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn normalize_keeps_the_sequence(seed in any::<u64>()) {
        let s = common::power_string(seed);
        let n = normalize(&s);
        prop_assert_eq!(flatten(&s, LIMIT), flatten(&n, LIMIT));
        prop_assert_eq!(normalize(&n), n);
    }

    #[test]
    fn power_strings_count_like_statements(seed in any::<u64>()) {
        let p = common::finite_program(seed, &common::Shape::default());
        for node in p.nodes() {
            let body = p.body(node);
            let s = to_power_string(body);
            prop_assert_eq!(counts(&s).unwrap(), count_occurrences(body).unwrap());
            prop_assert_eq!(counts(&normalize(&s)).unwrap(), count_occurrences(body).unwrap());
        }
    }

    #[test]
    fn unrolling_yields_an_smodel_with_the_same_counts(seed in any::<u64>()) {
        let p = common::finite_program(seed, &common::Shape::default());
        let q = unroll(&p, LIMIT).unwrap();
        for node in p.nodes() {
            prop_assert_eq!(q.queue(node).len() as u64, count_occurrences(p.body(node)).unwrap().total());
        }
        prop_assert_eq!(classify(&q.to_program(&p)), ModelClass::SModel);
    }

    #[test]
    fn solutions_satisfy_every_equation(seed in any::<u64>(), vars in 2u32..40, count in 1usize..80) {
        let (group, _) = common::consistent_equations(seed, vars, count);
        let sol = solve(&group).unwrap();
        for eq in group.equations() {
            let (pi, pj) = (sol.value(eq.i).unwrap(), sol.value(eq.j).unwrap());
            prop_assert_eq!(pi * eq.b as u128, pj * eq.a as u128);
        }
        for comp in sol.components() {
            let g = comp.iter().fold(0, |g, v| gcd(g, sol.value(*v).unwrap()));
            prop_assert_eq!(g, 1, "solution is not in lowest terms");
        }
    }

    #[test]
    fn scaling_an_equation_changes_nothing(seed in any::<u64>(), k in 2u64..9) {
        let (group, _) = common::consistent_equations(seed, 12, 20);
        let mut scaled = RatioEquationGroup::with_vars(12);
        for (i, eq) in group.equations().iter().enumerate() {
            let f = if i % 2 == 0 { k } else { 1 };
            scaled.push(RatioEquation::new(eq.i, eq.j, eq.a * f, eq.b * f));
        }
        prop_assert_eq!(solve(&group).unwrap(), solve(&scaled).unwrap());
    }

    #[test]
    fn a_broken_cycle_is_unsolvable(seed in any::<u64>()) {
        let (group, _) = common::consistent_equations(seed, 6, 10);
        let mut broken = group.clone();
        let first = group.equations()[0];
        broken.push(RatioEquation::new(first.i, first.j, first.a, first.b * 2));
        prop_assert!(solve(&group).is_ok());
        prop_assert!(solve(&broken).is_err());
    }

    #[test]
    fn queue_matching_is_confluent(seed in any::<u64>()) {
        let p = common::finite_program(seed, &common::Shape::default());
        let q = unroll(&p, LIMIT).unwrap();
        let reference = check_by_queues(&q);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            prop_assert_eq!(&check_by_queues_with(&q, |len| rng.gen_range(0..len)), &reference);
        }
        prop_assert_eq!(reference.is_deadlock(), find_deadlock_cycle(&build_mdg(&q)).is_some());
    }

    #[test]
    fn slices_are_balanced(seed in any::<u64>()) {
        let p = common::program(seed, &common::Shape::default());
        if let Ok(a) = check_l0(&p, &CheckOptions::default()) {
            if let Some(s) = a.slice {
                prop_assert!(balanced(&unroll(&s.program, LIMIT).unwrap()));
            }
        }
        if let Ok(a) = check_l2(&p, &CheckOptions::default()) {
            if a.strip.as_ref().is_some_and(|s| s.solution.is_some()) {
                let q: Vec<_> = a.working.iter().map(|s| flatten(s, LIMIT).unwrap()).collect();
                prop_assert!(balanced(&EventQueues::new(q)));
            }
        }
    }

    #[test]
    fn power_strings_agree_with_queues_on_finite_programs(seed in any::<u64>()) {
        let p = common::finite_program(seed, &common::Shape::default());
        let options = CheckOptions::default();
        let by_queues = check(&p, Via::SModel, &options).unwrap().verdict;
        let a = check_l2(&p, &options).unwrap();
        prop_assert_eq!(a.verdict.is_deadlock(), by_queues.is_deadlock());
    }

    #[test]
    fn oracle_witnesses_replay(seed in any::<u64>()) {
        let p = common::program(seed, &common::Shape::default());
        let sim = Simulator::new(&p);
        match explore(&p, DEFAULT_MAX_STATES).verdict {
            OracleVerdict::DeadlockReachable { trace, blocked } => {
                let state = sim.replay(&trace);
                prop_assert!(state.is_some(), "trace does not replay");
                let state = state.unwrap();
                prop_assert!(!blocked.is_empty());
                for n in blocked {
                    prop_assert!(!state.is_terminated(n));
                }
            }
            OracleVerdict::DeadlockFree => {}
            OracleVerdict::Inconclusive(_) => prop_assert!(false, "corpus programs are small"),
        }
    }

    #[test]
    fn smaller_budgets_never_change_a_verdict(seed in any::<u64>(), budget in 1usize..60) {
        let p = common::program(seed, &common::Shape::default());
        let full = explore(&p, DEFAULT_MAX_STATES);
        let cut = explore(&p, budget);
        match cut.verdict {
            OracleVerdict::Inconclusive(_) => prop_assert!(full.states >= budget),
            v => prop_assert_eq!(v.is_deadlock(), full.verdict.is_deadlock()),
        }
    }
}

#[test]
fn nested_and_single_loop_checkers_agree_on_a_three_node_ring() {
    let text = "node P0 { for inf { send a to P1, send c to P2, recv b from P1 } }
        node P1 { for inf { recv a from P0, send b to P0, recv a from P0, recv d from P2, send b to P0, recv d from P2 } }
        node P2 { for inf { recv c from P0, send d to P1 } }";
    let p = mpicheck_core::model::validate(mpicheck_core::syntax::parse(text).unwrap()).unwrap();
    let options = CheckOptions::default();
    let l0 = check_l0(&p, &options).unwrap();
    let l2 = check_l2(&p, &options).unwrap();
    assert!(!l0.verdict.is_deadlock());
    assert_eq!(l0.verdict.is_deadlock(), l2.verdict.is_deadlock());
    let a = check(&p, Via::Auto, &options).unwrap();
    assert!(matches!(a.details, Details::L0(_)));
}
