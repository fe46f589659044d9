use bernoulli_factory::domain::{lemma52_check, random_event, subdomain_factory};
use bernoulli_factory::harness::{outcome_draw, run_trials};
use bernoulli_factory::lattice::{certificate_check, general_factory};
use bernoulli_factory::rational::{int, rat};
use bernoulli_factory::target::builtin;
use bernoulli_factory::{AffineCubeDomain, CoinBank, FlipBudget, LatticeGeometry, LevelOracle, LevelSchedule, TargetFunction};
use num::{BigRational, Zero};

fn affine() -> TargetFunction {
    builtin("quarter-affine").unwrap()
}

#[test]
fn affine_certificate_holds_at_t64() {
    let r = certificate_check(&affine(), 64, 16).unwrap();
    assert!(r.holds);
}

#[test]
fn constant_half_second_level() {
    let o = LevelOracle::general(builtin("half").unwrap(), LevelSchedule::constant(5).unwrap()).unwrap();
    assert_eq!(o.fk_eval(2, &[rat(2, 7)]).unwrap(), rat(1, 3));
}

#[test]
fn identity_g1_at_half_with_t3() {
    let o = LevelOracle::general(builtin("identity").unwrap(), LevelSchedule::constant(3).unwrap()).unwrap();
    assert_eq!(o.gk(1, &[vec![rat(1, 2)]]).unwrap(), vec![rat(1, 2)]);
}

#[test]
fn zeros_of_f_persist_through_levels() {
    let o = LevelOracle::general(builtin("identity").unwrap(), LevelSchedule::constant(16).unwrap()).unwrap();
    for k in 1..=5 {
        assert!(o.fk_eval(k, &[int(0)]).unwrap().is_zero());
        assert_eq!(o.fk_eval(k, &[int(1)]).unwrap(), int(1));
    }
}

#[test]
fn general_factory_is_deterministic_at_the_ends() {
    let prog = general_factory(builtin("identity").unwrap(), LevelSchedule::constant(16).unwrap()).unwrap();
    for (p, want) in [(int(0), "0"), (int(1), "1")] {
        let bank = CoinBank::new(vec![p], 9).unwrap();
        let run = run_trials("id", &bank, 500, 9, FlipBudget::UNBOUNDED, |b, budget| {
            Ok(outcome_draw(prog.run(b, budget)?))
        });
        assert_eq!(run.counts().get(want).copied(), Some(500));
    }
}

#[test]
fn subdomain_factory_terminates_at_segment_vertices() {
    let k = AffineCubeDomain::new(2, vec![vec![int(1), int(1)]], vec![rat(1, 2)]).unwrap();
    let prog = subdomain_factory(builtin("ratio").unwrap(), &k, LevelSchedule::constant(32).unwrap(), &rat(1, 128)).unwrap();
    for (p, want) in [(vec![rat(1, 2), int(0)], "1"), (vec![int(0), rat(1, 2)], "0")] {
        let bank = CoinBank::new(p, 4).unwrap();
        let run = run_trials("ratio", &bank, 300, 4, FlipBudget::UNBOUNDED, |b, budget| {
            Ok(outcome_draw(prog.run(b, budget)?))
        });
        assert_eq!(run.counts().get(want).copied(), Some(300));
    }
}

#[test]
fn domination_on_the_line() {
    let k = AffineCubeDomain::k_subset(2, 1).unwrap();
    let g = LatticeGeometry::new(2, 12, Some(&k), Some(&rat(2, 5)), 1 << 16).unwrap();
    for e in 0..20 {
        let r = lemma52_check(&g, &[rat(1, 4), rat(3, 4)], &random_event(e)).unwrap();
        assert!(r.holds);
    }
    // t too small for eps
    let g = LatticeGeometry::new(2, 4, Some(&k), Some(&rat(2, 5)), 1 << 16).unwrap();
    assert!(lemma52_check(&g, &[rat(1, 2), rat(1, 2)], &random_event(0)).is_err());
}

#[test]
fn weights_sum_to_one() {
    let g = LatticeGeometry::new(2, 6, None, None, 1 << 16).unwrap();
    let total: BigRational = g.event_probability(&[rat(1, 3), rat(4, 5)], &|_| true).unwrap();
    assert_eq!(total, int(1));
}
