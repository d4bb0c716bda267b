mod common;

use proptest::prelude::*;

use recourse_core::harness::{fractional_sequence, Estimate};
use recourse_core::instance::{gen_random_unrelated, Event, EventTrace, JobSet};
use recourse_core::rounding::loglog::{log_n, sparsify_value, LoglogRounding, Seeds};
use recourse_core::rounding::simple::{load_constant, SimpleRounding};
use recourse_core::rounding::two_eps::{TwoEpsRounding, C_TWO_EPS};
use recourse_core::instance::MachineId;

/// Jobs in arrival order, for replaying a precomputed fractional sequence.
fn job_list(trace: &EventTrace) -> Vec<recourse_core::instance::Job> {
    trace.events.iter().map(|e| match e {
        Event::Arrive(j) => j.clone(),
        Event::Depart(_) => unreachable!(),
    }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simple_rounding_uses_edges_and_keeps_load(seed in any::<u64>(), n in 1usize..30, m in 1usize..5) {
        let trace = gen_random_unrelated(n, m, seed, (0.1, 1.0));
        let (t_star, seq) = fractional_sequence(&trace, 1.0).unwrap();
        let mut r = SimpleRounding::new(t_star, 1.0, n, seed);
        let mut jobs = JobSet::new(m);
        for (job, (x, changed)) in job_list(&trace).into_iter().zip(&seq) {
            jobs.insert(job);
            let rep = r.step(&jobs, x, Some(changed)).unwrap();
            prop_assert!(r.matching().validate().is_ok());
            prop_assert_eq!(r.sigma().len(), jobs.len());
            for (j, i) in r.sigma().iter() {
                let p = jobs.get(j).and_then(|job| job.p(i));
                prop_assert!(p.is_some_and(|p| p <= t_star * (1.0 + 1e-12)), "job {j} on machine {i:?}");
            }
            prop_assert!(rep.makespan <= load_constant(1.0) * t_star + 1e-9);
            prop_assert!(r.check_load_bound(&jobs).is_ok());
        }
    }

    #[test]
    fn two_eps_keeps_partitions_y_sums_and_expansion(seed in any::<u64>(), n in 1usize..12, m in 1usize..4) {
        let eps = 0.125;
        let trace = gen_random_unrelated(n, m, seed, (0.1, 1.0));
        let (t_star, seq) = fractional_sequence(&trace, eps).unwrap();
        let mut r = TwoEpsRounding::new(m, eps);
        let mut jobs = JobSet::new(m);
        for (job, (x, changed)) in job_list(&trace).into_iter().zip(&seq) {
            jobs.insert(job);
            let rep = r.step(&jobs, x, Some(changed)).unwrap();
            for i in 0..m {
                prop_assert!(r.partition(MachineId(i)).check().is_ok(), "{:?}", r.partition(MachineId(i)).check());
                for j in jobs.ids() {
                    prop_assert!((r.partition(MachineId(i)).job_len(j) - x.get(j, MachineId(i))).abs() <= 1e-7);
                }
            }
            prop_assert!(r.check_y_sums().is_ok());
            prop_assert!(r.matching().validate().is_ok());
            prop_assert_eq!(r.matching().expansion_holds(), Some(true));
            prop_assert!(r.sigma().is_feasible_for(&jobs));
            prop_assert!(rep.makespan <= (2.0 + C_TWO_EPS * eps) * t_star + 1e-9);
        }
    }

    #[test]
    fn partitions_survive_random_events(seed in any::<u64>()) {
        let r = common::partition_stress(seed, 400, 0.125);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn loglog_is_deterministic_and_coupled(seed in any::<u64>(), n in 1usize..30, m in 1usize..6) {
        let trace = gen_random_unrelated(n, m, seed, (0.05, 1.0));
        let (t_star, seq) = fractional_sequence(&trace, 0.5).unwrap();
        let run = || {
            let mut r = LoglogRounding::new(1.5 * t_star, n, seed);
            let mut jobs = JobSet::new(m);
            let mut out = Vec::new();
            for (job, (x, _)) in job_list(&trace).into_iter().zip(&seq) {
                jobs.insert(job);
                let step = r.step(&jobs, x).unwrap();
                let sigma: Vec<_> = r.snapshot().unwrap().sigma.iter().collect();
                let again = r.step(&jobs, x).unwrap();
                out.push((step, sigma, again.recourse, r.check_decomposition(&jobs).is_ok()));
            }
            out
        };
        let a = run();
        for (_, sigma, again, ok) in &a {
            prop_assert_eq!(*again, [0u64; 4]);
            prop_assert!(*ok);
            prop_assert!(!sigma.is_empty());
        }
        prop_assert_eq!(a, run());
    }
}

#[test]
fn sparsify_is_unbiased_per_coordinate() {
    let ln = log_n(512);
    for (k, &x) in [0.001, 0.01, 0.03, 0.06, 0.1].iter().enumerate() {
        let seeds = Seeds::new(k as u64);
        let draws = 50_000u64;
        let vals: Vec<f64> = (0..draws).map(|j| sparsify_value(x, seeds.delta(j, MachineId(k), ln), ln)).collect();
        let est = Estimate::from_samples(&vals);
        let se = est.std / (draws as f64).sqrt();
        assert!((est.mean - x).abs() <= 3.0 * se + 1e-12, "x = {x}: mean {} ± {se}", est.mean);
    }
    // Coordinates at or above 1/log n pass through.
    assert_eq!(sparsify_value(0.5, 0.0, ln), 0.5);
}

#[test]
fn capacity_change_is_twice_fractional_change_on_average() {
    let trace = gen_random_unrelated(60, 4, 17, (0.1, 1.0));
    let (t_star, seq) = fractional_sequence(&trace, 1.0).unwrap();
    let jobs_in_order = job_list(&trace);
    let mut totals = Vec::new();
    let mut frac = 0.0;
    for seed in 0..60 {
        let mut r = SimpleRounding::new(t_star, 1.0, trace.len(), seed);
        let mut jobs = JobSet::new(4);
        frac = 0.0;
        for (job, (x, changed)) in jobs_in_order.iter().zip(&seq) {
            jobs.insert(job.clone());
            frac += r.step(&jobs, x, Some(changed)).unwrap().fractional_change;
        }
        totals.push(r.total_capacity_change() as f64);
    }
    let est = Estimate::from_samples(&totals);
    let se = est.std / (totals.len() as f64).sqrt();
    assert!(est.mean <= 2.0 * frac + 3.0 * se, "mean {} vs 2·{frac}", est.mean);
}
