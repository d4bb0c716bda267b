use proptest::prelude::*;

use recourse_core::fractional::{FractionalLb, GuessAndDouble};
use recourse_core::instance::{gen_random_unrelated, gen_restricted, Event, EventTrace, JobSet};
use recourse_core::oracle::compute_t_star;

fn arrivals(trace: &EventTrace) -> Vec<recourse_core::instance::Job> {
    trace.events.iter().map(|e| match e {
        Event::Arrive(j) => j.clone(),
        Event::Depart(_) => unreachable!(),
    }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn known_estimate_schedule_is_valid_and_cheap(
        seed in any::<u64>(),
        n in 1usize..30,
        m in 1usize..6,
        eps in prop::sample::select(vec![0.25, 0.5, 1.0]),
        restricted in any::<bool>(),
    ) {
        let trace = if restricted { gen_restricted(n, m, seed) } else { gen_random_unrelated(n, m, seed, (0.1, 1.0)) };
        let jobs = arrivals(&trace);
        let t_star = compute_t_star(&trace.all_jobs()).unwrap().value;
        let mut lb = FractionalLb::new(m, eps, t_star, n);
        let mut seen = JobSet::new(m);
        let mut cum = 0.0;
        for (k, job) in jobs.iter().enumerate() {
            let rec = lb.arrive(job).unwrap();
            seen.insert(job.clone());
            let x = lb.x();
            prop_assert!(x.validate(&seen, 1e-7).is_ok(), "{:?}", x.validate(&seen, 1e-7));
            for later in &jobs[k + 1..] {
                prop_assert!(!x.contains_job(later.id));
            }
            // Loads read from x agree with the machine edges of the network.
            prop_assert!((x.makespan(&seen) - rec.makespan).abs() <= 1e-7);
            prop_assert!(rec.makespan <= (1.0 + eps) * t_star + 1e-7);
            cum += rec.recourse;
            prop_assert!(cum <= 2.0 * (1.0 + eps) / eps * (k + 1) as f64 + 1e-7, "t={} cum={cum}", k + 1);
        }
    }

    #[test]
    fn guess_and_double_keeps_rows_and_reintroduction_bound(seed in any::<u64>(), n in 1usize..25, m in 1usize..5) {
        let trace = gen_random_unrelated(n, m, seed, (0.05, 2.0));
        let mut g = GuessAndDouble::new(m, 0.5, n);
        let mut seen = JobSet::new(m);
        for job in arrivals(&trace) {
            g.arrive(&job).unwrap();
            seen.insert(job);
            prop_assert!(g.x().validate(&seen, 1e-7).is_ok());
        }
        let bound = g.reintroduction_bound();
        for (&j, &c) in g.reintroductions() {
            prop_assert!(c <= bound, "job {j} reintroduced {c} > {bound} times");
        }
    }
}
