//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the report is printed on success too.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_ognf, random_residual, replay_audited};
use recourse_core::adversary::{build_trace, lower_bound_value, strategy_cost, LbTree, Strategy};
use recourse_core::genflow::{cheapest_in_residual, Solver};
use recourse_core::harness::{bmatch_capacity, bmatch_run, fractional_sequence, gen_bmatch, mc_claim2, mc_loglog, run, Algorithm, Estimate, RunConfig};
use recourse_core::instance::{gen_random_unrelated, Event, EventTrace, Job, JobSet};
use recourse_core::matching::path_bound;
use recourse_core::oracle::{cheapest_of, compute_t_star, enumerate_structures, offline_genflow_opt};
use recourse_core::rounding::loglog::LoglogRounding;
use recourse_core::rounding::two_eps::TwoEpsRounding;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn job_list(trace: &EventTrace) -> Vec<Job> {
    trace
        .events
        .iter()
        .map(|e| match e {
            Event::Arrive(j) => j.clone(),
            Event::Depart(_) => unreachable!(),
        })
        .collect()
}

// ---- generalized flow (criteria 1–4) ----

struct FlowStats {
    worst_gap: f64,
    height_drop: f64,
    cost_excess: f64,
    conservation: f64,
    cert_failures: usize,
    worst_fraction: f64,
    errors: Vec<String>,
    seconds: f64,
    max_vertices: usize,
    max_edges: usize,
    max_sources: usize,
}

fn flow_replays() -> FlowStats {
    let start = Instant::now();
    let mut st = FlowStats {
        worst_gap: f64::NEG_INFINITY,
        height_drop: 0.0,
        cost_excess: 0.0,
        conservation: 0.0,
        cert_failures: 0,
        worst_fraction: f64::INFINITY,
        errors: Vec::new(),
        seconds: 0.0,
        max_vertices: 0,
        max_edges: 0,
        max_sources: 0,
    };
    for seed in 0..200u64 {
        let inst = random_ognf(seed);
        st.max_vertices = st.max_vertices.max(inst.net.num_vertices());
        st.max_edges = st.max_edges.max(inst.num_edges());
        st.max_sources = st.max_sources.max(inst.sources.len());
        let (flow, audit) = match replay_audited(&inst) {
            Ok(v) => v,
            Err(e) => {
                st.errors.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        st.height_drop = st.height_drop.max(audit.height_drop);
        st.cost_excess = st.cost_excess.max(audit.cost_excess);
        st.conservation = st.conservation.max(audit.conservation);
        match flow.dual_certificate(1.0) {
            Ok(cert) => {
                if !cert.meets_fraction {
                    st.cert_failures += 1;
                }
                if cert.source_height_sum > 0.0 {
                    st.worst_fraction = st.worst_fraction.min(cert.objective / cert.source_height_sum);
                }
            }
            Err(e) => {
                st.cert_failures += 1;
                st.errors.push(format!("seed {seed}: certificate {e}"));
            }
        }
        match offline_genflow_opt(flow.net(), 0.5) {
            Ok((opt, _)) => st.worst_gap = st.worst_gap.max(audit.total_cost - 2.0 * opt),
            Err(e) => st.errors.push(format!("seed {seed}: offline {e}")),
        }
    }
    st.seconds = start.elapsed().as_secs_f64();
    st
}

fn criterion_1(st: &FlowStats) -> Outcome {
    let pass = st.errors.is_empty() && st.worst_gap <= 1e-6 && st.seconds < 60.0;
    outcome(
        pass,
        format!(
            "200 instances (max {} vertices, {} edges, {} sources), max(cost − 2·C*) = {:.3e}, {:.2} s{}",
            st.max_vertices,
            st.max_edges,
            st.max_sources,
            st.worst_gap,
            st.seconds,
            st.errors.first().map(|e| format!(", first error: {e}")).unwrap_or_default()
        ),
    )
}

fn criterion_2(st: &FlowStats) -> Outcome {
    let pass = st.errors.is_empty() && st.height_drop <= 1e-7 && st.cost_excess <= 1e-7 && st.conservation <= 1e-7;
    outcome(pass, format!("max height drop {:.3e}, max cost − height {:.3e}, conservation {:.3e}", st.height_drop, st.cost_excess, st.conservation))
}

fn criterion_3(st: &FlowStats) -> Outcome {
    outcome(st.cert_failures == 0, format!("{} failures, min objective/Σy = {:.4} (need ≥ 0.5)", st.cert_failures, st.worst_fraction))
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for seed in 0..500u64 {
        let (n, s, res) = random_residual(seed, 6);
        let best = enumerate_structures(n, &res, s).ok().and_then(cheapest_of);
        let got = cheapest_in_residual(n, &res, s, Solver::Policy);
        match (best, got) {
            (Some(b), Ok(g)) => {
                let d = (b.cost - g.cost).abs();
                worst = worst.max(d);
                if d > 1e-7 {
                    bad.push(seed);
                }
            }
            _ => bad.push(seed),
        }
    }
    outcome(bad.is_empty(), format!("500 residual graphs, max |Δcost| = {worst:.3e}, mismatches {bad:?}"))
}

// ---- fractional layer (criterion 5) ----

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_ratio, mut worst_rec) = (0.0f64, 0.0f64);
    let mut bad = Vec::new();
    for k in 0..100u64 {
        let n = rng.gen_range(1..=60);
        let m = rng.gen_range(1..=8);
        let trace = gen_random_unrelated(n, m, 500 + k, (0.1, 1.0));
        let t_star = compute_t_star(&trace.all_jobs()).unwrap().value;
        let (rows, _) = match run(&RunConfig::new(Algorithm::Fractional, 0.5), &trace) {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("instance {k}: {e}"));
                continue;
            }
        };
        for r in &rows {
            worst_ratio = worst_ratio.max(r.makespan / t_star);
            worst_rec = worst_rec.max(r.cumulative_fractional / r.t as f64);
            if r.makespan > 1.5 * t_star + 1e-6 || r.cumulative_fractional > 6.0 * r.t as f64 + 1e-9 {
                bad.push(format!("instance {k} step {}", r.t));
            }
        }
    }
    outcome(bad.is_empty(), format!("max makespan/T* = {worst_ratio:.4}, max cumulative recourse/t = {worst_rec:.3}{}", first(&bad)))
}

fn first(v: &[String]) -> String {
    v.first().map(|e| format!(", first failure: {e}")).unwrap_or_default()
}

// ---- simple rounding (criteria 6, 7) ----

struct RoundingPaths {
    paths: usize,
    longest_over_bound: i64,
    violations: usize,
}

impl RoundingPaths {
    fn new() -> Self {
        RoundingPaths { paths: 0, longest_over_bound: i64::MIN, violations: 0 }
    }

    fn add(&mut self, records: &[recourse_core::matching::PathRecord]) {
        for p in records {
            self.paths += 1;
            let bound = path_bound(2.0, p.num_left) as i64;
            self.longest_over_bound = self.longest_over_bound.max(p.edges as i64 - bound);
            self.violations += (p.edges as i64 > bound) as usize;
        }
    }
}

fn simple_replays(paths: &mut RoundingPaths) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for k in 0..100u64 {
        let n = rng.gen_range(1..=60);
        let m = rng.gen_range(1..=8);
        let trace = gen_random_unrelated(n, m, 700 + k, (0.05, 1.0));
        let (t_star, seq) = fractional_sequence(&trace, 1.0).unwrap();
        let mut r = recourse_core::rounding::simple::SimpleRounding::new(t_star, 1.0, n, k);
        let mut jobs = JobSet::new(m);
        for (job, (x, changed)) in job_list(&trace).into_iter().zip(&seq) {
            jobs.insert(job);
            match r.step(&jobs, x, Some(changed)) {
                Ok(_) => {
                    let ms = r.sigma().makespan(&jobs);
                    worst = worst.max(ms / t_star);
                    if ms > 13.0 * t_star + 1e-9 {
                        bad.push(format!("replay {k} at {} jobs", jobs.len()));
                    }
                }
                Err(e) => bad.push(format!("replay {k}: {e}")),
            }
        }
        paths.add(r.matching().paths());
    }
    outcome(bad.is_empty(), format!("makespan ≤ 13·T* over 100 replays, max ratio {worst:.3}{}", first(&bad)))
}

fn claim2() -> Outcome {
    let pairs = [(0.3, 0.7), (0.1, 0.15), (0.0, 0.5), (1.2, 3.9), (2.5, 2.5), (0.95, 0.05)];
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, &(f, f2)) in pairs.iter().enumerate() {
        let est = mc_claim2(f, f2, 20_000, 16, 70 + i as u64);
        let se = est.std / (est.samples as f64).sqrt();
        let want = (f - f2).abs();
        let ok = (est.mean - want).abs() <= 3.0 * se + 1e-12;
        pass &= ok;
        lines.push(format!("|{f}−{f2}|={want:.3}: {:.4}±{se:.1e}", est.mean));
    }
    outcome(pass, lines.join(", "))
}

const TREND_SEEDS: u64 = 16;

fn recourse_trend() -> Outcome {
    let sizes = [32usize, 128, 512];
    let mut parts = Vec::new();
    let mut pass = true;
    for &eps in &[1.0, 0.125] {
        let mut est = Vec::new();
        for &n in &sizes {
            let samples: Vec<f64> = (0..TREND_SEEDS)
                .map(|s| {
                    let trace = gen_random_unrelated(n, 8, 9000 + s, (0.05, 1.0));
                    let mut cfg = RunConfig::new(Algorithm::Simple, eps);
                    cfg.seed = s;
                    let (_, sum) = run(&cfg, &trace).unwrap();
                    sum.final_amortized_recourse / (n as f64).log2()
                })
                .collect();
            est.push(Estimate::from_samples(&samples));
        }
        for w in est.windows(2) {
            let se = |e: &Estimate| e.std / (e.samples as f64).sqrt();
            let slack = 3.0 * (se(&w[0]).powi(2) + se(&w[1]).powi(2)).sqrt();
            pass &= w[1].mean - w[0].mean <= slack;
        }
        parts.push(format!("ε={eps}: {}", est.iter().zip(&sizes).map(|(e, n)| format!("n={n} {:.4}±{:.4}", e.mean, e.std / (e.samples as f64).sqrt())).collect::<Vec<_>>().join(", ")));
    }
    outcome(pass, format!("amortized recourse / log₂ n, non-increasing within 3σ; {}", parts.join("; ")))
}

// ---- two-eps rounding (criterion 8) ----

fn criterion_8(paths: &mut RoundingPaths) -> Outcome {
    let eps = 0.125;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut c_v) = (0.0f64, 0.0f64);
    let mut bad = Vec::new();
    for k in 0..40u64 {
        let n = rng.gen_range(1..=40);
        let m = rng.gen_range(1..=6);
        let trace = gen_random_unrelated(n, m, 800 + k, (0.05, 1.0));
        let (t_star, seq) = fractional_sequence(&trace, eps).unwrap();
        let mut r = TwoEpsRounding::new(m, eps);
        let mut jobs = JobSet::new(m);
        let mut frac = 0.0;
        for (job, (x, changed)) in job_list(&trace).into_iter().zip(&seq) {
            jobs.insert(job);
            match r.step(&jobs, x, Some(changed)) {
                Ok(rep) => {
                    frac += rep.fractional_change;
                    let ms = r.sigma().makespan(&jobs);
                    worst = worst.max(ms / t_star);
                    if ms > 4.0 * t_star + 1e-9 {
                        bad.push(format!("replay {k} at {} jobs", jobs.len()));
                    }
                }
                Err(e) => bad.push(format!("replay {k}: {e}")),
            }
        }
        if frac > 0.0 {
            c_v = c_v.max(r.vertex_updates() as f64 * eps * eps / frac);
        }
        paths.add(r.matching().paths());
    }
    let stress = common::partition_stress(88, 100_000, eps);
    let events = stress.as_ref().copied().unwrap_or(0);
    if let Err(e) = &stress {
        bad.push(format!("partition stress: {e}"));
    }
    outcome(bad.is_empty(), format!("makespan ≤ 4·T*, max ratio {worst:.3}; {events} partition events clean; C_v = {c_v:.4}{}", first(&bad)))
}

// ---- loglog rounding (criterion 9) ----

fn criterion_9() -> Outcome {
    let mut bad = Vec::new();
    for k in 0..20u64 {
        let trace = gen_random_unrelated(40, 5, 900 + k, (0.05, 1.0));
        let (t_star, seq) = fractional_sequence(&trace, 0.5).unwrap();
        let replay = || {
            let mut r = LoglogRounding::new(1.5 * t_star, trace.len(), k);
            let mut jobs = JobSet::new(5);
            let mut out = Vec::new();
            for (job, (x, _)) in job_list(&trace).into_iter().zip(&seq) {
                jobs.insert(job);
                let step = r.step(&jobs, x).unwrap();
                let sigma: Vec<_> = r.snapshot().unwrap().sigma.iter().collect();
                let again = r.step(&jobs, x).unwrap();
                out.push((step, sigma, again.recourse));
            }
            out
        };
        let a = replay();
        if a != replay() {
            bad.push(format!("trace {k}: replays differ"));
        }
        if a.iter().any(|(_, _, again)| *again != [0; 4]) {
            bad.push(format!("trace {k}: recourse with unchanged x"));
        }
    }
    let trace = gen_random_unrelated(512, 32, 9, (0.05, 1.0));
    let stats = mc_loglog(&trace, 0.5, 50).unwrap();
    if stats.decomposition_violations > 0 {
        bad.push(format!("{} decomposition violations", stats.decomposition_violations));
    }
    outcome(
        bad.is_empty(),
        format!(
            "deterministic, zero idle recourse; n=512 m=32 over 50 seeds: C_R = {:.4} ± {:.4} (max {:.4}), makespan/T* = {:.3} ± {:.3}, types {:?}{}",
            stats.c_r.mean,
            stats.c_r.std,
            stats.c_r_max,
            stats.makespan_ratio.mean,
            stats.makespan_ratio.std,
            stats.recourse_types,
            first(&bad)
        ),
    )
}

// ---- b-matching (criterion 10) ----

fn criterion_10() -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for &eps in &[0.5, 1.0] {
        for k in 0..100u64 {
            let inst = gen_bmatch(rng.gen_range(1..=8), rng.gen_range(1..=24), 1000 + k);
            let rep = match bmatch_run(&inst, eps) {
                Ok(r) => r,
                Err(e) => {
                    bad.push(format!("ε={eps} instance {k}: {e}"));
                    continue;
                }
            };
            let cap: std::collections::BTreeMap<&str, u32> = inst.right.iter().map(|v| (v.id.as_str(), bmatch_capacity(v.b, eps))).collect();
            let sum_c: f64 = inst.left.iter().map(|u| u.cost).sum();
            for (t, step) in rep.steps.iter().enumerate() {
                let mut load: std::collections::BTreeMap<&str, u32> = Default::default();
                let mut left: std::collections::BTreeSet<&str> = Default::default();
                for (l, r) in &step.matching {
                    *load.entry(r.as_str()).or_default() += 1;
                    if !left.insert(l.as_str()) {
                        bad.push(format!("ε={eps} instance {k}: {l} matched twice"));
                    }
                }
                if left.len() != t + 1 || load.iter().any(|(r, &c)| c > cap[r]) {
                    bad.push(format!("ε={eps} instance {k} step {t}"));
                }
            }
            if sum_c > 0.0 {
                worst = worst.max(rep.total_cost / sum_c * eps / (1.0 + eps));
            }
            if rep.total_cost > (1.0 + eps) / eps * sum_c + 1e-6 {
                bad.push(format!("ε={eps} instance {k}: cost {}", rep.total_cost));
            }
        }
    }
    outcome(bad.is_empty(), format!("200 instances, max cost/bound = {worst:.3}{}", first(&bad)))
}

// ---- adversary (criterion 11) ----

fn random_feasible(tree: &LbTree, rng: &mut ChaCha8Rng) -> Strategy {
    let mut f: Strategy = vec![Vec::new()];
    for v in 1..=tree.num_vertices() {
        let k = tree.leaves_below(v).len();
        let copies = (1u64 << tree.level(v)) as f64;
        let raw: Vec<f64> = (0..k).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() }).collect();
        let total: f64 = raw.iter().sum();
        let fill = if rng.gen_bool(0.3) { 1.0 } else { rng.gen::<f64>() };
        f.push(if total > 0.0 { raw.iter().map(|w| w / total * copies * fill).collect() } else { raw });
    }
    let limit = 2.0 * (tree.levels as f64 + 1.0) / 3.0;
    let mut congestion = vec![0.0; tree.num_leaves()];
    for v in 1..=tree.num_vertices() {
        for (u, w) in tree.leaves_below(v).zip(&f[v]) {
            congestion[u] += w;
        }
    }
    let worst = congestion.into_iter().fold(0.0, f64::max);
    if worst > limit {
        for w in f.iter_mut().flatten() {
            *w *= limit / worst;
        }
    }
    f
}

fn criterion_11() -> Outcome {
    let mut bad = Vec::new();
    let inst = build_trace(1, 2).unwrap();
    let arrivals = inst.trace.events.iter().filter(|e| matches!(e, Event::Arrive(_))).count();
    let sum_c: f64 = inst.trace.all_jobs().iter().map(|j| j.reassignment_cost()).sum();
    if arrivals != 6 || (sum_c - 8.0).abs() > 1e-12 {
        bad.push(format!("build_trace(1,2): {arrivals} arrivals, Σc = {sum_c}"));
    }
    let mut prefixes = 0;
    for (levels, p) in [(1, 2), (2, 4)] {
        let inst = build_trace(levels, p).unwrap();
        for t in 0..=inst.trace.len() {
            let active = inst.trace.active_after(t);
            let sigma = inst.witness(t);
            prefixes += 1;
            if !sigma.is_feasible_for(&active) || sigma.makespan(&active) > 1.0 + 1e-12 {
                bad.push(format!("({levels},{p}) prefix {t}"));
            }
        }
    }
    let mut mins = Vec::new();
    for (levels, p) in [(1u32, 2u64), (2, 4), (2, 8)] {
        let tree = LbTree::new(levels, p).unwrap();
        let bound = lower_bound_value(levels, p).unwrap().value;
        let mut rng = ChaCha8Rng::seed_from_u64(11 + levels as u64 * 100 + p);
        let mut min = f64::INFINITY;
        for _ in 0..10_000 {
            let f = random_feasible(&tree, &mut rng);
            let (rec, cong) = strategy_cost(&tree, &f).unwrap();
            min = min.min(rec);
            if cong > 2.0 * (levels as f64 + 1.0) / 3.0 + 1e-9 || rec < bound - 1e-6 {
                bad.push(format!("({levels},{p}): recourse {rec} < {bound}"));
            }
        }
        mins.push(format!("({levels},{p}) bound {bound:.4} min {min:.4}"));
    }
    outcome(bad.is_empty(), format!("6 arrivals, Σc = 8, {prefixes} prefixes witnessed; {}{}", mins.join(", "), first(&bad)))
}

fn main() {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let flow = flow_replays();
    results.push((1, criterion_1(&flow)));
    results.push((2, criterion_2(&flow)));
    results.push((3, criterion_3(&flow)));
    results.push((4, criterion_4()));
    results.push((5, criterion_5()));
    let mut paths = RoundingPaths::new();
    let simple = simple_replays(&mut paths);
    let c2 = claim2();
    let trend = recourse_trend();
    let eight = criterion_8(&mut paths);
    results.push((
        6,
        outcome(paths.violations == 0, format!("{} BFS paths at α = 2, {} over the bound, max length − bound = {}", paths.paths, paths.violations, paths.longest_over_bound)),
    ));
    results.push((
        7,
        outcome(simple.pass && c2.pass && trend.pass, format!("{}; Monte-Carlo {}; {}", simple.detail, c2.detail, trend.detail)),
    ));
    results.push((8, eight));
    results.push((9, criterion_9()));
    results.push((10, criterion_10()));
    results.push((11, criterion_11()));
    let mut failed = 0;
    for (k, o) in &results {
        println!("criterion {k:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
