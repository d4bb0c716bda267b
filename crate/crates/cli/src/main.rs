use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use recourse_core::adversary::{build_trace, lower_bound_value};
use recourse_core::harness::{self, Algorithm, BmatchInstance, RunConfig, TStarMode};
use recourse_core::instance::{gen_random_unrelated, gen_restricted, parse_trace};

#[derive(Parser)]
#[command(name = "recourse", version, about = "Online load balancing with bounded recourse")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Unrelated,
    Restricted,
    Adversary,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Fractional,
    Simple,
    TwoEps,
    Loglog,
}

#[derive(Clone, Copy, ValueEnum)]
enum TStar {
    Known,
    Auto,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a trace in the newline-delimited format.
    Gen {
        #[arg(long, value_enum, default_value = "unrelated")]
        kind: GenKind,
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        p_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        p_hi: f64,
        /// Tree levels for `--kind adversary`.
        #[arg(long, default_value_t = 1)]
        levels: u32,
        /// Repetition factor P for `--kind adversary`.
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a trace and emit one metrics record per event.
    Run {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "known")]
        tstar: TStar,
        /// Marking constant of the loglog rounding.
        #[arg(long, default_value_t = 10.0)]
        mark_constant: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Exit with status 1 if any bound is violated.
        #[arg(long)]
        strict: bool,
    },
    /// Online b-matching from a JSON instance (or a generated one).
    Bmatch {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 6)]
        right: usize,
        #[arg(long, default_value_t = 10)]
        left: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate E|⌈f+ρ⌉ − ⌈f'+ρ⌉| over random offsets.
    McClaim2 {
        #[arg(long, default_value_t = 0.3)]
        f: f64,
        #[arg(long, default_value_t = 0.7)]
        f2: f64,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 16)]
        replays: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Loglog rounding statistics over master seeds on one trace.
    McLoglog {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        trace_seed: u64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
    },
    /// Closed-form recourse lower bound of the tree instance.
    LowerBound {
        #[arg(long, default_value_t = 1)]
        levels: u32,
        #[arg(long, default_value_t = 2)]
        p: u64,
    },
}

fn emit(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_trace(path: &PathBuf) -> Result<recourse_core::instance::EventTrace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_trace(&text)?)
}

/// The error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Gen { kind, n, m, seed, p_lo, p_hi, levels, p, out } => {
            let trace = match kind {
                GenKind::Unrelated => {
                    if !(0.0 < p_lo && p_lo <= p_hi) {
                        bail!("need 0 < p-lo ≤ p-hi");
                    }
                    gen_random_unrelated(n, m, seed, (p_lo, p_hi))
                }
                GenKind::Restricted => gen_restricted(n, m, seed),
                GenKind::Adversary => build_trace(levels, p)?.trace,
            };
            emit(&out, &trace.to_ndjson())?;
        }
        Cmd::Run { algo, eps, seed, trace, tstar, mark_constant, out, summary, strict } => {
            let trace = read_trace(&trace)?;
            let algorithm = match algo {
                Algo::Fractional => Algorithm::Fractional,
                Algo::Simple => Algorithm::Simple,
                Algo::TwoEps => Algorithm::TwoEps,
                Algo::Loglog => Algorithm::Loglog,
            };
            let cfg = RunConfig {
                algorithm,
                eps,
                seed,
                t_star_mode: match tstar {
                    TStar::Known => TStarMode::Known,
                    TStar::Auto => TStarMode::GuessDouble,
                },
                mark_constant,
            };
            let (rows, sum) = harness::run(&cfg, &trace)?;
            emit(&out, &harness::metrics_ndjson(&rows))?;
            let sum_text = serde_json::to_string_pretty(&sum)? + "\n";
            match &summary {
                Some(_) => emit(&summary, &sum_text)?,
                None => eprint!("{sum_text}"),
            }
            if strict && sum.bound_violations > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Bmatch { input, eps, right, left, seed, out } => {
            let inst: BmatchInstance = match input {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => harness::gen_bmatch(right, left, seed),
            };
            let report = harness::bmatch_run(&inst, eps)?;
            emit(&out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Cmd::McClaim2 { f, f2, draws, replays, seed } => {
            let est = harness::mc_claim2(f, f2, draws, replays, seed);
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
        Cmd::McLoglog { trace, n, m, trace_seed, eps, seeds } => {
            let trace = match trace {
                Some(p) => read_trace(&p)?,
                None => gen_random_unrelated(n, m, trace_seed, (0.1, 1.0)),
            };
            let stats = harness::mc_loglog(&trace, eps, seeds)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Cmd::LowerBound { levels, p } => {
            let lb = lower_bound_value(levels, p)?;
            println!("{}", serde_json::to_string_pretty(&lb)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
