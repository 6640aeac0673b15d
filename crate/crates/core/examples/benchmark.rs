//! Desk-scale benchmark of the simulator-based policies.
//!
//! ```text
//! cargo run --release --example benchmark -- [patients] [seed] [config.toml]
//! ```

use ventbench::bench::{make_cohort, run_benchmark, BenchmarkPlan, PolicyKind};
use ventbench::Config;

fn main() -> ventbench::Result<()> {
    let mut args = std::env::args().skip(1);
    let patients: usize = args.next().map_or(20, |s| s.parse().expect("patients"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let config = match args.next() {
        Some(path) => Config::load(std::path::Path::new(&path))?,
        None => Config::default(),
    };
    let cohort = make_cohort(patients, seed, &config.bench)?;
    let plan = BenchmarkPlan {
        policies: vec![
            PolicyKind::Random,
            PolicyKind::MaxIntervention,
            PolicyKind::Ardsnet,
            PolicyKind::Smpc,
        ],
        steps: config.env.steps,
        seed,
        parallel: true,
    };
    let (report, timings) = run_benchmark(&plan, &cohort, &config, None)?;
    print!("{}", report.render_table());
    for t in &timings {
        println!("{:<18} {:>8.2} ms/decision  {:>6.1} s wall", t.policy.name(), t.mean_decision_ms, t.wall_seconds);
    }
    for p in &report.policies {
        println!("{:<18} final severity {:.3}", p.policy.name(), p.mean_final_severity);
    }
    Ok(())
}
