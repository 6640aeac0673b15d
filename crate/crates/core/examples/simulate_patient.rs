//! Steps one patient through an episode under the ARDSnet protocol and prints
//! the markers the reward looks at.
//!
//! ```text
//! cargo run --release --example simulate_patient -- [policy] [severity] [steps] [config.toml]
//! ```

use ventbench::bench::{build_policy, PolicyKind};
use ventbench::env::run_episode;
use ventbench::sim::{slot, PatientProfile, Sex};
use ventbench::Config;

fn main() -> ventbench::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: PolicyKind = args.next().as_deref().unwrap_or("ardsnet").parse()?;
    let severity: f64 = args.next().map_or(0.6, |s| s.parse().expect("severity"));
    let steps: usize = args.next().map_or(96, |s| s.parse().expect("steps"));

    let config = match args.next() {
        Some(path) => Config::load(std::path::Path::new(&path))?,
        None => Config::default(),
    };
    let bounds = config.bounds_table()?;
    let profile = PatientProfile::new(Sex::Female, 30, 162.0, severity)?;
    let mut policy = build_policy(kind, &config, &bounds, None, false)?;
    let traj = run_episode(&config, &bounds, policy.as_mut(), &profile, steps, 0)?;

    println!(
        "{:>4} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>8}",
        "t", "sev", "fio2", "pinsp", "peep", "rr", "SpO2", "PaO2", "PaCO2", "pH", "Pplat", "VT", "HR", "reward"
    );
    for (t, r) in traj.records.iter().enumerate() {
        let s = &r.observation.0;
        println!(
            "{:>4} {:>6.3} {:>6.2} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.3} {:>6.1} {:>6.0} {:>6.1} {:>8.2}",
            t + 1,
            r.physio.severity,
            r.action.fio2,
            r.action.pinsp,
            r.action.peep,
            r.action.rr,
            s[slot::SPO2],
            s[slot::PAO2],
            s[slot::PACO2],
            s[slot::PH],
            s[slot::PPLAT],
            s[slot::VT],
            s[slot::HR],
            r.reward
        );
    }
    println!("total reward {:.2}", traj.total_reward());
    Ok(())
}
