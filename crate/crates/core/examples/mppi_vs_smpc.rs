//! One decision for one patient: SMPC next to MPPI at a range of inverse
//! temperatures, all scoring the same candidate set.
//!
//! ```text
//! cargo run --release --example mppi_vs_smpc -- [K] [H] [seed]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ventbench::control::{mppi, smpc, ExactModel, RewardSpec};
use ventbench::sim::{self, PatientProfile, Sex, VentilatorAction};
use ventbench::Config;

fn show(label: &str, a: &VentilatorAction) {
    println!(
        "{label:<14} fio2 {:.3}  pinsp {:5.2}  tinsp {:.3}  rr {:5.2}  peep {:5.2}  slope {:.3}",
        a.fio2, a.pinsp, a.tinsp, a.rr, a.peep, a.slope
    );
}

fn main() -> ventbench::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map_or(64, |s| s.parse().expect("K"));
    let h: usize = args.next().map_or(4, |s| s.parse().expect("H"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let config = Config::default();
    let profile = PatientProfile::new(Sex::Male, 45, 178.0, 0.7)?;
    let state = sim::derive_physiology(&profile, &config.sim)?;
    let model = ExactModel::new(config.sim.clone(), config.env.dt_min);
    let reward = RewardSpec {
        bounds: *config.bounds_table()?.resolve(profile.sex, profile.age)?,
        action_bounds: config.env.action_bounds(),
        gamma: config.env.gamma,
    };

    // Re-seeding per call gives every controller the same K sequences.
    let rng = || ChaCha8Rng::seed_from_u64(seed);
    let best = smpc(&model, &state, k, h, &mut rng(), &reward, true).expect("finite rollouts");
    show("smpc", &best);
    for lambda in [0.0, 0.1, 1.0, 2.0, 10.0, 100.0, 1e6] {
        let a = mppi(&model, &state, k, h, lambda, &mut rng(), &reward, true).expect("finite rollouts");
        let dist = best
            .to_array()
            .iter()
            .zip(a.to_array())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        show(&format!("mppi l={lambda:e}"), &a);
        println!("{:<14} max |mppi - smpc| = {dist:.4}", "");
    }
    Ok(())
}
