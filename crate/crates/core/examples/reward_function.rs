//! Prints the per-marker reward shape and the reward of a few hand-made states.
//!
//! ```text
//! cargo run --example reward_function -- [sex m|f] [age]
//! ```

use ventbench::env::{reward_action, reward_state, Marker};
use ventbench::sim::{slot, ObservedState, Sex, INITIAL_ACTION};
use ventbench::Config;

fn main() -> ventbench::Result<()> {
    let mut args = std::env::args().skip(1);
    let sex = match args.next().as_deref() {
        Some("m") => Sex::Male,
        _ => Sex::Female,
    };
    let age: u32 = args.next().map_or(30, |s| s.parse().expect("age"));

    let config = Config::default();
    let table = config.bounds_table()?;
    let bounds = table.resolve(sex, age)?;

    println!("{:<8} {:>6} {:>6} {:>8} {:>8}", "marker", "r_in", "r_out", "lb", "ub");
    for b in bounds.iter() {
        println!("{:<8} {:>6} {:>6} {:>8.2} {:>8.2}", b.marker.to_string(), b.r_in, b.r_out, b.lb, b.ub);
    }

    let ph = bounds.iter().find(|b| b.marker == Marker::PH).expect("pH bounds");
    println!("\npH sweep:");
    for i in 0..=12 {
        let x = 7.0 + 0.05 * i as f64;
        println!("  pH {x:.2} -> {:+.3}", ph.reward(x));
    }

    let mut s = ObservedState::zeros();
    for (i, v) in [
        (slot::SPO2, 92.0),
        (slot::PAO2, 85.0),
        (slot::AW_RR, 15.0),
        (slot::IE, 0.4),
        (slot::PPLAT, 22.0),
        (slot::PH, 7.4),
        (slot::HR, 78.0),
    ] {
        s.0[i] = v;
    }
    println!("\nall markers in range: {:.3}", reward_state(&s, bounds));
    s.0[slot::PH] = 7.2;
    println!("pH 7.20:             {:.3}", reward_state(&s, bounds));
    s.0[slot::PPLAT] = 34.0;
    println!("pH 7.20, Pplat 34:   {:.3}", reward_state(&s, bounds));
    println!(
        "action penalty of the initial setting: {:.3}",
        reward_action(&INITIAL_ACTION, &config.env.action_bounds())
    );
    Ok(())
}
