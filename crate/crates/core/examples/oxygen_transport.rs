//! Tabulates the gas-exchange pieces of the surrogate: saturation curve,
//! alveolar oxygen, shunt and the resulting arterial oxygen across PEEP.
//!
//! ```text
//! cargo run --example oxygen_transport -- [severity] [fio2]
//! ```

use ventbench::sim::{self, SimParams};

fn main() -> ventbench::Result<()> {
    let mut args = std::env::args().skip(1);
    let severity: f64 = args.next().map_or(0.6, |s| s.parse().expect("severity"));
    let fio2: f64 = args.next().map_or(0.6, |s| s.parse().expect("fio2"));
    let p = SimParams::default();

    println!("PaO2  SpO2");
    for pao2 in [20.0, 26.6, 40.0, 60.0, 80.0, 100.0, 150.0] {
        println!("{pao2:>5.1} {:.3}", sim::severinghaus(pao2)?);
    }

    let paco2 = 45.0;
    let alveolar = sim::alveolar_po2(&p, fio2, paco2);
    println!("\nFiO2 {fio2:.2}, PaCO2 {paco2}: alveolar PO2 {alveolar:.1} mmHg, pH {:.3}", sim::blood_ph(&p, paco2, p.hco3));
    println!("\n PEEP  shunt  PaO2   SpO2   (severity {severity:.2}, Pplat = PEEP + 10)");
    for peep in [5.0, 8.0, 10.0, 14.0, 18.0, 24.0] {
        let shunt = sim::shunt_fraction(&p, severity, peep, peep + 10.0);
        let pao2 = sim::mixed_pao2(&p, alveolar, shunt);
        println!("{peep:>5.0} {shunt:>6.3} {pao2:>6.1} {:>6.3}", sim::severinghaus(pao2)?);
    }
    Ok(())
}
