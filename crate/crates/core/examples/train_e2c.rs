//! Generates the random-policy transition dataset, trains the autoencoder and
//! latent dynamics, and saves the model.
//!
//! ```text
//! cargo run --release --example train_e2c -- [model-dir] [epochs] [config.toml]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use ventbench::bench::make_cohort;
use ventbench::latent::{generate_dataset, train_e2c};
use ventbench::Config;

fn main() -> ventbench::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "e2c_model".into()));
    let epochs = args.next();
    let mut config = match args.next() {
        Some(path) => Config::load(std::path::Path::new(&path))?,
        None => Config::default(),
    };
    if let Some(e) = epochs {
        config.latent.epochs = e.parse().expect("epochs");
    }

    let t0 = Instant::now();
    let cohort = make_cohort(config.bench.patients, config.bench.seed, &config.bench)?;
    let data = generate_dataset(
        &config,
        &config.bounds_table()?,
        &cohort.patients,
        config.latent.runs,
        config.env.steps,
        config.bench.seed,
    )?;
    println!("{} triplets in {:.1} s", data.len(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let (model, report) = train_e2c(&data, &config.latent, config.bench.seed)?;
    println!(
        "trained on {} / validated on {} triplets in {:.1} s",
        report.train_triplets,
        report.val_triplets,
        t1.elapsed().as_secs_f64()
    );
    println!("autoencoder validation RMSE   {:.4}", report.ae_val_rmse);
    println!("dynamics validation RMSE      {:.4}", report.dynamics_val_rmse);
    println!("persistence validation RMSE   {:.4}", report.persistence_val_rmse);

    model.save(&dir)?;
    std::fs::write(dir.join("autoencoder_loss.csv"), report.autoencoder.to_csv())?;
    std::fs::write(dir.join("dynamics_loss.csv"), report.dynamics.to_csv())?;
    println!("model written to {}", dir.display());
    Ok(())
}
