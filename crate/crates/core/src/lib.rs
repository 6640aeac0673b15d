//! Ventilator management for ARDS as a Markov decision process.
//!
//! - [`sim`]: surrogate respiratory physiology (hidden state, 27-slot observation)
//! - [`env`]: reward function, bounds tables, episode loop
//! - [`protocols`]: random, maximum-intervention and ARDSnet baselines
//! - [`control`]: sampling-based MPC and MPPI over a pluggable dynamics model
//! - [`latent`]: Embed-to-Control autoencoder and latent dynamics, trained with Adam
//! - [`bench`]: cohorts, benchmark runs, metrics and reports

pub mod bench;
pub mod config;
pub mod control;
pub mod env;
pub mod error;
pub mod latent;
pub mod protocols;
pub mod seeds;
pub mod sim;

pub use config::Config;
pub use error::{Error, Result};
