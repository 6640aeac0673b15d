//! Embed-to-Control: an autoencoder compresses the 27-slot state into a
//! 6-dimensional latent, a small network advances the latent under an
//! action, and the decoder maps it back.
//!
//! ```text
//! s_{t+1} ≈ Dec(Dyn(Enc(s_t), a_t))
//! ```
//!
//! Training is two-stage: the autoencoder first, then the latent dynamics
//! with encoder and decoder frozen.

mod adam;
mod dataset;
mod mlp;
mod normalize;
mod train;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dataset::{generate_dataset, TransitionDataset, TransitionTriplet};
pub use mlp::{ForwardTrace, MlpWeights};
pub use normalize::NormalizationSpec;
pub use train::{
    latent_samples, persistence_mse, prediction_mse, reconstruction_mse, train_autoencoder,
    train_latent_dynamics, EpochLoss, LatentSample, TrainSchedule, TrainingLog,
};

use crate::control::{DynamicsModel, ModelKind};
use crate::env::Decision;
use crate::error::{Error, Result};
use crate::seeds;
use crate::sim::{ObservedState, VentilatorAction, ACTION_DIM, STATE_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatentParams {
    pub latent_dim: usize,
    pub encoder_hidden: usize,
    pub dynamics_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Initial value of every bias.
    pub bias_init: f64,
    pub val_fraction: f64,
    /// Passes of the random policy over the cohort when generating data.
    pub runs: usize,
    pub normalization: NormalizationSpec,
}

impl Default for LatentParams {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            latent_dim: 6,
            encoder_hidden: 16,
            dynamics_hidden: 8,
            epochs: 256,
            batch_size: 64,
            learning_rate: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.eps,
            bias_init: 0.6,
            val_fraction: 0.1,
            runs: 2,
            normalization: NormalizationSpec::default(),
        }
    }
}

impl LatentParams {
    pub fn encoder_sizes(&self) -> [usize; 3] {
        [STATE_DIM, self.encoder_hidden, self.latent_dim]
    }

    pub fn decoder_sizes(&self) -> [usize; 3] {
        [self.latent_dim, self.encoder_hidden, STATE_DIM]
    }

    pub fn dynamics_sizes(&self) -> [usize; 3] {
        [self.latent_dim + ACTION_DIM, self.dynamics_hidden, self.latent_dim]
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.epsilon,
            },
        }
    }
}

/// Encoder, decoder and latent dynamics plus the fixed normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct E2cModel {
    pub encoder: MlpWeights,
    pub decoder: MlpWeights,
    pub dynamics: MlpWeights,
    pub normalization: NormalizationSpec,
}

impl E2cModel {
    pub fn new(
        encoder: MlpWeights,
        decoder: MlpWeights,
        dynamics: MlpWeights,
        normalization: NormalizationSpec,
    ) -> Result<Self> {
        let latent = encoder.output_size();
        let check = |ok: bool, expected: usize, got: usize| {
            if ok {
                Ok(())
            } else {
                Err(Error::ShapeMismatch { expected, got })
            }
        };
        check(encoder.input_size() == STATE_DIM, STATE_DIM, encoder.input_size())?;
        check(decoder.input_size() == latent, latent, decoder.input_size())?;
        check(decoder.output_size() == STATE_DIM, STATE_DIM, decoder.output_size())?;
        check(
            dynamics.input_size() == latent + ACTION_DIM,
            latent + ACTION_DIM,
            dynamics.input_size(),
        )?;
        check(dynamics.output_size() == latent, latent, dynamics.output_size())?;
        normalization.validate()?;
        Ok(Self {
            encoder,
            decoder,
            dynamics,
            normalization,
        })
    }

    pub fn encode(&self, s: &ObservedState) -> Vec<f64> {
        self.encoder
            .forward(&self.normalization.normalize_state(s))
            .expect("encoder shape checked at construction")
    }

    /// Encode, decode, denormalize.
    pub fn reconstruct(&self, s: &ObservedState) -> ObservedState {
        let y = self.decoder.forward(&self.encode(s)).expect("decoder shape");
        self.normalization.denormalize_state(&y).expect("decoder output is 27 wide")
    }

    /// Predicted next state.
    pub fn learned_predict(&self, s: &ObservedState, a: &VentilatorAction) -> ObservedState {
        let mut input = self.encode(s);
        input.extend_from_slice(&self.normalization.normalize_action(a));
        let z_next = self.dynamics.forward(&input).expect("dynamics shape");
        let y = self.decoder.forward(&z_next).expect("decoder shape");
        self.normalization.denormalize_state(&y).expect("decoder output is 27 wide")
    }

    /// Writes `encoder.bin`, `decoder.bin`, `dynamics.bin` and
    /// `normalization.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, net) in [
            ("encoder.bin", &self.encoder),
            ("decoder.bin", &self.decoder),
            ("dynamics.bin", &self.dynamics),
        ] {
            net.write_to(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))?;
        }
        std::fs::write(
            dir.join("normalization.json"),
            serde_json::to_string_pretty(&self.normalization)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let open = |name: &str| -> Result<MlpWeights> {
            let path = dir.join(name);
            if !path.exists() {
                return Err(Error::MissingModel { path });
            }
            MlpWeights::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
        };
        let encoder = open("encoder.bin")?;
        let decoder = open("decoder.bin")?;
        let dynamics = open("dynamics.bin")?;
        let norm_path = dir.join("normalization.json");
        if !norm_path.exists() {
            return Err(Error::MissingModel { path: norm_path });
        }
        let normalization = serde_json::from_str(&std::fs::read_to_string(norm_path)?)?;
        Self::new(encoder, decoder, dynamics, normalization)
    }
}

impl DynamicsModel for E2cModel {
    type State = ObservedState;

    fn kind(&self) -> ModelKind {
        ModelKind::Learned
    }

    fn initial_state(&self, decision: &Decision<'_>) -> ObservedState {
        *decision.observation
    }

    fn predict(&self, state: &ObservedState, action: &VentilatorAction) -> ObservedState {
        self.learned_predict(state, action)
    }

    fn observe(&self, state: &ObservedState, _action: &VentilatorAction) -> ObservedState {
        *state
    }
}

/// Losses and held-out errors from a full two-stage fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_triplets: usize,
    pub val_triplets: usize,
    pub autoencoder: TrainingLog,
    pub dynamics: TrainingLog,
    /// Held-out reconstruction RMSE, normalized units.
    pub ae_val_rmse: f64,
    /// Held-out one-step prediction RMSE, normalized units.
    pub dynamics_val_rmse: f64,
    /// Held-out RMSE of predicting `s_{t+1} = s_t`.
    pub persistence_val_rmse: f64,
}

/// Splits the dataset by episode and runs both training stages.
pub fn train_e2c(data: &TransitionDataset, params: &LatentParams, seed: u64) -> Result<(E2cModel, TrainingReport)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let norm = &params.normalization;
    norm.validate()?;
    let (train, val) = data.split(params.val_fraction, seeds::derive(seed, seeds::STREAM_TRAINING, 0));
    let schedule = params.schedule();

    let mut init_rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::STREAM_TRAINING, 1));
    let encoder = MlpWeights::init_with_bias(&params.encoder_sizes(), params.bias_init, &mut init_rng);
    let decoder = MlpWeights::init_with_bias(&params.decoder_sizes(), params.bias_init, &mut init_rng);
    let dynamics = MlpWeights::init_with_bias(&params.dynamics_sizes(), params.bias_init, &mut init_rng);

    let states = |d: &TransitionDataset| -> Vec<Vec<f64>> {
        d.triplets.iter().map(|t| norm.normalize_state(&t.s).to_vec()).collect()
    };
    let (encoder, decoder, ae_log) = train_autoencoder(
        &states(&train),
        &states(&val),
        encoder,
        decoder,
        &schedule,
        seeds::derive(seed, seeds::STREAM_TRAINING, 2),
    )?;

    let train_l = latent_samples(&train, &encoder, norm)?;
    let val_l = latent_samples(&val, &encoder, norm)?;
    let (dynamics, dyn_log) = train_latent_dynamics(
        &train_l,
        &val_l,
        &decoder,
        dynamics,
        &schedule,
        seeds::derive(seed, seeds::STREAM_TRAINING, 3),
    )?;

    let report = TrainingReport {
        train_triplets: train.len(),
        val_triplets: val.len(),
        ae_val_rmse: ae_log.final_val_rmse(),
        dynamics_val_rmse: dyn_log.final_val_rmse(),
        persistence_val_rmse: persistence_mse(&val, norm).sqrt(),
        autoencoder: ae_log,
        dynamics: dyn_log,
    };
    Ok((E2cModel::new(encoder, decoder, dynamics, norm.clone())?, report))
}
