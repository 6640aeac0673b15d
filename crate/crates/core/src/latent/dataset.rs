use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mlp::read_u32;
use crate::config::Config;
use crate::env::{run_episode, BoundsTable};
use crate::error::{Error, Result};
use crate::protocols::RandomPolicy;
use crate::seeds;
use crate::sim::{slot, ObservedState, PatientProfile, VentilatorAction, ACTION_DIM, ACTION_NAMES, STATE_DIM};

/// `(s_t, a_t, s_{t+1})` from one episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionTriplet {
    pub episode: u32,
    pub s: ObservedState,
    pub a: VentilatorAction,
    pub s_next: ObservedState,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransitionDataset {
    pub triplets: Vec<TransitionTriplet>,
}

const DATASET_MAGIC: &[u8; 4] = b"VBDS";
const DATASET_VERSION: u32 = 1;

/// Runs the random policy over `cohort` `runs` times and collects every pair
/// of consecutive post-action states: `steps - 1` triplets per episode.
pub fn generate_dataset(
    config: &Config,
    bounds: &BoundsTable,
    cohort: &[PatientProfile],
    runs: usize,
    steps: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    let n = cohort.len();
    let episodes: Vec<Vec<TransitionTriplet>> = (0..runs * n)
        .into_par_iter()
        .map(|e| {
            let profile = &cohort[e % n];
            let mut policy = RandomPolicy::new();
            let ep_seed = seeds::derive(seed, seeds::STREAM_DATASET, e as u64);
            let traj = run_episode(config, bounds, &mut policy, profile, steps, ep_seed)?;
            Ok(traj
                .records
                .windows(2)
                .map(|w| TransitionTriplet {
                    episode: e as u32,
                    s: w[0].observation,
                    a: w[1].action,
                    s_next: w[1].observation,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(TransitionDataset {
        triplets: episodes.into_iter().flatten().collect(),
    })
}

impl TransitionDataset {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn episode_ids(&self) -> BTreeSet<u32> {
        self.triplets.iter().map(|t| t.episode).collect()
    }

    /// Splits by whole episode: a seeded shuffle of episode ids, the first
    /// `val_fraction` of which go to validation. Returns `(train, validation)`.
    pub fn split(&self, val_fraction: f64, seed: u64) -> (TransitionDataset, TransitionDataset) {
        let mut ids: Vec<u32> = self.episode_ids().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ids.shuffle(&mut rng);
        let mut n_val = (ids.len() as f64 * val_fraction).round() as usize;
        if ids.len() > 1 {
            n_val = n_val.clamp(1, ids.len() - 1);
        } else {
            n_val = 0;
        }
        let val: BTreeSet<u32> = ids[..n_val].iter().copied().collect();
        let (v, t): (Vec<_>, Vec<_>) = self.triplets.iter().partition(|x| val.contains(&x.episode));
        (
            TransitionDataset { triplets: t },
            TransitionDataset { triplets: v },
        )
    }

    fn header() -> Vec<String> {
        let mut h = vec!["episode".to_string()];
        h.extend(slot::NAMES.iter().map(|s| format!("s_{s}")));
        h.extend(ACTION_NAMES.iter().map(|s| format!("a_{s}")));
        h.extend(slot::NAMES.iter().map(|s| format!("next_{s}")));
        h
    }

    /// Header row, then one row per triplet: episode id, 27 state, 6 action,
    /// 27 next-state columns.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::header())?;
        for t in &self.triplets {
            let mut row = Vec::with_capacity(1 + 2 * STATE_DIM + ACTION_DIM);
            row.push(t.episode.to_string());
            row.extend(t.s.0.iter().map(|v| v.to_string()));
            row.extend(t.a.to_array().iter().map(|v| v.to_string()));
            row.extend(t.s_next.0.iter().map(|v| v.to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().collect::<Vec<_>>() != Self::header() {
            return Err(Error::Format("unexpected dataset CSV header".into()));
        }
        let mut triplets = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Format(e.to_string())))
                .collect::<Result<_>>()?;
            triplets.push(triplet_from_row(&vals)?);
        }
        Ok(Self { triplets })
    }

    /// Binary layout: 16-byte header (`VBDS`, version u32, triplet count u64),
    /// then per triplet the episode id (u32) and 60 little-endian f64 values
    /// (state, action, next state).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&(self.triplets.len() as u64).to_le_bytes())?;
        for t in &self.triplets {
            w.write_all(&t.episode.to_le_bytes())?;
            for v in t.s.0.iter().chain(t.a.to_array().iter()).chain(t.s_next.0.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a dataset file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(Error::SchemaVersion {
                expected: DATASET_VERSION,
                found: version,
            });
        }
        let mut nb = [0u8; 8];
        r.read_exact(&mut nb)?;
        let n = u64::from_le_bytes(nb) as usize;
        let mut triplets = Vec::with_capacity(n.min(1 << 20));
        let mut vals = vec![0.0; 1 + 2 * STATE_DIM + ACTION_DIM];
        for _ in 0..n {
            vals[0] = f64::from(read_u32(&mut r)?);
            for v in &mut vals[1..] {
                r.read_exact(&mut nb)?;
                *v = f64::from_le_bytes(nb);
            }
            triplets.push(triplet_from_row(&vals)?);
        }
        Ok(Self { triplets })
    }

    /// Writes CSV or binary depending on the extension (`.csv` or anything else).
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(f)
        } else {
            self.write_binary(f)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            Self::read_csv(f)
        } else {
            Self::read_binary(f)
        }
    }
}

fn triplet_from_row(vals: &[f64]) -> Result<TransitionTriplet> {
    if vals.len() != 1 + 2 * STATE_DIM + ACTION_DIM {
        return Err(Error::ShapeMismatch {
            expected: 1 + 2 * STATE_DIM + ACTION_DIM,
            got: vals.len(),
        });
    }
    let a_off = 1 + STATE_DIM;
    let n_off = a_off + ACTION_DIM;
    Ok(TransitionTriplet {
        episode: vals[0] as u32,
        s: ObservedState::from_slice(&vals[1..a_off])?,
        a: VentilatorAction::from_array(vals[a_off..n_off].try_into().expect("six values")),
        s_next: ObservedState::from_slice(&vals[n_off..])?,
    })
}
