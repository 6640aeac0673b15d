//! The MDP: reward function, bounds tables and the episode loop.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::protocols::repair_action;
use crate::sim::{
    self, slot, ObservedState, PatientProfile, PhysioState, Sex, SimParams, VentilatorAction,
    ACTION_DIM, ACTION_NAMES, AGE_MAX, AGE_MIN,
};

/// Health markers scored by the state reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Marker {
    SpO2,
    PaO2,
    RR,
    IE,
    Pplat,
    PH,
    HR,
}

impl Marker {
    pub const ALL: [Marker; 7] = [
        Marker::SpO2,
        Marker::PaO2,
        Marker::RR,
        Marker::IE,
        Marker::Pplat,
        Marker::PH,
        Marker::HR,
    ];

    /// Observation slot the marker is read from.
    pub fn slot(self) -> usize {
        match self {
            Marker::SpO2 => slot::SPO2,
            Marker::PaO2 => slot::PAO2,
            Marker::RR => slot::AW_RR,
            Marker::IE => slot::IE,
            Marker::Pplat => slot::PPLAT,
            Marker::PH => slot::PH,
            Marker::HR => slot::HR,
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Marker::SpO2 => "SpO2",
            Marker::PaO2 => "PaO2",
            Marker::RR => "RR",
            Marker::IE => "I:E",
            Marker::Pplat => "Pplat",
            Marker::PH => "pH",
            Marker::HR => "HR",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerBounds {
    pub marker: Marker,
    pub r_in: f64,
    pub r_out: f64,
    pub lb: f64,
    pub ub: f64,
}

impl MarkerBounds {
    pub fn new(marker: Marker, [r_in, r_out, lb, ub]: [f64; 4]) -> Result<Self> {
        if !(lb < ub) || !(r_in > 0.0) || !(r_out >= 0.0) {
            return Err(Error::Config(format!(
                "bad bounds for {marker}: r_in={r_in} r_out={r_out} lb={lb} ub={ub}"
            )));
        }
        Ok(Self {
            marker,
            r_in,
            r_out,
            lb,
            ub,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lb <= x && x <= self.ub
    }

    pub fn reward(&self, x: f64) -> f64 {
        reward_marker(x, self.r_in, self.r_out, self.lb, self.ub)
    }
}

/// Piecewise-linear marker reward: `r_in` inside `[lb, ub]`, decreasing with
/// slope `r_out` outside.
pub fn reward_marker(x: f64, r_in: f64, r_out: f64, lb: f64, ub: f64) -> f64 {
    if x < lb {
        r_in - r_out * (lb - x)
    } else if x > ub {
        r_in - r_out * (x - ub)
    } else {
        r_in
    }
}

pub type PatientBounds = [MarkerBounds; 7];

pub fn reward_state(s: &ObservedState, bounds: &PatientBounds) -> f64 {
    bounds.iter().map(|b| b.reward(s.get(b.marker.slot()))).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub lb: [f64; ACTION_DIM],
    pub ub: [f64; ACTION_DIM],
    pub weights: [f64; ACTION_DIM],
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            lb: [0.0, 1.0, 0.1, 1.0, 1.0, 0.0],
            ub: [1.0, 30.0, 3.0, 30.0, 25.0, 1.0],
            weights: [0.25, 0.25, 0.0, 0.0, 0.25, 0.0],
        }
    }
}

impl ActionBounds {
    pub fn validate(&self) -> Result<()> {
        for i in 0..ACTION_DIM {
            if !(self.lb[i] < self.ub[i]) {
                return Err(Error::Config(format!(
                    "action bound {}: lb {} !< ub {}",
                    ACTION_NAMES[i], self.lb[i], self.ub[i]
                )));
            }
            if !(self.weights[i] >= 0.0) {
                return Err(Error::Config(format!(
                    "action weight {} is negative",
                    ACTION_NAMES[i]
                )));
            }
        }
        Ok(())
    }
}

/// Penalty on the normalized magnitude of each setting; always <= 0.
pub fn reward_action(a: &VentilatorAction, bounds: &ActionBounds) -> f64 {
    let a = a.to_array();
    -(0..ACTION_DIM)
        .map(|i| bounds.weights[i] * (a[i] - bounds.lb[i]) / (bounds.ub[i] - bounds.lb[i]))
        .sum::<f64>()
}

pub fn reward_total(
    s: &ObservedState,
    a: &VentilatorAction,
    bounds: &PatientBounds,
    action_bounds: &ActionBounds,
) -> f64 {
    reward_state(s, bounds) + reward_action(a, action_bounds)
}

/// Environment settings: episode protocol, reference marker table, action bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    pub dt_min: f64,
    pub steps: usize,
    pub gamma: f64,
    /// `[r_in, r_out, lb, ub]` for a 30-year-old female.
    pub spo2: [f64; 4],
    pub pao2: [f64; 4],
    pub rr: [f64; 4],
    pub ie: [f64; 4],
    pub pplat: [f64; 4],
    pub ph: [f64; 4],
    pub hr: [f64; 4],
    pub action_lb: [f64; ACTION_DIM],
    pub action_ub: [f64; ACTION_DIM],
    pub action_weights: [f64; ACTION_DIM],
}

impl Default for EnvParams {
    fn default() -> Self {
        let ab = ActionBounds::default();
        Self {
            dt_min: 30.0,
            steps: 96,
            gamma: 1.0,
            spo2: [0.5, 0.25, 88.0, 95.0],
            pao2: [0.5, 0.25, 75.0, 95.0],
            rr: [0.5, 0.25, 12.0, 18.0],
            ie: [1.0, 4.0, 0.3, 0.5],
            pplat: [1.0, 4.0, 0.0, 30.0],
            ph: [1.0, 1.0, 7.3, 7.45],
            hr: [1.0, 4.0, 74.0, 81.0],
            action_lb: ab.lb,
            action_ub: ab.ub,
            action_weights: ab.weights,
        }
    }
}

impl EnvParams {
    pub fn action_bounds(&self) -> ActionBounds {
        ActionBounds {
            lb: self.action_lb,
            ub: self.action_ub,
            weights: self.action_weights,
        }
    }

    pub fn reference_bounds(&self) -> Result<PatientBounds> {
        let rows = [
            self.spo2, self.pao2, self.rr, self.ie, self.pplat, self.ph, self.hr,
        ];
        let mut out = Vec::with_capacity(7);
        for (m, row) in Marker::ALL.into_iter().zip(rows) {
            out.push(MarkerBounds::new(m, row)?);
        }
        Ok(out.try_into().expect("seven markers"))
    }
}

/// Reference demographic for which the marker table is given verbatim.
pub const REFERENCE_SEX: Sex = Sex::Female;
pub const REFERENCE_AGE: u32 = 30;

/// Marker bounds per (sex, age). Every demographic uses the reference table
/// except heart rate, whose window moves with the age-dependent resting rate.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsTable {
    entries: BTreeMap<(Sex, u32), PatientBounds>,
}

impl BoundsTable {
    pub fn new(env: &EnvParams, sim: &SimParams) -> Result<Self> {
        let reference = env.reference_bounds()?;
        let ref_hr = sim.hr_baseline(REFERENCE_AGE);
        let mut entries = BTreeMap::new();
        for sex in [Sex::Male, Sex::Female] {
            for age in AGE_MIN..=AGE_MAX {
                let mut b = reference;
                if !(sex == REFERENCE_SEX && age == REFERENCE_AGE) {
                    let shift = sim.hr_baseline(age) - ref_hr;
                    let hr = &mut b[6];
                    hr.lb += shift;
                    hr.ub += shift;
                }
                entries.insert((sex, age), b);
            }
        }
        Ok(Self { entries })
    }

    pub fn resolve(&self, sex: Sex, age: u32) -> Result<&PatientBounds> {
        self.entries
            .get(&(sex, age))
            .ok_or_else(|| Error::MissingBounds {
                sex: sex.to_string(),
                age,
            })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// What a policy sees at a decision point.
#[derive(Clone, Copy, Debug)]
pub struct Decision<'a> {
    pub observation: &'a ObservedState,
    /// Hidden simulator state. Only the exact-model controller reads it, the
    /// way a full simulator can be cloned to roll out candidate futures.
    pub physio: &'a PhysioState,
    pub profile: &'a PatientProfile,
    pub step: usize,
}

pub trait Policy {
    fn name(&self) -> &str;

    /// Called once before each episode. All per-episode randomness derives from `seed`.
    fn reset(&mut self, profile: &PatientProfile, seed: u64);

    fn act(&mut self, decision: &Decision<'_>) -> Result<VentilatorAction>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub observation: ObservedState,
    pub action: VentilatorAction,
    pub reward: f64,
    pub physio: PhysioState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrajectory {
    pub profile: PatientProfile,
    pub initial_observation: ObservedState,
    pub records: Vec<StepRecord>,
}

impl EpisodeTrajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn discounted_reward(&self, gamma: f64) -> f64 {
        let mut acc = 0.0;
        let mut g = 1.0;
        for r in &self.records {
            acc += g * r.reward;
            g *= gamma;
        }
        acc
    }

    /// Observations `s_0 .. s_T` (T + 1 entries).
    pub fn observations(&self) -> impl Iterator<Item = &ObservedState> {
        std::iter::once(&self.initial_observation).chain(self.records.iter().map(|r| &r.observation))
    }

    /// One row per step: 27 state columns, 6 action columns, reward.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let header: Vec<String> = sim::slot::NAMES
            .iter()
            .map(|s| s.to_string())
            .chain(ACTION_NAMES.iter().map(|s| format!("a_{s}")))
            .chain(std::iter::once("reward".to_string()))
            .collect();
        wr.write_record(&header)?;
        for r in &self.records {
            let row: Vec<String> = r
                .observation
                .0
                .iter()
                .chain(r.action.to_array().iter())
                .chain(std::iter::once(&r.reward))
                .map(|v| v.to_string())
                .collect();
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            profile: self.profile,
            steps: self.len(),
            total_reward: self.total_reward(),
            final_severity: self.records.last().map_or(self.profile.severity0, |r| r.physio.severity),
        }
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        std::fs::write(json_path, serde_json::to_string_pretty(&self.summary())?)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub profile: PatientProfile,
    pub steps: usize,
    pub total_reward: f64,
    pub final_severity: f64,
}

/// One patient on one ventilator. Rewards are computed on the state that
/// results from the action.
pub struct Environment<'a> {
    config: &'a Config,
    bounds: PatientBounds,
    action_bounds: ActionBounds,
    physio: PhysioState,
    observation: ObservedState,
    horizon: usize,
    trajectory: EpisodeTrajectory,
}

impl<'a> Environment<'a> {
    pub fn new(
        config: &'a Config,
        bounds_table: &BoundsTable,
        profile: &PatientProfile,
        horizon: usize,
    ) -> Result<Self> {
        let physio = sim::derive_physiology(profile, &config.sim)?;
        let observation = sim::observe(&config.sim, &physio, &sim::INITIAL_ACTION);
        Ok(Self {
            config,
            bounds: *bounds_table.resolve(profile.sex, profile.age)?,
            action_bounds: config.env.action_bounds(),
            physio,
            observation,
            horizon,
            trajectory: EpisodeTrajectory {
                profile: *profile,
                initial_observation: observation,
                records: Vec::with_capacity(horizon),
            },
        })
    }

    pub fn observation(&self) -> &ObservedState {
        &self.observation
    }

    pub fn physio(&self) -> &PhysioState {
        &self.physio
    }

    pub fn bounds(&self) -> &PatientBounds {
        &self.bounds
    }

    pub fn steps_taken(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_finished(&self) -> bool {
        self.trajectory.len() >= self.horizon
    }

    pub fn step(&mut self, action: &VentilatorAction) -> Result<(ObservedState, f64)> {
        if self.is_finished() {
            return Err(Error::EpisodeFinished {
                steps: self.trajectory.len(),
            });
        }
        let action = repair_action(&action.to_array())?;
        let cfg = &self.config.sim;
        self.physio = sim::step(cfg, &self.physio, &action, self.config.env.dt_min);
        self.observation = sim::observe(cfg, &self.physio, &action);
        let reward = reward_total(&self.observation, &action, &self.bounds, &self.action_bounds);
        self.trajectory.records.push(StepRecord {
            observation: self.observation,
            action,
            reward,
            physio: self.physio,
        });
        Ok((self.observation, reward))
    }

    pub fn into_trajectory(self) -> EpisodeTrajectory {
        self.trajectory
    }
}

pub fn run_episode(
    config: &Config,
    bounds_table: &BoundsTable,
    policy: &mut dyn Policy,
    profile: &PatientProfile,
    steps: usize,
    seed: u64,
) -> Result<EpisodeTrajectory> {
    if steps == 0 {
        return Err(Error::InvalidInput("episode needs at least one step".into()));
    }
    let mut env = Environment::new(config, bounds_table, profile, steps)?;
    policy.reset(profile, seed);
    while !env.is_finished() {
        let action = {
            let decision = Decision {
                observation: env.observation(),
                physio: env.physio(),
                profile,
                step: env.steps_taken(),
            };
            policy.act(&decision)?
        };
        if !action.is_finite() {
            return Err(Error::NonFinite {
                context: format!(
                    "action from policy '{}' at step {}: {:?}",
                    policy.name(),
                    env.steps_taken(),
                    action
                ),
            });
        }
        env.step(&action)?;
    }
    Ok(env.into_trajectory())
}
