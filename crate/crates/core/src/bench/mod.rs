//! Cohorts, full benchmark runs over a set of policies, and their reports.

mod metrics;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{in_range_percentages, mean_ci, MarkerPercentages, RangeMarker};
pub use report::{BenchmarkReport, PolicyReport, PolicyTiming, REPORT_SCHEMA_VERSION};

use crate::config::Config;
use crate::control::{ExactModel, SamplingPolicy, Selection};
use crate::env::{run_episode, BoundsTable, Decision, EpisodeTrajectory, Policy};
use crate::error::{Error, Result};
use crate::latent::E2cModel;
use crate::protocols::{ArdsnetPolicy, MaxInterventionPolicy, RandomPolicy};
use crate::seeds;
use crate::sim::{PatientProfile, Sex, VentilatorAction, AGE_MAX, AGE_MIN, HEIGHT_MAX, HEIGHT_MIN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchParams {
    pub patients: usize,
    pub seed: u64,
    /// Mean and standard deviation of height (cm).
    pub male_height: [f64; 2],
    pub female_height: [f64; 2],
    pub severity_range: [f64; 2],
    /// Healthy tidal volume in mL per kg of predicted body weight.
    pub vt_range_per_kg: [f64; 2],
    pub sbp_range: [f64; 2],
    pub dbp_range: [f64; 2],
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            patients: 100,
            seed: 0,
            male_height: [175.0, 7.0],
            female_height: [162.0, 7.0],
            severity_range: [0.3, 0.9],
            vt_range_per_kg: [4.0, 8.0],
            sbp_range: [90.0, 140.0],
            dbp_range: [60.0, 90.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub seed: u64,
    pub patients: Vec<PatientProfile>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }
}

/// Even indices are male, odd indices female. Each patient is drawn from its
/// own seed, so a smaller cohort is a prefix of a larger one.
pub fn make_cohort(n: usize, seed: u64, params: &BenchParams) -> Result<Cohort> {
    if n % 2 != 0 {
        return Err(Error::InvalidInput(format!("cohort size must be even, got {n}")));
    }
    let [s_lo, s_hi] = params.severity_range;
    if !(0.0 <= s_lo && s_lo <= s_hi && s_hi <= 1.0) {
        return Err(Error::Config("bench.severity_range must lie within [0, 1]".into()));
    }
    let normal = |[mu, sd]: [f64; 2]| {
        Normal::new(mu, sd).map_err(|e| Error::Config(format!("height distribution: {e}")))
    };
    let male = normal(params.male_height)?;
    let female = normal(params.female_height)?;
    let patients = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::STREAM_COHORT, i as u64));
            let (sex, dist) = if i % 2 == 0 { (Sex::Male, &male) } else { (Sex::Female, &female) };
            let age = rng.random_range(AGE_MIN..=AGE_MAX);
            let height = dist.sample(&mut rng).clamp(HEIGHT_MIN, HEIGHT_MAX);
            let severity0 = if s_hi > s_lo { rng.random_range(s_lo..=s_hi) } else { s_lo };
            PatientProfile::new(sex, age, height, severity0)
        })
        .collect::<Result<_>>()?;
    Ok(Cohort { seed, patients })
}

/// The six benchmarked policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    MaxIntervention,
    Ardsnet,
    Smpc,
    E2cSmpc,
    E2cMppi,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Random,
        PolicyKind::MaxIntervention,
        PolicyKind::Ardsnet,
        PolicyKind::Smpc,
        PolicyKind::E2cSmpc,
        PolicyKind::E2cMppi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::MaxIntervention => "max_intervention",
            PolicyKind::Ardsnet => "ardsnet",
            PolicyKind::Smpc => "smpc",
            PolicyKind::E2cSmpc => "e2c_smpc",
            PolicyKind::E2cMppi => "e2c_mppi",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, PolicyKind::E2cSmpc | PolicyKind::E2cMppi)
    }

    /// Stable index used to derive episode seeds, independent of which
    /// subset of policies is run.
    fn seed_index(self) -> u64 {
        self as u64
    }

    /// Parses a comma-separated list; `all` expands to every policy.
    pub fn parse_list(s: &str) -> Result<Vec<PolicyKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Self::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::InvalidInput("no policies given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm || (norm == "maxint" && *k == PolicyKind::MaxIntervention))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown policy '{s}' (expected one of: {})",
                    Self::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

/// Instantiates a fresh policy. `parallel` controls rollout evaluation inside
/// the sampling controllers.
pub fn build_policy(
    kind: PolicyKind,
    config: &Config,
    bounds: &BoundsTable,
    model: Option<&E2cModel>,
    parallel: bool,
) -> Result<Box<dyn Policy>> {
    let c = &config.control;
    let fallback = (config.ardsnet.clone(), config.sim.clone());
    let learned = || {
        model.cloned().ok_or_else(|| {
            Error::InvalidInput(format!("policy '{kind}' needs a trained E2C model"))
        })
    };
    Ok(match kind {
        PolicyKind::Random => Box::new(RandomPolicy::new()),
        PolicyKind::MaxIntervention => {
            Box::new(MaxInterventionPolicy::new(config.ardsnet.clone(), config.sim.clone()))
        }
        PolicyKind::Ardsnet => Box::new(ArdsnetPolicy::new(config.ardsnet.clone(), config.sim.clone())),
        PolicyKind::Smpc => Box::new(SamplingPolicy::new(
            kind.name(),
            ExactModel::new(config.sim.clone(), config.env.dt_min),
            Selection::Argmax,
            c.k_exact,
            c.horizon,
            config.env.gamma,
            parallel,
            bounds.clone(),
            config.env.action_bounds(),
            fallback,
        )),
        PolicyKind::E2cSmpc => Box::new(SamplingPolicy::new(
            kind.name(),
            learned()?,
            Selection::Argmax,
            c.k_learned,
            c.horizon,
            config.env.gamma,
            parallel,
            bounds.clone(),
            config.env.action_bounds(),
            fallback,
        )),
        PolicyKind::E2cMppi => Box::new(SamplingPolicy::new(
            kind.name(),
            learned()?,
            Selection::Weighted { lambda: c.lambda },
            c.k_learned,
            c.horizon,
            config.env.gamma,
            parallel,
            bounds.clone(),
            config.env.action_bounds(),
            fallback,
        )),
    })
}

/// Wraps a policy and accumulates the wall time spent inside `act`.
pub struct TimedPolicy {
    inner: Box<dyn Policy>,
    pub elapsed: Duration,
    pub decisions: usize,
}

impl TimedPolicy {
    pub fn new(inner: Box<dyn Policy>) -> Self {
        Self {
            inner,
            elapsed: Duration::ZERO,
            decisions: 0,
        }
    }

    pub fn mean_latency(&self) -> Duration {
        if self.decisions == 0 {
            Duration::ZERO
        } else {
            self.elapsed / self.decisions as u32
        }
    }
}

impl Policy for TimedPolicy {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn reset(&mut self, profile: &PatientProfile, seed: u64) {
        self.inner.reset(profile, seed);
    }

    fn act(&mut self, decision: &Decision<'_>) -> Result<VentilatorAction> {
        let t0 = Instant::now();
        let a = self.inner.act(decision);
        self.elapsed += t0.elapsed();
        self.decisions += 1;
        a
    }
}

/// What to run. `parallel` fans episodes (and rollouts) out over threads;
/// results are identical either way.
#[derive(Clone, Debug)]
pub struct BenchmarkPlan {
    pub policies: Vec<PolicyKind>,
    pub steps: usize,
    pub seed: u64,
    pub parallel: bool,
}

/// Episode seed for `(policy, patient)`.
pub fn episode_seed(base: u64, kind: PolicyKind, patient: usize) -> u64 {
    seeds::derive(seeds::derive(base, seeds::STREAM_POLICY, kind.seed_index()), 0, patient as u64)
}

/// One policy on one patient.
pub fn run_patient(
    kind: PolicyKind,
    config: &Config,
    bounds: &BoundsTable,
    model: Option<&E2cModel>,
    profile: &PatientProfile,
    patient: usize,
    plan: &BenchmarkPlan,
) -> Result<(EpisodeTrajectory, Duration, usize)> {
    let mut policy = TimedPolicy::new(build_policy(kind, config, bounds, model, plan.parallel)?);
    let traj = run_episode(
        config,
        bounds,
        &mut policy,
        profile,
        plan.steps,
        episode_seed(plan.seed, kind, patient),
    )?;
    Ok((traj, policy.elapsed, policy.decisions))
}

/// Runs every `(policy, patient)` episode and aggregates the results.
/// Episodes are independent; aggregation follows `(policy, patient)` order so
/// parallel and serial runs give identical reports.
pub fn run_benchmark(
    plan: &BenchmarkPlan,
    cohort: &Cohort,
    config: &Config,
    model: Option<&E2cModel>,
) -> Result<(BenchmarkReport, Vec<PolicyTiming>)> {
    config.validate()?;
    if cohort.len() < 2 {
        return Err(Error::InvalidInput("benchmark needs at least 2 patients".into()));
    }
    if plan.policies.is_empty() {
        return Err(Error::InvalidInput("no policies requested".into()));
    }
    if let Some(k) = plan.policies.iter().find(|k| k.needs_model()) {
        if model.is_none() {
            return Err(Error::InvalidInput(format!("policy '{k}' needs a trained E2C model")));
        }
    }
    let bounds = config.bounds_table()?;
    let mut policies = Vec::with_capacity(plan.policies.len());
    let mut timings = Vec::with_capacity(plan.policies.len());
    for &kind in &plan.policies {
        let t0 = Instant::now();
        let job = |(i, p): (usize, &PatientProfile)| run_patient(kind, config, &bounds, model, p, i, plan);
        let episodes: Vec<(EpisodeTrajectory, Duration, usize)> = if plan.parallel {
            cohort.patients.par_iter().enumerate().map(job).collect::<Result<_>>()?
        } else {
            cohort.patients.iter().enumerate().map(job).collect::<Result<_>>()?
        };
        let trajs: Vec<EpisodeTrajectory> = episodes.iter().map(|e| e.0.clone()).collect();
        policies.push(PolicyReport::from_episodes(kind, &trajs, &bounds, &config.bench)?);
        let decision_time: Duration = episodes.iter().map(|e| e.1).sum();
        let decisions: usize = episodes.iter().map(|e| e.2).sum();
        timings.push(PolicyTiming {
            policy: kind,
            episodes: episodes.len(),
            decisions,
            wall_seconds: t0.elapsed().as_secs_f64(),
            mean_decision_ms: decision_time.as_secs_f64() * 1e3 / decisions.max(1) as f64,
        });
    }
    let report = BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: plan.seed,
        cohort_seed: cohort.seed,
        steps: plan.steps,
        dt_min: config.env.dt_min,
        cohort: cohort.patients.clone(),
        policies,
        config: config.clone(),
    };
    Ok((report, timings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cohort_is_balanced_and_in_range() {
        let c = make_cohort(100, 7, &BenchParams::default()).unwrap();
        assert_eq!(c.len(), 100);
        let males = c.patients.iter().filter(|p| p.sex == Sex::Male).count();
        assert_eq!(males, 50);
        for p in &c.patients {
            assert!((AGE_MIN..=AGE_MAX).contains(&p.age));
            assert!((0.3..=0.9).contains(&p.severity0));
            assert!((HEIGHT_MIN..=HEIGHT_MAX).contains(&p.height));
        }
    }

    #[test]
    fn cohort_is_deterministic_and_prefix_stable() {
        let params = BenchParams::default();
        let a = make_cohort(100, 3, &params).unwrap();
        let b = make_cohort(100, 3, &params).unwrap();
        assert_eq!(a, b);
        let small = make_cohort(20, 3, &params).unwrap();
        assert_eq!(small.patients[..], a.patients[..20]);
        assert_ne!(make_cohort(20, 4, &params).unwrap().patients, small.patients);
    }

    #[test]
    fn odd_cohort_rejected() {
        assert!(make_cohort(5, 0, &BenchParams::default()).is_err());
    }

    #[test]
    fn policy_names_roundtrip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert_eq!(PolicyKind::parse_list("all").unwrap(), PolicyKind::ALL.to_vec());
        assert_eq!(
            PolicyKind::parse_list("smpc, random,smpc").unwrap(),
            vec![PolicyKind::Random, PolicyKind::Smpc]
        );
        assert!(PolicyKind::parse_list("nope").is_err());
    }

    #[test]
    fn e2c_without_model_is_rejected() {
        let config = Config::default();
        let cohort = make_cohort(2, 0, &config.bench).unwrap();
        let plan = BenchmarkPlan {
            policies: vec![PolicyKind::E2cSmpc],
            steps: 2,
            seed: 0,
            parallel: false,
        };
        assert!(run_benchmark(&plan, &cohort, &config, None).is_err());
    }
}
