//! Sampling-based model predictive control and MPPI over an abstract
//! one-step dynamics model.
//!
//! Candidate action sequences are drawn serially from the policy's RNG, then
//! rolled out (optionally in parallel). Every reduction runs in sample-index
//! order so serial and parallel execution agree bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{reward_total, ActionBounds, BoundsTable, Decision, PatientBounds, Policy};
use crate::error::Result;
use crate::protocols::{
    ardsnet_policy, random_action, repair_action, ArdsnetParams, ArdsnetState,
};
use crate::sim::{self, ObservedState, PatientProfile, PhysioState, SimParams, VentilatorAction, ACTION_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Exact,
    Learned,
}

/// One-step transition model used to imagine futures.
pub trait DynamicsModel: Sync {
    /// Whatever the model needs to carry between steps.
    type State: Clone + Send + Sync;

    fn kind(&self) -> ModelKind;

    /// Model state at a decision point.
    fn initial_state(&self, decision: &Decision<'_>) -> Self::State;

    fn predict(&self, state: &Self::State, action: &VentilatorAction) -> Self::State;

    /// Observation the reward is evaluated on, after `action` produced `state`.
    fn observe(&self, state: &Self::State, action: &VentilatorAction) -> ObservedState;
}

/// The surrogate simulator itself: the hidden state is cloned and stepped.
#[derive(Clone, Debug)]
pub struct ExactModel {
    pub params: SimParams,
    pub dt_min: f64,
}

impl ExactModel {
    pub fn new(params: SimParams, dt_min: f64) -> Self {
        Self { params, dt_min }
    }
}

impl DynamicsModel for ExactModel {
    type State = PhysioState;

    fn kind(&self) -> ModelKind {
        ModelKind::Exact
    }

    fn initial_state(&self, decision: &Decision<'_>) -> PhysioState {
        *decision.physio
    }

    fn predict(&self, state: &PhysioState, action: &VentilatorAction) -> PhysioState {
        sim::step(&self.params, state, action, self.dt_min)
    }

    fn observe(&self, state: &PhysioState, action: &VentilatorAction) -> ObservedState {
        sim::observe(&self.params, state, action)
    }
}

/// Reward terms a rollout is scored with.
#[derive(Clone, Debug)]
pub struct RewardSpec {
    pub bounds: PatientBounds,
    pub action_bounds: ActionBounds,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionSequence(pub Vec<VentilatorAction>);

impl ActionSequence {
    pub fn first(&self) -> &VentilatorAction {
        &self.0[0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    pub total_reward: f64,
    pub states: Vec<ObservedState>,
}

/// `k` sequences of `h` uniformly random valid actions, drawn sequence by sequence.
pub fn sample_sequences<R: Rng + ?Sized>(k: usize, h: usize, rng: &mut R) -> Vec<ActionSequence> {
    (0..k)
        .map(|_| ActionSequence((0..h).map(|_| random_action(rng)).collect()))
        .collect()
}

/// Imagines the future under `seq`, summing the (discounted) reward of each
/// post-action state. A non-finite prediction scores `-inf`.
pub fn rollout<M: DynamicsModel>(
    model: &M,
    s0: &M::State,
    seq: &ActionSequence,
    reward: &RewardSpec,
) -> RolloutResult {
    let mut state = s0.clone();
    let mut total = 0.0;
    let mut discount = 1.0;
    let mut states = Vec::with_capacity(seq.len());
    for a in &seq.0 {
        state = model.predict(&state, a);
        let obs = model.observe(&state, a);
        if !obs.is_finite() {
            return RolloutResult {
                total_reward: f64::NEG_INFINITY,
                states,
            };
        }
        total += discount * reward_total(&obs, a, &reward.bounds, &reward.action_bounds);
        discount *= reward.gamma;
        states.push(obs);
    }
    RolloutResult {
        total_reward: total,
        states,
    }
}

/// Total reward of every sequence, in sample order.
pub fn evaluate_sequences<M: DynamicsModel>(
    model: &M,
    s0: &M::State,
    seqs: &[ActionSequence],
    reward: &RewardSpec,
    parallel: bool,
) -> Vec<f64> {
    if parallel {
        seqs.par_iter()
            .map(|q| rollout(model, s0, q, reward).total_reward)
            .collect()
    } else {
        seqs.iter()
            .map(|q| rollout(model, s0, q, reward).total_reward)
            .collect()
    }
}

/// Index of the highest finite reward; ties go to the lowest index.
pub fn argmax_reward(rewards: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &r) in rewards.iter().enumerate() {
        if !r.is_finite() {
            continue;
        }
        match best {
            Some(b) if rewards[b] >= r => {}
            _ => best = Some(i),
        }
    }
    best
}

/// MPPI weights `exp(lambda * (R_i - max R))`, normalized. `lambda` is an
/// inverse temperature: 0 gives uniform weights, `inf` puts all mass on the
/// best sample. Non-finite rewards get zero weight. `None` if no reward is finite.
pub fn mppi_weights(rewards: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let best = argmax_reward(rewards)?;
    let max = rewards[best];
    if lambda.is_infinite() {
        let mut w = vec![0.0; rewards.len()];
        w[best] = 1.0;
        return Some(w);
    }
    let mut w: Vec<f64> = rewards
        .iter()
        .map(|&r| {
            if r.is_finite() {
                (lambda * (r - max)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    Some(w)
}

/// Weighted combination of first actions, summed in sample order (unrepaired).
pub fn blend_first_actions(seqs: &[ActionSequence], weights: &[f64]) -> [f64; ACTION_DIM] {
    let mut out = [0.0; ACTION_DIM];
    for (q, &w) in seqs.iter().zip(weights) {
        let a = q.first().to_array();
        for i in 0..ACTION_DIM {
            out[i] += w * a[i];
        }
    }
    out
}

/// Samples, rolls out, and executes the first action of the best sequence.
/// `None` when every rollout diverged.
#[allow(clippy::too_many_arguments)]
pub fn smpc<M: DynamicsModel, R: Rng + ?Sized>(
    model: &M,
    s0: &M::State,
    k: usize,
    h: usize,
    rng: &mut R,
    reward: &RewardSpec,
    parallel: bool,
) -> Option<VentilatorAction> {
    let seqs = sample_sequences(k, h, rng);
    let rewards = evaluate_sequences(model, s0, &seqs, reward, parallel);
    argmax_reward(&rewards).map(|i| *seqs[i].first())
}

/// Reward-weighted average of all sampled first actions.
#[allow(clippy::too_many_arguments)]
pub fn mppi<M: DynamicsModel, R: Rng + ?Sized>(
    model: &M,
    s0: &M::State,
    k: usize,
    h: usize,
    lambda: f64,
    rng: &mut R,
    reward: &RewardSpec,
    parallel: bool,
) -> Option<VentilatorAction> {
    let seqs = sample_sequences(k, h, rng);
    let rewards = evaluate_sequences(model, s0, &seqs, reward, parallel);
    let w = mppi_weights(&rewards, lambda)?;
    Some(repair_action(&blend_first_actions(&seqs, &w)).expect("convex combination is finite"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    /// Samples per decision with the exact simulator.
    pub k_exact: usize,
    /// Samples per decision with the learned model.
    pub k_learned: usize,
    pub horizon: usize,
    /// MPPI inverse temperature.
    pub lambda: f64,
    pub parallel: bool,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            k_exact: 32,
            k_learned: 1024,
            horizon: 4,
            lambda: 2.0,
            parallel: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    Argmax,
    Weighted { lambda: f64 },
}

/// Receding-horizon controller: fresh samples every decision, first action
/// executed. Falls back to the ARDSnet action if every rollout diverges.
pub struct SamplingPolicy<M: DynamicsModel> {
    name: String,
    model: M,
    selection: Selection,
    k: usize,
    h: usize,
    gamma: f64,
    parallel: bool,
    bounds_table: BoundsTable,
    action_bounds: ActionBounds,
    fallback: (ArdsnetParams, SimParams),
    reward: Option<RewardSpec>,
    rng: ChaCha8Rng,
    fallbacks: usize,
}

impl<M: DynamicsModel> SamplingPolicy<M> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        model: M,
        selection: Selection,
        k: usize,
        h: usize,
        gamma: f64,
        parallel: bool,
        bounds_table: BoundsTable,
        action_bounds: ActionBounds,
        fallback: (ArdsnetParams, SimParams),
    ) -> Self {
        assert!(k >= 1 && h >= 1, "need at least one sample and one step");
        Self {
            name: name.into(),
            model,
            selection,
            k,
            h,
            gamma,
            parallel,
            bounds_table,
            action_bounds,
            fallback,
            reward: None,
            rng: ChaCha8Rng::seed_from_u64(0),
            fallbacks: 0,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Decisions that fell back to the protocol in the current episode.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }
}

impl<M: DynamicsModel> Policy for SamplingPolicy<M> {
    fn name(&self) -> &str {
        &self.name
    }

    fn reset(&mut self, profile: &PatientProfile, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.fallbacks = 0;
        self.reward = self
            .bounds_table
            .resolve(profile.sex, profile.age)
            .ok()
            .map(|b| RewardSpec {
                bounds: *b,
                action_bounds: self.action_bounds.clone(),
                gamma: self.gamma,
            });
    }

    fn act(&mut self, decision: &Decision<'_>) -> Result<VentilatorAction> {
        let reward = match &self.reward {
            Some(r) => r.clone(),
            None => {
                let b = self
                    .bounds_table
                    .resolve(decision.profile.sex, decision.profile.age)?;
                let r = RewardSpec {
                    bounds: *b,
                    action_bounds: self.action_bounds.clone(),
                    gamma: self.gamma,
                };
                self.reward = Some(r.clone());
                r
            }
        };
        let s0 = self.model.initial_state(decision);
        let chosen = match self.selection {
            Selection::Argmax => smpc(
                &self.model,
                &s0,
                self.k,
                self.h,
                &mut self.rng,
                &reward,
                self.parallel,
            ),
            Selection::Weighted { lambda } => mppi(
                &self.model,
                &s0,
                self.k,
                self.h,
                lambda,
                &mut self.rng,
                &reward,
                self.parallel,
            ),
        };
        Ok(match chosen {
            Some(a) => a,
            None => {
                self.fallbacks += 1;
                let (ap, sp) = &self.fallback;
                ardsnet_policy(
                    decision.observation,
                    decision.profile,
                    &ArdsnetState::initial(ap),
                    ap,
                    sp,
                )
                .0
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Sex;
    use crate::Config;
    use approx::assert_abs_diff_eq;

    struct Fixture {
        cfg: Config,
        profile: PatientProfile,
        physio: PhysioState,
        obs: ObservedState,
        reward: RewardSpec,
    }

    fn fixture() -> Fixture {
        let cfg = Config::default();
        let profile = PatientProfile::new(Sex::Female, 30, 162.0, 0.6).unwrap();
        let physio = sim::derive_physiology(&profile, &cfg.sim).unwrap();
        let obs = sim::observe(&cfg.sim, &physio, &sim::INITIAL_ACTION);
        let reward = RewardSpec {
            bounds: *cfg.bounds_table().unwrap().resolve(Sex::Female, 30).unwrap(),
            action_bounds: cfg.env.action_bounds(),
            gamma: 1.0,
        };
        Fixture {
            cfg,
            profile,
            physio,
            obs,
            reward,
        }
    }

    /// A model whose predictions always blow up.
    struct Diverging;

    impl DynamicsModel for Diverging {
        type State = ();
        fn kind(&self) -> ModelKind {
            ModelKind::Learned
        }
        fn initial_state(&self, _: &Decision<'_>) {}
        fn predict(&self, _: &(), _: &VentilatorAction) {}
        fn observe(&self, _: &(), _: &VentilatorAction) -> ObservedState {
            ObservedState([f64::NAN; sim::STATE_DIM])
        }
    }

    #[test]
    fn argmax_prefers_lowest_index_and_skips_non_finite() {
        assert_eq!(argmax_reward(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax_reward(&[f64::NAN, f64::NEG_INFINITY, -5.0]), Some(2));
        assert_eq!(argmax_reward(&[f64::NAN]), None);
        assert_eq!(argmax_reward(&[]), None);
    }

    #[test]
    fn mppi_weight_limits() {
        let r = [1.0, 2.0, 0.5, f64::NEG_INFINITY];
        let uniform = mppi_weights(&r, 0.0).unwrap();
        assert_eq!(&uniform[..3], &[1.0 / 3.0; 3]);
        assert_eq!(uniform[3], 0.0);
        assert_eq!(mppi_weights(&r, f64::INFINITY).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        let w = mppi_weights(&r, 2.0).unwrap();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[0] / w[1], (-2.0f64).exp(), epsilon = 1e-12);
        assert!(mppi_weights(&[f64::NAN], 1.0).is_none());
    }

    #[test]
    fn mppi_survives_huge_reward_gaps() {
        let w = mppi_weights(&[-1e6, 0.0, -3e5], 1e6).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn single_sample_returns_its_first_action() {
        let f = fixture();
        let model = ExactModel::new(f.cfg.sim.clone(), 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = smpc(&model, &f.physio, 1, 4, &mut rng, &f.reward, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seqs = sample_sequences(1, 4, &mut rng);
        assert_eq!(a, *seqs[0].first());
    }

    #[test]
    fn smpc_picks_the_best_rollout() {
        let f = fixture();
        let model = ExactModel::new(f.cfg.sim.clone(), 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seqs = sample_sequences(16, 3, &mut rng);
        let rewards = evaluate_sequences(&model, &f.physio, &seqs, &f.reward, false);
        let best = argmax_reward(&rewards).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = smpc(&model, &f.physio, 16, 3, &mut rng, &f.reward, false).unwrap();
        assert_eq!(a, *seqs[best].first());
        let direct = rollout(&model, &f.physio, &seqs[best], &f.reward);
        assert_eq!(direct.total_reward, rewards[best]);
        assert_eq!(direct.states.len(), 3);
    }

    #[test]
    fn serial_and_parallel_rollouts_agree() {
        let f = fixture();
        let model = ExactModel::new(f.cfg.sim.clone(), 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seqs = sample_sequences(64, 4, &mut rng);
        assert_eq!(
            evaluate_sequences(&model, &f.physio, &seqs, &f.reward, false),
            evaluate_sequences(&model, &f.physio, &seqs, &f.reward, true)
        );
    }

    #[test]
    fn discount_weights_later_steps() {
        let f = fixture();
        let model = ExactModel::new(f.cfg.sim.clone(), 30.0);
        let seq = ActionSequence(vec![sim::INITIAL_ACTION; 3]);
        let undiscounted = rollout(&model, &f.physio, &seq, &f.reward);
        let half = RewardSpec {
            gamma: 0.5,
            ..f.reward.clone()
        };
        let discounted = rollout(&model, &f.physio, &seq, &half);
        let ab = &f.reward.action_bounds;
        let r: Vec<f64> = undiscounted
            .states
            .iter()
            .map(|s| reward_total(s, &seq.0[0], &f.reward.bounds, ab))
            .collect();
        assert_abs_diff_eq!(discounted.total_reward, r[0] + 0.5 * r[1] + 0.25 * r[2], epsilon = 1e-12);
    }

    #[test]
    fn diverging_model_falls_back_to_protocol() {
        let f = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(smpc(&Diverging, &(), 8, 2, &mut rng, &f.reward, false).is_none());
        assert!(mppi(&Diverging, &(), 8, 2, 2.0, &mut rng, &f.reward, false).is_none());

        let mut pol = SamplingPolicy::new(
            "diverging",
            Diverging,
            Selection::Argmax,
            8,
            2,
            1.0,
            false,
            f.cfg.bounds_table().unwrap(),
            f.cfg.env.action_bounds(),
            (f.cfg.ardsnet.clone(), f.cfg.sim.clone()),
        );
        pol.reset(&f.profile, 0);
        let decision = Decision {
            observation: &f.obs,
            physio: &f.physio,
            profile: &f.profile,
            step: 0,
        };
        let a = pol.act(&decision).unwrap();
        let expected = ardsnet_policy(
            &f.obs,
            &f.profile,
            &ArdsnetState::initial(&f.cfg.ardsnet),
            &f.cfg.ardsnet,
            &f.cfg.sim,
        )
        .0;
        assert_eq!(a, expected);
        assert_eq!(pol.fallbacks(), 1);
    }

    #[test]
    fn sampling_policy_is_reproducible() {
        let f = fixture();
        let make = || {
            SamplingPolicy::new(
                "smpc",
                ExactModel::new(f.cfg.sim.clone(), 30.0),
                Selection::Weighted { lambda: 2.0 },
                16,
                2,
                1.0,
                true,
                f.cfg.bounds_table().unwrap(),
                f.cfg.env.action_bounds(),
                (f.cfg.ardsnet.clone(), f.cfg.sim.clone()),
            )
        };
        let decision = Decision {
            observation: &f.obs,
            physio: &f.physio,
            profile: &f.profile,
            step: 0,
        };
        let (mut p, mut q) = (make(), make());
        p.reset(&f.profile, 42);
        q.reset(&f.profile, 42);
        assert_eq!(p.act(&decision).unwrap(), q.act(&decision).unwrap());
        assert_eq!(p.model().kind(), ModelKind::Exact);
    }
}
