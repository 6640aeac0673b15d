//! Non-sampling baselines: uniformly random settings, maximum intervention,
//! and the rules-based ARDSnet protocol.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionBounds, Decision, Policy};
use crate::error::{Error, Result};
pub use crate::sim::pbw;
use crate::sim::{
    slot, ObservedState, PatientProfile, SimParams, VentilatorAction, ACTION_DIM, ACTION_NAMES,
};

/// Makes any finite 6-vector a physically consistent action: clamps to the
/// action box, lowers PEEP below the inspiratory pressure and shortens an
/// inspiratory time that would not fit in the breath period. Idempotent.
pub fn repair_action(raw: &[f64; ACTION_DIM]) -> Result<VentilatorAction> {
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("action component {}", ACTION_NAMES[i]),
        });
    }
    let bounds = ActionBounds::default();
    let mut a = [0.0; ACTION_DIM];
    for i in 0..ACTION_DIM {
        a[i] = raw[i].clamp(bounds.lb[i], bounds.ub[i]);
    }
    let mut a = VentilatorAction::from_array(a);
    if a.peep >= a.pinsp {
        let peep_lb = bounds.lb[4];
        if a.pinsp - 1.0 >= peep_lb {
            a.peep = a.pinsp - 1.0;
        } else {
            a.peep = peep_lb;
            a.pinsp = peep_lb + 1.0;
        }
    }
    if a.tinsp >= a.period() {
        a.tinsp = 0.9 * a.period();
    }
    Ok(a)
}

/// Independent uniform draws over the action box, then repaired.
pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> VentilatorAction {
    let b = ActionBounds::default();
    let mut raw = [0.0; ACTION_DIM];
    for (i, v) in raw.iter_mut().enumerate() {
        *v = rng.random_range(b.lb[i]..b.ub[i]);
    }
    repair_action(&raw).expect("uniform draws are finite")
}

/// Lower-PEEP/higher-FiO2 ladder, ordered by increasing intervention.
pub const ARDSNET_LADDER: [[f64; 2]; 17] = [
    [0.3, 5.0],
    [0.4, 5.0],
    [0.4, 8.0],
    [0.5, 8.0],
    [0.5, 10.0],
    [0.6, 10.0],
    [0.7, 10.0],
    [0.7, 12.0],
    [0.7, 14.0],
    [0.8, 14.0],
    [0.9, 14.0],
    [0.9, 16.0],
    [0.9, 18.0],
    [1.0, 18.0],
    [1.0, 20.0],
    [1.0, 22.0],
    [1.0, 24.0],
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeepFio2Row {
    pub fio2: f64,
    pub peep: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArdsnetParams {
    /// `[fio2, peep]` rows.
    pub ladder: Vec<[f64; 2]>,
    pub initial_row: usize,
    pub vt_initial: f64,
    pub vt_min: f64,
    pub vt_step: f64,
    pub rr_step: f64,
    /// Minute ventilation the initial rate aims for, L/min per kg PBW.
    pub minute_vent_per_kg: f64,
    pub ph_low: f64,
    pub ph_high: f64,
    pub pplat_high: f64,
    pub pplat_low: f64,
    pub pao2_range: [f64; 2],
    pub spo2_range: [f64; 2],
    pub ie_target: f64,
    pub slope: f64,

    // Maximum intervention
    pub max_vt: f64,
    pub max_fio2: f64,
    pub max_peep_range: [f64; 2],
    /// PBW range mapped linearly onto `max_peep_range`.
    pub max_pbw_range: [f64; 2],
    pub max_rr: f64,
    pub max_tinsp: f64,
}

impl Default for ArdsnetParams {
    fn default() -> Self {
        Self {
            ladder: ARDSNET_LADDER.to_vec(),
            initial_row: 1,
            vt_initial: 6.0,
            vt_min: 4.0,
            vt_step: 1.0,
            rr_step: 2.0,
            minute_vent_per_kg: 0.1,
            ph_low: 7.30,
            ph_high: 7.45,
            pplat_high: 30.0,
            pplat_low: 25.0,
            pao2_range: [55.0, 80.0],
            spo2_range: [88.0, 95.0],
            ie_target: 0.4,
            slope: 0.5,
            max_vt: 8.0,
            max_fio2: 1.0,
            max_peep_range: [18.0, 24.0],
            max_pbw_range: [40.0, 90.0],
            max_rr: 30.0,
            max_tinsp: 1.0,
        }
    }
}

impl ArdsnetParams {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::Config("ARDSnet ladder is empty".into()));
        }
        for w in self.ladder.windows(2) {
            if w[1][0] < w[0][0] || w[1][1] < w[0][1] {
                return Err(Error::Config(
                    "ARDSnet ladder rows must not decrease in FiO2 or PEEP".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Row of the PEEP/FiO2 ladder, index clamped to the table.
pub fn peep_fio2_lookup(params: &ArdsnetParams, row: usize) -> PeepFio2Row {
    let [fio2, peep] = params.ladder[row.min(params.ladder.len() - 1)];
    PeepFio2Row { fio2, peep }
}

/// Pressure above PEEP that delivers `vt_ml` in `tinsp` seconds on an RC lung.
fn driving_pressure_for(vt_ml: f64, c_stat: f64, r_aw: f64, tinsp: f64) -> f64 {
    let tau = r_aw * c_stat * 1e-3;
    vt_ml / (c_stat * (1.0 - (-tinsp / tau).exp()))
}

/// Fixed aggressive settings: 100% oxygen, high PEEP, maximal tidal volume
/// and rate. The same action is used for the whole episode.
pub fn max_intervention(
    profile: &PatientProfile,
    params: &ArdsnetParams,
    sim: &SimParams,
) -> VentilatorAction {
    let pbw_kg = profile.pbw();
    let [plo, phi] = params.max_peep_range;
    let [wlo, whi] = params.max_pbw_range;
    let frac = ((pbw_kg - wlo) / (whi - wlo)).clamp(0.0, 1.0);
    let peep = plo + (phi - plo) * frac;
    let c_nominal = sim.compliance_per_kg * pbw_kg;
    let dp = driving_pressure_for(params.max_vt * pbw_kg, c_nominal, sim.r_aw, params.max_tinsp);
    let raw = [
        params.max_fio2,
        peep + dp,
        params.max_tinsp,
        params.max_rr,
        peep,
        params.slope,
    ];
    repair_action(&raw).expect("finite settings")
}

/// Memory carried by the ARDSnet protocol between decisions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArdsnetState {
    pub row: usize,
    /// Target tidal volume, mL/kg PBW.
    pub vt_per_kg: f64,
    /// Rate set at the previous decision.
    pub rr: Option<f64>,
}

impl ArdsnetState {
    pub fn initial(params: &ArdsnetParams) -> Self {
        Self {
            row: params.initial_row.min(params.ladder.len() - 1),
            vt_per_kg: params.vt_initial,
            rr: None,
        }
    }
}

/// One decision of the ARDSnet protocol.
pub fn ardsnet_policy(
    s: &ObservedState,
    profile: &PatientProfile,
    memory: &ArdsnetState,
    params: &ArdsnetParams,
    sim: &SimParams,
) -> (VentilatorAction, ArdsnetState) {
    let pbw_kg = profile.pbw();
    let mut next = *memory;

    // Plateau-pressure limit on tidal volume.
    let pplat = s.get(slot::PPLAT);
    if pplat >= params.pplat_high {
        next.vt_per_kg = (next.vt_per_kg - params.vt_step).max(params.vt_min);
    } else if pplat < params.pplat_low && next.vt_per_kg < params.vt_initial {
        next.vt_per_kg = (next.vt_per_kg + params.vt_step).min(params.vt_initial);
    }

    // Rate: preserve minute ventilation across tidal-volume changes, then
    // compensate for pH.
    let mut rr = match memory.rr {
        None => params.minute_vent_per_kg * 1000.0 / next.vt_per_kg,
        Some(prev) => prev * memory.vt_per_kg / next.vt_per_kg,
    };
    let ph = s.get(slot::PH);
    if ph < params.ph_low {
        rr += params.rr_step;
    } else if ph > params.ph_high {
        rr -= params.rr_step;
    }
    let rr = rr.clamp(1.0, 30.0);
    next.rr = Some(rr);

    // Oxygenation: one ladder row per decision.
    let pao2 = s.get(slot::PAO2);
    let spo2 = s.get(slot::SPO2);
    let below = pao2 < params.pao2_range[0] || spo2 < params.spo2_range[0];
    let above = pao2 > params.pao2_range[1] && spo2 > params.spo2_range[1];
    if below {
        next.row = (next.row + 1).min(params.ladder.len() - 1);
    } else if above {
        next.row = next.row.saturating_sub(1);
    }
    let PeepFio2Row { fio2, peep } = peep_fio2_lookup(params, next.row);

    let period = 60.0 / rr;
    let tinsp = period * params.ie_target / (1.0 + params.ie_target);
    let c_stat = s.get(slot::C_STAT).max(1.0);
    let dp = driving_pressure_for(next.vt_per_kg * pbw_kg, c_stat, sim.r_aw, tinsp);
    let raw = [fio2, peep + dp, tinsp, rr, peep, params.slope];
    (repair_action(&raw).expect("finite settings"), next)
}

pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new() -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Default for RandomPolicy {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn reset(&mut self, _profile: &PatientProfile, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn act(&mut self, _decision: &Decision<'_>) -> Result<VentilatorAction> {
        Ok(random_action(&mut self.rng))
    }
}

pub struct MaxInterventionPolicy {
    params: ArdsnetParams,
    sim: SimParams,
    action: Option<VentilatorAction>,
}

impl MaxInterventionPolicy {
    pub fn new(params: ArdsnetParams, sim: SimParams) -> Self {
        Self {
            params,
            sim,
            action: None,
        }
    }
}

impl Policy for MaxInterventionPolicy {
    fn name(&self) -> &str {
        "max_intervention"
    }

    fn reset(&mut self, profile: &PatientProfile, _seed: u64) {
        self.action = Some(max_intervention(profile, &self.params, &self.sim));
    }

    fn act(&mut self, decision: &Decision<'_>) -> Result<VentilatorAction> {
        Ok(*self
            .action
            .get_or_insert_with(|| max_intervention(decision.profile, &self.params, &self.sim)))
    }
}

pub struct ArdsnetPolicy {
    params: ArdsnetParams,
    sim: SimParams,
    memory: ArdsnetState,
}

impl ArdsnetPolicy {
    pub fn new(params: ArdsnetParams, sim: SimParams) -> Self {
        let memory = ArdsnetState::initial(&params);
        Self {
            params,
            sim,
            memory,
        }
    }

    pub fn memory(&self) -> &ArdsnetState {
        &self.memory
    }
}

impl Policy for ArdsnetPolicy {
    fn name(&self) -> &str {
        "ardsnet"
    }

    fn reset(&mut self, _profile: &PatientProfile, _seed: u64) {
        self.memory = ArdsnetState::initial(&self.params);
    }

    fn act(&mut self, decision: &Decision<'_>) -> Result<VentilatorAction> {
        let (a, m) = ardsnet_policy(
            decision.observation,
            decision.profile,
            &self.memory,
            &self.params,
            &self.sim,
        );
        self.memory = m;
        Ok(a)
    }
}
