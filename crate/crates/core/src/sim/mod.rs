//! Surrogate respiratory physiology.
//!
//! A lumped-parameter stand-in for a full physiology engine: single-compartment
//! RC lung mechanics under pressure control, an alveolar-gas/shunt model for
//! oxygenation, alveolar ventilation for CO2, linear hemodynamic responses and
//! a threshold model of lung injury and recovery. Everything here is a pure
//! function of its arguments.

mod params;
mod types;

pub use params::{OxygenMixing, SimParams};
pub use types::{
    pbw, slot, MechanicsOutputs, ObservedState, PatientProfile, PhysioState, Sex,
    VentilatorAction, ACTION_DIM, ACTION_NAMES, AGE_MAX, AGE_MIN, HEIGHT_MAX, HEIGHT_MIN,
    STATE_DIM,
};

use crate::error::{Error, Result};

/// Settings the patient is on when the episode starts (before the first decision).
pub const INITIAL_ACTION: VentilatorAction = VentilatorAction {
    fio2: 0.4,
    pinsp: 20.0,
    tinsp: 1.0,
    rr: 15.0,
    peep: 5.0,
    slope: 0.5,
};

/// Static compliance (mL/cmH2O) at a given severity.
pub fn static_compliance(params: &SimParams, pbw_kg: f64, severity: f64) -> f64 {
    params.compliance_per_kg * pbw_kg * (1.0 - params.compliance_loss * severity)
}

/// Airway resistance (cmH2O·s/L) at a given severity.
pub fn airway_resistance(params: &SimParams, severity: f64) -> f64 {
    params.r_aw + params.r_aw_severity * severity
}

/// Initial hidden state for an untreated patient.
pub fn derive_physiology(profile: &PatientProfile, params: &SimParams) -> Result<PhysioState> {
    profile.validate()?;
    let sigma = profile.severity0;
    let pao2 = params.healthy_pao2 - params.pao2_severity_drop * sigma;
    let paco2 = params.healthy_paco2 + params.paco2_severity_rise * sigma;
    let hco3 = params.hco3;
    let spo2 = saturation(pao2);
    let ph = blood_ph(params, paco2, hco3);
    let (hr, sbp, dbp) = vital_targets(params, profile.age, INITIAL_ACTION.peep, spo2, ph);
    let pbw_kg = profile.pbw();
    let mech = lung_mechanics(
        &INITIAL_ACTION,
        static_compliance(params, pbw_kg, sigma),
        airway_resistance(params, sigma),
        pbw_kg,
        params,
    );
    Ok(PhysioState {
        profile: *profile,
        severity: sigma,
        paco2,
        pao2,
        hco3,
        hr,
        sbp,
        dbp,
        temp: params.temperature,
        last_mech: mech,
    })
}

/// First-order pressure-controlled breath.
///
/// `c_stat` in mL/cmH2O, `r_aw` in cmH2O·s/L, `pbw_kg` in kg.
pub fn lung_mechanics(
    action: &VentilatorAction,
    c_stat: f64,
    r_aw: f64,
    pbw_kg: f64,
    params: &SimParams,
) -> MechanicsOutputs {
    let driving = (action.pinsp - action.peep).max(0.0);
    let tau = r_aw * c_stat * 1e-3;
    let vt = c_stat * driving * (1.0 - (-action.tinsp / tau).exp());
    let period = action.period();
    let texp = (period - action.tinsp).max(1e-3);
    let c_dyn = if driving > 0.0 { vt / driving } else { c_stat };
    MechanicsOutputs {
        vt,
        pplat: action.peep + vt / c_stat,
        paw_peak: action.pinsp.max(action.peep),
        paw_mean: action.peep + driving * action.tinsp / period,
        ie: action.tinsp / texp,
        flow_insp: vt / action.tinsp * 60.0 / 1000.0,
        flow_exp: vt / texp * 60.0 / 1000.0,
        minute_vent: vt * action.rr / 1000.0,
        c_stat,
        c_dyn,
        lung_volume: params.frc_per_kg * pbw_kg + (action.peep * c_stat + vt) / 1000.0,
        dead_space: params.dead_space_per_kg * pbw_kg,
    }
}

/// Severinghaus oxygen-hemoglobin dissociation curve. Returns SpO2 as a fraction.
pub fn severinghaus(pao2: f64) -> Result<f64> {
    if !(pao2 > 0.0) || !pao2.is_finite() {
        return Err(Error::InvalidInput(format!(
            "PaO2 must be positive and finite, got {pao2}"
        )));
    }
    Ok(saturation(pao2))
}

#[inline]
fn saturation(pao2: f64) -> f64 {
    1.0 / (23400.0 / (pao2 * pao2 * pao2 + 150.0 * pao2) + 1.0)
}

/// Henderson–Hasselbalch, clamped to the configured pH range.
pub fn blood_ph(params: &SimParams, paco2: f64, hco3: f64) -> f64 {
    (6.1 + (hco3 / (0.03 * paco2)).log10()).clamp(params.ph_min, params.ph_max)
}

/// Alveolar gas equation.
pub fn alveolar_po2(params: &SimParams, fio2: f64, paco2: f64) -> f64 {
    fio2 * (params.patm - params.ph2o) - paco2 / params.resp_quotient
}

pub fn shunt_fraction(params: &SimParams, severity: f64, peep: f64, pplat: f64) -> f64 {
    let fixed = params.shunt_fixed;
    let recruitable =
        severity.powf(params.shunt_exponent) * params.shunt_max * (fixed + (1.0 - fixed) * (-peep / params.peep_ref).exp());
    let overdistension =
        params.overdistension_gain * (pplat - params.overdistension_pplat).max(0.0) / 10.0;
    (recruitable + overdistension).clamp(0.0, 1.0)
}

/// Blood O2 content, mL/dL.
pub fn o2_content(params: &SimParams, po2: f64) -> f64 {
    1.34 * params.hb * saturation(po2.max(1e-9)) + 0.003 * po2.max(0.0)
}

/// Arterial PO2 after shunted venous blood mixes with end-capillary blood
/// at alveolar PO2.
///
/// With `Cv = Ca - avdo2`, `Ca = (1 - f)·Cc + f·Cv` gives
/// `Ca = Cc - avdo2·f/(1 - f)`; the content curve is then inverted by bisection.
pub fn mixed_pao2(params: &SimParams, pao2_alv: f64, shunt: f64) -> f64 {
    if pao2_alv <= 0.0 {
        return 0.0;
    }
    let f = shunt.min(0.999);
    let target = o2_content(params, pao2_alv) - params.avdo2 * f / (1.0 - f);
    if target <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, pao2_alv);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if o2_content(params, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasTargets {
    pub pao2: f64,
    pub paco2: f64,
}

pub fn gas_targets(
    params: &SimParams,
    action: &VentilatorAction,
    mech: &MechanicsOutputs,
    physio: &PhysioState,
) -> GasTargets {
    let pao2_alv = alveolar_po2(params, action.fio2, physio.paco2);
    let shunt = shunt_fraction(params, physio.severity, action.peep, mech.pplat);
    let pao2 = match params.mixing {
        OxygenMixing::Linear => pao2_alv * (1.0 - shunt),
        OxygenMixing::Content => mixed_pao2(params, pao2_alv, shunt),
    }
    .max(params.pao2_floor);

    let alveolar_vent = (mech.vt - mech.dead_space) * action.rr / 1000.0;
    let vco2 = params.vco2_per_kg * physio.profile.pbw();
    let paco2 = if alveolar_vent <= 0.0 {
        params.paco2_apneic
    } else {
        (params.k_co2 * vco2 / alveolar_vent).min(params.paco2_apneic)
    };
    GasTargets { pao2, paco2 }
}

#[inline]
fn relax(current: f64, target: f64, dt: f64, tau: f64) -> f64 {
    target + (current - target) * (-dt / tau).exp()
}

/// Advances arterial gas tensions by `dt_min`. Returns `(pao2, paco2, ph)`.
pub fn gas_exchange(
    params: &SimParams,
    action: &VentilatorAction,
    mech: &MechanicsOutputs,
    physio: &PhysioState,
    dt_min: f64,
) -> (f64, f64, f64) {
    let t = gas_targets(params, action, mech, physio);
    let pao2 = relax(physio.pao2, t.pao2, dt_min, params.tau_gas_min);
    let paco2 = relax(physio.paco2, t.paco2, dt_min, params.tau_gas_min);
    (pao2, paco2, blood_ph(params, paco2, physio.hco3))
}

/// Steady-state `(hr, sbp, dbp)` for the given oxygenation, pH and PEEP.
pub fn vital_targets(params: &SimParams, age: u32, peep: f64, spo2: f64, ph: f64) -> (f64, f64, f64) {
    let hr = params.hr_baseline(age)
        + params.hr_hypoxia_gain * (params.hr_spo2_threshold - 100.0 * spo2).max(0.0)
        + params.hr_acidosis_gain * (params.hr_ph_threshold - ph).max(0.0);
    let sbp = params.sbp_base - params.sbp_peep_gain * (peep - params.sbp_peep_threshold).max(0.0);
    (hr, sbp, params.dbp_ratio * sbp)
}

/// Advances heart rate and blood pressure by `dt_min`. Returns `(hr, sbp, dbp)`.
pub fn vitals(
    params: &SimParams,
    physio: &PhysioState,
    action: &VentilatorAction,
    spo2: f64,
    ph: f64,
    dt_min: f64,
) -> (f64, f64, f64) {
    let (hr, sbp, dbp) = vital_targets(params, physio.profile.age, action.peep, spo2, ph);
    let tau = params.tau_vitals_min;
    (
        relax(physio.hr, hr, dt_min, tau),
        relax(physio.sbp, sbp, dt_min, tau),
        relax(physio.dbp, dbp, dt_min, tau),
    )
}

/// Lung injury/recovery over `dt_min`.
pub fn progress_disease(
    params: &SimParams,
    severity: f64,
    action: &VentilatorAction,
    mech: &MechanicsOutputs,
    spo2: f64,
    pbw_kg: f64,
    dt_min: f64,
) -> f64 {
    let scale = dt_min / 30.0;
    let driving = action.pinsp - action.peep;
    let vt_per_kg = mech.vt / pbw_kg;
    let injurious =
        mech.pplat > params.injury_pplat || driving > params.injury_driving_pressure;
    let protective = (params.protective_vt_min..=params.protective_vt_max).contains(&vt_per_kg)
        && mech.pplat < params.injury_pplat
        && spo2 >= params.heal_spo2_min;
    let next = if injurious {
        severity + params.injure_rate * scale
    } else if protective {
        severity - params.heal_rate * scale
    } else {
        severity
    };
    next.clamp(0.0, 1.0)
}

/// One transition of the hidden state under constant settings for `dt_min`.
pub fn step(
    params: &SimParams,
    physio: &PhysioState,
    action: &VentilatorAction,
    dt_min: f64,
) -> PhysioState {
    let mut s = *physio;
    let pbw_kg = s.profile.pbw();
    let n = if dt_min > 0.0 {
        (dt_min / params.substep_min).ceil().max(1.0) as usize
    } else {
        0
    };
    let h = if n > 0 { dt_min / n as f64 } else { 0.0 };
    let mut mech = lung_mechanics(
        action,
        static_compliance(params, pbw_kg, s.severity),
        airway_resistance(params, s.severity),
        pbw_kg,
        params,
    );
    for _ in 0..n {
        let (pao2, paco2, ph) = gas_exchange(params, action, &mech, &s, h);
        let spo2 = saturation(pao2);
        let (hr, sbp, dbp) = vitals(params, &s, action, spo2, ph, h);
        let severity = progress_disease(params, s.severity, action, &mech, spo2, pbw_kg, h);
        s.pao2 = pao2;
        s.paco2 = paco2;
        s.hr = hr;
        s.sbp = sbp;
        s.dbp = dbp;
        s.severity = severity;
        mech = lung_mechanics(
            action,
            static_compliance(params, pbw_kg, severity),
            airway_resistance(params, severity),
            pbw_kg,
            params,
        );
    }
    s.last_mech = mech;
    s
}

/// Builds the 27-slot observation: physiological sensors followed by the
/// ventilator's echo of its own settings.
pub fn observe(params: &SimParams, physio: &PhysioState, action: &VentilatorAction) -> ObservedState {
    let m = &physio.last_mech;
    let etco2 = if m.vt > 0.0 {
        physio.paco2 * (1.0 - m.dead_space / m.vt).max(0.0) / params.patm * 100.0
    } else {
        0.0
    };
    let mut v = [0.0; STATE_DIM];
    v[slot::ECG_III] = 60000.0 / physio.hr;
    v[slot::PLETH] = physio.sbp - physio.dbp;
    v[slot::PACO2] = physio.paco2;
    v[slot::HR] = physio.hr;
    v[slot::DBP] = physio.dbp;
    v[slot::SBP] = physio.sbp;
    v[slot::SPO2] = 100.0 * saturation(physio.pao2);
    v[slot::ETCO2] = etco2;
    v[slot::AW_RR] = action.rr;
    v[slot::TEMP] = physio.temp;
    v[slot::PAO2] = physio.pao2;
    v[slot::FLOW_INSP] = m.flow_insp;
    v[slot::FLOW_EXP] = m.flow_exp;
    v[slot::IE] = m.ie;
    v[slot::LUNG_VOLUME] = m.lung_volume;
    v[slot::PAW_PEAK] = m.paw_peak;
    v[slot::PPLAT] = m.pplat;
    v[slot::VT] = m.vt;
    v[slot::MINUTE_VENT] = m.minute_vent;
    v[slot::PAW_MEAN] = m.paw_mean;
    v[slot::C_DYN_LUNG] = m.c_dyn / 1000.0;
    v[slot::C_STAT] = m.c_stat;
    v[slot::C_DYN] = m.c_dyn;
    v[slot::PH] = blood_ph(params, physio.paco2, physio.hco3);
    v[slot::SET_RR] = action.rr;
    v[slot::SET_FIO2] = action.fio2;
    v[slot::SET_PEEP] = action.peep;
    ObservedState(v)
}
