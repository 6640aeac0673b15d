use serde::{Deserialize, Serialize};

/// How shunted and end-capillary blood combine into arterial PaO2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OxygenMixing {
    /// `PaO2 = PAO2·(1 - shunt)`.
    Linear,
    /// Mix oxygen contents (bound plus dissolved) of end-capillary and mixed
    /// venous blood, then invert the content curve. Saturation flattens out
    /// at high FiO2 the way real shunt does.
    Content,
}

/// Constants of the surrogate physiology. Every field has a default and can be
/// overridden from the `[sim]` section of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    // Gas exchange
    pub patm: f64,
    pub ph2o: f64,
    pub resp_quotient: f64,
    pub hco3: f64,
    /// CO2 production, mL/min per kg predicted body weight.
    pub vco2_per_kg: f64,
    /// Alveolar ventilation constant, mmHg·L/mL.
    pub k_co2: f64,
    pub shunt_max: f64,
    /// Disease shunt scales with `severity^shunt_exponent`.
    pub shunt_exponent: f64,
    /// Part of the disease shunt that PEEP cannot recruit.
    pub shunt_fixed: f64,
    pub peep_ref: f64,
    pub mixing: OxygenMixing,
    /// Hemoglobin, g/dL.
    pub hb: f64,
    /// Arterial minus mixed-venous O2 content, mL/dL.
    pub avdo2: f64,
    /// Extra shunt per 10 cmH2O of plateau pressure above `overdistension_pplat`.
    pub overdistension_gain: f64,
    pub overdistension_pplat: f64,
    pub pao2_floor: f64,
    pub paco2_apneic: f64,
    pub tau_gas_min: f64,
    pub ph_min: f64,
    pub ph_max: f64,

    // Mechanics
    /// Healthy static compliance, mL/cmH2O per kg predicted body weight.
    pub compliance_per_kg: f64,
    /// Fraction of compliance lost at severity 1.
    pub compliance_loss: f64,
    pub r_aw: f64,
    /// Airway resistance added at severity 1.
    pub r_aw_severity: f64,
    pub dead_space_per_kg: f64,
    /// Functional residual capacity, L per kg predicted body weight.
    pub frc_per_kg: f64,

    // Hemodynamics
    pub hr_base: f64,
    pub hr_base_age: f64,
    pub hr_age_slope: f64,
    pub hr_hypoxia_gain: f64,
    pub hr_spo2_threshold: f64,
    pub hr_acidosis_gain: f64,
    pub hr_ph_threshold: f64,
    pub sbp_base: f64,
    pub sbp_peep_gain: f64,
    pub sbp_peep_threshold: f64,
    pub dbp_ratio: f64,
    pub tau_vitals_min: f64,
    pub temperature: f64,

    // Disease progression, rates per 30 min
    pub heal_rate: f64,
    pub injure_rate: f64,
    pub protective_vt_min: f64,
    pub protective_vt_max: f64,
    pub injury_pplat: f64,
    pub injury_driving_pressure: f64,
    pub heal_spo2_min: f64,

    // Untreated-ARDS initial state
    pub healthy_pao2: f64,
    pub healthy_paco2: f64,
    pub pao2_severity_drop: f64,
    pub paco2_severity_rise: f64,

    /// Internal integration step, minutes. Gas tensions, vitals and severity
    /// are coupled, so a 30 min decision interval is integrated in sub-steps.
    pub substep_min: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            patm: 760.0,
            ph2o: 47.0,
            resp_quotient: 0.8,
            hco3: 24.0,
            vco2_per_kg: 2.8,
            k_co2: 0.863,
            shunt_max: 0.8,
            shunt_exponent: 0.5,
            shunt_fixed: 0.15,
            peep_ref: 12.0,
            mixing: OxygenMixing::Content,
            hb: 15.0,
            avdo2: 5.0,
            overdistension_gain: 0.1,
            overdistension_pplat: 30.0,
            pao2_floor: 30.0,
            paco2_apneic: 90.0,
            tau_gas_min: 20.0,
            ph_min: 6.5,
            ph_max: 7.8,

            compliance_per_kg: 1.0,
            compliance_loss: 0.6,
            r_aw: 10.0,
            r_aw_severity: 4.0,
            dead_space_per_kg: 2.2,
            frc_per_kg: 0.035,

            hr_base: 77.5,
            hr_base_age: 30.0,
            hr_age_slope: -0.2,
            hr_hypoxia_gain: 2.0,
            hr_spo2_threshold: 90.0,
            hr_acidosis_gain: 40.0,
            hr_ph_threshold: 7.35,
            sbp_base: 120.0,
            sbp_peep_gain: 1.5,
            sbp_peep_threshold: 10.0,
            dbp_ratio: 0.65,
            tau_vitals_min: 15.0,
            temperature: 37.0,

            heal_rate: 0.001,
            injure_rate: 0.015,
            protective_vt_min: 4.0,
            protective_vt_max: 8.0,
            injury_pplat: 30.0,
            injury_driving_pressure: 15.0,
            heal_spo2_min: 0.88,

            healthy_pao2: 95.0,
            healthy_paco2: 40.0,
            pao2_severity_drop: 50.0,
            paco2_severity_rise: 15.0,

            substep_min: 1.0,
        }
    }
}

impl SimParams {
    /// Resting heart rate for a given age, sex-independent.
    pub fn hr_baseline(&self, age: u32) -> f64 {
        self.hr_base + self.hr_age_slope * (f64::from(age) - self.hr_base_age)
    }
}
