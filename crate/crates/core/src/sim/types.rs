use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STATE_DIM: usize = 27;
pub const ACTION_DIM: usize = 6;

pub const AGE_MIN: u32 = 18;
pub const AGE_MAX: u32 = 65;
pub const HEIGHT_MIN: f64 = 120.0;
pub const HEIGHT_MAX: f64 = 210.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sex::Male => f.write_str("male"),
            Sex::Female => f.write_str("female"),
        }
    }
}

/// Predicted body weight (kg) from the NIH/ARDSnet height formula.
pub fn pbw(sex: Sex, height_cm: f64) -> f64 {
    let intercept = match sex {
        Sex::Male => 50.0,
        Sex::Female => 45.5,
    };
    intercept + 0.91 * (height_cm - 152.4)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub sex: Sex,
    pub age: u32,
    pub height: f64,
    /// Initial ARDS severity in [0, 1].
    pub severity0: f64,
}

impl PatientProfile {
    pub fn new(sex: Sex, age: u32, height: f64, severity0: f64) -> Result<Self> {
        let p = Self {
            sex,
            age,
            height,
            severity0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(AGE_MIN..=AGE_MAX).contains(&self.age) {
            return Err(Error::InvalidProfile(format!(
                "age {} outside [{AGE_MIN}, {AGE_MAX}]",
                self.age
            )));
        }
        if !(HEIGHT_MIN..=HEIGHT_MAX).contains(&self.height) {
            return Err(Error::InvalidProfile(format!(
                "height {} cm outside [{HEIGHT_MIN}, {HEIGHT_MAX}]",
                self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.severity0) {
            return Err(Error::InvalidProfile(format!(
                "severity {} outside [0, 1]",
                self.severity0
            )));
        }
        Ok(())
    }

    pub fn pbw(&self) -> f64 {
        pbw(self.sex, self.height)
    }
}

/// Breath-level mechanics of one pressure-controlled ventilation setting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MechanicsOutputs {
    /// Tidal volume, mL.
    pub vt: f64,
    pub pplat: f64,
    pub paw_peak: f64,
    pub paw_mean: f64,
    pub ie: f64,
    /// Mean inspiratory flow, L/min.
    pub flow_insp: f64,
    /// Mean expiratory flow, L/min.
    pub flow_exp: f64,
    /// L/min.
    pub minute_vent: f64,
    /// mL/cmH2O.
    pub c_stat: f64,
    /// mL/cmH2O.
    pub c_dyn: f64,
    /// End-inspiratory lung volume, L.
    pub lung_volume: f64,
    /// Anatomical dead space, mL.
    pub dead_space: f64,
}

/// Hidden state of the surrogate patient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysioState {
    pub profile: PatientProfile,
    pub severity: f64,
    pub paco2: f64,
    pub pao2: f64,
    pub hco3: f64,
    pub hr: f64,
    pub sbp: f64,
    pub dbp: f64,
    pub temp: f64,
    pub last_mech: MechanicsOutputs,
}

/// Ventilator settings applied for one decision interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VentilatorAction {
    pub fio2: f64,
    /// cmH2O
    pub pinsp: f64,
    /// s
    pub tinsp: f64,
    /// breaths/min
    pub rr: f64,
    /// cmH2O
    pub peep: f64,
    pub slope: f64,
}

impl VentilatorAction {
    pub fn to_array(&self) -> [f64; ACTION_DIM] {
        [
            self.fio2, self.pinsp, self.tinsp, self.rr, self.peep, self.slope,
        ]
    }

    pub fn from_array(a: [f64; ACTION_DIM]) -> Self {
        Self {
            fio2: a[0],
            pinsp: a[1],
            tinsp: a[2],
            rr: a[3],
            peep: a[4],
            slope: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Breath period in seconds.
    pub fn period(&self) -> f64 {
        60.0 / self.rr
    }
}

/// Index of each quantity in the 27-slot observation vector.
pub mod slot {
    pub const ECG_III: usize = 0;
    pub const PLETH: usize = 1;
    pub const PACO2: usize = 2;
    pub const HR: usize = 3;
    pub const DBP: usize = 4;
    pub const SBP: usize = 5;
    pub const SPO2: usize = 6;
    pub const ETCO2: usize = 7;
    pub const AW_RR: usize = 8;
    pub const TEMP: usize = 9;
    pub const PAO2: usize = 10;
    pub const FLOW_INSP: usize = 11;
    pub const FLOW_EXP: usize = 12;
    pub const IE: usize = 13;
    pub const LUNG_VOLUME: usize = 14;
    pub const PAW_PEAK: usize = 15;
    pub const PPLAT: usize = 16;
    pub const VT: usize = 17;
    pub const MINUTE_VENT: usize = 18;
    pub const PAW_MEAN: usize = 19;
    pub const C_DYN_LUNG: usize = 20;
    pub const C_STAT: usize = 21;
    pub const C_DYN: usize = 22;
    pub const PH: usize = 23;
    pub const SET_RR: usize = 24;
    pub const SET_FIO2: usize = 25;
    pub const SET_PEEP: usize = 26;

    pub const NAMES: [&str; super::STATE_DIM] = [
        "ecg_iii",
        "pleth",
        "paco2",
        "hr",
        "dbp",
        "sbp",
        "spo2",
        "etco2",
        "aw_rr",
        "temp",
        "pao2",
        "flow_insp",
        "flow_exp",
        "ie",
        "lung_volume",
        "paw_peak",
        "pplat",
        "vt",
        "minute_vent",
        "paw_mean",
        "c_dyn_lung",
        "c_stat",
        "c_dyn",
        "ph",
        "set_rr",
        "set_fio2",
        "set_peep",
    ];
}

pub const ACTION_NAMES: [&str; ACTION_DIM] = ["fio2", "pinsp", "tinsp", "rr", "peep", "slope"];

/// The 27-dimensional health state seen by policies and networks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedState(pub [f64; STATE_DIM]);

impl ObservedState {
    pub fn zeros() -> Self {
        Self([0.0; STATE_DIM])
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; STATE_DIM] = values.try_into().map_err(|_| Error::ShapeMismatch {
            expected: STATE_DIM,
            got: values.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn spo2_fraction(&self) -> f64 {
        self.0[slot::SPO2] / 100.0
    }
}
