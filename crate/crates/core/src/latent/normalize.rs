use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{ObservedState, VentilatorAction, ACTION_DIM, STATE_DIM};

/// Fixed physiological ranges mapping each state slot and action component
/// onto `[0, 1]`. Independent of any dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationSpec {
    pub state_min: [f64; STATE_DIM],
    pub state_max: [f64; STATE_DIM],
    pub action_min: [f64; ACTION_DIM],
    pub action_max: [f64; ACTION_DIM],
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        Self {
            state_min: [
                250.0, // ecg_iii (R-R interval, ms)
                25.0,  // pleth (pulse pressure)
                10.0,  // paco2
                50.0,  // hr
                50.0,  // dbp
                80.0,  // sbp
                50.0,  // spo2 %
                0.0,   // etco2 %
                1.0,   // aw_rr
                35.0,  // temp
                30.0,  // pao2
                0.0,   // flow_insp
                0.0,   // flow_exp
                0.0,   // ie
                0.5,   // lung_volume
                1.0,   // paw_peak
                1.0,   // pplat
                0.0,   // vt
                0.0,   // minute_vent
                1.0,   // paw_mean
                0.0,   // c_dyn_lung
                10.0,  // c_stat
                0.0,   // c_dyn
                6.5,   // ph
                1.0,   // set_rr
                0.0,   // set_fio2
                1.0,   // set_peep
            ],
            state_max: [
                1250.0, 50.0, 95.0, 240.0, 90.0, 130.0, 100.0, 12.0, 30.0, 40.0, 700.0, 150.0,
                150.0, 10.0, 6.0, 30.0, 30.0, 2500.0, 40.0, 30.0, 0.1, 110.0, 110.0, 7.8, 30.0,
                1.0, 25.0,
            ],
            action_min: [0.0, 1.0, 0.1, 1.0, 1.0, 0.0],
            action_max: [1.0, 30.0, 3.0, 30.0, 25.0, 1.0],
        }
    }
}

#[inline]
fn to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

#[inline]
fn from_unit(u: f64, lo: f64, hi: f64) -> f64 {
    lo + u * (hi - lo)
}

impl NormalizationSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.state_min.iter().zip(&self.state_max).all(|(a, b)| a < b)
            && self.action_min.iter().zip(&self.action_max).all(|(a, b)| a < b);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("normalization ranges need min < max".into()))
        }
    }

    pub fn normalize_state(&self, s: &ObservedState) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            out[i] = to_unit(s.0[i], self.state_min[i], self.state_max[i]);
        }
        out
    }

    pub fn denormalize_state(&self, u: &[f64]) -> Result<ObservedState> {
        if u.len() != STATE_DIM {
            return Err(Error::ShapeMismatch {
                expected: STATE_DIM,
                got: u.len(),
            });
        }
        let mut out = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            out[i] = from_unit(u[i], self.state_min[i], self.state_max[i]);
        }
        Ok(ObservedState(out))
    }

    pub fn normalize_action(&self, a: &VentilatorAction) -> [f64; ACTION_DIM] {
        let a = a.to_array();
        let mut out = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            out[i] = to_unit(a[i], self.action_min[i], self.action_max[i]);
        }
        out
    }

    pub fn denormalize_action(&self, u: &[f64; ACTION_DIM]) -> VentilatorAction {
        let mut out = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            out[i] = from_unit(u[i], self.action_min[i], self.action_max[i]);
        }
        VentilatorAction::from_array(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_map_to_unit_interval() {
        let spec = NormalizationSpec::default();
        let lo = ObservedState(spec.state_min);
        let hi = ObservedState(spec.state_max);
        assert!(spec.normalize_state(&lo).iter().all(|v| *v == 0.0));
        assert!(spec.normalize_state(&hi).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn out_of_range_clamps() {
        let spec = NormalizationSpec::default();
        let mut s = ObservedState(spec.state_min);
        s.0[10] = 5000.0;
        s.0[2] = -3.0;
        let u = spec.normalize_state(&s);
        assert_eq!(u[10], 1.0);
        assert_eq!(u[2], 0.0);
    }

    #[test]
    fn default_ranges_are_valid() {
        NormalizationSpec::default().validate().unwrap();
    }
}
