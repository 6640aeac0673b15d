use std::fmt;

use serde::{Deserialize, Serialize};

use super::BenchParams;
use crate::env::{EpisodeTrajectory, PatientBounds};
use crate::error::{Error, Result};
use crate::sim::slot;

/// The nine markers scored as "time in healthy range".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RangeMarker {
    Vt,
    Rr,
    SpO2,
    Ie,
    Hr,
    Sbp,
    Dbp,
    Pplat,
    Ph,
}

impl RangeMarker {
    pub const ALL: [RangeMarker; 9] = [
        RangeMarker::Vt,
        RangeMarker::Rr,
        RangeMarker::SpO2,
        RangeMarker::Ie,
        RangeMarker::Hr,
        RangeMarker::Sbp,
        RangeMarker::Dbp,
        RangeMarker::Pplat,
        RangeMarker::Ph,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RangeMarker::Vt => "VT",
            RangeMarker::Rr => "RR",
            RangeMarker::SpO2 => "SpO2",
            RangeMarker::Ie => "I:E",
            RangeMarker::Hr => "HR",
            RangeMarker::Sbp => "SBP",
            RangeMarker::Dbp => "DBP",
            RangeMarker::Pplat => "Pplat",
            RangeMarker::Ph => "pH",
        }
    }
}

impl fmt::Display for RangeMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Percent of steps (0 to 100, unrounded) each marker spent in range, in
/// [`RangeMarker::ALL`] order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerPercentages(pub [f64; 9]);

impl MarkerPercentages {
    pub fn get(&self, m: RangeMarker) -> f64 {
        let i = RangeMarker::ALL.iter().position(|x| *x == m).expect("listed");
        self.0[i]
    }

    /// Element-wise mean over patients.
    pub fn mean(items: &[MarkerPercentages]) -> MarkerPercentages {
        let mut out = [0.0; 9];
        if items.is_empty() {
            return MarkerPercentages(out);
        }
        for it in items {
            for (o, v) in out.iter_mut().zip(it.0) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= items.len() as f64);
        MarkerPercentages(out)
    }
}

/// Healthy range `[lo, hi]` of one marker for one patient.
fn range_for(m: RangeMarker, bounds: &PatientBounds, pbw: f64, params: &BenchParams) -> (usize, f64, f64) {
    // PatientBounds is ordered SpO2, PaO2, RR, IE, Pplat, pH, HR.
    let b = |i: usize| (bounds[i].marker.slot(), bounds[i].lb, bounds[i].ub);
    match m {
        RangeMarker::Vt => (slot::VT, params.vt_range_per_kg[0] * pbw, params.vt_range_per_kg[1] * pbw),
        RangeMarker::Rr => b(2),
        RangeMarker::SpO2 => b(0),
        RangeMarker::Ie => b(3),
        RangeMarker::Hr => b(6),
        RangeMarker::Sbp => (slot::SBP, params.sbp_range[0], params.sbp_range[1]),
        RangeMarker::Dbp => (slot::DBP, params.dbp_range[0], params.dbp_range[1]),
        RangeMarker::Pplat => b(4),
        RangeMarker::Ph => b(5),
    }
}

/// Counts how many of the trajectory's post-action observations fall inside
/// each marker's range.
pub fn in_range_percentages(
    traj: &EpisodeTrajectory,
    bounds: &PatientBounds,
    params: &BenchParams,
) -> MarkerPercentages {
    let pbw = traj.profile.pbw();
    let n = traj.records.len();
    let mut out = [0.0; 9];
    if n == 0 {
        return MarkerPercentages(out);
    }
    for (k, m) in RangeMarker::ALL.into_iter().enumerate() {
        let (i, lo, hi) = range_for(m, bounds, pbw, params);
        let hits = traj
            .records
            .iter()
            .filter(|r| (lo..=hi).contains(&r.observation.0[i]))
            .count();
        out[k] = 100.0 * hits as f64 / n as f64;
    }
    MarkerPercentages(out)
}

/// Mean and normal-approximation 95% half-width `1.96·sd/√N` with the
/// sample standard deviation.
pub fn mean_ci(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, 1.96 * var.sqrt() / n.sqrt()))
}
