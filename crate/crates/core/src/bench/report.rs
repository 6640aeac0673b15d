use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{in_range_percentages, mean_ci, MarkerPercentages, RangeMarker};
use super::{BenchParams, PolicyKind};
use crate::config::Config;
use crate::env::{BoundsTable, EpisodeTrajectory};
use crate::error::{Error, Result};
use crate::sim::PatientProfile;

/// Bumped whenever the JSON layout changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: PolicyKind,
    pub mean_total_reward: f64,
    pub ci_half_width: f64,
    /// Mean over patients of the per-patient in-range percentages.
    pub in_range: MarkerPercentages,
    pub per_patient_totals: Vec<f64>,
    /// Mean accumulated reward after each step, for plotting reward curves.
    pub cumulative_mean: Vec<f64>,
    pub cumulative_ci: Vec<f64>,
    pub mean_final_severity: f64,
}

impl PolicyReport {
    pub fn from_episodes(
        policy: PolicyKind,
        trajs: &[EpisodeTrajectory],
        bounds: &BoundsTable,
        params: &BenchParams,
    ) -> Result<Self> {
        let totals: Vec<f64> = trajs.iter().map(EpisodeTrajectory::total_reward).collect();
        let (mean, ci) = mean_ci(&totals)?;
        let per_patient: Vec<MarkerPercentages> = trajs
            .iter()
            .map(|t| {
                let b = bounds.resolve(t.profile.sex, t.profile.age)?;
                Ok(in_range_percentages(t, b, params))
            })
            .collect::<Result<_>>()?;
        let steps = trajs.iter().map(EpisodeTrajectory::len).min().unwrap_or(0);
        let mut running = vec![0.0; trajs.len()];
        let mut cumulative_mean = Vec::with_capacity(steps);
        let mut cumulative_ci = Vec::with_capacity(steps);
        for t in 0..steps {
            for (acc, traj) in running.iter_mut().zip(trajs) {
                *acc += traj.records[t].reward;
            }
            let (m, h) = mean_ci(&running)?;
            cumulative_mean.push(m);
            cumulative_ci.push(h);
        }
        let mean_final_severity = trajs
            .iter()
            .map(|t| t.records.last().map_or(t.profile.severity0, |r| r.physio.severity))
            .sum::<f64>()
            / trajs.len() as f64;
        Ok(Self {
            policy,
            mean_total_reward: mean,
            ci_half_width: ci,
            in_range: MarkerPercentages::mean(&per_patient),
            per_patient_totals: totals,
            cumulative_mean,
            cumulative_ci,
            mean_final_severity,
        })
    }
}

/// Wall-clock measurements. Kept out of [`BenchmarkReport`] so the report
/// stays byte-identical across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTiming {
    pub policy: PolicyKind,
    pub episodes: usize,
    pub decisions: usize,
    pub wall_seconds: f64,
    pub mean_decision_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub seed: u64,
    pub cohort_seed: u64,
    pub steps: usize,
    pub dt_min: f64,
    pub cohort: Vec<PatientProfile>,
    pub policies: Vec<PolicyReport>,
    pub config: Config,
}

impl BenchmarkReport {
    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicyReport> {
        self.policies.iter().find(|p| p.policy == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a report, rejecting any schema version other than the current one
    /// before looking at the rest of the document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Format("report has no schema_version".into()))?;
        if found != u64::from(REPORT_SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                expected: REPORT_SCHEMA_VERSION,
                found: u32::try_from(found).unwrap_or(u32::MAX),
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// One row per policy: mean reward, CI half-width, in-range percentages.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["policy".to_string(), "mean_total_reward".into(), "ci95_half_width".into()];
        header.extend(RangeMarker::ALL.iter().map(|m| format!("in_range_{}", m.label())));
        header.push("mean_final_severity".into());
        w.write_record(&header)?;
        for p in &self.policies {
            let mut row = vec![
                p.policy.to_string(),
                p.mean_total_reward.to_string(),
                p.ci_half_width.to_string(),
            ];
            row.extend(p.in_range.0.iter().map(|v| v.to_string()));
            row.push(p.mean_final_severity.to_string());
            w.write_record(&row)?;
        }
        csv_string(w)
    }

    /// Long format: policy, patient index, total reward.
    pub fn per_patient_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["policy", "patient", "sex", "age", "severity0", "total_reward"])?;
        for p in &self.policies {
            for (i, (total, prof)) in p.per_patient_totals.iter().zip(&self.cohort).enumerate() {
                w.write_record([
                    p.policy.to_string(),
                    i.to_string(),
                    prof.sex.to_string(),
                    prof.age.to_string(),
                    prof.severity0.to_string(),
                    total.to_string(),
                ])?;
            }
        }
        csv_string(w)
    }

    /// Accumulated-reward curves with 95% bands, one row per (policy, step).
    pub fn curves_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["policy", "step", "hours", "mean_cumulative_reward", "ci95_half_width"])?;
        for p in &self.policies {
            for (t, (m, h)) in p.cumulative_mean.iter().zip(&p.cumulative_ci).enumerate() {
                w.write_record([
                    p.policy.to_string(),
                    (t + 1).to_string(),
                    ((t + 1) as f64 * self.dt_min / 60.0).to_string(),
                    m.to_string(),
                    h.to_string(),
                ])?;
            }
        }
        csv_string(w)
    }

    /// Plain-text table: reward with CI, then rounded in-range percentages.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} patients, {} steps of {} min, seed {}",
            self.cohort.len(),
            self.steps,
            self.dt_min,
            self.seed
        );
        let _ = write!(s, "{:<18}{:>16}", "policy", "reward (95% CI)");
        for m in RangeMarker::ALL {
            let _ = write!(s, "{:>7}", m.label());
        }
        s.push('\n');
        for p in &self.policies {
            let reward = format!("{:.1} ± {:.1}", p.mean_total_reward, p.ci_half_width);
            let _ = write!(s, "{:<18}{:>16}", p.policy.name(), reward);
            for v in p.in_range.0 {
                let _ = write!(s, "{:>7.0}", v);
            }
            s.push('\n');
        }
        s
    }

    /// Writes `report.json`, `summary.csv`, `per_patient.csv`, `curves.csv`
    /// and `table.txt` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.save(&dir.join("report.json"))?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        std::fs::write(dir.join("per_patient.csv"), self.per_patient_csv()?)?;
        std::fs::write(dir.join("curves.csv"), self.curves_csv()?)?;
        std::fs::write(dir.join("table.txt"), self.render_table())?;
        Ok(())
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
