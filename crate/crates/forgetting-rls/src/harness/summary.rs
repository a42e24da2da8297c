//! Run summaries: per-algorithm digests written as flat `key = value`
//! text, machine-readable and recomputable from the trace.

use super::{CaseId, HarnessError, Result};
use crate::estimator::AlgoKind;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// RMSE level used to timestamp convergence in the summaries.
pub const RMSE_CONVERGENCE_THRESHOLD: f64 = 0.05;

/// Measured information-matrix constants and bound-violation tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundDigest {
    /// min over the run of lambda_min(R(t))
    pub a: f64,
    /// max over the run of lambda_max(R(t))
    pub b: f64,
    /// max over the run of ‖phi(t)‖^2
    pub c: f64,
    /// guaranteed floor delta/(1-mu), proposed EF only
    pub lower_bound: Option<f64>,
    pub lower_violations: usize,
    pub upper_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSummary {
    pub algo: AlgoKind,
    pub mu: f64,
    pub delta: Option<f64>,
    pub delta_admissible: Option<bool>,
    pub final_rmse: f64,
    pub max_v: f64,
    /// Lyapunov value at each checkpoint time (final step appended).
    pub v_at: Vec<(f64, f64)>,
    pub lyap_violations: usize,
    pub lyap_comparisons: usize,
    pub windup_steps: usize,
    pub first_windup_t: Option<f64>,
    pub beta_negative_steps: usize,
    /// First time the RMSE dropped below [`RMSE_CONVERGENCE_THRESHOLD`].
    pub rmse_below_threshold_t: Option<f64>,
    pub bound: BoundDigest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub case: CaseId,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub steps: usize,
    /// Steps whose sliding-window PE check passed.
    pub pe_steps: usize,
    /// Plant diverged; the trace is partial.
    pub aborted: bool,
    pub algos: Vec<AlgoSummary>,
}

impl RunSummary {
    pub fn algo(&self, kind: AlgoKind) -> Option<&AlgoSummary> {
        self.algos.iter().find(|a| a.algo == kind)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("case = {}\n", self.case));
        s.push_str(&format!("duration = {}\n", self.duration));
        s.push_str(&format!("dt = {}\n", self.dt));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("steps = {}\n", self.steps));
        s.push_str(&format!("pe_steps = {}\n", self.pe_steps));
        s.push_str(&format!("aborted = {}\n", self.aborted));
        for a in &self.algos {
            let p = a.algo.label();
            s.push_str(&format!("{p}.mu = {}\n", a.mu));
            if let Some(delta) = a.delta {
                s.push_str(&format!("{p}.delta = {delta}\n"));
            }
            if let Some(adm) = a.delta_admissible {
                s.push_str(&format!("{p}.delta_admissible = {adm}\n"));
            }
            s.push_str(&format!("{p}.final_rmse = {}\n", a.final_rmse));
            s.push_str(&format!("{p}.max_V = {}\n", a.max_v));
            for (t, v) in &a.v_at {
                s.push_str(&format!("{p}.V_at_{t}s = {v}\n"));
            }
            s.push_str(&format!("{p}.lyap_violations = {}\n", a.lyap_violations));
            s.push_str(&format!("{p}.lyap_comparisons = {}\n", a.lyap_comparisons));
            s.push_str(&format!("{p}.windup_steps = {}\n", a.windup_steps));
            if let Some(t) = a.first_windup_t {
                s.push_str(&format!("{p}.first_windup_t = {t}\n"));
            }
            s.push_str(&format!(
                "{p}.beta_negative_steps = {}\n",
                a.beta_negative_steps
            ));
            if let Some(t) = a.rmse_below_threshold_t {
                s.push_str(&format!("{p}.rmse_below_0.05_t = {t}\n"));
            }
            s.push_str(&format!("{p}.lam_min_observed = {}\n", a.bound.a));
            s.push_str(&format!("{p}.lam_max_observed = {}\n", a.bound.b));
            s.push_str(&format!("{p}.phi_norm_sq_max = {}\n", a.bound.c));
            if let Some(lb) = a.bound.lower_bound {
                s.push_str(&format!("{p}.bound_lower = {lb}\n"));
            }
            s.push_str(&format!(
                "{p}.bound_lower_violations = {}\n",
                a.bound.lower_violations
            ));
            s.push_str(&format!(
                "{p}.bound_upper_violations = {}\n",
                a.bound.upper_violations
            ));
        }
        s
    }
}

pub fn emit_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    w.write_all(summary.to_kv().as_bytes())
        .map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    w.flush().map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
