//! Experiment runner: case definitions, the simulation/estimation loop,
//! per-step trace records, and run summaries.

mod config;
pub mod summary;
pub mod trace;

pub use config::{builtin_case, theta_nominal, theta_post_jump, CaseId, ExperimentConfig};
pub use summary::{AlgoSummary, BoundDigest, RunSummary, RMSE_CONVERGENCE_THRESHOLD};
pub use trace::{emit_csv, read_csv, AlgoStepData, StepRecord};

use crate::analysis::{forgetting_upper_bound, proposed_lower_bound, AnalysisError, PeDetector, BOUND_SLACK};
use crate::estimator::{
    check_delta_admissible, AlgoKind, AlgoParams, Estimator, EstimatorError, StepInput,
};
use crate::linalg::{sym_eigenvalues, SymMatrix, Vector};
use crate::wingrock::{
    aileron, integrate_step, measure, try_regressor, NoiseSource, PlantState, WingRockError,
    REGRESSOR_DIM,
};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown case id `{0}` (expected C1 or C2)")]
    UnknownCase(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    WingRock(#[from] WingRockError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// One simulated plant step as seen by the estimators.
#[derive(Debug, Clone)]
pub struct PlantSample {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub r: f64,
    pub delta_a: f64,
    pub phi: Vector,
    pub theta: Vector,
    pub y: f64,
    /// Measurement carried injected noise.
    pub noisy: bool,
}

/// Simulated closed-loop trajectory; `aborted` marks plant divergence with
/// the samples collected so far retained.
#[derive(Debug, Clone)]
pub struct PlantTrajectory {
    pub samples: Vec<PlantSample>,
    pub aborted: bool,
}

/// Regressor energy beyond which the plant is declared divergent even
/// though the arithmetic has not overflowed yet (‖phi‖^2 stays below ~50
/// on the experiment cases; 1e12 is far past any physical roll regime).
const PHI_NORM_SQ_CAP: f64 = 1e12;

/// Simulates the plant over the configured horizon. The estimators never
/// feed back into the control loop, so the trajectory depends only on the
/// case definition and the seed.
pub fn plant_trajectory(config: &ExperimentConfig) -> Result<PlantTrajectory> {
    config.validate()?;
    let mut sched = config.schedule.clone();
    sched.rng_seed = config.seed;
    let mut noise = NoiseSource::from_seed(sched.rng_seed);
    let n_steps = (config.duration / config.dt).round() as usize;
    let mut samples = Vec::with_capacity(n_steps);
    let mut x = PlantState::new(config.x0.0, config.x0.1, 0.0);
    let mut aborted = false;

    for k in 0..n_steps {
        let t = k as f64 * config.dt;
        let theta = sched.theta_at(t).clone();
        let r = config.gains.reference.eval(t);
        let delta_a = aileron(&x, r, &config.gains);
        // A state that overflows the regressor (or blows past any physical
        // magnitude) is a divergence even though the raw state is still
        // finite; stop before it reaches the estimators.
        let Some(phi) = try_regressor(&x) else {
            aborted = true;
            break;
        };
        if phi.norm_sq() > PHI_NORM_SQ_CAP {
            aborted = true;
            break;
        }
        let noisy = t >= sched.noise_start && sched.noise_variance > 0.0;
        let y = measure(&x, &theta, t, &sched, &mut noise)?;
        if !y.is_finite() || !delta_a.is_finite() {
            aborted = true;
            break;
        }
        let next = integrate_step(&x, &theta, delta_a, config.dt);
        samples.push(PlantSample {
            t,
            x1: x.x1,
            x2: x.x2,
            r,
            delta_a,
            phi,
            theta,
            y,
            noisy,
        });
        match next {
            Ok(next) => x = next,
            Err(WingRockError::Divergence(_)) => {
                aborted = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(PlantTrajectory { samples, aborted })
}

/// Estimator parameters for one algorithm under this configuration.
pub fn algo_params(config: &ExperimentConfig, kind: AlgoKind) -> Result<AlgoParams> {
    let params = match kind {
        AlgoKind::Ef => AlgoParams::new(AlgoKind::Ef, config.mu_ef)?,
        AlgoKind::Df1 => AlgoParams::new(AlgoKind::Df1, config.mu_df)?,
        AlgoKind::Df2 => AlgoParams::new(AlgoKind::Df2, config.mu_df)?,
        AlgoKind::ProposedEf => AlgoParams::proposed_ef(config.mu_ef, config.delta)?,
    };
    Ok(params.with_phi_norm_floor(config.phi_norm_floor)?)
}

struct AlgoTracker {
    params: AlgoParams,
    est: Estimator,
    lam_max_r0: f64,
    delta_admissible: Option<bool>,
    // running tallies
    max_v: f64,
    prev_v: Option<f64>,
    prev_theta: Option<Vector>,
    lyap_violations: usize,
    lyap_comparisons: usize,
    windup_steps: usize,
    first_windup_t: Option<f64>,
    beta_negative_steps: usize,
    rmse_below_threshold_t: Option<f64>,
    a: f64,
    b: f64,
    c: f64,
    lower_violations: usize,
    upper_violations: usize,
}

impl AlgoTracker {
    fn new(config: &ExperimentConfig, kind: AlgoKind) -> Result<Self> {
        let params = algo_params(config, kind)?;
        let r0 = SymMatrix::identity(REGRESSOR_DIM);
        let lam_max_r0 = *sym_eigenvalues(&r0)?.last().unwrap();
        let delta_admissible = match kind {
            AlgoKind::ProposedEf => {
                Some(check_delta_admissible(params.mu, params.delta, &r0)?)
            }
            _ => None,
        };
        let est = Estimator::init(params.clone(), Vector::zeros(REGRESSOR_DIM), r0)?;
        Ok(Self {
            params,
            est,
            lam_max_r0,
            delta_admissible,
            max_v: f64::NEG_INFINITY,
            prev_v: None,
            prev_theta: None,
            lyap_violations: 0,
            lyap_comparisons: 0,
            windup_steps: 0,
            first_windup_t: None,
            beta_negative_steps: 0,
            rmse_below_threshold_t: None,
            a: f64::INFINITY,
            b: f64::NEG_INFINITY,
            c: 0.0,
            lower_violations: 0,
            upper_violations: 0,
        })
    }

    fn step(&mut self, sample: &PlantSample) -> Result<AlgoStepData> {
        let out = self.est.step(&StepInput {
            phi: sample.phi.clone(),
            y: sample.y,
        })?;
        let v = self.est.lyapunov(&sample.theta)?;
        let err_rmse = crate::analysis::rmse(&out.theta_hat, &sample.theta)?;

        self.max_v = self.max_v.max(v);
        // Monotonicity is only claimed between steps that share the same
        // true parameters and saw no measurement noise.
        let comparable = !sample.noisy && self.prev_theta.as_ref() == Some(&sample.theta);
        if comparable {
            if let Some(prev_v) = self.prev_v {
                self.lyap_comparisons += 1;
                if v > prev_v + 1e-12 {
                    self.lyap_violations += 1;
                }
            }
        }
        self.prev_v = Some(v);
        self.prev_theta = Some(sample.theta.clone());

        if out.windup {
            self.windup_steps += 1;
            self.first_windup_t.get_or_insert(sample.t);
        }
        if out.beta.is_some_and(|b| b < 0.0) {
            self.beta_negative_steps += 1;
        }
        if self.rmse_below_threshold_t.is_none() && err_rmse < RMSE_CONVERGENCE_THRESHOLD {
            self.rmse_below_threshold_t = Some(sample.t);
        }

        // information-matrix bound tallies
        self.c = self.c.max(sample.phi.norm_sq());
        self.a = self.a.min(out.lam_min_r);
        self.b = self.b.max(out.lam_max_r);
        let t = self.est.step_count();
        match self.params.kind {
            AlgoKind::ProposedEf => {
                let lb = proposed_lower_bound(self.params.mu, self.params.delta);
                if out.lam_min_r < lb - BOUND_SLACK {
                    self.lower_violations += 1;
                }
                let ub = forgetting_upper_bound(
                    self.params.mu,
                    self.params.delta,
                    self.lam_max_r0,
                    self.c,
                    t,
                );
                if out.lam_max_r > ub + BOUND_SLACK {
                    self.upper_violations += 1;
                }
            }
            AlgoKind::Ef => {
                let ub = forgetting_upper_bound(self.params.mu, 0.0, self.lam_max_r0, self.c, t);
                if out.lam_max_r > ub + BOUND_SLACK {
                    self.upper_violations += 1;
                }
            }
            AlgoKind::Df1 | AlgoKind::Df2 => {}
        }

        Ok(AlgoStepData {
            algo: self.params.kind,
            theta_hat: out.theta_hat,
            v,
            rmse: err_rmse,
            lam_min_r: out.lam_min_r,
            lam_max_r: out.lam_max_r,
            beta: out.beta,
            windup: out.windup,
        })
    }

    fn into_summary(self, trace: &[StepRecord], checkpoints: &[f64], dt: f64) -> AlgoSummary {
        let kind = self.params.kind;
        let find = |t: f64| -> Option<f64> {
            let idx = (t / dt).round() as usize;
            trace.get(idx).and_then(|rec| {
                rec.algos
                    .iter()
                    .find(|a| a.algo == kind)
                    .map(|a| a.v)
            })
        };
        let mut v_at: Vec<(f64, f64)> = Vec::new();
        for &cp in checkpoints {
            if let Some(v) = find(cp) {
                v_at.push((cp, v));
            }
        }
        if let Some(last) = trace.last() {
            if let Some(a) = last.algos.iter().find(|a| a.algo == kind) {
                v_at.push((last.t, a.v));
            }
        }
        let final_rmse = trace
            .last()
            .and_then(|rec| rec.algos.iter().find(|a| a.algo == kind))
            .map_or(f64::NAN, |a| a.rmse);
        AlgoSummary {
            algo: kind,
            mu: self.params.mu,
            delta: (kind == AlgoKind::ProposedEf).then_some(self.params.delta),
            delta_admissible: self.delta_admissible,
            final_rmse,
            max_v: if self.max_v.is_finite() {
                self.max_v
            } else {
                f64::NAN
            },
            v_at,
            lyap_violations: self.lyap_violations,
            lyap_comparisons: self.lyap_comparisons,
            windup_steps: self.windup_steps,
            first_windup_t: self.first_windup_t,
            beta_negative_steps: self.beta_negative_steps,
            rmse_below_threshold_t: self.rmse_below_threshold_t,
            bound: BoundDigest {
                a: self.a,
                b: self.b,
                c: self.c,
                lower_bound: (kind == AlgoKind::ProposedEf)
                    .then(|| proposed_lower_bound(self.params.mu, self.params.delta)),
                lower_violations: self.lower_violations,
                upper_violations: self.upper_violations,
            },
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub trace: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Runs every configured algorithm over one simulated trajectory,
/// evaluating the per-step invariant checks online.
///
/// Deterministic: identical configurations (including the seed) produce
/// identical traces.
pub fn run(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let traj = plant_trajectory(config)?;
    let mut pe = PeDetector::new(config.pe.clone(), REGRESSOR_DIM);
    let mut trackers: Vec<AlgoTracker> = config
        .algos
        .iter()
        .map(|&kind| AlgoTracker::new(config, kind))
        .collect::<Result<_>>()?;

    let mut trace: Vec<StepRecord> = Vec::with_capacity(traj.samples.len());
    for sample in &traj.samples {
        let pe_flag = pe.push(&sample.phi)?;
        let mut algos = Vec::with_capacity(trackers.len());
        for tracker in &mut trackers {
            algos.push(tracker.step(sample)?);
        }
        trace.push(StepRecord {
            t: sample.t,
            x1: sample.x1,
            x2: sample.x2,
            r: sample.r,
            delta_a: sample.delta_a,
            y: sample.y,
            pe: pe_flag,
            algos,
        });
    }

    let pe_steps = trace.iter().filter(|rec| rec.pe).count();
    let algos = trackers
        .into_iter()
        .map(|tr| tr.into_summary(&trace, &config.checkpoints, config.dt))
        .collect();
    let summary = RunSummary {
        case: config.case,
        duration: config.duration,
        dt: config.dt,
        seed: config.seed,
        steps: trace.len(),
        pe_steps,
        aborted: traj.aborted,
        algos,
    };
    Ok(RunArtifacts { trace, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_gives_empty_trace() {
        let mut config = builtin_case(CaseId::C2).unwrap();
        config.duration = 0.0;
        let artifacts = run(&config).unwrap();
        assert!(artifacts.trace.is_empty());
        assert_eq!(artifacts.summary.steps, 0);
        assert!(!artifacts.summary.aborted);
        assert_eq!(artifacts.summary.algos.len(), 4);
    }

    #[test]
    fn replay_is_deterministic() {
        let mut config = builtin_case(CaseId::C1).unwrap();
        config.duration = 3.0;
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.y.to_bits(), rb.y.to_bits());
            for (aa, ab) in ra.algos.iter().zip(&rb.algos) {
                assert_eq!(aa.v.to_bits(), ab.v.to_bits());
                assert_eq!(aa.rmse.to_bits(), ab.rmse.to_bits());
            }
        }
    }

    #[test]
    fn seed_changes_noise_only_after_onset() {
        let mut config = builtin_case(CaseId::C1).unwrap();
        config.duration = 61.0;
        let a = plant_trajectory(&config).unwrap();
        config.seed += 1;
        let b = plant_trajectory(&config).unwrap();
        let idx_pre = (30.0 / config.dt) as usize;
        let idx_post = (60.5 / config.dt) as usize;
        assert_eq!(a.samples[idx_pre].y.to_bits(), b.samples[idx_pre].y.to_bits());
        assert_ne!(a.samples[idx_post].y.to_bits(), b.samples[idx_post].y.to_bits());
    }

    #[test]
    fn plant_divergence_flags_partial_trace() {
        let text = "case = custom\nduration = 30\nalgos = pef\nx1_0 = 10\nx2_0 = 10\n\
                    theta_segment = 0: 0 0 0 0 0 1e6\n";
        let config = ExperimentConfig::parse_kv(text).unwrap();
        let artifacts = run(&config).unwrap();
        assert!(artifacts.summary.aborted);
        assert!(!artifacts.trace.is_empty());
        assert!(artifacts.trace.len() < 3000);
    }

    #[test]
    fn summary_recomputable_from_trace() {
        let mut config = builtin_case(CaseId::C2).unwrap();
        config.duration = 5.0;
        let artifacts = run(&config).unwrap();
        for algo_summary in &artifacts.summary.algos {
            let kind = algo_summary.algo;
            let per_step: Vec<&AlgoStepData> = artifacts
                .trace
                .iter()
                .map(|rec| rec.algos.iter().find(|a| a.algo == kind).unwrap())
                .collect();
            let max_v = per_step.iter().map(|a| a.v).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(algo_summary.max_v.to_bits(), max_v.to_bits());
            assert_eq!(
                algo_summary.final_rmse.to_bits(),
                per_step.last().unwrap().rmse.to_bits()
            );
            let a = per_step.iter().map(|a| a.lam_min_r).fold(f64::INFINITY, f64::min);
            assert_eq!(algo_summary.bound.a.to_bits(), a.to_bits());
        }
    }
}
