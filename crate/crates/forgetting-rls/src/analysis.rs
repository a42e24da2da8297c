//! Excitation detection, information-matrix bound verification, error
//! metrics, and independent recomputation oracles for the estimators.

use crate::estimator::{AlgoKind, AlgoParams};
use crate::linalg::{invert, sym_eigenvalues, LinalgError, SymMatrix, Vector};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("window holds {got} regressors, persistent-excitation order is {want}")]
    WindowSize { got: usize, want: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty trace")]
    EmptyTrace,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Persistent-excitation test configuration: window length `s` (steps) and
/// excitation level `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeConfig {
    pub window: usize,
    pub gamma: f64,
}

impl PeConfig {
    pub fn new(window: usize, gamma: f64) -> Result<Self> {
        if window < 1 {
            return Err(AnalysisError::InvalidConfig(
                "window must hold at least one step".into(),
            ));
        }
        if !(gamma > 0.0) {
            return Err(AnalysisError::InvalidConfig(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
        Ok(Self { window, gamma })
    }
}

impl Default for PeConfig {
    /// 600 steps (6 s at dt = 0.01) at level 1e-3.
    fn default() -> Self {
        Self {
            window: 600,
            gamma: 1e-3,
        }
    }
}

/// True iff `lambda_min(sum_i phi_i phi_i^T) >= gamma` over exactly
/// `cfg.window` regressors.
pub fn pe_check(window: &[Vector], cfg: &PeConfig) -> Result<bool> {
    if window.len() != cfg.window {
        return Err(AnalysisError::WindowSize {
            got: window.len(),
            want: cfg.window,
        });
    }
    let n = window[0].dim();
    let mut sum = SymMatrix::zeros(n);
    for phi in window {
        sum.add_outer(phi, 1.0);
    }
    let eigs = sym_eigenvalues(&sum)?;
    Ok(eigs[0] >= cfg.gamma)
}

/// Sliding-window PE monitor with a running outer-product sum.
/// Reports `false` until the window has filled.
#[derive(Debug, Clone)]
pub struct PeDetector {
    cfg: PeConfig,
    dim: usize,
    buf: VecDeque<Vector>,
    sum: SymMatrix,
}

impl PeDetector {
    pub fn new(cfg: PeConfig, dim: usize) -> Self {
        Self {
            cfg,
            dim,
            buf: VecDeque::new(),
            sum: SymMatrix::zeros(dim),
        }
    }

    pub fn push(&mut self, phi: &Vector) -> Result<bool> {
        debug_assert_eq!(phi.dim(), self.dim);
        self.buf.push_back(phi.clone());
        self.sum.add_outer(phi, 1.0);
        if self.buf.len() > self.cfg.window {
            let old = self.buf.pop_front().unwrap();
            self.sum.add_outer(&old, -1.0);
        }
        if self.buf.len() < self.cfg.window {
            return Ok(false);
        }
        let eigs = sym_eigenvalues(&self.sum)?;
        Ok(eigs[0] >= self.cfg.gamma)
    }
}

/// Per-run record of information-matrix eigenvalue extremes against the
/// theoretical bounds applicable to the algorithm.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub kind: AlgoKind,
    /// lambda_min(R(t)) per trace entry.
    pub lam_min: Vec<f64>,
    /// lambda_max(R(t)) per trace entry.
    pub lam_max: Vec<f64>,
    /// Guaranteed floor `delta / (1 - mu)` (proposed EF only).
    pub lower_bound: Option<f64>,
    /// Per-entry upper-bound curve
    /// `mu^t lam_max(R(0)) + (1 - mu^t)(c + delta)/(1 - mu)`
    /// (EF with delta = 0 and proposed EF).
    pub upper_bound: Vec<f64>,
    /// Measured lower constant `a = min_t lambda_min(R(t))`.
    pub a: f64,
    /// Measured upper constant `b = max_t lambda_max(R(t))`.
    pub b: f64,
    /// Running-maximum regressor energy `c = max_t ‖phi(t)‖^2`.
    pub c: f64,
    pub lower_violations: usize,
    pub upper_violations: usize,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.lower_violations + self.upper_violations
    }
}

/// Slack applied to eigenvalue/bound comparisons.
pub const BOUND_SLACK: f64 = 1e-9;

/// Guaranteed information floor `delta / (1 - mu)` of the proposed EF.
pub fn proposed_lower_bound(mu: f64, delta: f64) -> f64 {
    delta / (1.0 - mu)
}

/// Upper-bound curve `mu^t lam_max(R(0)) + (1 - mu^t)(c + delta)/(1 - mu)`
/// shared by EF (`delta = 0`) and the proposed EF, with `c` the running
/// maximum of `‖phi‖^2` up to step `t`.
pub fn forgetting_upper_bound(mu: f64, delta: f64, lam_max_r0: f64, c: f64, t: u64) -> f64 {
    let mu_t = mu.powi(t as i32);
    mu_t * lam_max_r0 + (1.0 - mu_t) / (1.0 - mu) * (c + delta)
}

/// Checks a stored trajectory of `(R(t), phi(t))` against the algorithm's
/// information-matrix bounds.
///
/// Entry 0 is the initial pair `(R(0), phi = 0)`; entry `t >= 1` holds the
/// matrix after the t-th update together with the regressor that produced it.
pub fn verify_bounds(trace: &[(SymMatrix, Vector)], params: &AlgoParams) -> Result<BoundReport> {
    if trace.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    let mu = params.mu;
    let delta = if params.kind == AlgoKind::ProposedEf {
        params.delta
    } else {
        0.0
    };
    let lower_bound = match params.kind {
        AlgoKind::ProposedEf => Some(proposed_lower_bound(mu, delta)),
        _ => None,
    };
    let track_upper = matches!(params.kind, AlgoKind::Ef | AlgoKind::ProposedEf);

    let lam0 = sym_eigenvalues(&trace[0].0)?;
    let lam_max0 = *lam0.last().unwrap();

    let mut report = BoundReport {
        kind: params.kind,
        lam_min: Vec::with_capacity(trace.len()),
        lam_max: Vec::with_capacity(trace.len()),
        lower_bound,
        upper_bound: Vec::new(),
        a: f64::INFINITY,
        b: f64::NEG_INFINITY,
        c: 0.0,
        lower_violations: 0,
        upper_violations: 0,
    };

    for (t, (r, phi)) in trace.iter().enumerate() {
        let eigs = sym_eigenvalues(r)?;
        let lam_min = eigs[0];
        let lam_max = *eigs.last().unwrap();
        if t > 0 {
            report.c = report.c.max(phi.norm_sq());
        }
        report.a = report.a.min(lam_min);
        report.b = report.b.max(lam_max);

        if let Some(lb) = lower_bound {
            if lam_min < lb - BOUND_SLACK {
                report.lower_violations += 1;
            }
        }
        if track_upper {
            let ub = forgetting_upper_bound(mu, delta, lam_max0, report.c, t as u64);
            report.upper_bound.push(ub);
            if lam_max > ub + BOUND_SLACK {
                report.upper_violations += 1;
            }
        }
        report.lam_min.push(lam_min);
        report.lam_max.push(lam_max);
    }
    Ok(report)
}

/// Per-vector root-mean-square estimation error `sqrt(‖err‖^2 / n)`.
pub fn rmse(theta_hat: &Vector, theta: &Vector) -> Result<f64> {
    if theta_hat.dim() != theta.dim() {
        return Err(AnalysisError::InvalidConfig(format!(
            "rmse dimension mismatch: {} vs {}",
            theta_hat.dim(),
            theta.dim()
        )));
    }
    Ok((theta_hat.sub(theta).norm_sq() / theta.dim() as f64).sqrt())
}

/// Batch exponentially-weighted least squares: the closed-form EF solution
///
/// `theta(t) = R(t)^-1 (mu^t R(0) theta0 + sum_i mu^(t-i) phi(i) y(i))`
///
/// with `R(t)` from its explicit geometric form. Independent of the
/// recursive estimator path; used to cross-check it.
pub fn ef_batch_oracle(
    history: &[(Vector, f64)],
    mu: f64,
    theta0: &Vector,
    r0: &SymMatrix,
) -> Result<Vector> {
    let t = history.len();
    let mut r = r0.scaled(mu.powi(t as i32));
    let mut rhs = r.mat_vec(theta0);
    for (i, (phi, y)) in history.iter().enumerate() {
        let w = mu.powi((t - 1 - i) as i32);
        r.add_outer(phi, w);
        rhs.add_scaled_in_place(&phi.scaled(w), *y);
    }
    let p = invert(&r)?;
    Ok(p.mat_vec(&rhs))
}

/// Direct re-run of the proposed-EF recursion
/// `R(t) = mu R(t-1) + phi phi^T + delta I`, `theta += P(t) phi innov`,
/// inverting explicitly at every step. Written independently of
/// [`crate::estimator::Estimator`] so the two can be compared.
pub fn proposed_direct_oracle(
    history: &[(Vector, f64)],
    mu: f64,
    delta: f64,
    theta0: &Vector,
    r0: &SymMatrix,
) -> Result<Vector> {
    let mut r = r0.clone();
    let mut theta = theta0.clone();
    for (phi, y) in history {
        let innovation = y - phi.dot(&theta);
        r.scale_in_place(mu);
        r.add_outer(phi, 1.0);
        r.add_scaled_identity(delta);
        let p = invert(&r)?;
        theta.add_scaled_in_place(&p.mat_vec(phi), innovation);
    }
    Ok(theta)
}
