//! The four forgetting-factor RLS variants behind one step interface.
//!
//! All variants share the estimate update
//! `theta(t) = theta(t-1) + K(t) phi(t) (y(t) - phi(t)^T theta(t-1))`
//! and the information-matrix recursion `R(t) = F(t) R(t-1) + phi phi^T`;
//! they differ in the gain `K(t)` and the forgetting matrix `F(t)`:
//!
//! | variant     | K(t)                          | F(t)                                      |
//! |-------------|-------------------------------|-------------------------------------------|
//! | EF          | P(t-1)/(mu + phi^T P phi)     | mu I                                      |
//! | DF1         | P(t-1)/(1 + phi^T P phi)      | I - (1 - beta) phi phi^T P(t-1)           |
//! | DF2         | P(t)                          | I - (1-mu) R(t-1) phi phi^T / phi^T R phi |
//! | proposed EF | P(t)                          | mu I + delta P(t-1)                       |
//!
//! `R` is the single source of truth: `P` is refreshed by explicit
//! inversion (and symmetrization) after every information update, so all
//! four variants share one code path and the eigenvalue monitors see the
//! exact matrix the algorithm uses. Inversion-lemma recursions appear only
//! as test oracles.

use crate::linalg::{
    invert_unchecked, sym_eigenvalues, LinalgError, SymMatrix, Vector, SINGULARITY_FLOOR,
};
use thiserror::Error;

/// Default degenerate-regressor guard on `‖phi‖^2`.
pub const DEFAULT_PHI_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid estimator parameters: {0}")]
    InvalidParams(String),
    #[error("initial information matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("regressor dimension {got} does not match state dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("non-finite {0} at step {1}")]
    NonFinite(&'static str, u64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgoKind {
    Ef,
    Df1,
    Df2,
    ProposedEf,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 4] = [AlgoKind::Ef, AlgoKind::Df1, AlgoKind::Df2, AlgoKind::ProposedEf];

    pub fn label(&self) -> &'static str {
        match self {
            AlgoKind::Ef => "ef",
            AlgoKind::Df1 => "df1",
            AlgoKind::Df2 => "df2",
            AlgoKind::ProposedEf => "pef",
        }
    }

    pub fn from_label(s: &str) -> Option<AlgoKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ef" => Some(AlgoKind::Ef),
            "df1" => Some(AlgoKind::Df1),
            "df2" => Some(AlgoKind::Df2),
            "pef" | "proposed" | "proposed_ef" => Some(AlgoKind::ProposedEf),
            _ => None,
        }
    }
}

impl std::fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Algorithm selection plus its tuning constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoParams {
    pub kind: AlgoKind,
    /// Forgetting factor, strictly inside (0, 1).
    pub mu: f64,
    /// Information floor gain; meaningful only for [`AlgoKind::ProposedEf`].
    pub delta: f64,
    /// Degenerate-regressor guard on `‖phi‖^2` for the DF variants.
    pub phi_norm_floor: f64,
}

impl AlgoParams {
    pub fn new(kind: AlgoKind, mu: f64) -> Result<Self> {
        Self::build(kind, mu, 0.0, DEFAULT_PHI_NORM_FLOOR)
    }

    pub fn proposed_ef(mu: f64, delta: f64) -> Result<Self> {
        Self::build(AlgoKind::ProposedEf, mu, delta, DEFAULT_PHI_NORM_FLOOR)
    }

    pub fn with_phi_norm_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor >= 0.0) {
            return Err(EstimatorError::InvalidParams(format!(
                "phi_norm_floor must be >= 0, got {floor}"
            )));
        }
        self.phi_norm_floor = floor;
        Ok(self)
    }

    fn build(kind: AlgoKind, mu: f64, delta: f64, phi_norm_floor: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(EstimatorError::InvalidParams(format!(
                "mu must lie in (0, 1), got {mu}"
            )));
        }
        if kind == AlgoKind::ProposedEf && !(delta > 0.0) {
            return Err(EstimatorError::InvalidParams(format!(
                "delta must be > 0 for the proposed EF, got {delta}"
            )));
        }
        Ok(Self {
            kind,
            mu,
            delta,
            phi_norm_floor,
        })
    }
}

/// One regressor/output sample.
#[derive(Debug, Clone)]
pub struct StepInput {
    pub phi: Vector,
    pub y: f64,
}

/// Per-step results needed by the monitors and the trace writer.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub theta_hat: Vector,
    /// `y - phi^T theta(t-1)`
    pub innovation: f64,
    /// `K(t) phi(t)`
    pub gain_vec: Vector,
    pub lam_min_r: f64,
    pub lam_max_r: f64,
    /// DF1 scalar forgetting weight; negative values are legitimate.
    pub beta: Option<f64>,
    /// True while the EF information matrix is below the singularity floor
    /// and the covariance is frozen at its last valid value.
    pub windup: bool,
    /// True when the degenerate-regressor guard forced `F = I`.
    pub forgetting_skipped: bool,
}

/// Estimator state: estimate, information matrix, covariance, step counter.
///
/// Single-writer: calls to [`Estimator::step`] on one value must be
/// serialized; distinct estimators are independent.
#[derive(Debug, Clone)]
pub struct Estimator {
    params: AlgoParams,
    theta_hat: Vector,
    r: SymMatrix,
    p: SymMatrix,
    t: u64,
    windup: bool,
}

impl Estimator {
    /// Requires a positive-definite `r0` (smallest eigenvalue above the
    /// singularity floor); the covariance starts as its exact inverse.
    pub fn init(params: AlgoParams, theta0: Vector, r0: SymMatrix) -> Result<Self> {
        if theta0.dim() != r0.dim() {
            return Err(EstimatorError::DimensionMismatch {
                got: theta0.dim(),
                want: r0.dim(),
            });
        }
        let eigs = sym_eigenvalues(&r0)?;
        if eigs[0] <= SINGULARITY_FLOOR {
            return Err(EstimatorError::NotPositiveDefinite(eigs[0]));
        }
        let p = invert_unchecked(&r0)?;
        Ok(Self {
            params,
            theta_hat: theta0,
            r: r0,
            p,
            t: 0,
            windup: false,
        })
    }

    pub fn params(&self) -> &AlgoParams {
        &self.params
    }

    pub fn theta_hat(&self) -> &Vector {
        &self.theta_hat
    }

    /// Information matrix R(t).
    pub fn information(&self) -> &SymMatrix {
        &self.r
    }

    /// Covariance P(t) = R(t)^-1 (frozen at the last valid inverse while
    /// the EF windup flag is raised).
    pub fn covariance(&self) -> &SymMatrix {
        &self.p
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn windup(&self) -> bool {
        self.windup
    }

    /// Lyapunov function `V = (1/2) (theta_hat - theta)^T R (theta_hat - theta)`.
    pub fn lyapunov(&self, theta_true: &Vector) -> Result<f64> {
        if theta_true.dim() != self.theta_hat.dim() {
            return Err(EstimatorError::DimensionMismatch {
                got: theta_true.dim(),
                want: self.theta_hat.dim(),
            });
        }
        let err = self.theta_hat.sub(theta_true);
        Ok(0.5 * self.r.quad_form(&err))
    }

    pub fn step(&mut self, input: &StepInput) -> Result<StepOutput> {
        let phi = &input.phi;
        if phi.dim() != self.theta_hat.dim() {
            return Err(EstimatorError::DimensionMismatch {
                got: phi.dim(),
                want: self.theta_hat.dim(),
            });
        }
        if !input.y.is_finite() {
            return Err(EstimatorError::NonFinite("measurement", self.t));
        }

        let mu = self.params.mu;
        let innovation = input.y - phi.dot(&self.theta_hat);
        let phi_norm_sq = phi.norm_sq();
        let degenerate = phi_norm_sq < self.params.phi_norm_floor;

        let mut beta = None;
        let mut forgetting_skipped = false;

        // Gains that read the prior covariance are taken before R changes.
        let pre_gain = match self.params.kind {
            AlgoKind::Ef => {
                let p_phi = self.p.mat_vec(phi);
                let denom = mu + phi.dot(&p_phi);
                Some(p_phi.scaled(1.0 / denom))
            }
            AlgoKind::Df1 => {
                if degenerate {
                    forgetting_skipped = true;
                    None
                } else {
                    let p_phi = self.p.mat_vec(phi);
                    let s = phi.dot(&p_phi);
                    // beta may be negative; it is deliberately not clamped.
                    beta = Some(mu - (1.0 - mu) / s);
                    Some(p_phi.scaled(1.0 / (1.0 + s)))
                }
            }
            AlgoKind::Df2 | AlgoKind::ProposedEf => None,
        };

        // Information update R(t) = F(t) R(t-1) + phi phi^T in realized form.
        match self.params.kind {
            AlgoKind::Ef => {
                self.r.scale_in_place(mu);
                self.r.add_outer(phi, 1.0);
            }
            AlgoKind::Df1 => {
                match beta {
                    // F R + phi phi^T collapses to R + beta phi phi^T
                    // because phi phi^T P R = phi phi^T.
                    Some(b) => self.r.add_outer(phi, b),
                    None => self.r.add_outer(phi, 1.0), // F = I
                }
            }
            AlgoKind::Df2 => {
                let r_phi = self.r.mat_vec(phi);
                let q = phi.dot(&r_phi);
                if degenerate || q < 1e-12 * phi_norm_sq {
                    forgetting_skipped = true;
                    self.r.add_outer(phi, 1.0); // F = I, pure accrual
                } else {
                    // F R = R - (1-mu) (R phi)(R phi)^T / (phi^T R phi)
                    self.r.add_outer(&r_phi, -(1.0 - mu) / q);
                    self.r.add_outer(phi, 1.0);
                }
            }
            AlgoKind::ProposedEf => {
                self.r.scale_in_place(mu);
                self.r.add_outer(phi, 1.0);
                self.r.add_scaled_identity(self.params.delta);
            }
        }
        if !self.r.is_finite() {
            return Err(EstimatorError::NonFinite("information matrix", self.t));
        }

        // Conditioning check and covariance refresh.
        let eigs = sym_eigenvalues(&self.r)?;
        let lam_min_r = eigs[0];
        let lam_max_r = *eigs.last().unwrap();
        if lam_min_r > SINGULARITY_FLOOR {
            self.p = invert_unchecked(&self.r)?;
            self.windup = false;
        } else if self.params.kind == AlgoKind::Ef {
            // Expected failure mode without persistent excitation: keep the
            // last valid covariance so the divergence stays observable.
            self.windup = true;
        } else {
            return Err(EstimatorError::Linalg(LinalgError::NearSingular {
                min_eigenvalue: lam_min_r,
            }));
        }

        let gain_vec = match self.params.kind {
            AlgoKind::Ef | AlgoKind::Df1 => {
                pre_gain.unwrap_or_else(|| Vector::zeros(phi.dim()))
            }
            AlgoKind::Df2 => {
                if forgetting_skipped {
                    Vector::zeros(phi.dim())
                } else {
                    self.p.mat_vec(phi)
                }
            }
            AlgoKind::ProposedEf => self.p.mat_vec(phi),
        };

        self.theta_hat.add_scaled_in_place(&gain_vec, innovation);
        self.t += 1;

        if !self.theta_hat.is_finite() || !gain_vec.is_finite() || !innovation.is_finite() {
            return Err(EstimatorError::NonFinite("estimate", self.t));
        }

        Ok(StepOutput {
            theta_hat: self.theta_hat.clone(),
            innovation,
            gain_vec,
            lam_min_r,
            lam_max_r,
            beta,
            windup: self.windup,
            forgetting_skipped,
        })
    }
}

/// Design-time admissibility of the proposed-EF floor gain:
/// `delta <= (1 - mu) * lambda_min(R(0))`.
pub fn check_delta_admissible(mu: f64, delta: f64, r0: &SymMatrix) -> Result<bool> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(EstimatorError::InvalidParams(format!(
            "mu must lie in (0, 1), got {mu}"
        )));
    }
    if !(delta > 0.0) {
        return Err(EstimatorError::InvalidParams(format!(
            "delta must be > 0, got {delta}"
        )));
    }
    let eigs = sym_eigenvalues(r0)?;
    Ok(delta <= (1.0 - mu) * eigs[0])
}
