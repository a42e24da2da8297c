//! Wing-rock roll dynamics with a fixed-gain aileron controller, scheduled
//! true parameters, and seeded measurement noise.
//!
//! The plant is the two-state model
//! `x1' = x2`, `x2' = Delta(x) + delta_a` with unit aileron effectiveness,
//! where the uncertainty `Delta(x) = phi(x)^T theta(t)` is linear in the
//! fixed regressor basis `phi(x) = [1, x1, x2, |x1| x2, |x2| x1, x1^3]`.
//! Estimation is open loop with respect to control: the controller never
//! sees the estimates.

use crate::linalg::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Dimension of the wing-rock regressor.
pub const REGRESSOR_DIM: usize = 6;

#[derive(Debug, Error)]
pub enum WingRockError {
    #[error("plant state diverged to a non-finite value at t = {0}")]
    Divergence(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("dimension mismatch: expected {REGRESSOR_DIM}, got {0}")]
    DimensionMismatch(usize),
}

pub type Result<T> = std::result::Result<T, WingRockError>;

/// Roll angle (rad), roll rate (rad/s), and simulation time (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
}

impl PlantState {
    pub fn new(x1: f64, x2: f64, t: f64) -> Self {
        Self { x1, x2, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.t.is_finite()
    }
}

/// Square-wave roll-angle reference: amplitude `A` with period `T` while
/// `t < active_until`, then a constant trim level `hold`.
///
/// A constant tail carries no excitation, which is the regime the
/// experiments need; the level itself decides where the closed loop
/// parks. The wing-rock coefficients with the raised `|x1| x2` term are
/// unstable around the `r = 0` equilibrium (roll angle ~0.69 rad), so
/// holding a negative trim keeps the plant in its damped region.
#[derive(Debug, Clone, PartialEq)]
pub struct RefSignal {
    pub amplitude: f64,
    pub period: f64,
    pub active_until: f64,
    pub hold: f64,
}

impl RefSignal {
    pub fn eval(&self, t: f64) -> f64 {
        if t >= self.active_until || self.period <= 0.0 {
            return self.hold;
        }
        let phase = t.rem_euclid(self.period);
        if phase < 0.5 * self.period {
            self.amplitude
        } else {
            -self.amplitude
        }
    }
}

/// Aileron feedback gains and the reference the loop tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub kp: f64,
    pub kd: f64,
    pub reference: RefSignal,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp: 1.5,
            kd: 1.3,
            reference: RefSignal {
                amplitude: 0.7,
                period: 10.0,
                active_until: 50.0,
                hold: -0.7,
            },
        }
    }
}

/// Piecewise-constant true parameter schedule plus the measurement-noise
/// window. Segment start times must be strictly increasing with the first
/// at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSchedule {
    pub theta_segments: Vec<(f64, Vector)>,
    pub noise_start: f64,
    pub noise_variance: f64,
    pub rng_seed: u64,
}

impl PlantSchedule {
    pub fn constant(theta: Vector) -> Self {
        Self {
            theta_segments: vec![(0.0, theta)],
            noise_start: f64::INFINITY,
            noise_variance: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_segments.is_empty() {
            return Err(WingRockError::InvalidSchedule(
                "at least one theta segment is required".into(),
            ));
        }
        if self.theta_segments[0].0 != 0.0 {
            return Err(WingRockError::InvalidSchedule(format!(
                "first segment must start at t = 0, got {}",
                self.theta_segments[0].0
            )));
        }
        for w in self.theta_segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(WingRockError::InvalidSchedule(format!(
                    "segment start times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for (_, theta) in &self.theta_segments {
            if theta.dim() != REGRESSOR_DIM {
                return Err(WingRockError::DimensionMismatch(theta.dim()));
            }
        }
        if !(self.noise_variance >= 0.0) {
            return Err(WingRockError::InvalidSchedule(format!(
                "noise variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// Active true parameter vector at time `t` (zero-order hold).
    pub fn theta_at(&self, t: f64) -> &Vector {
        let mut current = &self.theta_segments[0].1;
        for (start, theta) in &self.theta_segments {
            if t >= *start {
                current = theta;
            } else {
                break;
            }
        }
        current
    }
}

#[inline]
fn regressor_raw(x1: f64, x2: f64) -> [f64; REGRESSOR_DIM] {
    [1.0, x1, x2, x1.abs() * x2, x2.abs() * x1, x1.powi(3)]
}

/// `phi(x) = [1, x1, x2, |x1| x2, |x2| x1, x1^3]`
pub fn regressor(x: &PlantState) -> Vector {
    Vector::new(regressor_raw(x.x1, x.x2).to_vec())
        .expect("finite state yields finite regressor")
}

/// As [`regressor`], but `None` when the cubic/product terms overflow for
/// an extreme (diverging) state.
pub fn try_regressor(x: &PlantState) -> Option<Vector> {
    Vector::new(regressor_raw(x.x1, x.x2).to_vec()).ok()
}

/// `Delta(x) = phi(x)^T theta`
pub fn true_uncertainty(x: &PlantState, theta: &Vector) -> Result<f64> {
    if theta.dim() != REGRESSOR_DIM {
        return Err(WingRockError::DimensionMismatch(theta.dim()));
    }
    Ok(regressor(x).dot(theta))
}

/// `delta_a = Kp (r - x1) - Kd x2`
pub fn aileron(x: &PlantState, r: f64, g: &ControllerGains) -> f64 {
    g.kp * (r - x.x1) - g.kd * x.x2
}

/// Advances the plant one step of classical fourth-order Runge-Kutta with
/// the aileron command and true parameters held constant over the step.
pub fn integrate_step(
    x: &PlantState,
    theta: &Vector,
    delta_a: f64,
    dt: f64,
) -> Result<PlantState> {
    if theta.dim() != REGRESSOR_DIM {
        return Err(WingRockError::DimensionMismatch(theta.dim()));
    }
    // Raw arithmetic: intermediate stages may overflow during divergence
    // and must propagate to the finiteness check instead of panicking.
    let deriv = |x1: f64, x2: f64| -> (f64, f64) {
        let phi = regressor_raw(x1, x2);
        let delta: f64 = phi
            .iter()
            .zip(theta.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        (x2, delta + delta_a)
    };

    let (k1a, k1b) = deriv(x.x1, x.x2);
    let (k2a, k2b) = deriv(x.x1 + 0.5 * dt * k1a, x.x2 + 0.5 * dt * k1b);
    let (k3a, k3b) = deriv(x.x1 + 0.5 * dt * k2a, x.x2 + 0.5 * dt * k2b);
    let (k4a, k4b) = deriv(x.x1 + dt * k3a, x.x2 + dt * k3b);

    let next = PlantState::new(
        x.x1 + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        x.x2 + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
        x.t + dt,
    );
    if !next.is_finite() {
        return Err(WingRockError::Divergence(x.t));
    }
    Ok(next)
}

/// Reproducible Gaussian measurement-noise stream.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha12Rng,
    standard: Normal<f64>,
}

impl NoiseSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            standard: Normal::new(0.0, 1.0).expect("unit normal"),
        }
    }

    pub fn sample_standard(&mut self) -> f64 {
        self.standard.sample(&mut self.rng)
    }
}

/// Measured output `y = Delta(x) + nu` where `nu ~ N(0, noise_variance)`
/// once `t >= noise_start` and zero before.
pub fn measure(
    x: &PlantState,
    theta: &Vector,
    t: f64,
    sched: &PlantSchedule,
    noise: &mut NoiseSource,
) -> Result<f64> {
    let clean = true_uncertainty(x, theta)?;
    if t >= sched.noise_start && sched.noise_variance > 0.0 {
        Ok(clean + sched.noise_variance.sqrt() * noise.sample_standard())
    } else {
        Ok(clean)
    }
}
