//! Experiment configuration: the two golden cases and a flat key-value
//! file format (CLI flags override file values; see the repo README for
//! the schema).

use super::{HarnessError, Result};
use crate::analysis::PeConfig;
use crate::estimator::{AlgoKind, DEFAULT_PHI_NORM_FLOOR};
use crate::linalg::Vector;
use crate::wingrock::{ControllerGains, PlantSchedule, REGRESSOR_DIM};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    C1,
    C2,
    Custom,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseId::C1 => "C1",
            CaseId::C2 => "C2",
            CaseId::Custom => "custom",
        })
    }
}

impl FromStr for CaseId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(CaseId::C1),
            "C2" => Ok(CaseId::C2),
            "CUSTOM" => Ok(CaseId::Custom),
            _ => Err(HarnessError::UnknownCase(s.to_string())),
        }
    }
}

/// Wing-rock coefficients before the C1 jump (also the constant C2 vector).
pub fn theta_nominal() -> Vector {
    Vector::new(vec![0.8, 0.2314, 0.6918, -0.6245, 0.0095, 0.0214]).unwrap()
}

/// Wing-rock coefficients after the C1 jump at t = 50 s.
pub fn theta_post_jump() -> Vector {
    Vector::new(vec![0.88, 0.2198, 0.6295, 1.1856, 0.0114, 0.0208]).unwrap()
}

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case: CaseId,
    /// Simulated horizon in seconds; zero is allowed and yields an empty run.
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub algos: Vec<AlgoKind>,
    /// Forgetting factor for EF and the proposed EF.
    pub mu_ef: f64,
    /// Forgetting factor for the DF variants.
    pub mu_df: f64,
    /// Proposed-EF information floor gain.
    pub delta: f64,
    pub phi_norm_floor: f64,
    pub gains: ControllerGains,
    pub schedule: PlantSchedule,
    pub pe: PeConfig,
    pub x0: (f64, f64),
    /// Lyapunov checkpoint times reported in the summary (the final step is
    /// always appended).
    pub checkpoints: Vec<f64>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.duration >= 0.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "duration must be >= 0, got {}",
                self.duration
            )));
        }
        if self.algos.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "at least one algorithm must be selected".into(),
            ));
        }
        self.schedule.validate()?;
        Ok(())
    }

    /// Serializes to the flat key-value format. `parse` of the output
    /// reproduces the configuration exactly.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let algos: Vec<&str> = self.algos.iter().map(|a| a.label()).collect();
        s.push_str(&format!("case = {}\n", self.case));
        s.push_str(&format!("duration = {}\n", self.duration));
        s.push_str(&format!("dt = {}\n", self.dt));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("algos = {}\n", algos.join(",")));
        s.push_str(&format!("mu_ef = {}\n", self.mu_ef));
        s.push_str(&format!("mu_df = {}\n", self.mu_df));
        s.push_str(&format!("delta = {}\n", self.delta));
        s.push_str(&format!("phi_norm_floor = {}\n", self.phi_norm_floor));
        s.push_str(&format!("kp = {}\n", self.gains.kp));
        s.push_str(&format!("kd = {}\n", self.gains.kd));
        s.push_str(&format!("ref_amplitude = {}\n", self.gains.reference.amplitude));
        s.push_str(&format!("ref_period = {}\n", self.gains.reference.period));
        s.push_str(&format!(
            "ref_active_until = {}\n",
            self.gains.reference.active_until
        ));
        s.push_str(&format!("ref_hold = {}\n", self.gains.reference.hold));
        s.push_str(&format!("noise_start = {}\n", self.schedule.noise_start));
        s.push_str(&format!("noise_variance = {}\n", self.schedule.noise_variance));
        s.push_str(&format!("pe_window = {}\n", self.pe.window));
        s.push_str(&format!("pe_gamma = {}\n", self.pe.gamma));
        s.push_str(&format!("x1_0 = {}\n", self.x0.0));
        s.push_str(&format!("x2_0 = {}\n", self.x0.1));
        let cps: Vec<String> = self.checkpoints.iter().map(|c| c.to_string()).collect();
        s.push_str(&format!("checkpoints = {}\n", cps.join(",")));
        s.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        for (start, theta) in &self.schedule.theta_segments {
            let entries: Vec<String> = theta.as_slice().iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("theta_segment = {}: {}\n", start, entries.join(" ")));
        }
        s
    }

    /// Parses the flat key-value format. The `case` key selects the base
    /// configuration; every other key overrides it. `theta_segment` lines
    /// (repeatable, `start: v1 v2 v3 v4 v5 v6`) replace the schedule.
    pub fn parse_kv(text: &str) -> Result<ExperimentConfig> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::ConfigParse {
                    line: i + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            pairs.push((i + 1, key.trim().to_string(), value.trim().to_string()));
        }

        let case = pairs
            .iter()
            .find(|(_, k, _)| k == "case")
            .map(|(line, _, v)| {
                CaseId::from_str(v).map_err(|_| HarnessError::ConfigParse {
                    line: *line,
                    msg: format!("unknown case `{v}`"),
                })
            })
            .transpose()?
            .unwrap_or(CaseId::Custom);
        let mut config = match case {
            CaseId::Custom => custom_base(),
            id => builtin_case(id)?,
        };

        fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
            v.parse::<f64>().map_err(|_| HarnessError::ConfigParse {
                line,
                msg: format!("`{key}` expects a number, got `{v}`"),
            })
        }
        fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64> {
            v.parse::<u64>().map_err(|_| HarnessError::ConfigParse {
                line,
                msg: format!("`{key}` expects an integer, got `{v}`"),
            })
        }

        let mut segments: Vec<(f64, Vector)> = Vec::new();
        for (line, key, value) in pairs {
            match key.as_str() {
                "case" => {}
                "duration" => config.duration = parse_f64(line, &key, &value)?,
                "dt" => config.dt = parse_f64(line, &key, &value)?,
                "seed" => config.seed = parse_u64(line, &key, &value)?,
                "algos" => {
                    let mut algos = Vec::new();
                    for part in value.split(',') {
                        let Some(kind) = AlgoKind::from_label(part) else {
                            return Err(HarnessError::ConfigParse {
                                line,
                                msg: format!("unknown algorithm `{part}`"),
                            });
                        };
                        if !algos.contains(&kind) {
                            algos.push(kind);
                        }
                    }
                    config.algos = algos;
                }
                "mu_ef" => config.mu_ef = parse_f64(line, &key, &value)?,
                "mu_df" => config.mu_df = parse_f64(line, &key, &value)?,
                "delta" => config.delta = parse_f64(line, &key, &value)?,
                "phi_norm_floor" => config.phi_norm_floor = parse_f64(line, &key, &value)?,
                "kp" => config.gains.kp = parse_f64(line, &key, &value)?,
                "kd" => config.gains.kd = parse_f64(line, &key, &value)?,
                "ref_amplitude" => {
                    config.gains.reference.amplitude = parse_f64(line, &key, &value)?
                }
                "ref_period" => config.gains.reference.period = parse_f64(line, &key, &value)?,
                "ref_active_until" => {
                    config.gains.reference.active_until = parse_f64(line, &key, &value)?
                }
                "ref_hold" => config.gains.reference.hold = parse_f64(line, &key, &value)?,
                "noise_start" => config.schedule.noise_start = parse_f64(line, &key, &value)?,
                "noise_variance" => {
                    config.schedule.noise_variance = parse_f64(line, &key, &value)?
                }
                "pe_window" => {
                    config.pe = PeConfig::new(
                        parse_u64(line, &key, &value)? as usize,
                        config.pe.gamma,
                    )?;
                }
                "pe_gamma" => {
                    config.pe = PeConfig::new(config.pe.window, parse_f64(line, &key, &value)?)?;
                }
                "x1_0" => config.x0.0 = parse_f64(line, &key, &value)?,
                "x2_0" => config.x0.1 = parse_f64(line, &key, &value)?,
                "checkpoints" => {
                    let mut cps = Vec::new();
                    for part in value.split(',').filter(|p| !p.trim().is_empty()) {
                        cps.push(parse_f64(line, &key, part.trim())?);
                    }
                    config.checkpoints = cps;
                }
                "out_dir" => config.out_dir = PathBuf::from(&value),
                "theta_segment" => {
                    let Some((start, entries)) = value.split_once(':') else {
                        return Err(HarnessError::ConfigParse {
                            line,
                            msg: "theta_segment expects `start: v1 v2 v3 v4 v5 v6`".into(),
                        });
                    };
                    let start = parse_f64(line, &key, start.trim())?;
                    let vals: Vec<f64> = entries
                        .split_whitespace()
                        .map(|v| parse_f64(line, &key, v))
                        .collect::<Result<_>>()?;
                    if vals.len() != REGRESSOR_DIM {
                        return Err(HarnessError::ConfigParse {
                            line,
                            msg: format!(
                                "theta_segment expects {REGRESSOR_DIM} entries, got {}",
                                vals.len()
                            ),
                        });
                    }
                    segments.push((start, Vector::new(vals).unwrap()));
                }
                _ => {
                    return Err(HarnessError::ConfigParse {
                        line,
                        msg: format!("unknown key `{key}`"),
                    });
                }
            }
        }
        if !segments.is_empty() {
            config.schedule.theta_segments = segments;
        }
        config.validate()?;
        Ok(config)
    }
}

fn base_config(case: CaseId) -> ExperimentConfig {
    ExperimentConfig {
        case,
        duration: 100.0,
        dt: 0.01,
        seed: 42,
        algos: AlgoKind::ALL.to_vec(),
        mu_ef: 0.99,
        mu_df: 0.95,
        delta: 0.01,
        phi_norm_floor: DEFAULT_PHI_NORM_FLOOR,
        gains: ControllerGains::default(),
        schedule: PlantSchedule::constant(theta_nominal()),
        pe: PeConfig::default(),
        x0: (0.0, 0.0),
        checkpoints: vec![],
        out_dir: PathBuf::from("out"),
    }
}

fn custom_base() -> ExperimentConfig {
    base_config(CaseId::Custom)
}

/// The two golden experiment definitions.
///
/// C1: parameter jump at t = 50 s, measurement noise (variance 0.1) from
/// t = 60 s, reference active until 50 s, 100 s horizon.
/// C2: constant parameters, no noise, reference active until 30 s,
/// 150 s horizon.
pub fn builtin_case(id: CaseId) -> Result<ExperimentConfig> {
    match id {
        CaseId::C1 => {
            let mut config = base_config(CaseId::C1);
            config.schedule = PlantSchedule {
                theta_segments: vec![(0.0, theta_nominal()), (50.0, theta_post_jump())],
                noise_start: 60.0,
                noise_variance: 0.1,
                rng_seed: config.seed,
            };
            config.gains.reference.active_until = 50.0;
            config.checkpoints = vec![50.0, 60.0];
            Ok(config)
        }
        CaseId::C2 => {
            let mut config = base_config(CaseId::C2);
            config.duration = 150.0;
            config.schedule = PlantSchedule {
                theta_segments: vec![(0.0, theta_nominal())],
                noise_start: f64::INFINITY,
                noise_variance: 0.0,
                rng_seed: config.seed,
            };
            config.gains.reference.active_until = 30.0;
            // C2 keeps the well-damped coefficients, where the zero-trim
            // equilibrium is stable.
            config.gains.reference.hold = 0.0;
            config.checkpoints = vec![30.0];
            Ok(config)
        }
        CaseId::Custom => Err(HarnessError::UnknownCase(
            "custom has no builtin definition".into(),
        )),
    }
}
