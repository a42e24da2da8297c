//! Per-step trace records and their CSV representation.
//!
//! One CSV row per (plant step, algorithm); floats are written in
//! scientific notation with 17 significant digits so a parse of the file
//! reproduces every value exactly.

use super::{HarnessError, Result};
use crate::estimator::AlgoKind;
use crate::linalg::Vector;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const CSV_HEADER: &str =
    "t,x1,x2,r,delta_a,y,algo,theta1,theta2,theta3,theta4,theta5,theta6,V,rmse,lam_min_R,lam_max_R,beta,pe,windup";

/// Estimator-side values recorded for one algorithm at one step.
#[derive(Debug, Clone)]
pub struct AlgoStepData {
    pub algo: AlgoKind,
    pub theta_hat: Vector,
    pub v: f64,
    pub rmse: f64,
    pub lam_min_r: f64,
    pub lam_max_r: f64,
    /// DF1 forgetting weight; empty CSV field for the other variants.
    pub beta: Option<f64>,
    pub windup: bool,
}

/// One plant step with the per-algorithm estimator data.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub r: f64,
    pub delta_a: f64,
    pub y: f64,
    pub pe: bool,
    pub algos: Vec<AlgoStepData>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the trace: a header row, then one line per (step, algorithm).
pub fn emit_csv(trace: &[StepRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}").map_err(|e| io_err(path, e))?;
    for rec in trace {
        for algo in &rec.algos {
            let beta = algo.beta.map(fmt).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt(rec.t),
                fmt(rec.x1),
                fmt(rec.x2),
                fmt(rec.r),
                fmt(rec.delta_a),
                fmt(rec.y),
                algo.algo.label(),
                fmt(algo.theta_hat.get(0)),
                fmt(algo.theta_hat.get(1)),
                fmt(algo.theta_hat.get(2)),
                fmt(algo.theta_hat.get(3)),
                fmt(algo.theta_hat.get(4)),
                fmt(algo.theta_hat.get(5)),
                fmt(algo.v),
                fmt(algo.rmse),
                fmt(algo.lam_min_r),
                fmt(algo.lam_max_r),
                beta,
                rec.pe as u8,
                algo.windup as u8,
            )
            .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a trace written by [`emit_csv`], regrouping rows into one
/// [`StepRecord`] per plant step.
pub fn read_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut trace: Vec<StepRecord> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != CSV_HEADER {
                return Err(HarnessError::TraceParse {
                    line: lineno,
                    msg: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 20 {
            return Err(HarnessError::TraceParse {
                line: lineno,
                msg: format!("expected 20 fields, got {}", fields.len()),
            });
        }
        let num = |idx: usize| -> Result<f64> {
            fields[idx].parse::<f64>().map_err(|_| HarnessError::TraceParse {
                line: lineno,
                msg: format!("field {} is not a number: `{}`", idx + 1, fields[idx]),
            })
        };
        let flag = |idx: usize| -> Result<bool> {
            match fields[idx] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(HarnessError::TraceParse {
                    line: lineno,
                    msg: format!("field {} is not a 0/1 flag: `{other}`", idx + 1),
                }),
            }
        };

        let t = num(0)?;
        let algo = AlgoKind::from_label(fields[6]).ok_or_else(|| HarnessError::TraceParse {
            line: lineno,
            msg: format!("unknown algorithm `{}`", fields[6]),
        })?;
        let theta_hat = Vector::new(vec![
            num(7)?,
            num(8)?,
            num(9)?,
            num(10)?,
            num(11)?,
            num(12)?,
        ])
        .map_err(|e| HarnessError::TraceParse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let beta = if fields[17].is_empty() {
            None
        } else {
            Some(num(17)?)
        };
        let data = AlgoStepData {
            algo,
            theta_hat,
            v: num(13)?,
            rmse: num(14)?,
            lam_min_r: num(15)?,
            lam_max_r: num(16)?,
            beta,
            windup: flag(19)?,
        };

        let same_step = trace
            .last()
            .is_some_and(|rec: &StepRecord| rec.t.to_bits() == t.to_bits());
        if same_step {
            trace.last_mut().unwrap().algos.push(data);
        } else {
            trace.push(StepRecord {
                t,
                x1: num(1)?,
                x2: num(2)?,
                r: num(3)?,
                delta_a: num(4)?,
                y: num(5)?,
                pe: flag(18)?,
                algos: vec![data],
            });
        }
    }
    Ok(trace)
}
