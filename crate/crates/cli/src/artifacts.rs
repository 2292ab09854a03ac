//! Deterministic artifact writers.
//!
//! All numeric output uses the shortest round-trip decimal form (Rust's
//! default `f64` display), Unix newlines, and sorted JSON object keys, so
//! identical runs produce byte-identical files. CSV column contracts:
//!
//! ```text
//! trajectory.csv   t, x1..xn, w1..wm          one row per grid point
//! estimate.csv     t, lhs, rhs, margin        per-point verification ledger
//! draws.csv        draw, seed, outcome, worst_margin
//!                  outcome: pass | fail | diverged
//! witness.csv      trajectory.csv columns for the falsification witness
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use gaincert_core::simulate::Trajectory;
use serde::Serialize;

use crate::config::ConfigError;

fn create(path: &Path) -> Result<BufWriter<File>, ConfigError> {
    let file = File::create(path)
        .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn io_err(path: &Path, e: std::io::Error) -> ConfigError {
    ConfigError(format!("cannot write {}: {e}", path.display()))
}

/// Writes a trajectory as `t, x1..xn, w1..wm`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), ConfigError> {
    let mut w = create(path)?;
    let mut header = String::from("t");
    for i in 1..=traj.state_dim() {
        header.push_str(&format!(",x{i}"));
    }
    for j in 1..=traj.input_dim() {
        header.push_str(&format!(",w{j}"));
    }
    writeln!(w, "{header}").map_err(|e| io_err(path, e))?;
    for k in 0..traj.len() {
        let mut row = format!("{}", traj.time(k));
        for v in traj.state(k) {
            row.push_str(&format!(",{v}"));
        }
        for v in traj.input(k) {
            row.push_str(&format!(",{v}"));
        }
        writeln!(w, "{row}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the per-point verification ledger `t, lhs, rhs, margin`.
pub fn write_estimate_csv(
    path: &Path,
    rows: impl Iterator<Item = (f64, f64, f64)>,
) -> Result<(), ConfigError> {
    let mut w = create(path)?;
    writeln!(w, "t,lhs,rhs,margin").map_err(|e| io_err(path, e))?;
    for (t, lhs, rhs) in rows {
        writeln!(w, "{t},{lhs},{rhs},{}", rhs - lhs).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// One row of the random-batch ledger.
pub struct DrawRow {
    pub draw: usize,
    pub seed: u64,
    /// `pass`, `fail`, or `diverged`.
    pub outcome: &'static str,
    /// Worst margin over the trajectory; NaN for diverged draws.
    pub worst_margin: f64,
}

/// Writes the per-draw ledger `draw, seed, outcome, worst_margin`.
pub fn write_draws_csv(path: &Path, rows: &[DrawRow]) -> Result<(), ConfigError> {
    let mut w = create(path)?;
    writeln!(w, "draw,seed,outcome,worst_margin").map_err(|e| io_err(path, e))?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.draw, r.seed, r.outcome, r.worst_margin)
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes a report as pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ConfigError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| ConfigError(format!("cannot serialize {}: {e}", path.display())))?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Summary of a `simulate` run.
#[derive(Serialize)]
pub struct SimulateSummary {
    pub model: String,
    pub state_dim: usize,
    pub input_dim: usize,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub diverged: bool,
    /// Set when the run diverged: the last accepted time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_state: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_l2_sq: Option<f64>,
}

/// Report for a single-trajectory `verify` run.
#[derive(Serialize)]
pub struct VerifyReport {
    pub certificate: String,
    pub model: String,
    pub pass: bool,
    pub worst_margin: f64,
    pub worst_time: f64,
    pub lhs_at_worst: f64,
    pub rhs_at_worst: f64,
    pub tolerance: f64,
    pub samples: usize,
}

/// Report for a random-batch `verify` run.
#[derive(Serialize)]
pub struct BatchReport {
    pub certificate: String,
    pub model: String,
    pub total: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_seed: Option<u64>,
    pub failing_seeds: Vec<u64>,
    pub diverged_seeds: Vec<u64>,
    pub tolerance: f64,
}

/// Verdict report for the `smallgain` command.
#[derive(Serialize)]
pub struct SmallgainReport {
    pub pass: bool,
    pub zero_at_zero: bool,
    pub monotone_on_grid: bool,
    pub unbounded_advisory: bool,
    pub detail: String,
}

/// Failure document for `compose` runs that reject the interconnection.
#[derive(Serialize)]
pub struct FailureDoc {
    pub condition: String,
    pub detail: String,
}

/// Counterexample document for a successful `falsify` run.
#[derive(Serialize)]
pub struct CounterexampleDoc {
    pub x0: f64,
    pub t_star: f64,
    pub input_value: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin_ratio: f64,
}

/// Report for a `falsify` run where the claimed estimate held.
#[derive(Serialize)]
pub struct TargetHeldDoc {
    pub held: bool,
    pub detail: String,
}

/// One acceptance criterion's outcome.
#[derive(Serialize)]
pub struct CriterionDoc {
    pub index: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Full acceptance-suite report.
#[derive(Serialize)]
pub struct AcceptanceDoc {
    pub pass: bool,
    pub criteria: Vec<CriterionDoc>,
}
