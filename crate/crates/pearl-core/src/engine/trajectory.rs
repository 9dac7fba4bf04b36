//! Per-round run records and the stable CSV schema
//! `round,iteration,communications,rel_error,rel_error_std,f_1..f_n,elapsed_ms`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::game::JointAction;

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// Hit the configured relative-error target before the round budget.
    Converged,
    /// Ran the full round budget.
    BudgetExhausted,
    /// Relative error crossed the divergence threshold or went non-finite.
    Diverged,
}

/// Snapshot at a synchronization point: the joint action after `round` full
/// rounds (`iteration = tau * round` local steps per player).
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: u64,
    pub iteration: u64,
    /// Server exchanges so far, counting the initial collect+distribute.
    pub communications: u64,
    pub iterate: JointAction,
    /// `||x - x*||^2 / ||x0 - x*||^2`; 0 when started at the equilibrium.
    pub rel_error: f64,
    /// Per-player objective values `f_i(x)`.
    pub objectives: Vec<f64>,
    /// Wall time since the run started, milliseconds.
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<RoundRecord>,
    pub status: RunStatus,
    pub tau: u64,
    /// Step size used in each executed round.
    pub gammas: Vec<f64>,
    pub x_star: JointAction,
    /// `||F(x*)||` of the reference equilibrium used for relative errors.
    pub x_star_residual: f64,
    /// `||x0 - x*||^2`.
    pub initial_sq_dist: f64,
    /// Rounds whose local phases actually ran.
    pub rounds_completed: u64,
    /// Model coordinates moved through the server over the completed rounds:
    /// per round, D uplink (each player sends its block) plus n * D downlink.
    pub exchange_volume_coords: u64,
}

impl Trajectory {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("a trajectory records at least round 0")
    }

    pub fn final_rel_error(&self) -> f64 {
        self.final_record().rel_error
    }

    /// Final squared distance to the reference equilibrium.
    pub fn final_sq_dist(&self) -> f64 {
        self.final_record().iterate.sq_dist(&self.x_star)
    }

    pub fn diverged(&self) -> bool {
        self.status == RunStatus::Diverged
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.records
            .iter()
            .map(|r| CsvRow {
                round: r.round,
                iteration: r.iteration,
                communications: r.communications,
                rel_error: r.rel_error,
                rel_error_std: 0.0,
                objectives: r.objectives.clone(),
                elapsed_ms: r.elapsed_ms,
            })
            .collect()
    }
}

/// One line of the export schema. Aggregated curves fill `rel_error_std`;
/// single runs leave it at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub round: u64,
    pub iteration: u64,
    pub communications: u64,
    pub rel_error: f64,
    pub rel_error_std: f64,
    pub objectives: Vec<f64>,
    pub elapsed_ms: f64,
}

pub fn csv_header(n_players: usize) -> String {
    let mut header = String::from("round,iteration,communications,rel_error,rel_error_std");
    for i in 1..=n_players {
        header.push_str(&format!(",f_{i}"));
    }
    header.push_str(",elapsed_ms");
    header
}

pub fn write_csv<W: Write>(out: &mut W, n_players: usize, rows: &[CsvRow]) -> io::Result<()> {
    writeln!(out, "{}", csv_header(n_players))?;
    for row in rows {
        write!(
            out,
            "{},{},{},{},{}",
            row.round, row.iteration, row.communications, row.rel_error, row.rel_error_std
        )?;
        for f in &row.objectives {
            write!(out, ",{f}")?;
        }
        writeln!(out, ",{}", row.elapsed_ms)?;
    }
    Ok(())
}

pub fn csv_string(n_players: usize, rows: &[CsvRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, n_players, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_schema_is_stable() {
        assert_eq!(
            csv_header(3),
            "round,iteration,communications,rel_error,rel_error_std,f_1,f_2,f_3,elapsed_ms"
        );
        let rows = vec![CsvRow {
            round: 0,
            iteration: 0,
            communications: 1,
            rel_error: 1.0,
            rel_error_std: 0.0,
            objectives: vec![0.25, -0.25],
            elapsed_ms: 0.5,
        }];
        let text = csv_string(2, &rows);
        assert_eq!(
            text,
            "round,iteration,communications,rel_error,rel_error_std,f_1,f_2,elapsed_ms\n\
             0,0,1,1,0,0.25,-0.25,0.5\n"
        );
    }
}
