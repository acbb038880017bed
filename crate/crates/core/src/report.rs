//! CSV emission for round logs and final summaries. Schemas are versioned in
//! the leading header line; rounds.csv carries only deterministic columns so
//! identical seeds reproduce it byte for byte.

use crate::config::RunSpec;
use crate::error::Result;
use crate::federation::{ExperimentOutput, RoundLog};
use std::fmt::Write as _;
use std::path::Path;

pub const ROUNDS_SCHEMA: &str = "#schema rounds.v1";
pub const SUMMARY_SCHEMA: &str = "#schema summary.v1";

pub fn rounds_csv(log: &[RoundLog], servers: usize) -> String {
    let mut out = String::new();
    out.push_str(ROUNDS_SCHEMA);
    out.push('\n');
    out.push_str("round,imputation,global_loss");
    for j in 0..servers {
        let _ = write!(out, ",acc_s{j},f1_s{j}");
    }
    out.push('\n');
    for entry in log {
        let _ = write!(
            out,
            "{},{},{}",
            entry.round,
            if entry.imputation { 1 } else { 0 },
            entry.global_loss
        );
        for j in 0..servers {
            let _ = write!(out, ",{},{}", entry.server_acc[j], entry.server_f1[j]);
        }
        out.push('\n');
    }
    out
}

pub fn summary_csv(spec: &RunSpec, result: &ExperimentOutput, wall_ms_total: f64) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_SCHEMA);
    out.push('\n');
    out.push_str("key,value\n");
    let mut push = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    push("dataset", spec.dataset.clone());
    push("mode", spec.cfg.mode.as_str().to_string());
    push("seed", spec.cfg.seed.to_string());
    push("clients", spec.cfg.clients.to_string());
    push("servers", spec.cfg.servers.to_string());
    push("rounds", spec.cfg.rounds.to_string());
    push("labeled_ratio", format!("{}", spec.cfg.labeled_ratio));
    push("test_nodes", result.predictions.len().to_string());
    push("final_acc", format!("{}", result.final_metrics.acc));
    push("final_macro_f1", format!("{}", result.final_metrics.macro_f1));
    let sizes: Vec<usize> = result
        .partition
        .subgraphs
        .iter()
        .map(|s| s.graph.node_count())
        .collect();
    let intra: usize = result
        .partition
        .subgraphs
        .iter()
        .map(|s| s.graph.edge_count())
        .sum();
    push(
        "mean_client_size",
        format!("{}", sizes.iter().sum::<usize>() as f64 / sizes.len() as f64),
    );
    push(
        "mean_intra_client_edges",
        format!("{}", intra as f64 / sizes.len() as f64),
    );
    push("severed_edges", result.partition.severed_edges.len().to_string());
    push("theta", format!("{}", result.resolved_theta));
    push("wall_ms_total", format!("{wall_ms_total:.1}"));
    out
}

/// Writes rounds.csv, summary.csv, config.resolved, and one checkpoint per
/// server into `dir`.
pub fn write_outputs(
    dir: &Path,
    spec: &RunSpec,
    result: &ExperimentOutput,
    wall_ms_total: f64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("rounds.csv"), rounds_csv(&result.log, spec.cfg.servers))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(spec, result, wall_ms_total))?;
    std::fs::write(
        dir.join("config.resolved"),
        crate::config::resolved_string(spec, result.resolved_theta),
    )?;
    for (j, params) in result.server_params.iter().enumerate() {
        crate::federation::write_checkpoint(&dir.join(format!("server_{j}.ckpt")), &params.to_flat())?;
    }
    Ok(())
}
