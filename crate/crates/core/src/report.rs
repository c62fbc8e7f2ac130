//! Per-round metrics files.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use crate::error::{Error, Result};
use crate::fedsim::{ExperimentConfig, RoundRecord};

pub const CSV_HEADER: &str = "round,acc_composed,acc_avg_global,metadata_count,metadata_bytes,selection_fraction";

/// `rounds.csv` contents; fractions are written with six decimals.
pub fn rounds_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{},{:.6}",
            r.round, r.acc_composed, r.acc_avg_global, r.metadata_count, r.metadata_bytes, r.selection_fraction
        );
    }
    out
}

/// Final and best accuracies of both model paths, total metadata traffic
/// and the resolved configuration.
pub fn summary_json(records: &[RoundRecord], config: &ExperimentConfig) -> serde_json::Value {
    let best = |f: fn(&RoundRecord) -> f64| records.iter().map(f).reduce(f64::max);
    let last = records.last();
    json!({
        "rounds": records.len(),
        "mode": config.selection.name(),
        "final_acc_composed": last.map(|r| r.acc_composed),
        "final_acc_avg_global": last.map(|r| r.acc_avg_global),
        "best_acc_composed": best(|r| r.acc_composed),
        "best_acc_avg_global": best(|r| r.acc_avg_global),
        "total_metadata_bytes": records.iter().map(|r| r.metadata_bytes as u64).sum::<u64>(),
        "config": config,
    })
}

/// Writes `rounds.csv` and `summary.json` into `out_dir`, creating it.
pub fn emit_metrics(records: &[RoundRecord], config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv = out_dir.join("rounds.csv");
    std::fs::write(&csv, rounds_csv(records)).map_err(|e| Error::io(&csv, e))?;
    let summary = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary_json(records, config)).expect("summary serializes");
    std::fs::write(&summary, text + "\n").map_err(|e| Error::io(&summary, e))
}
