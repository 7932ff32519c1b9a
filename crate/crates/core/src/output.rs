//! CSV and manifest emission for run outputs.
//!
//! Each replication writes into its own subdirectory:
//! `trades.csv`, `opinions.csv`, `summary.csv` and finally `manifest.json`.
//! Opinions use fixed 9-decimal text so outputs are byte-stable.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::session::{OpinionSample, RunOutput, TapeRow};

pub const TRADES_HEADER: &str = "tick,period,price,quantity,buyer_id,seller_id";
pub const OPINIONS_HEADER: &str = "tick,agent_id,value,uncertainty";
pub const SUMMARY_HEADER: &str =
    "period,mean_price,trade_count,default_value,half_k_default_value,y_metric_final,efficiency";

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub replication: u32,
    pub artifacts: Vec<ArtifactEntry>,
}

fn opt(v: Option<f64>, places: usize) -> String {
    v.map(|x| format!("{x:.places$}")).unwrap_or_default()
}

pub fn trades_csv(tape: &[TapeRow]) -> String {
    let mut s = String::with_capacity(32 * (tape.len() + 1));
    s.push_str(TRADES_HEADER);
    s.push('\n');
    for t in tape {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            t.tick, t.period, t.price, t.quantity, t.buyer_id, t.seller_id
        );
    }
    s
}

pub fn opinions_csv(samples: &[OpinionSample]) -> String {
    let mut s = String::with_capacity(40 * (samples.len() + 1));
    s.push_str(OPINIONS_HEADER);
    s.push('\n');
    for o in samples {
        let _ = writeln!(s, "{},{},{:.9},{:.9}", o.tick, o.agent_id, o.value, o.uncertainty);
    }
    s
}

/// One row per period; the final-run metrics repeat on every row.
pub fn summary_csv(out: &RunOutput) -> String {
    let y = opt(out.final_metrics.y_metric, 9);
    let eff = opt(out.final_metrics.efficiency.map(|e| e.efficiency), 6);
    let mut s = String::new();
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for p in &out.period_summaries {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{},{}",
            p.period,
            opt(p.mean_price, 6),
            p.trade_count,
            p.default_value,
            p.half_k_default_value,
            y,
            eff
        );
    }
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn replication_dir(out_dir: &Path, replication: u32) -> PathBuf {
    out_dir.join(format!("rep_{replication:03}"))
}

/// Writes the three CSVs and then the manifest for one replication.
pub fn write_run(
    dir: &Path,
    out: &RunOutput,
    config_digest: &str,
    replication: u32,
) -> io::Result<RunManifest> {
    fs::create_dir_all(dir)?;
    // A stale manifest must not vouch for files being rewritten.
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path)?;
    }
    let files = [
        ("trades.csv", trades_csv(&out.tape), out.tape.len()),
        ("opinions.csv", opinions_csv(&out.opinion_series), out.opinion_series.len()),
        ("summary.csv", summary_csv(out), out.period_summaries.len()),
    ];
    let mut artifacts = Vec::with_capacity(files.len());
    for (name, body, rows) in files {
        fs::write(dir.join(name), body.as_bytes())?;
        artifacts.push(ArtifactEntry {
            file: name.to_string(),
            sha256: sha256_hex(body.as_bytes()),
            rows,
        });
    }
    let manifest = RunManifest {
        config_digest: config_digest.to_string(),
        seed: out.seed,
        replication,
        artifacts,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&manifest_path, json + "\n")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opinion_rows_use_nine_places() {
        let s = opinions_csv(&[OpinionSample {
            tick: 10,
            agent_id: 3,
            value: -0.5,
            uncertainty: 1.0 / 3.0,
        }]);
        assert_eq!(s, format!("{OPINIONS_HEADER}\n10,3,-0.500000000,0.333333333\n"));
    }

    #[test]
    fn trade_rows() {
        let s = trades_csv(&[TapeRow {
            tick: 5,
            period: 1,
            price: 95,
            quantity: 1,
            buyer_id: 2,
            seller_id: 7,
        }]);
        assert_eq!(s, format!("{TRADES_HEADER}\n5,1,95,1,2,7\n"));
    }
}
