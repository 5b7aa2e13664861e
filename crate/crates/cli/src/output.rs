//! Metric emission: CSV and JSON tables plus gnuplot-ready columnar data,
//! all byte-deterministic for a fixed config and seed.

use anyhow::{Context, Result};
use ringkey_core::quantizer::MultiLevelQuantizer;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::experiment::{MetricsRow, MetricsTable};

/// Content hash of a quantizer document (its canonical JSON form), used to
/// tie emitted keys and metrics to the exact design that produced them.
pub fn quantizer_content_hash(q: &MultiLevelQuantizer, eta: f64, excursion: u32) -> String {
    let doc = q.to_document(eta, excursion);
    let json = serde_json::to_string(&doc).expect("quantizer document serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(2 * digest.len());
    for byte in digest {
        write!(out, "{byte:02x}").expect("hex into string");
    }
    out
}

pub const METRICS_COLUMNS: &[&str] = &[
    "protocol",
    "constellation",
    "design_pair",
    "snr_db",
    "m",
    "b",
    "beta",
    "blocks",
    "seed",
    "eta_used",
    "excursion_e",
    "feasible",
    "converged",
    "analytic_p_c",
    "analytic_ser",
    "design_entropy_bits",
    "n_group",
    "n_pairwise",
    "rate_group",
    "rate_pairwise",
    "mismatch_group",
    "mismatch_pairwise",
    "entropy_group_bits",
    "entropy_pairwise_bits",
    "leak_mi_bits",
    "leak_bias_bound_bits",
    "leak_jackknife_se_bits",
    "quantizer_hash",
];

fn row_fields(r: &MetricsRow) -> Vec<String> {
    vec![
        r.protocol.clone(),
        r.constellation.clone(),
        r.design_pair.clone(),
        r.snr_db.to_string(),
        r.m.to_string(),
        r.b.to_string(),
        r.beta.to_string(),
        r.blocks.to_string(),
        r.seed.to_string(),
        r.eta_used.to_string(),
        r.excursion_e.to_string(),
        r.feasible.to_string(),
        r.converged.to_string(),
        r.analytic_p_c.to_string(),
        r.analytic_ser.to_string(),
        r.design_entropy_bits.to_string(),
        r.n_group.to_string(),
        r.n_pairwise.to_string(),
        r.rate_group.to_string(),
        r.rate_pairwise.to_string(),
        r.mismatch_group.to_string(),
        r.mismatch_pairwise.to_string(),
        r.entropy_group_bits.to_string(),
        r.entropy_pairwise_bits.to_string(),
        r.leak_mi_bits.to_string(),
        r.leak_bias_bound_bits.to_string(),
        r.leak_jackknife_se_bits.to_string(),
        r.quantizer_hash.clone(),
    ]
}

pub fn metrics_csv(table: &MetricsTable) -> String {
    let mut out = String::new();
    let cfg = serde_json::to_string(&table.config).expect("config serializes");
    let _ = writeln!(out, "# config={cfg}");
    let _ = writeln!(out, "{}", METRICS_COLUMNS.join(","));
    for row in &table.rows {
        let _ = writeln!(out, "{}", row_fields(row).join(","));
    }
    out
}

/// Parses a metrics CSV produced by [`metrics_csv`] back into rows.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("protocol,") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != METRICS_COLUMNS.len() {
            anyhow::bail!("metrics row has {} fields, expected {}", f.len(), METRICS_COLUMNS.len());
        }
        rows.push(MetricsRow {
            protocol: f[0].to_string(),
            constellation: f[1].to_string(),
            design_pair: f[2].to_string(),
            snr_db: f[3].parse()?,
            m: f[4].parse()?,
            b: f[5].parse()?,
            beta: f[6].parse()?,
            blocks: f[7].parse()?,
            seed: f[8].parse()?,
            eta_used: f[9].parse()?,
            excursion_e: f[10].parse()?,
            feasible: f[11].parse()?,
            converged: f[12].parse()?,
            analytic_p_c: f[13].parse()?,
            analytic_ser: f[14].parse()?,
            design_entropy_bits: f[15].parse()?,
            n_group: f[16].parse()?,
            n_pairwise: f[17].parse()?,
            rate_group: f[18].parse()?,
            rate_pairwise: f[19].parse()?,
            mismatch_group: f[20].parse()?,
            mismatch_pairwise: f[21].parse()?,
            entropy_group_bits: f[22].parse()?,
            entropy_pairwise_bits: f[23].parse()?,
            leak_mi_bits: f[24].parse()?,
            leak_bias_bound_bits: f[25].parse()?,
            leak_jackknife_se_bits: f[26].parse()?,
            quantizer_hash: f[27].to_string(),
        });
    }
    Ok(rows)
}

/// Key-rate curves against SNR, one indexed block per (constellation,
/// design pair, m) combination, gnuplot `index` friendly.
pub fn rate_vs_snr_dat(table: &MetricsTable) -> String {
    let mut out = String::new();
    let mut groups: BTreeSet<(String, String, u32)> = BTreeSet::new();
    for r in &table.rows {
        groups.insert((r.constellation.clone(), r.design_pair.clone(), r.m));
    }
    for (constellation, pair, m) in groups {
        let _ = writeln!(out, "# constellation={constellation} design_pair={pair} m={m}");
        let _ = writeln!(out, "# snr_db rate_group rate_pairwise mismatch_group feasible");
        let mut rows: Vec<&MetricsRow> = table
            .rows
            .iter()
            .filter(|r| r.constellation == constellation && r.design_pair == pair && r.m == m)
            .collect();
        rows.sort_by(|a, b| a.snr_db.partial_cmp(&b.snr_db).expect("finite snr"));
        for r in rows {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                r.snr_db, r.rate_group, r.rate_pairwise, r.mismatch_group, r.feasible as u8
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out);
    }
    out
}

/// Key-rate curves against the alphabet exponent at fixed SNR.
pub fn rate_vs_m_dat(table: &MetricsTable) -> String {
    let mut out = String::new();
    let mut snrs: BTreeSet<u64> = BTreeSet::new();
    for r in &table.rows {
        snrs.insert(r.snr_db.to_bits());
    }
    for bits in snrs {
        let snr = f64::from_bits(bits);
        let _ = writeln!(out, "# snr_db={snr}");
        let _ = writeln!(out, "# m rate_group rate_pairwise mismatch_group feasible");
        let mut rows: Vec<&MetricsRow> =
            table.rows.iter().filter(|r| r.snr_db == snr).collect();
        rows.sort_by_key(|r| (r.constellation.clone(), r.design_pair.clone(), r.m));
        for r in rows {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                r.m, r.rate_group, r.rate_pairwise, r.mismatch_group, r.feasible as u8
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out);
    }
    out
}

/// Writes the standard output set (CSV, JSON, figure data) into `dir`.
pub fn emit_outputs(table: &MetricsTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("metrics.csv"), metrics_csv(table))?;
    let json = serde_json::to_string_pretty(table).expect("table serializes");
    fs::write(dir.join("metrics.json"), json)?;
    fs::write(dir.join("rate_vs_snr.dat"), rate_vs_snr_dat(table))?;
    fs::write(dir.join("rate_vs_m.dat"), rate_vs_m_dat(table))?;
    Ok(())
}
