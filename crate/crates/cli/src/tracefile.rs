//! Readers for the simulator's trace CSV and for plain distribution grids,
//! so designs can be driven from files produced by earlier runs.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use ringkey_core::protocol::ProtocolKind;
use ringkey_core::quantizer::{JointDistribution, SupportKind};
use std::path::Path;

/// Trace read back from the simulator's CSV export. Degenerate blocks are
/// dropped on import.
#[derive(Debug, Clone)]
pub struct ImportedTrace {
    pub protocol: Option<ProtocolKind>,
    pub node1: Vec<Complex64>,
    pub node2: Vec<Complex64>,
    pub node3: Vec<Complex64>,
}

impl ImportedTrace {
    pub fn unfold(&self, node: usize) -> Vec<f64> {
        let src = match node {
            1 => &self.node1,
            2 => &self.node2,
            3 => &self.node3,
            _ => panic!("node index must be 1, 2 or 3"),
        };
        src.iter().flat_map(|v| [v.re, v.im]).collect()
    }
}

pub fn read_trace_csv(path: &Path) -> Result<ImportedTrace> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading trace {}", path.display()))?;
    let mut protocol = None;
    let mut node1 = Vec::new();
    let mut node2 = Vec::new();
    let mut node3 = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some(p) = token.strip_prefix("protocol=") {
                    protocol = p.parse::<ProtocolKind>().ok();
                }
            }
            continue;
        }
        if line.starts_with("block,") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            bail!("trace row has {} fields, expected 10", f.len());
        }
        let degenerate: u8 = f[9].parse()?;
        if degenerate != 0 {
            continue;
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse::<f64>()
                .with_context(|| format!("parsing field {i} of trace row"))
        };
        node1.push(Complex64::new(num(1)?, num(2)?));
        node2.push(Complex64::new(num(3)?, num(4)?));
        node3.push(Complex64::new(num(5)?, num(6)?));
    }
    Ok(ImportedTrace {
        protocol,
        node1,
        node2,
        node3,
    })
}

/// Distribution grid CSV: `x,y,mass` rows (header optional). Grid points
/// absent from the file carry zero mass.
pub fn read_distribution_csv(path: &Path) -> Result<JointDistribution> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading distribution {}", path.display()))?;
    let mut entries: Vec<(f64, f64, f64)> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("x,") {
            continue;
        }
        let f: Vec<&str> = trimmed.split(',').collect();
        if f.len() != 3 {
            bail!("distribution row has {} fields, expected x,y,mass", f.len());
        }
        entries.push((f[0].parse()?, f[1].parse()?, f[2].parse()?));
    }
    if entries.is_empty() {
        bail!("distribution file contains no data rows");
    }
    let mut xs: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let mut ys: Vec<f64> = entries.iter().map(|e| e.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(|a, b| a.partial_cmp(b).context("finite support").unwrap());
        v.dedup();
    }
    let ny = ys.len();
    let mut mass = vec![0.0; xs.len() * ny];
    for (x, y, m) in entries {
        let i = xs.partition_point(|&s| s < x);
        let j = ys.partition_point(|&s| s < y);
        mass[i * ny + j] += m;
    }
    JointDistribution::from_grid(xs, ys, mass, SupportKind::ExactPmf)
        .map_err(|e| anyhow::anyhow!("invalid distribution grid: {e}"))
}
