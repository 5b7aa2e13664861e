//! The experiment pipeline: simulate coherence blocks, estimate the design
//! pmf, design the quantizer for the mismatch target, run both consensus
//! variants and collect rates, mismatch, entropy and leakage per grid cell.

use anyhow::{Context, Result};
use rayon::prelude::*;
use ringkey_core::consensus::{
    self, group_consensus, pairwise_consensus, GroupConsensus, PairwiseConsensus,
};
use ringkey_core::constellation::SourceConstellation;
use ringkey_core::leakage::{bin_complex, tally, LeakageReport};
use ringkey_core::protocol::{
    simulate_trace, CsrTriple, CsrValue, NoiseParams, Phase4Broadcast, ProtocolKind, ProtocolTrace,
};
use ringkey_core::quantizer::{
    design_for_target, em_em, DesignReport, JointDistribution, QuantizerError,
    HISTOGRAM_BINS, HISTOGRAM_SPAN_SIGMAS,
};
use serde::{Deserialize, Serialize};

use crate::config::{ConstellationMode, DesignPair, ExperimentConfig};
use crate::output::quantizer_content_hash;

/// Per-component bin count when a continuous CSR must be discretized for
/// leakage tallies.
const CSR_LEAKAGE_BINS: usize = 8;
/// Per-component bin count for a continuous eavesdropper observation.
const EVE_LEAKAGE_BINS: usize = 64;
/// The designer only sees the selected node pair, while the group key also
/// carries the facilitator's disagreements plus finite-sample noise. The
/// design targets half of the configured mismatch bound so the measured
/// group mismatch stays under the configured value.
const DESIGN_TARGET_DERATE: f64 = 0.5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-cell seed: independent cells get independent streams
/// regardless of grid order or worker count.
pub fn cell_seed(master: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(master);
    for &t in tags {
        acc = splitmix64(acc ^ t);
    }
    acc
}

/// One grid cell of an experiment table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub protocol: String,
    pub constellation: String,
    pub design_pair: String,
    pub snr_db: f64,
    pub m: u32,
    pub b: u32,
    pub beta: f64,
    pub blocks: u64,
    pub seed: u64,
    pub eta_used: f64,
    pub excursion_e: u32,
    pub feasible: bool,
    pub converged: bool,
    pub analytic_p_c: f64,
    pub analytic_ser: f64,
    pub design_entropy_bits: f64,
    pub n_group: u64,
    pub n_pairwise: u64,
    pub rate_group: f64,
    pub rate_pairwise: f64,
    pub mismatch_group: f64,
    pub mismatch_pairwise: f64,
    pub entropy_group_bits: f64,
    pub entropy_pairwise_bits: f64,
    pub leak_mi_bits: f64,
    pub leak_bias_bound_bits: f64,
    pub leak_jackknife_se_bits: f64,
    pub quantizer_hash: String,
}

/// Experiment output: the config it was produced from plus one row per grid
/// cell, in deterministic grid order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsTable {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn all_infeasible(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| !r.feasible)
    }
}

/// Builds the constellation for one cell. The estimate marginal std is
/// `sqrt((1 + gamma) / 2)` per component; the facilitator-quantized protocol
/// quantizes the *sum* of two estimates instead.
pub fn cell_constellation(
    protocol: ProtocolKind,
    mode: ConstellationMode,
    m: u32,
    noise: &NoiseParams,
) -> Result<SourceConstellation> {
    let std = match protocol {
        ProtocolKind::Aqgsk => noise.sum_component_std(),
        _ => noise.estimate_component_std(),
    };
    let a = match mode {
        ConstellationMode::Uniform => SourceConstellation::uniform_inducing(m, std),
        ConstellationMode::Qam => SourceConstellation::regular_qam(m),
    };
    a.context("constellation construction")
}

/// Unfolded per-node real samples with degenerate blocks excluded.
pub struct NodeSamples {
    pub node1: Vec<f64>,
    pub node2: Vec<f64>,
    pub node3: Vec<f64>,
}

/// Component-major unfold (all in-phase, then all quadrature) with
/// degenerate blocks dropped; matches [`ProtocolTrace::unfold_real`].
pub fn unfold_nodes(trace: &ProtocolTrace, a: Option<&SourceConstellation>) -> NodeSamples {
    let kept: Vec<&ringkey_core::protocol::CsrTriple> =
        trace.triples.iter().filter(|t| !t.degenerate).collect();
    let unfold = |get: &dyn Fn(&ringkey_core::protocol::CsrTriple) -> CsrValue| -> Vec<f64> {
        let values: Vec<_> = kept.iter().map(|t| get(t).to_complex(a)).collect();
        let mut out = Vec::with_capacity(2 * values.len());
        out.extend(values.iter().map(|v| v.re));
        out.extend(values.iter().map(|v| v.im));
        out
    };
    NodeSamples {
        node1: unfold(&|t| t.node1),
        node2: unfold(&|t| t.node2),
        node3: unfold(&|t| t.node3),
    }
}

fn design_pair_samples<'a>(samples: &'a NodeSamples, pair: DesignPair) -> (&'a [f64], &'a [f64]) {
    match pair {
        DesignPair::Nodes12 => (&samples.node1, &samples.node2),
        DesignPair::Nodes13 => (&samples.node1, &samples.node3),
        DesignPair::Nodes23 => (&samples.node2, &samples.node3),
    }
}

/// Estimates the design distribution of a node pair: the exact pmf on the
/// alphabet levels for the ring protocol, a histogram otherwise.
pub fn estimate_design_pmf(
    protocol: ProtocolKind,
    a: &SourceConstellation,
    xs: &[f64],
    ys: &[f64],
) -> Result<JointDistribution, QuantizerError> {
    let pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    match protocol {
        ProtocolKind::Asqgsk => JointDistribution::from_discrete_pairs_with_support(
            a.levels().to_vec(),
            a.levels().to_vec(),
            &pairs,
        ),
        _ => JointDistribution::from_continuous_pairs(&pairs, HISTOGRAM_BINS, HISTOGRAM_SPAN_SIGMAS),
    }
}

/// Plug-in leakage metrics between the node-1 CSR and the phase-4
/// broadcast. Discrete symbols tally exactly; continuous values bin at the
/// documented resolutions.
pub fn leakage_metrics(
    triples: &[CsrTriple],
    noise: &NoiseParams,
) -> Result<(f64, f64, f64, f64, f64), QuantizerError> {
    let csr_span = 4.0 * noise.estimate_component_std();
    let eve_span = 4.0 * noise.sum_component_std();
    let pairs: Vec<((u16, u16), (i64, i64))> = triples
        .iter()
        .filter(|t| !t.degenerate)
        .map(|t| {
            let x = match t.node1 {
                CsrValue::Point(p) => (p.re_rank, p.im_rank),
                CsrValue::Continuous(v) => bin_complex(v, CSR_LEAKAGE_BINS, csr_span),
            };
            let y = match t.phase4 {
                Phase4Broadcast::RingSymbol(q) => (q.re, q.im),
                Phase4Broadcast::QuantizedSum(p) => (i64::from(p.re_rank), i64::from(p.im_rank)),
                Phase4Broadcast::Sum(v) => {
                    let (br, bi) = bin_complex(v, EVE_LEAKAGE_BINS, eve_span);
                    (i64::from(br), i64::from(bi))
                }
            };
            (x, y)
        })
        .collect();
    let counts = tally(pairs);
    let h_marginal = counts.marginal_entropy_x_bits().map_err(|_| QuantizerError::ZeroConsensus)?;
    let h_cond = counts.conditional_entropy_bits().map_err(|_| QuantizerError::ZeroConsensus)?;
    let mi = h_marginal - h_cond;
    let bias = counts.bias_bound_bits();
    let se = counts.jackknife_se_bits().map_err(|_| QuantizerError::ZeroConsensus)?;
    Ok((h_marginal, h_cond, mi, bias, se))
}

fn infeasible_row(
    cfg: &ExperimentConfig,
    mode: ConstellationMode,
    pair: DesignPair,
    snr_db: f64,
    m: u32,
    seed: u64,
    leak: (f64, f64, f64, f64, f64),
) -> MetricsRow {
    MetricsRow {
        protocol: cfg.protocol.to_string(),
        constellation: mode.to_string(),
        design_pair: pair.to_string(),
        snr_db,
        m,
        b: cfg.b,
        beta: cfg.beta,
        blocks: cfg.blocks,
        seed,
        eta_used: 0.0,
        excursion_e: 0,
        feasible: false,
        converged: false,
        analytic_p_c: 0.0,
        analytic_ser: 1.0,
        design_entropy_bits: 0.0,
        n_group: 0,
        n_pairwise: 0,
        rate_group: 0.0,
        rate_pairwise: 0.0,
        mismatch_group: 1.0,
        mismatch_pairwise: 1.0,
        entropy_group_bits: 0.0,
        entropy_pairwise_bits: 0.0,
        leak_mi_bits: leak.2,
        leak_bias_bound_bits: leak.3,
        leak_jackknife_se_bits: leak.4,
        quantizer_hash: String::new(),
    }
}

/// Runs one grid cell end to end.
pub fn run_cell(
    cfg: &ExperimentConfig,
    mode: ConstellationMode,
    pair: DesignPair,
    snr_db: f64,
    m: u32,
) -> Result<MetricsRow> {
    let noise = NoiseParams::from_snr_db(snr_db);
    let a = cell_constellation(cfg.protocol, mode, m, &noise)?;
    let seed = cell_seed(
        cfg.seed,
        &[
            cfg.protocol as u64,
            mode as u64 + 16,
            snr_db.to_bits(),
            u64::from(m),
        ],
    );
    let trace = simulate_trace(cfg.protocol, cfg.blocks, seed, noise, Some(&a))
        .context("block simulation")?;
    let samples = unfold_nodes(&trace, Some(&a));
    let leak = leakage_metrics(&trace.triples, &noise)?;

    let (xs, ys) = design_pair_samples(&samples, pair);
    let pmf = match estimate_design_pmf(cfg.protocol, &a, xs, ys) {
        Ok(p) => p,
        Err(_) => return Ok(infeasible_row(cfg, mode, pair, snr_db, m, seed, leak)),
    };
    let design: DesignReport = match cfg.eta {
        Some(eta) => match em_em(&pmf, cfg.b, eta, None) {
            Ok(r) => r,
            Err(QuantizerError::InitUnreachable { .. }) => {
                return Ok(infeasible_row(cfg, mode, pair, snr_db, m, seed, leak))
            }
            Err(e) => return Err(e.into()),
        },
        None => match design_for_target(&pmf, cfg.b, cfg.beta * DESIGN_TARGET_DERATE, cfg.e_max, None) {
            Ok(r) => r,
            Err(QuantizerError::InitUnreachable { .. }) => {
                return Ok(infeasible_row(cfg, mode, pair, snr_db, m, seed, leak))
            }
            Err(e) => return Err(e.into()),
        },
    };
    if !design.feasible {
        let mut row = infeasible_row(cfg, mode, pair, snr_db, m, seed, leak);
        row.eta_used = design.eta_used;
        row.analytic_p_c = design.p_c;
        row.analytic_ser = design.ser;
        row.design_entropy_bits = design.conditional_entropy_bits;
        return Ok(row);
    }

    let e = design.excursion_e.max(1) as usize;
    let q = &design.quantizer;
    let group: GroupConsensus =
        group_consensus(&samples.node1, &samples.node2, &samples.node3, q, e)?;
    let pairwise: PairwiseConsensus = pairwise_consensus(&samples.node2, &samples.node3, q, e)?;
    let total = samples.node1.len();

    Ok(MetricsRow {
        protocol: cfg.protocol.to_string(),
        constellation: mode.to_string(),
        design_pair: pair.to_string(),
        snr_db,
        m,
        b: cfg.b,
        beta: cfg.beta,
        blocks: cfg.blocks,
        seed,
        eta_used: design.eta_used,
        excursion_e: design.excursion_e,
        feasible: true,
        converged: design.converged,
        analytic_p_c: design.p_c,
        analytic_ser: design.ser,
        design_entropy_bits: design.conditional_entropy_bits,
        n_group: group.indices.len() as u64,
        n_pairwise: pairwise.indices.len() as u64,
        rate_group: consensus::key_rate(cfg.b, group.indices.len(), total),
        rate_pairwise: consensus::key_rate(cfg.b, pairwise.indices.len(), total),
        mismatch_group: consensus::group_mismatch_rate(
            &group.key_node1,
            &group.key_node2,
            &group.key_node3,
        )?,
        mismatch_pairwise: consensus::mismatch_rate(&pairwise.key_node2, &pairwise.key_node3)?,
        entropy_group_bits: consensus::empirical_entropy_bits(&group.key_node1),
        entropy_pairwise_bits: consensus::empirical_entropy_bits(&pairwise.key_node2),
        leak_mi_bits: leak.2,
        leak_bias_bound_bits: leak.3,
        leak_jackknife_se_bits: leak.4,
        quantizer_hash: quantizer_content_hash(q, design.eta_used, design.excursion_e),
    })
}

fn run_grid(
    cfg: &ExperimentConfig,
    cells: Vec<(ConstellationMode, DesignPair, f64, u32)>,
) -> Result<MetricsTable> {
    let rows: Result<Vec<MetricsRow>> = cells
        .par_iter()
        .map(|&(mode, pair, snr, m)| run_cell(cfg, mode, pair, snr, m))
        .collect();
    Ok(MetricsTable {
        config: cfg.clone(),
        rows: rows?,
    })
}

/// Full sweep over the configured SNR and alphabet grids.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &snr in &cfg.snr_db {
        for &m in &cfg.m {
            cells.push((cfg.constellation, cfg.design_pair, snr, m));
        }
    }
    run_grid(cfg, cells)
}

/// Same pipeline with the design pmf drawn from each node pair in turn.
pub fn run_design_pair_study(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for pair in [DesignPair::Nodes12, DesignPair::Nodes13, DesignPair::Nodes23] {
        for &snr in &cfg.snr_db {
            for &m in &cfg.m {
                cells.push((cfg.constellation, pair, snr, m));
            }
        }
    }
    run_grid(cfg, cells)
}

/// Uniform-inducing versus regular-QAM source alphabets, end to end.
pub fn run_constellation_study(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for mode in [ConstellationMode::Uniform, ConstellationMode::Qam] {
        for &snr in &cfg.snr_db {
            for &m in &cfg.m {
                cells.push((mode, cfg.design_pair, snr, m));
            }
        }
    }
    run_grid(cfg, cells)
}

/// Leakage scan: one report per grid cell of the configured protocol.
pub fn run_leakage_scan(cfg: &ExperimentConfig) -> Result<Vec<LeakageReport>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &snr in &cfg.snr_db {
        for &m in &cfg.m {
            cells.push((snr, m));
        }
    }
    cells
        .par_iter()
        .map(|&(snr_db, m)| {
            let noise = NoiseParams::from_snr_db(snr_db);
            let a = cell_constellation(cfg.protocol, cfg.constellation, m, &noise)?;
            let seed = cell_seed(
                cfg.seed,
                &[cfg.protocol as u64, 999, snr_db.to_bits(), u64::from(m)],
            );
            let trace = simulate_trace(cfg.protocol, cfg.blocks, seed, noise, Some(&a))?;
            let (h_marginal, h_cond, mi, bias, se) = leakage_metrics(&trace.triples, &noise)?;
            Ok(LeakageReport {
                protocol: cfg.protocol.to_string(),
                m,
                snr_db,
                samples: cfg.blocks,
                h_marginal_bits: h_marginal,
                h_conditional_bits: h_cond,
                mi_bits: mi,
                bias_bound_bits: bias,
                jackknife_se_bits: se,
            })
        })
        .collect()
}
