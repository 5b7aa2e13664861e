//! Coherence-block simulation of the three-node network and the three
//! CSR-exchange protocols.
//!
//! Each coherence block holds one realization of the three pairwise channels
//! plus the estimation-error and phase-4 noise draws. Reciprocity is
//! structural: there is a single field per channel pair. Node-1 acts as the
//! facilitator and `h12` is the common source of randomness.
//!
//! Three protocols are implemented:
//!
//! * unquantized exchange: node-1 broadcasts the continuous sum of its two
//!   channel estimates and node-3 inverts the recovery equation;
//! * facilitator-quantized exchange: node-1 quantizes the continuous sum
//!   directly onto the source alphabet before broadcasting;
//! * ring exchange: all nodes quantize their estimates, node-1 combines them
//!   over the ring and broadcasts a regular-QAM symbol; node-3 detects it and
//!   cancels its own quantized estimate with ring subtraction.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{self, Write};
use thiserror::Error;

use crate::constellation::{
    map_affine_phi, map_affine_phi_inverse, theta_map, theta_inverse, QamPoint, RegularQam,
    SourceConstellation, SourcePoint,
};

/// Magnitudes of the phase-1 estimate below this are excluded from the
/// unquantized recovery statistics (the division would blow up).
pub const DEGENERATE_CHANNEL_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("protocol {0} requires a source constellation")]
    MissingConstellation(ProtocolKind),
    #[error("noise variances must be nonnegative, got sigma_sq={0}, gamma={1}")]
    InvalidNoise(f64, f64),
    #[error(transparent)]
    Constellation(#[from] crate::constellation::ConstellationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// Unquantized facilitator broadcast.
    Gsk,
    /// Facilitator quantizes the continuous sum directly.
    Aqgsk,
    /// Ring-based symmetric quantization.
    Asqgsk,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProtocolKind::Gsk => "gsk",
            ProtocolKind::Aqgsk => "aqgsk",
            ProtocolKind::Asqgsk => "asqgsk",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gsk" => Ok(ProtocolKind::Gsk),
            "aqgsk" => Ok(ProtocolKind::Aqgsk),
            "asqgsk" => Ok(ProtocolKind::Asqgsk),
            other => Err(format!("unknown protocol '{other}' (expected gsk|aqgsk|asqgsk)")),
        }
    }
}

/// Channel and estimation noise variances. `sigma_sq` is the AWGN variance
/// and `gamma` the estimation-error variance; the experiments use the
/// received pilot symbol as the estimate, i.e. `gamma = sigma_sq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_sq: f64,
    pub gamma: f64,
}

impl NoiseParams {
    pub fn new(sigma_sq: f64, gamma: f64) -> Result<Self, ProtocolError> {
        if sigma_sq < 0.0 || gamma < 0.0 || !sigma_sq.is_finite() || !gamma.is_finite() {
            return Err(ProtocolError::InvalidNoise(sigma_sq, gamma));
        }
        Ok(Self { sigma_sq, gamma })
    }

    /// `SNR = 1 / sigma_sq`, with the estimate error matched to the AWGN.
    pub fn from_snr_db(snr_db: f64) -> Self {
        let sigma_sq = 10f64.powf(-snr_db / 10.0);
        Self {
            sigma_sq,
            gamma: sigma_sq,
        }
    }

    /// Per-component standard deviation of a single channel estimate,
    /// `sqrt((1 + gamma) / 2)`.
    pub fn estimate_component_std(&self) -> f64 {
        ((1.0 + self.gamma) / 2.0).sqrt()
    }

    /// Per-component standard deviation of the sum of the two estimates at
    /// the facilitator, `sqrt(1 + gamma)`.
    pub fn sum_component_std(&self) -> f64 {
        (1.0 + self.gamma).sqrt()
    }
}

/// One coherence block: channels, estimation errors and phase-4 AWGN.
///
/// Error fields are named `e{node}_p{phase}`: `e1_p2` is the estimation error
/// at node-1 during phase 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRealization {
    pub index: u64,
    pub h12: Complex64,
    pub h13: Complex64,
    pub h23: Complex64,
    pub e2_p1: Complex64,
    pub e3_p1: Complex64,
    pub e1_p2: Complex64,
    pub e3_p2: Complex64,
    pub e1_p3: Complex64,
    pub e2_p3: Complex64,
    pub n3_p4: Complex64,
}

fn circular_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    if variance == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let comp = Normal::new(0.0, (variance / 2.0).sqrt()).expect("valid std");
    Complex64::new(comp.sample(rng), comp.sample(rng))
}

/// Draws one block deterministically from `(master_seed, index)`. Blocks are
/// independent ChaCha streams, so any subset can be generated in any order.
pub fn sample_block(master_seed: u64, index: u64, noise: &NoiseParams) -> BlockRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index.wrapping_add(1));
    BlockRealization {
        index,
        h12: circular_gaussian(&mut rng, 1.0),
        h13: circular_gaussian(&mut rng, 1.0),
        h23: circular_gaussian(&mut rng, 1.0),
        e2_p1: circular_gaussian(&mut rng, noise.gamma),
        e3_p1: circular_gaussian(&mut rng, noise.gamma),
        e1_p2: circular_gaussian(&mut rng, noise.gamma),
        e3_p2: circular_gaussian(&mut rng, noise.gamma),
        e1_p3: circular_gaussian(&mut rng, noise.gamma),
        e2_p3: circular_gaussian(&mut rng, noise.gamma),
        n3_p4: circular_gaussian(&mut rng, noise.sigma_sq),
    }
}

/// Per-node CSR observation for one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CsrValue {
    Continuous(Complex64),
    Point(SourcePoint),
}

impl CsrValue {
    pub fn to_complex(&self, a: Option<&SourceConstellation>) -> Complex64 {
        match self {
            CsrValue::Continuous(v) => *v,
            CsrValue::Point(p) => a
                .expect("constellation required to render alphabet points")
                .value(*p),
        }
    }

    pub fn as_point(&self) -> Option<SourcePoint> {
        match self {
            CsrValue::Point(p) => Some(*p),
            CsrValue::Continuous(_) => None,
        }
    }
}

/// The quantity node-1 puts on the air in phase 4; with a noiseless
/// eavesdropper that knows her channel this is exactly Eve's observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Phase4Broadcast {
    Sum(Complex64),
    QuantizedSum(SourcePoint),
    RingSymbol(QamPoint),
}

impl Phase4Broadcast {
    pub fn to_complex(&self, a: Option<&SourceConstellation>) -> Complex64 {
        match self {
            Phase4Broadcast::Sum(v) => *v,
            Phase4Broadcast::QuantizedSum(p) => a
                .expect("constellation required to render alphabet points")
                .value(*p),
            Phase4Broadcast::RingSymbol(p) => p.to_complex(),
        }
    }
}

/// CSR observations of the three nodes for one block plus the broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsrTriple {
    pub node1: CsrValue,
    pub node2: CsrValue,
    pub node3: CsrValue,
    pub phase4: Phase4Broadcast,
    /// Phase-1 estimate at node-3 was below the inversion floor; the block
    /// is excluded from unquantized-recovery statistics.
    pub degenerate: bool,
}

/// Worst-case eavesdropper observation: the phase-4 transmitted quantity
/// itself (noiseless Eve with perfect knowledge of her channel).
pub fn eavesdropper_view(triple: &CsrTriple) -> Phase4Broadcast {
    triple.phase4
}

/// Unquantized exchange. Node-3 receives `h13 * (sum of node-1 estimates)`
/// plus AWGN and inverts it with its own phase-1 estimate.
pub fn run_gsk_unquantized(block: &BlockRealization) -> CsrTriple {
    let node1 = block.h12 + block.e1_p2;
    let node2 = block.h12 + block.e2_p1;
    let theta3_p1 = block.h13 + block.e3_p1;
    let sum = (block.h12 + block.e1_p2) + (block.h13 + block.e1_p3);
    let received = block.h13 * sum + block.n3_p4;
    let degenerate = theta3_p1.norm() < DEGENERATE_CHANNEL_FLOOR;
    let node3 = if degenerate {
        Complex64::new(0.0, 0.0)
    } else {
        received / theta3_p1 - theta3_p1
    };
    CsrTriple {
        node1: CsrValue::Continuous(node1),
        node2: CsrValue::Continuous(node2),
        node3: CsrValue::Continuous(node3),
        phase4: Phase4Broadcast::Sum(sum),
        degenerate,
    }
}

/// Facilitator-quantized exchange: the continuous sum is quantized onto `a`
/// (designed for the sum's marginal) and broadcast with unit average power;
/// node-3 detects the transmitted point and subtracts its own continuous
/// phase-1 estimate.
pub fn run_aqgsk(block: &BlockRealization, a: &SourceConstellation) -> CsrTriple {
    let node1 = block.h12 + block.e1_p2;
    let node2 = block.h12 + block.e2_p1;
    let sum = (block.h12 + block.e1_p2) + (block.h13 + block.e1_p3);
    let quantized = a.quantize(sum);
    let e_avg = a.avg_energy();
    let received = block.h13 * a.value(quantized) / e_avg.sqrt() + block.n3_p4;
    let theta3_p1 = block.h13 + block.e3_p1;
    let detected = a.detect(received, theta3_p1, e_avg);
    let node3 = a.value(detected) - theta3_p1;
    CsrTriple {
        node1: CsrValue::Continuous(node1),
        node2: CsrValue::Continuous(node2),
        node3: CsrValue::Continuous(node3),
        phase4: Phase4Broadcast::QuantizedSum(quantized),
        degenerate: false,
    }
}

/// Maximum-likelihood detection of a regular-QAM broadcast symbol:
/// `argmin_c |y - h_est * c / sqrt(e_avg)|^2`, ties to the lexicographically
/// smallest point. Equalizing by `h_est` reduces this to per-component
/// nearest-odd-integer slicing.
pub fn map_detect(y: Complex64, h_est: Complex64, qam: &RegularQam, e_avg: f64) -> QamPoint {
    if h_est.norm_sqr() == 0.0 {
        // All candidates give the same metric; smallest point wins.
        return QamPoint::new(-(qam.side() as i64 - 1), -(qam.side() as i64 - 1));
    }
    let z = y * e_avg.sqrt() / h_est;
    QamPoint::new(
        qam.axis_level(qam.nearest_axis_rank(z.re)),
        qam.axis_level(qam.nearest_axis_rank(z.im)),
    )
}

/// Ring-based exchange, phases 1-4.
pub fn run_asqgsk(block: &BlockRealization, a: &SourceConstellation) -> CsrTriple {
    let qam = RegularQam::new(a.m()).expect("constellation exponent already validated");

    // Phases 1-3: quantized channel estimates at each node.
    let theta1_p2 = a.quantize(block.h12 + block.e1_p2);
    let theta1_p3 = a.quantize(block.h13 + block.e1_p3);
    let theta2_p1 = a.quantize(block.h12 + block.e2_p1);
    let theta3_p1 = a.quantize(block.h13 + block.e3_p1);

    // Phase 4 at node-1: combine over the ring, broadcast the QAM symbol.
    let maps_ok = "alphabet points map onto the ring by construction";
    let sum = theta_map(theta1_p2, &qam)
        .expect(maps_ok)
        .add(&theta_map(theta1_p3, &qam).expect(maps_ok))
        .expect("same modulus");
    let broadcast = map_affine_phi_inverse(sum, &qam).expect(maps_ok);

    // Phase 4 at node-3: detect, then cancel the own quantized estimate.
    let e_avg = qam.avg_energy();
    let received = block.h13 * broadcast.to_complex() / e_avg.sqrt() + block.n3_p4;
    let detected = map_detect(received, block.h13 + block.e3_p1, &qam, e_avg);
    let recovered = theta_inverse(
        map_affine_phi(detected, &qam)
            .expect(maps_ok)
            .sub(&theta_map(theta3_p1, &qam).expect(maps_ok))
            .expect("same modulus"),
        &qam,
    )
    .expect(maps_ok);

    CsrTriple {
        node1: CsrValue::Point(theta1_p2),
        node2: CsrValue::Point(theta2_p1),
        node3: CsrValue::Point(recovered),
        phase4: Phase4Broadcast::RingSymbol(broadcast),
        degenerate: false,
    }
}

/// Parameters of a simulated trace, kept alongside the data for
/// reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceParams {
    pub protocol: ProtocolKind,
    pub m: Option<u32>,
    pub sigma_sq: f64,
    pub gamma: f64,
    pub blocks: u64,
    pub seed: u64,
}

/// CSR observations over a run of coherence blocks.
#[derive(Debug, Clone)]
pub struct ProtocolTrace {
    pub params: TraceParams,
    pub triples: Vec<CsrTriple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    One,
    Two,
    Three,
}

impl ProtocolTrace {
    /// Unfolds a node's complex CSR into `2L` real samples, component-major:
    /// all in-phase samples, then all quadrature samples. Consecutive
    /// positions then come from different coherence blocks, which keeps
    /// excursion windows free of the intra-block coupling that the common
    /// fading gain induces between a block's two components.
    pub fn unfold_real(&self, node: Node, a: Option<&SourceConstellation>) -> Vec<f64> {
        let values: Vec<Complex64> = self
            .triples
            .iter()
            .map(|t| {
                match node {
                    Node::One => t.node1,
                    Node::Two => t.node2,
                    Node::Three => t.node3,
                }
                .to_complex(a)
            })
            .collect();
        let mut out = Vec::with_capacity(2 * values.len());
        out.extend(values.iter().map(|v| v.re));
        out.extend(values.iter().map(|v| v.im));
        out
    }

    /// Columnar CSV export with a `#`-prefixed parameter header.
    pub fn write_csv<W: Write>(&self, a: Option<&SourceConstellation>, w: &mut W) -> io::Result<()> {
        let p = &self.params;
        writeln!(
            w,
            "# protocol={} m={} sigma_sq={} gamma={} blocks={} seed={}",
            p.protocol,
            p.m.map_or_else(|| "-".to_string(), |m| m.to_string()),
            p.sigma_sq,
            p.gamma,
            p.blocks,
            p.seed
        )?;
        writeln!(
            w,
            "block,node1_re,node1_im,node2_re,node2_im,node3_re,node3_im,phase4_re,phase4_im,degenerate"
        )?;
        for (l, t) in self.triples.iter().enumerate() {
            let n1 = t.node1.to_complex(a);
            let n2 = t.node2.to_complex(a);
            let n3 = t.node3.to_complex(a);
            let p4 = t.phase4.to_complex(a);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                l, n1.re, n1.im, n2.re, n2.im, n3.re, n3.im, p4.re, p4.im, t.degenerate as u8
            )?;
        }
        Ok(())
    }
}

/// Runs `blocks` coherence blocks of the chosen protocol. Blocks are
/// simulated in parallel and merged by index, so the result only depends on
/// `(seed, params)`, never on the worker count.
pub fn simulate_trace(
    protocol: ProtocolKind,
    blocks: u64,
    seed: u64,
    noise: NoiseParams,
    a: Option<&SourceConstellation>,
) -> Result<ProtocolTrace, ProtocolError> {
    NoiseParams::new(noise.sigma_sq, noise.gamma)?;
    if matches!(protocol, ProtocolKind::Aqgsk | ProtocolKind::Asqgsk) && a.is_none() {
        return Err(ProtocolError::MissingConstellation(protocol));
    }
    let triples: Vec<CsrTriple> = (0..blocks)
        .into_par_iter()
        .map(|l| {
            let block = sample_block(seed, l, &noise);
            match protocol {
                ProtocolKind::Gsk => run_gsk_unquantized(&block),
                ProtocolKind::Aqgsk => run_aqgsk(&block, a.expect("checked above")),
                ProtocolKind::Asqgsk => run_asqgsk(&block, a.expect("checked above")),
            }
        })
        .collect();
    Ok(ProtocolTrace {
        params: TraceParams {
            protocol,
            m: a.map(|c| c.m()),
            sigma_sq: noise.sigma_sq,
            gamma: noise.gamma,
            blocks,
            seed,
        },
        triples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zero_noise() -> NoiseParams {
        NoiseParams::new(0.0, 0.0).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_noise_free_when_degenerate() {
        let noise = NoiseParams::new(0.04, 0.02).unwrap();
        let b1 = sample_block(7, 3, &noise);
        let b2 = sample_block(7, 3, &noise);
        assert_eq!(b1, b2);
        let b3 = sample_block(7, 4, &noise);
        assert_ne!(b1.h12, b3.h12);

        let silent = sample_block(7, 3, &zero_noise());
        assert_eq!(silent.e1_p2, Complex64::new(0.0, 0.0));
        assert_eq!(silent.n3_p4, Complex64::new(0.0, 0.0));
        // Channels share the draw order regardless of the noise settings.
        assert_eq!(silent.h12, b1.h12);
    }

    #[test]
    fn channel_component_variance_is_half() {
        let noise = zero_noise();
        let n = 100_000u64;
        let mean_sq: f64 = (0..n)
            .map(|l| {
                let b = sample_block(11, l, &noise);
                b.h12.re * b.h12.re
            })
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(mean_sq, 0.5, epsilon = 0.01);
    }

    #[test]
    fn noiseless_recovery_collapses_to_the_csr() {
        let block = sample_block(3, 0, &zero_noise());
        let t = run_gsk_unquantized(&block);
        let n3 = t.node3.to_complex(None);
        assert_abs_diff_eq!(n3.re, block.h12.re, epsilon = 1e-12);
        assert_abs_diff_eq!(n3.im, block.h12.im, epsilon = 1e-12);
        assert_eq!(t.node1, t.node2);
    }

    #[test]
    fn recovery_noise_is_awgn_over_the_relay_channel() {
        // gamma = 0, sigma^2 > 0: node-3 sees h12 + n / h13.
        let noise = NoiseParams::new(0.09, 0.0).unwrap();
        let block = sample_block(5, 2, &noise);
        let t = run_gsk_unquantized(&block);
        let want = block.h12 + block.n3_p4 / block.h13;
        let got = t.node3.to_complex(None);
        assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-12);
        assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-12);
    }

    #[test]
    fn recovery_noise_dominates_estimation_noise() {
        let noise = NoiseParams::new(0.01, 0.01).unwrap();
        let n = 100_000u64;
        let (mut var2, mut var3, mut kept) = (0.0, 0.0, 0u64);
        for l in 0..n {
            let block = sample_block(17, l, &noise);
            let t = run_gsk_unquantized(&block);
            if t.degenerate {
                continue;
            }
            kept += 1;
            var2 += (t.node2.to_complex(None) - block.h12).norm_sqr();
            var3 += (t.node3.to_complex(None) - block.h12).norm_sqr();
        }
        assert!(kept > n - 10);
        assert!(var3 / kept as f64 > var2 / kept as f64);
    }

    #[test]
    fn facilitator_quantized_sum_on_a_level_recovers_exactly() {
        // With zero noise and the received point on a level, node-3's CSR is
        // that level minus h13.
        let noise = zero_noise();
        let a = SourceConstellation::uniform_inducing(4, noise.sum_component_std()).unwrap();
        let block = sample_block(23, 1, &noise);
        let t = run_aqgsk(&block, &a);
        let q = match t.phase4 {
            Phase4Broadcast::QuantizedSum(p) => p,
            _ => panic!("facilitator-quantized protocol broadcasts a quantized sum"),
        };
        let want = a.value(q) - block.h13;
        let got = t.node3.to_complex(None);
        assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-12);
        assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-12);
    }

    #[test]
    fn ring_exchange_is_exact_without_noise() {
        let a = SourceConstellation::uniform_inducing(4, (0.5f64).sqrt()).unwrap();
        for l in 0..200 {
            let block = sample_block(29, l, &zero_noise());
            let t = run_asqgsk(&block, &a);
            assert_eq!(t.node1, t.node3, "ring terms must cancel exactly");
            assert_eq!(t.node1, t.node2);
        }
    }

    #[test]
    fn ring_exchange_mismatch_requires_unequal_h13_quantizations() {
        // Node-3's own h13 estimate is kept exact so detection stays
        // perfect; node-1's phase-3 estimate is pushed across a cell
        // boundary, which must surface as a node-3 mismatch.
        let a = SourceConstellation::uniform_inducing(4, (0.5f64).sqrt()).unwrap();
        let mut block = sample_block(31, 7, &zero_noise());
        let t = run_asqgsk(&block, &a);
        assert_eq!(t.node1, t.node3);

        // Force node-1 to see h13 in a different cell while node-3 still
        // sees it exactly.
        block.e1_p3 = Complex64::new(10.0, 0.0);
        let shifted = run_asqgsk(&block, &a);
        assert_eq!(
            a.quantize(block.h13 + block.e3_p1),
            a.quantize(block.h13),
            "node-3 estimate must stay unperturbed"
        );
        assert_ne!(
            a.quantize(block.h13 + block.e1_p3),
            a.quantize(block.h13),
            "the forced error must cross a quantization cell"
        );
        assert_ne!(shifted.node1, shifted.node3);
    }

    #[test]
    fn detect_returns_exact_symbol_at_zero_residual() {
        let qam = RegularQam::new(4).unwrap();
        let e_avg = qam.avg_energy();
        let h = Complex64::new(0.4, -1.1);
        for p in qam.points() {
            let y = h * p.to_complex() / e_avg.sqrt();
            assert_eq!(map_detect(y, h, &qam, e_avg), p);
        }
    }

    #[test]
    fn detect_snaps_small_perturbations() {
        let qam = RegularQam::new(2).unwrap();
        let e_avg = qam.avg_energy();
        let c = QamPoint::new(1, -1);
        let y = c.to_complex() / e_avg.sqrt() + Complex64::new(0.01, -0.02);
        assert_eq!(map_detect(y, Complex64::new(1.0, 0.0), &qam, e_avg), c);
    }

    #[test]
    fn trace_is_deterministic_and_alphabet_closed() {
        let noise = NoiseParams::from_snr_db(15.0);
        let a = SourceConstellation::uniform_inducing(4, noise.estimate_component_std()).unwrap();
        let t1 = simulate_trace(ProtocolKind::Asqgsk, 500, 99, noise, Some(&a)).unwrap();
        let t2 = simulate_trace(ProtocolKind::Asqgsk, 500, 99, noise, Some(&a)).unwrap();
        assert_eq!(t1.triples, t2.triples);
        for t in &t1.triples {
            assert!(t.node1.as_point().is_some());
            assert!(t.node2.as_point().is_some());
            assert!(t.node3.as_point().is_some());
            match t.phase4 {
                Phase4Broadcast::RingSymbol(p) => {
                    assert!(RegularQam::new(4).unwrap().contains(p))
                }
                _ => panic!("ring protocol broadcasts QAM symbols"),
            }
        }
    }

    #[test]
    fn missing_constellation_is_an_error() {
        let noise = NoiseParams::from_snr_db(20.0);
        assert!(simulate_trace(ProtocolKind::Asqgsk, 10, 1, noise, None).is_err());
        assert!(simulate_trace(ProtocolKind::Gsk, 10, 1, noise, None).is_ok());
    }

    #[test]
    fn eavesdropper_sees_the_broadcast() {
        let block = sample_block(41, 0, &zero_noise());
        let t = run_gsk_unquantized(&block);
        match eavesdropper_view(&t) {
            Phase4Broadcast::Sum(v) => {
                let want = block.h12 + block.h13;
                assert_abs_diff_eq!(v.re, want.re, epsilon = 1e-12);
                assert_abs_diff_eq!(v.im, want.im, epsilon = 1e-12);
            }
            _ => panic!("unquantized protocol broadcasts the continuous sum"),
        }
    }
}
