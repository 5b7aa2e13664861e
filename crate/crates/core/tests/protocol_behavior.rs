//! Protocol-level Monte Carlo checks: detection against a textbook oracle,
//! power normalization, noise ordering, and a straight-line re-simulation of
//! the ring exchange.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ringkey_core::constellation::{QamPoint, RegularQam, SourceConstellation};
use ringkey_core::protocol::{
    map_detect, run_asqgsk, sample_block, simulate_trace, CsrValue, NoiseParams, Phase4Broadcast,
    ProtocolKind,
};

fn cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let n = Normal::new(0.0, (var / 2.0).sqrt()).unwrap();
    Complex64::new(n.sample(rng), n.sample(rng))
}

/// Our detector against an independently written textbook QPSK-over-Rayleigh
/// simulation (sign slicer after zero-forcing, perfect CSI at 10 dB).
#[test]
fn detection_error_rate_matches_textbook_qpsk_oracle() {
    let trials = 200_000usize;
    let snr = 10.0f64; // linear
    let noise_var = 1.0 / snr;

    // Library path: QAM points scaled to unit power by sqrt(E_avg).
    let qam = RegularQam::new(2).unwrap();
    let e_avg = qam.avg_energy();
    let mut rng = ChaCha8Rng::seed_from_u64(717);
    let points: Vec<QamPoint> = qam.points().collect();
    let mut errors_lib = 0u64;
    for _ in 0..trials {
        let c = points[rng.random_range(0..points.len())];
        let h = cn(&mut rng, 1.0);
        let y = h * c.to_complex() / e_avg.sqrt() + cn(&mut rng, noise_var);
        if map_detect(y, h, &qam, e_avg) != c {
            errors_lib += 1;
        }
    }
    let p_lib = errors_lib as f64 / trials as f64;

    // Oracle path: unit-energy QPSK with a sign slicer, its own RNG stream.
    let mut rng2 = ChaCha8Rng::seed_from_u64(718);
    let a = (0.5f64).sqrt();
    let mut errors_oracle = 0u64;
    for _ in 0..trials {
        let bits = (rng2.random_bool(0.5), rng2.random_bool(0.5));
        let s = Complex64::new(if bits.0 { a } else { -a }, if bits.1 { a } else { -a });
        let h = cn(&mut rng2, 1.0);
        let y = h * s + cn(&mut rng2, noise_var);
        let z = y / h;
        let decided = (z.re > 0.0, z.im > 0.0);
        if decided != bits {
            errors_oracle += 1;
        }
    }
    let p_oracle = errors_oracle as f64 / trials as f64;

    let pooled = 0.5 * (p_lib + p_oracle);
    let sigma = (pooled * (1.0 - pooled) * 2.0 / trials as f64).sqrt();
    assert!(
        (p_lib - p_oracle).abs() <= 3.0 * sigma,
        "library SER {p_lib} vs oracle SER {p_oracle} (3 sigma = {})",
        3.0 * sigma
    );
}

#[test]
fn broadcast_power_is_normalized() {
    let noise = NoiseParams::from_snr_db(20.0);
    let a = SourceConstellation::uniform_inducing(4, noise.estimate_component_std()).unwrap();
    let qam = RegularQam::new(4).unwrap();
    let e_avg = qam.avg_energy();
    let blocks = 100_000u64;
    let trace = simulate_trace(ProtocolKind::Asqgsk, blocks, 819, noise, Some(&a)).unwrap();
    let mean_power: f64 = trace
        .triples
        .iter()
        .map(|t| match t.phase4 {
            Phase4Broadcast::RingSymbol(p) => p.to_complex().norm_sqr() / e_avg,
            _ => panic!("ring protocol broadcasts QAM symbols"),
        })
        .sum::<f64>()
        / blocks as f64;
    assert!(
        (mean_power - 1.0).abs() <= 0.02,
        "mean transmit power {mean_power}"
    );
}

/// Node-3's recovered symbols disagree with node-1 at least as often as
/// node-2's direct observations do.
#[test]
fn phase4_recovery_is_the_worst_link() {
    let noise = NoiseParams::from_snr_db(15.0);
    let a = SourceConstellation::uniform_inducing(4, noise.estimate_component_std()).unwrap();
    let blocks = 100_000u64;
    let trace = simulate_trace(ProtocolKind::Asqgsk, blocks, 919, noise, Some(&a)).unwrap();
    let mut dis12 = 0u64;
    let mut dis13 = 0u64;
    for t in &trace.triples {
        if t.node1 != t.node2 {
            dis12 += 1;
        }
        if t.node1 != t.node3 {
            dis13 += 1;
        }
    }
    assert!(
        dis13 >= dis12,
        "node-3 disagreements {dis13} must be at least node-2's {dis12}"
    );
    assert!(dis12 > 0, "estimation noise must cause some disagreement");
}

/// Independent straight-line re-simulation of the ring exchange at m = 2:
/// nearest-point quantization by exhaustive argmin, integer ring arithmetic
/// mod 2, brute-force detection over the QAM alphabet, block by block.
#[test]
fn ring_exchange_matches_straightline_resimulation() {
    let noise = NoiseParams::from_snr_db(20.0);
    let std = noise.estimate_component_std();
    let a = SourceConstellation::uniform_inducing(2, std).unwrap();
    let blocks = 100_000u64;
    let seed = 1020;

    // Flat alphabet of complex points for the oracle's argmin quantizer (at
    // m = 2 the quantile boundary and the nearest-point boundary coincide).
    let alphabet: Vec<(u32, u32, Complex64)> = (0..2u32)
        .flat_map(|i| {
            let a = &a;
            (0..2u32).map(move |q| {
                (
                    i,
                    q,
                    Complex64::new(a.levels()[i as usize], a.levels()[q as usize]),
                )
            })
        })
        .collect();
    let quantize_argmin = |beta: Complex64| -> (u32, u32) {
        let mut best = (0u32, 0u32);
        let mut best_d = f64::INFINITY;
        for &(i, q, v) in &alphabet {
            let d = (beta - v).norm_sqr();
            if d < best_d {
                best_d = d;
                best = (i, q);
            }
        }
        best
    };
    // Regular 4-QAM points and the rank <-> odd-integer correspondence.
    let qam_points: Vec<(u32, u32, Complex64)> = (0..2u32)
        .flat_map(|i| {
            (0..2u32).map(move |q| {
                (
                    i,
                    q,
                    Complex64::new(2.0 * i as f64 - 1.0, 2.0 * q as f64 - 1.0),
                )
            })
        })
        .collect();
    let e_avg = 2.0f64;

    let mut mismatches_lib = 0u64;
    let mut mismatches_oracle = 0u64;
    for l in 0..blocks {
        let block = sample_block(seed, l, &noise);
        let t = run_asqgsk(&block, &a);

        // Straight-line oracle on the same block realization.
        let q12 = quantize_argmin(block.h12 + block.e1_p2);
        let q13 = quantize_argmin(block.h13 + block.e1_p3);
        let sum = ((q12.0 + q13.0) % 2, (q12.1 + q13.1) % 2);
        let tx = Complex64::new(2.0 * sum.0 as f64 - 1.0, 2.0 * sum.1 as f64 - 1.0);
        let received = block.h13 * tx / e_avg.sqrt() + block.n3_p4;
        let h_est = block.h13 + block.e3_p1;
        let mut detected = (0u32, 0u32);
        let mut best_d = f64::INFINITY;
        for &(i, q, v) in &qam_points {
            let d = (received - h_est * v / e_avg.sqrt()).norm_sqr();
            if d < best_d {
                best_d = d;
                detected = (i, q);
            }
        }
        let own = quantize_argmin(block.h13 + block.e3_p1);
        let recovered = (
            (detected.0 + 2 - own.0) % 2,
            (detected.1 + 2 - own.1) % 2,
        );

        let lib_node1 = match t.node1 {
            CsrValue::Point(p) => (u32::from(p.re_rank), u32::from(p.im_rank)),
            _ => panic!("ring protocol produces alphabet points"),
        };
        let lib_node3 = match t.node3 {
            CsrValue::Point(p) => (u32::from(p.re_rank), u32::from(p.im_rank)),
            _ => panic!("ring protocol produces alphabet points"),
        };
        assert_eq!(lib_node1, q12, "block {l}: node-1 quantization differs");
        assert_eq!(lib_node3, recovered, "block {l}: node-3 recovery differs");
        if lib_node1 != lib_node3 {
            mismatches_lib += 1;
        }
        if q12 != recovered {
            mismatches_oracle += 1;
        }
    }
    assert_eq!(mismatches_lib, mismatches_oracle);
    assert!(mismatches_lib > 0, "20 dB still produces some mismatches");
}

#[test]
fn traces_are_deterministic_across_runs() {
    let noise = NoiseParams::from_snr_db(12.0);
    let a = SourceConstellation::uniform_inducing(4, noise.estimate_component_std()).unwrap();
    for protocol in [ProtocolKind::Gsk, ProtocolKind::Aqgsk, ProtocolKind::Asqgsk] {
        let arg = if protocol == ProtocolKind::Gsk { None } else { Some(&a) };
        let t1 = simulate_trace(protocol, 2_000, 42, noise, arg).unwrap();
        let t2 = simulate_trace(protocol, 2_000, 42, noise, arg).unwrap();
        assert_eq!(t1.triples, t2.triples, "{protocol}");
    }
}
