use ringkey_cli::config::{ConstellationMode, DesignPair, ExperimentConfig};
use ringkey_cli::experiment::{cell_constellation, cell_seed, estimate_design_pmf, unfold_nodes};
use ringkey_core::protocol::{simulate_trace, NoiseParams, ProtocolKind};
use ringkey_core::quantizer::{default_eta_grid, em_em, metrics};

fn main() {
    let cfg = ExperimentConfig { seed: 11, blocks: 10_000, ..Default::default() };
    let snr = 25.0;
    let m: u32 = std::env::args().nth(1).unwrap().parse().unwrap();
    let noise = NoiseParams::from_snr_db(snr);
    let a = cell_constellation(ProtocolKind::Asqgsk, ConstellationMode::Uniform, m, &noise).unwrap();
    let seed = cell_seed(cfg.seed, &[ProtocolKind::Asqgsk as u64, ConstellationMode::Uniform as u64 + 16, snr.to_bits(), u64::from(m)]);
    let trace = simulate_trace(ProtocolKind::Asqgsk, cfg.blocks, seed, noise, Some(&a)).unwrap();
    let s = unfold_nodes(&trace, Some(&a));
    let _ = DesignPair::Nodes23;
    let pmf = estimate_design_pmf(ProtocolKind::Asqgsk, &a, &s.node2, &s.node3).unwrap();
    println!("marginal_x: {:?}", pmf.marginal_x());
    for eta in default_eta_grid() {
        let r = em_em(&pmf, 1, eta, None).unwrap();
        let bounds: Vec<(f64, f64)> = r.quantizer.cells().iter().map(|c| (c.lo, c.hi)).collect();
        let ser2 = metrics::excursion_ser(&r.quantizer, &pmf, 2);
        let w2 = metrics::excursion_consensus_probability(&r.quantizer, &pmf, 2);
        let h2 = metrics::excursion_conditional_entropy_bits(&r.quantizer, &pmf, 2).unwrap_or(-1.0);
        println!(
            "eta={eta:.2e} conv={} feas={} ser1={:.4e} pc={:.4} ser2={:.3e} w2={:.4} h2={:.5} bounds={:?}",
            r.converged, r.feasible, r.ser, r.p_c, ser2, w2, h2, bounds
        );
    }
}
