use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ringkey_core::protocol::{simulate_trace, NoiseParams, ProtocolKind};
use ringkey_core::quantizer::{design_for_target, em_em, JointDistribution, QuantizerDocument};
use ringkey_cli::config::{prepare_out_dir, ConstellationMode, DesignPair, ExperimentConfig};
use ringkey_cli::experiment::{
    cell_constellation, run_constellation_study, run_design_pair_study, run_experiment,
    run_leakage_scan,
};
use ringkey_cli::output::{emit_outputs, quantizer_content_hash};
use ringkey_cli::tracefile::{read_distribution_csv, read_trace_csv};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ringkey",
    about = "Group secret-key generation over algebraic rings: simulation, quantizer design, consensus and leakage experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the grid-running subcommands; unset flags fall back to
/// the config file (if given) and then to the defaults.
#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// TOML or JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<ProtocolKind>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    /// Comma-separated alphabet exponents (even).
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<u32>>,
    /// Bits per retained sample.
    #[arg(long)]
    b: Option<u32>,
    /// Mismatch-rate bound for the design.
    #[arg(long)]
    beta: Option<f64>,
    /// Fixed confusion budget (skips the feasibility search).
    #[arg(long)]
    eta: Option<f64>,
    /// Coherence blocks per grid cell.
    #[arg(long)]
    blocks: Option<u64>,
    /// Largest excursion length tried when unit excursions miss the target.
    #[arg(long)]
    excursion_max: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Node pair whose joint distribution drives the design.
    #[arg(long)]
    design_pair: Option<DesignPair>,
    /// Source alphabet construction.
    #[arg(long)]
    constellation: Option<ConstellationMode>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl GridArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.protocol {
            cfg.protocol = v;
        }
        if let Some(v) = &self.snr_db {
            cfg.snr_db = v.clone();
        }
        if let Some(v) = &self.m {
            cfg.m = v.clone();
        }
        if let Some(v) = self.b {
            cfg.b = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if self.eta.is_some() {
            cfg.eta = self.eta;
        }
        if let Some(v) = self.blocks {
            cfg.blocks = v;
        }
        if let Some(v) = self.excursion_max {
            cfg.e_max = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.design_pair {
            cfg.design_pair = v;
        }
        if let Some(v) = self.constellation {
            cfg.constellation = v;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate coherence blocks and export the CSR trace.
    Simulate {
        #[arg(long, default_value = "asqgsk")]
        protocol: ProtocolKind,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 4)]
        m: u32,
        #[arg(long, default_value_t = 10_000)]
        blocks: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "uniform")]
        constellation: ConstellationMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design a quantizer from a trace or a distribution grid.
    Design {
        /// Trace CSV produced by `simulate`.
        #[arg(long, conflicts_with = "dist")]
        trace: Option<PathBuf>,
        /// Distribution grid CSV with x,y,mass rows.
        #[arg(long)]
        dist: Option<PathBuf>,
        /// Node pair to read from the trace.
        #[arg(long, default_value = "23")]
        design_pair: DesignPair,
        #[arg(long, default_value_t = 1)]
        b: u32,
        #[arg(long, default_value_t = 1e-2)]
        beta: f64,
        /// Fixed confusion budget (skips the feasibility search).
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 8)]
        excursion_max: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the consensus exchange on a trace with a designed quantizer.
    Consensus {
        #[arg(long)]
        trace: PathBuf,
        /// Quantizer JSON produced by `design`.
        #[arg(long)]
        quantizer: PathBuf,
        /// Excursion length; defaults to the one stored in the quantizer.
        #[arg(long)]
        e: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate leakage between the CSR and the phase-4 broadcast.
    Leakage {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Sweep the (SNR, m) grid end to end and emit metric tables.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Comparative studies over the same pipeline.
    Study {
        #[command(subcommand)]
        which: StudyCommand,
    },
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Design the quantizer from each node pair and compare group mismatch.
    DesignPair {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Uniform-inducing versus regular-QAM source alphabets.
    Constellation {
        #[command(flatten)]
        grid: GridArgs,
    },
}

fn init_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        // Ignore failure when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn cmd_simulate(
    protocol: ProtocolKind,
    snr_db: f64,
    m: u32,
    blocks: u64,
    seed: u64,
    constellation: ConstellationMode,
    out: PathBuf,
) -> Result<ExitCode> {
    prepare_out_dir(&out)?;
    let noise = NoiseParams::from_snr_db(snr_db);
    let a = cell_constellation(protocol, constellation, m, &noise)?;
    let arg = match protocol {
        ProtocolKind::Gsk => None,
        _ => Some(&a),
    };
    let trace = simulate_trace(protocol, blocks, seed, noise, arg)?;
    let mut buf = Vec::new();
    trace.write_csv(arg, &mut buf)?;
    std::fs::write(out.join("trace.csv"), buf)?;
    if arg.is_some() {
        std::fs::write(out.join("constellation.json"), a.to_json())?;
    }
    println!(
        "wrote {} blocks of {protocol} at {snr_db} dB to {}",
        blocks,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_design(
    trace: Option<PathBuf>,
    dist: Option<PathBuf>,
    design_pair: DesignPair,
    b: u32,
    beta: f64,
    eta: Option<f64>,
    excursion_max: u32,
    out: PathBuf,
) -> Result<ExitCode> {
    prepare_out_dir(&out)?;
    let pmf: JointDistribution = match (&trace, &dist) {
        (Some(path), None) => {
            let imported = read_trace_csv(path)?;
            let (nx, ny) = match design_pair {
                DesignPair::Nodes12 => (1, 2),
                DesignPair::Nodes13 => (1, 3),
                DesignPair::Nodes23 => (2, 3),
            };
            let xs = imported.unfold(nx);
            let ys = imported.unfold(ny);
            let pairs: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
            match imported.protocol {
                Some(ProtocolKind::Asqgsk) => JointDistribution::from_discrete_pairs(&pairs)
                    .map_err(|e| anyhow::anyhow!("building pmf: {e}"))?,
                _ => JointDistribution::from_continuous_pairs(
                    &pairs,
                    ringkey_core::quantizer::HISTOGRAM_BINS,
                    ringkey_core::quantizer::HISTOGRAM_SPAN_SIGMAS,
                )
                .map_err(|e| anyhow::anyhow!("building histogram: {e}"))?,
            }
        }
        (None, Some(path)) => read_distribution_csv(path)?,
        _ => bail!("exactly one of --trace or --dist is required"),
    };
    let report = match eta {
        Some(eta) => em_em(&pmf, b, eta, None)?,
        None => design_for_target(&pmf, b, beta, excursion_max, None)?,
    };
    let doc = report
        .quantizer
        .to_document(report.eta_used, report.excursion_e);
    std::fs::write(
        out.join("quantizer.json"),
        serde_json::to_string_pretty(&doc)?,
    )?;
    let summary = serde_json::json!({
        "b": b,
        "beta": beta,
        "eta_used": report.eta_used,
        "excursion_e": report.excursion_e,
        "feasible": report.feasible,
        "converged": report.converged,
        "p_c": report.p_c,
        "p_cm": report.p_cm,
        "ser": report.ser,
        "conditional_entropy_bits": report.conditional_entropy_bits,
        "iterations": report.iterations,
        "quantizer_hash": quantizer_content_hash(&report.quantizer, report.eta_used, report.excursion_e),
    });
    std::fs::write(
        out.join("design_report.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "design: feasible={} e={} p_c={:.4} ser={:.3e} entropy={:.4} bits",
        report.feasible, report.excursion_e, report.p_c, report.ser, report.conditional_entropy_bits
    );
    Ok(if report.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_consensus(
    trace: PathBuf,
    quantizer: PathBuf,
    e: Option<u32>,
    seed: u64,
    out: PathBuf,
) -> Result<ExitCode> {
    prepare_out_dir(&out)?;
    let imported = read_trace_csv(&trace)?;
    let doc: QuantizerDocument =
        serde_json::from_str(&std::fs::read_to_string(&quantizer)?)
            .context("parsing quantizer JSON")?;
    let q = doc.to_quantizer().map_err(|e| anyhow::anyhow!("invalid quantizer: {e}"))?;
    let e = e.unwrap_or(doc.e.max(1)) as usize;
    let (ya, yb, yc) = (imported.unfold(1), imported.unfold(2), imported.unfold(3));
    let group = ringkey_core::consensus::group_consensus(&ya, &yb, &yc, &q, e)?;
    let hash = quantizer_content_hash(&q, doc.eta, e as u32);
    for (name, key) in [
        ("key_node1.txt", &group.key_node1),
        ("key_node2.txt", &group.key_node2),
        ("key_node3.txt", &group.key_node3),
    ] {
        let mut buf = Vec::new();
        ringkey_core::consensus::write_key_material(&mut buf, key, q.bits(), e as u32, &hash, seed)?;
        std::fs::write(out.join(name), buf)?;
    }
    let mut log = Vec::new();
    ringkey_core::consensus::write_index_exchange_log(
        &mut log,
        &["retained"],
        &[&group.indices],
    )?;
    std::fs::write(out.join("index_exchange.jsonl"), log)?;
    let mismatch = ringkey_core::consensus::group_mismatch_rate(
        &group.key_node1,
        &group.key_node2,
        &group.key_node3,
    )?;
    let summary = serde_json::json!({
        "e": e,
        "retained": group.indices.len(),
        "samples": ya.len(),
        "rate": ringkey_core::consensus::key_rate(q.bits(), group.indices.len(), ya.len()),
        "group_mismatch": mismatch,
        "entropy_bits": ringkey_core::consensus::empirical_entropy_bits(&group.key_node1),
        "exchange_sizes": group.exchange_sizes,
        "quantizer_hash": hash,
    });
    std::fs::write(
        out.join("consensus_report.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "consensus: retained {} of {} samples, group mismatch {:.3e}",
        group.indices.len(),
        ya.len(),
        mismatch
    );
    Ok(ExitCode::SUCCESS)
}

fn table_exit(table: &ringkey_cli::MetricsTable) -> ExitCode {
    if table.all_infeasible() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            protocol,
            snr_db,
            m,
            blocks,
            seed,
            constellation,
            out,
        } => cmd_simulate(protocol, snr_db, m, blocks, seed, constellation, out),
        Command::Design {
            trace,
            dist,
            design_pair,
            b,
            beta,
            eta,
            excursion_max,
            out,
        } => cmd_design(trace, dist, design_pair, b, beta, eta, excursion_max, out),
        Command::Consensus {
            trace,
            quantizer,
            e,
            seed,
            out,
        } => cmd_consensus(trace, quantizer, e, seed, out),
        Command::Leakage { grid } => {
            let cfg = grid.resolve()?;
            init_workers(cfg.workers);
            prepare_out_dir(&grid.out)?;
            let reports = run_leakage_scan(&cfg)?;
            std::fs::write(
                grid.out.join("leakage.json"),
                serde_json::to_string_pretty(&reports)?,
            )?;
            for r in &reports {
                println!(
                    "{} m={} snr={} dB: MI {:.4e} bits (bias bound {:.4e})",
                    r.protocol, r.m, r.snr_db, r.mi_bits, r.bias_bound_bits
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { grid } => {
            let cfg = grid.resolve()?;
            init_workers(cfg.workers);
            let table = run_experiment(&cfg)?;
            emit_outputs(&table, &grid.out)?;
            println!("wrote {} rows to {}", table.rows.len(), grid.out.display());
            Ok(table_exit(&table))
        }
        Command::Study { which } => {
            let (grid, table) = match which {
                StudyCommand::DesignPair { grid } => {
                    let cfg = grid.resolve()?;
                    init_workers(cfg.workers);
                    (grid, run_design_pair_study(&cfg)?)
                }
                StudyCommand::Constellation { grid } => {
                    let cfg = grid.resolve()?;
                    init_workers(cfg.workers);
                    (grid, run_constellation_study(&cfg)?)
                }
            };
            emit_outputs(&table, &grid.out)?;
            println!("wrote {} rows to {}", table.rows.len(), grid.out.display());
            Ok(table_exit(&table))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
