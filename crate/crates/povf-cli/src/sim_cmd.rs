//! `povf sim`: run a simulation campaign and write its artifact files.
//!
//! The output directory receives a manifest, a summary, JSON-lines traces
//! (epochs, canonical blocks, per-node chains, clock samples), per-node
//! block logs, and a per-height CSV. A manifest plus the config and seed
//! reproduces every artifact bit-exactly.

use clap::Args;
use povf::metrics::{self, BlockStat};
use povf::sim::{self, SimConfig, SimReport};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::{EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};

#[derive(Args)]
pub struct SimArgs {
    /// Simulation config, TOML or JSON (by extension; TOML default)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's rng_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $POVF_OUT_DIR or ./povf-out, plus a
    /// run-<seed> subdirectory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress lines
    #[arg(long, default_value_t = false)]
    quiet: bool,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    config_path: String,
    rng_seed: u64,
    resolved_config: &'a SimConfig,
    artifacts: ArtifactPaths,
    started_unix_ms: u128,
    finished_unix_ms: u128,
}

#[derive(Serialize)]
struct ArtifactPaths {
    summary: String,
    epochs: String,
    blocks: String,
    nodes: String,
    chains: String,
    clock: String,
    node_offsets: String,
    heights_csv: String,
    node_block_logs: String,
    adversary: Option<String>,
}

pub fn run(args: SimArgs) -> u8 {
    let text = match fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(why) => {
            eprintln!("error: cannot read {}: {why}", args.config.display());
            return EXIT_USAGE;
        }
    };
    let is_json = args
        .config
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        SimConfig::from_json(&text)
    } else {
        SimConfig::from_toml(&text)
    };
    let mut config = match parsed {
        Ok(config) => config,
        Err(why) => {
            eprintln!("error: config parse failed: {why}");
            return EXIT_USAGE;
        }
    };
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Err(why) = config.validate() {
        eprintln!("error: {why}");
        return EXIT_USAGE;
    }

    let out_dir = args.out.unwrap_or_else(|| {
        let root = std::env::var_os("POVF_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("povf-out"));
        root.join(format!("run-{}", config.rng_seed))
    });
    if let Err(why) = fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {why}", out_dir.display());
        return EXIT_USAGE;
    }

    println!("seed: {}", config.rng_seed);
    let started = unix_ms();
    let quiet = args.quiet;
    let mut progress = |done: u64, total: u64| {
        if !quiet && (done.is_multiple_of(100) || done == total) {
            println!("epoch {done}/{total}");
        }
    };
    let report = match sim::run(&config, Some(&mut progress)) {
        Ok(report) => report,
        Err(sim::SimError::Config(why)) => {
            eprintln!("error: {why}");
            return EXIT_USAGE;
        }
        Err(why) => {
            eprintln!("error: {why}");
            return EXIT_INTERNAL;
        }
    };
    let finished = unix_ms();

    match write_artifacts(&out_dir, &args.config, &config, &report, started, finished) {
        Ok(()) => {}
        Err(why) => {
            eprintln!("error: writing artifacts: {why}");
            return EXIT_INTERNAL;
        }
    }

    let s = &report.summary;
    println!("confirmed heights: {}", s.confirmed_heights);
    println!(
        "average TPS: {}",
        s.average_tps.as_deref().unwrap_or("undefined")
    );
    println!(
        "max instantaneous TPS: {}",
        s.max_instantaneous_tps.as_deref().unwrap_or("undefined")
    );
    println!("gini: {}", s.gini.as_deref().unwrap_or("undefined"));
    println!("max clock offset: {} ms", s.max_clock_offset_ms);
    println!("artifacts: {}", out_dir.display());
    EXIT_OK
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_artifacts(
    dir: &Path,
    config_path: &Path,
    config: &SimConfig,
    report: &SimReport,
    started: u128,
    finished: u128,
) -> anyhow::Result<()> {
    fs::write(
        dir.join("summary.json"),
        serde_json::to_vec_pretty(&summary_doc(config, report))?,
    )?;
    write_jsonl(&dir.join("epochs.jsonl"), &report.epochs)?;
    write_jsonl(&dir.join("blocks.jsonl"), &report.blocks)?;
    write_jsonl(&dir.join("nodes.jsonl"), &report.nodes)?;
    write_jsonl(&dir.join("chains.jsonl"), &report.confirmed_chains)?;
    write_jsonl(&dir.join("clock.jsonl"), &report.clock_samples)?;
    write_jsonl(&dir.join("node_offsets.jsonl"), &report.node_clock_series)?;
    fs::write(dir.join("heights.csv"), heights_csv(report))?;

    // per-node block logs: each node's confirmed chain joined against the
    // canonical records where available
    let logs_dir = dir.join("blocks");
    fs::create_dir_all(&logs_dir)?;
    let by_hash: std::collections::HashMap<&str, &sim::BlockRecord> = report
        .blocks
        .iter()
        .map(|b| (b.hash.as_str(), b))
        .collect();
    for chain in &report.confirmed_chains {
        let mut out = Vec::new();
        for (height, hash) in chain.hashes.iter().enumerate().skip(1) {
            match by_hash.get(hash.as_str()) {
                Some(record) => serde_json::to_writer(&mut out, record)?,
                None => serde_json::to_writer(
                    &mut out,
                    &serde_json::json!({ "height": height, "hash": hash }),
                )?,
            }
            out.push(b'\n');
        }
        fs::write(logs_dir.join(format!("node_{:04}.jsonl", chain.node)), out)?;
    }

    let adversary_path = if let Some(adversary) = &report.adversary {
        let path = dir.join("adversary.json");
        fs::write(&path, serde_json::to_vec_pretty(adversary)?)?;
        Some("adversary.json".to_string())
    } else {
        None
    };

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_path: config_path.display().to_string(),
        rng_seed: config.rng_seed,
        resolved_config: config,
        artifacts: ArtifactPaths {
            summary: "summary.json".into(),
            epochs: "epochs.jsonl".into(),
            blocks: "blocks.jsonl".into(),
            nodes: "nodes.jsonl".into(),
            chains: "chains.jsonl".into(),
            clock: "clock.jsonl".into(),
            node_offsets: "node_offsets.jsonl".into(),
            heights_csv: "heights.csv".into(),
            node_block_logs: "blocks/".into(),
            adversary: adversary_path,
        },
        started_unix_ms: started,
        finished_unix_ms: finished,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    seed: u64,
    duration_epochs: u64,
    honest_nodes_final: u64,
    events_processed: u64,
    honest_heartbeat_rejections: u64,
    metrics: &'a sim::MetricsSummary,
    adversary: Option<AdversarySummary>,
}

#[derive(Serialize)]
struct AdversarySummary {
    scenario: String,
    confirmed_blocks: u64,
    confirmed_share: f64,
    replayed_registrations_rejected: u64,
    replayed_heartbeats_rejected: u64,
}

fn summary_doc<'a>(config: &SimConfig, report: &'a SimReport) -> SummaryDoc<'a> {
    let _ = config;
    SummaryDoc {
        seed: report.seed,
        duration_epochs: report.duration_epochs,
        honest_nodes_final: report.honest_nodes_final,
        events_processed: report.events_processed,
        honest_heartbeat_rejections: report.honest_heartbeat_rejections,
        metrics: &report.summary,
        adversary: report.adversary.as_ref().map(|a| AdversarySummary {
            scenario: a.scenario.clone(),
            confirmed_blocks: a.confirmed_blocks,
            confirmed_share: a.confirmed_share,
            replayed_registrations_rejected: a.replayed_registrations_rejected,
            replayed_heartbeats_rejected: a.replayed_heartbeats_rejected,
        }),
    }
}

/// Per-height CSV matching the throughput figure's axes: consensus time and
/// both TPS definitions per height.
pub fn heights_csv(report: &SimReport) -> String {
    let mut out = String::from(
        "height,timestamp_ms,tx_count,consensus_time_ms,instantaneous_tps,cumulative_average_tps\n",
    );
    let mut stats: Vec<BlockStat> = vec![BlockStat {
        height: 0,
        timestamp_ms: 0,
        tx_count: 0,
    }];
    stats.extend(report.blocks.iter().map(|b| BlockStat {
        height: b.height,
        timestamp_ms: b.timestamp_ms,
        tx_count: b.tx_count,
    }));
    for (index, block) in report.blocks.iter().enumerate() {
        let prev = &stats[index];
        let this = &stats[index + 1];
        let consensus_time = this.timestamp_ms - prev.timestamp_ms;
        let instantaneous = metrics::instantaneous_tps(prev, this)
            .map(|r| metrics::to_decimal(&r))
            .unwrap_or_default();
        let cumulative = metrics::average_tps(&stats[..=index + 1])
            .map(|r| metrics::to_decimal(&r))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            block.height, block.timestamp_ms, block.tx_count, consensus_time, instantaneous,
            cumulative
        ));
    }
    out
}
