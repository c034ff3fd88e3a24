//! `povf report`: recompute metrics from a run directory's block trace, or
//! from a plain whitespace-separated counts file.

use clap::{Args, ValueEnum};
use povf::metrics::{self, BlockCountSet, BlockStat};
use povf::sim::BlockRecord;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

use crate::{EXIT_OK, EXIT_USAGE};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args)]
pub struct ReportArgs {
    /// A directory produced by `povf sim` (reads manifest + blocks.jsonl)
    #[arg(long, required_unless_present = "counts_file")]
    trace_dir: Option<PathBuf>,
    /// A plain file of whitespace-separated per-proposer block counts
    #[arg(long)]
    counts_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

pub fn run(args: ReportArgs) -> u8 {
    match (&args.counts_file, &args.trace_dir) {
        (Some(path), _) => counts_report(path, args.format),
        (None, Some(dir)) => trace_report(dir, args.format),
        (None, None) => {
            eprintln!("error: need --trace-dir or --counts-file");
            EXIT_USAGE
        }
    }
}

fn counts_report(path: &Path, format: Format) -> u8 {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(why) => {
            eprintln!("error: cannot read {}: {why}", path.display());
            return EXIT_USAGE;
        }
    };
    let mut counts = Vec::new();
    for token in text.split_whitespace() {
        match token.parse::<u64>() {
            Ok(value) => counts.push(value),
            Err(_) => {
                eprintln!("error: `{token}` is not a non-negative integer");
                return EXIT_USAGE;
            }
        }
    }
    let set = BlockCountSet(counts);
    let gini = metrics::gini(&set).map(|g| metrics::to_decimal(&g));
    let std_dev = metrics::std_dev(&set);
    match format {
        Format::Json => {
            let doc = json!({
                "proposers": set.len(),
                "total_blocks": set.total(),
                "gini": gini.as_deref().ok(),
                "std_dev": std_dev.as_ref().ok(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
        Format::Csv => {
            println!("metric,value");
            println!("proposers,{}", set.len());
            println!("total_blocks,{}", set.total());
            println!("gini,{}", gini.as_deref().unwrap_or(""));
            match &std_dev {
                Ok(s) => println!("std_dev,{s}"),
                Err(_) => println!("std_dev,"),
            }
        }
    }
    EXIT_OK
}

fn trace_report(dir: &Path, format: Format) -> u8 {
    if !dir.join("manifest.json").exists() {
        eprintln!("error: {} has no manifest.json", dir.display());
        return EXIT_USAGE;
    }
    let blocks_text = match fs::read_to_string(dir.join("blocks.jsonl")) {
        Ok(text) => text,
        Err(why) => {
            eprintln!("error: cannot read blocks.jsonl: {why}");
            return EXIT_USAGE;
        }
    };
    let mut records: Vec<BlockRecord> = Vec::new();
    for line in blocks_text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str(line) {
            Ok(record) => records.push(record),
            Err(why) => {
                eprintln!("error: corrupt block record: {why}");
                return EXIT_USAGE;
            }
        }
    }

    // rebuild the stat stream with the genesis anchor at t=0
    let mut stats = vec![BlockStat {
        height: 0,
        timestamp_ms: 0,
        tx_count: 0,
    }];
    stats.extend(records.iter().map(|b| BlockStat {
        height: b.height,
        timestamp_ms: b.timestamp_ms,
        tx_count: b.tx_count,
    }));
    let average = metrics::average_tps(&stats).ok();
    let max_instantaneous = stats
        .windows(2)
        .filter_map(|w| metrics::instantaneous_tps(&w[0], &w[1]).ok())
        .max();

    // proposer counts: prefer nodes.jsonl (it carries zero-count honest
    // nodes, matching the run summary exactly); fall back to the blocks
    let set = match fs::read_to_string(dir.join("nodes.jsonl")) {
        Ok(text) => {
            let mut counts = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                match serde_json::from_str::<povf::sim::NodeRecord>(line) {
                    Ok(node) if node.honest => counts.push(node.confirmed_blocks),
                    Ok(_) => {}
                    Err(why) => {
                        eprintln!("error: corrupt node record: {why}");
                        return EXIT_USAGE;
                    }
                }
            }
            BlockCountSet(counts)
        }
        Err(_) => {
            let mut by_proposer: std::collections::BTreeMap<usize, u64> = Default::default();
            for record in &records {
                if let Some(node) = record.proposer_node {
                    *by_proposer.entry(node).or_default() += 1;
                }
            }
            BlockCountSet(by_proposer.values().copied().collect())
        }
    };
    let gini = metrics::gini(&set).ok().map(|g| metrics::to_decimal(&g));
    let std_dev = metrics::std_dev(&set).ok();

    match format {
        Format::Json => {
            let doc = json!({
                "confirmed_heights": records.last().map(|b| b.height).unwrap_or(0),
                "total_confirmed_txs": records.iter().map(|b| b.tx_count).sum::<u64>(),
                "average_tps": average.as_ref().map(metrics::to_decimal),
                "max_instantaneous_tps": max_instantaneous.as_ref().map(metrics::to_decimal),
                "gini": gini,
                "std_dev": std_dev,
                "distinct_proposers": set.len(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
        Format::Csv => {
            println!("metric,value");
            println!(
                "confirmed_heights,{}",
                records.last().map(|b| b.height).unwrap_or(0)
            );
            println!(
                "total_confirmed_txs,{}",
                records.iter().map(|b| b.tx_count).sum::<u64>()
            );
            println!(
                "average_tps,{}",
                average.as_ref().map(metrics::to_decimal).unwrap_or_default()
            );
            println!(
                "max_instantaneous_tps,{}",
                max_instantaneous
                    .as_ref()
                    .map(metrics::to_decimal)
                    .unwrap_or_default()
            );
            println!("gini,{}", gini.unwrap_or_default());
            println!(
                "std_dev,{}",
                std_dev.map(|s| s.to_string()).unwrap_or_default()
            );
        }
    }
    EXIT_OK
}
