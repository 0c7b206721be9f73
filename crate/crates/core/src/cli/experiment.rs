//! Grid sweeps over k, adversary mode, challenger mode and seed.
//!
//! Each cell writes `traces/<run_id>.csv`; once every cell is done the
//! aggregate `aggregate.csv` holds, per (scenario, adversary, challenger, k,
//! interval), the across-seed mean of each score with the 95% half-width
//! `1.96 * std / sqrt(n_seeds)`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::plot::write_fscore_plot;
use crate::cli::trace_csv::write_trace;
use crate::config::{
    apply_entries, parse_entries, parse_list, AdversaryMode, ChallengerMode, GameConfig,
};
use crate::engine::{run_game, GameTrace};
use crate::error::{GameError, Result};
use crate::stats::{ci95_halfwidth, mean, std_dev};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: GameConfig,
    pub ks: Vec<usize>,
    pub adversary_modes: Vec<AdversaryMode>,
    pub challenger_modes: Vec<ChallengerMode>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.ks.is_empty()
            || self.adversary_modes.is_empty()
            || self.challenger_modes.is_empty()
            || self.seeds.is_empty()
        {
            return Err(GameError::Config("every sweep axis needs at least one value".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(GameError::Config("sweep seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Every grid cell as a full game configuration, in a fixed order.
    pub fn cells(&self) -> Vec<GameConfig> {
        let mut out = Vec::new();
        for &adversary_mode in &self.adversary_modes {
            for &challenger_mode in &self.challenger_modes {
                for &k in &self.ks {
                    for &seed in &self.seeds {
                        out.push(GameConfig {
                            adversary_mode,
                            challenger_mode,
                            k,
                            seed,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Seeds as `a..b` (inclusive) or a comma list.
fn parse_seeds(key: &str, v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| GameError::Config(format!("{key}: {e}")))?;
        let b: u64 = b.trim().parse().map_err(|e| GameError::Config(format!("{key}: {e}")))?;
        if b < a {
            return Err(GameError::Config(format!("{key}: empty range {v}")));
        }
        Ok((a..=b).collect())
    } else {
        parse_list(key, v)
    }
}

/// Parse a sweep file: a game configuration plus a `[sweep]` section with
/// `k`, `adversary_modes`, `challenger_modes`, `seeds` and `output_dir`.
pub fn parse_experiment_spec(text: &str) -> Result<ExperimentSpec> {
    let entries = parse_entries(text)?;
    let (sweep, game): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.key.starts_with("sweep."));
    let mut base = GameConfig::default();
    apply_entries(&mut base, &game)?;
    let mut spec = ExperimentSpec {
        ks: vec![base.k],
        adversary_modes: vec![base.adversary_mode],
        challenger_modes: vec![base.challenger_mode],
        seeds: vec![base.seed],
        output_dir: PathBuf::from("sweep-out"),
        base,
    };
    for e in sweep {
        let err = |m: GameError| GameError::Parse {
            line: e.line,
            msg: m.to_string(),
        };
        let v = e.value.as_str();
        match e.key.as_str() {
            "sweep.k" => spec.ks = parse_list(&e.key, v).map_err(err)?,
            "sweep.adversary_modes" => {
                spec.adversary_modes = v
                    .split(',')
                    .map(AdversaryMode::parse)
                    .collect::<Result<_>>()
                    .map_err(err)?
            }
            "sweep.challenger_modes" => {
                spec.challenger_modes = v
                    .split(',')
                    .map(ChallengerMode::parse)
                    .collect::<Result<_>>()
                    .map_err(err)?
            }
            "sweep.seeds" => spec.seeds = parse_seeds(&e.key, v).map_err(err)?,
            "sweep.output_dir" => spec.output_dir = PathBuf::from(v),
            other => {
                return Err(GameError::Parse {
                    line: e.line,
                    msg: format!("unknown key '{other}'"),
                })
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Across-seed summary of one (cell without seed, interval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub adversary_mode: String,
    pub challenger_mode: String,
    pub k: usize,
    pub interval: usize,
    pub n_seeds: usize,
    pub mean_f_score: f64,
    pub std_f_score: f64,
    pub ci95_f_score: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
}

/// Group traces by everything except the seed and summarize per interval.
/// Each group is reduced in seed order, so the result does not depend on the
/// order of `traces`.
pub fn aggregate(traces: &[GameTrace]) -> Vec<AggregateRow> {
    type Key = (String, String, String, usize, usize);
    let mut groups: BTreeMap<Key, Vec<(u64, f64, f64, f64)>> = BTreeMap::new();
    for t in traces {
        for r in &t.records {
            let key = (
                t.scenario.as_str().to_string(),
                t.adversary_mode.as_str().to_string(),
                t.challenger_mode.as_str().to_string(),
                t.k,
                r.interval,
            );
            groups
                .entry(key)
                .or_default()
                .push((t.seed, r.metrics.f_score, r.metrics.precision, r.metrics.recall));
        }
    }
    groups
        .into_iter()
        .map(|((scenario, adversary_mode, challenger_mode, k, interval), mut v)| {
            v.sort_by_key(|x| x.0);
            let f: Vec<f64> = v.iter().map(|x| x.1).collect();
            let p: Vec<f64> = v.iter().map(|x| x.2).collect();
            let r: Vec<f64> = v.iter().map(|x| x.3).collect();
            AggregateRow {
                scenario,
                adversary_mode,
                challenger_mode,
                k,
                interval,
                n_seeds: v.len(),
                mean_f_score: mean(&f),
                std_f_score: std_dev(&f),
                ci95_f_score: ci95_halfwidth(&f),
                mean_precision: mean(&p),
                mean_recall: mean(&r),
            }
        })
        .collect()
}

pub fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(GameError::from)).collect()
}

/// Run every grid cell (in parallel), then write per-cell traces, the
/// aggregate table and one F-score plot per (adversary, k).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<AggregateRow>> {
    spec.validate()?;
    let trace_dir = spec.output_dir.join("traces");
    let plot_dir = spec.output_dir.join("plots");
    fs::create_dir_all(&trace_dir)?;
    fs::create_dir_all(&plot_dir)?;

    let traces: Vec<GameTrace> = spec
        .cells()
        .par_iter()
        .map(|cfg| {
            let trace = run_game(cfg)?;
            let file = fs::File::create(trace_dir.join(format!("{}.csv", trace.run_id)))?;
            write_trace(&trace, std::io::BufWriter::new(file))?;
            Ok(trace)
        })
        .collect::<Result<_>>()?;

    let rows = aggregate(&traces);
    write_aggregate(&rows, &spec.output_dir.join("aggregate.csv"))?;
    for &adv in &spec.adversary_modes {
        for &k in &spec.ks {
            let subset: Vec<&AggregateRow> = rows
                .iter()
                .filter(|r| r.adversary_mode == adv.as_str() && r.k == k)
                .collect();
            let path = plot_dir.join(format!("fscore_{}_k{k}.svg", adv.as_str()));
            write_fscore_plot(&subset, &format!("{adv} adversary, k = {k}"), &path)?;
        }
    }
    Ok(rows)
}
