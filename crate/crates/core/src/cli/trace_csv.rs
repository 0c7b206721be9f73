//! Game traces as CSV, one row per interval, with a fixed column order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::{AdversaryMode, ChallengerMode};
use crate::datagen::ScenarioKind;
use crate::domain::Metrics;
use crate::engine::{GameTrace, IntervalRecord};
use crate::error::{GameError, Result};

pub const CSV_HEADER: [&str; 17] = [
    "run_id",
    "seed",
    "scenario",
    "adversary_mode",
    "challenger_mode",
    "k",
    "interval",
    "tp",
    "fp",
    "fn",
    "tn",
    "precision",
    "recall",
    "f_score",
    "pool_size",
    "budget_spent",
    "decoys_injected",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    run_id: String,
    seed: u64,
    scenario: String,
    adversary_mode: String,
    challenger_mode: String,
    k: usize,
    interval: usize,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    tn: usize,
    precision: f64,
    recall: f64,
    f_score: f64,
    pool_size: usize,
    budget_spent: usize,
    decoys_injected: usize,
}

pub fn write_trace<W: Write>(trace: &GameTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &trace.records {
        let m = &r.metrics;
        w.serialize(Row {
            run_id: trace.run_id.clone(),
            seed: trace.seed,
            scenario: trace.scenario.as_str().into(),
            adversary_mode: trace.adversary_mode.as_str().into(),
            challenger_mode: trace.challenger_mode.as_str().into(),
            k: trace.k,
            interval: r.interval,
            tp: m.true_positives,
            fp: m.false_positives,
            fn_: m.false_negatives,
            tn: m.true_negatives,
            precision: m.precision,
            recall: m.recall,
            f_score: m.f_score,
            pool_size: r.pool_size,
            budget_spent: r.budget_spent,
            decoys_injected: r.decoys_injected,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<GameTrace> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(GameError::Parse {
            line: 1,
            msg: format!("unexpected trace header {header:?}"),
        });
    }
    let mut trace: Option<GameTrace> = None;
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let t = trace.get_or_insert_with(|| GameTrace {
            run_id: row.run_id.clone(),
            seed: row.seed,
            scenario: ScenarioKind::NonOverlapping,
            adversary_mode: AdversaryMode::Random,
            challenger_mode: ChallengerMode::None,
            k: row.k,
            records: Vec::new(),
        });
        if t.records.is_empty() {
            t.scenario = ScenarioKind::parse(&row.scenario)?;
            t.adversary_mode = AdversaryMode::parse(&row.adversary_mode)?;
            t.challenger_mode = ChallengerMode::parse(&row.challenger_mode)?;
        } else if row.run_id != t.run_id {
            return Err(GameError::Parse {
                line: i + 2,
                msg: format!("mixed run ids '{}' and '{}'", t.run_id, row.run_id),
            });
        }
        t.records.push(IntervalRecord {
            interval: row.interval,
            metrics: Metrics {
                true_positives: row.tp,
                false_positives: row.fp,
                false_negatives: row.fn_,
                true_negatives: row.tn,
                precision: row.precision,
                recall: row.recall,
                f_score: row.f_score,
            },
            pool_size: row.pool_size,
            budget_spent: row.budget_spent,
            decoys_injected: row.decoys_injected,
        });
    }
    trace.ok_or_else(|| GameError::Parse {
        line: 1,
        msg: "trace has no rows".into(),
    })
}
