//! Game parameters and the plain-text `key = value` format they are read from.
//!
//! ```text
//! # comment
//! [game]
//! intervals = 10
//! k = 2
//! seed = 7
//!
//! [scenario]
//! kind = partial_overlap
//! sigma = 1.0
//! mean_b = 2.5, 0.0
//! ```
//!
//! Keys are addressed as `section.key`; see [`GameConfig::set`] for the full
//! list.

use std::fmt;

use crate::datagen::{IntervalCounts, PlanCounts, ScenarioKind, ScenarioSpec, StreamPlan};
use crate::error::{GameError, Result};
use crate::model::TrainHyper;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdversaryMode {
    Random,
    Static,
    Adaptive,
}

impl AdversaryMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdversaryMode::Random => "random",
            AdversaryMode::Static => "static",
            AdversaryMode::Adaptive => "adaptive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(AdversaryMode::Random),
            "static" => Ok(AdversaryMode::Static),
            "adaptive" => Ok(AdversaryMode::Adaptive),
            other => Err(GameError::Config(format!("unknown adversary mode '{other}'"))),
        }
    }
}

impl fmt::Display for AdversaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decoy selection strategy.
///
/// `Rejection` is the density-aware accept-reject challenger: it screens each
/// volunteered post once and keeps it with probability p+(x) / (M pv(x)), so
/// its decoys follow the damaging distribution. It needs a scenario with a
/// finite envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChallengerMode {
    None,
    Random,
    Oracle,
    D2,
    Rejection,
}

impl ChallengerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChallengerMode::None => "none",
            ChallengerMode::Random => "random",
            ChallengerMode::Oracle => "oracle",
            ChallengerMode::D2 => "d2",
            ChallengerMode::Rejection => "rejection",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(ChallengerMode::None),
            "random" => Ok(ChallengerMode::Random),
            "oracle" => Ok(ChallengerMode::Oracle),
            "d2" | "d²" => Ok(ChallengerMode::D2),
            "rejection" => Ok(ChallengerMode::Rejection),
            other => Err(GameError::Config(format!("unknown challenger mode '{other}'"))),
        }
    }
}

impl fmt::Display for ChallengerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything needed to run one game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    /// Number of intervals T.
    pub intervals: usize,
    /// Decoys per damaging deletion.
    pub k: usize,
    /// Static adversary's per-interval sample size p.
    pub sample_size: usize,
    pub budget_static: usize,
    pub budget_adapt: usize,
    /// D² query budget per interval.
    pub budget_con: usize,
    pub scenario: ScenarioSpec,
    pub counts: PlanCounts,
    pub label_noise: f64,
    pub adversary_mode: AdversaryMode,
    pub challenger_mode: ChallengerMode,
    pub monitored: bool,
    pub adversary_hidden: Vec<usize>,
    pub adversary_train: TrainHyper,
    /// Continue from the previous interval's weights instead of re-initializing.
    pub warm_start: bool,
    pub challenger_hidden: Vec<usize>,
    pub challenger_train: TrainHyper,
    /// Positive rate used by the random adversary.
    pub random_prior: f64,
    pub decision_threshold: f64,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            intervals: 10,
            k: 2,
            sample_size: 40,
            budget_static: 40,
            budget_adapt: 40,
            budget_con: 40,
            scenario: ScenarioSpec::default_for(ScenarioKind::PartialOverlap),
            counts: PlanCounts::Constant(IntervalCounts::default()),
            label_noise: 0.0,
            adversary_mode: AdversaryMode::Adaptive,
            challenger_mode: ChallengerMode::None,
            monitored: false,
            adversary_hidden: vec![16, 16],
            // Balanced batches inflate the positive rate on the skewed
            // deletion stream; off by default, available per config.
            adversary_train: TrainHyper {
                balance_batches: false,
                ..TrainHyper::default()
            },
            warm_start: true,
            challenger_hidden: vec![16, 16],
            challenger_train: TrainHyper {
                learning_rate: 0.5,
                epochs: 100,
                batch_size: 40,
                balance_batches: false,
            },
            random_prior: 0.42,
            decision_threshold: 0.5,
            seed: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| GameError::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(GameError::Config(format!("{key}: not a boolean '{other}'"))),
    }
}

/// Comma-separated list; an empty value is an empty list.
pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl GameConfig {
    /// Defaults with the scenario swapped for `kind`'s defaults.
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        GameConfig {
            scenario: ScenarioSpec::default_for(kind),
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.scenario.dim()
    }

    /// Number of intervals a static adversary trains for: floor(B_static / p).
    pub fn tau(&self) -> usize {
        self.budget_static.checked_div(self.sample_size).unwrap_or(0)
    }

    pub fn stream_plan(&self) -> StreamPlan {
        StreamPlan {
            intervals: self.intervals,
            counts: self.counts.clone(),
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.stream_plan().validate()?;
        self.adversary_train.validate()?;
        self.challenger_train.validate()?;
        let bad = |m: String| Err(GameError::Config(m));
        if self.intervals == 0 {
            return bad("intervals must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad(format!("label_noise {} outside [0, 1]", self.label_noise));
        }
        if !(0.0..=1.0).contains(&self.random_prior) {
            return bad(format!("random_prior {} outside [0, 1]", self.random_prior));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad(format!(
                "decision_threshold {} outside (0, 1)",
                self.decision_threshold
            ));
        }
        if self.challenger_mode == ChallengerMode::Rejection && self.scenario.envelope().is_none()
        {
            return bad(format!(
                "rejection challenger needs a bounded density ratio; scenario {} has none",
                self.scenario.kind().as_str()
            ));
        }
        Ok(())
    }

    /// Apply one `section.key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "game.intervals" => self.intervals = parse_num(key, v)?,
            "game.k" => self.k = parse_num(key, v)?,
            "game.seed" => self.seed = parse_num(key, v)?,
            "game.label_noise" => self.label_noise = parse_num(key, v)?,
            "game.monitored" => self.monitored = parse_bool(key, v)?,

            "stream.n_damaging" | "stream.n_nondamaging" | "stream.n_volunteered" => {
                let n: usize = parse_num(key, v)?;
                let mut c = match &self.counts {
                    PlanCounts::Constant(c) => *c,
                    PlanCounts::PerInterval(_) => {
                        return Err(GameError::Config(format!(
                            "{key}: counts already given per interval"
                        )))
                    }
                };
                match key {
                    "stream.n_damaging" => c.n_damaging = n,
                    "stream.n_nondamaging" => c.n_nondamaging = n,
                    _ => c.n_volunteered = n,
                }
                self.counts = PlanCounts::Constant(c);
            }
            "stream.per_interval" => {
                // "d:n:v; d:n:v; ..."
                let mut v2 = Vec::new();
                for chunk in v.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                    let parts: Vec<usize> = chunk
                        .split(':')
                        .map(|s| parse_num(key, s))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(GameError::Config(format!(
                            "{key}: expected damaging:nondamaging:volunteered, got '{chunk}'"
                        )));
                    }
                    v2.push(IntervalCounts {
                        n_damaging: parts[0],
                        n_nondamaging: parts[1],
                        n_volunteered: parts[2],
                    });
                }
                self.counts = PlanCounts::PerInterval(v2);
            }

            "scenario.kind" => {
                let kind = ScenarioKind::parse(v)?;
                if kind != self.scenario.kind() {
                    self.scenario = ScenarioSpec::default_for(kind);
                }
            }
            "scenario.noise" | "scenario.dim" => match &mut self.scenario {
                ScenarioSpec::NonOverlapping { noise, dim } => {
                    if key == "scenario.noise" {
                        *noise = parse_num(key, v)?;
                    } else {
                        *dim = parse_num(key, v)?;
                    }
                }
                _ => return Err(self.wrong_scenario(key)),
            },
            "scenario.mean0" | "scenario.mean1" | "scenario.sigma0" | "scenario.sigma1" => {
                match &mut self.scenario {
                    ScenarioSpec::FullyOverlapping {
                        mean0,
                        sigma0,
                        mean1,
                        sigma1,
                    } => match key {
                        "scenario.mean0" => *mean0 = parse_list(key, v)?,
                        "scenario.mean1" => *mean1 = parse_list(key, v)?,
                        "scenario.sigma0" => *sigma0 = parse_num(key, v)?,
                        _ => *sigma1 = parse_num(key, v)?,
                    },
                    _ => return Err(self.wrong_scenario(key)),
                }
            }
            "scenario.mean_a" | "scenario.mean_b" | "scenario.mean_shared" | "scenario.sigma" => {
                match &mut self.scenario {
                    ScenarioSpec::PartialOverlap {
                        mean_a,
                        mean_b,
                        mean_shared,
                        sigma,
                    } => match key {
                        "scenario.mean_a" => *mean_a = parse_list(key, v)?,
                        "scenario.mean_b" => *mean_b = parse_list(key, v)?,
                        "scenario.mean_shared" => *mean_shared = parse_list(key, v)?,
                        _ => *sigma = parse_num(key, v)?,
                    },
                    _ => return Err(self.wrong_scenario(key)),
                }
            }

            "adversary.mode" => self.adversary_mode = AdversaryMode::parse(v)?,
            "adversary.sample_size" => self.sample_size = parse_num(key, v)?,
            "adversary.budget_static" => self.budget_static = parse_num(key, v)?,
            "adversary.budget_adapt" => self.budget_adapt = parse_num(key, v)?,
            "adversary.hidden" => self.adversary_hidden = parse_list(key, v)?,
            "adversary.learning_rate" => self.adversary_train.learning_rate = parse_num(key, v)?,
            "adversary.epochs" => self.adversary_train.epochs = parse_num(key, v)?,
            "adversary.batch_size" => self.adversary_train.batch_size = parse_num(key, v)?,
            "adversary.balance_batches" => {
                self.adversary_train.balance_batches = parse_bool(key, v)?
            }
            "adversary.warm_start" => self.warm_start = parse_bool(key, v)?,
            "adversary.random_prior" => self.random_prior = parse_num(key, v)?,
            "adversary.decision_threshold" => self.decision_threshold = parse_num(key, v)?,

            "challenger.mode" => self.challenger_mode = ChallengerMode::parse(v)?,
            "challenger.budget_con" => self.budget_con = parse_num(key, v)?,
            "challenger.hidden" => self.challenger_hidden = parse_list(key, v)?,
            "challenger.learning_rate" => {
                self.challenger_train.learning_rate = parse_num(key, v)?
            }
            "challenger.epochs" => self.challenger_train.epochs = parse_num(key, v)?,

            other => return Err(GameError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn wrong_scenario(&self, key: &str) -> GameError {
        GameError::Config(format!(
            "{key} does not apply to scenario {}",
            self.scenario.kind().as_str()
        ))
    }

    /// Render in the same text format [`GameConfig::set`] consumes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("[game]\nintervals", self.intervals.to_string());
        line("k", self.k.to_string());
        line("seed", self.seed.to_string());
        line("label_noise", self.label_noise.to_string());
        line("monitored", self.monitored.to_string());
        match &self.counts {
            PlanCounts::Constant(c) => {
                line("\n[stream]\nn_damaging", c.n_damaging.to_string());
                line("n_nondamaging", c.n_nondamaging.to_string());
                line("n_volunteered", c.n_volunteered.to_string());
            }
            PlanCounts::PerInterval(v) => {
                let spec = v
                    .iter()
                    .map(|c| format!("{}:{}:{}", c.n_damaging, c.n_nondamaging, c.n_volunteered))
                    .collect::<Vec<_>>()
                    .join("; ");
                line("\n[stream]\nper_interval", spec);
            }
        }
        line("\n[scenario]\nkind", self.scenario.kind().as_str().into());
        match &self.scenario {
            ScenarioSpec::NonOverlapping { noise, dim } => {
                line("noise", noise.to_string());
                line("dim", dim.to_string());
            }
            ScenarioSpec::FullyOverlapping {
                mean0,
                sigma0,
                mean1,
                sigma1,
            } => {
                line("mean0", join(mean0));
                line("sigma0", sigma0.to_string());
                line("mean1", join(mean1));
                line("sigma1", sigma1.to_string());
            }
            ScenarioSpec::PartialOverlap {
                mean_a,
                mean_b,
                mean_shared,
                sigma,
            } => {
                line("mean_a", join(mean_a));
                line("mean_b", join(mean_b));
                line("mean_shared", join(mean_shared));
                line("sigma", sigma.to_string());
            }
        }
        line("\n[adversary]\nmode", self.adversary_mode.to_string());
        line("sample_size", self.sample_size.to_string());
        line("budget_static", self.budget_static.to_string());
        line("budget_adapt", self.budget_adapt.to_string());
        line("hidden", join(&self.adversary_hidden));
        line("learning_rate", self.adversary_train.learning_rate.to_string());
        line("epochs", self.adversary_train.epochs.to_string());
        line("batch_size", self.adversary_train.batch_size.to_string());
        line("balance_batches", self.adversary_train.balance_batches.to_string());
        line("warm_start", self.warm_start.to_string());
        line("random_prior", self.random_prior.to_string());
        line("decision_threshold", self.decision_threshold.to_string());
        line("\n[challenger]\nmode", self.challenger_mode.to_string());
        line("budget_con", self.budget_con.to_string());
        line("hidden", join(&self.challenger_hidden));
        line("learning_rate", self.challenger_train.learning_rate.to_string());
        line("epochs", self.challenger_train.epochs.to_string());
        s
    }
}

/// One parsed `key = value` line with its section prefix applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Split config text into `section.key = value` entries.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| GameError::Parse {
                line: i + 1,
                msg: format!("unterminated section header '{line}'"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| GameError::Parse {
            line: i + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        out.push(Entry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

/// Parse a full game configuration. `scenario.kind` is applied first so that
/// scenario parameters land on the right variant regardless of order.
pub fn parse_game_config(text: &str) -> Result<GameConfig> {
    let entries = parse_entries(text)?;
    let mut cfg = GameConfig::default();
    apply_entries(&mut cfg, &entries)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Apply entries to `cfg`, honoring `scenario.kind` before other keys.
pub fn apply_entries(cfg: &mut GameConfig, entries: &[Entry]) -> Result<()> {
    let with_line = |e: &Entry, err: GameError| GameError::Parse {
        line: e.line,
        msg: err.to_string(),
    };
    for e in entries.iter().filter(|e| e.key == "scenario.kind") {
        cfg.set(&e.key, &e.value).map_err(|err| with_line(e, err))?;
    }
    for e in entries.iter().filter(|e| e.key != "scenario.kind") {
        cfg.set(&e.key, &e.value).map_err(|err| with_line(e, err))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for kind in [
            ScenarioKind::NonOverlapping,
            ScenarioKind::FullyOverlapping,
            ScenarioKind::PartialOverlap,
        ] {
            let mut cfg = GameConfig::for_scenario(kind);
            cfg.k = 5;
            cfg.seed = 99;
            cfg.challenger_mode = ChallengerMode::D2;
            let back = parse_game_config(&cfg.to_text()).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn sections_and_comments() {
        let text = "# top\n[scenario]\nsigma = 0.5 # inline\nkind = partial_overlap\n[game]\nk=3\n";
        let cfg = parse_game_config(text).unwrap();
        assert_eq!(cfg.k, 3);
        match cfg.scenario {
            ScenarioSpec::PartialOverlap { sigma, .. } => assert_eq!(sigma, 0.5),
            _ => panic!("wrong scenario"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_game_config("[game]\nk = 2\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, GameError::Parse { line: 3, .. }), "{err}");
        assert!(parse_game_config("[game\n").is_err());
        assert!(parse_game_config("[game]\nlabel_noise = 1.5\n").is_err());
        assert!(parse_game_config("[scenario]\nkind = moons\nsigma = 1\n").is_err());
    }

    #[test]
    fn tau_is_floor_of_budget_over_sample() {
        let cfg = GameConfig {
            budget_static: 200,
            sample_size: 200,
            ..Default::default()
        };
        assert_eq!(cfg.tau(), 1);
        let cfg = GameConfig {
            budget_static: 250,
            sample_size: 100,
            ..Default::default()
        };
        assert_eq!(cfg.tau(), 2);
    }

    #[test]
    fn rejection_requires_envelope() {
        let mut cfg = GameConfig::for_scenario(ScenarioKind::PartialOverlap);
        cfg.challenger_mode = ChallengerMode::Rejection;
        assert!(cfg.validate().is_err());
        cfg.scenario = ScenarioSpec::default_for(ScenarioKind::FullyOverlapping);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn per_interval_counts() {
        let cfg =
            parse_game_config("[game]\nintervals = 2\n[stream]\nper_interval = 1:2:3; 4:5:6\n")
                .unwrap();
        assert_eq!(cfg.stream_plan().counts_at(2).n_volunteered, 6);
        assert!(parse_game_config("[game]\nintervals = 3\n[stream]\nper_interval = 1:2:3\n").is_err());
    }
}
