//! Training configuration and its flat `key = value` file form.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    PredictEvents,
    PredictWords,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::PredictEvents => "predict_events",
            Objective::PredictWords => "predict_words",
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predict_events" | "ev" => Ok(Objective::PredictEvents),
            "predict_words" | "wp" => Ok(Objective::PredictWords),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    /// Hinge margin `m`.
    pub margin: f64,
    /// Forward window for target events.
    pub window: usize,
    /// l2 weight `λ`.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Word-softmax vocabulary size (UNK class excluded).
    pub vocab_cap: usize,
    /// Whether embedding rows are trained along with the model.
    pub update_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::PredictEvents,
            margin: 0.5,
            window: 5,
            lambda: 1e-4,
            learning_rate: 0.01,
            batch_size: 128,
            epochs: 5,
            seed: 0,
            vocab_cap: 50_000,
            update_embeddings: true,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        if self.objective == Objective::PredictEvents {
            if !(self.margin > 0.0 && self.margin.is_finite()) {
                return Err(Error::Config("margin must be > 0 for predict_events".into()));
            }
            if self.window == 0 {
                return Err(Error::Config("window must be >= 1".into()));
            }
        }
        if self.vocab_cap == 0 {
            return Err(Error::Config("vocab_cap must be >= 1".into()));
        }
        Ok(())
    }

    /// Parse `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "objective" => cfg.objective = value.parse()?,
                "margin" | "m" => cfg.margin = parse_value(key, value, line_no)?,
                "window" | "w" => cfg.window = parse_value(key, value, line_no)?,
                "lambda" => cfg.lambda = parse_value(key, value, line_no)?,
                "learning_rate" => cfg.learning_rate = parse_value(key, value, line_no)?,
                "batch_size" => cfg.batch_size = parse_value(key, value, line_no)?,
                "epochs" => cfg.epochs = parse_value(key, value, line_no)?,
                "seed" => cfg.seed = parse_value(key, value, line_no)?,
                "vocab_cap" => cfg.vocab_cap = parse_value(key, value, line_no)?,
                "update_embeddings" => cfg.update_embeddings = parse_value(key, value, line_no)?,
                other => {
                    return Err(Error::Config(format!("line {line_no}: unknown key `{other}`")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "objective = {}", self.objective.as_str());
        let _ = writeln!(s, "margin = {:?}", self.margin);
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "lambda = {:?}", self.lambda);
        let _ = writeln!(s, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "vocab_cap = {}", self.vocab_cap);
        let _ = writeln!(s, "update_embeddings = {}", self.update_embeddings);
        s
    }
}
