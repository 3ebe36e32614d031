use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cells::OptimizerKind;
use crate::error::{Error, Result};
use crate::event_world::{CiMode, GateMode, OrderMode};
use crate::models::{ContextInput, ContextSource, FunctionKind, HierarchyConfig};

/// When weights are updated during an epoch.
///
/// `Fixed(n)` updates after every `n` steps; `Random { lo, hi }` draws each
/// window length uniformly from `[lo, hi]`, redrawing after every update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdatePolicy {
    Fixed(usize),
    Random { lo: usize, hi: usize },
}

impl UpdatePolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UpdatePolicy::Fixed(n) if n >= 1 => Ok(()),
            UpdatePolicy::Random { lo, hi } if lo >= 1 && lo <= hi => Ok(()),
            _ => Err(Error::Config(format!("invalid update policy `{self}`"))),
        }
    }

    pub fn slug(&self) -> String {
        match *self {
            UpdatePolicy::Fixed(n) => format!("fixed{n}"),
            UpdatePolicy::Random { lo, hi } => format!("random{lo}-{hi}"),
        }
    }
}

impl fmt::Display for UpdatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            UpdatePolicy::Fixed(n) => write!(f, "fixed({n})"),
            UpdatePolicy::Random { lo, hi } => write!(f, "random({lo},{hi})"),
        }
    }
}

impl FromStr for UpdatePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse update policy `{s}` (expected fixed(n) or random(lo,hi))"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let args = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let nums: Vec<usize> = args
            .split(',')
            .map(|a| a.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let policy = match (&s[..open], nums.as_slice()) {
            ("fixed", [n]) => UpdatePolicy::Fixed(*n),
            ("random", [lo, hi]) => UpdatePolicy::Random { lo: *lo, hi: *hi },
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl Serialize for UpdatePolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for UpdatePolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Training and evaluation settings shared by every condition of a suite.
///
/// Defaults follow the published protocol where one exists: 2000 epochs of
/// 2000 steps, updates every 20 steps, learning rate 1e-4, ten seeds and
/// 150 test sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub update: UpdatePolicy,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seeds: Vec<u64>,
    pub test_iterations: usize,
    pub test_steps: usize,
    /// Number of trailing epochs averaged into the final training error.
    pub final_epochs: usize,
    pub gradual_width: usize,
    pub no_repeat: bool,
    pub lstm_hidden: usize,
    pub mlp_hidden: Vec<usize>,
    pub compression_dim: usize,
    pub function_hidden: usize,
    pub pre_hidden: usize,
    pub pre_out: usize,
    pub mlpf_hidden: Vec<usize>,
    pub context_input: ContextInput,
    /// Test sequences per seed written to the trace CSV.
    pub trace_sequences: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            steps_per_epoch: 2000,
            update: UpdatePolicy::Fixed(20),
            lr: 1e-4,
            optimizer: OptimizerKind::Adam,
            seeds: (1..=10).collect(),
            test_iterations: 150,
            test_steps: 200,
            final_epochs: 10,
            gradual_width: 3,
            no_repeat: false,
            lstm_hidden: 10,
            mlp_hidden: vec![50, 50],
            compression_dim: 8,
            function_hidden: 10,
            pre_hidden: 20,
            pre_out: 10,
            mlpf_hidden: vec![50, 50],
            context_input: ContextInput::Weighted,
            trace_sequences: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("steps_per_epoch", self.steps_per_epoch),
            ("test_steps", self.test_steps),
            ("final_epochs", self.final_epochs),
            ("lstm_hidden", self.lstm_hidden),
            ("compression_dim", self.compression_dim),
            ("function_hidden", self.function_hidden),
            ("pre_hidden", self.pre_hidden),
            ("pre_out", self.pre_out),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be a positive number, got {}", self.lr)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.gradual_width.is_multiple_of(2) {
            return Err(Error::Config("gradual_width must be odd".into()));
        }
        self.update.validate()
    }

    /// Parses a flat TOML key/value file on top of the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hierarchy(&self, function_kind: FunctionKind, context_source: ContextSource) -> HierarchyConfig {
        HierarchyConfig {
            compression_dim: self.compression_dim,
            function_hidden: self.function_hidden,
            pre_hidden: self.pre_hidden,
            pre_out: self.pre_out,
            function_kind,
            mlpf_hidden: self.mlpf_hidden.clone(),
            context_source,
            context_input: self.context_input,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lstm,
    Mlp,
    Hierarchy,
    HierarchyMlpf,
}

/// One experimental cell of a results table.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: String,
    pub model: ModelKind,
    pub ci_mode: CiMode,
    pub gate_mode: GateMode,
    pub order: OrderMode,
    pub context_source: ContextSource,
    /// Overrides the config's update policy.
    pub update: Option<UpdatePolicy>,
}

impl Condition {
    pub fn new(name: impl Into<String>, model: ModelKind) -> Self {
        Condition {
            name: name.into(),
            model,
            ci_mode: CiMode::None,
            gate_mode: GateMode::AlwaysClosed,
            order: OrderMode::Fixed,
            context_source: ContextSource::Ci,
            update: None,
        }
    }

    pub fn ci(mut self, mode: CiMode) -> Self {
        self.ci_mode = mode;
        self
    }

    pub fn gate(mut self, mode: GateMode) -> Self {
        self.gate_mode = mode;
        self
    }

    pub fn order(mut self, order: OrderMode) -> Self {
        self.order = order;
        self
    }

    pub fn context_source(mut self, src: ContextSource) -> Self {
        self.context_source = src;
        self
    }

    pub fn update(mut self, policy: UpdatePolicy) -> Self {
        self.update = Some(policy);
        self
    }

    /// File-name-safe version of the condition name.
    pub fn slug(&self) -> String {
        self.name.replace('/', "_")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_policy_parsing() {
        assert_eq!("fixed(20)".parse::<UpdatePolicy>().unwrap(), UpdatePolicy::Fixed(20));
        assert_eq!(
            "random(10, 30)".parse::<UpdatePolicy>().unwrap(),
            UpdatePolicy::Random { lo: 10, hi: 30 }
        );
        for bad in ["fixed(0)", "random(5,2)", "fixed", "sometimes(3)", "fixed(a)"] {
            assert!(bad.parse::<UpdatePolicy>().is_err(), "{bad}");
        }
        assert_eq!(UpdatePolicy::Random { lo: 20, hi: 50 }.to_string(), "random(20,50)");
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = TrainConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(TrainConfig::from_toml_str(&text).unwrap(), cfg);
        assert!(text.contains("update = \"fixed(20)\""));
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = TrainConfig::from_toml_str("epochs = 5\nseeds = [3, 4]\n").unwrap();
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.steps_per_epoch, 2000);
    }

    #[test]
    fn bad_config_reports_line() {
        let err = TrainConfig::from_toml_str("epochs = 5\nlr = \"fast\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = TrainConfig::from_toml_str("epochs = 5\n\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(TrainConfig::from_toml_str("epochs = 0").is_err());
    }
}
