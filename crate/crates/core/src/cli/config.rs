//! Flat `key = value` run configuration. Precedence: defaults, then the
//! config file, then command-line flags.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::SyntheticSpec;
use crate::eval::DEFAULT_CUTOFFS;
use crate::training::TrainConfig;

/// Which cascades `eval` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSet {
    Train,
    Valid,
    Test,
    All,
}

impl FromStr for EvalSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Self::Train),
            "valid" => Ok(Self::Valid),
            "test" => Ok(Self::Test),
            "all" => Ok(Self::All),
            _ => Err(format!("expected train, valid, test or all, got `{s}`")),
        }
    }
}

impl EvalSet {
    fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Valid => "valid",
            Self::Test => "test",
            Self::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub split_seed: u64,
    pub train: TrainConfig,
    pub n_list: Vec<usize>,
    pub eval_set: EvalSet,
    pub k_list: Vec<usize>,
    pub d_list: Vec<usize>,
    pub synth: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: PathBuf::from("out"),
            checkpoint: None,
            split_seed: 0,
            train: TrainConfig::default(),
            n_list: DEFAULT_CUTOFFS.to_vec(),
            eval_set: EvalSet::Test,
            k_list: vec![1, 2, 4],
            d_list: vec![16, 32, 64],
            synth: SyntheticSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid value `{value}` for `{key}`: {e}"))
}

pub fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, String> {
    let list = value
        .split(',')
        .map(|s| parse::<usize>(key, s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return Err(format!("`{key}` must not be empty"));
    }
    Ok(list)
}

pub fn parse_switch(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(format!("invalid value `{value}` for `{key}`: expected on or off")),
    }
}

fn switch(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn join(list: &[usize]) -> String {
    list.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key. Unknown keys are errors so typos do not pass silently.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "seed" => t.seed = parse(key, value)?,
            "split_seed" => self.split_seed = parse(key, value)?,
            "k" => t.factors = parse(key, value)?,
            "d" => t.dim = parse(key, value)?,
            "lr" => t.lr_init = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.max_epochs = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "lr_decay" => t.lr_decay_factor = parse(key, value)?,
            "lr_patience" => t.lr_patience = parse(key, value)?,
            "tau" => t.tau = parse(key, value)?,
            "gumbel" => t.gumbel_enabled = parse_switch(key, value)?,
            "dropout" => t.dropout_rate = parse(key, value)?,
            "max_len" => t.max_len = parse(key, value)?,
            "grad_clip" => t.grad_clip = parse(key, value)?,
            "n_list" => self.n_list = parse_list(key, value)?,
            "eval_set" => self.eval_set = parse(key, value)?,
            "k_list" => self.k_list = parse_list(key, value)?,
            "d_list" => self.d_list = parse_list(key, value)?,
            "communities" => s.communities = parse(key, value)?,
            "nodes_per_community" => s.nodes_per_community = parse(key, value)?,
            "cross_prob" => s.cross_community_prob = parse(key, value)?,
            "cascades" => s.cascades = parse(key, value)?,
            "min_length" => s.length_range.0 = parse(key, value)?,
            "max_length" => s.length_range.1 = parse(key, value)?,
            "revisits" => s.revisits = parse_switch(key, value)?,
            _ => return Err(format!("unknown config key `{key}`")),
        }
        Ok(())
    }

    /// Applies a config file. `#` starts a comment line.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// Every key, in a form `apply_file` reads back to an equal config.
    pub fn to_file_string(&self) -> String {
        let t = &self.train;
        let s = &self.synth;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(p) = &self.data {
            put("data", p.display().to_string());
        }
        put("out", self.out.display().to_string());
        if let Some(p) = &self.checkpoint {
            put("checkpoint", p.display().to_string());
        }
        put("seed", t.seed.to_string());
        put("split_seed", self.split_seed.to_string());
        put("k", t.factors.to_string());
        put("d", t.dim.to_string());
        put("lr", t.lr_init.to_string());
        put("batch_size", t.batch_size.to_string());
        put("epochs", t.max_epochs.to_string());
        put("patience", t.patience.to_string());
        put("lr_decay", t.lr_decay_factor.to_string());
        put("lr_patience", t.lr_patience.to_string());
        put("tau", t.tau.to_string());
        put("gumbel", switch(t.gumbel_enabled).into());
        put("dropout", t.dropout_rate.to_string());
        put("max_len", t.max_len.to_string());
        put("grad_clip", t.grad_clip.to_string());
        put("n_list", join(&self.n_list));
        put("eval_set", self.eval_set.as_str().into());
        put("k_list", join(&self.k_list));
        put("d_list", join(&self.d_list));
        put("communities", s.communities.to_string());
        put("nodes_per_community", s.nodes_per_community.to_string());
        put("cross_prob", s.cross_community_prob.to_string());
        put("cascades", s.cascades.to_string());
        put("min_length", s.length_range.0.to_string());
        put("max_length", s.length_range.1.to_string());
        put("revisits", switch(s.revisits).into());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DEFAULT_MAX_LEN;

    #[test]
    fn file_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("# comment\nk = 2\n\nlr=0.01\ngumbel = off\nn_list = 5, 20\ndata = a b.txt\n")
            .unwrap();
        assert_eq!(cfg.train.factors, 2);
        assert_eq!(cfg.train.lr_init, 0.01);
        assert!(!cfg.train.gumbel_enabled);
        assert_eq!(cfg.n_list, vec![5, 20]);
        assert_eq!(cfg.data, Some(PathBuf::from("a b.txt")));
        let mut back = RunConfig::default();
        back.apply_file(&cfg.to_file_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_file("k = 2\nbogus = 1").unwrap_err().contains("line 2"));
        assert!(cfg.apply_file("k two").unwrap_err().contains("line 1"));
        assert!(cfg.apply_file("k = -1").unwrap_err().contains("`k`"));
        assert!(cfg.apply_file("gumbel = maybe").is_err());
        assert!(cfg.apply_file("n_list = ").is_err());
    }

    #[test]
    fn defaults_match_library() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train.max_len, DEFAULT_MAX_LEN);
        assert_eq!(cfg.n_list, vec![10, 50, 100]);
    }
}
