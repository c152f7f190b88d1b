//! Run configuration: defaults, then a `key = value` file, then flags.
//!
//! Keys accept `-` or `_` as separators. `#` starts a comment. The resolved
//! configuration is written back in the same format, so an echo can be fed
//! back in with `--config`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use dqlids::agent::HyperParams;
use dqlids::data::{EncodingMode, UnknownCategoryPolicy};
use dqlids::nn::OptimizerKind;

pub const CONFIG_ECHO: &str = "config.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
    /// Bundled taxonomy when absent.
    pub taxonomy: Option<PathBuf>,
    pub out: PathBuf,
    pub hp: HyperParams,
    pub encoding: EncodingMode,
    pub unknown_category: UnknownCategoryPolicy,
    /// Seeded shuffle of the training rows before training.
    pub shuffle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train_file: None,
            test_file: None,
            taxonomy: None,
            out: PathBuf::from("out"),
            hp: HyperParams::default(),
            encoding: EncodingMode::default(),
            unknown_category: UnknownCategoryPolicy::default(),
            shuffle: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("invalid value {value:?} for {key}: expected true or false"),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Defaults, overlaid by `file` (if any), overlaid by `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_text(&text)
                .with_context(|| format!("in config {}", path.display()))?;
        }
        for (key, value) in overrides {
            cfg.set(key, value).context("in command-line flags")?;
        }
        cfg.hp.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", idx + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", idx + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let hp = &mut self.hp;
        match key.replace('-', "_").as_str() {
            "train_file" => self.train_file = optional_path(value),
            "test_file" => self.test_file = optional_path(value),
            "taxonomy" => self.taxonomy = optional_path(value),
            "out" => self.out = PathBuf::from(value),
            "episodes" => hp.num_episodes = parse(key, value)?,
            "iterations" => hp.num_iterations = parse(key, value)?,
            "batch_size" => hp.batch_size = parse(key, value)?,
            "gamma" => hp.gamma = parse(key, value)?,
            "epsilon" => hp.epsilon_initial = parse(key, value)?,
            "epsilon_decay" => hp.epsilon_decay = parse(key, value)?,
            "epsilon_floor" => hp.epsilon_floor = parse(key, value)?,
            "lr" => hp.learning_rate = parse(key, value)?,
            "seed" => hp.seed = parse(key, value)?,
            "optimizer" => hp.optimizer = parse::<OptimizerKind>(key, value)?,
            "reward_correct" => hp.rewards.correct = parse(key, value)?,
            "reward_incorrect" => hp.rewards.incorrect = parse(key, value)?,
            "encoding" => self.encoding = parse(key, value)?,
            "unknown_category" => self.unknown_category = parse(key, value)?,
            "shuffle" => self.shuffle = parse_bool(key, value)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Every key, in a fixed order; parses back to an equal config.
    pub fn to_config_text(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let hp = &self.hp;
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        line("train_file", path(&self.train_file));
        line("test_file", path(&self.test_file));
        line("taxonomy", path(&self.taxonomy));
        line("out", self.out.display().to_string());
        line("episodes", hp.num_episodes.to_string());
        line("iterations", hp.num_iterations.to_string());
        line("batch_size", hp.batch_size.to_string());
        line("gamma", hp.gamma.to_string());
        line("epsilon", hp.epsilon_initial.to_string());
        line("epsilon_decay", hp.epsilon_decay.to_string());
        line("epsilon_floor", hp.epsilon_floor.to_string());
        line("lr", hp.learning_rate.to_string());
        line("seed", hp.seed.to_string());
        line("optimizer", hp.optimizer.to_string());
        line("reward_correct", hp.rewards.correct.to_string());
        line("reward_incorrect", hp.rewards.incorrect.to_string());
        line("encoding", self.encoding.to_string());
        line("unknown_category", self.unknown_category.to_string());
        line("shuffle", self.shuffle.to_string());
        s
    }

    /// Writes the resolved config into the output directory.
    pub fn write_echo(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(CONFIG_ECHO);
        fs::write(&path, self.to_config_text())
            .with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(p: &[(&str, &str)]) -> Vec<(String, String)> {
        p.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_match_training_defaults() {
        let cfg = RunConfig::resolve(None, &[]).unwrap();
        assert_eq!(cfg.hp, HyperParams::default());
        assert_eq!(cfg.encoding, EncodingMode::Ordinal);
        assert!(!cfg.shuffle);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("dqlids-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let file = dir.join("run.conf");
        fs::write(
            &file,
            "# comment\ngamma = 0.9\nepisodes=7 # trailing\nbatch-size = 20\n",
        )
        .unwrap();
        let cfg = RunConfig::resolve(Some(&file), &pairs(&[("gamma", "0.01")])).unwrap();
        assert_eq!(cfg.hp.gamma, 0.01);
        assert_eq!(cfg.hp.num_episodes, 7);
        assert_eq!(cfg.hp.batch_size, 20);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn echo_parses_back_to_same_config() {
        let mut cfg = RunConfig {
            train_file: Some("a/KDDTrain+.txt".into()),
            encoding: EncodingMode::OneHot,
            unknown_category: UnknownCategoryPolicy::Strict,
            shuffle: true,
            ..Default::default()
        };
        cfg.hp.gamma = 0.123456789;
        cfg.hp.learning_rate = 3e-5;
        cfg.hp.rewards.incorrect = 0.0;
        cfg.hp.optimizer = OptimizerKind::Sgd;
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_config_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_input_is_reported_with_context() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("episodes = 3\nbogus = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
        assert!(cfg.set("gamma", "high").is_err());
        assert!(cfg.set("shuffle", "maybe").is_err());
        assert!(RunConfig::resolve(None, &pairs(&[("gamma", "1.5")])).is_err());
    }
}
