//! Flat `key = value` experiment config files.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors. Values
//! from a file override defaults; command-line flags override the file.

use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;

use crate::dataset::SyntheticConfig;
use crate::error::{Error, Result};
use crate::eval::ExperimentConfig;

/// Every key accepted by [`apply`], in documentation order.
pub const KEYS: &[&str] = &[
    "epochs",
    "learning_rate",
    "batch_size",
    "optimizer",
    "hidden",
    "activation",
    "cosine_weight",
    "mse_weight",
    "examples_per_triple",
    "draws_per_example",
    "oov_policy",
    "lambda",
    "fixed_lambda",
    "n",
    "k",
    "metric",
    "temperature",
    "objective",
    "lambda_grid",
    "train_fraction",
    "validation_fraction",
    "test_fraction",
    "partition_seed",
    "validation_size",
    "strict_validation",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::input(format!("config key `{key}`: cannot parse `{value}`")))
}

fn variant<T: DeserializeOwned>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::input(format!("config key `{key}`: unknown value `{value}`")))
}

/// Applies one `key`/`value` pair to `cfg`.
pub fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let t = &mut cfg.train;
    let p = &mut cfg.pragmatic;
    match key {
        "epochs" => t.epochs = num(key, value)?,
        "learning_rate" => t.learning_rate = num(key, value)?,
        "batch_size" => {
            t.batch_size = if value == "full" { usize::MAX } else { num(key, value)? }
        }
        "optimizer" => {
            t.optimizer = match value {
                "adam" => crate::net::Optimizer::default(),
                "sgd" => crate::net::Optimizer::Sgd,
                _ => return Err(Error::input(format!("config key `optimizer`: unknown value `{value}`"))),
            }
        }
        "hidden" => t.hidden = num(key, value)?,
        "activation" => t.activation = variant(key, value)?,
        "cosine_weight" => t.loss_weights.cosine = num(key, value)?,
        "mse_weight" => t.loss_weights.mse = num(key, value)?,
        "examples_per_triple" => t.examples_per_triple = num(key, value)?,
        "draws_per_example" => t.draws_per_example = num(key, value)?,
        "oov_policy" => t.oov_policy = variant(key, value)?,
        "lambda" => p.lambda = num(key, value)?,
        "fixed_lambda" => {
            cfg.fixed_lambda = if value == "none" { None } else { Some(num(key, value)?) }
        }
        "n" => p.n = num(key, value)?,
        "k" => p.k = num(key, value)?,
        "metric" => p.metric = num(key, value)?,
        "temperature" => p.temperature = num(key, value)?,
        "objective" => cfg.objective = variant(key, value)?,
        "lambda_grid" => {
            cfg.lambda_grid = value
                .split(',')
                .map(|v| num(key, v.trim()))
                .collect::<Result<_>>()?
        }
        "train_fraction" => cfg.fractions.train = num(key, value)?,
        "validation_fraction" => cfg.fractions.validation = num(key, value)?,
        "test_fraction" => cfg.fractions.test = num(key, value)?,
        "partition_seed" => cfg.partition_seed = num(key, value)?,
        "validation_size" => cfg.validation_size = num(key, value)?,
        "strict_validation" => cfg.strict_validation = num(key, value)?,
        _ => return Err(Error::input(format!("unknown config key `{key}`"))),
    }
    Ok(())
}

/// Keys accepted by [`apply_synthetic`].
pub const SYNTHETIC_KEYS: &[&str] = &[
    "num_refs",
    "num_mods",
    "vectors_per_label",
    "noise_sd",
    "label_sd",
    "embed_dim",
    "held_out_refs",
    "held_out_mods",
    "held_out_pairs",
    "seed",
];

pub fn apply_synthetic(cfg: &mut SyntheticConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "num_refs" => cfg.num_refs = num(key, value)?,
        "num_mods" => cfg.num_mods = num(key, value)?,
        "vectors_per_label" => cfg.vectors_per_label = num(key, value)?,
        "noise_sd" => cfg.noise_sd = num(key, value)?,
        "label_sd" => cfg.label_sd = num(key, value)?,
        "embed_dim" => cfg.embed_dim = num(key, value)?,
        "held_out_refs" => cfg.held_out_refs = num(key, value)?,
        "held_out_mods" => cfg.held_out_mods = num(key, value)?,
        "held_out_pairs" => cfg.held_out_pairs = num(key, value)?,
        "seed" => cfg.seed = num(key, value)?,
        _ => return Err(Error::input(format!("unknown config key `{key}`"))),
    }
    Ok(())
}

fn parse_lines<T>(
    text: &str,
    origin: &Path,
    mut cfg: T,
    apply: impl Fn(&mut T, &str, &str) -> Result<()>,
) -> Result<T> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(origin, i + 1, "expected `key = value`"))?;
        apply(&mut cfg, key.trim(), value.trim()).map_err(|e| match e {
            Error::Input(message) => Error::format(origin, i + 1, message),
            other => other,
        })?;
    }
    Ok(cfg)
}

/// Parses experiment config text on top of `base`.
pub fn parse_config(text: &str, origin: &Path, base: ExperimentConfig) -> Result<ExperimentConfig> {
    parse_lines(text, origin, base, apply)
}

pub fn parse_synthetic_config(text: &str, origin: &Path) -> Result<SyntheticConfig> {
    parse_lines(text, origin, SyntheticConfig::default(), apply_synthetic)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&read(path)?, path, ExperimentConfig::default())
}

pub fn load_synthetic_config(path: &Path) -> Result<SyntheticConfig> {
    parse_synthetic_config(&read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, Optimizer};
    use crate::speakers::DistanceMetric;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, Path::new("test.cfg"), ExperimentConfig::default())
    }

    #[test]
    fn overrides_defaults() {
        let cfg = parse(
            "# comment\nepochs = 20\n\nactivation = relu\nmetric = cosine_rgb  # trailing\n\
             lambda_grid = 0, 0.5, 1\nfixed_lambda = 0.25\noptimizer = sgd\nbatch_size = full\n",
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 20);
        assert_eq!(cfg.train.activation, Activation::Relu);
        assert_eq!(cfg.pragmatic.metric, DistanceMetric::CosineRgb);
        assert_eq!(cfg.lambda_grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.fixed_lambda, Some(0.25));
        assert_eq!(cfg.train.optimizer, Optimizer::Sgd);
        assert_eq!(cfg.train.batch_size, usize::MAX);
        assert_eq!(cfg.train.learning_rate, ExperimentConfig::default().train.learning_rate);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let samples = [
            "1", "0.01", "8", "adam", "4", "identity", "1", "1", "2", "3", "strict", "0.5", "none",
            "5", "7", "delta_e_2000", "2", "delta_e", "0,1", "0.5", "0.25", "0.25", "3", "9", "true",
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut cfg = ExperimentConfig::default();
        for (key, value) in KEYS.iter().zip(samples) {
            apply(&mut cfg, key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn synthetic_keys() {
        let cfg = parse_synthetic_config(
            "num_refs = 5\nnoise_sd = 1.5\nheld_out_pairs = 1\nseed = 9\n",
            Path::new("synth.cfg"),
        )
        .unwrap();
        assert_eq!(cfg.num_refs, 5);
        assert_eq!(cfg.noise_sd, 1.5);
        assert_eq!(cfg.held_out_pairs, 1);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.num_mods, SyntheticConfig::default().num_mods);
        let mut base = SyntheticConfig::default();
        for key in SYNTHETIC_KEYS {
            apply_synthetic(&mut base, key, "1").unwrap();
        }
        assert!(parse_synthetic_config("epochs = 3\n", Path::new("s")).is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("epochs = 2\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
        assert!(parse("epochs 2\n").is_err());
        assert!(parse("epochs = many\n").is_err());
        assert!(parse("activation = tanh\n").is_err());
    }
}
