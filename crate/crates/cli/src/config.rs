//! Experiment configuration: a TOML document with flat dotted keys, layered
//! under command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

use cuqb_core::{CuqbConfig, Solver};

pub const OUT_DIR_ENV: &str = "CUQB_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problems: Vec<String>,
    pub solvers: Vec<Solver>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub base: CuqbConfig,
}

/// Parses `"3"`, `"0..9"` (inclusive) or `"1,4,7"`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range start in '{spec}'"))?;
        let b: u64 = b.trim().trim_start_matches('=').parse().with_context(|| format!("bad seed range end in '{spec}'"))?;
        if b < a {
            bail!("empty seed range '{spec}'");
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed '{s}'"))).collect()
}

/// Keys whose values are whole tables rather than further dotted keys.
const TABLE_VALUED: [&str; 2] = ["quantile.schedule", "infeasibility_schedule"];

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, toml::Value)>) {
    match value {
        toml::Value::Table(t) if !TABLE_VALUED.contains(&prefix) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

/// Sets a dotted path inside the JSON form of the solver configuration.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        node = node.get_mut(*part).with_context(|| format!("unknown configuration key '{key}'"))?;
    }
    let last = parts[parts.len() - 1];
    let obj = node.as_object_mut().with_context(|| format!("unknown configuration key '{key}'"))?;
    if !obj.contains_key(last) {
        bail!("unknown configuration key '{key}'");
    }
    obj.insert(last.to_string(), value);
    Ok(())
}

fn toml_to_json(v: toml::Value) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

impl ExperimentConfig {
    pub fn empty() -> Self {
        let output_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        Self { problems: Vec::new(), solvers: Vec::new(), seeds: Vec::new(), output_dir, base: CuqbConfig::default() }
    }

    /// Reads `problems`, `solvers`, `seeds`, `output_dir` and any solver
    /// configuration key such as `quantile.mc_samples` or `rho`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: toml::Value = text.parse().context("invalid TOML")?;
        let mut flat = Vec::new();
        flatten("", &doc, &mut flat);
        let mut cfg = Self::empty();
        let mut base = serde_json::to_value(&cfg.base)?;
        for (key, value) in flat {
            match key.as_str() {
                "problems" => cfg.problems = value.try_into().context("problems must be a list of names")?,
                "solvers" => {
                    let names: Vec<String> = value.try_into().context("solvers must be a list of names")?;
                    cfg.solvers = names.iter().map(|s| s.parse()).collect::<cuqb_core::Result<_>>()?;
                }
                "seeds" => {
                    cfg.seeds = match value {
                        toml::Value::String(s) => parse_seeds(&s)?,
                        toml::Value::Integer(i) => vec![u64::try_from(i).context("seeds must be non-negative")?],
                        other => other.try_into().context("seeds must be a list, an integer or a range string")?,
                    }
                }
                "output_dir" => cfg.output_dir = PathBuf::from(value.as_str().context("output_dir must be a string")?),
                _ => set_path(&mut base, &key, toml_to_json(value)?)?,
            }
        }
        cfg.base = serde_json::from_value(base).context("invalid solver configuration")?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() {
            bail!("no problems given");
        }
        if self.solvers.is_empty() {
            bail!("no solvers given");
        }
        if self.seeds.is_empty() {
            bail!("no seeds given");
        }
        if !(self.base.noise_std >= 0.0) {
            bail!("noise standard deviation must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cuqb_core::quantile::Schedule;

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seeds("0..9").unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("1, 4,7").unwrap(), vec![1, 4, 7]);
        assert_eq!(parse_seeds("2..=3").unwrap(), vec![2, 3]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn dotted_and_nested_keys_agree() {
        let flat = r#"
            problems = ["booth"]
            solvers = ["cuqb", "eic-cf"]
            seeds = "0..2"
            "quantile.mc_samples" = 64
            quantile.alpha = 0.9
            rho = 1000.0
            noise_std = 0.05
        "#;
        let nested = r#"
            problems = ["booth"]
            solvers = ["cuqb", "eic-cf"]
            seeds = [0, 1, 2]
            rho = 1000.0
            noise_std = 0.05
            [quantile]
            mc_samples = 64
            alpha = 0.9
        "#;
        let a = ExperimentConfig::from_toml(flat).unwrap();
        let b = ExperimentConfig::from_toml(nested).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.base.quantile.mc_samples, 64);
        assert_eq!(a.base.quantile.alpha, 0.9);
        assert_eq!(a.base.rho, 1000.0);
        assert_eq!(a.solvers, vec![Solver::Cuqb, Solver::EicCf]);
        assert_eq!(a.seeds, vec![0, 1, 2]);
    }

    #[test]
    fn schedule_and_bad_keys() {
        let c = ExperimentConfig::from_toml("quantile.schedule = { mode = \"theoretical\", delta = 0.05, cardinality = 10000.0 }").unwrap();
        assert_eq!(c.base.quantile.schedule, Schedule::Theoretical { delta: 0.05, cardinality: 1e4 });
        let err = ExperimentConfig::from_toml("quantile.bogus = 1").unwrap_err();
        assert!(format!("{err:#}").contains("quantile.bogus"));
        assert!(ExperimentConfig::from_toml("solvers = [\"ucb\"]").is_err());
        assert!(ExperimentConfig::from_toml("quantile.mc_samples = \"many\"").is_err());
    }
}
