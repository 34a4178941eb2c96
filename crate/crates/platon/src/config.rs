//! TOML experiment files and dotted `key=value` overrides.
//!
//! ```toml
//! lr = 0.1
//! batch_size = 32
//!
//! [schedule]
//! r_final = 0.1
//! t_initial_warmup = 100
//! t_final_warmup = 300
//! total_steps = 1000
//! ```

use std::path::Path;

use platon_core::experiment::ExperimentConfig;
use toml::{Table, Value};

use crate::error::{Error, Result};

/// A validated configuration plus the override strings that produced it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub overrides: Vec<String>,
}

pub fn load(path: &Path, overrides: &[String]) -> Result<LoadedConfig> {
    if !path.is_file() {
        return Err(Error::Usage(format!("config file {} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    parse(table, overrides)
}

pub fn parse(mut table: Table, overrides: &[String]) -> Result<LoadedConfig> {
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: ExperimentConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))?;
    config.validate()?;
    Ok(LoadedConfig {
        config,
        overrides: overrides.to_vec(),
    })
}

/// Sets `a.b.c = value`, creating intermediate tables. The value is read as
/// a TOML literal and falls back to a bare string, so `score.variant=ratio`
/// needs no quotes.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{spec}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("override `{spec}` has an empty key segment")));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut node = table;
    for part in parents {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Usage(format!("override `{spec}`: `{part}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
