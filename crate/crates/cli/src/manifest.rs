use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use toml::{Table, Value};

/// Writes `manifest.toml` at `path`: command line, seed, versions and the
/// resolved config, enough to rerun the command exactly.
pub fn write(path: &Path, command: &str, seed: u64, config_toml: Option<&str>) -> Result<()> {
    let mut t = Table::new();
    t.insert("command".into(), Value::String(command.into()));
    t.insert(
        "args".into(),
        Value::Array(std::env::args().map(Value::String).collect()),
    );
    // Seeds are u64; TOML integers are i64, so keep the exact value as text.
    t.insert("seed".into(), Value::String(seed.to_string()));
    let mut versions = Table::new();
    versions.insert("expandgraph".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    versions.insert("target".into(), Value::String(std::env::consts::ARCH.into()));
    t.insert("versions".into(), Value::Table(versions));
    if let Some(cfg) = config_toml {
        let parsed: Table = cfg.parse().context("re-parsing the resolved config")?;
        t.insert("config".into(), Value::Table(parsed));
    }
    let text = toml::to_string(&t)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
