//! Run configuration: built-in defaults, overlaid by a flat TOML file, overlaid
//! by command-line flags. The resolved values are written next to each
//! command's outputs.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use steercal::{Error, Result};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

fn to_table(value: &impl Serialize, what: &str) -> Result<toml::Table> {
    toml::Table::try_from(value).map_err(|e| Error::invalid(format!("cannot represent {what} as TOML: {e}")))
}

/// Merges defaults, the optional config file and flag overrides into `C`.
///
/// Keys in the file that `command` does not use are reported on stderr and
/// skipped, so one file can serve a whole workflow.
pub fn resolve<C, A>(command: &str, file: Option<&Path>, flags: &A) -> Result<C>
where
    C: Default + Serialize + DeserializeOwned,
    A: Serialize,
{
    let mut table = to_table(&C::default(), "defaults")?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let from_file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::format(path, e.to_string()))?;
        let mut unused = Vec::new();
        let probe: std::result::Result<C, _> =
            serde_ignored::deserialize(toml::Value::Table(from_file.clone()), |p| unused.push(p.to_string()));
        for key in &unused {
            eprintln!("note: config key `{key}` is not used by `{command}`");
        }
        if let Err(e) = probe {
            return Err(Error::invalid(format!("{}: {e}", path.display())));
        }
        for (k, v) in from_file {
            if !unused.contains(&k) {
                table.insert(k, v);
            }
        }
    }
    table.extend(to_table(flags, "flags")?);
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::invalid(e.to_string()))
}

pub fn write_resolved(dir: &Path, config: &impl Serialize) -> Result<()> {
    let path = dir.join(RESOLVED_CONFIG);
    let text = toml::to_string(config).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
