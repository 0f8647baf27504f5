use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use talisman::Error;

use crate::error::CliResult;

/// Reads a JSON config, or the defaults when no path is given. Type and
/// unknown-key errors count as invalid configuration; syntax errors as
/// malformed input.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => {
            Error::InvalidConfig(format!("{}: {e}", path.display())).into()
        }
        _ => e.into(),
    })
}

/// `sha256:` followed by the hex digest of the config's JSON form.
pub fn config_hash<T: Serialize>(cfg: &T) -> CliResult<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}

/// Names the file in I/O errors.
pub fn at_path(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    }
}

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    Ok(std::fs::read(path).map_err(|e| at_path(path)(Error::Io(e)))?)
}

pub fn load_bags(path: &Path) -> CliResult<Vec<talisman::similarity::EmbeddingBag>> {
    Ok(talisman::io::load_bags(path).map_err(at_path(path))?)
}

pub fn load_kernel(path: &Path) -> CliResult<talisman::similarity::SimilarityKernel> {
    Ok(talisman::io::load_kernel(path).map_err(at_path(path))?)
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = read(path)?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}

/// Parses a flag value through the type's serde names.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Writes to `path`, or to stdout when absent.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn to_json_line<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn required<'a, T>(value: &'a Option<T>, what: &str) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("missing required setting `{what}`")).into())
}
