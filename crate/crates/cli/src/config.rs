//! System resolution: built-in presets or key-value description files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use amalgam_core::{Factor, FactorSystem};

/// The fully resolved run configuration embedded in every JSON report, so
/// a report alone suffices to reproduce its run.
#[derive(Debug, Serialize)]
pub struct ResolvedConfig {
    /// Where the system came from: `preset:NAME` or `file:PATH`.
    pub source: String,
    pub k_generators: Vec<String>,
    pub l_generators: Vec<String>,
    pub shared: Vec<String>,
    pub x: String,
    pub y: String,
    pub a: String,
    pub h: String,
    /// Command-specific parameters, alphabetical by key.
    pub params: BTreeMap<&'static str, serde_json::Value>,
}

impl ResolvedConfig {
    pub fn new(sys: &FactorSystem, source: String) -> ResolvedConfig {
        let names = |ids: &[u32]| -> Vec<String> {
            ids.iter().map(|&id| sys.symbol_name(id).to_string()).collect()
        };
        ResolvedConfig {
            source,
            k_generators: names(sys.alphabet(Factor::K)),
            l_generators: names(sys.alphabet(Factor::L)),
            shared: names(&sys.shared_symbols()),
            x: sys.x.display(sys),
            y: sys.y.display(sys),
            a: sys.a.display(sys),
            h: sys.h.display(sys),
            params: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &'static str, value: impl Into<serde_json::Value>) {
        self.params.insert(key, value.into());
    }
}

/// Resolve a preset name to a built-in system.
pub fn preset(name: &str) -> Result<FactorSystem> {
    match name {
        "amalgam-h1" => Ok(amalgam_core::preset_h1()),
        "amalgam-h0" => Ok(amalgam_core::preset_h0()),
        other => Err(anyhow!(
            "unknown preset `{other}` (available: amalgam-h1, amalgam-h0)"
        )),
    }
}

/// Load a system from a flat key-value description:
///
/// ```text
/// # comment
/// K.generators = s x y h
/// L.generators = s a
/// shared = s
/// x = x
/// y = y
/// a = a
/// h = h
/// ```
///
/// Alphabet values are whitespace-separated generator names; the four
/// distinguished elements are words in the standard grammar.
pub fn load_file(path: &Path) -> Result<FactorSystem> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config `{}`", path.display()))?;
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("config line {}: expected `key = value`", i + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    let need = |key: &str| -> Result<&str> {
        map.get(key)
            .map(String::as_str)
            .with_context(|| format!("config is missing the `{key}` field"))
    };
    let k_names: Vec<&str> = need("K.generators")?.split_whitespace().collect();
    let l_names: Vec<&str> = need("L.generators")?.split_whitespace().collect();
    let shared: Vec<&str> = map
        .get("shared")
        .map(|s| s.split_whitespace().collect())
        .unwrap_or_default();
    FactorSystem::from_words(
        &k_names,
        &l_names,
        &shared,
        need("x")?,
        need("y")?,
        need("a")?,
        need("h")?,
    )
    .map_err(|e| anyhow!("config field rejected: {e}"))
}
