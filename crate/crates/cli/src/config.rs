//! Scenario files: TOML or JSON, with `key=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use splitmap_core::direction::FrameParams;
use splitmap_core::splitting::SplittingConfig;
use splitmap_core::ManifoldSpec;
use toml::{Table, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master seed. Required; there is no implicit randomness.
    pub seed: u64,
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub construction: Construction,
    #[serde(default)]
    pub sampling: SplittingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Frame construction: outer scale, base point and the frame parameters.
///
/// Unknown keys are rejected by [`check_keys`], since serde cannot do it
/// through `flatten`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    #[serde(default = "one")]
    pub radius: f64,
    /// Base point; the manifold center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    /// Pairs per level for the stratified defect table.
    #[serde(default = "stratified_pairs")]
    pub stratified_pairs: usize,
    #[serde(flatten)]
    pub frame: FrameParams,
}

fn one() -> f64 {
    1.0
}

fn stratified_pairs() -> usize {
    300
}

impl Default for Construction {
    fn default() -> Self {
        Construction { radius: 1.0, origin: None, stratified_pairs: stratified_pairs(), frame: FrameParams::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, formats: vec![Format::Json, Format::Csv, Format::Svg] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

const MANIFOLD_KEYS: &[&str] =
    &["kind", "dim", "domain_radius", "alpha", "sphere_radius", "base", "samples", "connectivity_factor", "graph_domain"];

fn keys_of<T: Serialize>(v: &T) -> Vec<String> {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Known keys per section, top level first.
fn sections() -> Vec<(&'static str, Vec<String>)> {
    let mut construction = keys_of(&Construction::default());
    construction.push("origin".into());
    vec![
        ("", vec!["seed".into()]),
        ("manifold", MANIFOLD_KEYS.iter().map(|s| s.to_string()).collect()),
        ("construction", construction),
        ("sampling", keys_of(&SplittingConfig::default())),
        ("output", vec!["dir".into(), "formats".into()]),
    ]
}

fn check_keys(root: &Table) -> Result<()> {
    if let Some(Value::Table(t)) = root.get("construction") {
        let known = &sections()[2].1;
        for k in t.keys() {
            if !known.contains(k) {
                bail!("unknown field `{k}` in [construction]");
            }
        }
    }
    Ok(())
}

/// Reads a scenario file into a raw tree. `.json` is parsed as JSON,
/// anything else as TOML.
pub fn read_tree(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Resolves `key` to a full path. Dotted keys are taken literally; a bare
/// key must name exactly one field across the sections.
pub fn resolve_key(key: &str) -> Result<Vec<String>> {
    if key.is_empty() {
        bail!("empty override key");
    }
    if key.contains('.') {
        return Ok(key.split('.').map(str::to_string).collect());
    }
    let hits: Vec<_> = sections().into_iter().filter(|(_, ks)| ks.iter().any(|k| k == key)).map(|(s, _)| s).collect();
    match hits.as_slice() {
        [""] => Ok(vec![key.to_string()]),
        [s] => Ok(vec![s.to_string(), key.to_string()]),
        [] => bail!("unknown knob `{key}`"),
        _ => bail!("knob `{key}` is ambiguous ({}); use a dotted path", hits.join(", ")),
    }
}

/// Parses a value as a TOML literal, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set(root: &mut Table, key: &str, value: Value) -> Result<()> {
    let path = resolve_key(key)?;
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut t = root;
    for p in parents {
        let e = t.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        t = e.as_table_mut().ok_or_else(|| anyhow!("`{p}` in `{key}` is not a table"))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(root: &mut Table, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| anyhow!("override `{o}` is not key=value"))?;
        set(root, k.trim(), parse_value(v.trim()))?;
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_tree(root: Table) -> Result<Self> {
        check_keys(&root)?;
        let cfg: ScenarioConfig = Value::Table(root).try_into().context("invalid scenario")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut root = read_tree(path)?;
        apply_overrides(&mut root, overrides)?;
        Self::from_tree(root).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.manifold.dim;
        self.construction.frame.validate(n)?;
        self.sampling.validate()?;
        let c = &self.construction;
        if !(c.radius.is_finite() && c.radius > 0.0) {
            bail!("construction.radius must be positive");
        }
        if c.stratified_pairs == 0 {
            bail!("construction.stratified_pairs must be positive");
        }
        if let Some(o) = &c.origin {
            if o.len() != n || o.iter().any(|v| !v.is_finite()) {
                bail!("construction.origin must have {n} finite coordinates");
            }
        }
        Ok(())
    }

    /// Resolved configuration as TOML; parsing it back gives `self`.
    pub fn echo(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}
