//! Experiment configuration: a flat `dotted.key = value` text format with a
//! one-to-one JSON equivalent.
//!
//! ```text
//! # comments start with '#'
//! mass = 0
//! epsilon = 2
//! cutoff.kind = exponential
//! kappa_list = [0.5, 1, 1.5]
//! lattice.box_side = 34
//! ```
//!
//! Values are read as JSON when they parse as JSON and as bare strings
//! otherwise.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::area_law_harness::{RegionGenerator, DEFAULT_TOLERANCE};
use crate::dirac_symbols::{CutoffSpec, DiracParams};
use crate::error::{Error, Result};
use crate::lattice_model::{LatticeOptions, TorusLattice};
use crate::widom_coefficient::ProfileSpec;
use crate::wiener_hopf::SectionSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to the massless case.
    #[serde(default)]
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "CutoffSpec::exponential")]
    pub cutoff: CutoffSpec,
    #[serde(default = "default_kappas")]
    pub kappa_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub wiener_hopf: WienerHopfConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_kappas() -> Vec<f64> {
    vec![1.0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub box_side: f64,
    pub points_per_dim: usize,
    #[serde(default)]
    pub allow_coarse: bool,
    #[serde(default)]
    pub allow_small_margin: bool,
    #[serde(default = "default_margin")]
    pub margin_factor: f64,
}

fn default_margin() -> f64 {
    LatticeOptions::default().margin_factor
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "L_values")]
    pub l_values: Vec<f64>,
}

/// Finite-section and profile-grid settings. `X` and `n` pin the section
/// length and point count; unset values are sized automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerHopfConfig {
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default)]
    pub s_grid: SGrid,
}

fn default_max_points() -> usize {
    SectionSpec::default().max_points
}

impl Default for WienerHopfConfig {
    fn default() -> Self {
        Self {
            x: None,
            n: None,
            max_points: default_max_points(),
            s_grid: SGrid::default(),
        }
    }
}

/// Transverse grid, in units of the cutoff scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SGrid {
    pub head_min: f64,
    pub head_max: f64,
    pub head_points: usize,
    pub tail_step: f64,
    pub tail_level: f64,
}

impl Default for SGrid {
    fn default() -> Self {
        let p = ProfileSpec::default();
        Self {
            head_min: p.head_min,
            head_max: p.head_max,
            head_points: p.head_points,
            tail_step: p.tail_step,
            tail_level: p.tail_level,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub area_law: f64,
    pub f0_identity: f64,
    pub gaussian_kernel: f64,
    pub gaussian_cross_norm: f64,
    pub nonnegativity: f64,
    pub rotation: f64,
    pub schatten_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            area_law: DEFAULT_TOLERANCE,
            f0_identity: 0.01,
            gaussian_kernel: 1e-8,
            gaussian_cross_norm: 1e-4,
            nonnegativity: 1e-9,
            rotation: 1e-10,
            schatten_slope: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub sigma: f64,
    /// Scale factors applied to the configured region.
    pub alphas: Vec<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            sigma: 0.9,
            alphas: vec![3.0, 4.0, 5.0, 6.0],
        }
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

impl ExperimentConfig {
    pub fn from_json_value(value: Value) -> Result<Self> {
        // the flattened cutoff tag cannot reject unknown keys on its own
        if let Some(cutoff) = value.get("cutoff").and_then(Value::as_object) {
            let unknown: Vec<&String> = cutoff.keys().filter(|k| !["kind", "rho", "scale"].contains(&k.as_str())).collect();
            if !unknown.is_empty() {
                return Err(Error::Config(format!("unknown cutoff keys {unknown:?}")));
            }
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_flat_str(text: &str) -> Result<Self> {
        Self::from_json_value(flat_to_json(text)?)
    }

    /// Reads a flat config, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            Self::from_json_value(v)
        } else {
            Self::from_flat_str(&text)
        }
    }

    /// Checks every field and lists all offending keys at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            bad.push(format!("mass = {} (must be >= 0)", self.mass));
        }
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e >= 0.0) {
                bad.push(format!("epsilon = {e} (must be >= 0)"));
            }
        }
        if let Err(e) = self.cutoff.validate() {
            bad.push(format!("cutoff: {e}"));
        }
        if self.kappa_list.is_empty() {
            bad.push("kappa_list is empty".into());
        }
        for &k in &self.kappa_list {
            if !positive(k) {
                bad.push(format!("kappa_list entry {k} (must be > 0)"));
            }
        }
        if let Some(l) = &self.lattice {
            if !positive(l.box_side) {
                bad.push(format!("lattice.box_side = {} (must be > 0)", l.box_side));
            }
            if l.points_per_dim < 2 || l.points_per_dim % 2 != 0 {
                bad.push(format!("lattice.points_per_dim = {} (must be even and >= 2)", l.points_per_dim));
            }
            if !positive(l.margin_factor) {
                bad.push(format!("lattice.margin_factor = {} (must be > 0)", l.margin_factor));
            }
        }
        if let Some(r) = &self.region {
            if !positive(r.size) {
                bad.push(format!("region.size = {} (must be > 0)", r.size));
            }
        }
        if let Some(s) = &self.sweep {
            if s.l_values.iter().any(|&l| !positive(l)) {
                bad.push("sweep.L_values must be positive".into());
            }
        }
        let wh = &self.wiener_hopf;
        if wh.x.is_some_and(|x| !positive(x)) {
            bad.push("wiener_hopf.X must be > 0".into());
        }
        if wh.n.is_some_and(|n| n < 2) {
            bad.push("wiener_hopf.n must be >= 2".into());
        }
        let g = &wh.s_grid;
        if !(positive(g.head_min) && g.head_max > g.head_min && g.head_points >= 2 && positive(g.tail_step)) {
            bad.push("wiener_hopf.s_grid needs 0 < head_min < head_max, head_points >= 2, tail_step > 0".into());
        }
        let t = &self.tolerances;
        for (k, v) in [
            ("area_law", t.area_law),
            ("f0_identity", t.f0_identity),
            ("gaussian_kernel", t.gaussian_kernel),
            ("gaussian_cross_norm", t.gaussian_cross_norm),
            ("nonnegativity", t.nonnegativity),
            ("rotation", t.rotation),
            ("schatten_slope", t.schatten_slope),
        ] {
            if !positive(v) {
                bad.push(format!("tolerances.{k} = {v} (must be > 0)"));
            }
        }
        if !(self.diagnostics.sigma > 0.0 && self.diagnostics.sigma <= 1.0) {
            bad.push(format!("diagnostics.sigma = {} (must lie in (0, 1])", self.diagnostics.sigma));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid configuration: {}", bad.join("; "))))
        }
    }

    pub fn require_epsilon(&self) -> Result<f64> {
        self.epsilon.ok_or_else(|| missing("epsilon"))
    }

    pub fn dirac_params(&self) -> Result<DiracParams> {
        DiracParams::new(self.mass, self.require_epsilon()?, self.cutoff)
    }

    pub fn torus(&self) -> Result<(TorusLattice, LatticeOptions)> {
        let l = self.lattice.ok_or_else(|| missing("lattice.box_side"))?;
        let lattice = TorusLattice::new(l.box_side, l.points_per_dim)?;
        let options = LatticeOptions {
            allow_coarse: l.allow_coarse,
            allow_small_margin: l.allow_small_margin,
            margin_factor: l.margin_factor,
            sharp: false,
        };
        Ok((lattice, options))
    }

    pub fn region(&self) -> Result<RegionGenerator> {
        self.region.ok_or_else(|| missing("region.kind"))
    }

    pub fn l_values(&self) -> Result<Vec<f64>> {
        self.sweep
            .as_ref()
            .map(|s| s.l_values.clone())
            .ok_or_else(|| missing("sweep.L_values"))
    }

    pub fn profile_spec(&self) -> ProfileSpec {
        let wh = &self.wiener_hopf;
        let g = &wh.s_grid;
        ProfileSpec {
            head_min: g.head_min,
            head_max: g.head_max,
            head_points: g.head_points,
            tail_step: g.tail_step,
            tail_level: g.tail_level,
            section: SectionSpec {
                length: wh.x,
                points: wh.n,
                max_points: wh.max_points,
                ..SectionSpec::default()
            },
            ..ProfileSpec::default()
        }
    }

    /// Canonical JSON with sorted keys; the basis of [`Self::hash`].
    pub fn canonical_json(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&v)?)
    }

    /// Hex SHA-256 of the canonical JSON without `output_dir`, so the hash
    /// identifies the experiment rather than where its results went.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
    }

    pub fn to_flat(&self) -> Result<String> {
        Ok(json_to_flat(&serde_json::to_value(self)?))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses flat `dotted.key = value` lines into nested JSON.
pub fn flat_to_json(text: &str) -> Result<Value> {
    let mut root = Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::Config(format!("line {}: malformed key `{key}`", lineno + 1)));
        }
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            node = entry
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("line {}: `{part}` is both a value and a table", lineno + 1)))?;
        }
        let last = parts[parts.len() - 1];
        if node.contains_key(last) {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
        node.insert(last.to_string(), parsed);
    }
    Ok(Value::Object(root))
}

/// Inverse of [`flat_to_json`] for objects whose leaves are not objects.
pub fn json_to_flat(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            other => {
                out.push_str(&format!("{prefix} = {other}\n"));
            }
        }
    }
    let mut out = String::new();
    walk("", value, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area_law_harness::RegionKind;
    use crate::dirac_symbols::CutoffKind;

    const SAMPLE: &str = "
# sample
mass = 0
epsilon = 2
cutoff.kind = rational
cutoff.rho = 4.5
kappa_list = [0.5, 1, 1.5]
lattice.box_side = 34
lattice.points_per_dim = 34
lattice.allow_coarse = true
region.kind = cube
region.size = 1
sweep.L_values = [4, 5, 6]
wiener_hopf.X = 40
output_dir = results
";

    #[test]
    fn parses_flat_format() {
        let c = ExperimentConfig::from_flat_str(SAMPLE).unwrap();
        assert_eq!(c.epsilon, Some(2.0));
        assert_eq!(c.cutoff.kind, CutoffKind::Rational { rho: 4.5 });
        assert_eq!(c.kappa_list, vec![0.5, 1.0, 1.5]);
        assert_eq!(c.region.unwrap().kind, RegionKind::Cube);
        assert_eq!(c.l_values().unwrap(), vec![4.0, 5.0, 6.0]);
        assert_eq!(c.profile_spec().section.length, Some(40.0));
        assert_eq!(c.output_dir, PathBuf::from("results"));
    }

    #[test]
    fn flat_and_json_round_trip() {
        let c = ExperimentConfig::from_flat_str(SAMPLE).unwrap();
        let back = ExperimentConfig::from_flat_str(&c.to_flat().unwrap()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash().unwrap(), back.hash().unwrap());
        let via_json = ExperimentConfig::from_json_value(serde_json::from_str(&c.canonical_json().unwrap()).unwrap()).unwrap();
        assert_eq!(c, via_json);
    }

    #[test]
    fn hash_is_order_independent() {
        let reordered: String = SAMPLE.lines().rev().map(|l| format!("{l}\n")).collect();
        let a = ExperimentConfig::from_flat_str(SAMPLE).unwrap();
        let b = ExperimentConfig::from_flat_str(&reordered).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let mut c = a.clone();
        c.epsilon = Some(1.0);
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
        let mut d = a.clone();
        d.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash().unwrap(), d.hash().unwrap());
    }

    #[test]
    fn errors_name_keys() {
        let e = ExperimentConfig::from_flat_str("mass = 0\n").unwrap();
        let msg = e.dirac_params().unwrap_err().to_string();
        assert!(msg.contains("epsilon"), "{msg}");
        let msg = ExperimentConfig::from_flat_str("cutoff.kind = rational\ncutoff.rho = 2\nlattice.box_side = -1\nlattice.points_per_dim = 3\n")
            .unwrap_err()
            .to_string();
        for key in ["cutoff", "lattice.box_side", "lattice.points_per_dim"] {
            assert!(msg.contains(key), "{key}: {msg}");
        }
        assert!(ExperimentConfig::from_flat_str("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_flat_str("cutoff.kind = gaussian\ncutoff.width = 1\n").is_err());
        assert!(ExperimentConfig::from_flat_str("mass = 1\nmass = 2\n").is_err());
        assert!(ExperimentConfig::from_flat_str("mass 1\n").is_err());
    }
}
