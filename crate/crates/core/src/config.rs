//! Layered scenario configuration: embedded base, scenario preset, user file, then
//! dotted-path overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::biphoton::BiphotonParams;
use crate::comb::ModeStructure;
use crate::crystal::{Axis, CrystalSpec};
use crate::error::{Error, Result};
use crate::modulation::ModulationProfile;
use crate::stats::DetectionConfig;
use crate::vapor::VaporCellSpec;

const BASE: &str = include_str!("../config/presets/base.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    Fig1c,
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Custom,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::Fig1c,
        ScenarioId::Fig2a,
        ScenarioId::Fig2b,
        ScenarioId::Fig3a,
        ScenarioId::Fig3b,
        ScenarioId::Fig4a,
        ScenarioId::Fig4b,
        ScenarioId::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Fig1c => "fig1c",
            ScenarioId::Fig2a => "fig2a",
            ScenarioId::Fig2b => "fig2b",
            ScenarioId::Fig3a => "fig3a",
            ScenarioId::Fig3b => "fig3b",
            ScenarioId::Fig4a => "fig4a",
            ScenarioId::Fig4b => "fig4b",
            ScenarioId::Custom => "custom",
        }
    }

    /// The preset overlay shipped for this scenario.
    pub fn preset(self) -> &'static str {
        match self {
            ScenarioId::Fig1c => include_str!("../config/presets/fig1c.toml"),
            ScenarioId::Fig2a => include_str!("../config/presets/fig2a.toml"),
            ScenarioId::Fig2b => include_str!("../config/presets/fig2b.toml"),
            ScenarioId::Fig3a => include_str!("../config/presets/fig3a.toml"),
            ScenarioId::Fig3b => include_str!("../config/presets/fig3b.toml"),
            ScenarioId::Fig4a => include_str!("../config/presets/fig4a.toml"),
            ScenarioId::Fig4b => include_str!("../config/presets/fig4b.toml"),
            ScenarioId::Custom => include_str!("../config/presets/custom.toml"),
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidConfig(vec![format!("unknown scenario `{s}`")]))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(vec![format!("unknown output format `{other}`")])),
        }
    }
}

/// Where and how results are written. Not part of the parameter hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
    /// Also emit a gnuplot script per table.
    pub gnuplot: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    pub length: f64,
    pub poling_period: f64,
    pub temperature: f64,
    pub reference_temperature: f64,
    pub tuning: f64,
    pub pump_wavelength: f64,
    pub double_pass: bool,
    pub signal_axis: Axis,
    pub idler_axis: Axis,
    pub anchor_offset: f64,
}

impl CrystalConfig {
    pub fn to_spec(&self) -> CrystalSpec<f64> {
        CrystalSpec {
            length: self.length,
            poling_period: self.poling_period,
            temperature: self.temperature,
            reference_temperature: self.reference_temperature,
            tuning: self.tuning,
            pump_wavelength: self.pump_wavelength,
            double_pass: self.double_pass,
            signal_axis: self.signal_axis,
            idler_axis: self.idler_axis,
            anchor_offset: self.anchor_offset,
            ..CrystalSpec::ktp_default()
        }
    }
}

/// Source parameters; the pair rate is linear in pump power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub gamma_s: f64,
    pub gamma_i: f64,
    pub pump_power: f64,
    pub pairs_per_watt: f64,
}

impl SourceConfig {
    pub fn params(&self) -> Result<BiphotonParams<f64>> {
        BiphotonParams::from_pump(self.gamma_s, self.gamma_i, self.pump_power, self.pairs_per_watt)
    }

    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [("gamma_s", self.gamma_s), ("gamma_i", self.gamma_i)] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{prefix}{name} = {x} must be > 0"));
            }
        }
        for (name, x) in [("pump_power", self.pump_power), ("pairs_per_watt", self.pairs_per_watt)] {
            if !(x >= 0.0 && x.is_finite()) {
                v.push(format!("{prefix}{name} = {x} must be >= 0"));
            }
        }
        v
    }
}

/// Monte Carlo run length and histogram binning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub duration: f64,
    pub bin: f64,
    /// Histogram half width, s.
    pub window: f64,
    /// Pump powers for the α_3d table, W.
    pub pump_sweep: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub step: f64,
    /// Window half widths in decay times, `[−k/Γ_s, k/Γ_i]`.
    pub decays: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub crystal_from: f64,
    pub crystal_to: f64,
    pub crystal_step: f64,
    pub peak_rate: f64,
    pub floor_rate: f64,
    pub cell_from: f64,
    pub cell_to: f64,
    pub cell_points: usize,
    pub field_from: f64,
    pub field_to: f64,
    pub field_points: usize,
}

/// The full parameter tree for one scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub output: OutputConfig,
    pub crystal: CrystalConfig,
    pub biphoton: SourceConfig,
    pub detection: DetectionConfig,
    pub simulation: SimulationConfig,
    pub waveform: WaveformConfig,
    pub modulation: ModulationProfile,
    pub cell: VaporCellSpec<f64>,
    pub scan: ScanConfig,
}

impl ScenarioConfig {
    /// Base plus the scenario's preset.
    pub fn preset(id: ScenarioId) -> Result<Self> {
        ConfigBuilder::new(Some(id))?.build()
    }

    pub fn mode_structure(&self) -> Result<ModeStructure<f64>> {
        ModeStructure::new(self.crystal.to_spec(), self.biphoton.gamma_s, self.biphoton.gamma_i)
    }

    /// SHA-256 of the canonical JSON of every field except `output`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output");
        }
        hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn canonical_json(v: &serde_json::Value) -> String {
    use serde_json::Value as J;
    match v {
        J::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", J::String(k.clone()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        J::Array(items) => format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

/// Every violated invariant in every section; empty means valid.
pub fn validate_config(c: &ScenarioConfig) -> Vec<String> {
    let mut v = Vec::new();
    v.extend(c.crystal.to_spec().violations().into_iter().map(|m| format!("crystal.{m}")));
    if !(c.crystal.reference_temperature > 0.0) {
        v.push(format!(
            "crystal.reference_temperature = {} must be > 0",
            c.crystal.reference_temperature
        ));
    }
    if !(c.crystal.temperature > 0.0) {
        v.push(format!("crystal.temperature = {} must be > 0", c.crystal.temperature));
    }
    v.extend(c.biphoton.violations("biphoton."));
    v.extend(c.detection.violations("detection."));
    v.extend(c.modulation.violations("modulation."));
    v.extend(c.cell.violations("cell."));

    let s = &c.simulation;
    if !(s.duration > 0.0 && s.duration.is_finite()) {
        v.push(format!("simulation.duration = {} must be > 0", s.duration));
    }
    if !(s.bin >= 1e-12) {
        v.push(format!("simulation.bin = {} must be >= 1 ps", s.bin));
    }
    if !(s.window >= s.bin) {
        v.push(format!("simulation.window = {} must be >= bin", s.window));
    }
    for (k, p) in s.pump_sweep.iter().enumerate() {
        if !(*p >= 0.0 && p.is_finite()) {
            v.push(format!("simulation.pump_sweep[{k}] = {p} must be >= 0"));
        }
    }
    if !(c.waveform.step > 0.0) {
        v.push(format!("waveform.step = {} must be > 0", c.waveform.step));
    }
    if !(c.waveform.decays > 0.0) {
        v.push(format!("waveform.decays = {} must be > 0", c.waveform.decays));
    }

    let sc = &c.scan;
    if !(sc.crystal_to >= sc.crystal_from) {
        v.push("scan.crystal_to must be >= scan.crystal_from".to_string());
    }
    if !(sc.crystal_step > 0.0) {
        v.push(format!("scan.crystal_step = {} must be > 0", sc.crystal_step));
    }
    for (name, x) in [("peak_rate", sc.peak_rate), ("floor_rate", sc.floor_rate)] {
        if !(x >= 0.0 && x.is_finite()) {
            v.push(format!("scan.{name} = {x} must be >= 0"));
        }
    }
    if sc.cell_points == 0 {
        v.push("scan.cell_points must be >= 1".to_string());
    }
    if sc.field_points == 0 {
        v.push("scan.field_points must be >= 1".to_string());
    }
    for (name, t) in [("cell_from", sc.cell_from), ("cell_to", sc.cell_to)] {
        let probe = c.cell.with_temperature(t);
        if let Some(m) = probe.violations("").into_iter().find(|m| m.starts_with("temperature")) {
            v.push(format!("scan.{name}: {m}"));
        }
    }
    for (name, b) in [("field_from", sc.field_from), ("field_to", sc.field_to)] {
        let probe = c.cell.with_field(b);
        if let Some(m) = probe.violations("").into_iter().find(|m| m.starts_with("magnetic_field")) {
            v.push(format!("scan.{name}: {m}"));
        }
    }

    // Only worth building the cavity once its own parameters are sane.
    if v.iter().all(|m| !m.starts_with("crystal.") && !m.starts_with("biphoton.")) {
        match c.mode_structure() {
            Ok(ms) => {
                if let Ok(hop) = ms.mode_hop_spacing() {
                    if sc.crystal_step > hop / 5.0 {
                        v.push(format!(
                            "scan.crystal_step = {} must be <= {} K (a fifth of the mode-hop spacing)",
                            sc.crystal_step,
                            hop / 5.0
                        ));
                    }
                }
            }
            Err(e) => v.push(format!("crystal: {e}")),
        }
    }
    v
}

/// Accumulates TOML layers and overrides, then deserializes and validates.
#[derive(Clone, Debug)]
pub struct ConfigBuilder {
    tree: Table,
}

impl ConfigBuilder {
    /// Base tree plus the preset for `scenario` (the base's own scenario if `None`).
    pub fn new(scenario: Option<ScenarioId>) -> Result<Self> {
        let mut b = Self {
            tree: parse_table(BASE, "base config")?,
        };
        if let Some(id) = scenario {
            b.overlay_str(id.preset(), id.name())?;
        }
        Ok(b)
    }

    /// Builds from a user file, taking the scenario from the file unless `scenario` is given.
    pub fn from_file(path: &Path, scenario: Option<ScenarioId>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let user = parse_table(&text, &path.display().to_string())?;
        let id = match scenario {
            Some(id) => Some(id),
            None => match user.get("scenario") {
                Some(Value::String(s)) => Some(s.parse()?),
                Some(other) => {
                    return Err(Error::InvalidConfig(vec![format!(
                        "scenario must be a string, got `{other}`"
                    )]))
                }
                None => None,
            },
        };
        let mut b = Self::new(id)?;
        merge(&mut b.tree, user);
        if let Some(id) = scenario {
            b.tree.insert("scenario".into(), Value::String(id.name().into()));
        }
        Ok(b)
    }

    pub fn overlay_str(&mut self, text: &str, origin: &str) -> Result<&mut Self> {
        merge(&mut self.tree, parse_table(text, origin)?);
        Ok(self)
    }

    /// Sets `path` (dotted, e.g. `cell.temperature`) to `raw`, parsed as a TOML value when
    /// possible and as a bare string otherwise.
    pub fn set(&mut self, path: &str, raw: &str) -> Result<&mut Self> {
        let value = parse_value(raw);
        let keys: Vec<&str> = path.split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(Error::InvalidConfig(vec![format!("malformed parameter path `{path}`")]));
        }
        let (leaf, parents) = keys.split_last().expect("non-empty path");
        let mut table = &mut self.tree;
        for (depth, key) in parents.iter().enumerate() {
            table = match table.get_mut(*key) {
                Some(Value::Table(t)) => t,
                _ => {
                    return Err(Error::InvalidConfig(vec![format!(
                        "unknown parameter section `{}`",
                        keys[..=depth].join(".")
                    )]))
                }
            };
        }
        if parents.is_empty() && !table.contains_key(*leaf) {
            return Err(Error::InvalidConfig(vec![format!("unknown parameter `{path}`")]));
        }
        let value = match table.get(*leaf) {
            Some(old) => coerce(old, value),
            None => value,
        };
        if *leaf == "kind" && table.get("kind") != Some(&value) {
            table.retain(|k, _| k == "latency");
        }
        table.insert(leaf.to_string(), value);
        Ok(self)
    }

    /// Sets the output directory without going through TOML parsing.
    pub fn output_dir(&mut self, dir: &Path) -> &mut Self {
        if let Some(Value::Table(out)) = self.tree.get_mut("output") {
            out.insert("dir".into(), Value::String(dir.to_string_lossy().into_owned()));
        }
        self
    }

    pub fn tree(&self) -> &Table {
        &self.tree
    }

    /// Deserializes without validating.
    pub fn build_unchecked(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::deserialize(Value::Table(self.tree.clone()))
            .map_err(|e| Error::InvalidConfig(vec![e.to_string().trim().to_string()]))
    }

    /// Deserializes and validates, reporting every violation at once.
    pub fn build(&self) -> Result<ScenarioConfig> {
        let c = self.build_unchecked()?;
        let v = validate_config(&c);
        if v.is_empty() {
            Ok(c)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| Error::InvalidConfig(vec![format!("{origin}: {}", e.to_string().trim())]))
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

// Integers written where the base holds a float keep the float type.
fn coerce(old: &Value, new: Value) -> Value {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Array(a), Value::Array(items)) if a.iter().all(|x| x.is_float()) => Value::Array(
            items
                .into_iter()
                .map(|x| match x {
                    Value::Integer(i) => Value::Float(i as f64),
                    other => other,
                })
                .collect(),
        ),
        (_, new) => new,
    }
}

/// Deep merge; a table whose `kind` changes is replaced outright.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => {
                let kind_changes = o.get("kind").is_some_and(|kind| b.get("kind") != Some(kind));
                if kind_changes {
                    *b = o;
                } else {
                    merge(b, o);
                }
            }
            (Some(old), v) => {
                let v = coerce(old, v);
                *old = v;
            }
            (None, v) => {
                base.insert(k, v);
            }
        }
    }
}
