//! Scenario configuration: JSON schema, preset inheritance, validation and
//! assembly of the vessel state.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constituent::{fiber_in_plane, ActiveStressParams, DepositionStretch, MaterialModel};
use crate::coupling::{run_simulation, CouplingConfig, FlowConditions, FsgState, SimulationOutput};
use crate::error::{Error, Result};
use crate::hemodynamics::{pressure_field, DEFAULT_VISCOSITY, DYN_PER_KPA};
use crate::membrane::{solve_scalar, wall_state, VesselSegment};
use crate::mixture::{ConstituentHistory, MixtureState, Trial};
use crate::tensor::Tensor2;
use crate::turnover::TurnoverParams;

/// Tolerance on `Σ Φ₀ = 1` per region.
pub const FRACTION_TOL: f64 = 1e-6;

const PRESETS: &[(&str, &str)] = &[
    ("ovine-ivc", include_str!("../presets/ovine-ivc.json")),
    ("ovine-ivc-thick", include_str!("../presets/ovine-ivc-thick.json")),
    ("ivc-hypertension", include_str!("../presets/ivc-hypertension.json")),
    ("ivc-flow", include_str!("../presets/ivc-flow.json")),
    ("tevg-interposition", include_str!("../presets/tevg-interposition.json")),
    ("aorta-tube", include_str!("../presets/aorta-tube.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

fn preset_source(name: &str) -> Option<&'static str> {
    let name = if name == "tevg" { "tevg-interposition" } else { name };
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub vessel: VesselConfig,
    pub regions: Vec<RegionConfig>,
    pub constituents: Vec<ConstituentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<ActiveConfig>,
    pub hemodynamics: HemodynamicsConfig,
    pub homeostatic: HomeostaticConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default, skip_serializing_if = "OutputConfig::is_default")]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write every `cadence`-th G&R time.
    pub cadence: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { cadence: 1 }
    }
}

impl OutputConfig {
    fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselConfig {
    pub segments: usize,
    pub length_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub name: String,
    pub from_cm: f64,
    pub to_cm: f64,
    pub a0_cm: f64,
    pub h0_cm: f64,
    /// Initial volume fraction `Φ₀` per constituent (family groups by base name).
    pub fractions: BTreeMap<String, f64>,
    /// Fractions defining the production floor `ρ_ref·k_h`; default `fractions`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reference_fractions: BTreeMap<String, f64>,
    /// Constituents that are absent and never produced in this region.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<String>,
    /// Turnover laws replacing the constituent defaults inside this region.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub turnover: BTreeMap<String, TurnoverParams>,
    /// In "measured" mode, adopt the targets of the first segment of this region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets_from: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaterialSpec {
    NeoHookean {
        #[serde(rename = "c_kPa")]
        c: f64,
    },
    /// Fiber angle measured from the axial direction in the θ–z plane.
    Fung {
        #[serde(rename = "c1_kPa")]
        c1: f64,
        c2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_deg: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub suffix: String,
    pub angle_deg: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstituentConfig {
    pub name: String,
    pub material: MaterialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposition: Option<DepositionStretch>,
    pub turnover: TurnoverParams,
    pub rho_hat_kg_m3: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<FamilyConfig>,
}

// Unknown keys are rejected by the flattened parameter struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub constituent: String,
    #[serde(flatten)]
    pub params: ActiveStressParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HemodynamicsConfig {
    #[serde(rename = "Q_cm3_s")]
    pub flow: f64,
    #[serde(rename = "R_dyn_s_cm5")]
    pub resistance: f64,
    #[serde(rename = "mu_g_cm_s", default = "default_viscosity")]
    pub viscosity: f64,
    /// Load at which the initial state is evaluated; defaults to the running load.
    #[serde(rename = "baseline_Q_cm3_s", default, skip_serializing_if = "Option::is_none")]
    pub baseline_flow: Option<f64>,
    #[serde(rename = "baseline_R_dyn_s_cm5", default, skip_serializing_if = "Option::is_none")]
    pub baseline_resistance: Option<f64>,
}

fn default_viscosity() -> f64 {
    DEFAULT_VISCOSITY
}

impl HemodynamicsConfig {
    pub fn running(&self) -> FlowConditions {
        FlowConditions {
            flow: self.flow,
            resistance: self.resistance,
            viscosity: self.viscosity,
        }
    }

    pub fn baseline(&self) -> Option<FlowConditions> {
        if self.baseline_flow.is_none() && self.baseline_resistance.is_none() {
            return None;
        }
        Some(FlowConditions {
            flow: self.baseline_flow.unwrap_or(self.flow),
            resistance: self.baseline_resistance.unwrap_or(self.resistance),
            viscosity: self.viscosity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeostaticConfig {
    #[serde(rename = "sigma_h_kPa")]
    pub sigma_h: f64,
    #[serde(rename = "tau_h_Pa")]
    pub tau_h: f64,
}

/// Solves for a common fiber deposition stretch so that the initial state of
/// `region` is in equilibrium at `F = I` under the baseline load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub fiber_prestretch: Vec<String>,
    pub region: String,
}

/// Resolves `preset` references and parses a configuration value.
pub fn resolve_value(mut value: Value) -> Result<Value> {
    let mut depth = 0;
    while let Some(preset) = value.get("preset").cloned() {
        depth += 1;
        if depth > 8 {
            return Err(Error::config("preset", "inheritance chain is too deep"));
        }
        let name = preset
            .as_str()
            .ok_or_else(|| Error::config("preset", "must be a string"))?;
        let src = preset_source(name)
            .ok_or_else(|| Error::config("preset", format!("unknown preset `{name}` (known: {:?})", preset_names())))?;
        let base: Value = serde_json::from_str(src)?;
        if let Value::Object(map) = &mut value {
            map.remove("preset");
        }
        value = merge(base, value);
    }
    Ok(value)
}

/// Deep merge; objects merge key by key, everything else is replaced.
pub fn merge(base: Value, over: Value) -> Value {
    match (base, over) {
        (Value::Object(mut b), Value::Object(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(bv) => merge(bv, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, o) => o,
    }
}

pub fn parse_value(value: Value) -> Result<ScenarioConfig> {
    let resolved = resolve_value(value)?;
    let cfg: ScenarioConfig = serde_json::from_value(resolved).map_err(|e| Error::config("config", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_value(value)
}

pub fn load_preset(name: &str) -> Result<ScenarioConfig> {
    parse_value(serde_json::json!({ "preset": name }))
}

/// Sets a dotted path (e.g. `hemodynamics.R`) on a raw configuration. A final
/// key without unit suffix matches the unique key that starts with `key_`.
pub fn set_path(value: &mut Value, path: &str, new: Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = value;
    for (i, part) in parts.iter().enumerate() {
        let map = cur
            .as_object_mut()
            .ok_or_else(|| Error::config(path, "path does not lead through objects"))?;
        let key = if map.contains_key(*part) {
            part.to_string()
        } else {
            let prefix = format!("{part}_");
            let hits: Vec<&String> = map.keys().filter(|k| k.starts_with(&prefix)).collect();
            match hits.as_slice() {
                [k] => (*k).clone(),
                _ if i + 1 < parts.len() => part.to_string(),
                _ => return Err(Error::config(path, format!("no unique key matches `{part}`"))),
            }
        };
        if i + 1 == parts.len() {
            map.insert(key, new);
            return Ok(());
        }
        cur = map.entry(key).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// One constituent after family expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedConstituent {
    pub name: String,
    pub base: String,
    pub share: f64,
    pub suffix: Option<String>,
    pub material: MaterialModel,
    pub deposition: Option<DepositionStretch>,
    pub turnover: TurnoverParams,
    pub rho_hat: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vessel.segments == 0 {
            return Err(Error::config("vessel.segments", "must be ≥ 1"));
        }
        if !(self.vessel.length_cm > 0.0) {
            return Err(Error::config("vessel.length_cm", "must be positive"));
        }
        let names: Vec<&str> = self.constituents.iter().map(|c| c.name.as_str()).collect();
        for (i, c) in self.constituents.iter().enumerate() {
            if names[..i].contains(&c.name.as_str()) {
                return Err(Error::config("constituents", format!("duplicate constituent `{}`", c.name)));
            }
            if !(c.rho_hat_kg_m3 > 0.0) {
                return Err(Error::config(format!("constituents.{}.rho_hat_kg_m3", c.name), "must be positive"));
            }
            c.turnover
                .validate()
                .map_err(|e| Error::config(format!("constituents.{}.turnover", c.name), e.to_string()))?;
            if let TurnoverParams::Inflammatory { paired_with, .. } = &c.turnover {
                if !names.contains(&paired_with.as_str()) {
                    return Err(Error::config(
                        format!("constituents.{}.turnover.paired_with", c.name),
                        format!("unknown constituent `{paired_with}`"),
                    ));
                }
            }
            let calibrated = self.calibration.as_ref().is_some_and(|k| k.fiber_prestretch.contains(&c.name));
            if matches!(c.material, MaterialSpec::Fung { .. }) && c.deposition.is_none() && !calibrated {
                return Err(Error::config(
                    format!("constituents.{}.deposition", c.name),
                    "fiber constituents need a deposition stretch or a calibration entry",
                ));
            }
            let beta: f64 = c.families.iter().map(|f| f.beta).sum();
            if !c.families.is_empty() && !(beta > 0.0) {
                return Err(Error::config(format!("constituents.{}.families", c.name), "β must sum to > 0"));
            }
        }
        let mut regions: Vec<&RegionConfig> = self.regions.iter().collect();
        if regions.is_empty() {
            return Err(Error::config("regions", "at least one region is required"));
        }
        regions.sort_by(|a, b| a.from_cm.total_cmp(&b.from_cm));
        let tol = 1e-9 * self.vessel.length_cm;
        let mut edge = 0.0;
        for r in &regions {
            if (r.from_cm - edge).abs() > tol {
                return Err(Error::config(
                    format!("regions.{}", r.name),
                    format!("regions must tile the axis; gap or overlap at {edge} cm"),
                ));
            }
            if !(r.to_cm > r.from_cm) {
                return Err(Error::config(format!("regions.{}", r.name), "to_cm must exceed from_cm"));
            }
            if !(r.a0_cm > 0.0 && r.h0_cm > 0.0) {
                return Err(Error::config(format!("regions.{}", r.name), "a0_cm and h0_cm must be positive"));
            }
            edge = r.to_cm;
            if let Some(src) = &r.targets_from {
                if !self.regions.iter().any(|o| &o.name == src && o.name != r.name) {
                    return Err(Error::config(format!("regions.{}.targets_from", r.name), format!("unknown region `{src}`")));
                }
            }
            for (key, t) in &r.turnover {
                t.validate()
                    .map_err(|e| Error::config(format!("regions.{}.turnover.{key}", r.name), e.to_string()))?;
            }
            for key in r
                .fractions
                .keys()
                .chain(r.reference_fractions.keys())
                .chain(r.exclude.iter())
                .chain(r.turnover.keys())
            {
                if !names.contains(&key.as_str()) {
                    return Err(Error::config(
                        format!("regions.{}", r.name),
                        format!("unknown constituent `{key}`"),
                    ));
                }
            }
            let sum: f64 = r.fractions.values().sum();
            if (sum - 1.0).abs() > FRACTION_TOL {
                return Err(Error::config(
                    format!("regions.{}.fractions", r.name),
                    format!("initial volume fractions sum to {sum:.6}, expected 1"),
                ));
            }
            if r.fractions.values().any(|&v| v < 0.0) {
                return Err(Error::config(format!("regions.{}.fractions", r.name), "fractions must be ≥ 0"));
            }
        }
        if (edge - self.vessel.length_cm).abs() > tol {
            return Err(Error::config("regions", format!("regions end at {edge} cm, vessel length is {}", self.vessel.length_cm)));
        }
        if let Some(a) = &self.active {
            if !names.contains(&a.constituent.as_str()) {
                return Err(Error::config("active.constituent", format!("unknown constituent `{}`", a.constituent)));
            }
            a.params.validate().map_err(|e| Error::config("active", e.to_string()))?;
        }
        if let Some(c) = &self.calibration {
            if !self.regions.iter().any(|r| r.name == c.region) {
                return Err(Error::config("calibration.region", format!("unknown region `{}`", c.region)));
            }
            for n in &c.fiber_prestretch {
                if !names.contains(&n.as_str()) {
                    return Err(Error::config("calibration.fiber_prestretch", format!("unknown constituent `{n}`")));
                }
            }
        }
        let h = &self.hemodynamics;
        if !(h.flow > 0.0 && h.resistance >= 0.0 && h.viscosity > 0.0) {
            return Err(Error::config("hemodynamics", "need Q > 0, R ≥ 0 and μ > 0"));
        }
        if !(self.homeostatic.tau_h > 0.0 && self.homeostatic.sigma_h != 0.0) {
            return Err(Error::config("homeostatic", "τ_h must be positive and σ_h nonzero"));
        }
        self.coupling.validate()
    }

    /// Constituents with fiber families expanded, in output order.
    pub fn expanded(&self) -> Result<Vec<ExpandedConstituent>> {
        let mut out = Vec::new();
        for c in &self.constituents {
            let material_for = |angle: Option<f64>| -> Result<MaterialModel> {
                let m = match c.material {
                    MaterialSpec::NeoHookean { c } => MaterialModel::NeoHookean { c },
                    MaterialSpec::Fung { c1, c2, angle_deg } => {
                        let angle = angle.or(angle_deg).ok_or_else(|| {
                            Error::config(format!("constituents.{}.material", c.name), "Fung fibers need angle_deg")
                        })?;
                        MaterialModel::Fung {
                            c1,
                            c2,
                            fiber: fiber_in_plane(angle),
                        }
                    }
                };
                m.validate()
                    .map_err(|e| Error::config(format!("constituents.{}.material", c.name), e.to_string()))?;
                Ok(m)
            };
            if c.families.is_empty() {
                out.push(ExpandedConstituent {
                    name: c.name.clone(),
                    base: c.name.clone(),
                    share: 1.0,
                    suffix: None,
                    material: material_for(None)?,
                    deposition: c.deposition,
                    turnover: c.turnover.clone(),
                    rho_hat: c.rho_hat_kg_m3,
                });
            } else {
                let total: f64 = c.families.iter().map(|f| f.beta).sum();
                for f in &c.families {
                    out.push(ExpandedConstituent {
                        name: format!("{}-{}", c.name, f.suffix),
                        base: c.name.clone(),
                        share: f.beta / total,
                        suffix: Some(f.suffix.clone()),
                        material: material_for(Some(f.angle_deg))?,
                        deposition: c.deposition,
                        turnover: c.turnover.clone(),
                        rho_hat: c.rho_hat_kg_m3,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn constituent_names(&self) -> Result<Vec<String>> {
        Ok(self.expanded()?.into_iter().map(|c| c.name).collect())
    }

    fn region_at(&self, z: f64) -> &RegionConfig {
        self.regions
            .iter()
            .find(|r| z >= r.from_cm && z < r.to_cm)
            .unwrap_or_else(|| self.regions.iter().max_by(|a, b| a.to_cm.total_cmp(&b.to_cm)).unwrap())
    }

    fn build_mixture(&self, region: &RegionConfig, expanded: &[ExpandedConstituent]) -> Result<MixtureState> {
        let mut hist = Vec::with_capacity(expanded.len());
        for e in expanded {
            let excluded = region.exclude.contains(&e.base);
            let phi0 = if excluded { 0.0 } else { region.fractions.get(&e.base).copied().unwrap_or(0.0) * e.share };
            let phi_ref = if excluded {
                0.0
            } else {
                region
                    .reference_fractions
                    .get(&e.base)
                    .or_else(|| region.fractions.get(&e.base))
                    .copied()
                    .unwrap_or(0.0)
                    * e.share
            };
            let g = match &e.deposition {
                Some(d) => d
                    .tensor(e.material.fiber())
                    .map_err(|err| Error::config(format!("constituents.{}.deposition", e.base), err.to_string()))?,
                None => Tensor2::identity(),
            };
            let turnover = if excluded {
                TurnoverParams::Elastin
            } else {
                region.turnover.get(&e.base).cloned().unwrap_or_else(|| e.turnover.clone())
            };
            let mut h = ConstituentHistory::new(e.name.clone(), e.material, g, turnover, phi0 * e.rho_hat, e.rho_hat)
                .map_err(|err| Error::config(format!("constituents.{}", e.name), err.to_string()))?;
            h.rho_ref = phi_ref * e.rho_hat;
            hist.push(h);
        }
        // Inflammatory constituents take the homeostatic rate of their partner
        // family (same suffix when both carry families).
        for i in 0..expanded.len() {
            if let TurnoverParams::Inflammatory { paired_with, .. } = &hist[i].turnover {
                let partner = expanded
                    .iter()
                    .position(|p| {
                        p.base == *paired_with && (p.suffix.is_none() || p.suffix == expanded[i].suffix)
                    })
                    .or_else(|| expanded.iter().position(|p| p.base == *paired_with))
                    .ok_or_else(|| Error::config("turnover.paired_with", format!("`{paired_with}` not found")))?;
                let k_h = hist[partner].turnover.basal_rate().unwrap_or(0.0);
                hist[i].paired_rate = hist[partner].rho_ref * k_h;
            }
        }
        let mut mixture = MixtureState::new(hist);
        mixture.truncation = self.coupling.history_truncation;
        if let Some(a) = &self.active {
            let idx = expanded
                .iter()
                .position(|e| e.base == a.constituent)
                .ok_or_else(|| Error::config("active.constituent", "not found"))?;
            mixture = mixture.with_active(a.params, idx)?;
        }
        Ok(mixture)
    }

    /// Vessel state before initialization.
    pub fn build_state(&self) -> Result<FsgState> {
        let expanded = self.expanded()?;
        let n = self.vessel.segments;
        let dz = self.vessel.length_cm / n as f64;
        let mut segments = Vec::with_capacity(n);
        for i in 0..n {
            let z = (i as f64 + 0.5) * dz;
            let region = self.region_at(z);
            let mixture = self.build_mixture(region, &expanded)?;
            let mut seg = VesselSegment::new(region.a0_cm, region.h0_cm, dz, z, mixture)?;
            seg.sigma_h = self.homeostatic.sigma_h;
            seg.tau_h = self.homeostatic.tau_h * 10.0;
            segments.push(seg);
        }
        for i in 0..n {
            let region = self.region_at(segments[i].z);
            if let Some(src) = &region.targets_from {
                let src = self.regions.iter().find(|r| &r.name == src).unwrap();
                segments[i].target_source = segments.iter().position(|s| s.z >= src.from_cm && s.z < src.to_cm);
            }
        }
        FsgState::new(segments, self.hemodynamics.running())
    }

    /// Applies the configured prestretch calibration and returns the resolved
    /// configuration (calibration block removed, stretches frozen).
    pub fn calibrated(&self) -> Result<(ScenarioConfig, Option<f64>)> {
        let Some(cal) = &self.calibration else {
            return Ok((self.clone(), None));
        };
        let with_stretch = |g: f64| -> ScenarioConfig {
            let mut c = self.clone();
            c.calibration = None;
            for k in &mut c.constituents {
                if cal.fiber_prestretch.contains(&k.name) {
                    k.deposition = Some(DepositionStretch::Fiber { stretch: g });
                }
            }
            c
        };
        let region = self.regions.iter().find(|r| r.name == cal.region).unwrap();
        let residual = |g: f64| -> Result<f64> {
            let c = with_stretch(g);
            let state = c.build_state()?;
            let idx = state
                .segments
                .iter()
                .position(|s| s.z >= region.from_cm && s.z < region.to_cm)
                .unwrap_or(0);
            let lumen = baseline_lumen_kpa(&c, &state, idx)?;
            let seg = &state.segments[idx];
            let eval = seg.mixture.evaluate(&Trial::at_rest(0.0), false)?;
            Ok(wall_state(seg.a0, seg.h0, 1.0, 1.0, &eval, lumen).residual)
        };
        let g = solve_scalar(residual, 1.0, 0.7, 1.5, 1e-13)
            .map_err(|e| Error::config("calibration", format!("fiber prestretch calibration failed: {e}")))?;
        Ok((with_stretch(g), Some(g)))
    }
}

/// Baseline midpoint lumen pressure of segment `idx` at the reference geometry.
fn baseline_lumen_kpa(cfg: &ScenarioConfig, state: &FsgState, idx: usize) -> Result<f64> {
    let flow = cfg.hemodynamics.baseline().unwrap_or_else(|| cfg.hemodynamics.running());
    let geo: Vec<(f64, f64)> = state.segments.iter().map(|s| (s.a0, s.length)).collect();
    let p = pressure_field(&geo, flow.flow, flow.viscosity, flow.resistance)?;
    Ok(p[idx] / DYN_PER_KPA)
}

/// Fully assembled scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub state: FsgState,
    pub names: Vec<String>,
    pub calibrated_prestretch: Option<f64>,
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let (config, g) = cfg.calibrated()?;
        let state = config.build_state()?;
        let names = config.constituent_names()?;
        Ok(Self {
            config,
            state,
            names,
            calibrated_prestretch: g,
        })
    }

    pub fn baseline(&self) -> Option<FlowConditions> {
        self.config.hemodynamics.baseline()
    }

    /// Runs from the current state (initializing first when it has no history).
    pub fn run(&mut self) -> Result<SimulationOutput> {
        let baseline = self.baseline();
        run_simulation(&mut self.state, &self.config.coupling, baseline.as_ref())
    }

    /// Replaces the state by a saved one, e.g. the end of an earlier run.
    pub fn seed(&mut self, state: FsgState) -> Result<()> {
        if state.segments.len() != self.state.segments.len() {
            return Err(Error::config(
                "seed-history",
                format!("state has {} segments, scenario has {}", state.segments.len(), self.state.segments.len()),
            ));
        }
        let names: Vec<&str> = state.segments[0].mixture.constituents.iter().map(|c| c.name.as_str()).collect();
        if names != self.names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::config("seed-history", "constituents differ from the scenario"));
        }
        let mut state = state;
        state.flow = self.config.hemodynamics.running();
        for seg in &mut state.segments {
            seg.mixture.truncation = self.config.coupling.history_truncation;
        }
        self.state = state;
        Ok(())
    }
}
