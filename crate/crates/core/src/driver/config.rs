//! TOML run configuration. Every section rejects unknown keys; errors carry
//! the offending line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{build_model, Branch, ModelSpec};
use crate::orbit::IntegratorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SpeedSetting {
    /// Midpoint of the admissible window.
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for SpeedSetting {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpeedSetting::Auto => ser.serialize_str("auto"),
            SpeedSetting::Fixed(s) => ser.serialize_f64(*s),
        }
    }
}

impl<'de> Deserialize<'de> for SpeedSetting {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(s) => Ok(SpeedSetting::Fixed(s)),
            Raw::Int(s) => Ok(SpeedSetting::Fixed(s as f64)),
            Raw::Text(t) if t == "auto" => Ok(SpeedSetting::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("s must be a number or \"auto\", got \"{t}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    pub chi: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { family: "tanh-quadratic".into(), chi: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSection {
    pub u_minus: f64,
    pub branch: Branch,
    pub s: SpeedSetting,
    pub epsilon: f64,
}

impl Default for WaveSection {
    fn default() -> Self {
        Self { u_minus: 1.25, branch: Branch::Above, s: SpeedSetting::Auto, epsilon: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub equilibria: bool,
    pub speed_window: bool,
    pub trap: bool,
    pub shoot: bool,
    pub continuation: bool,
    pub spectrum: bool,
    pub resolvent: bool,
    pub pde: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self {
            equilibria: true,
            speed_window: true,
            trap: true,
            shoot: true,
            continuation: true,
            spectrum: true,
            resolvent: true,
            pde: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapSection {
    /// Samples per boundary curve.
    pub samples: usize,
    /// Number of speeds across the window.
    pub speeds: usize,
    pub margin: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self { samples: 10_000, speeds: 10, margin: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSection {
    pub ladder: Vec<f64>,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        Self { ladder: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Weights exported as dispersion curves.
    pub rho: Vec<f64>,
    /// Points of the log grid on [1e-2, 10] used for the instability sweep.
    pub rho_log_points: usize,
    pub epsilons: Vec<f64>,
    pub tau_range: f64,
    pub tau_points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { rho: vec![0.0, 0.5, 1.0], rho_log_points: 13, epsilons: vec![1e-2, 1e-3], tau_range: 2.0, tau_points: 401 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventSection {
    pub samples: usize,
    pub seed: u64,
    pub re_min: f64,
    pub re_max: f64,
    pub half_width: f64,
    pub h: f64,
}

impl Default for ResolventSection {
    fn default() -> Self {
        Self { samples: 10, seed: 2024, re_min: 1.0, re_max: 1e3, half_width: 60.0, h: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    pub nodes: usize,
    pub length: f64,
    pub dt: f64,
    pub steps: usize,
    pub perturbation_amplitude: f64,
    pub perturbation_width: f64,
    pub perturbation_offset: f64,
    pub growth_horizon: f64,
    /// Write the initial and final states as CSV.
    pub write_frames: bool,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            nodes: 4096,
            length: 280.0,
            dt: 1e-4,
            steps: 1000,
            perturbation_amplitude: 1e-6,
            perturbation_width: 2.0,
            perturbation_offset: 60.0,
            growth_horizon: 0.2,
            write_frames: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Overrides the environment default when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    /// Family parameters; omitted ones take the family defaults.
    pub parameters: BTreeMap<String, f64>,
    pub wave: WaveSection,
    pub stages: StageToggles,
    pub trap: TrapSection,
    pub orbit: IntegratorConfig,
    pub continuation: ContinuationSection,
    pub spectrum: SpectrumSection,
    pub resolvent: ResolventSection,
    pub pde: PdeSection,
    pub output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config { line: None, message } => {
                let line = message.split(':').next().and_then(|key| find_key_line(text, key));
                Error::Config { line, message }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { line: None, message: e.to_string() })
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let mut params: Vec<(&str, f64)> = self.parameters.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        params.push(("chi", self.model.chi));
        build_model(&self.model.family, &params)
    }

    /// Semantic checks; messages start with the offending `section.key`.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(Error::Config { line: None, message: format!("{key}: {why}") });
        if let Err(e) = self.model() {
            return bad("model.family", e.to_string());
        }
        if !self.wave.u_minus.is_finite() {
            return bad("wave.u_minus", "must be finite".into());
        }
        if !(self.wave.epsilon > 0.0 && self.wave.epsilon.is_finite()) {
            return bad("wave.epsilon", format!("must be positive, got {}", self.wave.epsilon));
        }
        if let SpeedSetting::Fixed(s) = self.wave.s {
            if !s.is_finite() {
                return bad("wave.s", "must be finite".into());
            }
        }
        if self.trap.samples < 2 {
            return bad("trap.samples", "need at least 2 samples per curve".into());
        }
        if !(self.trap.margin > 0.0 && self.trap.margin < 1.0) {
            return bad("trap.margin", format!("must lie in (0, 1), got {}", self.trap.margin));
        }
        if let Err(e) = self.orbit.validate() {
            return bad("orbit.rtol", e.to_string());
        }
        if self.continuation.ladder.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return bad("continuation.ladder", "entries must be finite and non-negative".into());
        }
        if self.spectrum.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("spectrum.epsilons", "entries must be positive".into());
        }
        if !(self.spectrum.tau_range > 0.0) || self.spectrum.tau_points < 3 {
            return bad("spectrum.tau_range", "need tau_range > 0 and tau_points >= 3".into());
        }
        if self.spectrum.rho.iter().any(|r| !r.is_finite()) {
            return bad("spectrum.rho", "entries must be finite".into());
        }
        let r = &self.resolvent;
        if !(r.re_min > 0.0 && r.re_max >= r.re_min) {
            return bad("resolvent.re_min", format!("need 0 < re_min <= re_max, got {} and {}", r.re_min, r.re_max));
        }
        if !(r.h > 0.0 && r.half_width > 4.0 * r.h) {
            return bad("resolvent.h", "need h > 0 and half_width > 4h".into());
        }
        let p = &self.pde;
        if p.nodes < crate::pde::MIN_NODES {
            return bad("pde.nodes", format!("need at least {} nodes", crate::pde::MIN_NODES));
        }
        if !(p.dt > 0.0 && p.length > 0.0 && p.growth_horizon > 0.0) || p.steps == 0 {
            return bad("pde.dt", "dt, length, steps and growth_horizon must be positive".into());
        }
        Ok(())
    }
}

/// Line of `key = ...` in the text, for `section.key` messages.
fn find_key_line(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim();
        } else if current == section && t.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_parses_and_round_trips() {
        let cfg = RunConfig::parse(super::super::EXAMPLE_CONFIG).unwrap();
        assert_eq!(cfg.wave.s, SpeedSetting::Auto);
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("[wave]\nu_minus = 1.25\nspeed = 2\n").unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, Some(3));
                assert!(message.contains("speed"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn semantic_error_reports_line() {
        let err = RunConfig::parse("[wave]\nu_minus = 1.25\nepsilon = -1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(3), .. }), "{err}");
    }

    #[test]
    fn speed_setting_forms() {
        let cfg = RunConfig::parse("[wave]\ns = 1.2\n").unwrap();
        assert_eq!(cfg.wave.s, SpeedSetting::Fixed(1.2));
        let cfg = RunConfig::parse("[wave]\ns = 2\n").unwrap();
        assert_eq!(cfg.wave.s, SpeedSetting::Fixed(2.0));
        assert!(RunConfig::parse("[wave]\ns = \"fast\"\n").is_err());
    }

    #[test]
    fn unknown_family_parameter_rejected() {
        assert!(RunConfig::parse("[parameters]\nzeta = 1.0\n").is_err());
    }
}
