//! Pipeline report. Result fields are deterministic for a given config; wall
//! times live in a separate [`Timings`] record.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::config::RunConfig;
use super::pipeline::{
    ContinuationSummary, EquilibriaSummary, PdeSummary, ResolventSummary, ShootSummary, SpectrumSummary,
    TrapSummary, WindowSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    /// Ran and every check passed.
    Pass,
    /// Ran, but a check did not hold.
    Fail,
    /// Raised an error.
    Error,
    /// A stage it depends on did not pass.
    Skipped,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage<T> {
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<T>,
}

impl<T> Stage<T> {
    pub fn disabled() -> Self {
        Self { status: StageStatus::Disabled, message: None, result: None }
    }

    pub fn skipped(reason: impl Into<String>) -> Self {
        Self { status: StageStatus::Skipped, message: Some(reason.into()), result: None }
    }

    pub fn error(e: impl std::fmt::Display) -> Self {
        Self { status: StageStatus::Error, message: Some(e.to_string()), result: None }
    }

    pub fn checked(result: T, pass: bool) -> Self {
        let status = if pass { StageStatus::Pass } else { StageStatus::Fail };
        Self { status, message: None, result: Some(result) }
    }

    pub fn passed(&self) -> bool {
        self.status == StageStatus::Pass
    }

    /// An enabled stage that did not pass.
    pub fn failed(&self) -> bool {
        matches!(self.status, StageStatus::Fail | StageStatus::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stages {
    pub equilibria: Stage<EquilibriaSummary>,
    pub speed_window: Stage<WindowSummary>,
    pub trap: Stage<TrapSummary>,
    pub shoot: Stage<ShootSummary>,
    pub continuation: Stage<ContinuationSummary>,
    pub spectrum: Stage<SpectrumSummary>,
    pub resolvent: Stage<ResolventSummary>,
    pub pde: Stage<PdeSummary>,
}

impl Stages {
    pub fn statuses(&self) -> Vec<(&'static str, StageStatus)> {
        vec![
            ("equilibria", self.equilibria.status),
            ("speed_window", self.speed_window.status),
            ("trap", self.trap.status),
            ("shoot", self.shoot.status),
            ("continuation", self.continuation.status),
            ("spectrum", self.spectrum.status),
            ("resolvent", self.resolvent.status),
            ("pde", self.pde.status),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: RunConfig,
    /// Speed actually used (resolved from "auto" when requested).
    pub speed: Option<f64>,
    pub stages: Stages,
}

impl Report {
    pub fn any_failed(&self) -> bool {
        self.stages.statuses().iter().any(|(_, s)| matches!(s, StageStatus::Fail | StageStatus::Error))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Wall time per stage in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub seconds: BTreeMap<String, f64>,
}

impl Timings {
    pub fn record(&mut self, stage: &str, secs: f64) {
        self.seconds.insert(stage.to_string(), secs);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
