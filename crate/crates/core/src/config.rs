//! Resolved run configuration shared by simulation, evaluation and search.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ExcitationSpec;
use crate::substrate::MaterialParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSettings {
    pub dt: f64,
    /// Derived from `excitation.transient / dt` when absent.
    pub transient_steps: Option<usize>,
    /// Derived from `excitation.window / dt` when absent.
    pub window_steps: Option<usize>,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        IntegrationSettings {
            dt: 0.01,
            transient_steps: None,
            window_steps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub excitation: ExcitationSpec,
    pub integration: IntegrationSettings,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            material: MaterialParams::default(),
            excitation: ExcitationSpec::default(),
            integration: IntegrationSettings::default(),
            seed: 1,
        }
    }
}

fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

impl RunConfig {
    /// Fill derived step counts.
    pub fn resolved(mut self) -> Self {
        let dt = self.integration.dt;
        if dt > 0.0 && dt.is_finite() {
            self.integration
                .transient_steps
                .get_or_insert(steps_for(self.excitation.transient, dt));
            self.integration
                .window_steps
                .get_or_insert(steps_for(self.excitation.window, dt));
        }
        self
    }

    pub fn transient_steps(&self) -> usize {
        self.integration
            .transient_steps
            .unwrap_or_else(|| steps_for(self.excitation.transient, self.integration.dt))
    }

    pub fn window_steps(&self) -> usize {
        self.integration
            .window_steps
            .unwrap_or_else(|| steps_for(self.excitation.window, self.integration.dt))
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.excitation.validate()?;
        let dt = self.integration.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("integration.dt", "must be finite and > 0"));
        }
        let window_steps = self.window_steps();
        if window_steps < 2 {
            return Err(Error::config(
                "integration.window_steps",
                "must be at least 2",
            ));
        }
        let span = window_steps as f64 * dt;
        if (span - self.excitation.window).abs() > 1e-9 * self.excitation.window.max(1.0) {
            return Err(Error::config(
                "integration.window_steps",
                format!(
                    "window_steps·dt = {span} must equal excitation.window = {}",
                    self.excitation.window
                ),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Read, default-fill and validate a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    RunConfig::from_json(&text)
}
