//! Run configuration, read from TOML. Every section is optional and falls
//! back to its defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bite::{PeakPickConfig, RollBaselineConfig, ScorerConfig};
use crate::chew::{BoutConfig, FusionConfig, GateConfig, LinearModel};
use crate::error::{Error, Result};
use crate::indicators::IndicatorConfig;
use crate::meal::{DbscanConfig, FsmConfig, MealLocalizeConfig};
use crate::preprocess::FilterSpec;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MealMethod {
    /// Bite-density regions, merged and length-filtered.
    #[default]
    Density,
    Dbscan,
    /// Roll-variance state machine on the raw recording.
    Fsm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub filter: FilterSpec,
    /// Median/high-pass cleanup before scoring.
    pub preprocess_before_scoring: bool,
    pub scorer: ScorerConfig,
    pub peaks: PeakPickConfig,
    pub roll_baseline: RollBaselineConfig,
    pub meal_method: MealMethod,
    pub meal: MealLocalizeConfig,
    pub dbscan: DbscanConfig,
    pub fsm: FsmConfig,
    pub fusion: FusionConfig,
    pub gate: GateConfig,
    pub bout: BoutConfig,
    pub ppg_model: LinearModel,
    pub audio_model: Option<LinearModel>,
    pub indicators: IndicatorConfig,
    /// Cell size for interval evaluation (s).
    pub grid_step: f64,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            filter: FilterSpec::default(),
            preprocess_before_scoring: false,
            scorer: ScorerConfig::default(),
            peaks: PeakPickConfig::default(),
            roll_baseline: RollBaselineConfig::default(),
            meal_method: MealMethod::default(),
            meal: MealLocalizeConfig::default(),
            dbscan: DbscanConfig::default(),
            fsm: FsmConfig::default(),
            fusion: FusionConfig::default(),
            gate: GateConfig::default(),
            bout: BoutConfig::default(),
            ppg_model: LinearModel::ppg_band_ratio(),
            audio_model: None,
            indicators: IndicatorConfig::default(),
            grid_step: 1.0,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Checks the sections that do not depend on a recording.
    pub fn validate(&self) -> Result<()> {
        self.scorer.validate()?;
        self.peaks.validate()?;
        self.roll_baseline.validate()?;
        self.meal.validate()?;
        self.fsm.validate()?;
        self.fusion.validate()?;
        self.indicators.validate()?;
        self.synth.validate()?;
        if !(self.grid_step.is_finite() && self.grid_step > 0.0) {
            return Err(Error::param("grid_step must be positive"));
        }
        if !(self.dbscan.eps > 0.0 && self.dbscan.min_pts >= 1) {
            return Err(Error::param("dbscan needs eps > 0 and min_pts >= 1"));
        }
        if !(self.gate.window_s > 0.0 && self.gate.magnitude_var_threshold >= 0.0) {
            return Err(Error::param(
                "gate needs a positive window and non-negative threshold",
            ));
        }
        if !(self.bout.chew_gap_s >= 0.0 && self.bout.chew_gap_s < self.bout.episode_gap_s) {
            return Err(Error::param(
                "bout gaps must satisfy 0 <= chew_gap_s < episode_gap_s",
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::param(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::from_toml(&crate::io::read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
