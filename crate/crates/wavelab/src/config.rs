//! Run configuration: one versioned JSON document describing the system,
//! the grid, the data and the diagnostics of an experiment.  Parsing is
//! strict (unknown keys are errors) and resolution fills every default,
//! so the echoed configuration alone reproduces a run.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsConfig, NormSelection, RunOptions, DEFAULT_DELTA, DEFAULT_ETA};
use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::solver::{auto_half_width, ComponentData, InitialData};
use crate::system::{preset, SystemSpec};

/// Version of the configuration schema accepted by this build.
pub const CONFIG_SCHEMA: u32 = 1;

/// Box half width: a number, or `"auto"` for the smallest box that keeps
/// the solution support away from the boundary through the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HalfWidthSpec {
    Fixed(f64),
    Named(String),
}

impl Default for HalfWidthSpec {
    fn default() -> HalfWidthSpec {
        HalfWidthSpec::Named("auto".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Points per axis.
    pub n: usize,
    #[serde(default)]
    pub half_width: HalfWidthSpec,
}

/// Initial data section: optional explicit bumps plus a global amplitude
/// factor applied to all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Explicit per-component bumps; omitted means the preset default.
    #[serde(default)]
    pub bumps: Option<[ComponentData; 3]>,
    #[serde(default = "one")]
    pub amp: f64,
}

impl Default for DataSection {
    fn default() -> DataSection {
        DataSection { bumps: None, amp: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

/// Which norm families the diagnostic records carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsSection {
    pub n_norms: bool,
    pub m_norms: bool,
    pub ghost_l: bool,
    pub bracket: bool,
}

impl Default for NormsSection {
    fn default() -> NormsSection {
        NormsSection { n_norms: true, m_norms: true, ghost_l: true, bracket: true }
    }
}

impl NormsSection {
    pub fn selection(&self) -> NormSelection {
        NormSelection {
            n_norms: self.n_norms,
            m_norms: self.m_norms,
            ghost_l: self.ghost_l,
            bracket: self.bracket,
        }
    }
}

/// The whole experiment description as read from disk.  Exactly one of
/// `preset` and `system` must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must equal [`CONFIG_SCHEMA`].
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Inline system, for couplings no preset covers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    pub grid: GridSection,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_max: f64,
    #[serde(default)]
    pub data: DataSection,
    /// Time between full diagnostic records.
    #[serde(default = "default_cadence")]
    pub cadence: f64,
    /// Time-weight exponent on the first component.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Ghost-weight exponent.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub norms: NormsSection,
    /// Output directory for series.csv and summary.json.
    #[serde(default = "default_out")]
    pub out: String,
    /// Whether a blow-up should be treated as a failure; defaults to
    /// true for every preset except "john_blowup".
    #[serde(default)]
    pub expect_global: Option<bool>,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_cadence() -> f64 {
    0.25
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

fn default_out() -> String {
    "out".to_string()
}

impl RunConfig {
    /// Baseline configuration for a named preset, the starting point for
    /// command-line overrides.
    pub fn from_preset(name: &str) -> RunConfig {
        RunConfig {
            schema: CONFIG_SCHEMA,
            preset: Some(name.to_string()),
            system: None,
            grid: GridSection { n: 96, half_width: HalfWidthSpec::default() },
            cfl: default_cfl(),
            t_max: 5.0,
            data: DataSection::default(),
            cadence: default_cadence(),
            delta: default_delta(),
            eta: default_eta(),
            norms: NormsSection::default(),
            out: default_out(),
            expect_global: None,
        }
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Validates everything and fills every default, producing the
    /// concrete description a run executes and reports.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "schema version {} not supported, this build reads version {}",
                self.schema, CONFIG_SCHEMA
            )));
        }
        let spec = match (&self.preset, &self.system) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either a preset name or an inline system, not both".to_string(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "a preset name or an inline system is required".to_string(),
                ))
            }
            (Some(name), None) => preset(name)?,
            (None, Some(spec)) => spec.clone(),
        };
        spec.validate()?;

        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!(
                "t_max must be positive and finite, got {}",
                self.t_max
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(Error::Config(format!(
                "cfl {} outside the stable range (0, 0.9]",
                self.cfl
            )));
        }
        if !(self.cadence > 0.0 && self.cadence.is_finite()) {
            return Err(Error::Config(format!(
                "cadence must be positive and finite, got {}",
                self.cadence
            )));
        }
        if !(self.data.amp > 0.0 && self.data.amp.is_finite()) {
            return Err(Error::Config(format!(
                "data amplitude must be positive and finite, got {}",
                self.data.amp
            )));
        }
        let diagnostics = DiagnosticsConfig {
            delta: self.delta,
            eta: self.eta,
            selection: self.norms.selection(),
        };
        diagnostics.validate()?;

        let base = match &self.data.bumps {
            Some(components) => InitialData { components: components.clone() },
            None => InitialData::default_for(self.preset.as_deref().unwrap_or("custom")),
        };
        base.validate()?;
        let data = base.scaled(self.data.amp);

        let n = self.grid.n;
        let half_width = match &self.grid.half_width {
            HalfWidthSpec::Fixed(v) => *v,
            HalfWidthSpec::Named(s) if s == "auto" => {
                if n <= 16 {
                    return Err(Error::Config(format!(
                        "automatic domain sizing needs n > 16, got {n}"
                    )));
                }
                auto_half_width(data.support_radius(), spec.max_speed(), self.t_max, n)
            }
            HalfWidthSpec::Named(s) => {
                return Err(Error::Config(format!(
                    "half_width must be a number or \"auto\", got \"{s}\""
                )))
            }
        };
        let grid = Grid3::new(n, half_width)?;

        let expect_global = self
            .expect_global
            .unwrap_or(self.preset.as_deref() != Some("john_blowup"));

        Ok(ResolvedRun {
            schema: self.schema,
            preset: self.preset.clone(),
            system: spec,
            grid: ResolvedGrid { n, half_width },
            cfl: self.cfl,
            t_max: self.t_max,
            amp: self.data.amp,
            data,
            cadence: self.cadence,
            delta: self.delta,
            eta: self.eta,
            norms: self.norms,
            out: self.out.clone(),
            expect_global,
            built_grid: grid,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedGrid {
    pub n: usize,
    pub half_width: f64,
}

/// A fully resolved configuration: every default filled, the automatic
/// box size computed, the amplitude folded into the data.  This is what
/// summaries echo.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub schema: u32,
    pub preset: Option<String>,
    pub system: SystemSpec,
    pub grid: ResolvedGrid,
    pub cfl: f64,
    pub t_max: f64,
    pub amp: f64,
    /// Initial data with the amplitude already applied.
    pub data: InitialData,
    pub cadence: f64,
    pub delta: f64,
    pub eta: f64,
    pub norms: NormsSection,
    pub out: String,
    pub expect_global: bool,
    #[serde(skip)]
    built_grid: Grid3,
}

impl ResolvedRun {
    pub fn grid3(&self) -> Grid3 {
        self.built_grid
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            cfl: self.cfl,
            horizon: self.t_max,
            cadence: self.cadence,
            diagnostics: DiagnosticsConfig {
                delta: self.delta,
                eta: self.eta,
                selection: self.norms.selection(),
            },
            ghost: None,
            kss: false,
        }
    }
}
