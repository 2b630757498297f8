//! Experiment configuration. Every field has a reference-system default, so
//! an empty file describes the 10 x 100 km, 5 x 32 GBd power sweep.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{FiberSpan, Link};
use crate::equalizers::{Engine, EqualizerConfig, IndexMode};
use crate::error::{invalid_config, Error, Result};
use crate::rxdsp::Scheme;
use crate::waveform::TxConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub num_spans: usize,
    pub span_length_km: f64,
    pub attenuation_db_km: f64,
    pub dispersion_ps_nm_km: f64,
    /// 1/W/km.
    pub gamma_per_w_km: f64,
    pub noise_figure_db: f64,
    pub ase: bool,
    pub steps_per_span: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            num_spans: 10,
            span_length_km: 100.0,
            attenuation_db_km: 0.2,
            dispersion_ps_nm_km: 17.0,
            gamma_per_w_km: 1.2,
            noise_figure_db: 5.0,
            ase: true,
            steps_per_span: 100,
        }
    }
}

impl LinkConfig {
    pub fn span(&self) -> FiberSpan {
        FiberSpan::from_engineering(
            self.attenuation_db_km,
            self.dispersion_ps_nm_km,
            self.gamma_per_w_km,
            self.span_length_km * 1e3,
        )
    }

    /// Uniform link of `num_spans` spans, with the OPC at mid-link if `opc`.
    pub fn build(&self, num_spans: usize, opc: bool) -> Link {
        Link::uniform(
            num_spans,
            self.span(),
            self.noise_figure_db,
            self.ase,
            opc,
            self.steps_per_span,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Power,
    Distance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    /// dBm per channel for a power sweep, km for a distance sweep.
    pub values: Vec<f64>,
    /// Fixed launch power of a distance sweep; absent means search for the
    /// optimum of each scheme.
    pub power_dbm: Option<f64>,
    /// First power tried by the optimum search.
    pub search_start_dbm: f64,
    pub search_step_db: f64,
    pub search_max_evals: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: Axis::Power,
            values: vec![-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0],
            power_dbm: None,
            search_start_dbm: 0.0,
            search_step_db: 1.0,
            search_max_evals: 12,
        }
    }
}

/// Monte-Carlo stopping rule and budget per sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopConfig {
    pub halfwidth_db: f64,
    pub max_frames: usize,
    pub max_wall_time_s: Option<f64>,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            halfwidth_db: 0.05,
            max_frames: 1,
            max_wall_time_s: None,
        }
    }
}

/// Per-scheme changes to the shared equalizer settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeOverride {
    pub window_symbols: Option<usize>,
    pub discard_per_side: Option<usize>,
    pub dbp_steps_per_span: Option<usize>,
    pub index_mode: Option<IndexMode>,
    pub engine: Option<Engine>,
    pub quadrature_oversampling: Option<f64>,
    pub recursive_renormalize: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub tx: TxConfig,
    pub link: LinkConfig,
    pub equalizer: EqualizerConfig,
    pub overrides: BTreeMap<Scheme, SchemeOverride>,
    pub sweep: SweepConfig,
    pub schemes: Vec<Scheme>,
    pub master_seed: u64,
    /// Symbol seeds of the first frames of every point; later frames derive
    /// theirs from `master_seed`.
    pub seeds: Vec<u64>,
    pub stop: StopConfig,
    /// Write measured wall time instead of zero (breaks byte-identity).
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            tx: TxConfig::default(),
            link: LinkConfig::default(),
            equalizer: EqualizerConfig {
                discard_per_side: 128,
                ..EqualizerConfig::default()
            },
            overrides: BTreeMap::new(),
            sweep: SweepConfig::default(),
            schemes: vec![Scheme::Edc, Scheme::OpcOnly, Scheme::VsfeSingle, Scheme::Vao],
            master_seed: 1,
            seeds: vec![1],
            stop: StopConfig::default(),
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.tx.validate()?;
        if self.link.num_spans == 0 || !(self.link.span_length_km > 0.0) {
            return Err(invalid_config("link needs at least one span of positive length"));
        }
        if self.link.steps_per_span == 0 {
            return Err(invalid_config("steps_per_span must be at least 1"));
        }
        self.link.build(self.link.num_spans, false).validate()?;
        if self.stop.max_frames == 0 || !(self.stop.halfwidth_db > 0.0) {
            return Err(invalid_config(
                "stop criterion needs max_frames >= 1 and a positive half-width",
            ));
        }
        for &scheme in &self.schemes {
            self.equalizer_for(scheme).validate()?;
        }
        if self.sweep.axis == Axis::Distance {
            if !(self.sweep.search_step_db > 0.0) || self.sweep.search_max_evals == 0 {
                return Err(invalid_config(
                    "optimum search needs a positive step and at least one evaluation",
                ));
            }
            for &d in &self.sweep.values {
                self.spans_for_distance(d)?;
            }
        }
        let opc_spans = match self.sweep.axis {
            Axis::Power => vec![self.link.num_spans],
            Axis::Distance => self
                .sweep
                .values
                .iter()
                .map(|&d| self.spans_for_distance(d))
                .collect::<Result<_>>()?,
        };
        if self.schemes.iter().any(|s| s.uses_opc()) && opc_spans.iter().any(|n| n % 2 != 0) {
            return Err(invalid_config(
                "OPC schemes need an even number of spans at every sweep point",
            ));
        }
        Ok(())
    }

    /// Spans of a sweep distance, which must be a whole number of spans.
    pub fn spans_for_distance(&self, km: f64) -> Result<usize> {
        let n = km / self.link.span_length_km;
        if !(n >= 1.0) || (n - n.round()).abs() > 1e-9 {
            return Err(invalid_config(format!(
                "distance {km} km is not a positive multiple of the {} km span",
                self.link.span_length_km
            )));
        }
        Ok(n.round() as usize)
    }

    /// Shared equalizer settings with the scheme's overrides applied.
    pub fn equalizer_for(&self, scheme: Scheme) -> EqualizerConfig {
        let mut e = EqualizerConfig {
            samples_per_symbol: self.tx.samples_per_symbol,
            ..self.equalizer.clone()
        };
        if let Some(o) = self.overrides.get(&scheme) {
            if let Some(v) = o.window_symbols {
                e.window_symbols = v;
            }
            if let Some(v) = o.discard_per_side {
                e.discard_per_side = v;
            }
            if let Some(v) = o.dbp_steps_per_span {
                e.dbp_steps_per_span = v;
            }
            if let Some(v) = o.index_mode {
                e.index_mode = v;
            }
            if let Some(v) = o.engine {
                e.engine = v;
            }
            if let Some(v) = o.quadrature_oversampling {
                e.quadrature_oversampling = v;
            }
            if let Some(v) = o.recursive_renormalize {
                e.recursive_renormalize = v;
            }
        }
        e
    }
}
