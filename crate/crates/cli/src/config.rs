//! Run configuration: a TOML file with angles in degrees and
//! reflectivities/losses as fractions, plus the two built-in presets.
//!
//! Every key is optional and defaults to the ideal receiver; unknown keys
//! are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use qsd_core::calibration::default_calibration;
use qsd_core::montecarlo::{PerturbationKind, UncertaintyModel};
use qsd_core::optics::{BSParams, ReceiverParams, TimingConfig, VBGParams, WaveplateSet};
use qsd_core::receiver::{canonical_ensemble, StateEnsemble};

/// Measured hardware values baked into the `--paper` preset.
pub mod paper_values {
    pub const R_H: f64 = 0.26;
    pub const R_V: f64 = 0.29;
    pub const LOSS_BS: f64 = 0.21;
    pub const LOSS_LOOP: f64 = 0.11;
    pub const EXT_H: f64 = 0.0125;
    pub const EXT_V: f64 = 0.0055;
    pub const N_PASSES: usize = 4;
    pub const L_LOOP1_M: f64 = 0.9;
    pub const L_LOOP2_M: f64 = 0.45;
    pub const REP_RATE_HZ: f64 = 80e6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Ideal,
    Paper,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub receiver: ReceiverParams,
    pub timing: TimingConfig,
    pub uncertainty: UncertaintyModel,
    pub ensemble_kind: EnsembleKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    /// The eight canonical polarization-frequency states.
    Canonical,
    /// The four undelayed-frequency states only.
    FourOmega1,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let receiver = match p {
            Preset::Ideal => default_calibration(),
            Preset::Paper => ReceiverParams {
                bs: BSParams::new(
                    paper_values::R_H,
                    paper_values::R_V,
                    paper_values::LOSS_BS,
                    paper_values::LOSS_LOOP,
                ),
                vbg: VBGParams::new(paper_values::EXT_H, paper_values::EXT_V),
                ..default_calibration()
            },
        };
        Self {
            receiver,
            timing: TimingConfig {
                l_loop1: paper_values::L_LOOP1_M,
                l_loop2: paper_values::L_LOOP2_M,
                rep_rate: paper_values::REP_RATE_HZ,
            },
            uncertainty: UncertaintyModel::standard(1000, 7),
            ensemble_kind: EnsembleKind::Canonical,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        file.resolve()
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn ensemble(&self) -> StateEnsemble {
        let full = canonical_ensemble();
        match self.ensemble_kind {
            EnsembleKind::Canonical => full,
            EnsembleKind::FourOmega1 => StateEnsemble::uniform(full.states[..4].to_vec()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    receiver: Option<ReceiverSection>,
    bs: Option<BsSection>,
    vbg: Option<VbgSection>,
    timing: Option<TimingSection>,
    montecarlo: Option<McSection>,
    ensemble: Option<EnsembleSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverSection {
    n_passes: Option<usize>,
    prep_deg: Option<[f64; 3]>,
    loop_deg: Option<[f64; 3]>,
    phase1_deg: Option<f64>,
    phase2_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsSection {
    r_h: Option<f64>,
    r_v: Option<f64>,
    loss_bs: Option<f64>,
    loss_loop: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VbgSection {
    ext_h: Option<f64>,
    ext_v: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingSection {
    l_loop1_m: Option<f64>,
    l_loop2_m: Option<f64>,
    rep_rate_hz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct McSection {
    sigma_angle_deg: Option<f64>,
    sigma_r: Option<f64>,
    n_samples: Option<usize>,
    seed: Option<u64>,
    distribution: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleSection {
    kind: Option<String>,
}

impl ConfigFile {
    fn resolve(self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::preset(Preset::Ideal);

        if let Some(r) = self.receiver {
            if let Some(n) = r.n_passes {
                cfg.receiver.n_passes = n;
            }
            if let Some(a) = r.prep_deg {
                cfg.receiver.prep_set =
                    WaveplateSet::new(a[0].to_radians(), a[1].to_radians(), a[2].to_radians());
            }
            if let Some(a) = r.loop_deg {
                cfg.receiver.loop_set =
                    WaveplateSet::new(a[0].to_radians(), a[1].to_radians(), a[2].to_radians());
            }
            if let Some(p) = r.phase1_deg {
                cfg.receiver.phase1 = p.to_radians();
            }
            if let Some(p) = r.phase2_deg {
                cfg.receiver.phase2 = p.to_radians();
            }
        }
        if let Some(b) = self.bs {
            if let Some(v) = b.r_h {
                cfg.receiver.bs.r_h = v;
            }
            if let Some(v) = b.r_v {
                cfg.receiver.bs.r_v = v;
            }
            if let Some(v) = b.loss_bs {
                cfg.receiver.bs.loss_bs = v;
            }
            if let Some(v) = b.loss_loop {
                cfg.receiver.bs.loss_loop = v;
            }
        }
        if let Some(v) = self.vbg {
            if let Some(x) = v.ext_h {
                cfg.receiver.vbg.ext_h = x;
            }
            if let Some(x) = v.ext_v {
                cfg.receiver.vbg.ext_v = x;
            }
        }
        if let Some(t) = self.timing {
            if let Some(v) = t.l_loop1_m {
                cfg.timing.l_loop1 = v;
            }
            if let Some(v) = t.l_loop2_m {
                cfg.timing.l_loop2 = v;
            }
            if let Some(v) = t.rep_rate_hz {
                cfg.timing.rep_rate = v;
            }
        }
        if let Some(m) = self.montecarlo {
            if let Some(v) = m.sigma_angle_deg {
                cfg.uncertainty.sigma_angle = v.to_radians();
            }
            if let Some(v) = m.sigma_r {
                cfg.uncertainty.sigma_r = v;
            }
            if let Some(v) = m.n_samples {
                cfg.uncertainty.n_samples = v;
            }
            if let Some(v) = m.seed {
                cfg.uncertainty.seed = v;
            }
            if let Some(d) = m.distribution {
                cfg.uncertainty.distribution = match d.as_str() {
                    "gaussian" => PerturbationKind::Gaussian,
                    "uniform" => PerturbationKind::Uniform,
                    other => return Err(ConfigError::BadValue(format!("distribution: {other}"))),
                };
            }
        }
        if let Some(e) = self.ensemble {
            if let Some(k) = e.kind {
                cfg.ensemble_kind = match k.as_str() {
                    "canonical" => EnsembleKind::Canonical,
                    "four_omega1" => EnsembleKind::FourOmega1,
                    other => return Err(ConfigError::BadValue(format!("ensemble kind: {other}"))),
                };
            }
        }

        cfg.receiver
            .validate()
            .map_err(|e| ConfigError::BadValue(e.to_string()))?;
        cfg.timing
            .validate()
            .map_err(|e| ConfigError::BadValue(e.to_string()))?;
        Ok(cfg)
    }
}

/// Receiver parameters in external units (degrees), for JSON reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamsDto {
    pub n_passes: usize,
    pub prep_deg: [f64; 3],
    pub loop_deg: [f64; 3],
    pub phase1_deg: f64,
    pub phase2_deg: f64,
    pub r_h: f64,
    pub r_v: f64,
    pub loss_bs: f64,
    pub loss_loop: f64,
    pub ext_h: f64,
    pub ext_v: f64,
}

impl From<&ReceiverParams> for ParamsDto {
    fn from(p: &ReceiverParams) -> Self {
        Self {
            n_passes: p.n_passes,
            prep_deg: [
                p.prep_set.q1.to_degrees(),
                p.prep_set.h.to_degrees(),
                p.prep_set.q2.to_degrees(),
            ],
            loop_deg: [
                p.loop_set.q1.to_degrees(),
                p.loop_set.h.to_degrees(),
                p.loop_set.q2.to_degrees(),
            ],
            phase1_deg: p.phase1.to_degrees(),
            phase2_deg: p.phase2.to_degrees(),
            r_h: p.bs.r_h,
            r_v: p.bs.r_v,
            loss_bs: p.bs.loss_bs,
            loss_loop: p.bs.loss_loop,
            ext_h: p.vbg.ext_h,
            ext_v: p.vbg.ext_v,
        }
    }
}

impl ParamsDto {
    pub fn to_params(&self) -> ReceiverParams {
        ReceiverParams {
            prep_set: WaveplateSet::new(
                self.prep_deg[0].to_radians(),
                self.prep_deg[1].to_radians(),
                self.prep_deg[2].to_radians(),
            ),
            loop_set: WaveplateSet::new(
                self.loop_deg[0].to_radians(),
                self.loop_deg[1].to_radians(),
                self.loop_deg[2].to_radians(),
            ),
            phase1: self.phase1_deg.to_radians(),
            phase2: self.phase2_deg.to_radians(),
            bs: BSParams::new(self.r_h, self.r_v, self.loss_bs, self.loss_loop),
            vbg: VBGParams::new(self.ext_h, self.ext_v),
            n_passes: self.n_passes,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config value: {0}")]
    BadValue(String),
}
