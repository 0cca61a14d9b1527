//! JSON reconstruction config.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::weights::ScheduleParams;
use crate::error::{Error, Result};
use crate::sms_operators::CaipiScheme;

/// A non-negative rational written `"num/den"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Fraction {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidArgument("fraction with zero denominator".into()));
        }
        Ok(Self { num, den })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse fraction {s:?}"));
        match s.split_once('/') {
            Some((n, d)) => Fraction::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => Fraction::new(s.trim().parse().map_err(|_| bad())?, 1),
        }
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Roger,
    Zerofill,
    Cgsense,
    L1wavelet,
    Rograppa,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// How the sampler re-noises the corrected estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerVariant {
    /// Fresh Gaussian noise every step.
    #[default]
    PaperRenoise,
    /// Reuse the implied noise estimate (DDIM with zero stochasticity).
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    #[default]
    Shrinkage,
    Cnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub kind: PriorKind,
    pub wavelet_levels: usize,
    pub threshold_scale: f64,
    pub weights: Option<PathBuf>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { kind: PriorKind::Shrinkage, wavelet_levels: 3, threshold_scale: 1.5, weights: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrappaConfig {
    pub source_lines: usize,
    pub orth_taps: usize,
    pub tikhonov: f64,
}

impl Default for GrappaConfig {
    fn default() -> Self {
        Self { source_lines: 4, orth_taps: 5, tikhonov: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub l1_lambda: f64,
    pub l1_iters: usize,
    pub step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { cg_iters: 50, cg_tol: 1e-6, l1_lambda: 1e-3, l1_iters: 100, step: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputPaths {
    pub measurement: Option<PathBuf>,
    pub maps: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

fn default_lambda() -> f64 {
    2.0
}
fn default_lfe() -> usize {
    8
}
fn default_steps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub mb: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caipi_shifts: Option<Vec<Fraction>>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lfe")]
    pub lfe_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub variant: SamplerVariant,
    #[serde(default)]
    pub schedule: ScheduleParams,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub grappa: GrappaConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub inputs: InputPaths,
}

impl ReconConfig {
    pub fn new(mb: usize, r: usize) -> Self {
        Self {
            mb,
            r,
            caipi_shifts: None,
            lambda: default_lambda(),
            lfe_size: default_lfe(),
            steps: default_steps(),
            seed: 0,
            method: Method::default(),
            variant: SamplerVariant::default(),
            schedule: ScheduleParams::default(),
            prior: PriorConfig::default(),
            grappa: GrappaConfig::default(),
            solver: SolverConfig::default(),
            inputs: InputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.mb < 1 {
            return bad("mb must be >= 1".into());
        }
        if self.r < 1 {
            return bad("r must be >= 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if self.steps < 1 {
            return bad("steps must be >= 1".into());
        }
        if self.steps > self.schedule.timesteps {
            return bad(format!("steps {} exceed schedule length {}", self.steps, self.schedule.timesteps));
        }
        if let Some(shifts) = &self.caipi_shifts {
            if shifts.len() != self.mb {
                return bad(format!("caipi_shifts has {} entries for mb={}", shifts.len(), self.mb));
            }
            CaipiScheme::new(shifts.iter().map(Fraction::value).collect())?;
        }
        Ok(())
    }

    /// Explicit shifts if configured, otherwise the pixel-aligned FOV/MB
    /// interleave for phase-encode width `w`.
    pub fn caipi_scheme(&self, w: usize) -> Result<CaipiScheme> {
        match &self.caipi_shifts {
            Some(s) => CaipiScheme::new(s.iter().map(Fraction::value).collect()),
            None => Ok(CaipiScheme::interleaved_pixel_aligned(self.mb, w)),
        }
    }

    /// Checks settings that depend on the matrix size.
    pub fn validate_for_matrix(&self, h: usize, w: usize) -> Result<()> {
        let limit = (self.mb * h).min(w);
        if self.lfe_size > limit {
            return Err(Error::InvalidArgument(format!("lfe_size {} exceeds matrix extent {limit}", self.lfe_size)));
        }
        Ok(())
    }
}
