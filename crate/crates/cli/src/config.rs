//! TOML run configuration. Every key is optional; angles are given in units
//! of π (keys ending in `_pi`).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use zeno_core::dynamics::{ProtocolSpec, PulseAngle, DEFAULT_DRIVE_RATIO, DEFAULT_SUB_SAMPLES};
use zeno_core::experiments::{EngineChoice, SweepSpec};
use zeno_core::measures::{BlochAngles, PairConvention, PairPreset};
use zeno_core::model::Frame;
use zeno_core::statespace::{DensityOperator, SpaceConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n_max: usize,
    pub rabi: f64,
    pub drive_ratio: f64,
    pub frame: Frame,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_max: SpaceConfig::default().n_max(),
            rabi: 1.0,
            drive_ratio: DEFAULT_DRIVE_RATIO,
            frame: Frame::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimEngine {
    #[default]
    Piecewise,
    Lindblad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub beta: f64,
    pub phi2_pi: f64,
    pub phi1_pi: f64,
    /// Overrides `M = round(2π/β)`.
    pub intervals: Option<usize>,
    pub sub_samples: usize,
    pub engine: SimEngine,
    /// Initial Fock state; ignored when the Bloch angles are set.
    pub initial_fock: usize,
    pub initial_theta_pi: Option<f64>,
    pub initial_phi_pi: Option<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            beta: 0.025,
            phi2_pi: 4.0,
            phi1_pi: 0.0,
            intervals: None,
            sub_samples: DEFAULT_SUB_SAMPLES,
            engine: SimEngine::Piecewise,
            initial_fock: 0,
            initial_theta_pi: None,
            initial_phi_pi: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPreset {
    /// 4 × 7 single pulse, reduced sampling.
    #[default]
    SmokeSingle,
    /// 4 × 7 × 5 two pulses, reduced sampling.
    SmokeTwo,
    /// 20 × 61 single pulse.
    FullSingle,
    /// 20 × 61 × 41 two pulses.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub preset: GridPreset,
    pub beta_grid: Option<Vec<f64>>,
    pub phi2_grid_pi: Option<Vec<f64>>,
    pub phi1_grid_pi: Option<Vec<f64>>,
    /// `ground`, `balanced`, `excited`, or `{ theta_pi, phi_pi }`.
    pub pair: Option<PairConfig>,
    pub engine: Option<EngineChoice>,
    pub sub_samples: Option<usize>,
    pub measure_blp: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            preset: GridPreset::default(),
            beta_grid: None,
            phi2_grid_pi: None,
            phi1_grid_pi: None,
            pair: None,
            engine: None,
            sub_samples: None,
            measure_blp: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairConfig {
    Preset(PairPreset),
    Angles { theta_pi: f64, phi_pi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub theta_points: usize,
    pub phi_points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { theta_points: 11, phi_points: 16 }
    }
}

fn scale(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x * PI).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn space(&self) -> Result<SpaceConfig> {
        Ok(SpaceConfig::new(self.model.n_max)?)
    }

    pub fn initial_state(&self) -> Result<DensityOperator> {
        let space = self.space()?;
        let p = &self.protocol;
        Ok(match (p.initial_theta_pi, p.initial_phi_pi) {
            (None, None) => DensityOperator::fock(&space, p.initial_fock)?,
            (theta, phi) => {
                let angles = BlochAngles::wrapped(theta.unwrap_or(0.0) * PI, phi.unwrap_or(0.0) * PI)?;
                DensityOperator::from_ket(&zeno_core::measures::bloch_state(angles, &space))
            }
        })
    }

    pub fn protocol_spec(&self) -> Result<ProtocolSpec> {
        let p = &self.protocol;
        if p.phi2_pi < 0.0 || p.phi1_pi < 0.0 {
            bail!("Rabi angles must be non-negative");
        }
        let mut pulses = vec![PulseAngle { level: 2, angle: p.phi2_pi * PI }];
        if p.phi1_pi != 0.0 {
            pulses.push(PulseAngle { level: 1, angle: p.phi1_pi * PI });
        }
        let mut spec = ProtocolSpec::new(p.beta, pulses).with_space(self.space()?)?;
        spec.rabi = self.model.rabi;
        spec.drive_ratio = self.model.drive_ratio;
        spec.frame = self.model.frame;
        spec.intervals = p.intervals;
        spec.sub_samples = p.sub_samples;
        spec.initial = self.initial_state()?;
        spec.schedule()?;
        Ok(spec)
    }

    pub fn pair(&self) -> Result<Option<PairConvention>> {
        Ok(match &self.sweep.pair {
            None => None,
            Some(PairConfig::Preset(p)) => Some(PairConvention::Preset(*p)),
            Some(PairConfig::Angles { theta_pi, phi_pi }) => {
                Some(PairConvention::Bloch(BlochAngles::wrapped(theta_pi * PI, phi_pi * PI)?))
            }
        })
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = &self.sweep;
        let mut spec = match s.preset {
            GridPreset::SmokeSingle => SweepSpec::smoke_single_pulse(),
            GridPreset::SmokeTwo => SweepSpec::smoke_two_pulse(),
            GridPreset::FullSingle => SweepSpec::default_single_pulse(),
            GridPreset::Full => SweepSpec::default_grid(),
        };
        if let Some(b) = &s.beta_grid {
            spec.beta_grid = b.clone();
        }
        if let Some(g) = &s.phi2_grid_pi {
            spec.phi2_grid = scale(g);
        }
        if let Some(g) = &s.phi1_grid_pi {
            spec.phi1_grid = scale(g);
        }
        if let Some(p) = self.pair()? {
            spec.pair = p;
        }
        if let Some(e) = s.engine {
            spec.engine = e;
        }
        if let Some(n) = s.sub_samples {
            spec.sub_samples = n;
        }
        spec.measure_blp = s.measure_blp;
        spec.n_max = self.model.n_max;
        spec.rabi = self.model.rabi;
        spec.drive_ratio = self.model.drive_ratio;
        spec.frame = self.model.frame;
        spec.validate()?;
        Ok(spec)
    }
}
