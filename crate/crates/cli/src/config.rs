// SPDX-License-Identifier: Apache-2.0

//! Scenario files: TOML with sections `[model]`, `[grid]`, `[ensemble]`,
//! `[analysis]` and `[output]`. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikes::discrete::DiscreteModelParams;
use spikes::qubit::{BlochVector, DensityMatrix, OmegaMode, QubitParams, SmeScheme};
use spikes::sde::{DriveMode, SdeParams};
use spikes::{DetectionThresholds, EnsembleSpec, RectDomain, StreamSpec, TimeGrid};

/// A scenario that failed to parse or validate.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    DiscreteToy(DiscreteConfig),
    ClassicalSde(SdeConfig),
    Qubit(QubitConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DiscreteToy(_) => "discrete-toy",
            Self::ClassicalSde(_) => "classical-sde",
            Self::Qubit(_) => "qubit",
        }
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    pub epsilon: f64,
    pub lambda: f64,
    pub n_steps: usize,
    #[serde(rename = "R0", default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<u8>,
    #[serde(rename = "Q0", default = "half")]
    pub q0: f64,
}

fn physical() -> DriveMode {
    DriveMode::Physical
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub lambda_tilde: f64,
    pub gamma: f64,
    #[serde(rename = "Q0", default = "half")]
    pub q0: f64,
    #[serde(default = "physical")]
    pub mode: DriveMode,
    #[serde(rename = "R0", default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<u8>,
    /// Scheduled flip times of `R`; the telegraph is random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flips: Option<Vec<f64>>,
}

fn scaled() -> OmegaMode {
    OmegaMode::Scaled
}

fn plus_z() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitConfig {
    pub gamma: f64,
    pub omega: f64,
    #[serde(default = "scaled")]
    pub omega_mode: OmegaMode,
    /// Initial Bloch vector `(x, y, z)`.
    #[serde(default = "plus_z")]
    pub rho0: [f64; 3],
    #[serde(default)]
    pub scheme: SmeScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "one")]
    pub n_trajectories: u64,
    #[serde(default)]
    pub base_stream_id: u64,
    #[serde(default)]
    pub master_seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n_trajectories: 1, base_stream_id: 0, master_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    FilterOracle,
    SmootherOracle,
    Spikeless,
    MeanLaw,
    Shape,
    Prefactor,
    MaxLaw,
    Poisson,
    ScaleInvariance,
    WrongPrediction,
    JumpRate,
    LindbladMean,
    Purity,
}

impl TestKind {
    pub fn name(&self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }

    fn kinds(&self) -> &'static [&'static str] {
        match self {
            Self::FilterOracle | Self::SmootherOracle | Self::Spikeless => &["discrete-toy"],
            Self::MeanLaw | Self::WrongPrediction => &["classical-sde"],
            Self::Shape | Self::Prefactor | Self::MaxLaw | Self::Poisson | Self::ScaleInvariance => {
                &["classical-sde", "qubit"]
            }
            Self::JumpRate | Self::LindbladMean | Self::Purity => &["qubit"],
        }
    }
}

fn default_bands() -> Vec<[f64; 2]> {
    vec![[0.1, 0.2], [0.2, 0.4], [0.4, 0.8]]
}

fn tenth() -> f64 {
    0.1
}

fn hundred() -> usize {
    100
}

fn twelve() -> usize {
    12
}

fn two() -> f64 {
    2.0
}

fn settle() -> f64 {
    1e-3
}

/// Second run at another `omega` to check the `omega^2` scaling of the jump rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub omega: f64,
    /// Trajectories pooled at the scenario's `omega`.
    pub reference_trajectories: u64,
    /// Trajectories pooled at the scaled `omega`.
    pub scaled_trajectories: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub tests: Vec<TestKind>,
    #[serde(default)]
    pub thresholds: DetectionThresholds,
    /// Height bands of the shape test.
    #[serde(default = "default_bands")]
    pub bands: Vec<[f64; 2]>,
    /// `[t_lo, t_hi, Q_lo, Q_hi]` on the plateau clock, for the Poisson test.
    #[serde(default)]
    pub domains: Vec<[f64; 4]>,
    /// Intensity prefactor for the Poisson test; `lambda_tilde` (or `omega^2`) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<f64>,
    /// Lower cut of the max-law and prefactor fits.
    #[serde(default = "tenth")]
    pub q0: f64,
    /// Plateau whose events are analysed.
    #[serde(default)]
    pub plateau: u8,
    /// Time at which means are compared (mean-law, lindblad-mean); the horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_check: Option<f64>,
    /// Number of equally spaced checkpoints of the purity test.
    #[serde(default = "ten")]
    pub checkpoints: usize,
    /// Level of the spikelessness comparison.
    #[serde(default = "half")]
    pub level: f64,
    /// Scale-invariance: domain `[t_lo, t_hi, Q_lo, Q_hi]` and factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_domain: Option<[f64; 4]>,
    #[serde(default = "two")]
    pub scale_factor: f64,
    /// Oracle tests: number of random instances and chain length.
    #[serde(default = "hundred")]
    pub instances: usize,
    #[serde(default = "twelve")]
    pub instance_steps: usize,
    /// Wrong-prediction settle tolerance.
    #[serde(default = "settle")]
    pub settle_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingConfig>,
    /// Failing tests make the run fail.
    #[serde(default)]
    pub gate: bool,
}

fn ten() -> usize {
    10
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

fn budget() -> u64 {
    20_000_000_000
}

fn stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "formats")]
    pub formats: Vec<Format>,
    /// Largest number of integration steps a run may take.
    #[serde(default = "budget")]
    pub budget: u64,
    /// Number of trajectories written to files, from the first stream on.
    #[serde(default = "one")]
    pub trajectory_files: u64,
    /// Keep every `stride`-th grid point in trajectory files.
    #[serde(default = "stride")]
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl Scenario {
    /// Parses TOML; the error names the offending key or line and column.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Self = toml::from_str(text).map_err(|e| ConfigError(format!("config error: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    fn grid_config(&self) -> Result<GridConfig, ConfigError> {
        self.grid.ok_or_else(|| ConfigError(format!("[grid] with dt and T is required for kind {}", self.model.kind())))
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            master_seed: self.ensemble.master_seed,
            base_stream_id: self.ensemble.base_stream_id,
            n_trajectories: self.ensemble.n_trajectories,
        }
    }

    pub fn has(&self, t: TestKind) -> bool {
        self.analysis.tests.contains(&t)
    }

    pub fn discrete_params(&self, seed: StreamSpec) -> Result<DiscreteModelParams, ConfigError> {
        let ModelConfig::DiscreteToy(c) = &self.model else {
            return Err(ConfigError("not a discrete-toy scenario".into()));
        };
        let mut p = DiscreteModelParams::new(c.epsilon, c.lambda, c.n_steps, seed);
        p.r0 = c.r0;
        p.q0 = c.q0;
        Ok(p)
    }

    pub fn sde_params(&self, seed: StreamSpec) -> Result<SdeParams, ConfigError> {
        let ModelConfig::ClassicalSde(c) = &self.model else {
            return Err(ConfigError("not a classical-sde scenario".into()));
        };
        let g = self.grid_config()?;
        Ok(SdeParams {
            lambda_tilde: c.lambda_tilde,
            gamma: c.gamma,
            dt: g.dt,
            horizon: g.horizon,
            q0: c.q0,
            seed,
            mode: c.mode,
            r0: c.r0,
        })
    }

    pub fn qubit_params(&self, seed: StreamSpec) -> Result<QubitParams, ConfigError> {
        let ModelConfig::Qubit(c) = &self.model else {
            return Err(ConfigError("not a qubit scenario".into()));
        };
        let g = self.grid_config()?;
        let [x, y, z] = c.rho0;
        let rho0 = DensityMatrix::from_bloch(BlochVector::new(x, y, z))
            .map_err(|e| ConfigError(format!("model.rho0: {e}")))?;
        Ok(QubitParams {
            gamma: c.gamma,
            omega: c.omega,
            omega_mode: c.omega_mode,
            dt: g.dt,
            horizon: g.horizon,
            rho0,
            seed,
            scheme: c.scheme,
        })
    }

    /// Integration grid of one trajectory; `None` for the discrete model.
    pub fn time_grid(&self) -> Result<Option<TimeGrid>, ConfigError> {
        match &self.model {
            ModelConfig::DiscreteToy(_) => Ok(None),
            _ => {
                let g = self.grid_config()?;
                TimeGrid::covering(g.horizon, g.dt).map(Some).map_err(|e| ConfigError(format!("grid: {e}")))
            }
        }
    }

    /// Jump-rate parameter the spike intensity is compared with.
    pub fn nominal_rate(&self) -> f64 {
        match &self.model {
            ModelConfig::DiscreteToy(c) => c.lambda,
            ModelConfig::ClassicalSde(c) => c.lambda_tilde,
            ModelConfig::Qubit(c) => c.omega * c.omega,
        }
    }

    pub fn domains(&self) -> Result<Vec<RectDomain>, ConfigError> {
        self.analysis
            .domains
            .iter()
            .map(|&[a, b, c, d]| RectDomain::new(a, b, c, d).map_err(|e| ConfigError(format!("analysis.domains: {e}"))))
            .collect()
    }

    /// Checks every referenced parameter against its module's invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let seed = StreamSpec::new(self.ensemble.master_seed, self.ensemble.base_stream_id);
        let wrap = |what: &str, e: spikes::Error| ConfigError(format!("{what}: {e}"));
        match &self.model {
            ModelConfig::DiscreteToy(_) => {
                if self.grid.is_some() {
                    return Err(ConfigError("[grid] is not used by kind discrete-toy; set model.n_steps".into()));
                }
                self.discrete_params(seed)?.validate().map_err(|e| wrap("model", e))?;
            }
            ModelConfig::ClassicalSde(c) => {
                let p = self.sde_params(seed)?;
                p.validate().map_err(|e| wrap("model", e))?;
                if let Some(f) = &c.flips {
                    if f.windows(2).any(|w| w[0] >= w[1]) || f.iter().any(|&t| t.is_nan() || t <= 0.0) {
                        return Err(ConfigError("model.flips must be positive and increasing".into()));
                    }
                    if c.mode != DriveMode::Physical {
                        return Err(ConfigError("model.flips needs mode = \"physical\"".into()));
                    }
                }
            }
            ModelConfig::Qubit(_) => {
                self.qubit_params(seed)?.validate().map_err(|e| wrap("model", e))?;
            }
        }
        if self.ensemble.n_trajectories == 0 {
            return Err(ConfigError("ensemble.n_trajectories must be >= 1".into()));
        }
        let a = &self.analysis;
        a.thresholds.validate().map_err(|e| wrap("analysis.thresholds", e))?;
        let kind = self.model.kind();
        for t in &a.tests {
            if !t.kinds().contains(&kind) {
                return Err(ConfigError(format!("analysis.tests: {} does not apply to kind {kind}", t.name())));
            }
        }
        for &[lo, hi] in &a.bands {
            RectDomain::new(0.0, 1.0, lo, hi).map_err(|e| wrap("analysis.bands", e))?;
        }
        self.domains()?;
        if a.plateau > 1 {
            return Err(ConfigError("analysis.plateau must be 0 or 1".into()));
        }
        if !(a.q0 > 0.0 && a.q0 < 1.0) {
            return Err(ConfigError("analysis.q0 must lie in (0, 1)".into()));
        }
        if a.checkpoints == 0 {
            return Err(ConfigError("analysis.checkpoints must be >= 1".into()));
        }
        if self.has(TestKind::WrongPrediction) {
            match &self.model {
                ModelConfig::ClassicalSde(SdeConfig { flips: Some(f), .. }) if f.len() >= 2 => {}
                _ => return Err(ConfigError("wrong-prediction needs model.flips = [t1, t2]".into())),
            }
        }
        if self.has(TestKind::ScaleInvariance) && a.scale_domain.is_none() {
            return Err(ConfigError("scale-invariance needs analysis.scale_domain".into()));
        }
        if self.output.stride == 0 {
            return Err(ConfigError("output.stride must be >= 1".into()));
        }
        if let Some(dir) = &self.output.directory {
            if dir.exists() && !dir.is_dir() {
                return Err(ConfigError(format!("output.directory {} is not a directory", dir.display())));
            }
        }
        Ok(())
    }
}
