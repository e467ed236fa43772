//! Run configuration. Every section is optional and starts from a preset;
//! keys carry their units in the name.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stoken::adversary::ForgingStrategy;
use stoken::measurement::{MeasurementPolicy, Scheme};
use stoken::netsim::TimingTopology;
use stoken::presets;
use stoken::security::{ConfidenceParams, SchemeParams};
use stoken::source::{BiasSign, SourceParams};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Experiment,
    Ideal,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default)]
    pub preset: Preset,
    pub beta_pb: Option<f64>,
    pub beta_ps: Option<f64>,
    pub theta_deg: Option<f64>,
    pub p_theta: Option<f64>,
    pub p_noqub: Option<f64>,
    pub error_rates: Option<[f64; 4]>,
    pub bias_sign_pb: Option<BiasSign>,
    pub bias_sign_ps: Option<BiasSign>,
}

impl SourceSection {
    pub fn resolve(&self) -> Result<SourceParams, CliError> {
        let base = match self.preset {
            Preset::Experiment => presets::experiment_source(),
            Preset::Ideal => SourceParams::ideal(),
        };
        let s = SourceParams {
            beta_pb: self.beta_pb.unwrap_or(base.beta_pb),
            beta_ps: self.beta_ps.unwrap_or(base.beta_ps),
            theta: self.theta_deg.map(f64::to_radians).unwrap_or(base.theta),
            p_theta: self.p_theta.unwrap_or(base.p_theta),
            p_noqub: self.p_noqub.unwrap_or(base.p_noqub),
            error_rates: self.error_rates.unwrap_or(base.error_rates),
            bias_sign_pb: self.bias_sign_pb.unwrap_or(base.bias_sign_pb),
            bias_sign_ps: self.bias_sign_ps.unwrap_or(base.bias_sign_ps),
        };
        s.validate()
            .map_err(|e| CliError::Config(format!("source: {e}")))?;
        Ok(s)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    #[serde(default)]
    pub preset: Preset,
    pub scheme: Option<Scheme>,
    pub beta_e: Option<f64>,
    pub bias_sign_e: Option<BiasSign>,
    pub report_losses: Option<bool>,
    pub gamma_det: Option<f64>,
    pub p_no_click: Option<f64>,
    pub p_double_click: Option<f64>,
}

impl MeasurementSection {
    pub fn resolve(&self) -> Result<MeasurementPolicy, CliError> {
        let base = match self.preset {
            Preset::Experiment => presets::experiment_policy(),
            Preset::Ideal => MeasurementPolicy {
                p_no_click: 0.0,
                p_double_click: 0.0,
                ..MeasurementPolicy::default()
            },
        };
        let p = MeasurementPolicy {
            scheme: self.scheme.unwrap_or(base.scheme),
            beta_e: self.beta_e.unwrap_or(base.beta_e),
            bias_sign_e: self.bias_sign_e.unwrap_or(base.bias_sign_e),
            report_losses: self.report_losses.unwrap_or(base.report_losses),
            gamma_det: self.gamma_det.unwrap_or(base.gamma_det),
            p_no_click: self.p_no_click.unwrap_or(base.p_no_click),
            p_double_click: self.p_double_click.unwrap_or(base.p_double_click),
        };
        p.validate()
            .map_err(|e| CliError::Config(format!("measurement: {e}")))?;
        Ok(p)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(default)]
    pub preset: Preset,
    pub n_pulses: Option<u64>,
    pub n_kept: Option<u64>,
    pub gamma_err: Option<f64>,
    pub gamma_det: Option<f64>,
    pub nu_cor: Option<f64>,
    pub nu_unf: Option<f64>,
    pub p_det: Option<f64>,
    pub e_max: Option<f64>,
    pub beta_pb: Option<f64>,
    pub beta_ps: Option<f64>,
    pub beta_e: Option<f64>,
    pub p_noqub: Option<f64>,
    pub p_theta: Option<f64>,
    pub theta_deg: Option<f64>,
    /// Pins P_bound instead of running the optimizer.
    pub p_bound: Option<f64>,
    pub pbound_starts: Option<usize>,
    pub p_wrong: Option<f64>,
    pub k_cor: Option<u32>,
    pub k_unf: Option<u32>,
    pub multi_node_m: Option<u32>,
    pub simulate_trials: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ResolvedScheme {
    pub params: SchemeParams,
    pub confidence: ConfidenceParams,
    pub p_bound: Option<f64>,
    pub pbound_starts: Option<usize>,
    pub multi_node_m: Option<u32>,
    pub simulate_trials: usize,
}

impl SchemeSection {
    pub fn resolve(&self) -> Result<ResolvedScheme, CliError> {
        let mut base = SchemeParams::experiment();
        let mut pinned = None;
        if self.preset == Preset::Ideal {
            base.beta_pb = 0.0;
            base.beta_ps = 0.0;
            base.beta_e = 0.0;
            base.p_noqub = 0.0;
            base.p_theta = 0.0;
            base.theta = 0.0;
        } else {
            pinned = Some(presets::P_BOUND);
        }
        let n_pulses = self.n_pulses.unwrap_or(base.n_pulses);
        let params = SchemeParams {
            n_pulses,
            n_kept: self.n_kept.unwrap_or(if self.n_pulses.is_some() {
                n_pulses
            } else {
                base.n_kept
            }),
            gamma_err: self.gamma_err.unwrap_or(base.gamma_err),
            gamma_det: self.gamma_det.unwrap_or(base.gamma_det),
            nu_cor: self.nu_cor.unwrap_or(base.nu_cor),
            nu_unf: self.nu_unf.unwrap_or(base.nu_unf),
            p_det: self.p_det.unwrap_or(base.p_det),
            e_max: self.e_max.unwrap_or(base.e_max),
            beta_pb: self.beta_pb.unwrap_or(base.beta_pb),
            beta_ps: self.beta_ps.unwrap_or(base.beta_ps),
            beta_e: self.beta_e.unwrap_or(base.beta_e),
            p_noqub: self.p_noqub.unwrap_or(base.p_noqub),
            p_theta: self.p_theta.unwrap_or(base.p_theta),
            theta: self.theta_deg.map(f64::to_radians).unwrap_or(base.theta),
        };
        if params.n_pulses == 0 {
            return Err(CliError::Config("scheme: n_pulses must be positive".into()));
        }
        // Imperfection overrides invalidate the experiment's pinned value.
        let overridden =
            self.beta_pb.is_some() || self.beta_ps.is_some() || self.theta_deg.is_some();
        let p_bound = self.p_bound.or(if overridden { None } else { pinned });
        if let Some(p) = p_bound {
            if !(p > 0.0 && p <= 1.0) {
                return Err(CliError::Config(format!(
                    "scheme: p_bound = {p} outside (0, 1]"
                )));
            }
        }
        let d = ConfidenceParams::default();
        Ok(ResolvedScheme {
            params,
            confidence: ConfidenceParams {
                p_wrong: self.p_wrong.unwrap_or(d.p_wrong),
                k_cor: self.k_cor.unwrap_or(d.k_cor),
                k_unf: self.k_unf.unwrap_or(d.k_unf),
            },
            p_bound,
            pbound_starts: self.pbound_starts,
            multi_node_m: self.multi_node_m,
            simulate_trials: self.simulate_trials.unwrap_or(20),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyPreset {
    Jinan,
    YiyuanMazhan,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub preset: Option<TopologyPreset>,
    pub l_fibre_m: Option<f64>,
    pub d_direct_m: Option<f64>,
    pub c_fibre_m_per_s: Option<f64>,
    pub c_vac_m_per_s: Option<f64>,
    pub dt_proc_ns: Option<f64>,
    pub dt_begin_gap_ns: Option<f64>,
}

impl TopologySection {
    pub fn resolve(&self) -> Result<TimingTopology, CliError> {
        let base = match self.preset {
            Some(TopologyPreset::YiyuanMazhan) => TimingTopology::yiyuan_mazhan(),
            _ => TimingTopology::jinan(),
        };
        let t = TimingTopology {
            l_fibre: self.l_fibre_m.unwrap_or(base.l_fibre),
            d_direct: self.d_direct_m.unwrap_or(base.d_direct),
            c_fibre: self.c_fibre_m_per_s.unwrap_or(base.c_fibre),
            c_vac: self.c_vac_m_per_s.unwrap_or(base.c_vac),
            dt_proc: self.dt_proc_ns.map(|x| x * 1e-9).unwrap_or(base.dt_proc),
            dt_begin_gap: self
                .dt_begin_gap_ns
                .map(|x| x * 1e-9)
                .unwrap_or(base.dt_begin_gap),
        };
        t.validate()
            .map_err(|e| CliError::Config(format!("topology: {e}")))?;
        Ok(t)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationInputs {
    /// Record files, relative to the config file's directory.
    #[serde(default)]
    pub paths: Vec<PathBuf>,
}

fn ideal_source() -> SourceSection {
    SourceSection {
        preset: Preset::Ideal,
        ..SourceSection::default()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    #[serde(default = "default_forge_n")]
    pub n_pulses: usize,
    #[serde(default = "default_gammas")]
    pub gamma_errs: Vec<f64>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<ForgingStrategy>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// ν_unf used when evaluating the bound at the experiment's scale.
    #[serde(default = "default_forge_nu")]
    pub nu_unf: f64,
    #[serde(default = "ideal_source")]
    pub source: SourceSection,
}

fn default_forge_n() -> usize {
    200
}
fn default_gammas() -> Vec<f64> {
    vec![0.06, 0.094, 0.12]
}
fn default_strategies() -> Vec<ForgingStrategy> {
    vec![
        ForgingStrategy::PerPulseMaxConfidence,
        ForgingStrategy::RandomGuess,
        ForgingStrategy::MeasureOneBasis { basis: None },
    ]
}
fn default_trials() -> u64 {
    10_000
}
fn default_forge_nu() -> f64 {
    1e-9
}

impl Default for AdversarySection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    pub topology: Option<TopologySection>,
    #[serde(default)]
    pub estimation_inputs: EstimationInputs,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory the config was loaded from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves every section so that bad values fail at load time.
    pub fn validate(&self) -> Result<(), CliError> {
        self.source.resolve()?;
        self.measurement.resolve()?;
        self.scheme.resolve()?;
        if let Some(t) = &self.topology {
            t.resolve()?;
        }
        self.adversary.source.resolve()?;
        if self.adversary.n_pulses == 0 {
            return Err(CliError::Config(
                "adversary: n_pulses must be positive".into(),
            ));
        }
        if let Some(g) = self
            .adversary
            .gamma_errs
            .iter()
            .find(|g| !(0.0..=1.0).contains(*g))
        {
            return Err(CliError::Config(format!(
                "adversary: gamma_err {g} outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn estimation_paths(&self) -> Vec<PathBuf> {
        self.estimation_inputs
            .paths
            .iter()
            .map(|p| self.base_dir.join(p))
            .collect()
    }
}
