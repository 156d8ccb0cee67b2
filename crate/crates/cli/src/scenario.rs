//! The TOML scenario file and its translation into simulator configs.

use std::path::{Path, PathBuf};

use htlcflood_core::attack::{BackgroundTraffic, PreimageRelease};
use htlcflood_core::channel::{FeeBumping, LinearDelta};
use htlcflood_core::fees::{FeerateSeries, SyntheticBlocksSpec, SyntheticSeriesSpec};
use htlcflood_core::mitigation::MitigationPolicy;
use htlcflood_core::{
    AttackConfig, Feerate, FeerateStrategy, Height, NodeProfile, ProfileKind, Sat, Weight,
    WeightSchedule, DEFAULT_BLOCK_MAX_WEIGHT,
};
use serde::{Deserialize, Serialize};

use crate::{ScenarioError, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Attack,
    Sweep,
    FeeAnalysis,
    MitigationMatrix,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Attack => "attack",
            ScenarioKind::Sweep => "sweep",
            ScenarioKind::FeeAnalysis => "fee-analysis",
            ScenarioKind::MitigationMatrix => "mitigation-matrix",
        }
    }
}

fn default_blockmaxweight() -> Weight {
    DEFAULT_BLOCK_MAX_WEIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kind: ScenarioKind,
    /// Mandatory so that every run can be reproduced.
    pub seed: u64,
    #[serde(default = "default_blockmaxweight")]
    pub blockmaxweight: Weight,
    #[serde(default)]
    pub weights: WeightSchedule,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<MitigationPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fee_series: Option<FeeSeriesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fee_analysis: Option<FeeAnalysisSection>,
}

/// Profile fields that replace the named implementation's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOverrides {
    pub max_accepted_htlcs: Option<u32>,
    pub commitment_broadcast_delta: Option<u32>,
    pub htlc_expiry_delta: Option<u32>,
    pub wait_for_commit_confirmation: Option<bool>,
    pub to_self_delay: Option<u32>,
    pub dynamic_delta: Option<LinearDelta>,
    pub non_replaceable_htlc_success: Option<bool>,
    pub fee_bumping: Option<FeeBumping>,
}

impl ProfileOverrides {
    fn apply(&self, mut p: NodeProfile) -> NodeProfile {
        if let Some(v) = self.max_accepted_htlcs {
            p.max_accepted_htlcs = v;
        }
        if let Some(v) = self.commitment_broadcast_delta {
            p.commitment_broadcast_delta = v;
        }
        if let Some(v) = self.htlc_expiry_delta {
            p.htlc_expiry_delta = v;
        }
        if let Some(v) = self.wait_for_commit_confirmation {
            p.wait_for_commit_confirmation = v;
        }
        if let Some(v) = self.to_self_delay {
            p.to_self_delay = v;
        }
        if self.dynamic_delta.is_some() {
            p.dynamic_delta = self.dynamic_delta;
        }
        if let Some(v) = self.non_replaceable_htlc_success {
            p.non_replaceable_htlc_success = v;
        }
        if let Some(v) = self.fee_bumping {
            p.fee_bumping = v;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub profile: ProfileKind,
    pub channels: u32,
    pub htlc_expiry_height: Height,
    pub channel_funding: Sat,
    pub max_htlc_value_in_flight: Option<Sat>,
    pub attacker_fee_bump_increment: Sat,
    pub channel_feerate: Feerate,
    pub attacker_first_at_expiry: bool,
    pub victim_bump_feerate: Feerate,
    pub max_post_expiry_ticks: u32,
    pub preimage_release: PreimageRelease,
    pub audit: bool,
    pub feerate_strategy: FeerateStrategy,
    pub overrides: ProfileOverrides,
    pub background_traffic: Option<BackgroundTraffic>,
}

impl Default for AttackSection {
    fn default() -> Self {
        let c = AttackConfig::default();
        Self {
            profile: c.victim_profile.kind,
            channels: c.num_victim_channels,
            htlc_expiry_height: c.htlc_expiry_height,
            channel_funding: c.channel_funding,
            max_htlc_value_in_flight: c.max_htlc_value_in_flight,
            attacker_fee_bump_increment: c.attacker_fee_bump_increment,
            channel_feerate: c.channel_feerate,
            attacker_first_at_expiry: c.attacker_first_at_expiry,
            victim_bump_feerate: c.victim_bump_feerate,
            max_post_expiry_ticks: c.max_post_expiry_ticks,
            preimage_release: c.preimage_release,
            audit: c.audit,
            feerate_strategy: c.feerate_strategy,
            overrides: ProfileOverrides::default(),
            background_traffic: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSection {
    pub channels: Vec<u32>,
}

/// A generated series; the seed comes from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSeries {
    pub start_height: Height,
    pub len: u32,
    pub base_feerate: Feerate,
    pub floor_feerate: Feerate,
    pub mean_regime_blocks: f64,
    pub jump_sigma: f64,
}

impl Default for SyntheticSeries {
    fn default() -> Self {
        let s = SyntheticSeriesSpec::default();
        Self {
            start_height: s.start_height,
            len: s.len,
            base_feerate: s.base_feerate,
            floor_feerate: s.floor_feerate,
            mean_regime_blocks: s.mean_regime_blocks,
            jump_sigma: s.jump_sigma,
        }
    }
}

impl SyntheticSeries {
    fn spec(&self, seed: u64) -> SyntheticSeriesSpec {
        SyntheticSeriesSpec {
            start_height: self.start_height,
            len: self.len,
            base_feerate: self.base_feerate,
            floor_feerate: self.floor_feerate,
            mean_regime_blocks: self.mean_regime_blocks,
            jump_sigma: self.jump_sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeeSeriesSection {
    /// Resolved against the scenario file's directory when relative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_height: Option<Height>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSeries>,
}

/// Synthetic block contents; block weight is the scenario's
/// `blockmaxweight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBlocks {
    pub fill_min: f64,
    pub fill_max: f64,
    pub tx_weight_min: Weight,
    pub tx_weight_max: Weight,
    pub spread_sigma: f64,
}

impl Default for SyntheticBlocks {
    fn default() -> Self {
        let s = SyntheticBlocksSpec::default();
        Self {
            fill_min: s.fill_min,
            fill_max: s.fill_max,
            tx_weight_min: s.tx_weight_min,
            tx_weight_max: s.tx_weight_max,
            spread_sigma: s.spread_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeeAnalysisSection {
    pub duration: u32,
    pub window: u32,
    pub thresholds: Vec<Weight>,
    pub blocks: SyntheticBlocks,
}

impl Default for FeeAnalysisSection {
    fn default() -> Self {
        Self {
            duration: 1008,
            window: 10,
            thresholds: (0..=8).map(|i| i * 500_000).collect(),
            blocks: SyntheticBlocks::default(),
        }
    }
}

/// External inputs a scenario refers to, loaded once.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInputs {
    pub fee_series: Option<FeerateSeries>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.message().trim().to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// The scenario echoed back as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unprintable: {e}\n"))
    }

    pub fn victim_profile(&self) -> NodeProfile {
        self.attack
            .overrides
            .apply(NodeProfile::new(self.attack.profile))
    }

    /// Attack config for a single run, without any fee series attached.
    pub fn attack_config(&self) -> AttackConfig {
        let a = &self.attack;
        AttackConfig {
            num_victim_channels: a.channels,
            victim_profile: self.victim_profile(),
            htlc_expiry_height: a.htlc_expiry_height,
            channel_funding: a.channel_funding,
            max_htlc_value_in_flight: a.max_htlc_value_in_flight,
            attacker_fee_bump_increment: a.attacker_fee_bump_increment,
            blockmaxweight: self.blockmaxweight,
            weights: self.weights,
            channel_feerate: a.channel_feerate,
            background_traffic: a.background_traffic,
            feerate_strategy: a.feerate_strategy,
            fee_series: None,
            fee_series_open_height: self.fee_series.as_ref().and_then(|f| f.open_height),
            preimage_release: a.preimage_release,
            attacker_first_at_expiry: a.attacker_first_at_expiry,
            victim_bump_feerate: a.victim_bump_feerate,
            max_post_expiry_ticks: a.max_post_expiry_ticks,
            seed: self.seed,
            audit: a.audit,
        }
    }

    pub fn blocks_spec(&self) -> SyntheticBlocksSpec {
        let b = self.fee_analysis.clone().unwrap_or_default().blocks;
        SyntheticBlocksSpec {
            max_weight: self.blockmaxweight,
            fill_min: b.fill_min,
            fill_max: b.fill_max,
            tx_weight_min: b.tx_weight_min,
            tx_weight_max: b.tx_weight_max,
            spread_sigma: b.spread_sigma,
            seed: self.seed.wrapping_add(1),
        }
    }

    /// Structural checks that need no input files.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        let needs = |present: bool, section: &str| {
            if present {
                Ok(())
            } else {
                Err(ScenarioError::Invalid(format!(
                    "{} scenario needs a [{section}] section",
                    self.kind.name()
                )))
            }
        };
        match self.kind {
            ScenarioKind::Attack => {}
            ScenarioKind::Sweep => {
                needs(self.sweep.is_some(), "sweep")?;
                let s = self.sweep.unwrap();
                if s.from == 0 || s.from > s.to {
                    return invalid(format!(
                        "sweep range {}..={} must satisfy 1 <= from <= to",
                        s.from, s.to
                    ));
                }
            }
            ScenarioKind::MitigationMatrix => {
                needs(self.matrix.is_some(), "matrix")?;
                if self.policies.is_empty() {
                    return invalid(
                        "mitigation-matrix scenario needs at least one [[policies]] entry".into(),
                    );
                }
                let m = self.matrix.as_ref().unwrap();
                if m.channels.is_empty() || m.channels.contains(&0) {
                    return invalid("matrix.channels must list positive channel counts".into());
                }
                let profile = self.victim_profile();
                for p in &self.policies {
                    p.validate(&profile)
                        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
                }
            }
            ScenarioKind::FeeAnalysis => {
                needs(self.fee_series.is_some(), "fee_series")?;
                let f = self.fee_analysis.clone().unwrap_or_default();
                if f.window == 0 {
                    return invalid("fee_analysis.window must be positive".into());
                }
            }
        }
        if let Some(f) = &self.fee_series {
            if f.csv.is_some() == f.synthetic.is_some() {
                return invalid(
                    "fee_series needs exactly one of `csv` or [fee_series.synthetic]".into(),
                );
            }
        }
        if self.attack.feerate_strategy != FeerateStrategy::Naive
            && self.fee_series.is_none()
            && self.kind != ScenarioKind::FeeAnalysis
        {
            return invalid(
                "feerate_strategy other than naive needs a [fee_series] section".into(),
            );
        }
        if self.kind != ScenarioKind::FeeAnalysis {
            let mut cfg = self.attack_config();
            if let Some(s) = self.sweep {
                cfg.num_victim_channels = s.from;
            }
            cfg.validate()
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Loads or generates every input the scenario refers to. Relative
    /// paths are taken from `base_dir`.
    pub fn load_inputs(&self, base_dir: &Path) -> Result<LoadedInputs, ScenarioError> {
        let fee_series = match &self.fee_series {
            None => None,
            Some(FeeSeriesSection {
                csv: Some(path), ..
            }) => {
                let full = base_dir.join(path);
                if !full.is_file() {
                    return Err(ScenarioError::MissingInput(full));
                }
                Some(
                    FeerateSeries::ingest_csv(&full).map_err(|e| ScenarioError::Input {
                        stage: Stage::LoadInputs,
                        message: e.to_string(),
                    })?,
                )
            }
            Some(FeeSeriesSection {
                synthetic: Some(spec),
                ..
            }) => Some(
                spec.spec(self.seed)
                    .generate()
                    .map_err(|e| ScenarioError::Input {
                        stage: Stage::LoadInputs,
                        message: e.to_string(),
                    })?,
            ),
            Some(_) => unreachable!("validated: one fee series source"),
        };
        Ok(LoadedInputs { fee_series })
    }
}
