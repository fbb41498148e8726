//! Experiment configuration: a single JSON document resolved into concrete
//! scenarios, detectors and Monte-Carlo settings before anything runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorConfig, Normalization};
use crate::error::{invalid, Error, Result};
use crate::evaluation::{DcMmdSetup, McSettings, OffsetRule, ScenarioSpec, MIN_MTFA_RUNS};
use crate::kernel_mmd::BandwidthRule;
use crate::scenarios::{self, registry, ShiftKind, ROBUST_KAPPA};

/// Where the scenario comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    /// Preset name with its default post-change shift.
    Preset(String),
    /// Preset pre-change model with an explicit shift.
    Shifted { preset: String, shift: ShiftKind },
    Inline(ScenarioSpec),
}

/// A detector family, instantiated against the scenario at resolution time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    DcMmd,
    /// Gaussian CUSUM with the true pre and post marginals.
    GaussCusum,
    GCusumMisspecified,
    RobustCusum {
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// Mixture CUSUM with the true pre and post mixtures.
    GmmCusum,
    GmmCusumSurrogate {
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    Nll,
}

fn default_kappa() -> f64 {
    ROBUST_KAPPA
}

impl DetectorSpec {
    /// The detector of kind `name` with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::json!({ "kind": name }))
            .map_err(|_| invalid(format!("unknown detector kind `{name}`")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DcMmd => "dc_mmd",
            Self::GaussCusum => "gauss_cusum",
            Self::GCusumMisspecified => "g_cusum_misspecified",
            Self::RobustCusum { .. } => "robust_cusum",
            Self::GmmCusum => "gmm_cusum",
            Self::GmmCusumSurrogate { .. } => "gmm_cusum_surrogate",
            Self::Nll => "nll",
        }
    }
}

/// `"auto"` or a fixed offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaSetting {
    Auto,
    Value(f64),
}

/// `"median"` or a fixed bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSetting {
    Median,
    Value(f64),
}

/// A fixed threshold or `"calibrate:<target MTFA>"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSetting {
    Value(f64),
    Calibrate(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NumOrText {
    Num(f64),
    Text(String),
}

macro_rules! num_or_keyword {
    ($ty:ident, $parse:expr, $show:expr) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let show: fn(&$ty) -> NumOrText = $show;
                show(self).serialize(s)
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let parse: fn(NumOrText) -> std::result::Result<$ty, String> = $parse;
                parse(NumOrText::deserialize(d)?).map_err(serde::de::Error::custom)
            }
        }
    };
}

num_or_keyword!(
    ZetaSetting,
    |v| match v {
        NumOrText::Num(z) => Ok(ZetaSetting::Value(z)),
        NumOrText::Text(t) if t == "auto" => Ok(ZetaSetting::Auto),
        NumOrText::Text(t) => Err(format!("zeta must be a number or \"auto\", got `{t}`")),
    },
    |z| match *z {
        ZetaSetting::Auto => NumOrText::Text("auto".into()),
        ZetaSetting::Value(v) => NumOrText::Num(v),
    }
);

num_or_keyword!(
    SigmaSetting,
    |v| match v {
        NumOrText::Num(z) => Ok(SigmaSetting::Value(z)),
        NumOrText::Text(t) if t == "median" => Ok(SigmaSetting::Median),
        NumOrText::Text(t) => Err(format!("sigma must be a number or \"median\", got `{t}`")),
    },
    |z| match *z {
        SigmaSetting::Median => NumOrText::Text("median".into()),
        SigmaSetting::Value(v) => NumOrText::Num(v),
    }
);

num_or_keyword!(
    ThresholdSetting,
    |v| match v {
        NumOrText::Num(b) => Ok(ThresholdSetting::Value(b)),
        NumOrText::Text(t) => t
            .strip_prefix("calibrate:")
            .and_then(|g| g.trim().parse::<f64>().ok())
            .map(ThresholdSetting::Calibrate)
            .ok_or_else(|| format!("b must be a number or \"calibrate:<gamma>\", got `{t}`")),
    },
    |b| match *b {
        ThresholdSetting::Value(v) => NumOrText::Num(v),
        ThresholdSetting::Calibrate(g) => NumOrText::Text(format!("calibrate:{g}")),
    }
);

impl std::str::FromStr for ThresholdSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v = match s.parse::<f64>() {
            Ok(b) => serde_json::Value::from(b),
            Err(_) => serde_json::Value::from(s),
        };
        Ok(serde_json::from_value(v)?)
    }
}

fn d_detectors() -> Vec<DetectorSpec> {
    vec![DetectorSpec::DcMmd]
}
fn d_m() -> usize {
    scenarios::DEFAULT_BLOCK_LEN
}
fn d_zeta() -> ZetaSetting {
    ZetaSetting::Auto
}
fn d_sigma() -> SigmaSetting {
    SigmaSetting::Value(0.8)
}
fn d_b() -> ThresholdSetting {
    ThresholdSetting::Calibrate(1_000.0)
}
fn d_n_ref() -> usize {
    2_000
}
fn d_ref_len() -> usize {
    20_000
}
fn d_offset_blocks() -> usize {
    2_000
}
fn d_n_runs() -> usize {
    500
}
fn d_out() -> PathBuf {
    PathBuf::from("runs")
}
fn d_norm() -> Normalization<f64> {
    Normalization::Off
}

/// One experiment, as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSource,
    #[serde(default = "d_detectors")]
    pub detectors: Vec<DetectorSpec>,
    #[serde(default = "d_m")]
    pub m: usize,
    #[serde(default = "d_zeta")]
    pub zeta: ZetaSetting,
    /// Added to the automatic offset.
    #[serde(default)]
    pub zeta_margin: f64,
    #[serde(default = "d_sigma")]
    pub sigma: SigmaSetting,
    #[serde(default = "d_b")]
    pub b: ThresholdSetting,
    #[serde(default = "d_n_ref")]
    pub n_ref: usize,
    #[serde(default = "d_ref_len")]
    pub ref_len: usize,
    #[serde(default = "d_offset_blocks")]
    pub offset_blocks: usize,
    #[serde(default = "d_norm")]
    pub normalization: Normalization<f64>,
    #[serde(default = "d_n_runs")]
    pub n_runs: usize,
    /// Runs per WADD cell; defaults to `n_runs`.
    #[serde(default)]
    pub n_runs_per_cell: Option<usize>,
    /// MTFA horizon; defaults to eight times the largest calibration or
    /// frontier target, or 20000 for a fixed threshold without targets.
    #[serde(default)]
    pub max_len: Option<u64>,
    /// Delay horizon; defaults to `max_len`.
    #[serde(default)]
    pub max_delay: Option<u64>,
    /// MTFA targets swept by the frontier command; defaults to the
    /// calibration target times 1/4, 1/2, 1, 2 and 4.
    #[serde(default)]
    pub mtfa_targets: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Config for a named preset with defaults everywhere else.
    pub fn for_preset(name: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "scenario": name })).expect("defaults deserialize")
    }

    /// Parses a config file; every failure is reported as a config error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(invalid("at least one detector is required"));
        }
        if self.m < 2 {
            return Err(invalid(format!("m must be >= 2, got {}", self.m)));
        }
        if let ZetaSetting::Value(z) = self.zeta {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(invalid(format!("zeta must be >= 0, got {z}")));
            }
        }
        if !self.zeta_margin.is_finite() {
            return Err(invalid("zeta_margin must be finite"));
        }
        if let SigmaSetting::Value(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("sigma must be > 0, got {s}")));
            }
        }
        match self.b {
            ThresholdSetting::Value(b) if !(b > 0.0 && b.is_finite()) => {
                return Err(invalid(format!("b must be > 0, got {b}")));
            }
            ThresholdSetting::Calibrate(g) if !(g > 0.0 && g.is_finite()) => {
                return Err(invalid(format!("calibration target must be > 0, got {g}")));
            }
            _ => {}
        }
        if self.n_ref < 2 || self.offset_blocks == 0 {
            return Err(invalid("n_ref must be >= 2 and offset_blocks >= 1"));
        }
        if self.n_runs < MIN_MTFA_RUNS {
            return Err(invalid(format!("n_runs must be >= {MIN_MTFA_RUNS}, got {}", self.n_runs)));
        }
        if let Some(t) = &self.mtfa_targets {
            if t.is_empty() || t.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
                return Err(invalid("mtfa_targets must be a non-empty list of positive numbers"));
            }
        }
        Ok(())
    }

    /// Calibration target when `b` asks for one, else 1000.
    pub fn target(&self) -> f64 {
        match self.b {
            ThresholdSetting::Calibrate(g) => g,
            ThresholdSetting::Value(_) => 1_000.0,
        }
    }

    pub fn targets(&self) -> Vec<f64> {
        self.mtfa_targets.clone().unwrap_or_else(|| {
            let g = self.target();
            [1.0, 2.0, 4.0, 8.0].iter().map(|f| f * g).collect()
        })
    }

    pub fn settings(&self) -> McSettings {
        let max_len = self.max_len.unwrap_or_else(|| {
            let top = self.targets().into_iter().fold(self.target(), f64::max);
            match (self.b, &self.mtfa_targets) {
                (ThresholdSetting::Value(_), None) => 20_000,
                _ => (8.0 * top).ceil() as u64,
            }
        });
        McSettings {
            n_runs: self.n_runs,
            max_len,
            n_runs_per_cell: self.n_runs_per_cell.unwrap_or(self.n_runs),
            max_delay: self.max_delay.unwrap_or(max_len),
            seed: self.seed,
        }
    }

    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let grid = ScenarioSpec::default_grid(self.m);
        match &self.scenario {
            ScenarioSource::Preset(name) => registry().preset(name)?.with_grid(grid),
            ScenarioSource::Shifted { preset, shift } => registry().preset_with_shift(preset, shift)?.with_grid(grid),
            ScenarioSource::Inline(spec) => Ok(spec.clone()),
        }
    }

    pub fn dcmmd_setup(&self) -> DcMmdSetup {
        DcMmdSetup {
            m: self.m,
            bandwidth: match self.sigma {
                SigmaSetting::Median => BandwidthRule::Median,
                SigmaSetting::Value(s) => BandwidthRule::Fixed(s),
            },
            n_ref: self.n_ref,
            ref_len: self.ref_len,
            offset: match self.zeta {
                ZetaSetting::Auto => OffsetRule::Auto { margin: self.zeta_margin },
                ZetaSetting::Value(z) => OffsetRule::Fixed(z),
            },
            offset_blocks: self.offset_blocks,
            normalization: self.normalization,
            threshold: 1.0,
        }
    }

    /// Validates the config and instantiates its scenario and detectors.
    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let scenario = self.scenario()?;
        let b = match self.b {
            ThresholdSetting::Value(b) => b,
            ThresholdSetting::Calibrate(_) => 1.0,
        };
        let (pre, post) = (&scenario.pre, &scenario.post);
        let detectors = self
            .detectors
            .iter()
            .map(|d| {
                let config = match *d {
                    DetectorSpec::DcMmd => {
                        DetectorConfig::DcMmd(self.dcmmd_setup().build(pre, self.seed)?.config).with_threshold(b)
                    }
                    DetectorSpec::GaussCusum => scenarios::gaussian_cusum_known(pre, post, b)?,
                    DetectorSpec::GCusumMisspecified => scenarios::misspecified_gaussian_cusum(pre, post, b)?,
                    DetectorSpec::RobustCusum { kappa } => scenarios::robust_cusum(pre, kappa, b)?,
                    DetectorSpec::GmmCusum => scenarios::gmm_cusum_known(pre, post, b)?,
                    DetectorSpec::GmmCusumSurrogate { kappa } => scenarios::gmm_cusum_surrogate(pre, kappa, b)?,
                    DetectorSpec::Nll => scenarios::nll_detector(pre, b)?,
                };
                config.build()?;
                Ok(ResolvedDetector { name: d.name().to_string(), config })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut names: Vec<&str> = detectors.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("each detector kind may appear only once"));
        }
        Ok(Resolved { source: self.clone(), scenario: Arc::new(scenario), detectors, settings: self.settings() })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedDetector {
    pub name: String,
    pub config: DetectorConfig<f64>,
}

/// Fully instantiated experiment; serialized as the config echo of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub source: ExperimentConfig,
    pub scenario: Arc<ScenarioSpec>,
    pub detectors: Vec<ResolvedDetector>,
    pub settings: McSettings,
}

impl Resolved {
    pub fn threshold(&self) -> ThresholdSetting {
        self.source.b
    }
}

/// Maps a failure to the documented process exit code: 2 for configuration
/// problems, 3 for bad data, 4 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_)
        | Error::InvalidTransition(_)
        | Error::UnknownPreset(_)
        | Error::Indistinguishable(..)
        | Error::Json(_) => 2,
        Error::Degenerate(_) | Error::NonFinite(_) | Error::Csv(_) | Error::Io(_) => 3,
        Error::Numerical(_) | Error::Bracketing { .. } | Error::PreChangeAlarms { .. } | Error::AlreadyAlarmed(_) => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_parsers() {
        assert_eq!("2.5".parse::<ThresholdSetting>().unwrap(), ThresholdSetting::Value(2.5));
        assert_eq!("calibrate:300".parse::<ThresholdSetting>().unwrap(), ThresholdSetting::Calibrate(300.0));
        assert!("calibrate".parse::<ThresholdSetting>().is_err());
        assert_eq!(DetectorSpec::from_name("robust_cusum").unwrap(), DetectorSpec::RobustCusum { kappa: 2.0 });
        assert!(DetectorSpec::from_name("bogus").is_err());
    }

    #[test]
    fn keywords_parse_and_round_trip() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"scenario":"highway_car_following","zeta":0.1,"sigma":"median","b":"calibrate:500",
                "detectors":[{"kind":"dc_mmd"},{"kind":"robust_cusum"}],"n_runs":60}"#,
        )
        .unwrap();
        assert_eq!(c.zeta, ZetaSetting::Value(0.1));
        assert_eq!(c.sigma, SigmaSetting::Median);
        assert_eq!(c.b, ThresholdSetting::Calibrate(500.0));
        assert_eq!(c.detectors[1], DetectorSpec::RobustCusum { kappa: 2.0 });
        assert_eq!(c.settings().max_len, 32_000);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let d = ExperimentConfig::for_preset("urban_roundabout");
        assert_eq!((d.m, d.zeta, d.sigma, d.n_ref), (50, ZetaSetting::Auto, SigmaSetting::Value(0.8), 2_000));
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for body in [
            r#"{"scenario":"x","b":"calibrate:abc"}"#,
            r#"{"scenario":"x","zeta":"sometimes"}"#,
            r#"{"scenario":"x","colour":1}"#,
            r#"{"scenario":"x","detectors":[{"kind":"bogus"}]}"#,
        ] {
            assert!(serde_json::from_str::<ExperimentConfig>(body).is_err(), "{body}");
        }
        let mut c = ExperimentConfig::for_preset("nowhere");
        assert_eq!(exit_code(&c.resolve().unwrap_err()), 2);
        c = ExperimentConfig::for_preset("highway_car_following");
        c.m = 1;
        assert_eq!(exit_code(&c.resolve().unwrap_err()), 2);
        c.m = 10;
        c.b = ThresholdSetting::Value(-1.0);
        assert_eq!(exit_code(&c.resolve().unwrap_err()), 2);
        c.b = ThresholdSetting::Value(1.0);
        c.detectors = vec![DetectorSpec::Nll, DetectorSpec::Nll];
        assert!(c.resolve().is_err());
    }

    #[test]
    fn resolves_every_detector() {
        let mut c = ExperimentConfig::for_preset("highway_stop_and_go");
        c.m = 10;
        c.n_ref = 100;
        c.offset_blocks = 50;
        c.b = ThresholdSetting::Value(3.0);
        c.detectors = vec![
            DetectorSpec::DcMmd,
            DetectorSpec::GaussCusum,
            DetectorSpec::GCusumMisspecified,
            DetectorSpec::RobustCusum { kappa: 2.0 },
            DetectorSpec::GmmCusum,
            DetectorSpec::GmmCusumSurrogate { kappa: 2.0 },
            DetectorSpec::Nll,
        ];
        let r = c.resolve().unwrap();
        assert_eq!(r.detectors.len(), 7);
        assert!(r.detectors.iter().all(|d| d.config.threshold() == 3.0));
        assert_eq!(r.scenario.changepoint_grid, vec![1, 11, 51, 101]);
        assert_eq!(r.detectors[0].config.block_len(), Some(10));
    }
}
