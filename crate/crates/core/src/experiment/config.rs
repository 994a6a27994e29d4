//! Flat TOML experiment configuration.
//!
//! ```toml
//! id = "geometric-half"
//! seed = 1
//! output = "reports/geometric-half"   # relative to the config file
//! checks = ["measures", "bounds", "conditions"]
//! q = [2.0, 4.0]
//!
//! model = "linear"                    # linear | transform | iterated | linear-dependent
//! innovations = "normal"              # normal | uniform | student-t | exponential
//! coefficients = "geometric"          # explicit | geometric | polynomial | log-damped | dyadic-sparse
//! coefficient_rho = 0.5
//! ```
//!
//! Unknown keys are rejected. Errors name the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientKind, CoefficientSequence, DEFAULT_MAX_LAG};
use crate::error::{Error, Result};
use crate::innovation::{InnovationFamily, InnovationSpec};
use crate::model::{Kernel, ModelKind, ProcessModel, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Measures,
    Bounds,
    Maximal,
    Lil,
    Rates,
    Clt,
    Conditions,
    Gmc,
}

impl Check {
    pub const ALL: [Check; 8] = [
        Check::Measures,
        Check::Bounds,
        Check::Maximal,
        Check::Lil,
        Check::Rates,
        Check::Clt,
        Check::Conditions,
        Check::Gmc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::Measures => "measures",
            Check::Bounds => "bounds",
            Check::Maximal => "maximal",
            Check::Lil => "lil",
            Check::Rates => "rates",
            Check::Clt => "clt",
            Check::Conditions => "conditions",
            Check::Gmc => "gmc",
        }
    }
}

/// Model part of the configuration. Parameters not used by the chosen
/// variant must be absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovations: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation_df: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_c: Option<f64>,
    /// Truncation lag of infinite filters (lags).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_lag: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_rho: Option<f64>,
    /// Burn-in of the innovation chain (steps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
}

fn cfg_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn require<T: Copy>(v: Option<T>, field: &str, model: &str) -> Result<T> {
    v.ok_or_else(|| cfg_err(field, format!("required for {model}")))
}

/// Maps the constructor's parameter names back onto config keys.
fn lift(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => {
            let field = match name {
                "df" => "innovation_df",
                other => other,
            };
            cfg_err(field, reason)
        }
        other => other,
    }
}

impl ModelConfig {
    pub fn innovation_spec(&self) -> Result<InnovationSpec> {
        let name = self.innovations.as_deref().unwrap_or("normal");
        let family = match name {
            "normal" => InnovationFamily::StandardNormal,
            "uniform" => InnovationFamily::CenteredUniform,
            "exponential" => InnovationFamily::CenteredExponential,
            "student-t" => InnovationFamily::StudentT {
                df: require(self.innovation_df, "innovation_df", "student-t innovations")?,
            },
            other => return Err(cfg_err("innovations", format!("unknown family `{other}`"))),
        };
        if self.innovation_df.is_some() && !matches!(family, InnovationFamily::StudentT { .. }) {
            return Err(cfg_err("innovation_df", "only valid for student-t innovations"));
        }
        InnovationSpec::new(family).map_err(lift)
    }

    fn coefficient_sequence(&self) -> Result<CoefficientSequence> {
        let name = self
            .coefficients
            .as_deref()
            .ok_or_else(|| cfg_err("coefficients", format!("required for model `{}`", self.model)))?;
        let used = |field: &str| {
            matches!(
                (name, field),
                ("explicit", "coefficient_values")
                    | ("geometric", "coefficient_rho")
                    | ("polynomial", "coefficient_beta")
                    | ("log-damped", "coefficient_alpha")
                    | ("dyadic-sparse", "coefficient_c")
            )
        };
        let present = [
            ("coefficient_values", self.coefficient_values.is_some()),
            ("coefficient_rho", self.coefficient_rho.is_some()),
            ("coefficient_beta", self.coefficient_beta.is_some()),
            ("coefficient_alpha", self.coefficient_alpha.is_some()),
            ("coefficient_c", self.coefficient_c.is_some()),
        ];
        for (field, is_set) in present {
            if is_set && !used(field) {
                return Err(cfg_err(field, format!("not a parameter of `{name}` coefficients")));
            }
        }
        let kind = match name {
            "explicit" => CoefficientKind::Explicit {
                values: self
                    .coefficient_values
                    .clone()
                    .ok_or_else(|| cfg_err("coefficient_values", "required for explicit coefficients"))?,
            },
            "geometric" => CoefficientKind::Geometric {
                rho: require(self.coefficient_rho, "coefficient_rho", "geometric coefficients")?,
            },
            "polynomial" => CoefficientKind::Polynomial {
                beta: require(self.coefficient_beta, "coefficient_beta", "polynomial coefficients")?,
            },
            "log-damped" => CoefficientKind::LogDamped {
                alpha: require(self.coefficient_alpha, "coefficient_alpha", "log-damped coefficients")?,
            },
            "dyadic-sparse" => CoefficientKind::DyadicSparse {
                c: require(self.coefficient_c, "coefficient_c", "dyadic-sparse coefficients")?,
            },
            other => return Err(cfg_err("coefficients", format!("unknown kind `{other}`"))),
        };
        CoefficientSequence::with_truncation(kind, self.truncation_lag, DEFAULT_MAX_LAG).map_err(lift)
    }

    fn kernel(&self) -> Result<Kernel> {
        let name = self
            .kernel
            .as_deref()
            .ok_or_else(|| cfg_err("kernel", format!("required for model `{}`", self.model)))?;
        let rho = require(self.kernel_rho, "kernel_rho", "chain kernels")?;
        match name {
            "ar1" => Ok(Kernel::Ar1 { rho }),
            "contracting-sine" => Ok(Kernel::ContractingSine { rho }),
            other => Err(cfg_err("kernel", format!("unknown kernel `{other}`"))),
        }
    }

    fn forbid(&self, fields: &[(&str, bool)]) -> Result<()> {
        for &(field, is_set) in fields {
            if is_set {
                return Err(cfg_err(field, format!("not used by model `{}`", self.model)));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ProcessModel> {
        let spec = self.innovation_spec()?;
        let transform_set = [
            ("transform", self.transform.is_some()),
            ("transform_threshold", self.transform_threshold.is_some()),
        ];
        let chain_set = [
            ("kernel", self.kernel.is_some()),
            ("kernel_rho", self.kernel_rho.is_some()),
            ("burn_in", self.burn_in.is_some()),
            ("initial", self.initial.is_some()),
        ];
        let filter_set = [
            ("coefficients", self.coefficients.is_some()),
            ("truncation_lag", self.truncation_lag.is_some()),
        ];
        match self.model.as_str() {
            "linear" => {
                self.forbid(&transform_set)?;
                self.forbid(&chain_set)?;
                Ok(ProcessModel::linear(self.coefficient_sequence()?, spec))
            }
            "transform" => {
                self.forbid(&chain_set)?;
                let transform = match self.transform.as_deref() {
                    Some("abs") => Transform::Abs,
                    Some("tanh") => Transform::Tanh,
                    Some("soft-threshold") => Transform::SoftThreshold {
                        threshold: require(self.transform_threshold, "transform_threshold", "soft-threshold")?,
                    },
                    Some(other) => return Err(cfg_err("transform", format!("unknown transform `{other}`"))),
                    None => return Err(cfg_err("transform", "required for model `transform`")),
                };
                if self.transform_threshold.is_some() && !matches!(transform, Transform::SoftThreshold { .. }) {
                    return Err(cfg_err("transform_threshold", "only valid for soft-threshold"));
                }
                ProcessModel::transform(self.coefficient_sequence()?, transform, spec).map_err(lift)
            }
            "iterated" => {
                self.forbid(&transform_set)?;
                self.forbid(&filter_set)?;
                ProcessModel::iterated(self.kernel()?, spec, self.burn_in, self.initial.unwrap_or(0.0)).map_err(lift)
            }
            "linear-dependent" => {
                self.forbid(&transform_set)?;
                self.forbid(&[("initial", self.initial.is_some())])?;
                ProcessModel::linear_dependent(self.coefficient_sequence()?, self.kernel()?, spec, self.burn_in).map_err(lift)
            }
            other => Err(cfg_err("model", format!("unknown model `{other}`"))),
        }
    }

    /// Configuration that rebuilds `model`.
    pub fn from_model(model: &ProcessModel) -> Self {
        let mut c = ModelConfig::default();
        let spec = model.innovations();
        c.innovations = Some(
            match spec.family {
                InnovationFamily::StandardNormal => "normal",
                InnovationFamily::CenteredUniform => "uniform",
                InnovationFamily::CenteredExponential => "exponential",
                InnovationFamily::StudentT { df } => {
                    c.innovation_df = Some(df);
                    "student-t"
                }
            }
            .to_string(),
        );
        let set_coefficients = |c: &mut ModelConfig, a: &CoefficientSequence| {
            let name = match a.kind() {
                CoefficientKind::Explicit { values } => {
                    c.coefficient_values = Some(values.clone());
                    "explicit"
                }
                CoefficientKind::Geometric { rho } => {
                    c.coefficient_rho = Some(*rho);
                    "geometric"
                }
                CoefficientKind::Polynomial { beta } => {
                    c.coefficient_beta = Some(*beta);
                    "polynomial"
                }
                CoefficientKind::LogDamped { alpha } => {
                    c.coefficient_alpha = Some(*alpha);
                    "log-damped"
                }
                CoefficientKind::DyadicSparse { c: exponent } => {
                    c.coefficient_c = Some(*exponent);
                    "dyadic-sparse"
                }
            };
            c.coefficients = Some(name.to_string());
            if !matches!(a.kind(), CoefficientKind::Explicit { .. }) {
                c.truncation_lag = Some(a.truncation_lag());
            }
        };
        let set_kernel = |c: &mut ModelConfig, k: &Kernel, burn_in: u64| {
            c.kernel = Some(
                match k {
                    Kernel::Ar1 { .. } => "ar1",
                    Kernel::ContractingSine { .. } => "contracting-sine",
                }
                .to_string(),
            );
            c.kernel_rho = Some(k.rho());
            c.burn_in = Some(burn_in);
        };
        match model.kind() {
            ModelKind::LinearIid { coefficients } => {
                c.model = "linear".into();
                set_coefficients(&mut c, coefficients);
            }
            ModelKind::LipschitzTransform {
                coefficients, transform, ..
            } => {
                c.model = "transform".into();
                set_coefficients(&mut c, coefficients);
                c.transform = Some(
                    match transform {
                        Transform::Abs => "abs",
                        Transform::Tanh => "tanh",
                        Transform::SoftThreshold { threshold } => {
                            c.transform_threshold = Some(*threshold);
                            "soft-threshold"
                        }
                    }
                    .to_string(),
                );
            }
            ModelKind::IteratedRandomFunction { chain } => {
                c.model = "iterated".into();
                set_kernel(&mut c, &chain.kernel, chain.burn_in);
                if chain.initial != 0.0 {
                    c.initial = Some(chain.initial);
                }
            }
            ModelKind::LinearDependentInnovations { coefficients, chain } => {
                c.model = "linear-dependent".into();
                set_coefficients(&mut c, coefficients);
                set_kernel(&mut c, &chain.kernel, chain.burn_in);
            }
        }
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }
}

/// Keys of the experiment part of the configuration.
const EXPERIMENT_KEYS: [&str; 16] = [
    "id",
    "seed",
    "output",
    "checks",
    "q",
    "lags",
    "lengths",
    "replicates",
    "inner",
    "paths",
    "lil_length",
    "horizon",
    "deltas",
    "maximal_levels",
    "rate_level",
    "clt_length",
];

/// A complete experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    /// Output directory, resolved against the config file's directory.
    pub output: PathBuf,
    pub checks: Vec<Check>,
    pub q: Vec<f64>,
    pub model: ModelConfig,
    /// Largest lag of the dependence profiles.
    pub lags: usize,
    /// Path lengths for bounds and rates.
    pub lengths: Vec<usize>,
    /// Outer Monte Carlo replicates.
    pub replicates: usize,
    /// Inner conditional-mean draws.
    pub inner: usize,
    /// Independent paths for path-wise statistics.
    pub paths: usize,
    pub lil_length: usize,
    pub clt_length: usize,
    /// Nested projection horizon; automatic when absent.
    pub horizon: Option<usize>,
    pub deltas: Vec<f64>,
    pub maximal_levels: u32,
    pub rate_level: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    id: String,
    seed: u64,
    output: PathBuf,
    checks: Vec<Check>,
    q: Vec<f64>,
    #[serde(default = "default_lags")]
    lags: usize,
    #[serde(default = "default_lengths")]
    lengths: Vec<usize>,
    #[serde(default = "default_replicates")]
    replicates: usize,
    #[serde(default = "default_inner")]
    inner: usize,
    #[serde(default = "default_paths")]
    paths: usize,
    #[serde(default = "default_lil_length")]
    lil_length: usize,
    #[serde(default = "default_clt_length")]
    clt_length: usize,
    #[serde(default)]
    horizon: Option<usize>,
    #[serde(default = "default_deltas")]
    deltas: Vec<f64>,
    #[serde(default = "default_maximal_levels")]
    maximal_levels: u32,
    #[serde(default = "default_rate_level")]
    rate_level: f64,
}

fn default_lags() -> usize {
    10
}
fn default_lengths() -> Vec<usize> {
    (0..=10).map(|j| 1usize << j).collect()
}
fn default_replicates() -> usize {
    2000
}
fn default_inner() -> usize {
    128
}
fn default_paths() -> usize {
    200
}
fn default_lil_length() -> usize {
    1 << 16
}
fn default_clt_length() -> usize {
    4096
}
fn default_deltas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_maximal_levels() -> u32 {
    6
}
fn default_rate_level() -> f64 {
    0.99
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; a relative `output` is resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err("<document>", e.message().to_string()))?;
        let mut experiment = toml::Table::new();
        let mut model = toml::Table::new();
        for (key, value) in table {
            if EXPERIMENT_KEYS.contains(&key.as_str()) {
                experiment.insert(key, value);
            } else {
                model.insert(key, value);
            }
        }
        let raw: RawExperiment = experiment_field(experiment.try_into())?;
        let model: ModelConfig = experiment_field(model.try_into())?;
        let output = if raw.output.is_absolute() {
            raw.output.clone()
        } else {
            base.join(&raw.output)
        };
        let cfg = Self {
            id: raw.id,
            seed: raw.seed,
            output,
            checks: raw.checks,
            q: raw.q,
            model,
            lags: raw.lags,
            lengths: raw.lengths,
            replicates: raw.replicates,
            inner: raw.inner,
            paths: raw.paths,
            lil_length: raw.lil_length,
            clt_length: raw.clt_length,
            horizon: raw.horizon,
            deltas: raw.deltas,
            maximal_levels: raw.maximal_levels,
            rate_level: raw.rate_level,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['/', '\\', ',']) {
            return Err(cfg_err("id", "must be nonempty without `/`, `\\` or `,`"));
        }
        if self.checks.is_empty() {
            return Err(cfg_err("checks", "at least one check is required"));
        }
        if self.q.is_empty() {
            return Err(cfg_err("q", "at least one moment order is required"));
        }
        let spec = self.model.innovation_spec()?;
        for (i, &q) in self.q.iter().enumerate() {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(cfg_err(format!("q[{i}]"), format!("need a finite q >= 1, got {q}")));
            }
            if !spec.supports_moment(q) {
                return Err(cfg_err(
                    format!("q[{i}]"),
                    format!("q = {q} exceeds q_max = {} of {} innovations", spec.q_max(), spec.name()),
                ));
            }
        }
        self.model.build()?;
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(cfg_err("lengths", "need positive lengths"));
        }
        if self.replicates < 100 {
            return Err(cfg_err("replicates", "need at least 100"));
        }
        if self.inner < 2 {
            return Err(cfg_err("inner", "need at least 2"));
        }
        if self.lags < 1 {
            return Err(cfg_err("lags", "need at least 1"));
        }
        if self.paths < 2 {
            return Err(cfg_err("paths", "need at least 2"));
        }
        if self.checks.contains(&Check::Lil) && self.lil_length < (1 << 16) {
            return Err(cfg_err("lil_length", "need at least 65536 steps"));
        }
        if self.checks.contains(&Check::Clt) && self.clt_length < 1024 {
            return Err(cfg_err("clt_length", "need at least 1024 steps"));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(cfg_err("deltas", "need positive thresholds"));
        }
        if self.maximal_levels > 16 {
            return Err(cfg_err("maximal_levels", "at most 16"));
        }
        if !(self.rate_level > 0.0 && self.rate_level < 1.0) {
            return Err(cfg_err("rate_level", "need a level in (0, 1)"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ProcessModel> {
        self.model.build()
    }

    /// Checks in canonical order without duplicates.
    pub fn checks_sorted(&self) -> Vec<Check> {
        let mut c = self.checks.clone();
        c.sort();
        c.dedup();
        c
    }
}

fn experiment_field<T>(r: std::result::Result<T, toml::de::Error>) -> Result<T> {
    r.map_err(|e| {
        let msg = e.message().to_string();
        // serde names the key in its message, e.g. "unknown field `foo`"
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "<document>".into());
        cfg_err(field, msg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
id = "t"
seed = 3
output = "out"
checks = ["measures"]
q = [2.0]
model = "linear"
coefficients = "geometric"
coefficient_rho = 0.5
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("/tmp/cfg"))
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn parses_and_resolves_output() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.output, PathBuf::from("/tmp/cfg/out"));
        assert_eq!(c.lengths.len(), 11);
        assert!(c.build_model().unwrap().is_linear_iid());
    }

    #[test]
    fn rejects_unknown_keys() {
        let e = parse(&format!("{BASE}\nfrobnicate = 1\n")).unwrap_err();
        assert_eq!(field_of(e), "frobnicate");
    }

    #[test]
    fn rejects_moment_beyond_tail_index() {
        let text = BASE.replace("q = [2.0]", "q = [2.0, 6.0]") + "innovations = \"student-t\"\ninnovation_df = 5.0\n";
        assert_eq!(field_of(parse(&text).unwrap_err()), "q[1]");
    }

    #[test]
    fn rejects_misplaced_parameters() {
        let text = format!("{BASE}coefficient_beta = 2.0\n");
        assert_eq!(field_of(parse(&text).unwrap_err()), "coefficient_beta");
        let text = BASE.replace("coefficient_rho = 0.5", "coefficient_rho = 1.5");
        assert_eq!(field_of(parse(&text).unwrap_err()), "coefficient_rho");
        let text = BASE.replace("seed = 3", "seed = \"x\"");
        assert_eq!(field_of(parse(&text).unwrap_err()), "<document>");
    }

    #[test]
    fn model_round_trip() {
        let models = [
            ProcessModel::linear(CoefficientSequence::polynomial(2.0).unwrap(), InnovationSpec::student_t(6.0).unwrap()),
            ProcessModel::transform(CoefficientSequence::explicit(vec![1.0, 0.5]).unwrap(), Transform::Tanh, InnovationSpec::normal()).unwrap(),
            ProcessModel::iterated(Kernel::ContractingSine { rho: 0.5 }, InnovationSpec::uniform(), None, 0.0).unwrap(),
            ProcessModel::linear_dependent(
                CoefficientSequence::geometric(0.3).unwrap(),
                Kernel::Ar1 { rho: 0.5 },
                InnovationSpec::normal(),
                None,
            )
            .unwrap(),
        ];
        for m in models {
            let text = ModelConfig::from_model(&m).to_toml();
            let back: ModelConfig = toml::from_str(&text).unwrap();
            assert_eq!(back.build().unwrap(), m, "{text}");
        }
    }
}
