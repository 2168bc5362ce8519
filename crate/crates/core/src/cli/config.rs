use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::{IfsSpec, MapSpec, DEFAULT_DEPTH};
use crate::recurrence::counterexample::{counterexample_rate, GFunction};
use crate::recurrence::experiment::Window;
use crate::recurrence::rate::RateFunction;
use crate::sft::{enumerate_words, SftSpec};
use crate::thermo::{build_bernoulli, build_gibbs_any, BernoulliSpec, GibbsModel, Potential};

/// Largest recoded alphabet accepted for potentials of depth above 2.
pub const RECODE_CAP: usize = 4096;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// master seed for every random stream
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ifs: Option<IfsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// i.i.d. symbol probabilities on the full shift
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernoulli: Option<Vec<f64>>,
    /// 0/1 transition matrix of the shift
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// potential values on words of length `depth`; unlisted words get 0
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub potential: Vec<PotentialEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialEntry {
    pub word: Vec<u32>,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKindConfig {
    Plus,
    Minus,
    Identity,
    Constant,
    Table,
    Constructed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub kind: RateKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// entropy and variance; taken from the model when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u64>,
    /// CSV with one column of values `psi(1), psi(2), ...`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<GFunction>,
    /// levels of the construction
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub clamp: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub length: usize,
    pub trials: usize,
    #[serde(default)]
    pub windows: Vec<[u64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub h: f64,
    pub rho: f64,
    pub eps: f64,
    /// rows `n = 1..=n_max`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
    /// explicit rows, appended after the range
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub n: u64,
    /// exponent in the series terms; defaults to the rate's own
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub horizon: u64,
    #[serde(default = "default_g")]
    pub g: GFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// `psi(m)` is checked against the counts for `m` up to this bound
    #[serde(default = "default_count_check")]
    pub count_check: u64,
    #[serde(default)]
    pub escape: f64,
}

fn default_g() -> GFunction {
    GFunction::SqrtLogLog { scale: 1.0 }
}

fn default_count_check() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsConfig {
    pub dimension: usize,
    pub r: f64,
    pub maps: Vec<MapSpec>,
    #[serde(default = "default_depth")]
    pub depth: u32,
    /// sampled codings for the sandwich
    #[serde(default = "default_words")]
    pub words: usize,
    pub length: usize,
    pub lo: u64,
    pub hi: u64,
}

fn default_depth() -> u32 {
    DEFAULT_DEPTH
}

fn default_words() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    pub length: usize,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
}

/// A parsed config and the directory its relative paths refer to.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        Ok(cfg)
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let config = RunConfig::parse(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base })
}

/// A built model together with whether it was recoded to depth 2.
pub struct BuiltModel {
    pub model: Arc<GibbsModel>,
    pub recoded: bool,
}

impl ModelConfig {
    pub fn build(&self) -> Result<BuiltModel> {
        match (&self.bernoulli, &self.adjacency) {
            (Some(p), None) => {
                if self.depth.is_some() || !self.potential.is_empty() {
                    return Err(config_err("a bernoulli model takes no depth or potential"));
                }
                Ok(BuiltModel {
                    model: Arc::new(build_bernoulli(&BernoulliSpec::new(p.clone())?)?),
                    recoded: false,
                })
            }
            (None, Some(a)) => {
                let sft = Arc::new(SftSpec::new(a.clone())?);
                let depth = self.depth.unwrap_or(2);
                let mut entries: Vec<(Vec<u32>, f64)> = self.potential.iter().map(|e| (e.word.clone(), e.value)).collect();
                for w in enumerate_words(&sft, depth)? {
                    let w = w.to_one_based();
                    if !entries.iter().any(|(e, _)| *e == w) {
                        entries.push((w, 0.0));
                    }
                }
                let pot = Potential::from_entries(&sft, depth, &entries)?;
                let (model, rec) = build_gibbs_any(&sft, &pot, RECODE_CAP)?;
                Ok(BuiltModel {
                    model: Arc::new(model),
                    recoded: !rec.blocks.is_empty(),
                })
            }
            (Some(_), Some(_)) => Err(config_err("model: give exactly one of bernoulli and adjacency")),
            (None, None) => Err(config_err("model: give one of bernoulli and adjacency")),
        }
    }
}

impl LoadedConfig {
    /// Paths in the config are relative to its own directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.base.join(p)
        } else {
            p.to_path_buf()
        }
    }

    pub fn model(&self) -> Result<BuiltModel> {
        self.config
            .model
            .as_ref()
            .ok_or_else(|| config_err("missing [model] section"))?
            .build()
    }

    pub fn rate_config(&self) -> Result<&RateConfig> {
        self.config.rate.as_ref().ok_or_else(|| config_err("missing [rate] section"))
    }

    /// Build the rate, filling `h` and `rho` from `model` when not given.
    pub fn rate(&self, model: Option<&GibbsModel>) -> Result<RateFunction> {
        let rc = self.rate_config()?;
        let hr = || -> Result<(f64, f64)> {
            match (rc.h, rc.rho, model) {
                (Some(h), Some(rho), _) => Ok((h, rho)),
                (h, rho, Some(m)) => Ok((h.unwrap_or(m.h_mu), rho.unwrap_or(m.rho_mu))),
                _ => Err(config_err("rate: give h and rho or a [model] section")),
            }
        };
        let eps = || rc.eps.ok_or_else(|| config_err("rate: eps is required"));
        let psi = match rc.kind {
            RateKindConfig::Plus => {
                let (h, rho) = hr()?;
                RateFunction::plus(h, rho, eps()?)?
            }
            RateKindConfig::Minus => {
                let (h, rho) = hr()?;
                RateFunction::minus(h, rho, eps()?)?
            }
            RateKindConfig::Identity => RateFunction::identity(),
            RateKindConfig::Constant => {
                RateFunction::constant(rc.value.ok_or_else(|| config_err("rate: constant needs value"))?)
            }
            RateKindConfig::Table => {
                let path = rc.table.as_ref().ok_or_else(|| config_err("rate: table needs a path"))?;
                RateFunction::table(read_table(&self.resolve(path))?)?
            }
            RateKindConfig::Constructed => {
                let (h, rho) = hr()?;
                let horizon = rc.horizon.ok_or_else(|| config_err("rate: constructed needs horizon"))?;
                counterexample_rate(rc.g.unwrap_or_else(default_g), h, rho, horizon)?
            }
        };
        Ok(psi.with_clamp(rc.clamp))
    }

    pub fn windows(&self) -> Result<Vec<Window>> {
        let e = self.experiment()?;
        e.windows.iter().map(|w| Window::new(w[0], w[1])).collect()
    }

    pub fn experiment(&self) -> Result<&ExperimentConfig> {
        self.config
            .experiment
            .as_ref()
            .ok_or_else(|| config_err("missing [experiment] section"))
    }

    pub fn ifs_spec(&self) -> Result<(IfsSpec, &IfsConfig)> {
        let c = self.config.ifs.as_ref().ok_or_else(|| config_err("missing [ifs] section"))?;
        Ok((
            IfsSpec {
                dimension: c.dimension,
                r: c.r,
                maps: c.maps.clone(),
            },
            c,
        ))
    }
}

/// One column of `psi(n)` values, or `n,psi` rows with `n = 1, 2, ...`.
fn read_table(path: &Path) -> Result<Vec<u64>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)?;
    let bad = |what: &str| config_err(format!("{}: {what}", path.display()));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().map(str::trim).collect();
        if out.is_empty() && fields.iter().any(|f| f.parse::<u64>().is_err()) {
            // header row
            continue;
        }
        let value = match fields.as_slice() {
            [v] => v,
            [n, v] => {
                if n.parse::<u64>().ok() != Some(out.len() as u64 + 1) {
                    return Err(bad(&format!("expected n = {} but found {n:?}", out.len() + 1)));
                }
                v
            }
            _ => return Err(bad("rate tables have one or two columns")),
        };
        out.push(value.parse().map_err(|_| bad(&format!("bad rate value {value:?}")))?);
    }
    Ok(out)
}
