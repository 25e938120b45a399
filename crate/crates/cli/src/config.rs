//! JSON descriptors for margins, copulas, functions and the per-command
//! configuration records. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use margquant_core::expr::Expression;
use margquant_core::functions::{CornerSpike, DiagonalIndicator, MidpointSingular, Monomial, Sum};
use margquant_core::simulate::GeneratorKind;
use margquant_core::{FunctionSpec, MarginalModel};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginDesc {
    pub margin: MarginBody,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "lowercase",
    deny_unknown_fields
)]
pub enum MarginBody {
    Uniform(UniformParams),
    Exponential(ExponentialParams),
    Normal(NormalParams),
    Empirical(EmpiricalParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    #[serde(default)]
    pub low: f64,
    #[serde(default = "one")]
    pub high: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialParams {
    #[serde(default = "one")]
    pub rate: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParams {
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "one")]
    pub sd: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalParams {
    pub values: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl MarginDesc {
    pub fn build(&self) -> CliResult<MarginalModel> {
        Ok(match &self.margin {
            MarginBody::Uniform(p) => MarginalModel::uniform(p.low, p.high)?,
            MarginBody::Exponential(p) => MarginalModel::exponential(p.rate)?,
            MarginBody::Normal(p) => MarginalModel::normal(p.mean, p.sd)?,
            MarginBody::Empirical(p) => MarginalModel::empirical(&p.values)?,
        })
    }
}

pub fn build_margins(descs: &[MarginDesc]) -> CliResult<Vec<MarginalModel>> {
    if descs.is_empty() {
        return Err(CliError::Config("`margins` must not be empty".into()));
    }
    descs.iter().map(MarginDesc::build).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaDesc {
    pub copula: CopulaBody,
}

/// One dependence structure for every pair of coordinates. A Gaussian
/// copula takes either a common `rho` or a full `correlation` matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaBody {
    pub kind: CopulaKind,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub correlation: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaKind {
    Independence,
    Comonotone,
    Gaussian,
}

impl Default for CopulaDesc {
    fn default() -> Self {
        Self {
            copula: CopulaBody {
                kind: CopulaKind::Independence,
                rho: None,
                correlation: None,
            },
        }
    }
}

impl CopulaDesc {
    pub fn generator(&self, d: usize) -> CliResult<GeneratorKind> {
        let c = &self.copula;
        if c.kind != CopulaKind::Gaussian && (c.rho.is_some() || c.correlation.is_some()) {
            return Err(CliError::Config(
                "`rho` and `correlation` only apply to the gaussian copula".into(),
            ));
        }
        Ok(match c.kind {
            CopulaKind::Independence => GeneratorKind::Independent,
            CopulaKind::Comonotone => GeneratorKind::Comonotone,
            CopulaKind::Gaussian => {
                let correlation = match (c.rho, &c.correlation) {
                    (Some(rho), None) => (0..d * d)
                        .map(|i| if i / d == i % d { 1.0 } else { rho })
                        .collect(),
                    (None, Some(m)) => {
                        if m.len() != d || m.iter().any(|r| r.len() != d) {
                            return Err(CliError::Config(format!(
                                "gaussian `correlation` must be {d} x {d}"
                            )));
                        }
                        m.concat()
                    }
                    _ => {
                        return Err(CliError::Config(
                            "gaussian copula needs exactly one of `rho` or `correlation`".into(),
                        ))
                    }
                };
                GeneratorKind::GaussianCopula { correlation }
            }
        })
    }
}

/// `phi`, given either as a registry id / expression string or as a tagged
/// object.
///
/// String ids: `product`, `sum`, `diagonal-indicator`, `corner-spike`,
/// `monomial:a1,a2,...`, `midpoint-singular:alpha`. Any other string is
/// parsed as an expression in `x1 .. xd`.
#[derive(Debug, Clone, Deserialize)]
#[serde(try_from = "serde_json::Value")]
pub enum FunctionRef {
    Id(String),
    Desc(FunctionDesc),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionDesc {
    Monomial {
        alpha: Vec<f64>,
    },
    Product {
        #[serde(default)]
        dim: Option<usize>,
    },
    Sum {
        #[serde(default)]
        dim: Option<usize>,
    },
    DiagonalIndicator,
    MidpointSingular {
        alpha: f64,
        #[serde(default)]
        dim: Option<usize>,
    },
    CornerSpike,
    Expression {
        source: String,
        #[serde(default)]
        dim: Option<usize>,
    },
}

impl TryFrom<serde_json::Value> for FunctionRef {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        match v {
            serde_json::Value::String(s) => Ok(FunctionRef::Id(s)),
            obj @ serde_json::Value::Object(_) => serde_json::from_value(obj)
                .map(FunctionRef::Desc)
                .map_err(|e| format!("function: {e}")),
            _ => Err("function must be a string or an object".into()),
        }
    }
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("`{t}` is not a number")))
        })
        .collect()
}

fn need_dim(dim: Option<usize>, what: &str) -> CliResult<usize> {
    dim.ok_or_else(|| CliError::Config(format!("{what}: dimension unknown; give `dim`")))
}

impl FunctionRef {
    /// `dim` is the dimension implied by the data or the margins, used when
    /// the function itself does not fix it.
    pub fn build(&self, dim: Option<usize>) -> CliResult<Box<dyn FunctionSpec>> {
        let desc = match self {
            FunctionRef::Desc(d) => d.clone(),
            FunctionRef::Id(s) => {
                let s = s.trim();
                match s.split_once(':') {
                    Some(("monomial", rest)) => FunctionDesc::Monomial {
                        alpha: parse_list(rest)?,
                    },
                    Some(("midpoint-singular", rest)) => FunctionDesc::MidpointSingular {
                        alpha: rest
                            .trim()
                            .parse()
                            .map_err(|_| CliError::Config(format!("`{rest}` is not a number")))?,
                        dim: None,
                    },
                    _ => match s {
                        "product" => FunctionDesc::Product { dim: None },
                        "sum" => FunctionDesc::Sum { dim: None },
                        "diagonal-indicator" => FunctionDesc::DiagonalIndicator,
                        "corner-spike" => FunctionDesc::CornerSpike,
                        _ => FunctionDesc::Expression {
                            source: s.to_owned(),
                            dim: None,
                        },
                    },
                }
            }
        };
        Ok(match desc {
            FunctionDesc::Monomial { alpha } => Box::new(Monomial::new(alpha)?),
            FunctionDesc::Product { dim: d } => {
                Box::new(Monomial::product(need_dim(d.or(dim), "product")?))
            }
            FunctionDesc::Sum { dim: d } => Box::new(Sum {
                dim: need_dim(d.or(dim), "sum")?,
            }),
            FunctionDesc::DiagonalIndicator => Box::new(DiagonalIndicator { dim: 2 }),
            FunctionDesc::MidpointSingular { alpha, dim: d } => {
                Box::new(MidpointSingular::new(d.or(dim).unwrap_or(1), alpha)?)
            }
            FunctionDesc::CornerSpike => Box::new(CornerSpike),
            FunctionDesc::Expression { source, dim: d } => match d.or(dim) {
                Some(d) => Box::new(Expression::parse_with_dim(&source, d)?),
                None => Box::new(Expression::parse(&source)?),
            },
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub data: PathBuf,
    pub function: FunctionRef,
    #[serde(default)]
    pub margins: Option<Vec<MarginDesc>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceConfig {
    #[serde(default)]
    pub function: Option<FunctionRef>,
    /// Several functions give the covariance matrix instead.
    #[serde(default)]
    pub functions: Option<Vec<FunctionRef>>,
    pub margins: Vec<MarginDesc>,
    #[serde(default)]
    pub copula: CopulaDesc,
    /// Sample size of the exact finite-n cross-check; omitted skips it.
    #[serde(default)]
    pub finite_n: Option<usize>,
    #[serde(default = "yes")]
    pub check_conditions: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McMode {
    Clt,
    Slln,
    /// One batch split into its per-observation linear terms.
    Linearization,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub function: FunctionRef,
    pub margins: Vec<MarginDesc>,
    #[serde(default)]
    pub copula: CopulaDesc,
    pub n: usize,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "clt")]
    pub mode: McMode,
    /// Nested sample sizes for `slln`; defaults to powers of ten up to `n`.
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub antithetic: bool,
}

fn clt() -> McMode {
    McMode::Clt
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    C2,
    C3,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub function: FunctionRef,
    pub margins: Vec<MarginDesc>,
    pub condition: ProbeKind,
    /// 1-based coordinates for the integrability probe.
    #[serde(default = "first")]
    pub j: usize,
    #[serde(default = "first")]
    pub k: usize,
    #[serde(default = "quarter")]
    pub c0: f64,
}

fn first() -> usize {
    1
}

fn quarter() -> f64 {
    0.25
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub name: String,
    #[serde(default)]
    pub n: Option<Vec<usize>>,
    #[serde(default)]
    pub seeds: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub data: PathBuf,
    /// Column names; default the first two columns.
    #[serde(default)]
    pub columns: Option<[String; 2]>,
}

/// Reads a JSON config, resolving the relative paths it holds against the
/// config's directory afterwards via [`resolve`].
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        context: path.display().to_string(),
        source,
    })
}

pub fn resolve(config: Option<&Path>, p: &Path) -> PathBuf {
    match config.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// Margins given inline as a JSON array or as a path to a JSON file.
pub fn margins_arg(arg: &str) -> CliResult<Vec<MarginDesc>> {
    if arg.trim_start().starts_with('[') {
        serde_json::from_str(arg).map_err(|source| CliError::Json {
            context: "--margins".into(),
            source,
        })
    } else {
        load(Path::new(arg))
    }
}
