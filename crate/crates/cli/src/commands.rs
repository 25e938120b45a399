use std::path::{Path, PathBuf};

use margquant_core::asymptotics::{
    covariance_matrix_with, linearization, sigma_squared_checked, sigma_squared_with,
};
use margquant_core::calculus::{probe_c2, probe_c3, ConditionProbeReport, Verdict};
use margquant_core::exec::Executor;
use margquant_core::functions::CornerSpike;
use margquant_core::gof::median;
use margquant_core::rng::child_seed;
use margquant_core::simulate::{
    counterexample_c1, counterexample_c2, generate_pair, mc_clt_with, mc_slln, GeneratorKind,
    GeneratorSpec,
};
use margquant_core::stat::{broken_sample_bounds, estimate_statistic, estimate_with_margins};
use margquant_core::{Error, FunctionSpec, MarginalModel};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, build_margins, FunctionRef, McMode, ProbeKind};
use crate::data::{read_batch, read_table};
use crate::error::{CliError, CliResult};
use crate::pool::Pool;

/// A command's result: the primary JSON document, a flat table for
/// `--format csv`, and extra files for the output directory.
pub struct Output {
    pub json: Value,
    pub table: Table,
    pub files: Vec<(String, String)>,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn need_config(config: Option<&Path>, command: &str) -> CliResult<PathBuf> {
    config
        .map(Path::to_path_buf)
        .ok_or_else(|| CliError::Config(format!("`{command}` needs --config <json>")))
}

fn check_file(path: &Path) -> CliResult<()> {
    std::fs::metadata(path)
        .map_err(|e| CliError::io(path, e))
        .and_then(|m| {
            if m.is_file() {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "{} is not a file",
                    path.display()
                )))
            }
        })
}

pub struct EstimateArgs {
    pub data: Option<PathBuf>,
    pub function: Option<String>,
    pub margins: Option<String>,
}

pub fn estimate(config: Option<&Path>, args: EstimateArgs) -> CliResult<Output> {
    let cfg: Option<config::EstimateConfig> = config.map(config::load).transpose()?;
    let data = match (args.data, &cfg) {
        (Some(p), _) => p,
        (None, Some(c)) => config::resolve(config, &c.data),
        (None, None) => return Err(CliError::Config("estimate needs --data or --config".into())),
    };
    let function = match (args.function, &cfg) {
        (Some(s), _) => FunctionRef::Id(s),
        (None, Some(c)) => c.function.clone(),
        (None, None) => {
            return Err(CliError::Config(
                "estimate needs --function or --config".into(),
            ))
        }
    };
    let margins = match (args.margins, &cfg) {
        (Some(m), _) => Some(config::margins_arg(&m)?),
        (None, Some(c)) => c.margins.clone(),
        (None, None) => None,
    };
    let margins = margins.as_deref().map(build_margins).transpose()?;
    check_file(&data)?;

    let batch = read_batch(&data)?;
    let f = function.build(Some(batch.d()))?;
    let result = match &margins {
        Some(m) => estimate_with_margins(&batch, &f, m)?,
        None => estimate_statistic(&batch, &f)?,
    };
    Ok(Output {
        json: to_json(&result),
        table: Table {
            header: vec!["value", "n", "gamma_bar", "centered_scaled"],
            rows: vec![vec![
                num(result.value),
                result.n.to_string(),
                opt(result.gamma_bar),
                opt(result.centered_scaled),
            ]],
        },
        files: vec![],
    })
}

#[derive(Serialize)]
struct ConditionSummary {
    condition: &'static str,
    j: usize,
    k: usize,
    verdict: Verdict,
}

fn condition_name(r: &ConditionProbeReport) -> &'static str {
    match r.condition {
        margquant_core::calculus::ProbeCondition::C2 => "C2",
        margquant_core::calculus::ProbeCondition::C3Gradient => "C3-grad",
        margquant_core::calculus::ProbeCondition::C3Hessian => "C3-hess",
    }
}

/// Runs the integrability probes on every pair `j <= k` and turns a
/// diverging verdict into a divergence error.
fn c3_gate<F: FunctionSpec>(f: &F, margins: &[MarginalModel]) -> CliResult<Vec<ConditionSummary>> {
    let d = margins.len();
    let mut out = Vec::new();
    for j in 0..d {
        for k in j..d {
            let probe = probe_c3(f, margins, j, k)?;
            let reports = if j == k {
                vec![probe.gradient, probe.hessian]
            } else {
                vec![probe.hessian]
            };
            for r in reports {
                if r.verdict == Verdict::Diverging {
                    return Err(Error::Divergence {
                        context: format!(
                            "{} weight sums grow without bound for j = {}, k = {}; the limiting variance is not supported",
                            condition_name(&r),
                            j + 1,
                            k + 1
                        ),
                        trace: r.values,
                    }
                    .into());
                }
                out.push(ConditionSummary {
                    condition: condition_name(&r),
                    j: j + 1,
                    k: k + 1,
                    verdict: r.verdict,
                });
            }
        }
    }
    Ok(out)
}

pub fn variance(config: Option<&Path>, exec: &Pool) -> CliResult<Output> {
    let path = need_config(config, "variance")?;
    let cfg: config::VarianceConfig = config::load(&path)?;
    let margins = build_margins(&cfg.margins)?;
    let d = margins.len();
    let copulas = GeneratorSpec::new(cfg.copula.generator(d)?, margins.clone(), 1, 0).copulas()?;

    match (&cfg.function, &cfg.functions) {
        (Some(f), None) => {
            let f = f.build(Some(d))?;
            let conditions =
                if cfg.check_conditions && margins.iter().all(MarginalModel::is_continuous) {
                    c3_gate(&f, &margins)?
                } else {
                    vec![]
                };
            let report = match cfg.finite_n {
                Some(n) => sigma_squared_checked(exec, &f, &margins, &copulas, n)?,
                None => sigma_squared_with(exec, &f, &margins, &copulas)?,
            };
            let mut json = to_json(&report);
            json["conditions"] = to_json(&conditions);
            let check = report.finite_n_check;
            Ok(Output {
                json,
                table: Table {
                    header: vec![
                        "sigma2",
                        "same_j_term",
                        "cross_jk_term",
                        "quad_error",
                        "finite_n",
                        "finite_n_variance",
                        "gap",
                    ],
                    rows: vec![vec![
                        num(report.sigma2),
                        num(report.same_j_term),
                        num(report.cross_jk_term),
                        num(report.quad_error),
                        check.map(|c| c.n.to_string()).unwrap_or_default(),
                        opt(check.map(|c| c.variance)),
                        opt(check.map(|c| c.gap)),
                    ]],
                },
                files: vec![],
            })
        }
        (None, Some(fs)) => {
            let fs = fs
                .iter()
                .map(|f| f.build(Some(d)))
                .collect::<CliResult<Vec<_>>>()?;
            let report = covariance_matrix_with(exec, &fs, &margins, &copulas)?;
            let mut rows = Vec::new();
            for (r, row) in report.matrix.iter().enumerate() {
                for (s, v) in row.iter().enumerate() {
                    rows.push(vec![
                        (r + 1).to_string(),
                        (s + 1).to_string(),
                        num(*v),
                        num(report.quad_error[r][s]),
                    ]);
                }
            }
            Ok(Output {
                json: to_json(&report),
                table: Table {
                    header: vec!["r", "s", "covariance", "quad_error"],
                    rows,
                },
                files: vec![],
            })
        }
        _ => Err(CliError::Config(
            "variance needs exactly one of `function` or `functions`".into(),
        )),
    }
}

pub fn mc(
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
    exec: &Pool,
) -> CliResult<(Output, Option<PathBuf>)> {
    let path = need_config(config, "mc")?;
    let cfg: config::McConfig = config::load(&path)?;
    let margins = build_margins(&cfg.margins)?;
    let d = margins.len();
    let mut kind = cfg.copula.generator(d)?;
    if cfg.antithetic {
        kind = GeneratorKind::Antithetic(Box::new(kind));
    }
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let spec = GeneratorSpec::new(kind, margins, cfg.n, seed);
    let f = cfg.function.build(Some(d))?;
    let out_dir = out.map(Path::to_path_buf).or_else(|| {
        cfg.output
            .as_deref()
            .map(|p| config::resolve(Some(&path), p))
    });
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }

    let output = match cfg.mode {
        McMode::Clt => {
            let reps = cfg
                .reps
                .ok_or_else(|| CliError::Config("mc in clt mode needs `reps`".into()))?;
            let report = mc_clt_with(exec, &f, &spec, reps)?;
            let rows: Vec<Vec<String>> = report
                .values
                .iter()
                .enumerate()
                .map(|(r, v)| vec![r.to_string(), num(*v)])
                .collect();
            let table = Table {
                header: vec!["replication", "centered_scaled"],
                rows,
            };
            let json = to_json(&report);
            let files = vec![
                ("replications.csv".to_string(), table.render()),
                ("summary.json".to_string(), pretty(&json)),
            ];
            Output { json, table, files }
        }
        McMode::Slln => {
            if cfg.reps.is_some() {
                return Err(CliError::Config(
                    "`reps` does not apply to slln mode".into(),
                ));
            }
            let grid = cfg.n_grid.clone().unwrap_or_else(|| {
                let mut g: Vec<usize> = std::iter::successors(Some(10usize), |m| m.checked_mul(10))
                    .take_while(|&m| m < cfg.n)
                    .collect();
                g.push(cfg.n);
                g
            });
            let trace = mc_slln(&f, &spec, &grid)?;
            let rows = trace
                .n_grid
                .iter()
                .zip(&trace.statistic)
                .map(|(n, t)| vec![n.to_string(), num(*t), num(t - trace.gamma_bar)])
                .collect();
            let table = Table {
                header: vec!["n", "statistic", "deviation"],
                rows,
            };
            let json = to_json(&trace);
            let files = vec![
                ("trajectory.csv".to_string(), table.render()),
                ("summary.json".to_string(), pretty(&json)),
            ];
            Output { json, table, files }
        }
        McMode::Linearization => {
            if cfg.reps.is_some() || cfg.n_grid.is_some() {
                return Err(CliError::Config(
                    "linearization mode takes neither `reps` nor `n_grid`".into(),
                ));
            }
            let (u, _) = generate_pair(&spec)?;
            let trace = linearization(&u, &f, &spec.margins)?;
            let table = Table {
                header: vec!["observation", "z"],
                rows: trace
                    .z
                    .iter()
                    .enumerate()
                    .map(|(l, z)| vec![l.to_string(), num(*z)])
                    .collect(),
            };
            let json = to_json(&trace);
            let files = vec![
                ("z.csv".to_string(), table.render()),
                ("summary.json".to_string(), pretty(&json)),
            ];
            Output { json, table, files }
        }
    };
    Ok((output, out_dir))
}

fn probe_rows(r: &ConditionProbeReport, rows: &mut Vec<Vec<String>>) {
    for (i, (&n, &v)) in r.grid_sizes.iter().zip(&r.values).enumerate() {
        let e = r.extrapolated.get(i).copied().flatten();
        rows.push(vec![
            condition_name(r).to_string(),
            n.to_string(),
            num(v),
            opt(e),
        ]);
    }
}

pub fn probe(config: Option<&Path>) -> CliResult<Output> {
    let path = need_config(config, "probe")?;
    let cfg: config::ProbeConfig = config::load(&path)?;
    let margins = build_margins(&cfg.margins)?;
    let f = cfg.function.build(Some(margins.len()))?;
    let mut rows = Vec::new();
    let json = match cfg.condition {
        ProbeKind::C3 => {
            if cfg.j == 0 || cfg.k == 0 {
                return Err(CliError::Config("`j` and `k` are 1-based".into()));
            }
            let p = probe_c3(&f, &margins, cfg.j - 1, cfg.k - 1)?;
            probe_rows(&p.gradient, &mut rows);
            probe_rows(&p.hessian, &mut rows);
            to_json(&p)
        }
        ProbeKind::C2 => {
            let p = probe_c2(&f, &margins, cfg.c0)?;
            probe_rows(&p, &mut rows);
            to_json(&p)
        }
    };
    Ok(Output {
        json,
        table: Table {
            header: vec!["condition", "grid_size", "value", "extrapolated"],
            rows,
        },
        files: vec![],
    })
}

pub struct CounterexampleArgs {
    pub name: Option<String>,
    pub n: Vec<usize>,
    pub seeds: Option<usize>,
}

#[derive(Serialize)]
struct SpikeRow {
    n: usize,
    median_statistic: f64,
    median_over_sqrt_n: f64,
    /// Replications whose two column maxima both land in the top shell.
    corner_hits: usize,
}

pub fn counterexample(
    config: Option<&Path>,
    args: CounterexampleArgs,
    seed: Option<u64>,
    exec: &Pool,
) -> CliResult<Output> {
    let cfg: Option<config::CounterexampleConfig> = config.map(config::load).transpose()?;
    let name = args
        .name
        .or_else(|| cfg.as_ref().map(|c| c.name.clone()))
        .ok_or_else(|| CliError::Config("counterexample needs a name (c1 or c2)".into()))?;
    let grid = if !args.n.is_empty() {
        Some(args.n)
    } else {
        cfg.as_ref().and_then(|c| c.n.clone())
    };
    let seeds = args.seeds.or(cfg.as_ref().and_then(|c| c.seeds));
    let seed = seed.or(cfg.as_ref().and_then(|c| c.seed)).unwrap_or(0);

    match name.as_str() {
        "c1" => {
            let grid = grid.unwrap_or_else(|| vec![10, 1_000, 100_000]);
            let seeds = seeds.unwrap_or(10);
            let mut rows = Vec::new();
            for &n in &grid {
                let outcomes =
                    exec.map(seeds, |s| counterexample_c1(n, child_seed(seed, s as u64)));
                for o in outcomes {
                    rows.push(o?);
                }
            }
            let table = Table {
                header: vec!["n", "seed", "statistic", "gamma_bar"],
                rows: rows
                    .iter()
                    .map(|o| {
                        vec![
                            o.n.to_string(),
                            o.seed.to_string(),
                            num(o.statistic),
                            num(o.gamma_bar),
                        ]
                    })
                    .collect(),
            };
            let json = json!({
                "name": "c1",
                "max_statistic": rows.iter().map(|o| o.statistic).fold(0.0, f64::max),
                "rows": rows,
            });
            Ok(Output {
                json,
                table,
                files: vec![],
            })
        }
        "c2" => {
            let grid = grid.unwrap_or_else(|| vec![1_000, 10_000, 100_000]);
            let seeds = seeds.unwrap_or(50);
            let mut table_rows = Vec::new();
            let mut gamma_bar = f64::NAN;
            for &n in &grid {
                let outcomes = exec
                    .map(seeds, |s| counterexample_c2(n, child_seed(seed, s as u64)))
                    .into_iter()
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(o) = outcomes.first() {
                    gamma_bar = o.gamma_bar;
                }
                let stats: Vec<f64> = outcomes.iter().map(|o| o.statistic).collect();
                let m = median(&stats);
                table_rows.push(SpikeRow {
                    n,
                    median_statistic: m,
                    median_over_sqrt_n: m / (n as f64).sqrt(),
                    corner_hits: outcomes.iter().filter(|o| o.lower_bound > 0.0).count(),
                });
            }
            let probe = probe_c2(
                &CornerSpike,
                &[
                    MarginalModel::standard_uniform(),
                    MarginalModel::standard_uniform(),
                ],
                0.25,
            )?;
            let table = Table {
                header: vec!["n", "median_statistic", "median_over_sqrt_n", "corner_hits"],
                rows: table_rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            num(r.median_statistic),
                            num(r.median_over_sqrt_n),
                            r.corner_hits.to_string(),
                        ]
                    })
                    .collect(),
            };
            let json = json!({
                "name": "c2",
                "seeds": seeds,
                "gamma_bar": gamma_bar,
                "table": table_rows,
                "probe": probe,
            });
            Ok(Output {
                json,
                table,
                files: vec![],
            })
        }
        other => Err(CliError::Config(format!(
            "unknown counterexample `{other}`; expected c1 or c2"
        ))),
    }
}

pub fn bounds(config: Option<&Path>, data: Option<PathBuf>) -> CliResult<Output> {
    let cfg: Option<config::BoundsConfig> = config.map(config::load).transpose()?;
    let path = match (data, &cfg) {
        (Some(p), _) => p,
        (None, Some(c)) => config::resolve(config, &c.data),
        (None, None) => return Err(CliError::Config("bounds needs --data or --config".into())),
    };
    check_file(&path)?;
    let table = read_table(&path)?;
    let (a, b) = match cfg.as_ref().and_then(|c| c.columns.clone()) {
        Some([x, y]) => {
            let find = |name: &str| {
                table
                    .header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CliError::Config(format!("no column named `{name}`")))
            };
            (find(&x)?, find(&y)?)
        }
        None => {
            if table.columns.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: table.columns.len(),
                }
                .into());
            }
            (0, 1)
        }
    };
    let r = broken_sample_bounds(&table.columns[a], &table.columns[b])?;
    Ok(Output {
        json: to_json(&r),
        table: Table {
            header: vec!["lower", "upper"],
            rows: vec![vec![num(r.lower), num(r.upper)]],
        },
        files: vec![],
    })
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}
