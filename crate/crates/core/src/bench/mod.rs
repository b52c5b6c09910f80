//! Simulation studies: design every method once, then replay replications
//! against shared sampled truths and collect RMSEs.

mod asymptotics;
mod config;

pub use asymptotics::{asymptotics_study, fit_loglog_slope, AsymptoticsReport, Regime};
pub use config::{parse_key_values, parse_methods, BenchConfig, Method};

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::allocator::{
    budget_allocation, geometric_mf_design, single_level_design, BudgetProblem, DesignStructure,
};
use crate::error::{Error, Result};
use crate::gp::{sample_multilevel_truth, KrigingPredictor, LevelData, MultilevelEmulator};
use crate::lowdisc::{build_nested_design, build_prefix_design, DomainBox};
use crate::rng::{derive_seed, stream};

pub const SCHEMA_VERSION: u32 = 1;

/// √(mean squared difference).
pub fn rmse(truth: &[f64], predictions: &[f64]) -> Result<f64> {
    if truth.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let sum: f64 = truth
        .iter()
        .zip(predictions)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

const NLHD_POINTS: [[f64; 2]; 32] = [
    [0.166670, 0.863640],
    [0.712120, 0.318180],
    [0.590910, 0.712120],
    [0.984850, 0.590910],
    [0.863640, 0.984850],
    [0.045455, 0.166670],
    [0.439390, 0.045455],
    [0.287880, 0.469700],
    [0.954550, 0.409090],
    [0.833330, 0.681820],
    [0.196970, 0.136360],
    [0.348480, 0.924240],
    [0.681820, 0.954550],
    [0.651520, 0.530300],
    [0.136360, 0.378790],
    [0.530300, 0.439390],
    [0.893940, 0.833330],
    [0.621210, 0.075758],
    [0.318180, 0.772730],
    [0.257580, 0.287880],
    [0.772730, 0.106060],
    [0.075758, 0.742420],
    [0.378790, 0.196970],
    [0.106060, 0.560610],
    [0.560610, 0.227270],
    [0.803030, 0.500000],
    [0.469700, 0.621210],
    [0.227270, 0.651520],
    [0.924240, 0.257580],
    [0.409090, 0.348480],
    [0.500000, 0.893940],
    [0.742420, 0.803030],
];

/// Published two-dimensional nested Latin hypercube: 32, 8 and 2 points for
/// levels 0, 1 and 2, each a prefix of the next larger set.
pub fn nlhd_fixture() -> Vec<Vec<Vec<f64>>> {
    let all: Vec<Vec<f64>> = NLHD_POINTS.iter().map(|p| p.to_vec()).collect();
    vec![all.clone(), all[..8].to_vec(), all[..2].to_vec()]
}

/// How a method lays out and uses its samples.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodDesign {
    /// Levelwise increments at per-level point sets.
    Multilevel {
        structure: DesignStructure,
        levels: Vec<Vec<Vec<f64>>>,
    },
    /// Cumulative output y_k observed at one level only.
    SingleLevel {
        structure: DesignStructure,
        level: usize,
        points: Vec<Vec<f64>>,
    },
}

impl MethodDesign {
    pub fn structure(&self) -> &DesignStructure {
        match self {
            MethodDesign::Multilevel { structure, .. } | MethodDesign::SingleLevel { structure, .. } => structure,
        }
    }

    fn all_points(&self) -> Box<dyn Iterator<Item = &Vec<f64>> + '_> {
        match self {
            MethodDesign::Multilevel { levels, .. } => Box::new(levels.iter().flatten()),
            MethodDesign::SingleLevel { points, .. } => Box::new(points.iter()),
        }
    }
}

fn scale_unit_points(points: Vec<Vec<f64>>, domain: &DomainBox) -> Vec<Vec<f64>> {
    points.into_iter().map(|p| domain.scale(&p)).collect()
}

/// Computes the design a method uses under `config`.
pub fn method_design(config: &BenchConfig, method: Method) -> Result<MethodDesign> {
    let cost = config.cost_model()?;
    let domain = &config.domain;
    match method {
        Method::Mlgp => {
            let prob = BudgetProblem::new(config.budget, config.design_model()?, cost)?
                .with_monotone(!config.allow_non_nested);
            let structure = budget_allocation(&prob);
            let levels = if structure.is_monotone() {
                build_nested_design(&structure.counts, domain)?.levels().to_vec()
            } else {
                build_prefix_design(&structure.counts, domain)
            };
            Ok(MethodDesign::Multilevel { structure, levels })
        }
        Method::Geometric => {
            let r = config
                .decay_ratio
                .ok_or_else(|| Error::invalid("decay_ratio", "required for the geometric method"))?;
            let structure = geometric_mf_design(config.budget, config.levels, &cost, r)?;
            let levels = build_nested_design(&structure.counts, domain)?.levels().to_vec();
            Ok(MethodDesign::Multilevel { structure, levels })
        }
        Method::Single => {
            let choice = single_level_design(config.budget, &config.design_model()?, &cost, config.p_const)?;
            let points = crate::lowdisc::halton_points(choice.structure.counts[choice.level], domain);
            Ok(MethodDesign::SingleLevel {
                structure: choice.structure,
                level: choice.level,
                points,
            })
        }
        Method::Nlhd => {
            if domain.dim() != 2 || config.levels != 2 {
                return Err(Error::invalid(
                    "methods",
                    "the nlhd fixture needs a 2-d domain and levels = 2",
                ));
            }
            let levels: Vec<Vec<Vec<f64>>> = nlhd_fixture()
                .into_iter()
                .map(|l| scale_unit_points(l, domain))
                .collect();
            let counts = levels.iter().map(Vec::len).collect();
            Ok(MethodDesign::Multilevel {
                structure: DesignStructure::new(counts, &cost),
                levels,
            })
        }
    }
}

/// Designs for every configured method, computed once per study.
#[derive(Debug, Clone)]
pub struct Study {
    config: BenchConfig,
    designs: Vec<(Method, MethodDesign)>,
}

fn point_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|x| x.to_bits()).collect()
}

impl Study {
    pub fn new(config: &BenchConfig) -> Result<Self> {
        config.validate()?;
        let designs = config
            .methods
            .iter()
            .map(|&m| method_design(config, m).map(|d| (m, d)))
            .collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            designs,
        })
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    pub fn designs(&self) -> &[(Method, MethodDesign)] {
        &self.designs
    }

    /// RMSE of every method on one sampled truth, in configured method order.
    pub fn replicate(&self, seed: u64) -> Result<Vec<f64>> {
        let model = self.config.truth_model()?;
        let domain = &self.config.domain;
        let mut rng = stream(seed);

        let mut eval: Vec<Vec<f64>> = Vec::new();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (_, design) in &self.designs {
            for p in design.all_points() {
                index.entry(point_key(p)).or_insert_with(|| {
                    eval.push(p.clone());
                    eval.len() - 1
                });
            }
        }
        let test_start = eval.len();
        for _ in 0..self.config.n_test {
            let p: Vec<f64> = domain
                .lower()
                .iter()
                .zip(domain.upper())
                .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            eval.push(p);
        }
        let test_points = &eval[test_start..];

        let truth = sample_multilevel_truth(&model, &eval, &mut rng)?;
        let target = &truth.top()[test_start..];
        let lookup = |p: &Vec<f64>| index[&point_key(p)];

        let mut out = Vec::with_capacity(self.designs.len());
        for (_, design) in &self.designs {
            let predictions = match design {
                MethodDesign::Multilevel { levels, .. } => {
                    let data = levels
                        .iter()
                        .enumerate()
                        .map(|(i, pts)| {
                            let values = pts.iter().map(|p| truth.increments[i][lookup(p)]).collect();
                            LevelData::new(i, pts.clone(), values)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    MultilevelEmulator::fit_levels(&model, &data)?.predict_batch(test_points)
                }
                MethodDesign::SingleLevel { level, points, .. } => {
                    let values: Vec<f64> = points.iter().map(|p| truth.cumulative[*level][lookup(p)]).collect();
                    KrigingPredictor::fit_level(*level, model.kernel(), points, &values)?
                        .predict_batch(test_points)
                }
            };
            out.push(rmse(target, &predictions)?);
        }
        Ok(out)
    }

    /// Runs all replications, optionally on a dedicated pool of `threads`.
    pub fn run(&self, threads: Option<usize>) -> Result<BenchResult> {
        let seeds: Vec<u64> = (0..self.config.replications as u64)
            .map(|r| derive_seed(self.config.seed, r))
            .collect();
        let work = || -> Result<Vec<Vec<f64>>> {
            seeds
                .par_iter()
                .enumerate()
                .map(|(r, &s)| {
                    self.replicate(s).map_err(|e| match e {
                        Error::Factorization { .. } => e,
                        other => Error::Infeasible(format!("replication {r}: {other}")),
                    })
                })
                .collect()
        };
        let per_rep = match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid("threads", e.to_string()))?
                .install(work)?,
            None => work()?,
        };
        let methods = self
            .designs
            .iter()
            .enumerate()
            .map(|(j, (method, design))| {
                let rmse: Vec<f64> = per_rep.iter().map(|row| row[j]).collect();
                let mean_rmse = rmse.iter().sum::<f64>() / rmse.len() as f64;
                let level = match design {
                    MethodDesign::SingleLevel { level, .. } => Some(*level),
                    MethodDesign::Multilevel { .. } => None,
                };
                MethodResult {
                    method: *method,
                    structure: design.structure().clone(),
                    single_level: level,
                    rmse,
                    mean_rmse,
                }
            })
            .collect();
        Ok(BenchResult {
            schema: SCHEMA_VERSION,
            config: self.config.clone(),
            seed: self.config.seed,
            seeds,
            methods,
        })
    }
}

/// One RMSE per replication of a single method.
pub fn run_replication(config: &BenchConfig, method: Method, seed: u64) -> Result<f64> {
    let study = Study::new(config)?;
    let j = config
        .methods
        .iter()
        .position(|&m| m == method)
        .ok_or_else(|| Error::invalid("method", format!("`{method}` is not configured")))?;
    Ok(study.replicate(seed)?[j])
}

pub fn run_study(config: &BenchConfig, threads: Option<usize>) -> Result<BenchResult> {
    Study::new(config)?.run(threads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub structure: DesignStructure,
    pub single_level: Option<usize>,
    pub rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub schema: u32,
    pub config: BenchConfig,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodResult>,
}

impl BenchResult {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Method with the smallest mean RMSE; earlier configured methods win ties.
    pub fn best(&self) -> Option<Method> {
        self.methods
            .iter()
            .fold(None::<&MethodResult>, |best, r| match best {
                Some(b) if b.mean_rmse <= r.mean_rmse => Some(b),
                _ => Some(r),
            })
            .map(|r| r.method)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "method,replication,seed,rmse,total_cost,structure")?;
        for m in &self.methods {
            for (r, (rmse, seed)) in m.rmse.iter().zip(&self.seeds).enumerate() {
                writeln!(
                    out,
                    "{},{r},{seed},{rmse},{},{}",
                    m.method,
                    m.structure.total_cost,
                    m.structure.counts_label()
                )?;
            }
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

/// Mean RMSE per (budget, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: f64,
    pub method: Method,
    pub mean_rmse: f64,
}

pub fn budget_sweep(config: &BenchConfig, budgets: &[f64], threads: Option<usize>) -> Result<Vec<SweepRow>> {
    if budgets.is_empty() {
        return Err(Error::invalid("budgets", "at least one budget is required"));
    }
    let mut rows = Vec::new();
    for &b in budgets {
        let cfg = BenchConfig {
            budget: b,
            ..config.clone()
        };
        for m in run_study(&cfg, threads)?.methods {
            rows.push(SweepRow {
                budget: b,
                method: m.method,
                mean_rmse: m.mean_rmse,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "budget,method,mean_rmse")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.budget, r.method, r.mean_rmse)?;
    }
    Ok(())
}

/// Parameters echoed into structure JSON.
pub fn design_params(config: &BenchConfig) -> serde_json::Value {
    json!({
        "budget": config.budget,
        "levels": config.levels,
        "lambda_sq": config.design_lambda_sq.unwrap_or(config.lambda_sq),
        "sigma_sq": config.sigma_sq,
        "nu": config.design_nu.unwrap_or(config.nu),
        "dim": config.domain.dim(),
        "cost_ratio": config.cost_ratio,
        "cost_base": config.cost_base,
    })
}
