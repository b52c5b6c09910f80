use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::allocator::CostModel;
use crate::error::{Error, Result};
use crate::gp::ModelSpec;
use crate::kernel::KernelSpec;
use crate::lowdisc::DomainBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mlgp,
    Geometric,
    Single,
    Nlhd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mlgp => "mlgp",
            Method::Geometric => "geometric",
            Method::Single => "single",
            Method::Nlhd => "nlhd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlgp" => Ok(Method::Mlgp),
            "geometric" | "multi-fidelity" | "mf" => Ok(Method::Geometric),
            "single" | "single-level" => Ok(Method::Single),
            "nlhd" | "nlhd-fixture" => Ok(Method::Nlhd),
            other => Err(Error::invalid("methods", format!("unknown method `{other}`"))),
        }
    }
}

pub fn parse_methods(text: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Everything a simulation study needs. Built from `key = value` text or
/// directly; call [`validate`](Self::validate) before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub lambda_sq: f64,
    pub sigma_sq: f64,
    pub nu: f64,
    pub lengthscale: f64,
    pub levels: usize,
    pub domain: DomainBox,
    pub cost_ratio: f64,
    pub cost_base: f64,
    pub decay_ratio: Option<f64>,
    pub budget: f64,
    pub methods: Vec<Method>,
    pub n_test: usize,
    pub replications: usize,
    pub seed: u64,
    pub p_const: f64,
    /// λ² assumed when computing the MLGP design, if different from the truth.
    pub design_lambda_sq: Option<f64>,
    /// ν assumed when computing the MLGP design, if different from the truth.
    pub design_nu: Option<f64>,
    pub allow_non_nested: bool,
    pub budgets: Vec<f64>,
    pub epsilon_min: Option<f64>,
    pub epsilon_max: Option<f64>,
    pub epsilon_points: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lambda_sq: 0.5,
            sigma_sq: 1.0,
            nu: 1.25,
            lengthscale: 1.0,
            levels: 2,
            domain: DomainBox::unit(1).expect("unit box"),
            cost_ratio: 4.0,
            cost_base: 1.0,
            decay_ratio: None,
            budget: 96.0,
            methods: vec![Method::Mlgp, Method::Single],
            n_test: 200,
            replications: 30,
            seed: 0,
            p_const: 1.0,
            design_lambda_sq: None,
            design_nu: None,
            allow_non_nested: false,
            budgets: Vec::new(),
            epsilon_min: None,
            epsilon_max: None,
            epsilon_points: 31,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("`{key}`: cannot parse `{value}`"),
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config {
            line,
            message: format!("`{key}`: expected a boolean, got `{value}`"),
        }),
    }
}

/// Splits `key = value` lines, dropping blanks and `#` comments.
/// Returns `(line number, key, value)` in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = k.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Config {
                line,
                message: "empty key".into(),
            });
        }
        out.push((line, key, v.trim().to_string()));
    }
    Ok(out)
}

impl BenchConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(&parse_key_values(text)?)?;
        Ok(cfg)
    }

    /// Applies `(line, key, value)` settings in order; later entries win.
    /// Line 0 marks settings that did not come from a file.
    pub fn apply(&mut self, entries: &[(usize, String, String)]) -> Result<()> {
        let mut dim: Option<(usize, usize)> = None;
        let mut domain_set = false;
        for (line, key, value) in entries {
            let (line, key, v) = (*line, key.as_str(), value.as_str());
            match key {
                "lambda_sq" => self.lambda_sq = parse_num(key, v, line)?,
                "lambda" => {
                    let l: f64 = parse_num(key, v, line)?;
                    self.lambda_sq = l * l;
                }
                "sigma_sq" => self.sigma_sq = parse_num(key, v, line)?,
                "nu" => self.nu = parse_num(key, v, line)?,
                "lengthscale" | "theta" => self.lengthscale = parse_num(key, v, line)?,
                "levels" | "k" => self.levels = parse_num(key, v, line)?,
                "dim" | "d" => dim = Some((parse_num(key, v, line)?, line)),
                "domain" => {
                    self.domain = DomainBox::parse(v).map_err(|e| Error::Config {
                        line,
                        message: e.to_string(),
                    })?;
                    domain_set = true;
                }
                "cost_ratio" | "a" => self.cost_ratio = parse_num(key, v, line)?,
                "cost_base" | "c_a" => self.cost_base = parse_num(key, v, line)?,
                "decay_ratio" | "r" => self.decay_ratio = Some(parse_num(key, v, line)?),
                "budget" | "b" => self.budget = parse_num(key, v, line)?,
                "methods" => {
                    self.methods = parse_methods(v).map_err(|e| Error::Config {
                        line,
                        message: e.to_string(),
                    })?
                }
                "n_test" => self.n_test = parse_num(key, v, line)?,
                "replications" => self.replications = parse_num(key, v, line)?,
                "seed" => self.seed = parse_num(key, v, line)?,
                "p_const" | "p" => self.p_const = parse_num(key, v, line)?,
                "design_lambda_sq" => self.design_lambda_sq = Some(parse_num(key, v, line)?),
                "design_lambda" => {
                    let l: f64 = parse_num(key, v, line)?;
                    self.design_lambda_sq = Some(l * l);
                }
                "design_nu" => self.design_nu = Some(parse_num(key, v, line)?),
                "allow_non_nested" => self.allow_non_nested = parse_bool(key, v, line)?,
                "budgets" => {
                    self.budgets = v
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| parse_num(key, s.trim(), line))
                        .collect::<Result<_>>()?
                }
                "epsilon_min" => self.epsilon_min = Some(parse_num(key, v, line)?),
                "epsilon_max" => self.epsilon_max = Some(parse_num(key, v, line)?),
                "epsilon_points" => self.epsilon_points = parse_num(key, v, line)?,
                _ => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        if let Some((d, line)) = dim {
            if domain_set {
                if d != self.domain.dim() {
                    return Err(Error::Config {
                        line,
                        message: format!("dim = {d} disagrees with the {}-d domain", self.domain.dim()),
                    });
                }
            } else {
                self.domain = DomainBox::unit(d).map_err(|e| Error::Config {
                    line,
                    message: e.to_string(),
                })?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.n_test == 0 {
            return Err(Error::invalid("n_test", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "at least one method is required"));
        }
        if self.methods.contains(&Method::Geometric) && self.decay_ratio.is_none() {
            return Err(Error::invalid(
                "decay_ratio",
                "required when the geometric method is selected",
            ));
        }
        if self.methods.contains(&Method::Nlhd) && (self.domain.dim() != 2 || self.levels != 2) {
            return Err(Error::invalid(
                "methods",
                "the nlhd fixture needs a 2-d domain and levels = 2",
            ));
        }
        self.truth_model()?;
        self.design_model()?;
        self.cost_model()?;
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.nu, self.lengthscale)
    }

    pub fn truth_model(&self) -> Result<ModelSpec> {
        ModelSpec::new(
            self.lambda_sq,
            self.sigma_sq,
            self.levels,
            self.kernel()?,
            self.domain.clone(),
        )
    }

    /// Model used to compute designs; differs from the truth when misspecified.
    pub fn design_model(&self) -> Result<ModelSpec> {
        let kernel = KernelSpec::new(self.design_nu.unwrap_or(self.nu), self.lengthscale)?;
        ModelSpec::new(
            self.design_lambda_sq.unwrap_or(self.lambda_sq),
            self.sigma_sq,
            self.levels,
            kernel,
            self.domain.clone(),
        )
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        CostModel::new(self.cost_ratio, self.cost_base)
    }
}

impl fmt::Display for BenchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("lambda_sq", self.lambda_sq.to_string());
        kv.insert("sigma_sq", self.sigma_sq.to_string());
        kv.insert("nu", self.nu.to_string());
        kv.insert("lengthscale", self.lengthscale.to_string());
        kv.insert("levels", self.levels.to_string());
        kv.insert("domain", self.domain.to_string());
        kv.insert("cost_ratio", self.cost_ratio.to_string());
        kv.insert("cost_base", self.cost_base.to_string());
        if let Some(r) = self.decay_ratio {
            kv.insert("decay_ratio", r.to_string());
        }
        kv.insert("budget", self.budget.to_string());
        kv.insert(
            "methods",
            self.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        kv.insert("n_test", self.n_test.to_string());
        kv.insert("replications", self.replications.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("p_const", self.p_const.to_string());
        if let Some(v) = self.design_lambda_sq {
            kv.insert("design_lambda_sq", v.to_string());
        }
        if let Some(v) = self.design_nu {
            kv.insert("design_nu", v.to_string());
        }
        kv.insert("allow_non_nested", self.allow_non_nested.to_string());
        for (k, v) in kv {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
