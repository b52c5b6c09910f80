//! Per-level sample counts: precision targets, budget targets, the error
//! surrogates they trade off, and the comparison designs.

mod baseline;
mod budget;
mod precision;

pub use baseline::{geometric_mf_design, single_level_design, SingleLevelChoice};
pub use budget::{
    budget_allocation, budget_base_structure, greedy_surrogate, reallocate_greedy, BudgetProblem,
};
pub use precision::{
    level_count_for_precision, mlgp_total_cost_curve, precision_allocation,
    precision_allocation_relaxed, single_level_cost_curve, CostPoint, PrecisionProblem,
};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gp::ModelSpec;

/// Relative slack used in every budget comparison.
pub(crate) const COST_RTOL: f64 = 1e-12;

pub(crate) fn within_budget(cost: f64, budget: f64) -> bool {
    cost <= budget * (1.0 + COST_RTOL)
}

/// Ceiling that ignores relative rounding noise just above an integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    (x * (1.0 - COST_RTOL)).ceil()
}

/// Per-sample cost C_i = C_a·a^i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    ratio: f64,
    c_low: f64,
    c_high: f64,
}

impl CostModel {
    /// `c_high` is C_a; C_b defaults to the same value.
    pub fn new(ratio: f64, c_high: f64) -> Result<Self> {
        Self::with_bounds(ratio, c_high, c_high)
    }

    pub fn with_bounds(ratio: f64, c_low: f64, c_high: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::invalid("cost_ratio", format!("must exceed 1, got {ratio}")));
        }
        if !(c_low > 0.0 && c_low <= c_high && c_high.is_finite()) {
            return Err(Error::invalid(
                "cost_base",
                format!("need 0 < C_b <= C_a, got {c_low}, {c_high}"),
            ));
        }
        Ok(Self {
            ratio,
            c_low,
            c_high,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn c_low(&self) -> f64 {
        self.c_low
    }

    pub fn c_high(&self) -> f64 {
        self.c_high
    }

    pub fn level_cost(&self, i: usize) -> f64 {
        self.c_high * self.ratio.powi(i as i32)
    }

    pub fn total(&self, counts: &[usize]) -> f64 {
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| n as f64 * self.level_cost(i))
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_bounds(self.ratio, self.c_low * factor, self.c_high * factor)
    }
}

/// Sample counts n_0..n_K with their costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignStructure {
    pub counts: Vec<usize>,
    pub costs_per_level: Vec<f64>,
    pub total_cost: f64,
}

impl DesignStructure {
    pub fn new(counts: Vec<usize>, cost: &CostModel) -> Self {
        let costs_per_level: Vec<f64> = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| n as f64 * cost.level_cost(i))
            .collect();
        let total_cost = costs_per_level.iter().sum();
        Self {
            counts,
            costs_per_level,
            total_cost,
        }
    }

    pub fn levels(&self) -> usize {
        self.counts.len().saturating_sub(1)
    }

    pub fn is_monotone(&self) -> bool {
        self.counts.windows(2).all(|w| w[1] <= w[0])
    }

    /// Counts joined with `;`, as used in CSV cells.
    pub fn counts_label(&self) -> String {
        self.counts
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn to_json(&self, params: Value) -> Value {
        json!({
            "counts": self.counts,
            "costs_per_level": self.costs_per_level,
            "total_cost": self.total_cost,
            "params": params,
        })
    }

    pub fn csv_header() -> &'static str {
        "counts,total_cost"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{}", self.counts_label(), self.total_cost)
    }
}

/// C_l² = C_s/(1−λ)².
pub fn truncation_constant_sq(model: &ModelSpec) -> f64 {
    model.volume() / (1.0 - model.lambda()).powi(2)
}

/// C_l²λ^{2K}σ².
pub fn truncation_bound(model: &ModelSpec, levels: usize) -> f64 {
    truncation_constant_sq(model) * model.lambda_sq().powi(levels as i32) * model.sigma_sq()
}

/// C_sσ²λ^{2(K+1)}/(1−λ²), the expected squared L² norm of Σ_{i>K} δ_i.
pub fn exact_truncation_tail(model: &ModelSpec, levels: usize) -> f64 {
    let l2 = model.lambda_sq();
    model.volume() * model.sigma_sq() * l2.powi(levels as i32 + 1) / (1.0 - l2)
}

/// Σ pλ^{2i}σ²n_i^{−2ν/d}. Infinite when some level has no samples.
pub fn interpolation_bound_surrogate(counts: &[usize], model: &ModelSpec, p_const: f64) -> f64 {
    let rate = 2.0 * model.kernel().nu() / model.dim() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if n == 0 {
                f64::INFINITY
            } else {
                p_const * model.increment_variance(i) * (n as f64).powf(-rate)
            }
        })
        .sum()
}

pub(crate) fn validate_p(p_const: f64) -> Result<()> {
    if p_const.is_finite() && p_const > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("p_const", format!("must be positive, got {p_const}")))
    }
}
