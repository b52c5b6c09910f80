use super::precision::{allocation_shape, normaliser};
use super::{ceil_tol, within_budget, CostModel, DesignStructure};
use crate::error::{Error, Result};
use crate::gp::ModelSpec;

const ETA_RTOL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 500;
/// Counts above this are treated as unaffordable during the η search.
const COUNT_CAP: f64 = 1e15;

/// Fixed-budget design problem over levels 0..=K of `model`.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetProblem {
    budget: f64,
    model: ModelSpec,
    cost: CostModel,
    eta_range: (f64, f64),
    monotone: bool,
}

impl BudgetProblem {
    pub fn new(budget: f64, model: ModelSpec, cost: CostModel) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::invalid("budget", format!("must be positive, got {budget}")));
        }
        if !within_budget(cost.level_cost(0), budget) {
            return Err(Error::BudgetTooSmall {
                budget,
                cheapest: cost.level_cost(0),
            });
        }
        Ok(Self {
            budget,
            model,
            cost,
            eta_range: (1e-8, 1e8),
            monotone: true,
        })
    }

    pub fn with_eta_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid("eta_range", format!("need 0 < lo < hi, got {lo}, {hi}")));
        }
        self.eta_range = (lo, hi);
        Ok(self)
    }

    /// Whether greedy additions must keep n_{i} ≤ n_{i−1}.
    pub fn with_monotone(mut self, monotone: bool) -> Self {
        self.monotone = monotone;
        self
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn levels(&self) -> usize {
        self.model.levels()
    }

    pub fn monotone(&self) -> bool {
        self.monotone
    }

    pub fn eta_range(&self) -> (f64, f64) {
        self.eta_range
    }
}

/// n_i(η) = ⌈(ηS/λ^{2K})^{d/(2ν)} · (a^i/λ^{2i})^{−d/(d+2ν)}⌉, or `None` past the cap.
fn counts_at_eta(prob: &BudgetProblem, eta: f64) -> Option<Vec<usize>> {
    let model = &prob.model;
    let k = prob.levels();
    let d = model.dim() as f64;
    let nu = model.kernel().nu();
    let s = normaliser(model, &prob.cost, k);
    let ln_lead = d / (2.0 * nu) * (eta.ln() + s.ln() - k as f64 * model.lambda_sq().ln());
    (0..=k)
        .map(|i| {
            let n = (ln_lead).exp() * allocation_shape(model, &prob.cost, i);
            (n <= COUNT_CAP).then(|| ceil_tol(n) as usize)
        })
        .collect()
}

fn affordable(prob: &BudgetProblem, counts: &Option<Vec<usize>>) -> bool {
    counts
        .as_ref()
        .is_some_and(|c| within_budget(prob.cost.total(c), prob.budget))
}

/// Structure at the largest feasible η, before reallocation. All zeros when
/// even the smallest η in range overspends.
pub fn budget_base_structure(prob: &BudgetProblem) -> DesignStructure {
    let (mut lo, mut hi) = prob.eta_range;
    let zeros = || DesignStructure::new(vec![0; prob.levels() + 1], &prob.cost);
    let at_lo = counts_at_eta(prob, lo);
    if !affordable(prob, &at_lo) {
        return zeros();
    }
    let at_hi = counts_at_eta(prob, hi);
    if affordable(prob, &at_hi) {
        return DesignStructure::new(at_hi.unwrap(), &prob.cost);
    }
    let mut best = at_lo.unwrap();
    for _ in 0..MAX_BISECTIONS {
        if hi / lo - 1.0 < ETA_RTOL {
            break;
        }
        let mid = (lo * hi).sqrt();
        let at_mid = counts_at_eta(prob, mid);
        if affordable(prob, &at_mid) {
            lo = mid;
            best = at_mid.unwrap();
        } else {
            hi = mid;
        }
    }
    DesignStructure::new(best, &prob.cost)
}

/// G(N) = Σ λ^{2i}σ² n_i^{−2ν/d}; infinite if any level is empty.
pub fn greedy_surrogate(counts: &[usize], model: &ModelSpec) -> f64 {
    super::interpolation_bound_surrogate(counts, model, 1.0)
}

fn decrement(model: &ModelSpec, level: usize, n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let rate = 2.0 * model.kernel().nu() / model.dim() as f64;
    let n = n as f64;
    model.increment_variance(level) * (n.powf(-rate) - (n + 1.0).powf(-rate))
}

/// Spends the leftover budget one sample at a time on the affordable level
/// with the largest surrogate decrease. Ties go to the lowest level.
pub fn reallocate_greedy(base: &DesignStructure, prob: &BudgetProblem) -> DesignStructure {
    let mut counts = base.counts.clone();
    let mut spent = prob.cost.total(&counts);
    loop {
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..counts.len() {
            let c = prob.cost.level_cost(i);
            if !within_budget(spent + c, prob.budget) {
                continue;
            }
            if prob.monotone && i > 0 && counts[i] + 1 > counts[i - 1] {
                continue;
            }
            let gain = decrement(&prob.model, i, counts[i]);
            if pick.is_none_or(|(_, g)| gain > g) {
                pick = Some((i, gain));
            }
        }
        match pick {
            Some((i, _)) => {
                counts[i] += 1;
                spent += prob.cost.level_cost(i);
            }
            None => break,
        }
    }
    DesignStructure::new(counts, &prob.cost)
}

/// η search followed by greedy reallocation of the unspent budget.
pub fn budget_allocation(prob: &BudgetProblem) -> DesignStructure {
    reallocate_greedy(&budget_base_structure(prob), prob)
}
