use serde::{Deserialize, Serialize};

use super::{exact_truncation_tail, validate_p, within_budget, CostModel, DesignStructure, COST_RTOL};
use crate::error::{Error, Result};
use crate::gp::ModelSpec;

/// Single-level design and the bound that selected it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLevelChoice {
    pub structure: DesignStructure,
    pub level: usize,
    pub bound: f64,
}

/// Spends the whole budget on one level k ≤ K, choosing the k that minimises
/// tail(k) + p·(Σ_{i≤k}λ^{2i})σ²·n_k^{−2ν/d} with n_k = ⌊B/C_k⌋.
pub fn single_level_design(
    budget: f64,
    model: &ModelSpec,
    cost: &CostModel,
    p_const: f64,
) -> Result<SingleLevelChoice> {
    validate_p(p_const)?;
    if !within_budget(cost.level_cost(0), budget) {
        return Err(Error::BudgetTooSmall {
            budget,
            cheapest: cost.level_cost(0),
        });
    }
    let rate = 2.0 * model.kernel().nu() / model.dim() as f64;
    let mut best: Option<(usize, usize, f64)> = None;
    let mut var = 0.0;
    for k in 0..=model.levels() {
        var += model.increment_variance(k);
        let n = (budget / cost.level_cost(k) * (1.0 + COST_RTOL)).floor() as usize;
        if n == 0 {
            continue;
        }
        let bound = exact_truncation_tail(model, k) + p_const * var * (n as f64).powf(-rate);
        if best.is_none_or(|(_, _, b)| bound < b) {
            best = Some((k, n, bound));
        }
    }
    let (level, n, bound) = best.expect("level 0 is affordable");
    let mut counts = vec![0; model.levels() + 1];
    counts[level] = n;
    Ok(SingleLevelChoice {
        structure: DesignStructure::new(counts, cost),
        level,
        bound,
    })
}

fn geometric_counts(n0: usize, levels: usize, decay: f64) -> Vec<usize> {
    (0..=levels)
        .map(|i| (n0 as f64 / decay.powi(i as i32)).round() as usize)
        .collect()
}

/// n_i = round(n_0/r^i) for the largest n_0 within budget with n_K ≥ 1.
pub fn geometric_mf_design(
    budget: f64,
    levels: usize,
    cost: &CostModel,
    decay_ratio: f64,
) -> Result<DesignStructure> {
    if !(decay_ratio.is_finite() && decay_ratio >= 1.0) {
        return Err(Error::invalid(
            "decay_ratio",
            format!("must be at least 1, got {decay_ratio}"),
        ));
    }
    let mut n0 = (0.5 * decay_ratio.powi(levels as i32)).ceil().max(1.0) as usize;
    while geometric_counts(n0, levels, decay_ratio)[levels] == 0 {
        n0 += 1;
    }
    if !within_budget(cost.total(&geometric_counts(n0, levels, decay_ratio)), budget) {
        return Err(Error::Infeasible(format!(
            "budget {budget} cannot afford one top-level sample with decay ratio {decay_ratio}"
        )));
    }
    while within_budget(cost.total(&geometric_counts(n0 + 1, levels, decay_ratio)), budget) {
        n0 += 1;
    }
    Ok(DesignStructure::new(
        geometric_counts(n0, levels, decay_ratio),
        cost,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::lowdisc::DomainBox;

    fn model(levels: usize, lambda_sq: f64, domain: DomainBox) -> ModelSpec {
        ModelSpec::new(lambda_sq, 1.0, levels, KernelSpec::new(1.25, 1.5).unwrap(), domain).unwrap()
    }

    #[test]
    fn geometric_rows() {
        let c8 = CostModel::new(8.0, 1.0).unwrap();
        let s = geometric_mf_design(4760.0, 3, &c8, 2.0).unwrap();
        assert_eq!(s.counts, vec![56, 28, 14, 7]);
        assert_eq!(s.total_cost, 4760.0);

        let c4 = CostModel::new(4.0, 1.0).unwrap();
        let s = geometric_mf_design(96.0, 2, &c4, 4.0).unwrap();
        assert_eq!(s.counts, vec![32, 8, 2]);
        assert_eq!(s.total_cost, 96.0);

        let s = geometric_mf_design(100.0, 2, &c4, 1.0).unwrap();
        assert_eq!(s.counts, vec![4, 4, 4]);
    }

    #[test]
    fn geometric_unaffordable() {
        let c4 = CostModel::new(4.0, 1.0).unwrap();
        assert!(geometric_mf_design(10.0, 2, &c4, 4.0).is_err());
    }

    #[test]
    fn single_level_rows() {
        let line = DomainBox::new(vec![0.0], vec![15.0]).unwrap();
        let c8 = CostModel::new(8.0, 1.0).unwrap();
        let choice = single_level_design(4760.0, &model(3, 1.0 / 3.0, line), &c8, 2000.0).unwrap();
        assert_eq!(choice.level, 2);
        assert_eq!(choice.structure.counts, vec![0, 0, 74, 0]);
        assert_eq!(choice.structure.total_cost, 4736.0);

        let square = DomainBox::unit(2).unwrap();
        let c4 = CostModel::new(4.0, 1.0).unwrap();
        let choice = single_level_design(96.0, &model(2, 0.5, square), &c4, 1.0).unwrap();
        assert_eq!(choice.structure.counts, vec![0, 0, 6]);
    }

    #[test]
    fn single_level_cheap_budget_uses_level_zero() {
        let c4 = CostModel::new(4.0, 1.0).unwrap();
        let m = model(2, 0.5, DomainBox::unit(1).unwrap());
        let choice = single_level_design(3.0, &m, &c4, 1.0).unwrap();
        assert_eq!(choice.level, 0);
        assert_eq!(choice.structure.counts, vec![3, 0, 0]);
        assert!(single_level_design(0.5, &m, &c4, 1.0).is_err());
    }
}
