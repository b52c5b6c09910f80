use serde::{Deserialize, Serialize};

use super::{
    ceil_tol, exact_truncation_tail, truncation_bound, validate_p, CostModel, DesignStructure,
};
use crate::error::{Error, Result};
use crate::gp::ModelSpec;

const MAX_LEVELS: usize = 10_000;

/// Fixed-accuracy design problem. The model's own level count is ignored;
/// K is derived from ε.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionProblem {
    epsilon: f64,
    model: ModelSpec,
    cost: CostModel,
    p_const: f64,
}

impl PrecisionProblem {
    pub fn new(epsilon: f64, model: ModelSpec, cost: CostModel, p_const: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        validate_p(p_const)?;
        Ok(Self {
            epsilon,
            model,
            cost,
            p_const,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn p_const(&self) -> f64 {
        self.p_const
    }

    /// α = ln a.
    pub fn alpha(&self) -> f64 {
        self.cost.ratio().ln()
    }

    /// β = −ln λ².
    pub fn beta(&self) -> f64 {
        -self.model.lambda_sq().ln()
    }
}

/// Smallest K ≥ 0 with C_l²λ^{2K}σ² ≤ ε²/2.
pub fn level_count_for_precision(prob: &PrecisionProblem) -> usize {
    let target = prob.epsilon * prob.epsilon / 2.0;
    (0..MAX_LEVELS)
        .find(|&k| truncation_bound(&prob.model, k) <= target * (1.0 + super::COST_RTOL))
        .unwrap_or(MAX_LEVELS)
}

/// S = Σ_{i≤K} (a^i)^{2ν/(d+2ν)} (λ^{2i})^{d/(d+2ν)}.
fn lagrange_sum(model: &ModelSpec, cost: &CostModel, levels: usize) -> f64 {
    let d = model.dim() as f64;
    let two_nu = 2.0 * model.kernel().nu();
    let (ln_a, ln_l2) = (cost.ratio().ln(), model.lambda_sq().ln());
    (0..=levels)
        .map(|i| {
            let i = i as f64;
            (i * (two_nu * ln_a + d * ln_l2) / (d + two_nu)).exp()
        })
        .sum()
}

/// Allocation shape (a^i/λ^{2i})^{−d/(d+2ν)}, level 0 normalised to 1.
pub(crate) fn allocation_shape(model: &ModelSpec, cost: &CostModel, i: usize) -> f64 {
    let d = model.dim() as f64;
    let two_nu = 2.0 * model.kernel().nu();
    let ln_w = i as f64 * (cost.ratio().ln() - model.lambda_sq().ln());
    (-ln_w * d / (d + two_nu)).exp()
}

pub(crate) fn normaliser(model: &ModelSpec, cost: &CostModel, levels: usize) -> f64 {
    lagrange_sum(model, cost, levels)
}

/// Real-valued stationary point of min Σ n_iC_i s.t. Σ pλ^{2i}σ²n_i^{−2ν/d} = ε²/2.
pub fn precision_allocation_relaxed(prob: &PrecisionProblem) -> Vec<f64> {
    let model = &prob.model;
    let levels = level_count_for_precision(prob);
    let d = model.dim() as f64;
    let nu = model.kernel().nu();
    let s = lagrange_sum(model, &prob.cost, levels);
    let eps_sq = prob.epsilon * prob.epsilon;
    let lead = (eps_sq / (2.0 * prob.p_const * model.sigma_sq() * s)).powf(-d / (2.0 * nu));
    (0..=levels)
        .map(|i| lead * allocation_shape(model, &prob.cost, i))
        .collect()
}

pub fn precision_allocation(prob: &PrecisionProblem) -> DesignStructure {
    let counts = precision_allocation_relaxed(prob)
        .into_iter()
        .map(|n| ceil_tol(n).max(1.0) as usize)
        .collect();
    DesignStructure::new(counts, &prob.cost)
}

/// One point of a cost-versus-accuracy curve. `cost` is `None` when no
/// scanned level reaches the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub epsilon: f64,
    pub cost: Option<f64>,
    pub level: usize,
}

pub fn mlgp_total_cost_curve(
    model: &ModelSpec,
    cost: &CostModel,
    p_const: f64,
    epsilons: &[f64],
) -> Result<Vec<CostPoint>> {
    epsilons
        .iter()
        .map(|&eps| {
            let prob = PrecisionProblem::new(eps, model.clone(), *cost, p_const)?;
            let s = precision_allocation(&prob);
            Ok(CostPoint {
                epsilon: eps,
                cost: Some(s.total_cost),
                level: s.levels(),
            })
        })
        .collect()
}

/// Samples needed at level k alone so that tail + interpolation error ≤ ε².
pub fn single_level_count(model: &ModelSpec, p_const: f64, epsilon: f64, k: usize) -> Option<usize> {
    let slack = epsilon * epsilon - exact_truncation_tail(model, k);
    if slack <= 0.0 {
        return None;
    }
    let d = model.dim() as f64;
    let nu = model.kernel().nu();
    let var: f64 = (0..=k).map(|i| model.increment_variance(i)).sum();
    let n = (slack / (p_const * var)).powf(-d / (2.0 * nu));
    Some(ceil_tol(n).max(1.0) as usize)
}

/// Cheapest single-level design for each ε, scanning the level.
pub fn single_level_cost_curve(
    model: &ModelSpec,
    cost: &CostModel,
    p_const: f64,
    epsilons: &[f64],
) -> Result<Vec<CostPoint>> {
    validate_p(p_const)?;
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let mut best: Option<(f64, usize)> = None;
            for k in 0..MAX_LEVELS {
                if let Some(n) = single_level_count(model, p_const, eps, k) {
                    let c = n as f64 * cost.level_cost(k);
                    if best.is_none_or(|(b, _)| c < b) {
                        best = Some((c, k));
                    }
                }
                if exact_truncation_tail(model, k) < 1e-6 * eps * eps {
                    break;
                }
            }
            CostPoint {
                epsilon: eps,
                cost: best.map(|b| b.0),
                level: best.map_or(0, |b| b.1),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::interpolation_bound_surrogate;
    use crate::kernel::KernelSpec;
    use crate::lowdisc::DomainBox;

    fn model(lambda_sq: f64, nu: f64, domain: DomainBox) -> ModelSpec {
        ModelSpec::new(lambda_sq, 1.0, 0, KernelSpec::new(nu, 1.0).unwrap(), domain).unwrap()
    }

    fn problem(eps: f64, lambda_sq: f64, a: f64, domain: DomainBox) -> PrecisionProblem {
        PrecisionProblem::new(
            eps,
            model(lambda_sq, 1.25, domain),
            CostModel::new(a, 1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn level_count_exact_power() {
        let unit = DomainBox::unit(1).unwrap();
        let m = model(0.5, 1.25, unit.clone());
        let cl2 = crate::allocator::truncation_constant_sq(&m);
        let eps = (2.0 * cl2 / 8.0).sqrt();
        assert_eq!(level_count_for_precision(&problem(eps, 0.5, 2.0, unit.clone())), 3);
        let eps = (2.0 * cl2).sqrt() * 1.01;
        assert_eq!(level_count_for_precision(&problem(eps, 0.5, 2.0, unit)), 0);
    }

    #[test]
    fn level_count_by_scan() {
        let b = DomainBox::new(vec![0.0], vec![15.0]).unwrap();
        let prob = problem(0.3, 1.0 / 3.0, 8.0, b);
        let k = level_count_for_precision(&prob);
        let bound = |k| truncation_bound(prob.model(), k);
        let target = 0.3f64 * 0.3 / 2.0;
        let scan = (0..=50).find(|&j| bound(j) <= target).unwrap();
        assert_eq!(k, scan);
        assert!(k > 0 && bound(k - 1) > target);
    }

    #[test]
    fn single_level_precision() {
        let unit = DomainBox::unit(1).unwrap();
        let prob = problem(1.5, 0.001, 4.0, unit);
        assert_eq!(level_count_for_precision(&prob), 0);
        let s = precision_allocation(&prob);
        let want = (1.5f64 * 1.5 / 2.0).powf(-1.0 / 2.5);
        assert_eq!(s.counts, vec![ceil_tol(want) as usize]);
    }

    #[test]
    fn relaxed_solution_meets_constraint() {
        for (eps, l2, a, d) in [(0.05, 0.5, 4.0, 2), (0.2, 1.0 / 3.0, 8.0, 1), (0.01, 0.3, 2.0, 3)] {
            let prob = problem(eps, l2, a, DomainBox::unit(d).unwrap());
            let n = precision_allocation_relaxed(&prob);
            let rate = 2.5 / d as f64;
            let g: f64 = n
                .iter()
                .enumerate()
                .map(|(i, &ni)| prob.model().increment_variance(i) * ni.powf(-rate))
                .sum();
            assert!((g / (eps * eps / 2.0) - 1.0).abs() < 1e-10, "eps={eps}");
            let rounded = precision_allocation(&prob);
            assert!(rounded.is_monotone());
            let bound = interpolation_bound_surrogate(&rounded.counts, prob.model(), 1.0);
            assert!(bound <= eps * eps / 2.0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn allocation_shape_ratios() {
        let prob = problem(0.02, 0.5, 4.0, DomainBox::unit(2).unwrap());
        let n = precision_allocation_relaxed(&prob);
        let step = (4.0f64 / 0.5).powf(-2.0 / 4.5);
        for i in 1..n.len() {
            assert!((n[i] / n[i - 1] - step).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_multiplier_bisection() {
        let b = DomainBox::new(vec![0.0], vec![15.0]).unwrap();
        let mut prob = problem(0.3, 1.0 / 3.0, 8.0, b);
        let mut k = level_count_for_precision(&prob);
        let mut eps = 0.3;
        while k != 3 {
            eps *= if k > 3 { 1.05 } else { 0.95 };
            prob = PrecisionProblem::new(eps, prob.model().clone(), *prob.cost(), 1.0).unwrap();
            k = level_count_for_precision(&prob);
        }
        let target = eps * eps / 2.0;
        let l2 = 1.0f64 / 3.0;
        let costs: Vec<f64> = (0..4).map(|i| 8f64.powi(i)).collect();
        let w: Vec<f64> = (0..4).map(|i| l2.powi(i)).collect();
        // For multiplier μ each level minimises C_i n + μ w_i n^{-2.5}; bisect μ.
        let counts_for = |mu: f64| -> Vec<f64> {
            (0..4).map(|i| (2.5 * mu * w[i] / costs[i]).powf(1.0 / 3.5)).collect()
        };
        let g = |n: &[f64]| -> f64 { (0..4).map(|i| w[i] * n[i].powf(-2.5)).sum() };
        let (mut lo, mut hi) = (1e-12f64, 1e12f64);
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if g(&counts_for(mid)) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = counts_for(hi);
        let ours = precision_allocation(&prob);
        for (i, (&n, &o)) in ours.counts.iter().zip(&oracle).enumerate() {
            let diff = n as f64 - o;
            assert!((-1e-6..=1.0 + 1e-3).contains(&diff), "level {i}: {n} vs {o}");
        }
    }

    #[test]
    fn single_level_count_examples() {
        let unit = DomainBox::unit(1).unwrap();
        let m = model(0.5, 1.25, unit);
        assert_eq!(single_level_count(&m, 1.0, 10.0, 0), Some(1));
        let eps = 0.8f64;
        let tail = exact_truncation_tail(&m, 2);
        let var = 1.0 + 0.5 + 0.25;
        let want = ((eps * eps - tail) / var).powf(-1.0 / 2.5).ceil() as usize;
        assert_eq!(single_level_count(&m, 1.0, eps, 2), Some(want));
        assert_eq!(single_level_count(&m, 1.0, 0.2, 2), None);
    }

    #[test]
    fn curves_monotone() {
        let unit = DomainBox::unit(1).unwrap();
        let m = model(0.3, 1.25, unit);
        let c = CostModel::new(2.0, 1.0).unwrap();
        let eps: Vec<f64> = (0..20).map(|j| 0.5 * 0.7f64.powi(j)).collect();
        let ml = mlgp_total_cost_curve(&m, &c, 1.0, &eps).unwrap();
        let sl = single_level_cost_curve(&m, &c, 1.0, &eps).unwrap();
        for w in ml.windows(2) {
            assert!(w[1].cost.unwrap() >= w[0].cost.unwrap());
        }
        for w in sl.windows(2) {
            assert!(w[1].cost.unwrap() >= w[0].cost.unwrap());
        }
    }
}
