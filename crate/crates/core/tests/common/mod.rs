#![allow(dead_code)]

use mlgp::allocator::{greedy_surrogate, BudgetProblem, CostModel};
use mlgp::gp::{LevelData, ModelSpec};
use mlgp::kernel::KernelSpec;
use mlgp::lowdisc::DomainBox;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Cov(y_i(x), y_j(x')) = Σ_{l ≤ min(i,j)} λ^{2l}σ²Φ(‖x − x'‖).
fn cov(model: &ModelSpec, i: usize, x: &[f64], j: usize, y: &[f64]) -> f64 {
    let var: f64 = (0..=i.min(j)).map(|l| model.increment_variance(l)).sum();
    var * model.kernel().correlation(dist(x, y))
}

/// E[y_K(q) | y_i(X_i), i = 0..=K] by dense Gaussian conditioning on the
/// stacked observations. `observed[i]` holds y_i at `levels[i]`.
pub fn joint_conditioning(
    model: &ModelSpec,
    levels: &[Vec<Vec<f64>>],
    observed: &[Vec<f64>],
    query: &[f64],
) -> f64 {
    let mut obs: Vec<(usize, &Vec<f64>, f64)> = Vec::new();
    for (i, (pts, ys)) in levels.iter().zip(observed).enumerate() {
        for (p, &y) in pts.iter().zip(ys) {
            obs.push((i, p, y));
        }
    }
    let n = obs.len();
    let top = levels.len() - 1;
    let c = DMatrix::from_fn(n, n, |a, b| cov(model, obs[a].0, obs[a].1, obs[b].0, obs[b].1));
    let k = DVector::from_fn(n, |a, _| cov(model, top, query, obs[a].0, obs[a].1));
    let y = DVector::from_fn(n, |a, _| obs[a].2);
    let w = c.full_piv_lu().solve(&y).expect("stacked covariance is nonsingular");
    k.dot(&w)
}

/// Increment data δ_i(X_i) = y_i(X_i) − y_{i−1}(X_i) for nested prefixes.
pub fn increments_from_cumulative(levels: &[Vec<Vec<f64>>], observed: &[Vec<f64>]) -> Vec<LevelData> {
    levels
        .iter()
        .enumerate()
        .map(|(i, pts)| {
            let values = (0..pts.len())
                .map(|j| {
                    let prev = if i == 0 {
                        0.0
                    } else {
                        let idx = levels[i - 1]
                            .iter()
                            .position(|q| *q == pts[j])
                            .expect("nested point present one level down");
                        observed[i - 1][idx]
                    };
                    observed[i][j] - prev
                })
                .collect();
            LevelData::new(i, pts.clone(), values).unwrap()
        })
        .collect()
}

pub struct NestedInstance {
    pub model: ModelSpec,
    pub levels: Vec<Vec<Vec<f64>>>,
    pub observed: Vec<Vec<f64>>,
    pub queries: Vec<Vec<f64>>,
}

/// Random nested instance with at most `max_points` points in total.
pub fn random_nested_instance<R: Rng>(rng: &mut R, max_points: usize) -> NestedInstance {
    let d = rng.random_range(1..=2usize);
    let k = rng.random_range(0..=3usize);
    let mut counts = vec![0usize; k + 1];
    loop {
        counts[0] = rng.random_range(1..=6usize);
        for i in 1..=k {
            counts[i] = rng.random_range(1..=counts[i - 1]);
        }
        if counts.iter().sum::<usize>() <= max_points {
            break;
        }
    }
    let kernel = KernelSpec::new(rng.random_range(0.5..2.5), rng.random_range(0.2..1.0)).unwrap();
    let model = ModelSpec::new(
        rng.random_range(0.1..0.9),
        rng.random_range(0.5..2.0),
        k,
        kernel,
        DomainBox::unit(d).unwrap(),
    )
    .unwrap();
    // Minimum spacing 0.05.
    let mut pool: Vec<Vec<f64>> = Vec::new();
    while pool.len() < counts[0] {
        let p: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        if pool.iter().all(|q| dist(q, &p) > 0.05) {
            pool.push(p);
        }
    }
    let levels: Vec<Vec<Vec<f64>>> = counts.iter().map(|&n| pool[..n].to_vec()).collect();
    let observed = levels
        .iter()
        .map(|pts| pts.iter().map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let queries = (0..3)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    NestedInstance {
        model,
        levels,
        observed,
        queries,
    }
}

/// Best surrogate over every way of spending at most the residual budget on
/// top of `base`, optionally keeping counts non-increasing.
pub fn exhaustive_best(base: &[usize], prob: &BudgetProblem, monotone: bool) -> (Vec<usize>, f64) {
    let cost: &CostModel = prob.cost();
    let budget = prob.budget();
    let mut best = (base.to_vec(), greedy_surrogate(base, prob.model()));
    let mut current = base.to_vec();
    fn rec(
        level: usize,
        current: &mut Vec<usize>,
        prob: &BudgetProblem,
        cost: &CostModel,
        budget: f64,
        monotone: bool,
        best: &mut (Vec<usize>, f64),
    ) {
        if level == current.len() {
            if monotone && current.windows(2).any(|w| w[1] > w[0]) {
                return;
            }
            let g = greedy_surrogate(current, prob.model());
            if g < best.1 {
                *best = (current.clone(), g);
            }
            return;
        }
        let start = current[level];
        loop {
            if cost.total(current) > budget * (1.0 + 1e-12) {
                break;
            }
            rec(level + 1, current, prob, cost, budget, monotone, best);
            current[level] += 1;
        }
        current[level] = start;
    }
    rec(0, &mut current, prob, cost, budget, monotone, &mut best);
    best
}
