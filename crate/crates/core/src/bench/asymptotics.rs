use serde::{Deserialize, Serialize};

use super::BenchConfig;
use crate::allocator::{mlgp_total_cost_curve, single_level_cost_curve};
use crate::error::{Error, Result};

const MIN_POINTS: usize = 4;

/// Which term dominates the multilevel cost as ε → 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// 2αν < dβ: cost ~ ε^{−d/ν}.
    SamplingDominated,
    /// 2αν = dβ: cost ~ ε^{−d/ν} up to a log factor.
    Balanced,
    /// 2αν > dβ: cost ~ ε^{−2α/β}.
    LevelDominated,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::SamplingDominated => "2*alpha*nu < d*beta",
            Regime::Balanced => "2*alpha*nu = d*beta",
            Regime::LevelDominated => "2*alpha*nu > d*beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub epsilon: f64,
    pub mlgp_cost: f64,
    pub single_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub alpha: f64,
    pub beta: f64,
    pub regime: Regime,
    pub mlgp_slope: f64,
    pub single_slope: f64,
    pub predicted_mlgp_slope: f64,
    pub predicted_single_slope: f64,
    pub rows: Vec<AsymptoticsRow>,
}

/// Least-squares slope of ln y against ln x.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("epsilon", "all ε values coincide"));
    }
    Ok(sxy / sxx)
}

/// Log-spaced ε from `max` down to `min`.
pub fn epsilon_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max.is_finite()) {
        return Err(Error::invalid("epsilon_min", "must be positive"));
    }
    if max <= min {
        return Err(Error::invalid(
            "epsilon_max",
            format!("must exceed epsilon_min ({max} <= {min})"),
        ));
    }
    if points < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: points,
        });
    }
    let ratio = (min / max).ln() / (points - 1) as f64;
    Ok((0..points).map(|j| max * (ratio * j as f64).exp()).collect())
}

/// Cost curves for both designs over the configured ε range, with fitted
/// and predicted log-log slopes.
pub fn asymptotics_study(config: &BenchConfig) -> Result<AsymptoticsReport> {
    let (min, max) = match (config.epsilon_min, config.epsilon_max) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("epsilon_min", "epsilon_min and epsilon_max are required")),
    };
    let eps = epsilon_grid(min, max, config.epsilon_points)?;
    let model = config.truth_model()?;
    let cost = config.cost_model()?;
    let ml = mlgp_total_cost_curve(&model, &cost, config.p_const, &eps)?;
    let sl = single_level_cost_curve(&model, &cost, config.p_const, &eps)?;

    let rows: Vec<AsymptoticsRow> = ml
        .iter()
        .zip(&sl)
        .map(|(m, s)| AsymptoticsRow {
            epsilon: m.epsilon,
            mlgp_cost: m.cost.expect("precision designs always exist"),
            single_cost: s.cost,
        })
        .collect();
    let ml_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.mlgp_cost)).collect();
    let sl_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.single_cost.map(|c| (r.epsilon, c)))
        .collect();
    if sl_pts.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: sl_pts.len(),
        });
    }

    let d = model.dim() as f64;
    let nu = model.kernel().nu();
    let alpha = cost.ratio().ln();
    let beta = -model.lambda_sq().ln();
    let lhs = 2.0 * alpha * nu;
    let rhs = d * beta;
    let regime = if (lhs - rhs).abs() <= 1e-12 * rhs {
        Regime::Balanced
    } else if lhs < rhs {
        Regime::SamplingDominated
    } else {
        Regime::LevelDominated
    };
    let predicted_mlgp_slope = match regime {
        Regime::LevelDominated => -2.0 * alpha / beta,
        _ => -d / nu,
    };
    Ok(AsymptoticsReport {
        alpha,
        beta,
        regime,
        mlgp_slope: fit_loglog_slope(&ml_pts)?,
        single_slope: fit_loglog_slope(&sl_pts)?,
        predicted_mlgp_slope,
        predicted_single_slope: -(d / nu + 2.0 * alpha / beta),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_errors() {
        let g = epsilon_grid(1e-3, 1e-1, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-1).abs() < 1e-15 && (g[4] - 1e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(epsilon_grid(1e-1, 1e-3, 5).is_err());
        assert!(epsilon_grid(1e-3, 1e-1, 1).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, 3.0 * (i as f64).powf(-1.7))).collect();
        assert!((fit_loglog_slope(&pts).unwrap() + 1.7).abs() < 1e-12);
    }

    #[test]
    fn sampling_dominated_regime() {
        let cfg = BenchConfig {
            cost_ratio: 0.5f64.exp(),
            lambda_sq: (-2.0f64).exp(),
            epsilon_min: Some(1e-4),
            epsilon_max: Some(1e-1),
            ..BenchConfig::default()
        };
        let r = asymptotics_study(&cfg).unwrap();
        assert_eq!(r.regime, Regime::SamplingDominated);
        assert!((r.mlgp_slope / r.predicted_mlgp_slope - 1.0).abs() < 0.15);
        assert!(r.single_slope < r.mlgp_slope);
    }
}
