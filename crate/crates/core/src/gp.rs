//! Noiseless kriging, the levelwise multilevel emulator, and exact sampling
//! of the autoregressive truth y_i = y_{i-1} + δ_i.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{correlation_matrix, cross_correlation, KernelSpec};
use crate::lowdisc::{DomainBox, NestedDesign};

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;
const REFINE_STEPS: usize = 8;

/// Parameters of the autoregressive multilevel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    lambda_sq: f64,
    sigma_sq: f64,
    levels: usize,
    kernel: KernelSpec,
    domain: DomainBox,
}

impl ModelSpec {
    pub fn new(
        lambda_sq: f64,
        sigma_sq: f64,
        levels: usize,
        kernel: KernelSpec,
        domain: DomainBox,
    ) -> Result<Self> {
        if !(lambda_sq > 0.0 && lambda_sq < 1.0) {
            return Err(Error::invalid(
                "lambda_sq",
                format!("must lie in (0,1), got {lambda_sq}"),
            ));
        }
        if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
            return Err(Error::invalid(
                "sigma_sq",
                format!("must be positive, got {sigma_sq}"),
            ));
        }
        Ok(Self {
            lambda_sq,
            sigma_sq,
            levels,
            kernel,
            domain,
        })
    }

    pub fn lambda_sq(&self) -> f64 {
        self.lambda_sq
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_sq.sqrt()
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    /// Index K of the highest level.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Domain volume C_s.
    pub fn volume(&self) -> f64 {
        self.domain.volume()
    }

    /// Variance λ^{2i}σ² of the level-i increment.
    pub fn increment_variance(&self, i: usize) -> f64 {
        self.lambda_sq.powi(i as i32) * self.sigma_sq
    }

    pub fn with_levels(&self, levels: usize) -> Self {
        Self {
            levels,
            ..self.clone()
        }
    }

    pub fn with_lambda_sq(&self, lambda_sq: f64) -> Result<Self> {
        Self::new(
            lambda_sq,
            self.sigma_sq,
            self.levels,
            self.kernel,
            self.domain.clone(),
        )
    }

    pub fn with_kernel(&self, kernel: KernelSpec) -> Self {
        Self {
            kernel,
            ..self.clone()
        }
    }
}

/// Factors `r` with diagonal jitter, escalating until Cholesky succeeds.
fn factor_with_jitter(r: &DMatrix<f64>, level: usize) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = r.nrows();
    let mean_diag = r.diagonal().sum() / n as f64;
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * mean_diag;
        let mut m = r.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
        if rel >= JITTER_MAX {
            return Err(Error::Factorization {
                level,
                condition: condition_estimate(r),
                jitter,
            });
        }
        rel *= 10.0;
    }
}

/// Solves R w = y using the jittered factor as a preconditioner, iterating
/// while the residual against the unjittered R keeps shrinking.
fn refine(r: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> DVector<f64> {
    let mut w = chol.solve(y);
    let mut residual = y - r * &w;
    let mut norm = residual.norm();
    for _ in 0..REFINE_STEPS {
        if norm == 0.0 {
            break;
        }
        let next = &w + chol.solve(&residual);
        let next_residual = y - r * &next;
        let next_norm = next_residual.norm();
        if next_norm >= norm {
            break;
        }
        w = next;
        residual = next_residual;
        norm = next_norm;
    }
    w
}

fn condition_estimate(r: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(r.clone()).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Fitted kriging interpolant x ↦ a(x)ᵀR⁻¹Y.
#[derive(Debug, Clone)]
pub struct KrigingPredictor {
    kernel: KernelSpec,
    points: Vec<Vec<f64>>,
    weights: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl KrigingPredictor {
    pub fn fit(kernel: &KernelSpec, points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        Self::fit_level(0, kernel, points, values)
    }

    /// As [`fit`](Self::fit); `level` only labels factorization errors.
    pub fn fit_level(
        level: usize,
        kernel: &KernelSpec,
        points: &[Vec<f64>],
        values: &[f64],
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if points.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: values.len(),
            });
        }
        let r = correlation_matrix(kernel, points)?;
        let (chol, jitter) = factor_with_jitter(&r, level)?;
        let weights = refine(&r, &chol, &DVector::from_column_slice(values));
        Ok(Self {
            kernel: *kernel,
            points: points.to_vec(),
            weights,
            chol,
            jitter,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        cross_correlation(&self.kernel, x, &self.points).dot(&self.weights)
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Diagonal jitter that was added to R.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }
}

/// Observed increments δ_i(X_i) = y_i(X_i) − y_{i−1}(X_i) at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelData {
    pub level: usize,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl LevelData {
    pub fn new(level: usize, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: values.len(),
            });
        }
        Ok(Self {
            level,
            points,
            values,
        })
    }
}

/// Sum of per-level kriging predictors of the increments.
#[derive(Debug, Clone)]
pub struct MultilevelEmulator {
    model: ModelSpec,
    predictors: Vec<Option<KrigingPredictor>>,
}

impl MultilevelEmulator {
    /// Fits on a nested design. `data[i]` must carry exactly the points of `X_i`.
    pub fn fit(model: &ModelSpec, design: &NestedDesign, data: &[LevelData]) -> Result<Self> {
        if design.num_levels() != data.len() {
            return Err(Error::LevelMismatch(format!(
                "design has {} levels, data has {}",
                design.num_levels(),
                data.len()
            )));
        }
        for (i, d) in data.iter().enumerate() {
            if d.points.as_slice() != design.level(i) {
                return Err(Error::LevelMismatch(format!(
                    "data for level {i} does not match the design points"
                )));
            }
        }
        Self::fit_levels(model, data)
    }

    /// Fits each level independently with no nesting check. Empty levels
    /// contribute nothing.
    pub fn fit_levels(model: &ModelSpec, data: &[LevelData]) -> Result<Self> {
        if data.len() != model.levels() + 1 {
            return Err(Error::LevelMismatch(format!(
                "model has {} levels, data has {}",
                model.levels() + 1,
                data.len()
            )));
        }
        let mut predictors = Vec::with_capacity(data.len());
        for (i, d) in data.iter().enumerate() {
            if d.level != i {
                return Err(Error::LevelMismatch(format!(
                    "entry {i} is labelled level {}",
                    d.level
                )));
            }
            if d.points.is_empty() {
                predictors.push(None);
                continue;
            }
            predictors.push(Some(KrigingPredictor::fit_level(
                i,
                model.kernel(),
                &d.points,
                &d.values,
            )?));
        }
        Ok(Self {
            model: model.clone(),
            predictors,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predictors
            .iter()
            .flatten()
            .map(|p| p.predict(x))
            .sum()
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn level_predictor(&self, i: usize) -> Option<&KrigingPredictor> {
        self.predictors.get(i).and_then(Option::as_ref)
    }
}

/// Lower Cholesky factor of the correlation matrix at `points`, jittered if needed.
pub fn correlation_factor(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = correlation_matrix(kernel, points)?;
    Ok(factor_with_jitter(&r, 0)?.0.unpack())
}

fn draw_with_factor<R: Rng + ?Sized>(l: &DMatrix<f64>, scale: f64, rng: &mut R) -> Vec<f64> {
    let n = l.nrows();
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    (l * z).iter().map(|v| v * scale).collect()
}

/// One draw of a zero-mean GP with covariance `variance`·Φ at `points`.
pub fn sample_gp_path<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    variance: f64,
    points: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::invalid("variance", "must be non-negative"));
    }
    if variance == 0.0 {
        return Ok(vec![0.0; points.len()]);
    }
    let l = correlation_factor(kernel, points)?;
    Ok(draw_with_factor(&l, variance.sqrt(), rng))
}

/// Increments δ_i and cumulative y_i at a common point set, i = 0..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelTruth {
    pub increments: Vec<Vec<f64>>,
    pub cumulative: Vec<Vec<f64>>,
}

impl MultilevelTruth {
    pub fn top(&self) -> &[f64] {
        self.cumulative.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Joint draw of all levels at `eval_points`, one independent path per level.
pub fn sample_multilevel_truth<R: Rng + ?Sized>(
    model: &ModelSpec,
    eval_points: &[Vec<f64>],
    rng: &mut R,
) -> Result<MultilevelTruth> {
    let l = correlation_factor(model.kernel(), eval_points)?;
    let n = eval_points.len();
    let mut increments = Vec::with_capacity(model.levels() + 1);
    let mut cumulative: Vec<Vec<f64>> = Vec::with_capacity(model.levels() + 1);
    let mut running = vec![0.0; n];
    for i in 0..=model.levels() {
        let delta = draw_with_factor(&l, model.increment_variance(i).sqrt(), rng);
        for (y, d) in running.iter_mut().zip(&delta) {
            *y += d;
        }
        increments.push(delta);
        cumulative.push(running.clone());
    }
    Ok(MultilevelTruth {
        increments,
        cumulative,
    })
}
