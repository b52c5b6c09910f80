//! Stationary Matérn correlation and kriging matrix assembly.

mod bessel;

pub use bessel::{bessel_k, ln_bessel_k};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Matérn smoothness and lengthscale. Validated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    nu: f64,
    lengthscale: f64,
}

impl KernelSpec {
    pub fn new(nu: f64, lengthscale: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::invalid("nu", format!("must be positive, got {nu}")));
        }
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(Error::invalid(
                "lengthscale",
                format!("must be positive, got {lengthscale}"),
            ));
        }
        Ok(Self { nu, lengthscale })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Φ(h) = 2^{1-ν}/Γ(ν) · u^ν K_ν(u), u = √(2ν)·h/θ.
    pub fn correlation(&self, lag: f64) -> f64 {
        matern_correlation(self, lag)
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            nu: 1.25,
            lengthscale: 1.0,
        }
    }
}

pub fn matern_correlation(spec: &KernelSpec, lag: f64) -> f64 {
    debug_assert!(lag >= 0.0);
    if lag == 0.0 {
        return 1.0;
    }
    let nu = spec.nu;
    let u = (2.0 * nu).sqrt() * lag / spec.lengthscale;
    if u == 0.0 {
        return 1.0;
    }
    let ln_phi = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * u.ln() + ln_bessel_k(nu, u);
    ln_phi.exp().min(1.0)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// R_{jk} = Φ(‖x_j − x_k‖). Fails on coincident points.
pub fn correlation_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    let mut r = DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        for k in (j + 1)..n {
            let h = euclidean(&points[j], &points[k]);
            if h == 0.0 {
                return Err(Error::DuplicatePoints { first: j, second: k });
            }
            let v = matern_correlation(spec, h);
            r[(j, k)] = v;
            r[(k, j)] = v;
        }
    }
    Ok(r)
}

/// a(x)_i = Φ(‖x − x_i‖).
pub fn cross_correlation(spec: &KernelSpec, query: &[f64], points: &[Vec<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        points.len(),
        points
            .iter()
            .map(|p| matern_correlation(spec, euclidean(query, p))),
    )
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn spec(nu: f64) -> KernelSpec {
        KernelSpec::new(nu, 1.0).unwrap()
    }

    #[test]
    fn unit_at_zero_lag() {
        assert_eq!(matern_correlation(&spec(1.25), 0.0), 1.0);
    }

    #[test]
    fn half_order_is_exponential() {
        let v = matern_correlation(&spec(0.5), 1.0);
        assert!((v - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn general_order_reference() {
        // 40-digit evaluations of the Matérn form.
        let cases = [
            (1.25, 0.7, 0.636_137_737_212_033_806_53),
            (1.25, 0.3, 0.887_973_172_707_943_157_64),
            (50.0, 0.05, 0.998_725_319_838_242_811_57),
            (10.0, 1.3, 0.410_007_192_481_407_591_3),
        ];
        for (nu, h, want) in cases {
            let got = matern_correlation(&spec(nu), h);
            assert!(((got - want) / want).abs() < 1e-12, "nu={nu} h={h}: {got}");
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(KernelSpec::new(0.0, 1.0).is_err());
        assert!(KernelSpec::new(1.0, -1.0).is_err());
        assert!(KernelSpec::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn matrix_examples() {
        let s = spec(0.5);
        let one = correlation_matrix(&s, &[vec![0.3]]).unwrap();
        assert_eq!(one[(0, 0)], 1.0);

        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let r = correlation_matrix(&s, &pts).unwrap();
        let e1 = (-1.0f64).exp();
        let e2 = (-2.0f64).exp();
        let want = [[1.0, e1, e2], [e1, 1.0, e1], [e2, e1, 1.0]];
        for j in 0..3 {
            for k in 0..3 {
                assert!((r[(j, k)] - want[j][k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn duplicate_points_rejected() {
        let pts = vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.1, 0.2]];
        match correlation_matrix(&spec(1.25), &pts) {
            Err(Error::DuplicatePoints { first: 0, second: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cross_correlation_examples() {
        let s = spec(0.5);
        let a = cross_correlation(&s, &[0.0], &[vec![0.0]]);
        assert_eq!(a[0], 1.0);
        let a = cross_correlation(&s, &[0.0], &[vec![1.0]]);
        assert!((a[0] - (-1.0f64).exp()).abs() < 1e-15);

        let s = spec(1.25);
        let pts = vec![vec![0.0, 0.0], vec![0.3, 0.4]];
        let a = cross_correlation(&s, &[0.7, 0.0], &pts);
        assert!((a[0] - 0.636_137_737_212_033_806_53).abs() < 1e-12);
        assert_eq!(a[1], matern_correlation(&s, euclidean(&[0.7, 0.0], &pts[1])));
    }
}
