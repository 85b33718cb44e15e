use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Analytic,
    CentralFd,
    RichardsonFd,
}

/// A mixed partial of order `multi_index.len()` (at most 4).
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeRequest {
    pub multi_index: Vec<usize>,
    pub scheme: Scheme,
    pub step: f64,
}

impl DerivativeRequest {
    pub fn new(multi_index: &[usize], scheme: Scheme, step: f64) -> Self {
        Self {
            multi_index: multi_index.to_vec(),
            scheme,
            step,
        }
    }

    pub fn order(&self) -> usize {
        self.multi_index.len()
    }
}

/// Step for an order-`k` nested central stencil: `eps^(1/(k+2))` scaled by
/// the magnitude of the coordinates involved.
pub fn default_step(order: usize, x: &[f64], index: &[usize]) -> f64 {
    let scale = index
        .iter()
        .map(|&i| x[i].abs())
        .fold(1.0_f64, f64::max);
    f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * scale
}

pub fn differentiate(f: &ScalarField, x: &[f64], req: &DerivativeRequest) -> Result<f64> {
    let order = req.order();
    if order > 4 {
        return Err(Error::OrderTooHigh(order));
    }
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        });
    }
    if let Some(&bad) = req.multi_index.iter().find(|&&i| i >= f.dim()) {
        return Err(Error::Invalid(format!("coordinate index {bad} out of range")));
    }
    if order == 0 {
        return finite(f.value(x), "field evaluation");
    }
    match req.scheme {
        Scheme::Analytic => f
            .analytic(x, &req.multi_index)
            .ok_or_else(|| {
                Error::Invalid(format!("no analytic partial of order {order} attached"))
            })
            .and_then(|v| finite(v, "analytic partial")),
        Scheme::CentralFd => {
            check_reach(f, x, order as f64 * req.step)?;
            finite(nested_central(f, x, &req.multi_index, req.step), "finite difference")
        }
        Scheme::RichardsonFd => {
            check_reach(f, x, order as f64 * req.step)?;
            let coarse = nested_central(f, x, &req.multi_index, req.step);
            let fine = nested_central(f, x, &req.multi_index, 0.5 * req.step);
            finite((4.0 * fine - coarse) / 3.0, "finite difference")
        }
    }
}

/// Analytic partial when available, otherwise nested central differences at
/// the default step.
pub fn partial(f: &ScalarField, x: &[f64], index: &[usize]) -> Result<f64> {
    if let Some(v) = f.analytic(x, index) {
        return finite(v, "analytic partial");
    }
    let step = default_step(index.len(), x, index);
    differentiate(f, x, &DerivativeRequest::new(index, Scheme::CentralFd, step))
}

pub fn gradient(f: &ScalarField, x: &[f64]) -> Result<DVector<f64>> {
    let n = f.dim();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        g[i] = partial(f, x, &[i])?;
    }
    Ok(g)
}

/// Symmetrized Hessian `(H + Hᵀ) / 2`.
pub fn hessian(f: &ScalarField, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = f.dim();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = partial(f, x, &[i, j])?;
        }
    }
    Ok(0.5 * (&h + h.transpose()))
}

fn nested_central(f: &ScalarField, x: &[f64], index: &[usize], h: f64) -> f64 {
    let mut buf = x.to_vec();
    nested_rec(f, &mut buf, index, h)
}

fn nested_rec(f: &ScalarField, x: &mut [f64], index: &[usize], h: f64) -> f64 {
    match index.split_first() {
        None => f.value(x),
        Some((&i, rest)) => {
            let orig = x[i];
            x[i] = orig + h;
            let plus = nested_rec(f, x, rest, h);
            x[i] = orig - h;
            let minus = nested_rec(f, x, rest, h);
            x[i] = orig;
            (plus - minus) / (2.0 * h)
        }
    }
}

fn check_reach(f: &ScalarField, x: &[f64], needed: f64) -> Result<()> {
    if !(needed > 0.0) {
        return Err(Error::Invalid("finite-difference step must be positive".into()));
    }
    let margin = f.domain().margin(x);
    if margin < needed {
        return Err(Error::TooCloseToBoundary { margin, needed });
    }
    Ok(())
}

fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_calc::field::DomainBox;

    fn field(n: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ScalarField {
        ScalarField::new(n, DomainBox::cube(n, -5.0, 5.0), f)
    }

    #[test]
    fn second_derivative_of_square() {
        let f = field(1, |x| x[0] * x[0]);
        let req = DerivativeRequest::new(&[0, 0], Scheme::CentralFd, 1e-3);
        let d = differentiate(&f, &[0.3], &req).unwrap();
        assert!((d - 2.0).abs() <= 1e-6, "{d}");
    }

    #[test]
    fn bilinear_mixed_partial() {
        let f = field(2, |x| x[0] * x[1]);
        for scheme in [Scheme::CentralFd, Scheme::RichardsonFd] {
            let req = DerivativeRequest::new(&[0, 1], scheme, 1e-3);
            let d = differentiate(&f, &[0.4, -1.2], &req).unwrap();
            assert!((d - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fourth_derivative_of_quartic() {
        let f = field(1, |x| x[0].powi(4));
        let x = [0.7];
        let req = DerivativeRequest::new(&[0, 0, 0, 0], Scheme::CentralFd, default_step(4, &x, &[0]));
        let d = differentiate(&f, &x, &req).unwrap();
        assert!((d - 24.0).abs() <= 1e-3, "{d}");
    }

    #[test]
    fn rejects_order_five_and_boundary() {
        let f = field(1, |x| x[0]);
        let req = DerivativeRequest::new(&[0; 5], Scheme::CentralFd, 1e-3);
        assert_eq!(differentiate(&f, &[0.0], &req), Err(Error::OrderTooHigh(5)));
        let req = DerivativeRequest::new(&[0, 0], Scheme::CentralFd, 1e-1);
        assert!(matches!(
            differentiate(&f, &[4.9], &req),
            Err(Error::TooCloseToBoundary { .. })
        ));
    }

    #[test]
    fn non_finite_is_an_error() {
        let f = field(1, |x| (x[0]).ln());
        let req = DerivativeRequest::new(&[0], Scheme::CentralFd, 1e-3);
        assert_eq!(
            differentiate(&f, &[-1.0], &req),
            Err(Error::NonFinite("finite difference"))
        );
    }

    #[test]
    fn analytic_scheme_requires_callback() {
        let f = field(1, |x| x[0]);
        let req = DerivativeRequest::new(&[0], Scheme::Analytic, 1e-3);
        assert!(differentiate(&f, &[0.0], &req).is_err());
        let g = f.with_partials(1, |_, _| 1.0);
        assert_eq!(differentiate(&g, &[0.0], &req), Ok(1.0));
    }

    #[test]
    fn gradient_and_hessian_of_half_norm() {
        let f = field(3, |x| 0.5 * x.iter().map(|c| c * c).sum::<f64>());
        let x = [0.3, -1.0, 2.0];
        let g = gradient(&f, &x).unwrap();
        let h = hessian(&f, &x).unwrap();
        for i in 0..3 {
            assert!((g[i] - x[i]).abs() < 1e-8);
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((h[(i, j)] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gradient_of_product() {
        let f = field(2, |x| x[0] * x[1]);
        let g = gradient(&f, &[1.0, 2.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hessian_of_exponential_matches_fd_oracle() {
        // analytic exp(x1+x2) Hessian is the all-ones matrix at the origin;
        // the oracle is an independent Richardson stencil with a wide step.
        let f = field(2, |x| (x[0] + x[1]).exp())
            .with_partials(2, |x, _| (x[0] + x[1]).exp());
        let h = hessian(&f, &[0.0, 0.0]).unwrap();
        let plain = field(2, |x| (x[0] + x[1]).exp());
        for i in 0..2 {
            for j in 0..2 {
                let req = DerivativeRequest::new(&[i, j], Scheme::RichardsonFd, 1e-2);
                let oracle = differentiate(&plain, &[0.0, 0.0], &req).unwrap();
                assert!((h[(i, j)] - 1.0).abs() < 1e-12);
                assert!((oracle - 1.0).abs() < 1e-7, "{oracle}");
            }
        }
    }

    #[test]
    fn richardson_beats_central_on_exponential() {
        let f = field(1, |x| x[0].exp());
        let x = [0.3];
        let exact = 0.3_f64.exp();
        for step in [1e-1, 5e-2, 2e-2] {
            let c = differentiate(&f, &x, &DerivativeRequest::new(&[0; 4], Scheme::CentralFd, step))
                .unwrap();
            let r = differentiate(&f, &x, &DerivativeRequest::new(&[0; 4], Scheme::RichardsonFd, step))
                .unwrap();
            assert!((r - exact).abs() <= (c - exact).abs(), "step {step}: {r} vs {c}");
        }
    }
}
