//! Built-in preference families with analytic partials through order four.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::sum_form::{as_preference_pair, linear_coupling, SumFormProblem};
use crate::surplus::{PreferencePair, Tolerances};
use crate::tensor_calc::{DomainBox, ScalarField};

/// `H*(z) = zᵀ A z / 2`.
pub fn quadratic_hstar(a: &DMatrix<f64>) -> ScalarField {
    let n = a.nrows();
    let av = a.clone();
    let ap = a.clone();
    ScalarField::new(n, DomainBox::unbounded(n), move |z| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += z[i] * av[(i, j)] * z[j];
            }
        }
        0.5 * s
    })
    .with_partials(4, move |z, idx| match idx {
        [i] => (0..n).map(|j| ap[(*i, j)] * z[j]).sum(),
        [i, j] => ap[(*i, *j)],
        _ => 0.0,
    })
}

/// `H*(z) = |z|²/2 + ε Σ z_i⁴ / 4`.
pub fn quartic_hstar(n: usize, eps: f64) -> ScalarField {
    ScalarField::new(n, DomainBox::unbounded(n), move |z| {
        z.iter().map(|c| 0.5 * c * c + 0.25 * eps * c.powi(4)).sum()
    })
    .with_partials(4, move |z, idx| {
        let i = idx[0];
        if idx.iter().any(|&j| j != i) {
            return 0.0;
        }
        let c = z[i];
        match idx.len() {
            1 => c + eps * c.powi(3),
            2 => 1.0 + 3.0 * eps * c * c,
            3 => 6.0 * eps * c,
            _ => 6.0 * eps,
        }
    })
}

/// `H*(z) = |z|²/2 + log(1 + Σ exp z_i)`. The log-partition part has dense
/// derivative tensors (the cumulants of a categorical variable).
pub fn logconvex_hstar(n: usize) -> ScalarField {
    ScalarField::new(n, DomainBox::unbounded(n), move |z| {
        0.5 * z.iter().map(|c| c * c).sum::<f64>() + log_partition(z)
    })
    .with_partials(4, move |z, idx| {
        let quad = match idx {
            [i] => z[*i],
            [i, j] if i == j => 1.0,
            _ => 0.0,
        };
        quad + log_partition_partial(z, idx)
    })
}

fn log_partition(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(0.0_f64, f64::max);
    m + ((-m).exp() + z.iter().map(|c| (c - m).exp()).sum::<f64>()).ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(0.0_f64, f64::max);
    let e: Vec<f64> = z.iter().map(|c| (c - m).exp()).collect();
    let total = (-m).exp() + e.iter().sum::<f64>();
    e.into_iter().map(|v| v / total).collect()
}

/// Partials of `log(1 + Σ e^{z_i})` as joint cumulants of the one-hot
/// variable with probabilities `softmax(z)`.
fn log_partition_partial(z: &[f64], idx: &[usize]) -> f64 {
    let pi = softmax(z);
    // raw moment E[X_a X_b ...] = π_a if all indices agree, else 0
    let m = |ix: &[usize]| -> f64 {
        if ix.iter().all(|&k| k == ix[0]) {
            pi[ix[0]]
        } else {
            0.0
        }
    };
    match *idx {
        [i] => pi[i],
        [i, j] => m(&[i, j]) - pi[i] * pi[j],
        [i, j, k] => {
            m(&[i, j, k]) - m(&[i, j]) * pi[k] - m(&[i, k]) * pi[j] - m(&[j, k]) * pi[i]
                + 2.0 * pi[i] * pi[j] * pi[k]
        }
        [i, j, k, l] => {
            m(&[i, j, k, l])
                - m(&[i, j, k]) * pi[l]
                - m(&[i, j, l]) * pi[k]
                - m(&[i, k, l]) * pi[j]
                - m(&[j, k, l]) * pi[i]
                - m(&[i, j]) * m(&[k, l])
                - m(&[i, k]) * m(&[j, l])
                - m(&[i, l]) * m(&[j, k])
                + 2.0
                    * (m(&[i, j]) * pi[k] * pi[l]
                        + m(&[i, k]) * pi[j] * pi[l]
                        + m(&[i, l]) * pi[j] * pi[k]
                        + m(&[j, k]) * pi[i] * pi[l]
                        + m(&[j, l]) * pi[i] * pi[k]
                        + m(&[k, l]) * pi[i] * pi[j])
                - 6.0 * pi[i] * pi[j] * pi[k] * pi[l]
        }
        _ => f64::NAN,
    }
}

fn default_boxes(n: usize) -> (DomainBox, DomainBox, DomainBox) {
    (
        DomainBox::cube(n, -0.5, 0.5),
        DomainBox::cube(n, -0.5, 0.5),
        DomainBox::cube(n, -3.0, 3.0),
    )
}

fn sum_form(h_star: ScalarField) -> SumFormProblem {
    let (x, y, z) = default_boxes(h_star.dim());
    SumFormProblem::new(h_star, x, y, z).expect("consistent boxes")
}

pub fn quadratic_problem(n: usize) -> SumFormProblem {
    sum_form(quadratic_hstar(&DMatrix::identity(n, n)))
}

pub fn quartic_problem(n: usize, eps: f64) -> SumFormProblem {
    sum_form(quartic_hstar(n, eps))
}

pub fn logconvex_problem(n: usize) -> SumFormProblem {
    sum_form(logconvex_hstar(n))
}

/// `h = x·z − |z|²/2`, `g = y·z`, so `b = |x + y|²/2`.
pub fn quadratic_pair(n: usize) -> PreferencePair {
    as_preference_pair(&quadratic_problem(n))
}

pub fn quartic_pair(n: usize, eps: f64) -> PreferencePair {
    as_preference_pair(&quartic_problem(n, eps))
}

pub fn logconvex_pair(n: usize) -> PreferencePair {
    as_preference_pair(&logconvex_problem(n))
}

/// `h = x·z − |z|²/2 − |x|²/2`, `g = y·z − |y|²/2`, so `b = x·y`.
pub fn bilinear_pair(n: usize) -> PreferencePair {
    let h = ScalarField::new(2 * n, DomainBox::unbounded(2 * n), move |a| {
        let (x, z) = a.split_at(n);
        (0..n).map(|i| x[i] * z[i] - 0.5 * z[i] * z[i] - 0.5 * x[i] * x[i]).sum()
    })
    .with_partials(4, move |a, idx| quadratic_partial(a, idx, n, -0.5, -0.5));
    let g = ScalarField::new(2 * n, DomainBox::unbounded(2 * n), move |a| {
        let (y, z) = a.split_at(n);
        (0..n).map(|i| y[i] * z[i] - 0.5 * y[i] * y[i]).sum()
    })
    .with_partials(4, move |a, idx| quadratic_partial(a, idx, n, -0.5, 0.0));
    let (x, y, z) = default_boxes(n);
    PreferencePair::new(h, g, x, y, z).expect("consistent boxes")
}

/// Partials of `Σ a_i z_i + ca |a|² + cz |z|²` over `(a, z)`.
fn quadratic_partial(args: &[f64], idx: &[usize], n: usize, ca: f64, cz: f64) -> f64 {
    match *idx {
        [i] if i < n => args[n + i] + 2.0 * ca * args[i],
        [j] => args[j - n] + 2.0 * cz * args[j],
        [i, j] if i == j => 2.0 * if i < n { ca } else { cz },
        [i, j] if i.min(j) + n == i.max(j) => 1.0,
        _ => 0.0,
    }
}

/// A family outside the sum form: `h = x·z + (κ/2) Σ x_i² z_i − Φ(z)` with
/// `Φ` the log-convex conjugate above, `g = y·z + (γ/2) Σ y_i z_i²`.
/// Here `D²_xx h` depends on `z` and `D²_zx h` on `x`, so every term of the
/// structured curvature formula is active.
pub fn coupled_pair(n: usize, kappa: f64, gamma: f64) -> PreferencePair {
    let phi = logconvex_hstar(n);
    let phi_p = phi.clone();
    let h = ScalarField::new(2 * n, DomainBox::unbounded(2 * n), move |a| {
        let (x, z) = a.split_at(n);
        (0..n).map(|i| x[i] * z[i] + 0.5 * kappa * x[i] * x[i] * z[i]).sum::<f64>() - phi.value(z)
    })
    .with_partials(4, move |a, idx| {
        let (x, z) = a.split_at(n);
        let (xs, zs) = split_index(idx, n);
        let coupling = match (xs.as_slice(), zs.as_slice()) {
            ([i], []) => z[*i] + kappa * x[*i] * z[*i],
            ([i, j], []) if i == j => kappa * z[*i],
            ([], [j]) => x[*j] + 0.5 * kappa * x[*j] * x[*j],
            ([i], [j]) if i == j => 1.0 + kappa * x[*i],
            ([i, k], [j]) if i == j && k == j => kappa,
            _ => 0.0,
        };
        let potential = if xs.is_empty() { phi_p.analytic(z, &zs).unwrap_or(f64::NAN) } else { 0.0 };
        coupling - potential
    });
    let g = ScalarField::new(2 * n, DomainBox::unbounded(2 * n), move |a| {
        let (y, z) = a.split_at(n);
        (0..n).map(|i| y[i] * z[i] + 0.5 * gamma * y[i] * z[i] * z[i]).sum()
    })
    .with_partials(4, move |a, idx| {
        let (y, z) = a.split_at(n);
        let (ys, zs) = split_index(idx, n);
        match (ys.as_slice(), zs.as_slice()) {
            ([i], []) => z[*i] + 0.5 * gamma * z[*i] * z[*i],
            ([], [j]) => y[*j] + gamma * y[*j] * z[*j],
            ([i], [j]) if i == j => 1.0 + gamma * z[*i],
            ([], [i, j]) if i == j => gamma * y[*i],
            ([i], [j, k]) if i == j && j == k => gamma,
            _ => 0.0,
        }
    });
    let (x, y, z) = default_boxes(n);
    PreferencePair::new(h, g, x, y, z).expect("consistent boxes")
}

fn split_index(idx: &[usize], n: usize) -> (Vec<usize>, Vec<usize>) {
    let a = idx.iter().copied().filter(|&i| i < n).collect();
    let z = idx.iter().copied().filter(|&i| i >= n).map(|i| i - n).collect();
    (a, z)
}

/// Family selector as it appears in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Quadratic,
    Bilinear,
    QuarticSumForm,
    LogconvexSumForm,
    Coupled,
    Custom,
}

fn default_epsilon() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    0.4
}
fn default_gamma() -> f64 {
    0.3
}

/// Serializable description of a preference family; enough to rebuild the
/// pair exactly, so witnesses can carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub dim: usize,
    /// Quartic weight for `quartic_sum_form`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// `h(x, z)` for custom families, over `x1..xn`, `z1..zn`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    /// `g(y, z)` for custom families, over `y1..yn`, `z1..zn`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_box: Option<Vec<[f64; 2]>>,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            epsilon: default_epsilon(),
            kappa: default_kappa(),
            gamma: default_gamma(),
            h: None,
            g: None,
            x_box: None,
            y_box: None,
            z_box: None,
        }
    }
}

/// A built family: the generic pair plus, for sum-form families, the
/// problem in conjugate form.
#[derive(Debug, Clone)]
pub struct Family {
    pub spec: FamilySpec,
    pub pair: PreferencePair,
    pub sum_form: Option<SumFormProblem>,
}

fn parse_box(b: &Option<Vec<[f64; 2]>>, n: usize, default: DomainBox) -> Result<DomainBox> {
    match b {
        None => Ok(default),
        Some(v) if v.len() == 1 => DomainBox::new(vec![v[0][0]; n], vec![v[0][1]; n]),
        Some(v) if v.len() == n => DomainBox::new(v.iter().map(|p| p[0]).collect(), v.iter().map(|p| p[1]).collect()),
        Some(v) => Err(Error::Invalid(format!("box has {} intervals, expected 1 or {n}", v.len()))),
    }
}

impl Family {
    pub fn build(spec: &FamilySpec, tol: Tolerances) -> Result<Family> {
        let n = spec.dim;
        if n == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        let (dx, dy, dz) = default_boxes(n);
        let x_box = parse_box(&spec.x_box, n, dx)?;
        let y_box = parse_box(&spec.y_box, n, dy)?;
        let z_box = parse_box(&spec.z_box, n, dz)?;
        let sum_problem = |h_star: ScalarField| SumFormProblem::new(h_star, x_box.clone(), y_box.clone(), z_box.clone());
        let (pair, sum_form) = match spec.kind {
            FamilyKind::Quadratic => {
                let prob = sum_problem(quadratic_hstar(&DMatrix::identity(n, n)))?;
                (as_preference_pair(&prob), Some(prob))
            }
            FamilyKind::QuarticSumForm => {
                let prob = sum_problem(quartic_hstar(n, spec.epsilon))?;
                (as_preference_pair(&prob), Some(prob))
            }
            FamilyKind::LogconvexSumForm => {
                let prob = sum_problem(logconvex_hstar(n))?;
                (as_preference_pair(&prob), Some(prob))
            }
            FamilyKind::Bilinear => {
                let pp = bilinear_pair(n);
                (PreferencePair::new(pp.h, pp.g, x_box, y_box, z_box)?, None)
            }
            FamilyKind::Coupled => {
                let pp = coupled_pair(n, spec.kappa, spec.gamma);
                (PreferencePair::new(pp.h, pp.g, x_box, y_box, z_box)?, None)
            }
            FamilyKind::Custom => {
                let (Some(h), Some(g)) = (&spec.h, &spec.g) else {
                    return Err(Error::Invalid("custom family needs both `h` and `g` expressions".into()));
                };
                let h_expr = Expr::parse(h, n, 'x')?;
                let g_expr = Expr::parse(g, n, 'y')?;
                let hb = x_box.product(&z_box).inflate(0.5);
                let gb = y_box.product(&z_box).inflate(0.5);
                let h = ScalarField::new(2 * n, hb, move |a| h_expr.eval(a));
                let g = ScalarField::new(2 * n, gb, move |a| g_expr.eval(a));
                (PreferencePair::new(h, g, x_box, y_box, z_box)?, None)
            }
        };
        Ok(Family {
            spec: spec.clone(),
            pair: pair.with_tolerances(tol),
            sum_form,
        })
    }

    pub fn is_sum_form(&self) -> bool {
        self.sum_form.is_some()
    }
}

/// `g(y, z) = y·z`, exposed for custom pair construction.
pub fn linear_seller(n: usize) -> ScalarField {
    linear_coupling(n)
}
