use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of X, Y or Z in model coordinates.
pub type Point = DVector<f64>;

/// Checks that a point has the expected dimension and finite coordinates.
pub fn check_point(p: &Point, dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    if p.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("point coordinates"));
    }
    Ok(())
}

/// Axis-aligned product of closed intervals. Infinite bounds are allowed for
/// fields defined on all of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Invalid("box bounds must be non-empty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || a.is_nan() || b.is_nan()) {
            return Err(Error::Invalid("box requires lo < hi in every coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; n], vec![hi; n]).expect("valid cube")
    }

    pub fn unbounded(n: usize) -> Self {
        Self::cube(n, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Cartesian product `self × other`, coordinates of `self` first.
    pub fn product(&self, other: &DomainBox) -> DomainBox {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        DomainBox { lo, hi }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_within(x, 0.0)
    }

    /// Membership in the box grown by `tol` on every side.
    pub fn contains_within(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(c, (a, b))| *c >= a - tol && *c <= b + tol)
    }

    /// Distance from `x` to the nearest face; negative outside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(c, (a, b))| (c - a).min(b - c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Point {
        Point::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(a, b)| {
                if a.is_finite() && b.is_finite() {
                    0.5 * (a + b)
                } else if a.is_finite() {
                    *a
                } else if b.is_finite() {
                    *b
                } else {
                    0.0
                }
            }),
        )
    }

    /// Grows a bounded box by `frac` of its width on each side.
    pub fn inflate(&self, frac: f64) -> DomainBox {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                let w = b - a;
                (a - frac * w, b + frac * w)
            })
            .unzip();
        DomainBox { lo, hi }
    }

    /// Tensor grid with `per_dim` nodes per coordinate, endpoints included.
    /// Requires a bounded box.
    pub fn grid(&self, per_dim: usize) -> Vec<Point> {
        let nodes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                if per_dim <= 1 {
                    vec![0.5 * (a + b)]
                } else {
                    (0..per_dim)
                        .map(|k| a + (b - a) * k as f64 / (per_dim - 1) as f64)
                        .collect()
                }
            })
            .collect();
        tensor_product(&nodes)
    }

    /// `k^n` lattice of interior points at fractions `(j + 1) / (k + 1)`.
    pub fn lattice(&self, k: usize) -> Vec<Point> {
        let nodes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                (0..k)
                    .map(|j| a + (b - a) * (j + 1) as f64 / (k + 1) as f64)
                    .collect()
            })
            .collect();
        tensor_product(&nodes)
    }

    /// Uniform sample; requires a bounded box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::from_iterator(
            self.dim(),
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>()),
        )
    }
}

fn tensor_product(nodes: &[Vec<f64>]) -> Vec<Point> {
    let n = nodes.len();
    let total: usize = nodes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        out.push(Point::from_iterator(n, (0..n).map(|d| nodes[d][idx[d]])));
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < nodes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Analytic partial derivative callback. The slice names the coordinates
/// differentiated, so `&[0, 2]` is the mixed partial in the first and third
/// arguments.
pub type PartialFn = Arc<dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync>;

/// Smooth real-valued function on a box with optional analytic partials.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    domain: DomainBox,
    eval: Evaluator,
    partials: Option<PartialFn>,
    analytic_order: usize,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("analytic_order", &self.analytic_order)
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(dim: usize, domain: DomainBox, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        assert_eq!(domain.dim(), dim, "domain dimension must match field dimension");
        Self {
            dim,
            domain,
            eval: Arc::new(eval),
            partials: None,
            analytic_order: 0,
        }
    }

    /// Attaches analytic partials valid for every multi-index of length
    /// `1..=max_order`.
    pub fn with_partials<F>(mut self, max_order: usize, partials: F) -> Self
    where
        F: Fn(&[f64], &[usize]) -> f64 + Send + Sync + 'static,
    {
        self.partials = Some(Arc::new(partials));
        self.analytic_order = max_order.min(4);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn analytic_order(&self) -> usize {
        self.analytic_order
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Analytic partial, if a callback covering this order is attached.
    pub fn analytic(&self, x: &[f64], index: &[usize]) -> Option<f64> {
        match &self.partials {
            Some(p) if !index.is_empty() && index.len() <= self.analytic_order => {
                Some(p(x, index))
            }
            _ => None,
        }
    }
}
