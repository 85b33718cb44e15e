//! Surplus functions `b(x, y) = sup_z h(x, z) + g(y, z)` and the derivative
//! identities of the maximizing contract `z(x, y)`.

mod structure;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_calc::{check_point, damped_newton, linalg, partial, DomainBox, NewtonOptions, Point, ScalarField};

pub use structure::{check_structure, StructureSampler};

/// Numerical tolerances shared by the evaluation and screening routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Bound on `|∇_z (h + g)|` at an accepted maximizer.
    pub stationarity: f64,
    /// An accepted maximizer needs `λ_max(M) < -negative_definite`.
    pub negative_definite: f64,
    /// Value gap below which two distinct maxima count as a tie.
    pub tie_value: f64,
    /// Distance beyond which two maximizers are distinct.
    pub tie_distance: f64,
    /// Residual bound for `b_exp`.
    pub b_exp: f64,
    /// Residual bound on every b-segment node.
    pub segment: f64,
    /// Minimum pairwise image distance for the twist checks.
    pub twist: f64,
    /// Minimum `|det|` for the non-degeneracy checks.
    pub nondegenerate: f64,
    /// Slack band around zero for the curvature verdicts.
    pub curvature_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stationarity: 1e-9,
            negative_definite: 1e-10,
            tie_value: 1e-9,
            tie_distance: 1e-6,
            b_exp: 1e-10,
            segment: 1e-9,
            twist: 1e-7,
            nondegenerate: 1e-10,
            curvature_slack: 1e-7,
        }
    }
}

/// Buyer and seller preferences `h(x, z)`, `g(y, z)` on `X × Z`, `Y × Z`.
///
/// `h` takes its arguments as `(x_1..x_n, z_1..z_n)` and `g` as
/// `(y_1..y_n, z_1..z_n)`.
#[derive(Debug, Clone)]
pub struct PreferencePair {
    pub h: ScalarField,
    pub g: ScalarField,
    pub x_box: DomainBox,
    pub y_box: DomainBox,
    pub z_box: DomainBox,
    pub tol: Tolerances,
    n: usize,
}

impl PreferencePair {
    pub fn new(
        h: ScalarField,
        g: ScalarField,
        x_box: DomainBox,
        y_box: DomainBox,
        z_box: DomainBox,
    ) -> Result<Self> {
        let n = x_box.dim();
        for (what, d) in [("h", h.dim()), ("g", g.dim())] {
            if d != 2 * n {
                return Err(Error::Invalid(format!("{what} must take 2n = {} arguments, got {d}", 2 * n)));
            }
        }
        if y_box.dim() != n || z_box.dim() != n {
            return Err(Error::Invalid("X, Y and Z boxes must share one dimension".into()));
        }
        Ok(Self {
            h,
            g,
            x_box,
            y_box,
            z_box,
            tol: Tolerances::default(),
            n,
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `h(x, z) + g(y, z)`.
    pub fn objective(&self, x: &Point, y: &Point, z: &Point) -> f64 {
        self.h.value(&join(x, z)) + self.g.value(&join(y, z))
    }

    /// `∇_z [h(x, z) + g(y, z)]`.
    pub fn objective_gradient(&self, x: &Point, y: &Point, z: &Point) -> Result<DVector<f64>> {
        Ok(grad_block(&self.h, &join(x, z), self.n, self.n)? + grad_block(&self.g, &join(y, z), self.n, self.n)?)
    }

    /// `M = D²_zz h(x, z) + D²_zz g(y, z)`.
    pub fn m_matrix(&self, x: &Point, y: &Point, z: &Point) -> Result<DMatrix<f64>> {
        let n = self.n;
        let m = hess_block(&self.h, &join(x, z), (n, n), (n, n))? + hess_block(&self.g, &join(y, z), (n, n), (n, n))?;
        Ok(linalg::symmetrize(&m))
    }

    /// Second-order blocks of `h` at `(x, z)`.
    pub fn h_blocks(&self, x: &Point, z: &Point) -> Result<Blocks> {
        Blocks::of(&self.h, x, z)
    }

    /// Second-order blocks of `g` at `(y, z)`.
    pub fn g_blocks(&self, y: &Point, z: &Point) -> Result<Blocks> {
        Blocks::of(&self.g, y, z)
    }

    /// `D_x h(x, z)`.
    pub fn h_x(&self, x: &Point, z: &Point) -> Result<DVector<f64>> {
        grad_block(&self.h, &join(x, z), 0, self.n)
    }

    /// `D_z h(x, z)`.
    pub fn h_z(&self, x: &Point, z: &Point) -> Result<DVector<f64>> {
        grad_block(&self.h, &join(x, z), self.n, self.n)
    }

    /// `D_z g(y, z)`.
    pub fn g_z(&self, y: &Point, z: &Point) -> Result<DVector<f64>> {
        grad_block(&self.g, &join(y, z), self.n, self.n)
    }

    /// `D²_xz h(x, z)`, rows indexed by x.
    pub fn h_xz(&self, x: &Point, z: &Point) -> Result<DMatrix<f64>> {
        hess_block(&self.h, &join(x, z), (0, self.n), (self.n, self.n))
    }

    /// `D²_zy g(y, z)`, rows indexed by z.
    pub fn g_zy(&self, y: &Point, z: &Point) -> Result<DMatrix<f64>> {
        hess_block(&self.g, &join(y, z), (self.n, self.n), (0, self.n))
    }

    /// Default multi-start set: the `3^n` interior lattice of the Z box.
    pub fn default_starts(&self) -> Vec<Point> {
        if self.z_box.lo.iter().chain(&self.z_box.hi).all(|c| c.is_finite()) {
            self.z_box.lattice(3)
        } else {
            vec![self.z_box.center()]
        }
    }
}

/// Gradient and Hessian blocks of a preference function at `(a, z)`, where
/// `a` is the agent variable (x for `h`, y for `g`).
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub grad_a: DVector<f64>,
    pub grad_z: DVector<f64>,
    pub aa: DMatrix<f64>,
    /// `(az)_{ij} = ∂a_i ∂z_j`.
    pub az: DMatrix<f64>,
    pub zz: DMatrix<f64>,
}

impl Blocks {
    fn of(f: &ScalarField, a: &Point, z: &Point) -> Result<Self> {
        let n = a.len();
        let args = join(a, z);
        Ok(Self {
            grad_a: grad_block(f, &args, 0, n)?,
            grad_z: grad_block(f, &args, n, n)?,
            aa: linalg::symmetrize(&hess_block(f, &args, (0, n), (0, n))?),
            az: hess_block(f, &args, (0, n), (n, n))?,
            zz: linalg::symmetrize(&hess_block(f, &args, (n, n), (n, n))?),
        })
    }

    /// `(za)_{ij} = ∂z_i ∂a_j`.
    pub fn za(&self) -> DMatrix<f64> {
        self.az.transpose()
    }
}

pub(crate) fn join(a: &Point, b: &Point) -> Vec<f64> {
    a.iter().chain(b.iter()).copied().collect()
}

fn grad_block(f: &ScalarField, args: &[f64], offset: usize, len: usize) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(len);
    for i in 0..len {
        g[i] = partial(f, args, &[offset + i])?;
    }
    Ok(g)
}

fn hess_block(
    f: &ScalarField,
    args: &[f64],
    (r0, rn): (usize, usize),
    (c0, cn): (usize, usize),
) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rn, cn);
    for i in 0..rn {
        for j in 0..cn {
            m[(i, j)] = partial(f, args, &[r0 + i, c0 + j])?;
        }
    }
    Ok(m)
}

/// Result of the inner maximization over contracts.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerMax {
    pub z_star: Point,
    /// `D²_zz h + D²_zz g` at `z_star`.
    pub m: DMatrix<f64>,
    pub value: f64,
    pub stationarity: f64,
}

/// Maximizes `z ↦ h(x, z) + g(y, z)` by damped Newton from every start and
/// keeps the best non-degenerate interior maximum.
pub fn inner_maximize(pp: &PreferencePair, x: &Point, y: &Point, starts: &[Point]) -> Result<InnerMax> {
    check_point(x, pp.n)?;
    check_point(y, pp.n)?;
    if starts.is_empty() {
        return Err(Error::Invalid("inner maximization needs at least one start".into()));
    }
    let opts = NewtonOptions {
        tolerance: pp.tol.stationarity,
        ..NewtonOptions::default()
    };
    let mut inside: Vec<InnerMax> = Vec::new();
    let mut outside = false;
    for start in starts {
        let Ok(z) = damped_newton(
            "inner maximization",
            start.clone(),
            |z| pp.objective_gradient(x, y, z),
            |z| pp.m_matrix(x, y, z),
            &opts,
        ) else {
            continue;
        };
        let Ok(m) = pp.m_matrix(x, y, &z) else { continue };
        if linalg::max_eigenvalue(&m) >= -pp.tol.negative_definite {
            continue;
        }
        if !pp.z_box.contains(z.as_slice()) {
            outside = true;
            continue;
        }
        let value = pp.objective(x, y, &z);
        if !value.is_finite() {
            continue;
        }
        let stationarity = pp.objective_gradient(x, y, &z)?.norm();
        inside.push(InnerMax {
            z_star: z,
            m,
            value,
            stationarity,
        });
    }
    let best = inside
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .cloned();
    let Some(best) = best else {
        return Err(if outside { Error::BoundaryMaximizer } else { Error::NoConvergentStart });
    };
    for other in &inside {
        let distance = (&other.z_star - &best.z_star).norm();
        let gap = best.value - other.value;
        if distance > pp.tol.tie_distance && gap <= pp.tol.tie_value {
            return Err(Error::AmbiguousMaximizer { distance, gap });
        }
    }
    Ok(best)
}

/// `b(x, y)` together with the maximizer and every first and second
/// derivative identity of the envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct SurplusEvaluation {
    pub x: Point,
    pub y: Point,
    pub z_star: Point,
    pub b_value: f64,
    pub m: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
    /// `D_x b = D_x h(x, z*)`.
    pub b_x: DVector<f64>,
    /// `D_y b = D_y g(y, z*)`.
    pub b_y: DVector<f64>,
    /// `D_x z = -M⁻¹ D²_zx h`.
    pub z_x: DMatrix<f64>,
    /// `D_y z = -M⁻¹ D²_zy g`.
    pub z_y: DMatrix<f64>,
    /// `D²_xy b = -D²_xz h M⁻¹ D²_zy g`.
    pub b_xy: DMatrix<f64>,
    /// `D²_xx b = D²_xx h - D²_xz h M⁻¹ D²_zx h`.
    pub b_xx: DMatrix<f64>,
    pub h_blocks: Blocks,
    pub g_blocks: Blocks,
    pub stationarity: f64,
}

pub fn evaluate_surplus(pp: &PreferencePair, x: &Point, y: &Point) -> Result<SurplusEvaluation> {
    evaluate_surplus_with(pp, x, y, &pp.default_starts())
}

/// Evaluation continued from a nearby maximizer.
pub fn evaluate_surplus_from(pp: &PreferencePair, x: &Point, y: &Point, z_guess: &Point) -> Result<SurplusEvaluation> {
    evaluate_surplus_with(pp, x, y, std::slice::from_ref(z_guess))
}

pub fn evaluate_surplus_with(pp: &PreferencePair, x: &Point, y: &Point, starts: &[Point]) -> Result<SurplusEvaluation> {
    let inner = inner_maximize(pp, x, y, starts)?;
    assemble(pp, x, y, inner)
}

fn assemble(pp: &PreferencePair, x: &Point, y: &Point, inner: InnerMax) -> Result<SurplusEvaluation> {
    let z = &inner.z_star;
    let hb = pp.h_blocks(x, z)?;
    let gb = pp.g_blocks(y, z)?;
    let m_inv = linalg::inverse(&inner.m, "M = D²_zz h + D²_zz g")?;
    let h_zx = hb.za();
    let g_zy = gb.za();
    let z_x = -(&m_inv * &h_zx);
    let z_y = -(&m_inv * &g_zy);
    let b_xy = -(&hb.az * &m_inv * &g_zy);
    let b_xx = linalg::symmetrize(&(&hb.aa - &hb.az * &m_inv * &h_zx));
    Ok(SurplusEvaluation {
        x: x.clone(),
        y: y.clone(),
        z_star: inner.z_star.clone(),
        b_value: inner.value,
        m: inner.m,
        m_inv,
        b_x: hb.grad_a.clone(),
        b_y: gb.grad_a.clone(),
        z_x,
        z_y,
        b_xy,
        b_xx,
        h_blocks: hb,
        g_blocks: gb,
        stationarity: inner.stationarity,
    })
}
