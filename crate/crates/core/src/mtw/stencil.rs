use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Five-point centred stencils at spacings `h` and `h/2`, combined by one
/// Richardson step. Nodes sit at `k · h/2` for `k ∈ {−4, −2, −1, 0, 1, 2, 4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stencil {
    /// Spacing `h` in units of the curve's unit-speed parameter.
    pub spacing: f64,
    pub richardson: bool,
}

impl Default for Stencil {
    fn default() -> Self {
        Self {
            spacing: 5e-2,
            richardson: true,
        }
    }
}

const OFFSETS: [i32; 7] = [-4, -2, -1, 0, 1, 2, 4];
pub(crate) const CENTER: usize = 3;

impl Stencil {
    /// Parameter values for a curve whose tangent has norm `speed`.
    pub fn nodes(&self, speed: f64) -> [f64; 7] {
        let h = self.spacing / speed;
        OFFSETS.map(|k| k as f64 * 0.5 * h)
    }

    fn combine(&self, coarse: [f64; 7], fine: [f64; 7]) -> [f64; 7] {
        if self.richardson {
            let mut w = [0.0; 7];
            for k in 0..7 {
                w[k] = (16.0 * fine[k] - coarse[k]) / 15.0;
            }
            w
        } else {
            coarse
        }
    }

    /// Weights of the first-derivative estimate at the centre node.
    pub fn first_weights(&self, speed: f64) -> [f64; 7] {
        let h = self.spacing / speed;
        let c = 1.0 / (12.0 * h);
        let coarse = [c, -8.0 * c, 0.0, 0.0, 0.0, 8.0 * c, -c];
        let f = 1.0 / (6.0 * h);
        let fine = [0.0, f, -8.0 * f, 0.0, 8.0 * f, -f, 0.0];
        self.combine(coarse, fine)
    }

    /// Weights of the second-derivative estimate at the centre node.
    pub fn second_weights(&self, speed: f64) -> [f64; 7] {
        let h = self.spacing / speed;
        let c = 1.0 / (12.0 * h * h);
        let coarse = [-c, 16.0 * c, 0.0, -30.0 * c, 0.0, 16.0 * c, -c];
        let f = 1.0 / (3.0 * h * h);
        let fine = [0.0, -f, 16.0 * f, -30.0 * f, 16.0 * f, -f, 0.0];
        self.combine(coarse, fine)
    }
}

pub(crate) fn apply(w: &[f64; 7], vals: &[f64]) -> f64 {
    w.iter().zip(vals).map(|(a, b)| a * b).sum()
}

pub(crate) fn apply_mat(w: &[f64; 7], vals: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(vals[0].nrows(), vals[0].ncols());
    for (a, m) in w.iter().zip(vals) {
        if *a != 0.0 {
            out += *a * m;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_low_degree_polynomials() {
        let s = Stencil::default();
        let t = s.nodes(1.0);
        for richardson in [false, true] {
            let s = Stencil { richardson, ..s };
            // f = 1 + 2t + 3t^2 + 4t^3 + 5t^4: f'(0) = 2, f''(0) = 6
            let vals: Vec<f64> = t.iter().map(|t| 1.0 + 2.0 * t + 3.0 * t * t + 4.0 * t.powi(3) + 5.0 * t.powi(4)).collect();
            assert!((apply(&s.first_weights(1.0), &vals) - 2.0).abs() < 1e-10);
            assert!((apply(&s.second_weights(1.0), &vals) - 6.0).abs() < 1e-8);
        }
    }

    #[test]
    fn richardson_reduces_error_on_exponential() {
        let base = Stencil::default();
        let t = base.nodes(0.25);
        let vals: Vec<f64> = t.iter().map(|t| t.exp()).collect();
        let plain = apply(&Stencil { richardson: false, ..base }.second_weights(0.25), &vals);
        let rich = apply(&base.second_weights(0.25), &vals);
        assert!((rich - 1.0).abs() < (plain - 1.0).abs());
    }
}
