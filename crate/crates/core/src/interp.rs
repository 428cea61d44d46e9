//! Interpolation kernels used by chart inversion and field reconstruction.
//!
//! Across trajectories (`ζ` directions) values are interpolated with
//! not-a-knot cubic splines on the uniform grid, expressed as weight vectors
//! so several quantities can share one set of weights. Along a trajectory
//! (`ξ`) cubic Hermite interpolation uses the stored characteristic rates.

use nalgebra::DMatrix;

/// Not-a-knot cubic spline on a uniform grid, stored as the linear operator
/// mapping node values to node second derivatives.
#[derive(Debug, Clone)]
pub struct SplineAxis {
    nodes: usize,
    lo: f64,
    step: f64,
    second: DMatrix<f64>,
}

impl SplineAxis {
    /// `nodes >= 3` uniform nodes starting at `lo` with spacing `step`.
    pub fn new(nodes: usize, lo: f64, step: f64) -> Self {
        assert!(nodes >= 3, "spline axis needs at least 3 nodes");
        let h2 = step * step;
        let second = if nodes == 3 {
            // The not-a-knot spline through three points is the parabola.
            DMatrix::from_fn(3, 3, |_, j| [1.0, -2.0, 1.0][j] / h2)
        } else {
            let mut sys = DMatrix::zeros(nodes, nodes);
            let mut rhs = DMatrix::zeros(nodes, nodes);
            sys[(0, 0)] = 1.0;
            sys[(0, 1)] = -2.0;
            sys[(0, 2)] = 1.0;
            let last = nodes - 1;
            sys[(last, last - 2)] = 1.0;
            sys[(last, last - 1)] = -2.0;
            sys[(last, last)] = 1.0;
            for i in 1..last {
                sys[(i, i - 1)] = 1.0;
                sys[(i, i)] = 4.0;
                sys[(i, i + 1)] = 1.0;
                rhs[(i, i - 1)] = 6.0 / h2;
                rhs[(i, i)] = -12.0 / h2;
                rhs[(i, i + 1)] = 6.0 / h2;
            }
            sys.lu().solve(&rhs).expect("not-a-knot system is nonsingular")
        };
        Self {
            nodes,
            lo,
            step,
            second,
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Weights `w`, `w'` such that `s(t) = Σ w_k v_k` and `s'(t) = Σ w'_k v_k`.
    ///
    /// Points outside the node range extrapolate the end cubic.
    pub fn weights(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let u = (t - self.lo) / self.step;
        let cell = (u.floor().max(0.0) as usize).min(self.nodes - 2);
        let s = u - cell as f64;
        let h = self.step;
        let mut w = vec![0.0; self.nodes];
        let mut dw = vec![0.0; self.nodes];
        w[cell] += 1.0 - s;
        w[cell + 1] += s;
        dw[cell] -= 1.0 / h;
        dw[cell + 1] += 1.0 / h;
        let c0 = h * h / 6.0 * ((1.0 - s).powi(3) - (1.0 - s));
        let c1 = h * h / 6.0 * (s.powi(3) - s);
        let d0 = -h / 6.0 * (3.0 * (1.0 - s).powi(2) - 1.0);
        let d1 = h / 6.0 * (3.0 * s * s - 1.0);
        for k in 0..self.nodes {
            let (m0, m1) = (self.second[(cell, k)], self.second[(cell + 1, k)]);
            w[k] += c0 * m0 + c1 * m1;
            dw[k] += d0 * m0 + d1 * m1;
        }
        (w, dw)
    }
}

/// Tensor-product spline weights over a row-major grid.
#[derive(Debug, Clone)]
pub struct TensorSpline {
    axes: Vec<SplineAxis>,
}

/// Per-node weights for the value and for each axis derivative.
#[derive(Debug, Clone)]
pub struct TensorWeights {
    pub value: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
}

impl TensorSpline {
    pub fn new(axes: Vec<SplineAxis>) -> Self {
        Self { axes }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(SplineAxis::nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self, t: &[f64]) -> TensorWeights {
        let per_axis: Vec<(Vec<f64>, Vec<f64>)> =
            self.axes.iter().zip(t).map(|(a, &ti)| a.weights(ti)).collect();
        let total = self.len();
        let dims: Vec<usize> = self.axes.iter().map(SplineAxis::nodes).collect();
        let mut value = vec![0.0; total];
        let mut grad = vec![vec![0.0; total]; self.axes.len()];
        let mut idx = vec![0usize; dims.len()];
        for flat in 0..total {
            let mut rem = flat;
            for axis in (0..dims.len()).rev() {
                idx[axis] = rem % dims[axis];
                rem /= dims[axis];
            }
            value[flat] = idx.iter().enumerate().map(|(a, &i)| per_axis[a].0[i]).product();
            for (g, grad_axis) in grad.iter_mut().enumerate() {
                grad_axis[flat] = idx
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| if a == g { per_axis[a].1[i] } else { per_axis[a].0[i] })
                    .product();
            }
        }
        TensorWeights { value, grad }
    }
}

/// Cubic Hermite interpolation on `[0, 1]` with endpoint values `f0, f1` and
/// derivatives `d0, d1` already scaled by the interval length.
pub fn hermite(s: f64, f0: f64, d0: f64, f1: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * d1
}
