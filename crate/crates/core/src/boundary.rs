//! Boundary surface `x^μ = φ^μ(ζ)`, field data `ψ^i(ζ)`, normal-derivative
//! data `ψ̂^i(ζ)` and the transverse vector `n^μ(ζ)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::model::HamiltonianModel;
use crate::{Error, Result};

/// `ζ -> real[k]`
pub type ZetaEval = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct BoundarySpec {
    pub n: usize,
    pub r: usize,
    pub surface: ZetaEval,
    pub field_data: ZetaEval,
    pub normal_data: ZetaEval,
    pub transverse: ZetaEval,
    pub zeta_box: Vec<[f64; 2]>,
}

impl std::fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundarySpec")
            .field("n", &self.n)
            .field("r", &self.r)
            .field("zeta_box", &self.zeta_box)
            .finish_non_exhaustive()
    }
}

/// Regular tensor-product grid over the `ζ` box, row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaGrid {
    pub dims: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ZetaGrid {
    pub fn new(dims: &[usize], zeta_box: &[[f64; 2]]) -> Result<Self> {
        if dims.len() != zeta_box.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} axes but the zeta box has {}",
                dims.len(),
                zeta_box.len()
            )));
        }
        for (axis, (&d, b)) in dims.iter().zip(zeta_box).enumerate() {
            if d < 3 {
                return Err(Error::InvalidInput(format!(
                    "zeta grid axis {axis} needs at least 3 points, got {d}"
                )));
            }
            if !(b[0].is_finite() && b[1].is_finite() && b[1] > b[0]) {
                return Err(Error::InvalidInput(format!("empty zeta interval on axis {axis}: {b:?}")));
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            lo: zeta_box.iter().map(|b| b[0]).collect(),
            hi: zeta_box.iter().map(|b| b[1]).collect(),
        })
    }

    pub fn axes(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.dims[axis] - 1) as f64
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes()];
        for axis in (0..self.axes()).rev() {
            idx[axis] = flat % self.dims[axis];
            flat /= self.dims[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i)
    }

    pub fn coord(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.lo[axis] + i as f64 * self.spacing(axis))
            .collect()
    }

    /// Flat index of the neighbour at `offset` along `axis`, if it exists.
    pub fn neighbor(&self, flat: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut idx = self.unravel(flat);
        let moved = idx[axis] as isize + offset;
        if moved < 0 || moved >= self.dims[axis] as isize {
            return None;
        }
        idx[axis] = moved as usize;
        Some(self.ravel(&idx))
    }

    /// True when the point has both neighbours along every axis.
    pub fn is_interior(&self, flat: usize) -> bool {
        self.unravel(flat)
            .iter()
            .zip(&self.dims)
            .all(|(&i, &d)| i > 0 && i + 1 < d)
    }

    pub fn contains(&self, zeta: &[f64], slack: f64) -> bool {
        zeta.iter().enumerate().all(|(axis, &z)| {
            let pad = slack * self.spacing(axis);
            z >= self.lo[axis] - pad && z <= self.hi[axis] + pad
        })
    }
}

/// The boundary data evaluated at one grid point of `ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub zeta: Vec<f64>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub ydot0: Vec<f64>,
    /// `∂φ^μ/∂ζ^A`, one row per `ζ` axis.
    pub tangent_basis: Vec<Vec<f64>>,
    /// The transverse vector `n^μ` at this point.
    pub normal: Vec<f64>,
}

/// Samples the boundary on a regular grid.
///
/// Tangents use central differences with the grid spacing as step. Every
/// sample is checked for a full-rank tangent frame and for transversality
/// of `n^μ`.
pub fn sample_boundary(spec: &BoundarySpec, grid: &[usize]) -> Result<Vec<BoundarySample>> {
    if spec.zeta_box.len() + 1 != spec.n {
        return Err(Error::InvalidInput(format!(
            "boundary of an {}-dimensional base needs {} zeta axes, got {}",
            spec.n,
            spec.n - 1,
            spec.zeta_box.len()
        )));
    }
    let zg = ZetaGrid::new(grid, &spec.zeta_box)?;
    (0..zg.len())
        .map(|flat| {
            let zeta = zg.coord(flat);
            let x0 = (spec.surface)(&zeta);
            let y0 = (spec.field_data)(&zeta);
            let ydot0 = (spec.normal_data)(&zeta);
            let normal = (spec.transverse)(&zeta);
            if x0.len() != spec.n || normal.len() != spec.n || y0.len() != spec.r || ydot0.len() != spec.r {
                return Err(Error::InvalidInput(format!(
                    "boundary evaluators returned inconsistent lengths at zeta = {zeta:?}"
                )));
            }
            let tangent_basis: Vec<Vec<f64>> = (0..zg.axes())
                .map(|axis| {
                    let h = zg.spacing(axis);
                    let mut zp = zeta.clone();
                    let mut zm = zeta.clone();
                    zp[axis] += h;
                    zm[axis] -= h;
                    let (xp, xm) = ((spec.surface)(&zp), (spec.surface)(&zm));
                    xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
                })
                .collect();
            check_frame(&zeta, &tangent_basis, &normal)?;
            Ok(BoundarySample {
                zeta,
                x0,
                y0,
                ydot0,
                tangent_basis,
                normal,
            })
        })
        .collect()
}

fn check_frame(zeta: &[f64], tangents: &[Vec<f64>], normal: &[f64]) -> Result<()> {
    let n = normal.len();
    let k = tangents.len();
    if k > 0 {
        let t = DMatrix::from_fn(k, n, |a, mu| tangents[a][mu]);
        let gram = &t * t.transpose();
        let scale = gram.amax().max(f64::MIN_POSITIVE);
        if gram.determinant().abs() <= 1e-12 * scale.powi(k as i32) {
            return Err(Error::DegenerateSurface {
                zeta: zeta.to_vec(),
                reason: "tangent frame is rank deficient".into(),
            });
        }
    }
    let frame = DMatrix::from_fn(n, n, |row, mu| if row == 0 { normal[mu] } else { tangents[row - 1][mu] });
    let scale: f64 = (0..n).map(|row| frame.row(row).norm()).product();
    if frame.determinant().abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateSurface {
            zeta: zeta.to_vec(),
            reason: "transverse vector lies in the tangent space".into(),
        });
    }
    Ok(())
}

/// Momentum `p^μ_i = u_i X^μ`, flattened as `p[mu * r + i]`.
pub fn momentum(covel: &[f64], transport: &[f64]) -> Vec<f64> {
    let r = covel.len();
    let mut p = vec![0.0; transport.len() * r];
    for (mu, xm) in transport.iter().enumerate() {
        for (i, ui) in covel.iter().enumerate() {
            p[mu * r + i] = ui * xm;
        }
    }
    p
}

/// Solves `Σ_μ ∂H/∂p^μ_i(x0, y0, u⊗X0) n^μ = ψ̂^i` for the covelocities `u_i`.
pub fn initial_covelocity(
    model: &HamiltonianModel,
    sample: &BoundarySample,
    transport: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    const MAX_ITER: usize = 50;
    let r = model.r;
    let n = model.n;
    let eq = |u: &[f64]| -> Vec<f64> {
        let dp = model.dh_dp(&sample.x0, &sample.y0, &momentum(u, transport));
        (0..r)
            .map(|i| (0..n).map(|mu| dp[mu * r + i] * sample.normal[mu]).sum::<f64>() - sample.ydot0[i])
            .collect()
    };
    let norm = |v: &[f64]| v.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));

    let mut u = vec![0.0; r];
    let mut res = eq(&u);
    for _ in 0..MAX_ITER {
        let mut jac = DMatrix::zeros(r, r);
        for k in 0..r {
            let h = 1e-6 * u[k].abs().max(1.0);
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let (fp, fm) = (eq(&up), eq(&um));
            for i in 0..r {
                jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = jac.determinant();
        let scale = jac.amax();
        if !det.is_finite() || scale == 0.0 || det.abs() <= 1e-12 * scale.powi(r as i32) {
            return Err(Error::SingularJacobian {
                context: "initial covelocity",
                det,
            });
        }
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(&res))
            .ok_or(Error::SingularJacobian {
                context: "initial covelocity",
                det,
            })?;
        let next: Vec<f64> = u.iter().zip(step.iter()).map(|(ui, d)| ui - d).collect();
        let next_res = eq(&next);
        if norm(&res) <= tol {
            // One polishing step, kept only if it does not lose accuracy.
            return Ok(if norm(&next_res) <= norm(&res) { next } else { u });
        }
        u = next;
        res = next_res;
    }
    let residual = norm(&res);
    if residual <= tol {
        Ok(u)
    } else {
        Err(Error::NoConvergence {
            context: "initial covelocity",
            iterations: MAX_ITER,
            residual,
        })
    }
}
