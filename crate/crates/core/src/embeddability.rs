//! Transport-field ansätze, the chart regularity matrix, and the
//! embeddability condition along the boundary directions:
//!
//! `R^i_A = ∂y^i/∂ζ^A − Σ_μ ∂H/∂p^μ_i(x, y, u⊗X) ∂x^μ/∂ζ^A = 0`.
//!
//! The `ξ` direction of the same condition holds along every characteristic
//! by construction and is not part of the residual.
//!
//! [`fit_embeddability`] adjusts the ansatz parameters (and, optionally, a
//! user-chosen set of boundary-data constants) by damped Gauss–Newton on the
//! residual field.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{sample_boundary, BoundarySample, BoundarySpec, ZetaGrid};
use crate::characteristics::{trace_fan, CharacteristicFan};
use crate::model::HamiltonianModel;
use crate::{Error, Result};

/// Magnitude profile `α(ζ)` of a scaled-direction ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaProfile {
    Constant { value: f64 },
    /// `α(ζ) = base + amplitude · sin(ζ₁)`
    Sine { base: f64, amplitude: f64 },
}

impl AlphaProfile {
    pub fn eval(&self, zeta: &[f64]) -> f64 {
        match *self {
            AlphaProfile::Constant { value } => value,
            AlphaProfile::Sine { base, amplitude } => base + amplitude * zeta.first().copied().unwrap_or(0.0).sin(),
        }
    }

    fn base(&self) -> f64 {
        match *self {
            AlphaProfile::Constant { value } => value,
            AlphaProfile::Sine { base, .. } => base,
        }
    }

    fn with_base(&self, b: f64) -> Self {
        match *self {
            AlphaProfile::Constant { .. } => AlphaProfile::Constant { value: b },
            AlphaProfile::Sine { amplitude, .. } => AlphaProfile::Sine { base: b, amplitude },
        }
    }
}

/// Transport field `X^μ = A^μ(ζ)`, constant along each characteristic.
#[derive(Clone)]
pub enum XAnsatz {
    /// Uniform field `X = A`.
    Constant { a: Vec<f64> },
    /// `X = α(ζ) d / |d|` with `d = (1, e^{c₁}, …, e^{c_{n−1}})`.
    ///
    /// The direction is uniform, so the divergence vanishes for any `α`.
    /// For `n = 2` this gives `A² = e^c A¹` and `A¹ = α/√(1+e^{2c})`.
    ScaledDirection { direction: Vec<f64>, alpha: AlphaProfile },
    /// Arbitrary user field with no parameters and no divergence guarantee.
    Field(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for XAnsatz {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            XAnsatz::Constant { a } => f.debug_struct("Constant").field("a", a).finish(),
            XAnsatz::ScaledDirection { direction, alpha } => f
                .debug_struct("ScaledDirection")
                .field("direction", direction)
                .field("alpha", alpha)
                .finish(),
            XAnsatz::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl XAnsatz {
    pub fn kind(&self) -> &'static str {
        match self {
            XAnsatz::Constant { .. } => "constant",
            XAnsatz::ScaledDirection { .. } => "scaled_direction",
            XAnsatz::Field(_) => "field",
        }
    }

    pub fn eval(&self, zeta: &[f64]) -> Vec<f64> {
        match self {
            XAnsatz::Constant { a } => a.clone(),
            XAnsatz::ScaledDirection { direction, alpha } => {
                let mut d = Vec::with_capacity(direction.len() + 1);
                d.push(1.0);
                d.extend(direction.iter().map(|c| c.exp()));
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                let a = alpha.eval(zeta);
                d.into_iter().map(|v| a * v / norm).collect()
            }
            XAnsatz::Field(f) => f(zeta),
        }
    }

    /// Parameter vector: `A` for constant fields, `(c₁…c_{n−1}, α-base)` for
    /// scaled directions, empty otherwise.
    pub fn params(&self) -> Vec<f64> {
        match self {
            XAnsatz::Constant { a } => a.clone(),
            XAnsatz::ScaledDirection { direction, alpha } => {
                let mut p = direction.clone();
                p.push(alpha.base());
                p
            }
            XAnsatz::Field(_) => Vec::new(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            XAnsatz::Constant { a } => (1..=a.len()).map(|k| format!("A{k}")).collect(),
            XAnsatz::ScaledDirection { direction, .. } => {
                let mut names: Vec<String> = if direction.len() == 1 {
                    vec!["c".to_string()]
                } else {
                    (1..=direction.len()).map(|k| format!("c{k}")).collect()
                };
                names.push("alpha".into());
                names
            }
            XAnsatz::Field(_) => Vec::new(),
        }
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let expected = self.params().len();
        if params.len() != expected {
            return Err(Error::InvalidInput(format!(
                "ansatz expects {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(match self {
            XAnsatz::Constant { .. } => XAnsatz::Constant { a: params.to_vec() },
            XAnsatz::ScaledDirection { alpha, .. } => XAnsatz::ScaledDirection {
                direction: params[..expected - 1].to_vec(),
                alpha: alpha.with_base(params[expected - 1]),
            },
            XAnsatz::Field(f) => XAnsatz::Field(f.clone()),
        })
    }
}

/// An ansatz together with the subset of its parameters left free.
#[derive(Debug, Clone)]
pub struct AnsatzFamily {
    pub ansatz: XAnsatz,
    /// Indices into [`XAnsatz::params`].
    pub free: Vec<usize>,
}

impl AnsatzFamily {
    pub fn new(ansatz: XAnsatz, free_names: &[&str]) -> Result<Self> {
        let names = ansatz.param_names();
        let free = free_names
            .iter()
            .map(|f| {
                names.iter().position(|n| n == f).ok_or_else(|| {
                    Error::InvalidInput(format!("ansatz {} has no parameter {f:?} (has {names:?})", ansatz.kind()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ansatz, free })
    }

    fn free_values(&self) -> Vec<f64> {
        let p = self.ansatz.params();
        self.free.iter().map(|&k| p[k]).collect()
    }

    fn free_names(&self) -> Vec<String> {
        let names = self.ansatz.param_names();
        self.free.iter().map(|&k| names[k].clone()).collect()
    }

    fn instantiate(&self, free_values: &[f64]) -> Result<XAnsatz> {
        let mut p = self.ansatz.params();
        for (&k, v) in self.free.iter().zip(free_values) {
            p[k] = *v;
        }
        self.ansatz.with_params(&p)
    }
}

/// Boundary-data constants opened as fit unknowns. `build` maps their values
/// to a candidate boundary specification.
#[derive(Clone)]
pub struct OpenConstants {
    pub names: Vec<String>,
    pub initial: Vec<f64>,
    pub build: Arc<dyn Fn(&[f64]) -> Result<BoundarySpec> + Send + Sync>,
}

impl std::fmt::Debug for OpenConstants {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenConstants")
            .field("names", &self.names)
            .field("initial", &self.initial)
            .finish_non_exhaustive()
    }
}

/// Fan resolution used by every residual evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FanNumerics {
    pub zeta_grid: Vec<usize>,
    pub xi_max: f64,
    pub steps: usize,
}

/// Chart matrix: first row `A(ζ)`, then `∂A/∂ζ^B ξ + ∂x₀/∂ζ^B` per axis.
fn chart_rows(transport: &[f64], d_transport: &[Vec<f64>], d_x0: &[Vec<f64>], xi: f64) -> DMatrix<f64> {
    let n = transport.len();
    DMatrix::from_fn(n, n, |row, mu| {
        if row == 0 {
            transport[mu]
        } else {
            d_transport[row - 1][mu] * xi + d_x0[row - 1][mu]
        }
    })
}

/// Derivative along `axis` of per-trajectory vectors at grid point `j`,
/// central in the interior and second-order one-sided at the edges.
fn grid_derivative(grid: &ZetaGrid, j: usize, axis: usize, value: impl Fn(usize) -> Vec<f64>) -> Vec<f64> {
    let h = grid.spacing(axis);
    let combine = |terms: &[(usize, f64)]| -> Vec<f64> {
        let vals: Vec<(Vec<f64>, f64)> = terms.iter().map(|&(k, w)| (value(k), w)).collect();
        let len = vals[0].0.len();
        (0..len).map(|m| vals.iter().map(|(v, w)| v[m] * w).sum::<f64>() / h).collect()
    };
    match (grid.neighbor(j, axis, -1), grid.neighbor(j, axis, 1)) {
        (Some(m), Some(p)) => combine(&[(p, 0.5), (m, -0.5)]),
        (None, Some(p)) => {
            let pp = grid.neighbor(j, axis, 2).expect("axis has at least 3 points");
            combine(&[(j, -1.5), (p, 2.0), (pp, -0.5)])
        }
        (Some(m), None) => {
            let mm = grid.neighbor(j, axis, -2).expect("axis has at least 3 points");
            combine(&[(j, 1.5), (m, -2.0), (mm, 0.5)])
        }
        (None, None) => unreachable!("axis has at least 3 points"),
    }
}

/// Chart regularity matrix at a fan node and its determinant.
pub fn regularity_matrix(fan: &CharacteristicFan, zeta_index: usize, xi_index: usize) -> (DMatrix<f64>, f64) {
    let axes = fan.grid.axes();
    let transport_of = |k: usize| fan.trajectories[k][0].transport.clone();
    let x0_of = |k: usize| fan.trajectories[k][0].x.clone();
    let d_transport: Vec<Vec<f64>> = (0..axes)
        .map(|a| grid_derivative(&fan.grid, zeta_index, a, transport_of))
        .collect();
    let d_x0: Vec<Vec<f64>> = (0..axes).map(|a| grid_derivative(&fan.grid, zeta_index, a, x0_of)).collect();
    let m = chart_rows(
        &fan.trajectories[zeta_index][0].transport,
        &d_transport,
        &d_x0,
        fan.xi_at(xi_index),
    );
    let det = m.determinant();
    (m, det)
}

/// Largest `|∂X^μ/∂x^μ|` over interior fan nodes, with `∂ζ/∂x` taken from
/// the inverse chart matrix and `∂A/∂ζ` from central differences of the
/// ansatz at the grid spacing.
pub fn divergence_residual(fan: &CharacteristicFan, ansatz: &XAnsatz) -> Result<f64> {
    let grid = &fan.grid;
    let axes = grid.axes();
    let mut worst = 0.0_f64;
    for j in (0..grid.len()).filter(|&j| grid.is_interior(j)) {
        let zeta = grid.coord(j);
        let transport = ansatz.eval(&zeta);
        let d_transport: Vec<Vec<f64>> = (0..axes)
            .map(|a| {
                let h = grid.spacing(a);
                let mut zp = zeta.clone();
                let mut zm = zeta.clone();
                zp[a] += h;
                zm[a] -= h;
                let (tp, tm) = (ansatz.eval(&zp), ansatz.eval(&zm));
                tp.iter().zip(&tm).map(|(p, m)| (p - m) / (2.0 * h)).collect()
            })
            .collect();
        let d_x0: Vec<Vec<f64>> = (0..axes)
            .map(|a| grid_derivative(grid, j, a, |k| fan.trajectories[k][0].x.clone()))
            .collect();
        for k in 0..=fan.steps {
            let m = chart_rows(&transport, &d_transport, &d_x0, fan.xi_at(k));
            let det = m.determinant();
            if det.abs() < 1e-10 {
                return Err(Error::SingularChart {
                    zeta_index: j,
                    xi_index: k,
                    det,
                });
            }
            // Columns of the inverse are ∂(ξ, ζ)/∂x^μ; rows of M are ∂x/∂(ξ, ζ).
            let jac_inv = m.transpose().try_inverse().ok_or(Error::SingularChart {
                zeta_index: j,
                xi_index: k,
                det,
            })?;
            let div: f64 = (0..axes)
                .map(|b| (0..fan.n).map(|mu| d_transport[b][mu] * jac_inv[(b + 1, mu)]).sum::<f64>())
                .sum();
            worst = worst.max(div.abs());
        }
    }
    Ok(worst)
}

/// One residual sample: `values[i * (n−1) + A] = R^i_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPoint {
    pub zeta_index: usize,
    pub xi_index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddabilityResidual {
    pub points: Vec<ResidualPoint>,
    pub rms: f64,
    pub max: f64,
}

impl EmbeddabilityResidual {
    fn from_points(points: Vec<ResidualPoint>) -> Self {
        let count: usize = points.iter().map(|p| p.values.len()).sum();
        let (sum2, max) = points
            .iter()
            .flat_map(|p| p.values.iter())
            .fold((0.0, 0.0_f64), |(s, m), v| (s + v * v, m.max(v.abs())));
        let rms = if count == 0 { 0.0 } else { (sum2 / count as f64).sqrt() };
        Self { points, rms, max }
    }
}

/// Residual of the boundary-direction embeddability condition at every
/// interior `ζ` node and every `ξ` node, differencing across neighbouring
/// trajectories at equal `ξ`.
pub fn embeddability_residual(model: &HamiltonianModel, fan: &CharacteristicFan) -> EmbeddabilityResidual {
    let (n, r) = (model.n, model.r);
    let grid = &fan.grid;
    let axes = grid.axes();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&j| grid.is_interior(j)).collect();
    let points: Vec<ResidualPoint> = nodes
        .par_iter()
        .flat_map_iter(|&j| {
            let neighbors: Vec<(usize, usize, f64)> = (0..axes)
                .map(|a| {
                    (
                        grid.neighbor(j, a, 1).expect("interior"),
                        grid.neighbor(j, a, -1).expect("interior"),
                        2.0 * grid.spacing(a),
                    )
                })
                .collect();
            (0..=fan.steps).map(move |k| {
                let s = &fan.trajectories[j][k];
                let dp = model.dh_dp(&s.x, &s.y, &s.momentum());
                let mut values = vec![0.0; r * axes];
                for (a, &(jp, jm, width)) in neighbors.iter().enumerate() {
                    let (sp, sm) = (&fan.trajectories[jp][k], &fan.trajectories[jm][k]);
                    for i in 0..r {
                        let dy = (sp.y[i] - sm.y[i]) / width;
                        let flow: f64 = (0..n).map(|mu| dp[mu * r + i] * (sp.x[mu] - sm.x[mu]) / width).sum();
                        values[i * axes + a] = dy - flow;
                    }
                }
                ResidualPoint {
                    zeta_index: j,
                    xi_index: k,
                    values,
                }
            })
        })
        .collect();
    EmbeddabilityResidual::from_points(points)
}

/// Result of [`fit_embeddability`].
#[derive(Debug, Clone)]
pub struct EmbeddabilityFit {
    pub ansatz: XAnsatz,
    /// Names of the fitted unknowns: free ansatz parameters, then open constants.
    pub param_names: Vec<String>,
    pub fitted_params: Vec<f64>,
    /// Values of the open boundary-data constants (empty when none are open).
    pub constants: Vec<f64>,
    /// RMS of the boundary-direction embeddability residual.
    pub residual_norm: f64,
    /// RMS mismatch between candidate and target boundary data, when
    /// constants are open.
    pub fidelity_norm: Option<f64>,
    /// Threshold applied to both norms (tolerance times data magnitude).
    pub tolerance: f64,
    pub compatible: bool,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

/// Serializable summary of an [`EmbeddabilityFit`].
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub ansatz_kind: String,
    pub ansatz_params: Vec<f64>,
    pub param_names: Vec<String>,
    pub fitted_params: Vec<f64>,
    pub residual_rms: f64,
    pub fidelity_rms: Option<f64>,
    pub tolerance: f64,
    pub compatible: bool,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

impl EmbeddabilityFit {
    pub fn report(&self) -> FitReport {
        FitReport {
            ansatz_kind: self.ansatz.kind().to_string(),
            ansatz_params: self.ansatz.params(),
            param_names: self.param_names.clone(),
            fitted_params: self.fitted_params.clone(),
            residual_rms: self.residual_norm,
            fidelity_rms: self.fidelity_norm,
            tolerance: self.tolerance,
            compatible: self.compatible,
            converged: self.converged,
            iterations: self.iterations,
            diagnostic: self.diagnostic.clone(),
        }
    }

    /// Value of a fitted unknown by name.
    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|k| self.fitted_params[k])
    }
}

/// Largest `|ψ|` or `|ψ̂|` over the samples.
pub fn data_magnitude(samples: &[BoundarySample]) -> f64 {
    samples
        .iter()
        .flat_map(|s| s.y0.iter().chain(&s.ydot0))
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

struct Evaluation {
    rows: Vec<f64>,
    emb_rms: f64,
    fid_rms: Option<f64>,
}

impl Evaluation {
    fn cost(&self) -> f64 {
        self.rows.iter().map(|v| v * v).sum()
    }
}

struct Problem<'a> {
    model: &'a HamiltonianModel,
    target: &'a BoundarySpec,
    target_samples: Vec<BoundarySample>,
    family: &'a AnsatzFamily,
    constants: Option<&'a OpenConstants>,
    numerics: &'a FanNumerics,
    n_ansatz: usize,
}

impl Problem<'_> {
    fn candidate_spec(&self, theta: &[f64]) -> Result<Option<BoundarySpec>> {
        match self.constants {
            Some(c) => (c.build)(&theta[self.n_ansatz..]).map(Some),
            None => Ok(None),
        }
    }

    fn fan(&self, theta: &[f64]) -> Result<(CharacteristicFan, Vec<BoundarySample>)> {
        let ansatz = self.family.instantiate(&theta[..self.n_ansatz])?;
        let samples = match self.candidate_spec(theta)? {
            Some(spec) => sample_boundary(&spec, &self.numerics.zeta_grid)?,
            None => self.target_samples.clone(),
        };
        let grid = ZetaGrid::new(&self.numerics.zeta_grid, &self.target.zeta_box)?;
        let fan = trace_fan(self.model, &samples, grid, &ansatz, self.numerics.xi_max, self.numerics.steps)?;
        Ok((fan, samples))
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite fit parameter".into()));
        }
        let (fan, samples) = self.fan(theta)?;
        let emb = embeddability_residual(self.model, &fan);
        let emb_count: usize = emb.points.iter().map(|p| p.values.len()).sum();
        let emb_weight = if emb_count == 0 { 0.0 } else { 1.0 / (emb_count as f64).sqrt() };
        let mut rows: Vec<f64> = emb.points.iter().flat_map(|p| p.values.iter().map(|v| v * emb_weight)).collect();

        let fid_rms = self.constants.map(|_| {
            let diffs: Vec<f64> = samples
                .iter()
                .zip(&self.target_samples)
                .flat_map(|(c, t)| {
                    c.y0.iter()
                        .zip(&t.y0)
                        .chain(c.ydot0.iter().zip(&t.ydot0))
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>()
                })
                .collect();
            let w = 1.0 / (diffs.len() as f64).sqrt();
            rows.extend(diffs.iter().map(|d| d * w));
            (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt()
        });
        Ok(Evaluation {
            rows,
            emb_rms: emb.rms,
            fid_rms,
        })
    }
}

/// Fits the free ansatz parameters (and open boundary constants) so the
/// embeddability residual vanishes.
///
/// Uses Gauss–Newton with a forward-difference Jacobian (relative step
/// `1e-6`), minimum-norm steps from an SVD and step halving whenever the
/// cost does not decrease. With open constants the residual also carries the
/// mismatch between candidate and target boundary data; both blocks are
/// normalised to their RMS. The data are compatible when both RMS values
/// are within `tol` times the target data magnitude.
///
/// Exhausting `max_iter` is not an error: the best iterate is returned with
/// `converged = false`, `compatible = false` and a diagnostic.
pub fn fit_embeddability(
    model: &HamiltonianModel,
    target: &BoundarySpec,
    family: &AnsatzFamily,
    constants: Option<&OpenConstants>,
    numerics: &FanNumerics,
    tol: f64,
    max_iter: usize,
) -> Result<EmbeddabilityFit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("fit tolerance must be positive, got {tol}")));
    }
    let target_samples = sample_boundary(target, &numerics.zeta_grid)?;
    let scale = data_magnitude(&target_samples);
    let problem = Problem {
        model,
        target,
        target_samples,
        family,
        constants,
        numerics,
        n_ansatz: family.free.len(),
    };
    let mut theta = family.free_values();
    let mut names = family.free_names();
    if let Some(c) = constants {
        if c.names.len() != c.initial.len() {
            return Err(Error::InvalidInput("open constants need one initial value per name".into()));
        }
        theta.extend(&c.initial);
        names.extend(c.names.iter().cloned());
    }

    let mut current = problem.evaluate(&theta)?;
    let mut iterations = 0;
    let mut converged = theta.is_empty();
    while !converged && iterations < max_iter {
        iterations += 1;
        let cost = current.cost();
        if cost == 0.0 {
            converged = true;
            break;
        }
        let columns: Vec<Option<Vec<f64>>> = (0..theta.len())
            .into_par_iter()
            .map(|k| {
                let h = 1e-6 * theta[k].abs().max(1.0);
                let mut probe = theta.clone();
                probe[k] += h;
                problem
                    .evaluate(&probe)
                    .ok()
                    .map(|e| e.rows.iter().zip(&current.rows).map(|(a, b)| (a - b) / h).collect())
            })
            .collect();
        let m = current.rows.len();
        let mut jac = DMatrix::zeros(m, theta.len());
        for (k, col) in columns.iter().enumerate() {
            if let Some(col) = col {
                for (i, v) in col.iter().enumerate() {
                    jac[(i, k)] = *v;
                }
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let rhs = DVector::from_iterator(m, current.rows.iter().map(|v| -v));
        let step = match svd.solve(&rhs, smax * 1e-10) {
            Ok(s) => s,
            Err(_) => break,
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Ok(eval) = problem.evaluate(&trial) {
                if eval.cost() < cost {
                    accepted = Some((trial, eval));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, eval)) => {
                let step_norm: f64 = trial.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let theta_norm: f64 = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let decrease = cost - eval.cost();
                theta = trial;
                current = eval;
                if decrease <= 1e-14 * cost || step_norm <= 1e-12 * (1.0 + theta_norm) {
                    converged = true;
                }
            }
            // No descent along the Gauss–Newton direction: stationary point.
            None => converged = true,
        }
    }

    let threshold = tol * scale;
    let within = current.emb_rms <= threshold && current.fid_rms.is_none_or(|f| f <= threshold);
    let diagnostic = if !converged {
        Some(format!(
            "Gauss-Newton did not converge within {max_iter} iterations (residual rms {:.3e})",
            current.emb_rms
        ))
    } else if !within {
        Some(format!(
            "boundary data incompatible with the ansatz family: residual rms {:.3e}{} exceeds {:.3e}",
            current.emb_rms,
            current
                .fid_rms
                .map(|f| format!(", data mismatch rms {f:.3e}"))
                .unwrap_or_default(),
            threshold
        ))
    } else {
        None
    };
    Ok(EmbeddabilityFit {
        ansatz: family.instantiate(&theta[..problem.n_ansatz])?,
        param_names: names,
        constants: theta[problem.n_ansatz..].to_vec(),
        fitted_params: theta,
        residual_norm: current.emb_rms,
        fidelity_norm: current.fid_rms,
        tolerance: threshold,
        compatible: converged && within,
        converged,
        iterations,
        diagnostic,
    })
}

/// Boundary specification to trace with after a fit: the candidate built from
/// the fitted constants when any are open, the target otherwise.
pub fn fitted_boundary(
    fit: &EmbeddabilityFit,
    target: &BoundarySpec,
    constants: Option<&OpenConstants>,
) -> Result<BoundarySpec> {
    match constants {
        Some(c) => (c.build)(&fit.constants),
        None => Ok(target.clone()),
    }
}
