//! Reconstruction of `y(x)`, `p(x)` and `S^μ(x)` from a characteristic fan.
//!
//! The chart is `x(ξ, ζ) = A(ζ) ξ + x₀(ζ)`, with `A` and `x₀` interpolated
//! across trajectories by not-a-knot cubic splines. Values along a
//! trajectory use cubic Hermite interpolation with the stored rates.
//! Reconstruction refuses to continue through caustics.

use std::collections::HashMap;
use std::io::Write;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::momentum;
use crate::characteristics::{char_rhs, fmt_f64, CharacteristicFan, StateRate};
use crate::embeddability::EmbeddabilityFit;
use crate::interp::{hermite, SplineAxis, TensorSpline, TensorWeights};
use crate::model::HamiltonianModel;
use crate::{Error, Result};

/// Residual tolerance of chart inversion, relative to `max(1, |x|)`.
pub const CHART_TOL: f64 = 1e-12;
pub const CHART_MAX_ITER: usize = 50;
/// Chart Jacobian determinants below this are treated as caustics.
pub const CAUSTIC_DET: f64 = 1e-10;

const CACHE_LIMIT: usize = 1 << 20;
const FACE_SAMPLES: usize = 9;

/// Chart coordinates of a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub xi: f64,
    pub zeta: Vec<f64>,
}

/// Interpolated state at a chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub y: Vec<f64>,
    pub covel: Vec<f64>,
    pub u: f64,
    pub transport: Vec<f64>,
}

impl FieldValue {
    /// `p^μ_i = u_i X^μ`, flattened as `p[mu * r + i]`.
    pub fn momentum(&self) -> Vec<f64> {
        momentum(&self.covel, &self.transport)
    }

    /// `S^μ = u X^μ`.
    pub fn s(&self) -> Vec<f64> {
        self.transport.iter().map(|t| self.u * t).collect()
    }
}

/// A reconstructed critical field over the footprint of a fan.
pub struct FieldSolution {
    pub model: HamiltonianModel,
    pub fan: CharacteristicFan,
    pub fit: Option<EmbeddabilityFit>,
    /// Axis-aligned box inside the fan footprint, kept one `ζ` cell and one
    /// `ξ` step away from its edges.
    pub domain_box: Vec<[f64; 2]>,
    spline: TensorSpline,
    rates: Vec<Vec<StateRate>>,
    seeds: Vec<(usize, usize)>,
    cache: RwLock<HashMap<Vec<u64>, ChartPoint>>,
}

impl std::fmt::Debug for FieldSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSolution")
            .field("n", &self.fan.n)
            .field("r", &self.fan.r)
            .field("domain_box", &self.domain_box)
            .finish_non_exhaustive()
    }
}

impl FieldSolution {
    pub fn new(model: HamiltonianModel, fan: CharacteristicFan, fit: Option<EmbeddabilityFit>) -> Result<Self> {
        if model.n != fan.n || model.r != fan.r {
            return Err(Error::InvalidInput("model and fan dimensions disagree".into()));
        }
        if fan.steps == 0 || fan.trajectories.iter().any(|t| t.len() != fan.steps + 1) {
            return Err(Error::InvalidInput("fan trajectories must hold steps + 1 states".into()));
        }
        let grid = &fan.grid;
        let spline = TensorSpline::new(
            (0..grid.axes())
                .map(|a| SplineAxis::new(grid.dims[a], grid.lo[a], grid.spacing(a)))
                .collect(),
        );
        let rates = fan
            .trajectories
            .par_iter()
            .map(|traj| traj.iter().map(|s| char_rhs(&model, s)).collect())
            .collect();
        let stride = (fan.steps / 64).max(1);
        let mut ks: Vec<usize> = (0..=fan.steps).step_by(stride).collect();
        if *ks.last().unwrap() != fan.steps {
            ks.push(fan.steps);
        }
        let seeds = (0..fan.trajectories.len())
            .flat_map(|j| ks.iter().map(move |&k| (j, k)))
            .collect();
        let mut sol = Self {
            model,
            fan,
            fit,
            domain_box: Vec::new(),
            spline,
            rates,
            seeds,
            cache: RwLock::new(HashMap::new()),
        };
        sol.domain_box = sol.compute_domain_box()?;
        Ok(sol)
    }

    fn weights(&self, zeta: &[f64]) -> TensorWeights {
        self.spline.weights(zeta)
    }

    fn blend(&self, w: &[f64], f: impl Fn(usize) -> f64) -> f64 {
        w.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(j, w)| w * f(j)).sum()
    }

    /// Interpolated transport field `A(ζ)`.
    pub fn transport_at(&self, zeta: &[f64]) -> Vec<f64> {
        let w = self.weights(zeta);
        (0..self.fan.n)
            .map(|mu| self.blend(&w.value, |j| self.fan.trajectories[j][0].transport[mu]))
            .collect()
    }

    /// Chart point and `∂x/∂(ξ, ζ)` (columns ordered `ξ, ζ¹, …`).
    fn chart_eval(&self, xi: f64, zeta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let n = self.fan.n;
        let w = self.weights(zeta);
        let line = |j: usize, mu: usize| {
            let s0 = &self.fan.trajectories[j][0];
            (s0.transport[mu], s0.x[mu])
        };
        let mut x = vec![0.0; n];
        let mut jac = DMatrix::zeros(n, n);
        for mu in 0..n {
            let a = self.blend(&w.value, |j| line(j, mu).0);
            let x0 = self.blend(&w.value, |j| line(j, mu).1);
            x[mu] = a * xi + x0;
            jac[(mu, 0)] = a;
            for (b, g) in w.grad.iter().enumerate() {
                jac[(mu, b + 1)] = self.blend(g, |j| {
                    let (a, x0) = line(j, mu);
                    a * xi + x0
                });
            }
        }
        (x, jac)
    }

    /// Forward chart map.
    pub fn chart_point(&self, xi: f64, zeta: &[f64]) -> Vec<f64> {
        self.chart_eval(xi, zeta).0
    }

    /// Determinant of the chart Jacobian at `(ξ, ζ)`.
    pub fn chart_det(&self, xi: f64, zeta: &[f64]) -> f64 {
        self.chart_eval(xi, zeta).1.determinant()
    }

    fn seed(&self, x: &[f64]) -> ChartPoint {
        let (j, k) = self
            .seeds
            .iter()
            .copied()
            .min_by(|&(ja, ka), &(jb, kb)| {
                let d = |j: usize, k: usize| -> f64 {
                    self.fan.trajectories[j][k].x.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum()
                };
                d(ja, ka).total_cmp(&d(jb, kb))
            })
            .expect("fan has at least one node");
        ChartPoint {
            xi: self.fan.xi_at(k),
            zeta: self.fan.zeta(j),
        }
    }

    /// Newton inversion without the cache and without the domain check.
    fn newton(&self, x: &[f64], tol: f64, max_iter: usize) -> Result<ChartPoint> {
        let n = self.fan.n;
        let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut cp = self.seed(x);
        let residual = |cp: &ChartPoint| -> (Vec<f64>, DMatrix<f64>, f64) {
            let (xc, jac) = self.chart_eval(cp.xi, &cp.zeta);
            let res: Vec<f64> = xc.iter().zip(x).map(|(a, b)| a - b).collect();
            let norm = res.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            (res, jac, norm)
        };
        let (mut res, mut jac, mut norm) = residual(&cp);
        for _ in 0..max_iter {
            let det = jac.determinant();
            if !(det.abs() >= CAUSTIC_DET) {
                return Err(Error::CausticDetected {
                    xi: cp.xi,
                    zeta: cp.zeta,
                    det,
                });
            }
            if norm <= tol * scale {
                return Ok(cp);
            }
            let delta = jac
                .lu()
                .solve(&DVector::from_vec(res.clone()))
                .ok_or(Error::CausticDetected {
                    xi: cp.xi,
                    zeta: cp.zeta.clone(),
                    det,
                })?;
            let mut t = 1.0;
            let mut next = None;
            for _ in 0..30 {
                let trial = ChartPoint {
                    xi: cp.xi - t * delta[0],
                    zeta: (0..n - 1).map(|b| cp.zeta[b] - t * delta[b + 1]).collect(),
                };
                let eval = residual(&trial);
                if eval.2 < norm || eval.2 <= tol * scale {
                    next = Some((trial, eval));
                    break;
                }
                t *= 0.5;
            }
            match next {
                Some((trial, eval)) => {
                    cp = trial;
                    (res, jac, norm) = eval;
                }
                None => break,
            }
        }
        Err(Error::NoConvergence {
            context: "chart inversion",
            iterations: max_iter,
            residual: norm,
        })
    }

    fn in_parameter_range(&self, cp: &ChartPoint, xi_pad: f64, zeta_cells: f64) -> bool {
        let xi_max = self.fan.xi_max;
        cp.xi >= xi_pad && cp.xi <= xi_max - xi_pad && self.fan.grid.contains(&cp.zeta, -zeta_cells)
    }

    /// Solves `x(ξ, ζ) = x_query` by Newton iteration from the nearest stored
    /// fan node.
    pub fn invert_chart_with(&self, x: &[f64], tol: f64, max_iter: usize) -> Result<ChartPoint> {
        if x.len() != self.fan.n {
            return Err(Error::InvalidInput("query point has the wrong dimension".into()));
        }
        let cp = self.newton(x, tol, max_iter)?;
        let slack = 1e-9 * self.fan.xi_max.max(1.0);
        if !self.in_parameter_range(&cp, -slack, -1e-9) {
            return Err(Error::OutOfDomain { x: x.to_vec() });
        }
        Ok(cp)
    }

    /// Cached [`invert_chart_with`](Self::invert_chart_with) at [`CHART_TOL`].
    pub fn invert_chart(&self, x: &[f64]) -> Result<ChartPoint> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(cp) = self.cache.read().expect("chart cache poisoned").get(&key) {
            return Ok(cp.clone());
        }
        let cp = self.invert_chart_with(x, CHART_TOL, CHART_MAX_ITER)?;
        let mut cache = self.cache.write().expect("chart cache poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, cp.clone());
        Ok(cp)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("chart cache poisoned").len()
    }

    /// Interpolated state at chart coordinates.
    pub fn value_at_chart(&self, cp: &ChartPoint) -> FieldValue {
        let (n, r) = (self.fan.n, self.fan.r);
        let steps = self.fan.steps;
        let dxi = self.fan.xi_step();
        let t = cp.xi / dxi;
        let cell = (t.floor().max(0.0) as usize).min(steps - 1);
        let s = t - cell as f64;
        let w = self.weights(&cp.zeta);
        let along = |val: &dyn Fn(usize) -> (f64, f64)| {
            let (f0, d0) = val(cell);
            let (f1, d1) = val(cell + 1);
            hermite(s, f0, dxi * d0, f1, dxi * d1)
        };
        let traj = |j: usize| (&self.fan.trajectories[j], &self.rates[j]);
        let y = (0..r)
            .map(|i| {
                self.blend(&w.value, |j| {
                    let (st, rt) = traj(j);
                    along(&|k| (st[k].y[i], rt[k].dy[i]))
                })
            })
            .collect();
        let covel = (0..r)
            .map(|i| {
                self.blend(&w.value, |j| {
                    let (st, rt) = traj(j);
                    along(&|k| (st[k].covel[i], rt[k].dcovel[i]))
                })
            })
            .collect();
        let u = self.blend(&w.value, |j| {
            let (st, rt) = traj(j);
            along(&|k| (st[k].u, rt[k].du))
        });
        let transport = (0..n)
            .map(|mu| self.blend(&w.value, |j| self.fan.trajectories[j][0].transport[mu]))
            .collect();
        FieldValue { y, covel, u, transport }
    }

    /// Full interpolated state at a base point.
    pub fn value_at(&self, x: &[f64]) -> Result<FieldValue> {
        Ok(self.value_at_chart(&self.invert_chart(x)?))
    }

    /// `(y^i(x), p^μ_i(x))` with `p` flattened as `p[mu * r + i]`.
    pub fn field_at(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let v = self.value_at(x)?;
        let p = v.momentum();
        Ok((v.y, p))
    }

    /// `S^μ(x) = u(ξ, ζ) X^μ(ζ)`.
    pub fn s_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_at(x)?.s())
    }

    /// Whether `x` lies in the fan footprint shrunk by one `ζ` cell and one
    /// `ξ` step.
    fn in_shrunk_footprint(&self, x: &[f64]) -> bool {
        self.newton(x, CHART_TOL, CHART_MAX_ITER)
            .map(|cp| self.in_parameter_range(&cp, self.fan.xi_step(), 1.0))
            .unwrap_or(false)
    }

    fn box_inside(&self, lo: &[f64], hi: &[f64]) -> bool {
        face_points(lo, hi, FACE_SAMPLES)
            .par_iter()
            .all(|x| self.in_shrunk_footprint(x))
    }

    /// Grows an axis-aligned box from the footprint centre: first uniformly,
    /// then face by face, each by bisection on face samples.
    fn compute_domain_box(&self) -> Result<Vec<[f64; 2]>> {
        let n = self.fan.n;
        let grid = &self.fan.grid;
        let zeta_mid: Vec<f64> = (0..grid.axes()).map(|a| 0.5 * (grid.lo[a] + grid.hi[a])).collect();
        let centre = self.chart_point(0.5 * self.fan.xi_max, &zeta_mid);
        if !self.in_shrunk_footprint(&centre) {
            return Err(Error::InvalidInput(
                "fan footprint is too thin to hold an interior box".into(),
            ));
        }
        let (mut bb_lo, mut bb_hi) = (vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]);
        for s in self.fan.trajectories.iter().flatten() {
            for mu in 0..n {
                bb_lo[mu] = bb_lo[mu].min(s.x[mu]);
                bb_hi[mu] = bb_hi[mu].max(s.x[mu]);
            }
        }
        let reach = (0..n).map(|mu| bb_hi[mu] - bb_lo[mu]).fold(0.0_f64, f64::max);
        let bisect = |ok: &dyn Fn(f64) -> bool, iters: usize| -> f64 {
            let (mut good, mut bad) = (0.0, reach);
            if ok(bad) {
                return bad;
            }
            for _ in 0..iters {
                let mid = 0.5 * (good + bad);
                if ok(mid) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            good
        };
        let half = bisect(
            &|t| {
                let lo: Vec<f64> = centre.iter().map(|c| c - t).collect();
                let hi: Vec<f64> = centre.iter().map(|c| c + t).collect();
                self.box_inside(&lo, &hi)
            },
            40,
        );
        let mut lo: Vec<f64> = centre.iter().map(|c| c - half).collect();
        let mut hi: Vec<f64> = centre.iter().map(|c| c + half).collect();
        for axis in 0..n {
            for upper in [false, true] {
                let grow = bisect(
                    &|e| {
                        let (mut l, mut h) = (lo.clone(), hi.clone());
                        if upper {
                            h[axis] += e;
                        } else {
                            l[axis] -= e;
                        }
                        self.box_inside(&l, &h)
                    },
                    30,
                );
                if upper {
                    hi[axis] += grow;
                } else {
                    lo[axis] -= grow;
                }
            }
        }
        if (0..n).any(|mu| !(hi[mu] > lo[mu])) {
            return Err(Error::InvalidInput("fan footprint holds no interior box".into()));
        }
        Ok(lo.into_iter().zip(hi).map(|(l, h)| [l, h]).collect())
    }
}

/// Points on the faces of a box, `m` per axis along each face.
fn face_points(lo: &[f64], hi: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    let mut out = Vec::new();
    for axis in 0..n {
        for side in [lo[axis], hi[axis]] {
            let mut flo = lo.to_vec();
            let mut fhi = hi.to_vec();
            flo[axis] = side;
            fhi[axis] = side;
            let res: Vec<usize> = (0..n).map(|a| if a == axis { 1 } else { m }).collect();
            out.extend(grid_points(&flo, &fhi, &res));
        }
    }
    out
}

/// Regular grid including the box corners, row-major with the last axis
/// fastest. Axes with one point use the lower bound.
pub fn grid_points(lo: &[f64], hi: &[f64], resolution: &[usize]) -> Vec<Vec<f64>> {
    let total: usize = resolution.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; lo.len()];
            for a in (0..lo.len()).rev() {
                let i = flat % resolution[a];
                flat /= resolution[a];
                x[a] = if resolution[a] == 1 {
                    lo[a]
                } else {
                    lo[a] + (hi[a] - lo[a]) * (i as f64 / (resolution[a] - 1) as f64)
                };
            }
            x
        })
        .collect()
}

/// Column header of the solution grid CSV.
pub fn grid_csv_header(n: usize, r: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|m| format!("x{m}")).collect();
    h.extend((1..=r).map(|i| format!("y{i}")));
    for mu in 1..=n {
        h.extend((1..=r).map(|i| format!("p{mu}_{i}")));
    }
    h.extend((1..=n).map(|m| format!("S{m}")));
    h.push("chart_ok".into());
    h
}

/// Metadata accompanying an exported grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub domain_box: Vec<[f64; 2]>,
    pub export_box: Vec<[f64; 2]>,
    pub resolution: Vec<usize>,
    pub columns: Vec<String>,
    pub rows: usize,
    pub rows_ok: usize,
    pub quadrature_constant: String,
    pub momentum_quadrature: String,
    pub interpolation: String,
}

/// Writes the solution on a regular grid over `export_box` (the domain box
/// when absent). Points outside the domain box or where inversion fails get
/// `chart_ok = 0` and `NaN` values.
pub fn export_grid<W: Write>(
    solution: &FieldSolution,
    resolution: &[usize],
    export_box: Option<&[[f64; 2]]>,
    out: W,
) -> Result<GridMeta> {
    let n = solution.fan.n;
    let r = solution.fan.r;
    if resolution.len() != n || resolution.iter().any(|&k| k < 2) {
        return Err(Error::InvalidInput(format!(
            "grid resolution needs {n} entries of at least 2, got {resolution:?}"
        )));
    }
    let bbox: Vec<[f64; 2]> = export_box.map(<[_]>::to_vec).unwrap_or_else(|| solution.domain_box.clone());
    if bbox.len() != n {
        return Err(Error::InvalidInput("export box has the wrong dimension".into()));
    }
    let lo: Vec<f64> = bbox.iter().map(|b| b[0]).collect();
    let hi: Vec<f64> = bbox.iter().map(|b| b[1]).collect();
    let points = grid_points(&lo, &hi, resolution);
    let inside_box = |x: &[f64]| {
        x.iter().zip(&solution.domain_box).all(|(v, [l, h])| {
            let pad = 1e-12 * (h - l).abs().max(1.0);
            *v >= l - pad && *v <= h + pad
        })
    };
    let rows: Vec<Option<FieldValue>> = points
        .par_iter()
        .map(|x| if inside_box(x) { solution.value_at(x).ok() } else { None })
        .collect();
    let header = grid_csv_header(n, r);
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(&header)?;
    let mut rows_ok = 0;
    for (x, v) in points.iter().zip(&rows) {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        match v {
            Some(v) => {
                rows_ok += 1;
                rec.extend(v.y.iter().map(|a| fmt_f64(*a)));
                rec.extend(v.momentum().iter().map(|a| fmt_f64(*a)));
                rec.extend(v.s().iter().map(|a| fmt_f64(*a)));
                rec.push("1".into());
            }
            None => {
                rec.extend(std::iter::repeat_n(fmt_f64(f64::NAN), r + n * r + n));
                rec.push("0".into());
            }
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(GridMeta {
        domain_box: solution.domain_box.clone(),
        export_box: bbox,
        resolution: resolution.to_vec(),
        columns: header,
        rows: points.len(),
        rows_ok,
        quadrature_constant: "u = 0 on the boundary".into(),
        momentum_quadrature: "u_mu = -H X^mu / |X|^2 on the boundary".into(),
        interpolation: "cubic Hermite along xi, not-a-knot cubic spline across zeta".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{sample_boundary, ZetaGrid};
    use crate::characteristics::{trace_fan, trace_fan_from_initial};
    use crate::embeddability::{AlphaProfile, XAnsatz};
    use crate::model::{make_free_scalar, FreeScalarParams};
    use crate::presets::{plane_boundary, DataFamily, PlaneGeometry};
    use std::f64::consts::{PI, SQRT_2};

    fn example(a0: f64, b0: f64, zeta_n: usize, steps: usize) -> FieldSolution {
        let model = make_free_scalar(2, FreeScalarParams::new(1.0).unwrap()).unwrap();
        let geom = PlaneGeometry::new(2, 0, vec![[0.0, 1.0]]).unwrap();
        let spec = plane_boundary(&geom, &DataFamily::Sinusoid { a0, b0, c: 0.0, mu: 1.0 }).unwrap();
        let samples = sample_boundary(&spec, &[zeta_n]).unwrap();
        let grid = ZetaGrid::new(&[zeta_n], &spec.zeta_box).unwrap();
        let ansatz = XAnsatz::ScaledDirection {
            direction: vec![0.0],
            alpha: AlphaProfile::Constant { value: 1.0 },
        };
        let fan = trace_fan(&model, &samples, grid, &ansatz, PI / SQRT_2, steps).unwrap();
        FieldSolution::new(model, fan, None).unwrap()
    }

    #[test]
    fn inverts_the_linear_chart() {
        let sol = example(1.0, 0.0, 11, 200);
        let cp = sol.invert_chart(&[1.0, 1.0]).unwrap();
        assert!((cp.xi - SQRT_2).abs() < 1e-12);
        assert!(cp.zeta[0].abs() < 1e-12);
        let cp = sol.invert_chart(&[0.0, 0.4]).unwrap();
        assert!(cp.xi.abs() < 1e-12 && (cp.zeta[0] - 0.4).abs() < 1e-12);
        assert_eq!(sol.invert_chart(&[1.0, 1.0]).unwrap(), sol.invert_chart(&[1.0, 1.0]).unwrap());
        assert!(sol.cache_len() >= 2);
    }

    #[test]
    fn field_matches_the_diagonal_wave() {
        let sol = example(1.0, 0.0, 11, 400);
        let (y, p) = sol.field_at(&[1.0, 1.0]).unwrap();
        assert!((y[0] - SQRT_2.cos()).abs() < 1e-6, "{}", y[0]);
        let (y, _) = sol.field_at(&[0.0, 0.3]).unwrap();
        assert!((y[0] - (0.3 / SQRT_2).cos()).abs() < 1e-6);
        // ∂y/∂x¹ = p¹ for the free scalar with unit metric.
        let exact = -((1.0 + 1.0) / SQRT_2).sin() / SQRT_2;
        assert!((p[0] - exact).abs() < 1e-5);
        assert!((sol.s_at(&[0.0, 0.5]).unwrap()[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_data_give_zero_fields() {
        let sol = example(0.0, 0.0, 5, 50);
        let (y, p) = sol.field_at(&[0.7, 1.2]).unwrap();
        assert_eq!(y, vec![0.0]);
        assert!(p.iter().all(|v| *v == 0.0));
        assert!(sol.s_at(&[0.7, 1.2]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_points_outside_the_fan() {
        let sol = example(1.0, 0.0, 5, 50);
        assert!(matches!(sol.invert_chart(&[-0.5, 0.5]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(sol.invert_chart(&[0.5, 3.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn focusing_transport_is_a_caustic() {
        let model = make_free_scalar(2, FreeScalarParams::new(1.0).unwrap()).unwrap();
        let geom = PlaneGeometry::new(2, 0, vec![[-1.0, 1.0]]).unwrap();
        let spec = plane_boundary(&geom, &DataFamily::Polynomial { field: vec![], normal: vec![] }).unwrap();
        let samples = sample_boundary(&spec, &[11]).unwrap();
        let grid = ZetaGrid::new(&[11], &spec.zeta_box).unwrap();
        let transports: Vec<Vec<f64>> = samples.iter().map(|s| vec![1.0, -s.zeta[0]]).collect();
        let covels = vec![vec![0.0]; 11];
        let fan = trace_fan_from_initial(&model, grid, &samples, &transports, &covels, 0.8, 40).unwrap();
        let sol = FieldSolution::new(model, fan, None).unwrap();
        assert!(matches!(sol.invert_chart(&[1.0, 0.0]), Err(Error::CausticDetected { .. })));
        assert!(sol.domain_box.iter().all(|b| b[1] > b[0]));
        assert!(sol.domain_box[0][1] < 0.8);
    }

    #[test]
    fn domain_box_is_inside_the_parallelogram() {
        let sol = example(1.0, 0.0, 11, 200);
        let [[a, b], [c, d]] = [sol.domain_box[0], sol.domain_box[1]];
        // Footprint: 0 ≤ x¹ ≤ π/2, x¹ ≤ x² ≤ x¹ + 1.
        assert!(a >= 0.0 && b <= PI / 2.0);
        assert!(c >= b && d <= a + 1.0);
        assert!(b - a > 0.3 && d - c > 0.3, "{:?}", sol.domain_box);
    }

    #[test]
    fn export_grid_flags() {
        let sol = example(1.0, 0.0, 11, 100);
        let mut buf = Vec::new();
        let meta = export_grid(&sol, &[2, 2], None, &mut buf).unwrap();
        assert_eq!(meta.rows, 4);
        assert_eq!(meta.rows_ok, 4);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("x1,x2,y1,p1_1,p2_1,S1,S2,chart_ok"));

        let outside = [[5.0, 6.0], [5.0, 6.0]];
        let mut buf = Vec::new();
        let meta = export_grid(&sol, &[2, 3], Some(&outside), &mut buf).unwrap();
        assert_eq!((meta.rows, meta.rows_ok), (6, 0));
        assert!(String::from_utf8(buf).unwrap().lines().skip(1).all(|l| l.ends_with(",0")));
        assert!(export_grid(&sol, &[1, 2], None, Vec::new()).is_err());
    }

    #[test]
    fn grid_points_order() {
        let pts = grid_points(&[0.0, 0.0], &[1.0, 2.0], &[2, 3]);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![0.0, 1.0]);
        assert_eq!(pts[5], vec![1.0, 2.0]);
    }
}
