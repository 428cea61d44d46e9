//! Finite-difference residuals of the governing equations on a
//! reconstructed solution. Every check differences the reconstructed
//! outputs directly and never reuses the characteristic rates.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::fmt_f64;
use crate::model::{HamiltonianModel, LagrangianModel};
use crate::reconstruct::{grid_points, FieldSolution};
use crate::sinusoid::AmplitudeOracle;
use crate::{Error, Result};

/// Largest absolute value and RMS of a residual sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub max: f64,
    pub rms: f64,
}

impl Stats {
    /// Sequential reduction, independent of how the values were produced.
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { max: 0.0, rms: 0.0 };
        }
        let (max, sum2) = values
            .iter()
            .fold((0.0_f64, 0.0), |(m, s), v| (m.max(v.abs()), s + v * v));
        let rms = (sum2 / values.len() as f64).sqrt().min(max);
        Self { max, rms }
    }
}

/// Residual tolerances, before scaling by the data magnitude.
pub const TOL_HJ: f64 = 1e-3;
pub const TOL_HAMILTON: f64 = 1e-3;
pub const TOL_EULER_LAGRANGE: f64 = 5e-3;
pub const TOL_CLOSED_FORM: f64 = 1e-4;

pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("hj", TOL_HJ),
        ("hamilton_first", TOL_HAMILTON),
        ("hamilton_second", TOL_HAMILTON),
        ("euler_lagrange", TOL_EULER_LAGRANGE),
        ("closed_form", TOL_CLOSED_FORM),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// `1e-3` times the largest side of the box.
pub fn default_fd_step(bbox: &[[f64; 2]]) -> f64 {
    1e-3 * bbox.iter().map(|[l, h]| h - l).fold(0.0, f64::max)
}

/// Regular grid over `bbox` shrunk by `margin` on every side.
pub fn interior_grid(bbox: &[[f64; 2]], resolution: &[usize], margin: f64) -> Result<Vec<Vec<f64>>> {
    if resolution.len() != bbox.len() || resolution.contains(&0) {
        return Err(Error::InvalidInput(format!("bad verification resolution {resolution:?}")));
    }
    let lo: Vec<f64> = bbox.iter().map(|b| b[0] + margin).collect();
    let hi: Vec<f64> = bbox.iter().map(|b| b[1] - margin).collect();
    if lo.iter().zip(&hi).any(|(l, h)| !(h >= l)) {
        return Err(Error::InvalidInput("verification margin exceeds the domain box".into()));
    }
    Ok(grid_points(&lo, &hi, resolution))
}

fn shifted(x: &[f64], axis: usize, by: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += by;
    y
}

/// Central difference of `f` along every axis: `out[axis][component]`.
fn gradient(
    x: &[f64],
    h: f64,
    f: &(dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
) -> Result<Vec<Vec<f64>>> {
    (0..x.len())
        .map(|axis| {
            let fp = f(&shifted(x, axis, h))?;
            let fm = f(&shifted(x, axis, -h))?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect()
}

fn collect_values(
    points: &[Vec<f64>],
    per_point: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
) -> Result<Vec<Vec<f64>>> {
    points.par_iter().map(|x| per_point(x)).collect()
}

fn stats_of(values: &[Vec<f64>]) -> Stats {
    Stats::from_values(&values.concat())
}

/// Per-point residual of `∂S^α/∂x^α + H(x, y, p) = 0`.
///
/// `S` is known only along the solution graph, so the partial divergence is
/// the total divergence of `S(x)` minus `p^α_i ∂_α y^i`, with `p` standing in
/// for `∂S^α/∂y^i`.
pub fn hj_values(model: &HamiltonianModel, solution: &FieldSolution, points: &[Vec<f64>], h: f64) -> Result<Vec<f64>> {
    let (n, r) = (model.n, model.r);
    let values = collect_values(points, |x| {
        let (y, p) = solution.field_at(x)?;
        let ds = gradient(x, h, &|z| solution.s_at(z))?;
        let dy = gradient(x, h, &|z| solution.field_at(z).map(|v| v.0))?;
        let div: f64 = (0..n).map(|a| ds[a][a]).sum();
        let chain: f64 = (0..n)
            .map(|a| (0..r).map(|i| p[a * r + i] * dy[a][i]).sum::<f64>())
            .sum();
        Ok(vec![div - chain + model.h(x, &y, &p)])
    })?;
    Ok(values.concat())
}

pub fn hj_residual(model: &HamiltonianModel, solution: &FieldSolution, points: &[Vec<f64>], h: f64) -> Result<Stats> {
    Ok(Stats::from_values(&hj_values(model, solution, points, h)?))
}

/// Per-point residuals of `∂y^i/∂x^μ = ∂H/∂p^μ_i` (`n·r` entries) and
/// `∂p^μ_i/∂x^μ = −∂H/∂y^i` (`r` entries).
pub fn hamilton_values(
    model: &HamiltonianModel,
    solution: &FieldSolution,
    points: &[Vec<f64>],
    h: f64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let (n, r) = (model.n, model.r);
    points
        .par_iter()
        .map(|x| {
            let (y, p) = solution.field_at(x)?;
            let grads = gradient(x, h, &|z| {
                let (y, p) = solution.field_at(z)?;
                Ok([y, p].concat())
            })?;
            let dp = model.dh_dp(x, &y, &p);
            let dy = model.dh_dy(x, &y, &p);
            let first: Vec<f64> = (0..n)
                .flat_map(|mu| (0..r).map(move |i| (mu, i)))
                .map(|(mu, i)| grads[mu][i] - dp[mu * r + i])
                .collect();
            let second: Vec<f64> = (0..r)
                .map(|i| (0..n).map(|mu| grads[mu][r + mu * r + i]).sum::<f64>() + dy[i])
                .collect();
            Ok((first, second))
        })
        .collect()
}

pub fn hamilton_residual(
    model: &HamiltonianModel,
    solution: &FieldSolution,
    points: &[Vec<f64>],
    h: f64,
) -> Result<(Stats, Stats)> {
    let (first, second): (Vec<_>, Vec<_>) = hamilton_values(model, solution, points, h)?.into_iter().unzip();
    Ok((stats_of(&first), stats_of(&second)))
}

/// Per-point residual of `∂_μ(∂L/∂v^i_μ) − ∂L/∂y^i = 0` with `v = ∂y/∂x` and
/// both derivatives taken by nested central differences of `y(x)`.
pub fn euler_lagrange_values(
    lmodel: &LagrangianModel,
    solution: &FieldSolution,
    points: &[Vec<f64>],
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    let (n, r) = (lmodel.n, lmodel.r);
    let velocity = |z: &[f64]| -> Result<Vec<f64>> {
        let g = gradient(z, h, &|w| solution.field_at(w).map(|v| v.0))?;
        Ok((0..n).flat_map(|mu| g[mu].clone()).collect())
    };
    collect_values(points, |x| {
        let flux = gradient(x, h, &|z| {
            let (y, _) = solution.field_at(z)?;
            Ok((lmodel.dl_dv)(z, &y, &velocity(z)?))
        })?;
        let (y, _) = solution.field_at(x)?;
        let dl_dy = (lmodel.dl_dy)(x, &y, &velocity(x)?);
        Ok((0..r)
            .map(|i| (0..n).map(|mu| flux[mu][mu * r + i]).sum::<f64>() - dl_dy[i])
            .collect())
    })
}

pub fn euler_lagrange_residual(
    lmodel: &LagrangianModel,
    solution: &FieldSolution,
    points: &[Vec<f64>],
    h: f64,
) -> Result<Stats> {
    Ok(stats_of(&euler_lagrange_values(lmodel, solution, points, h)?))
}

/// Reference for the two-dimensional free-scalar sinusoid with boundary
/// `x¹ = 0`, `x² = z` and a constant-magnitude scaled-direction field.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    pub oracle: AmplitudeOracle,
    pub alpha: f64,
}

impl ClosedForm {
    /// Reference field at a base point, inverting the straight-line chart
    /// `x¹ = A¹ ξ`, `x² = e^c A¹ ξ + z` directly.
    pub fn field(&self, x: &[f64]) -> f64 {
        let c = self.oracle.coupling();
        let a1 = self.alpha / (1.0 + (2.0 * c).exp()).sqrt();
        let xi = x[0] / a1;
        let z = x[1] - c.exp() * x[0];
        self.oracle.solution(xi, z, self.alpha)
    }
}

/// Per-point `y − y_ref`.
pub fn closed_form_values(solution: &FieldSolution, reference: &ClosedForm, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if solution.fan.n != 2 || solution.fan.r != 1 {
        return Err(Error::InvalidInput("closed-form comparison needs n = 2, r = 1".into()));
    }
    Ok(collect_values(points, |x| Ok(vec![solution.field_at(x)?.0[0] - reference.field(x)]))?.concat())
}

/// Largest `|y − y_ref|` over the points.
pub fn closed_form_compare(solution: &FieldSolution, reference: &ClosedForm, points: &[Vec<f64>]) -> Result<f64> {
    Ok(Stats::from_values(&closed_form_values(solution, reference, points)?).max)
}

#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub resolution: Vec<usize>,
    pub fd_step: f64,
    pub margin: f64,
    pub domain_box: Vec<[f64; 2]>,
    pub points: usize,
}

/// Collected residual statistics with per-check verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub hj_residual: Stats,
    pub hamilton_residuals: [Stats; 2],
    pub euler_lagrange_residual: Option<Stats>,
    pub closed_form_deviation: Option<f64>,
    pub grid_meta: GridMeta,
    /// Base tolerances before scaling.
    pub verdict_tolerances: BTreeMap<String, f64>,
    /// Multiplier applied to every tolerance (the data magnitude, 1 when zero).
    pub tolerance_scale: f64,
    pub verdicts: BTreeMap<String, bool>,
    pub passed: bool,
}

impl ResidualReport {
    /// Names of the checks that failed their tolerance.
    pub fn failing(&self) -> Vec<String> {
        self.verdicts.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k.clone()).collect()
    }

    fn measured(&self) -> Vec<(&'static str, f64)> {
        let mut m = vec![
            ("hj", self.hj_residual.max),
            ("hamilton_first", self.hamilton_residuals[0].max),
            ("hamilton_second", self.hamilton_residuals[1].max),
        ];
        if let Some(el) = self.euler_lagrange_residual {
            m.push(("euler_lagrange", el.max));
        }
        if let Some(cf) = self.closed_form_deviation {
            m.push(("closed_form", cf));
        }
        m
    }

    /// Recomputes verdicts for new base tolerances.
    pub fn with_tolerances(mut self, tolerances: BTreeMap<String, f64>) -> Self {
        let verdicts: BTreeMap<String, bool> = self
            .measured()
            .into_iter()
            .map(|(name, value)| {
                let tol = tolerances.get(name).copied().unwrap_or(f64::INFINITY);
                (name.to_string(), value <= tol * self.tolerance_scale)
            })
            .collect();
        self.passed = verdicts.values().all(|v| *v);
        self.verdicts = verdicts;
        self.verdict_tolerances = tolerances;
        self
    }
}

/// Settings of [`run_suite`].
#[derive(Debug, Clone)]
pub struct SuiteSettings {
    pub resolution: Vec<usize>,
    /// Defaults to [`default_fd_step`] of the domain box.
    pub fd_step: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
    /// Tolerances are multiplied by this (use the data magnitude).
    pub tolerance_scale: f64,
}

/// Largest absolute residual of each check at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResidual {
    pub x: Vec<f64>,
    pub hj: f64,
    pub hamilton_first: f64,
    pub hamilton_second: f64,
    pub euler_lagrange: Option<f64>,
    pub closed_form: Option<f64>,
}

/// Report together with the per-point residuals it was reduced from.
#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub report: ResidualReport,
    pub points: Vec<PointResidual>,
}

fn max_abs(v: &[f64]) -> f64 {
    Stats::from_values(v).max
}

/// Runs every applicable check on one interior grid. The grid keeps a margin
/// of two finite-difference steps so nested stencils stay in the domain box.
pub fn run_suite(
    model: &HamiltonianModel,
    lagrangian: Option<&LagrangianModel>,
    solution: &FieldSolution,
    closed_form: Option<&ClosedForm>,
    settings: &SuiteSettings,
) -> Result<ResidualReport> {
    Ok(run_suite_detailed(model, lagrangian, solution, closed_form, settings)?.report)
}

/// [`run_suite`] keeping the per-point residuals.
pub fn run_suite_detailed(
    model: &HamiltonianModel,
    lagrangian: Option<&LagrangianModel>,
    solution: &FieldSolution,
    closed_form: Option<&ClosedForm>,
    settings: &SuiteSettings,
) -> Result<SuiteOutput> {
    let h = settings.fd_step.unwrap_or_else(|| default_fd_step(&solution.domain_box));
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
    }
    let margin = 2.0 * h;
    let points = interior_grid(&solution.domain_box, &settings.resolution, margin)?;
    let hj = hj_values(model, solution, &points, h)?;
    let hamilton = hamilton_values(model, solution, &points, h)?;
    let el = lagrangian
        .map(|l| euler_lagrange_values(l, solution, &points, h))
        .transpose()?;
    let cf = closed_form.map(|c| closed_form_values(solution, c, &points)).transpose()?;

    let (first, second): (Vec<_>, Vec<_>) = hamilton.iter().cloned().unzip();
    let scale = if settings.tolerance_scale > 0.0 { settings.tolerance_scale } else { 1.0 };
    let report = ResidualReport {
        hj_residual: Stats::from_values(&hj),
        hamilton_residuals: [stats_of(&first), stats_of(&second)],
        euler_lagrange_residual: el.as_deref().map(stats_of),
        closed_form_deviation: cf.as_deref().map(max_abs),
        grid_meta: GridMeta {
            resolution: settings.resolution.clone(),
            fd_step: h,
            margin,
            domain_box: solution.domain_box.clone(),
            points: points.len(),
        },
        verdict_tolerances: BTreeMap::new(),
        tolerance_scale: scale,
        verdicts: BTreeMap::new(),
        passed: false,
    }
    .with_tolerances(settings.tolerances.clone());

    let table = points
        .into_iter()
        .enumerate()
        .map(|(k, x)| PointResidual {
            x,
            hj: hj[k].abs(),
            hamilton_first: max_abs(&hamilton[k].0),
            hamilton_second: max_abs(&hamilton[k].1),
            euler_lagrange: el.as_ref().map(|e| max_abs(&e[k])),
            closed_form: cf.as_ref().map(|c| c[k].abs()),
        })
        .collect();
    Ok(SuiteOutput { report, points: table })
}

/// Writes per-point residuals as CSV: `x1..xn`, one column per check
/// present in the first row.
pub fn write_residual_csv<W: Write>(points: &[PointResidual], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let Some(first) = points.first() else {
        wtr.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = (1..=first.x.len()).map(|k| format!("x{k}")).collect();
    header.extend(["hj", "hamilton_first", "hamilton_second"].map(String::from));
    if first.euler_lagrange.is_some() {
        header.push("euler_lagrange".into());
    }
    if first.closed_form.is_some() {
        header.push("closed_form".into());
    }
    wtr.write_record(&header)?;
    for p in points {
        let mut rec: Vec<String> = p.x.iter().map(|v| fmt_f64(*v)).collect();
        rec.extend([p.hj, p.hamilton_first, p.hamilton_second].map(fmt_f64));
        rec.extend(p.euler_lagrange.map(fmt_f64));
        rec.extend(p.closed_form.map(fmt_f64));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{sample_boundary, ZetaGrid};
    use crate::characteristics::trace_fan;
    use crate::embeddability::{AlphaProfile, XAnsatz};
    use crate::model::{free_scalar_lagrangian, hamiltonian_from_lagrangian, make_free_scalar, FreeScalarParams};
    use crate::presets::{plane_boundary, DataFamily, PlaneGeometry};
    use std::f64::consts::{PI, SQRT_2};

    fn solve(model: &HamiltonianModel, data: DataFamily, axis: usize, ansatz: XAnsatz, zeta_n: usize, steps: usize, xi_max: f64) -> FieldSolution {
        let geom = PlaneGeometry::new(2, axis, vec![[0.0, 1.0]]).unwrap();
        let spec = plane_boundary(&geom, &data).unwrap();
        let samples = sample_boundary(&spec, &[zeta_n]).unwrap();
        let grid = ZetaGrid::new(&[zeta_n], &spec.zeta_box).unwrap();
        let fan = trace_fan(model, &samples, grid, &ansatz, xi_max, steps).unwrap();
        FieldSolution::new(model.clone(), fan, None).unwrap()
    }

    fn diagonal() -> XAnsatz {
        XAnsatz::ScaledDirection {
            direction: vec![0.0],
            alpha: AlphaProfile::Constant { value: 1.0 },
        }
    }

    fn scalar() -> HamiltonianModel {
        make_free_scalar(2, FreeScalarParams::new(1.0).unwrap()).unwrap()
    }

    #[test]
    fn stats_reduction() {
        let s = Stats::from_values(&[3.0, -4.0]);
        assert_eq!(s.max, 4.0);
        assert!((s.rms - 12.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(Stats::from_values(&[]), Stats { max: 0.0, rms: 0.0 });
    }

    #[test]
    fn zero_data_residuals_vanish() {
        let model = scalar();
        let sol = solve(&model, DataFamily::Polynomial { field: vec![], normal: vec![] }, 0, diagonal(), 5, 40, 1.5);
        let pts = interior_grid(&sol.domain_box, &[4, 4], 0.01).unwrap();
        assert_eq!(hj_residual(&model, &sol, &pts, 1e-3).unwrap().max, 0.0);
        let (a, b) = hamilton_residual(&model, &sol, &pts, 1e-3).unwrap();
        assert_eq!((a.max, b.max), (0.0, 0.0));
        let l = free_scalar_lagrangian(2, 1.0, &[1.0, 1.0]).unwrap();
        assert_eq!(euler_lagrange_residual(&l, &sol, &pts, 1e-3).unwrap().max, 0.0);
        let cf = ClosedForm {
            oracle: AmplitudeOracle::new(0.0, 0.0, 0.0, 1.0, [0.0, 1.0], 1e-3).unwrap(),
            alpha: 1.0,
        };
        assert_eq!(closed_form_compare(&sol, &cf, &pts).unwrap(), 0.0);
    }

    #[test]
    fn compatible_wave_passes_every_check() {
        let model = scalar();
        let data = DataFamily::Sinusoid { a0: 1.0, b0: 0.0, c: 0.0, mu: 1.0 };
        let sol = solve(&model, data, 0, diagonal(), 11, 400, PI / SQRT_2);
        let settings = SuiteSettings {
            resolution: vec![6, 6],
            fd_step: Some(1e-3),
            tolerances: default_tolerances(),
            tolerance_scale: 1.0,
        };
        let l = free_scalar_lagrangian(2, 1.0, &[1.0, 1.0]).unwrap();
        let cf = ClosedForm {
            oracle: AmplitudeOracle::new(1.0, 0.0, 0.0, 1.0, [-1.0, 2.0], 1e-4).unwrap(),
            alpha: 1.0,
        };
        let report = run_suite(&model, Some(&l), &sol, Some(&cf), &settings).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.hj_residual.rms <= report.hj_residual.max);
        let tight = report.with_tolerances(default_tolerances().into_iter().map(|(k, v)| (k, v * 1e-9)).collect());
        assert!(!tight.passed);
        assert!(tight.failing().contains(&"hamilton_first".to_string()));
    }

    #[test]
    fn detailed_suite_agrees_with_its_report() {
        let model = scalar();
        let data = DataFamily::Sinusoid { a0: 1.0, b0: 0.5, c: 0.0, mu: 1.0 };
        let sol = solve(&model, data, 0, diagonal(), 7, 200, 1.5);
        let settings = SuiteSettings {
            resolution: vec![3, 4],
            fd_step: Some(1e-3),
            tolerances: default_tolerances(),
            tolerance_scale: 1.0,
        };
        let out = run_suite_detailed(&model, None, &sol, None, &settings).unwrap();
        assert_eq!(out.points.len(), 12);
        let hj_max = out.points.iter().map(|p| p.hj).fold(0.0, f64::max);
        assert_eq!(hj_max, out.report.hj_residual.max);
        let second = out.points.iter().map(|p| p.hamilton_second).fold(0.0, f64::max);
        assert_eq!(second, out.report.hamilton_residuals[1].max);
        assert!(out.points.iter().all(|p| p.euler_lagrange.is_none()));

        let mut buf = Vec::new();
        write_residual_csv(&out.points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,hj,hamilton_first,hamilton_second"));
        assert_eq!(lines.count(), 12);
    }

    #[test]
    fn linear_data_violate_the_first_hamilton_equation() {
        let model = scalar();
        let data = DataFamily::Polynomial { field: vec![0.0, 1.0], normal: vec![] };
        let sol = solve(&model, data, 0, diagonal(), 11, 200, PI / SQRT_2);
        let pts = interior_grid(&sol.domain_box, &[5, 5], 0.01).unwrap();
        let (first, _) = hamilton_residual(&model, &sol, &pts, 1e-3).unwrap();
        assert!(first.max > 1e-2, "{first:?}");
    }

    #[test]
    fn massless_linear_field_solves_euler_lagrange() {
        // y = x¹ from ψ = 0 and unit normal slope with X = (1, 0).
        let lag = free_scalar_lagrangian(2, 0.0, &[1.0, 1.0]).unwrap();
        let model = hamiltonian_from_lagrangian(&lag, 1e-12).unwrap();
        let data = DataFamily::Polynomial { field: vec![], normal: vec![1.0] };
        let ansatz = XAnsatz::Constant { a: vec![1.0, 0.0] };
        let sol = solve(&model, data, 0, ansatz, 7, 50, 1.0);
        let pts = interior_grid(&sol.domain_box, &[4, 4], 0.01).unwrap();
        for x in &pts {
            assert!((sol.field_at(x).unwrap().0[0] - x[0]).abs() < 1e-9);
        }
        assert!(euler_lagrange_residual(&lag, &sol, &pts, 1e-3).unwrap().max < 1e-5);
    }

    #[test]
    fn swapping_the_boundary_axis_mirrors_the_solution() {
        let model = scalar();
        let data = DataFamily::Sinusoid { a0: 1.0, b0: 0.0, c: 0.0, mu: 1.0 };
        let a = solve(&model, data.clone(), 0, diagonal(), 11, 200, PI / SQRT_2);
        let b = solve(&model, data, 1, diagonal(), 11, 200, PI / SQRT_2);
        let pts = interior_grid(&a.domain_box, &[5, 5], 0.01).unwrap();
        for x in &pts {
            let ya = a.field_at(x).unwrap().0[0];
            let yb = b.field_at(&[x[1], x[0]]).unwrap().0[0];
            assert!((ya - yb).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn interior_grid_rejects_excess_margin() {
        assert!(interior_grid(&[[0.0, 1.0]], &[3], 0.6).is_err());
        assert_eq!(interior_grid(&[[0.0, 1.0]], &[3], 0.1).unwrap()[2], vec![0.9]);
    }
}
