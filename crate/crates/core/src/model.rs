//! Hamiltonian and Lagrangian field-theory models.
//!
//! Momenta and velocities are flattened `n×r` arrays indexed as
//! `p[mu * r + i]` (`p^μ_i`, `v^i_μ`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// `(x, y, p) -> real`
pub type ScalarEval = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
/// `(x, y, p) -> real[k]`
pub type VectorEval = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Relative step used wherever a model derivative is replaced by a central difference.
pub const FD_REL_STEP: f64 = 1e-6;

fn fd_step(v: f64) -> f64 {
    FD_REL_STEP * v.abs().max(1.0)
}

/// A Hamiltonian `H(x^μ, y^i, p^μ_i)` with its partial derivatives.
#[derive(Clone)]
pub struct HamiltonianModel {
    pub n: usize,
    pub r: usize,
    pub h_eval: ScalarEval,
    pub dh_dy: VectorEval,
    pub dh_dp: VectorEval,
    pub dh_dx: VectorEval,
    /// Constant diagonal metric entries (all 1 unless configured).
    pub metric_diag: Vec<f64>,
}

impl std::fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("n", &self.n)
            .field("r", &self.r)
            .field("metric_diag", &self.metric_diag)
            .finish_non_exhaustive()
    }
}

impl HamiltonianModel {
    pub fn new(
        n: usize,
        r: usize,
        h_eval: ScalarEval,
        dh_dy: VectorEval,
        dh_dp: VectorEval,
        dh_dx: VectorEval,
    ) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::InvalidInput(format!(
                "model dimensions must be positive (n = {n}, r = {r})"
            )));
        }
        Ok(Self {
            n,
            r,
            h_eval,
            dh_dy,
            dh_dp,
            dh_dx,
            metric_diag: vec![1.0; n],
        })
    }

    /// Builds a model whose derivatives are central differences of `h_eval`.
    pub fn from_value(n: usize, r: usize, h_eval: ScalarEval) -> Result<Self> {
        let (hy, hp, hx) = (h_eval.clone(), h_eval.clone(), h_eval.clone());
        let dh_dy: VectorEval = Arc::new(move |x, y, p| {
            central_gradient(y, |yy| hy(x, yy, p))
        });
        let dh_dp: VectorEval = Arc::new(move |x, y, p| {
            central_gradient(p, |pp| hp(x, y, pp))
        });
        let dh_dx: VectorEval = Arc::new(move |x, y, p| {
            central_gradient(x, |xx| hx(xx, y, p))
        });
        Self::new(n, r, h_eval, dh_dy, dh_dp, dh_dx)
    }

    pub fn h(&self, x: &[f64], y: &[f64], p: &[f64]) -> f64 {
        (self.h_eval)(x, y, p)
    }

    pub fn dh_dy(&self, x: &[f64], y: &[f64], p: &[f64]) -> Vec<f64> {
        (self.dh_dy)(x, y, p)
    }

    pub fn dh_dp(&self, x: &[f64], y: &[f64], p: &[f64]) -> Vec<f64> {
        (self.dh_dp)(x, y, p)
    }

    pub fn dh_dx(&self, x: &[f64], y: &[f64], p: &[f64]) -> Vec<f64> {
        (self.dh_dx)(x, y, p)
    }
}

fn central_gradient(at: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = at.to_vec();
    (0..at.len())
        .map(|k| {
            let h = fd_step(at[k]);
            probe[k] = at[k] + h;
            let fp = f(&probe);
            probe[k] = at[k] - h;
            let fm = f(&probe);
            probe[k] = at[k];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `(x, y, v) -> real[(n·r)×(n·r)]`, row-major.
pub type MatrixEval = VectorEval;

/// A Lagrangian `L(x^μ, y^i, v^i_μ)` with the derivatives needed for the Legendre map.
#[derive(Clone)]
pub struct LagrangianModel {
    pub n: usize,
    pub r: usize,
    pub l_eval: ScalarEval,
    pub dl_dv: VectorEval,
    pub dl_dy: VectorEval,
    pub d2l_dvdv: MatrixEval,
}

impl std::fmt::Debug for LagrangianModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianModel")
            .field("n", &self.n)
            .field("r", &self.r)
            .finish_non_exhaustive()
    }
}

/// Parameters of the free massive scalar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeScalarParams {
    mu: f64,
}

impl FreeScalarParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidInput(format!("mass parameter must be positive, got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// `H = ½(Σ_μ (p^μ)² + μ² y²)` on an `n`-dimensional flat base, `r = 1`.
pub fn make_free_scalar(n: usize, params: FreeScalarParams) -> Result<HamiltonianModel> {
    make_free_scalar_with_metric(n, params, &vec![1.0; n])
}

/// Free scalar with kinetic term `½ Σ_μ g_μμ (p^μ)²`.
pub fn make_free_scalar_with_metric(
    n: usize,
    params: FreeScalarParams,
    metric_diag: &[f64],
) -> Result<HamiltonianModel> {
    if n == 0 {
        return Err(Error::InvalidInput("free scalar needs n >= 1".into()));
    }
    check_metric(n, metric_diag)?;
    let mu2 = params.mu * params.mu;
    let g: Arc<[f64]> = metric_diag.into();
    let (g1, g2) = (g.clone(), g.clone());
    let mut model = HamiltonianModel::new(
        n,
        1,
        Arc::new(move |_x, y, p| {
            let kinetic: f64 = p.iter().zip(g1.iter()).map(|(pm, gm)| gm * pm * pm).sum();
            0.5 * (kinetic + mu2 * y[0] * y[0])
        }),
        Arc::new(move |_x, y, _p| vec![mu2 * y[0]]),
        Arc::new(move |_x, _y, p| p.iter().zip(g2.iter()).map(|(pm, gm)| gm * pm).collect()),
        Arc::new(move |_x, _y, _p| vec![0.0; n]),
    )?;
    model.metric_diag = metric_diag.to_vec();
    Ok(model)
}

fn check_metric(n: usize, metric_diag: &[f64]) -> Result<()> {
    if metric_diag.len() != n || metric_diag.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "metric_diag must hold {n} positive entries, got {metric_diag:?}"
        )));
    }
    Ok(())
}

/// `L = ½(Σ_μ (v_μ)²/g_μμ − μ² y²)`, the Lagrangian counterpart of the free scalar.
///
/// `mu = 0` (massless field) is allowed here.
pub fn free_scalar_lagrangian(n: usize, mu: f64, metric_diag: &[f64]) -> Result<LagrangianModel> {
    if n == 0 {
        return Err(Error::InvalidInput("free scalar needs n >= 1".into()));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidInput(format!("mass parameter must be non-negative, got {mu}")));
    }
    check_metric(n, metric_diag)?;
    let mu2 = mu * mu;
    let inv: Arc<[f64]> = metric_diag.iter().map(|g| 1.0 / g).collect::<Vec<_>>().into();
    let (i1, i2, i3) = (inv.clone(), inv.clone(), inv);
    Ok(LagrangianModel {
        n,
        r: 1,
        l_eval: Arc::new(move |_x, y, v| {
            let kinetic: f64 = v.iter().zip(i1.iter()).map(|(vm, im)| im * vm * vm).sum();
            0.5 * (kinetic - mu2 * y[0] * y[0])
        }),
        dl_dv: Arc::new(move |_x, _y, v| v.iter().zip(i2.iter()).map(|(vm, im)| im * vm).collect()),
        dl_dy: Arc::new(move |_x, y, _v| vec![-mu2 * y[0]]),
        d2l_dvdv: Arc::new(move |_x, _y, _v| {
            let mut m = vec![0.0; n * n];
            for k in 0..n {
                m[k * n + k] = i3[k];
            }
            m
        }),
    })
}

/// Legendre map: `p^μ_i = ∂L/∂v^i_μ` and `p = L − Σ p^μ_i v^i_μ`.
pub fn legendre_map(model: &LagrangianModel, x: &[f64], y: &[f64], v: &[f64]) -> (Vec<f64>, f64) {
    let p = (model.dl_dv)(x, y, v);
    let l = (model.l_eval)(x, y, v);
    let pv: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
    (p, l - pv)
}

/// Solves `∂L/∂v(x, y, v) = p` for `v` by damped Newton iteration.
pub fn invert_legendre(
    model: &LagrangianModel,
    x: &[f64],
    y: &[f64],
    p: &[f64],
    v_seed: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let m = model.n * model.r;
    if p.len() != m || v_seed.len() != m {
        return Err(Error::InvalidInput(format!(
            "momentum and seed must have length {m}"
        )));
    }
    let residual = |v: &[f64]| -> Vec<f64> {
        (model.dl_dv)(x, y, v).iter().zip(p).map(|(a, b)| a - b).collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));

    let mut v = v_seed.to_vec();
    let mut res = residual(&v);
    let mut res_norm = norm(&res);
    for _ in 0..max_iter {
        if res_norm <= tol {
            return Ok(v);
        }
        let hess = DMatrix::from_row_slice(m, m, &(model.d2l_dvdv)(x, y, &v));
        let det = hess.determinant();
        let scale = hess.amax().max(f64::MIN_POSITIVE);
        if !det.is_finite() || det.abs() <= f64::EPSILON * scale.powi(m as i32) {
            return Err(Error::SingularHessian { det });
        }
        let step = hess
            .lu()
            .solve(&DVector::from_column_slice(&res))
            .ok_or(Error::SingularHessian { det })?;

        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            let trial_res = residual(&trial);
            let trial_norm = norm(&trial_res);
            if trial_norm < res_norm || t < 1e-8 {
                v = trial;
                res = trial_res;
                res_norm = trial_norm;
                break;
            }
            t *= 0.5;
        }
    }
    if res_norm <= tol {
        Ok(v)
    } else {
        Err(Error::NoConvergence {
            context: "Legendre inversion",
            iterations: max_iter,
            residual: res_norm,
        })
    }
}

/// Default Newton settings for the Legendre inversion.
pub const LEGENDRE_TOL: f64 = 1e-10;
pub const LEGENDRE_MAX_ITER: usize = 50;

/// Hamiltonian `H(x, y, p) = Σ p·v(p) − L(x, y, v(p))` of a regular Lagrangian.
///
/// Failed inversions surface as `NaN` values, which the characteristic
/// integrator reports as [`Error::NonFinite`]. Regularity is probed once at
/// the origin when the model is built.
pub fn hamiltonian_from_lagrangian(model: &LagrangianModel, tol: f64) -> Result<HamiltonianModel> {
    let (n, r) = (model.n, model.r);
    let m = n * r;
    let zeros_x = vec![0.0; n];
    let zeros_y = vec![0.0; r];
    let zeros_p = vec![0.0; m];
    invert_legendre(model, &zeros_x, &zeros_y, &zeros_p, &zeros_p, tol, LEGENDRE_MAX_ITER)?;

    let lag = model.clone();
    let h_eval: ScalarEval = Arc::new(move |x, y, p| {
        match invert_legendre(&lag, x, y, p, p, tol, LEGENDRE_MAX_ITER) {
            Ok(v) => {
                let (_, p_scalar) = legendre_map(&lag, x, y, &v);
                -p_scalar
            }
            Err(_) => f64::NAN,
        }
    });
    HamiltonianModel::from_value(n, r, h_eval)
}

/// Largest deviation between the analytic partial derivatives of `model` and
/// central differences of `h_eval`, over `samples` seeded random points in
/// `[-2, 2]`.
pub fn check_derivatives(model: &HamiltonianModel, samples: usize, eps: f64, seed: u64) -> f64 {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let (n, r) = (model.n, model.r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect() };

    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x = draw(n);
        let y = draw(r);
        let p = draw(n * r);
        let fd = |at: &[f64], f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
            let mut probe = at.to_vec();
            (0..at.len())
                .map(|k| {
                    probe[k] = at[k] + eps;
                    let fp = f(&probe);
                    probe[k] = at[k] - eps;
                    let fm = f(&probe);
                    probe[k] = at[k];
                    (fp - fm) / (2.0 * eps)
                })
                .collect()
        };
        let pairs = [
            (model.dh_dy(&x, &y, &p), fd(&y, &|yy| model.h(&x, yy, &p))),
            (model.dh_dp(&x, &y, &p), fd(&p, &|pp| model.h(&x, &y, pp))),
            (model.dh_dx(&x, &y, &p), fd(&x, &|xx| model.h(xx, &y, &p))),
        ];
        for (analytic, numeric) in &pairs {
            for (a, b) in analytic.iter().zip(numeric) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(n: usize, mu: f64) -> HamiltonianModel {
        make_free_scalar(n, FreeScalarParams::new(mu).unwrap()).unwrap()
    }

    #[test]
    fn free_scalar_values() {
        let h = scalar(2, 1.0);
        let x = [0.3, -0.1];
        assert_eq!(h.h(&x, &[2.0], &[0.0, 0.0]), 2.0);
        assert_eq!(h.h(&x, &[0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(h.dh_dp(&x, &[0.0], &[3.0, 4.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FreeScalarParams::new(0.0).is_err());
        assert!(FreeScalarParams::new(-1.0).is_err());
        let p = FreeScalarParams::new(1.0).unwrap();
        assert!(make_free_scalar(0, p).is_err());
        assert!(make_free_scalar_with_metric(2, p, &[1.0]).is_err());
    }

    #[test]
    fn legendre_map_cases() {
        let l = free_scalar_lagrangian(2, 1.0, &[1.0, 1.0]).unwrap();
        let x = [0.0, 0.0];
        let (p, ps) = legendre_map(&l, &x, &[1.0], &[0.0, 0.0]);
        assert_eq!(p, vec![0.0, 0.0]);
        assert_eq!(ps, -0.5);
        let (p, ps) = legendre_map(&l, &x, &[0.0], &[1.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        assert_eq!(ps, -0.5);
        // L = ½(1 + 1 − 1) = ½, p·v = 2.
        let (p, ps) = legendre_map(&l, &x, &[1.0], &[1.0, 1.0]);
        assert_eq!(p, vec![1.0, 1.0]);
        assert!((ps - (-1.5)).abs() < 1e-15);
    }

    #[test]
    fn invert_legendre_linear_cases() {
        let l = free_scalar_lagrangian(2, 1.0, &[1.0, 1.0]).unwrap();
        let x = [0.0, 0.0];
        let v = invert_legendre(&l, &x, &[0.4], &[1.0, 0.0], &[0.0, 0.0], 1e-12, 1).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
        let v = invert_legendre(&l, &x, &[0.4], &[0.0, 0.0], &[0.0, 0.0], 1e-12, 5).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn invert_legendre_detects_singular_hessian() {
        let mut l = free_scalar_lagrangian(2, 1.0, &[1.0, 1.0]).unwrap();
        l.d2l_dvdv = Arc::new(|_x, _y, _v| vec![1.0, 0.0, 0.0, 0.0]);
        let err = invert_legendre(&l, &[0.0; 2], &[0.0], &[1.0, 1.0], &[0.0, 0.0], 1e-12, 10);
        assert!(matches!(err, Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn invert_legendre_reports_no_convergence() {
        // Quartic kinetic term: Newton needs several steps from a far seed.
        let l = LagrangianModel {
            n: 1,
            r: 1,
            l_eval: Arc::new(|_x, _y, v| 0.25 * v[0].powi(4) + 0.5 * v[0] * v[0]),
            dl_dv: Arc::new(|_x, _y, v| vec![v[0].powi(3) + v[0]]),
            dl_dy: Arc::new(|_x, _y, _v| vec![0.0]),
            d2l_dvdv: Arc::new(|_x, _y, v| vec![3.0 * v[0] * v[0] + 1.0]),
        };
        let err = invert_legendre(&l, &[0.0], &[0.0], &[10.0], &[0.0], 1e-12, 1);
        assert!(matches!(err, Err(Error::NoConvergence { .. })));
        let v = invert_legendre(&l, &[0.0], &[0.0], &[10.0], &[0.0], 1e-12, 50).unwrap();
        assert!((v[0].powi(3) + v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn derived_hamiltonian_matches_free_scalar() {
        let l = free_scalar_lagrangian(2, 1.0, &[1.0, 1.0]).unwrap();
        let h = hamiltonian_from_lagrangian(&l, LEGENDRE_TOL).unwrap();
        assert!((h.h(&[0.0, 0.0], &[1.0], &[0.0, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(h.h(&[0.0, 0.0], &[0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn hamiltonian_plus_scalar_momentum_vanishes() {
        let h = scalar(2, 1.3);
        let l = free_scalar_lagrangian(2, 1.3, &[1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let y = [rng.gen_range(-2.0..2.0)];
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let v = h.dh_dp(&x, &y, &p);
            let (_, ps) = legendre_map(&l, &x, &y, &v);
            assert!((h.h(&x, &y, &p) + ps).abs() < 1e-13);
        }
    }

    #[test]
    fn check_derivatives_cases() {
        let h = scalar(2, 1.0);
        assert!(check_derivatives(&h, 100, 1e-5, 1) < 1e-8);

        let mut broken = h.clone();
        broken.dh_dy = Arc::new(|_x, y, _p| vec![y[0] + 0.25]);
        let err = check_derivatives(&broken, 20, 1e-5, 1);
        assert!((err - 0.25).abs() < 1e-6, "detected {err}");

        let zero = HamiltonianModel::new(
            2,
            1,
            Arc::new(|_x, _y, _p| 0.0),
            Arc::new(|_x, _y, _p| vec![0.0]),
            Arc::new(|_x, _y, _p| vec![0.0, 0.0]),
            Arc::new(|_x, _y, _p| vec![0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(check_derivatives(&zero, 10, 1e-5, 1), 0.0);
    }

    #[test]
    fn check_derivatives_is_deterministic() {
        let l = free_scalar_lagrangian(2, 0.7, &[1.0, 2.0]).unwrap();
        let h = hamiltonian_from_lagrangian(&l, LEGENDRE_TOL).unwrap();
        let a = check_derivatives(&h, 10, 1e-5, 9);
        let b = check_derivatives(&h, 10, 1e-5, 9);
        assert_eq!(a, b);
        assert!(a <= 1e-6, "derived model derivative error {a}");
    }
}
