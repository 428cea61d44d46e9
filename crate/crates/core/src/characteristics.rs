//! Characteristic system of the reduced equation
//! `u_μ X^μ + H(x, y, u_i X) = 0` and its integration by classical RK4.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::boundary::{initial_covelocity, momentum, BoundarySample, ZetaGrid};
use crate::embeddability::XAnsatz;
use crate::model::HamiltonianModel;
use crate::{Error, Result};

/// Tolerance for the covelocity solve at the boundary.
pub const COVELOCITY_TOL: f64 = 1e-9;

/// Full state on one characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicState {
    pub xi: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Covelocities `u_i`; the momenta are `p^μ_i = u_i X^μ`.
    pub covel: Vec<f64>,
    pub u_mu: Vec<f64>,
    /// Value of the reduced function along the curve.
    pub u: f64,
    /// Transport vector `X^μ`, constant along the curve.
    pub transport: Vec<f64>,
}

impl CharacteristicState {
    pub fn momentum(&self) -> Vec<f64> {
        momentum(&self.covel, &self.transport)
    }
}

/// `d/dξ` of the evolving parts of a [`CharacteristicState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dcovel: Vec<f64>,
    pub du_mu: Vec<f64>,
    pub du: f64,
}

pub fn char_rhs(model: &HamiltonianModel, s: &CharacteristicState) -> StateRate {
    let (n, r) = (model.n, model.r);
    let p = s.momentum();
    let dp = model.dh_dp(&s.x, &s.y, &p);
    let dy: Vec<f64> = (0..r)
        .map(|i| (0..n).map(|mu| s.transport[mu] * dp[mu * r + i]).sum())
        .collect();
    let dcovel: Vec<f64> = model.dh_dy(&s.x, &s.y, &p).into_iter().map(|v| -v).collect();
    let du_mu: Vec<f64> = model.dh_dx(&s.x, &s.y, &p).into_iter().map(|v| -v).collect();
    let du = s.u_mu.iter().zip(&s.transport).map(|(a, b)| a * b).sum::<f64>()
        + s.covel.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>();
    StateRate {
        dx: s.transport.clone(),
        dy,
        dcovel,
        du_mu,
        du,
    }
}

fn advance(base: &CharacteristicState, rate: &StateRate, h: f64, xi: f64, x0: &[f64], xi0: f64) -> CharacteristicState {
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + h * q).collect::<Vec<_>>();
    CharacteristicState {
        xi,
        // The base flow is linear; evaluate it exactly instead of accumulating.
        x: x0.iter().zip(&base.transport).map(|(a, t)| a + t * (xi - xi0)).collect(),
        y: add(&base.y, &rate.dy),
        covel: add(&base.covel, &rate.dcovel),
        u_mu: add(&base.u_mu, &rate.du_mu),
        u: base.u + h * rate.du,
        transport: base.transport.clone(),
    }
}

fn is_finite(s: &CharacteristicState) -> bool {
    s.u.is_finite()
        && s.x.iter().chain(&s.y).chain(&s.covel).chain(&s.u_mu).all(|v| v.is_finite())
}

/// Integrates one characteristic over `[ξ₀, ξ₀ + xi_span]` with `steps`
/// fixed RK4 steps. Returns `steps + 1` states including `init`.
pub fn trace_characteristic(
    model: &HamiltonianModel,
    init: &CharacteristicState,
    xi_span: f64,
    steps: usize,
) -> Result<Vec<CharacteristicState>> {
    if steps == 0 {
        return Err(Error::InvalidInput("characteristic needs at least one step".into()));
    }
    if !(xi_span.is_finite() && xi_span != 0.0) {
        return Err(Error::InvalidInput(format!("invalid characteristic span {xi_span}")));
    }
    if !is_finite(init) {
        return Err(Error::NonFinite { xi: init.xi });
    }
    let h = xi_span / steps as f64;
    let xi0 = init.xi;
    let x0 = init.x.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(init.clone());
    let mut cur = init.clone();
    for k in 1..=steps {
        let xi_prev = cur.xi;
        let xi_mid = xi_prev + 0.5 * h;
        let xi_next = xi0 + xi_span * (k as f64 / steps as f64);
        let k1 = char_rhs(model, &cur);
        let k2 = char_rhs(model, &advance(&cur, &k1, 0.5 * h, xi_mid, &x0, xi0));
        let k3 = char_rhs(model, &advance(&cur, &k2, 0.5 * h, xi_mid, &x0, xi0));
        let k4 = char_rhs(model, &advance(&cur, &k3, h, xi_next, &x0, xi0));
        let combine = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..a.len()).map(|j| (a[j] + 2.0 * b[j] + 2.0 * c[j] + d[j]) / 6.0).collect()
        };
        let rate = StateRate {
            dx: cur.transport.clone(),
            dy: combine(&k1.dy, &k2.dy, &k3.dy, &k4.dy),
            dcovel: combine(&k1.dcovel, &k2.dcovel, &k3.dcovel, &k4.dcovel),
            du_mu: combine(&k1.du_mu, &k2.du_mu, &k3.du_mu, &k4.du_mu),
            du: (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du) / 6.0,
        };
        cur = advance(&cur, &rate, h, xi_next, &x0, xi0);
        if !is_finite(&cur) {
            return Err(Error::NonFinite { xi: cur.xi });
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Family of characteristics indexed by the `ζ` grid, all sharing the same
/// `ξ` nodes.
#[derive(Debug, Clone)]
pub struct CharacteristicFan {
    pub n: usize,
    pub r: usize,
    pub grid: ZetaGrid,
    pub xi_max: f64,
    pub steps: usize,
    /// Row-major over `grid`; each entry holds `steps + 1` states.
    pub trajectories: Vec<Vec<CharacteristicState>>,
}

impl CharacteristicFan {
    pub fn xi_step(&self) -> f64 {
        self.xi_max / self.steps as f64
    }

    pub fn xi_at(&self, k: usize) -> f64 {
        self.xi_max * (k as f64 / self.steps as f64)
    }

    pub fn zeta(&self, j: usize) -> Vec<f64> {
        self.grid.coord(j)
    }
}

/// Initial state on the boundary with the quadrature fixed on shell:
/// `u(0) = 0` and `u_μ(0) = −H₀ X^μ / |X|²`, so that `u_μ X^μ + H = 0`.
pub fn initial_state(
    model: &HamiltonianModel,
    sample: &BoundarySample,
    transport: &[f64],
    covel: Vec<f64>,
) -> CharacteristicState {
    let p = momentum(&covel, transport);
    let h0 = model.h(&sample.x0, &sample.y0, &p);
    let norm2: f64 = transport.iter().map(|t| t * t).sum();
    CharacteristicState {
        xi: 0.0,
        x: sample.x0.clone(),
        y: sample.y0.clone(),
        covel,
        u_mu: transport.iter().map(|t| -h0 * t / norm2).collect(),
        u: 0.0,
        transport: transport.to_vec(),
    }
}

/// Traces a fan from explicit per-sample transport vectors and covelocities.
pub fn trace_fan_from_initial(
    model: &HamiltonianModel,
    grid: ZetaGrid,
    samples: &[BoundarySample],
    transports: &[Vec<f64>],
    covels: &[Vec<f64>],
    xi_max: f64,
    steps: usize,
) -> Result<CharacteristicFan> {
    if samples.len() != grid.len() || transports.len() != samples.len() || covels.len() != samples.len() {
        return Err(Error::InvalidInput("fan inputs disagree with the zeta grid".into()));
    }
    let trajectories = samples
        .par_iter()
        .zip(transports.par_iter())
        .zip(covels.par_iter())
        .map(|((s, t), u)| {
            let init = initial_state(model, s, t, u.clone());
            trace_characteristic(model, &init, xi_max, steps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CharacteristicFan {
        n: model.n,
        r: model.r,
        grid,
        xi_max,
        steps,
        trajectories,
    })
}

/// Traces one characteristic from every boundary sample, with `X = A(ζ)`
/// from the ansatz and `u_i(0)` from the normal-derivative data.
pub fn trace_fan(
    model: &HamiltonianModel,
    samples: &[BoundarySample],
    grid: ZetaGrid,
    ansatz: &XAnsatz,
    xi_max: f64,
    steps: usize,
) -> Result<CharacteristicFan> {
    let transports: Vec<Vec<f64>> = samples.iter().map(|s| ansatz.eval(&s.zeta)).collect();
    if transports.iter().any(|t| t.len() != model.n) {
        return Err(Error::InvalidInput("transport field has the wrong dimension".into()));
    }
    let covels = samples
        .par_iter()
        .zip(transports.par_iter())
        .map(|(s, t)| initial_covelocity(model, s, t, COVELOCITY_TOL))
        .collect::<Result<Vec<_>>>()?;
    trace_fan_from_initial(model, grid, samples, &transports, &covels, xi_max, steps)
}

/// Column header of the fan CSV export.
pub fn fan_csv_header(n: usize, r: usize) -> Vec<String> {
    let mut h = vec!["zeta_index".to_string(), "xi".to_string()];
    h.extend((1..=n).map(|m| format!("x{m}")));
    h.extend((1..=r).map(|i| format!("y{i}")));
    h.extend((1..=r).map(|i| format!("u_{i}")));
    h.push("u".into());
    h.extend((1..=n).map(|m| format!("X{m}")));
    h.extend((1..=n).map(|m| format!("u_mu{m}")));
    h
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_fan_csv<W: Write>(fan: &CharacteristicFan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(fan_csv_header(fan.n, fan.r))?;
    for (j, traj) in fan.trajectories.iter().enumerate() {
        for s in traj {
            let mut rec = vec![j.to_string(), fmt_f64(s.xi)];
            rec.extend(s.x.iter().map(|v| fmt_f64(*v)));
            rec.extend(s.y.iter().map(|v| fmt_f64(*v)));
            rec.extend(s.covel.iter().map(|v| fmt_f64(*v)));
            rec.push(fmt_f64(s.u));
            rec.extend(s.transport.iter().map(|v| fmt_f64(*v)));
            rec.extend(s.u_mu.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a fan written by [`write_fan_csv`]; the grid must match the one used
/// when it was traced.
pub fn read_fan_csv<R: Read>(input: R, grid: ZetaGrid, n: usize, r: usize) -> Result<CharacteristicFan> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != fan_csv_header(n, r) {
        return Err(Error::Format(format!("unexpected fan CSV header {header:?}")));
    }
    let mut trajectories: Vec<Vec<CharacteristicState>> = vec![Vec::new(); grid.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let j: usize = rec[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad zeta index {:?}", &rec[0])))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number {s:?}"))))
            .collect::<Result<_>>()?;
        if j >= grid.len() {
            return Err(Error::Format(format!("zeta index {j} outside the grid")));
        }
        let mut it = vals.into_iter();
        let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
        let xi = take(1)[0];
        let x = take(n);
        let y = take(r);
        let covel = take(r);
        let u = take(1)[0];
        let transport = take(n);
        let u_mu = take(n);
        trajectories[j].push(CharacteristicState {
            xi,
            x,
            y,
            covel,
            u_mu,
            u,
            transport,
        });
    }
    let steps = trajectories[0].len().saturating_sub(1);
    if steps == 0 || trajectories.iter().any(|t| t.len() != steps + 1) {
        return Err(Error::Format("fan CSV trajectories are empty or ragged".into()));
    }
    let xi_max = trajectories[0][steps].xi;
    Ok(CharacteristicFan {
        n,
        r,
        grid,
        xi_max,
        steps,
        trajectories,
    })
}
