//! Sinusoidal boundary-data family of the free scalar in two dimensions.
//!
//! With `X = α (1, e^c)/√(1+e^{2c})` and the boundary `x¹ = 0`, the field
//! `y = a(z) cos(μαξ) + b(z) sin(μαξ)` solves the field equations exactly
//! when the amplitudes obey
//!
//! `a' = ω b`, `b' = −ω a`, `ω = μ e^c / √(1+e^{2c})`.
//!
//! The amplitudes are tabulated by fixed-step RK4 from `z = 0` and read back
//! by cubic Hermite interpolation using the ODE rates.

use crate::interp::hermite;
use crate::{Error, Result};

/// Fine-step RK4 table of the amplitude system.
#[derive(Debug, Clone)]
pub struct AmplitudeOracle {
    a0: f64,
    b0: f64,
    c: f64,
    mu: f64,
    omega: f64,
    lo: f64,
    step: f64,
    table: Vec<[f64; 2]>,
}

fn rk4_step(omega: f64, s: [f64; 2], h: f64) -> [f64; 2] {
    let f = |v: [f64; 2]| [omega * v[1], -omega * v[0]];
    let k1 = f(s);
    let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
    let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
    let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1]]);
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

impl AmplitudeOracle {
    /// Tabulates `a`, `b` with `a(0) = a0`, `b(0) = b0` over `[lo, hi]`
    /// (extended to contain 0) at spacing at most `max_step`.
    pub fn new(a0: f64, b0: f64, c: f64, mu: f64, range: [f64; 2], max_step: f64) -> Result<Self> {
        if !(mu > 0.0) || !c.is_finite() || !(max_step > 0.0) || !(range[1] >= range[0]) {
            return Err(Error::InvalidInput(format!(
                "bad amplitude oracle parameters: mu {mu}, c {c}, step {max_step}, range {range:?}"
            )));
        }
        let omega = mu * c.exp() / (1.0 + (2.0 * c).exp()).sqrt();
        let lo = range[0].min(0.0);
        let hi = range[1].max(0.0);
        // Integer node offsets on both sides of z = 0.
        let below = ((-lo) / max_step).ceil() as usize;
        let above = (hi / max_step).ceil() as usize;
        let step = if below + above == 0 {
            max_step
        } else {
            ((-lo) / below.max(1) as f64).max(hi / above.max(1) as f64).max(f64::MIN_POSITIVE)
        };
        let mut up = vec![[a0, b0]];
        for _ in 0..above {
            let last = *up.last().unwrap();
            up.push(rk4_step(omega, last, step));
        }
        let mut down = Vec::with_capacity(below);
        let mut cur = [a0, b0];
        for _ in 0..below {
            cur = rk4_step(omega, cur, -step);
            down.push(cur);
        }
        down.reverse();
        down.extend(up);
        Ok(Self {
            a0,
            b0,
            c,
            mu,
            omega,
            lo: -(below as f64) * step,
            step,
            table: down,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn coupling(&self) -> f64 {
        self.c
    }

    pub fn initial(&self) -> (f64, f64) {
        (self.a0, self.b0)
    }

    /// `(a(z), b(z))`. Outside the table the end state is integrated further.
    pub fn amplitudes(&self, z: f64) -> (f64, f64) {
        let last = self.table.len() - 1;
        let u = (z - self.lo) / self.step;
        if u < 0.0 || u > last as f64 {
            let (start, z0) = if u < 0.0 {
                (self.table[0], self.lo)
            } else {
                (self.table[last], self.lo + last as f64 * self.step)
            };
            let span = z - z0;
            let m = (span.abs() / self.step).ceil().max(1.0) as usize;
            let h = span / m as f64;
            let s = (0..m).fold(start, |s, _| rk4_step(self.omega, s, h));
            return (s[0], s[1]);
        }
        let cell = (u.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return (self.table[0][0], self.table[0][1]);
        }
        let s = u - cell as f64;
        let (p, q) = (self.table[cell], self.table[cell + 1]);
        let h = self.step * self.omega;
        (
            hermite(s, p[0], h * p[1], q[0], h * q[1]),
            hermite(s, p[1], -h * p[0], q[1], -h * q[0]),
        )
    }

    /// Boundary field value `ψ(z) = a(z)`.
    pub fn field(&self, z: f64) -> f64 {
        self.amplitudes(z).0
    }

    /// Normal-derivative value `ψ̂(z) = μ b(z) / √(1+e^{2c})` along `∂/∂x¹`.
    pub fn normal(&self, z: f64) -> f64 {
        self.mu * self.amplitudes(z).1 / (1.0 + (2.0 * self.c).exp()).sqrt()
    }

    /// Reference field at chart coordinates `(ξ, z)` for magnitude `α`.
    pub fn solution(&self, xi: f64, z: f64, alpha: f64) -> f64 {
        let (a, b) = self.amplitudes(z);
        let phase = self.mu * alpha * xi;
        a * phase.cos() + b * phase.sin()
    }
}
