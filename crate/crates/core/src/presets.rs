//! Ready-made boundary geometries and data families.
//!
//! The geometry is a coordinate hyperplane `x^k = 0` parametrised by the
//! remaining coordinates in increasing order. Data are functions of `ζ`.

use std::io::Read;
use std::sync::Arc;

use crate::boundary::BoundarySpec;
use crate::embeddability::OpenConstants;
use crate::sinusoid::AmplitudeOracle;
use crate::{Error, Result};

/// Oracle table step for sinusoidal data.
pub const SINUSOID_TABLE_STEP: f64 = 1e-3;

/// Hyperplane `x^axis = 0` over a box of the other coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneGeometry {
    pub n: usize,
    pub axis: usize,
    pub zeta_box: Vec<[f64; 2]>,
    /// Defaults to the unit normal `e_axis`.
    pub transverse: Option<Vec<f64>>,
}

impl PlaneGeometry {
    pub fn new(n: usize, axis: usize, zeta_box: Vec<[f64; 2]>) -> Result<Self> {
        if n == 0 || axis >= n || zeta_box.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "plane x^{} = 0 in {n} dimensions needs {} zeta intervals, got {}",
                axis + 1,
                n.saturating_sub(1),
                zeta_box.len()
            )));
        }
        if zeta_box.iter().any(|[lo, hi]| !(hi > lo)) {
            return Err(Error::InvalidInput(format!("empty zeta interval in {zeta_box:?}")));
        }
        Ok(Self {
            n,
            axis,
            zeta_box,
            transverse: None,
        })
    }

    pub fn with_transverse(mut self, transverse: Vec<f64>) -> Result<Self> {
        if transverse.len() != self.n {
            return Err(Error::InvalidInput("transverse vector has the wrong dimension".into()));
        }
        self.transverse = Some(transverse);
        Ok(self)
    }

    fn embed(&self, zeta: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n);
        x.extend_from_slice(&zeta[..self.axis]);
        x.push(0.0);
        x.extend_from_slice(&zeta[self.axis..]);
        x
    }
}

/// Boundary data `ψ`, `ψ̂` for one field component (`r = 1`).
#[derive(Debug, Clone, PartialEq)]
pub enum DataFamily {
    /// Amplitude-ODE family of the two-dimensional free scalar: `ψ = a`,
    /// `ψ̂ = μ b/√(1+e^{2c})` with `a(0) = a0`, `b(0) = b0`.
    Sinusoid { a0: f64, b0: f64, c: f64, mu: f64 },
    /// Polynomials in `ζ¹`, coefficients in increasing degree.
    Polynomial { field: Vec<f64>, normal: Vec<f64> },
    /// Tabulated samples in `ζ¹`, linearly interpolated and held constant
    /// beyond the ends.
    Tabulated {
        zeta: Vec<f64>,
        field: Vec<f64>,
        normal: Vec<f64>,
    },
}

fn polyval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn lerp_table(zeta: &[f64], vals: &[f64], t: f64) -> f64 {
    let k = zeta.partition_point(|&z| z <= t);
    if k == 0 {
        return vals[0];
    }
    if k == zeta.len() {
        return vals[k - 1];
    }
    let s = (t - zeta[k - 1]) / (zeta[k] - zeta[k - 1]);
    vals[k - 1] + s * (vals[k] - vals[k - 1])
}

impl DataFamily {
    /// Parses a CSV with header `zeta,psi,psihat` and increasing `zeta`.
    pub fn read_tabulated<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != ["zeta", "psi", "psihat"] {
            return Err(Error::Format(format!("expected header zeta,psi,psihat, got {header:?}")));
        }
        let (mut zeta, mut field, mut normal) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number {:?}: {e}", &rec[k])))
            };
            zeta.push(parse(0)?);
            field.push(parse(1)?);
            normal.push(parse(2)?);
        }
        if zeta.len() < 2 || zeta.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("tabulated data need at least two strictly increasing zeta rows".into()));
        }
        Ok(DataFamily::Tabulated { zeta, field, normal })
    }

    fn evaluators(&self, geom: &PlaneGeometry) -> Result<(Arc<dyn Fn(f64) -> f64 + Send + Sync>, Arc<dyn Fn(f64) -> f64 + Send + Sync>)> {
        Ok(match self {
            DataFamily::Sinusoid { a0, b0, c, mu } => {
                if geom.n != 2 {
                    return Err(Error::InvalidInput("sinusoidal data require a two-dimensional base".into()));
                }
                let oracle = Arc::new(AmplitudeOracle::new(*a0, *b0, *c, *mu, geom.zeta_box[0], SINUSOID_TABLE_STEP)?);
                let o2 = oracle.clone();
                (Arc::new(move |z| oracle.field(z)), Arc::new(move |z| o2.normal(z)))
            }
            DataFamily::Polynomial { field, normal } => {
                let (f, g) = (field.clone(), normal.clone());
                (Arc::new(move |z| polyval(&f, z)), Arc::new(move |z| polyval(&g, z)))
            }
            DataFamily::Tabulated { zeta, field, normal } => {
                let (z1, z2, f, g) = (zeta.clone(), zeta.clone(), field.clone(), normal.clone());
                (
                    Arc::new(move |z| lerp_table(&z1, &f, z)),
                    Arc::new(move |z| lerp_table(&z2, &g, z)),
                )
            }
        })
    }
}

/// Boundary specification for a plane geometry carrying scalar data.
pub fn plane_boundary(geom: &PlaneGeometry, data: &DataFamily) -> Result<BoundarySpec> {
    let (f, g) = data.evaluators(geom)?;
    let first = |z: &[f64]| z.first().copied().unwrap_or(0.0);
    let g2 = geom.clone();
    let transverse = geom.transverse.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; geom.n];
        e[geom.axis] = 1.0;
        e
    });
    Ok(BoundarySpec {
        n: geom.n,
        r: 1,
        surface: Arc::new(move |z| g2.embed(z)),
        field_data: Arc::new(move |z| vec![f(first(z))]),
        normal_data: Arc::new(move |z| vec![g(first(z))]),
        transverse: Arc::new(move |_| transverse.clone()),
        zeta_box: geom.zeta_box.clone(),
    })
}

/// Opens the sinusoid amplitudes `A = a(0)`, `B = b(0)` as fit unknowns,
/// with the data coupling `c` and mass `μ` held fixed.
///
/// The initial guess reads `A`, `B` off the target data at `ζ = 0`.
pub fn sinusoid_constants(geom: &PlaneGeometry, target: &BoundarySpec, c: f64, mu: f64) -> Result<OpenConstants> {
    let a = (target.field_data)(&[0.0])[0];
    let b = (target.normal_data)(&[0.0])[0] * (1.0 + (2.0 * c).exp()).sqrt() / mu;
    let geom = geom.clone();
    Ok(OpenConstants {
        names: vec!["A".into(), "B".into()],
        initial: vec![a, b],
        build: Arc::new(move |v: &[f64]| {
            plane_boundary(
                &geom,
                &DataFamily::Sinusoid {
                    a0: v[0],
                    b0: v[1],
                    c,
                    mu,
                },
            )
        }),
    })
}
