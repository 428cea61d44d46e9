//! Shared setup for the two-dimensional free-scalar example: boundary
//! `x¹ = 0`, `x² = z` with `z ∈ [0, 1]`, `μ = 1`.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use hjfield_core::boundary::{sample_boundary, BoundarySpec, ZetaGrid};
use hjfield_core::characteristics::{trace_fan, CharacteristicFan};
use hjfield_core::embeddability::{
    fit_embeddability, fitted_boundary, AlphaProfile, AnsatzFamily, EmbeddabilityFit, FanNumerics, OpenConstants,
    XAnsatz,
};
use hjfield_core::model::{make_free_scalar, FreeScalarParams, HamiltonianModel};
use hjfield_core::presets::{plane_boundary, sinusoid_constants, DataFamily, PlaneGeometry};
use hjfield_core::reconstruct::FieldSolution;
use hjfield_core::sinusoid::AmplitudeOracle;
use hjfield_core::verify::ClosedForm;

/// Half period of the diagonal wave along a characteristic.
pub const XI_RUN: f64 = PI / SQRT_2;

pub fn scalar() -> HamiltonianModel {
    make_free_scalar(2, FreeScalarParams::new(1.0).unwrap()).unwrap()
}

pub fn geometry() -> PlaneGeometry {
    PlaneGeometry::new(2, 0, vec![[0.0, 1.0]]).unwrap()
}

pub fn sinusoid(a0: f64, b0: f64, c: f64) -> BoundarySpec {
    plane_boundary(&geometry(), &DataFamily::Sinusoid { a0, b0, c, mu: 1.0 }).unwrap()
}

pub fn linear_data() -> BoundarySpec {
    plane_boundary(
        &geometry(),
        &DataFamily::Polynomial {
            field: vec![0.0, 1.0],
            normal: vec![],
        },
    )
    .unwrap()
}

pub fn scaled(c: f64, alpha: AlphaProfile) -> XAnsatz {
    XAnsatz::ScaledDirection {
        direction: vec![c],
        alpha,
    }
}

pub fn unit_alpha() -> AlphaProfile {
    AlphaProfile::Constant { value: 1.0 }
}

pub fn wavy_alpha() -> AlphaProfile {
    AlphaProfile::Sine {
        base: 1.0,
        amplitude: 0.3,
    }
}

pub fn numerics(zeta_points: usize, steps: usize) -> FanNumerics {
    FanNumerics {
        zeta_grid: vec![zeta_points],
        xi_max: XI_RUN,
        steps,
    }
}

/// Amplitudes `A`, `B` opened with the data coupling fixed at 0.
pub fn open_amplitudes(target: &BoundarySpec, initial: Option<[f64; 2]>) -> OpenConstants {
    let mut open = sinusoid_constants(&geometry(), target, 0.0, 1.0).unwrap();
    if let Some(init) = initial {
        open.initial = init.to_vec();
    }
    open
}

/// Fits `c` (and the amplitudes) starting from `c = 0.3`.
pub fn fit(target: &BoundarySpec, alpha: AlphaProfile, open: &OpenConstants, num: &FanNumerics) -> EmbeddabilityFit {
    let family = AnsatzFamily::new(scaled(0.3, alpha), &["c"]).unwrap();
    fit_embeddability(&scalar(), target, &family, Some(open), num, 1e-3, 50).unwrap()
}

pub fn fan(spec: &BoundarySpec, ansatz: &XAnsatz, num: &FanNumerics) -> CharacteristicFan {
    let samples = sample_boundary(spec, &num.zeta_grid).unwrap();
    let grid = ZetaGrid::new(&num.zeta_grid, &spec.zeta_box).unwrap();
    trace_fan(&scalar(), &samples, grid, ansatz, num.xi_max, num.steps).unwrap()
}

pub fn solve(spec: &BoundarySpec, ansatz: &XAnsatz, num: &FanNumerics) -> FieldSolution {
    FieldSolution::new(scalar(), fan(spec, ansatz, num), None).unwrap()
}

/// Solution traced with the fitted ansatz and the fitted boundary data.
pub fn solve_fitted(fit: &EmbeddabilityFit, target: &BoundarySpec, open: &OpenConstants, num: &FanNumerics) -> FieldSolution {
    let spec = fitted_boundary(fit, target, Some(open)).unwrap();
    let fan = fan(&spec, &fit.ansatz, num);
    FieldSolution::new(scalar(), fan, Some(fit.clone())).unwrap()
}

/// Reference field from an independent fine RK4 of the amplitude system.
pub fn reference(a0: f64, b0: f64, c: f64) -> ClosedForm {
    ClosedForm {
        oracle: AmplitudeOracle::new(a0, b0, c, 1.0, [-2.0, 3.0], 1e-4).unwrap(),
        alpha: 1.0,
    }
}
