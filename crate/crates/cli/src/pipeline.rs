//! `run`, `verify` and `check-derivatives` on a parsed configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hjfield_core::boundary::{sample_boundary, BoundarySpec, ZetaGrid};
use hjfield_core::characteristics::{fmt_f64, read_fan_csv, trace_fan, write_fan_csv, CharacteristicFan};
use hjfield_core::embeddability::{
    data_magnitude, embeddability_residual, fit_embeddability, fitted_boundary, AlphaProfile, AnsatzFamily,
    EmbeddabilityFit, FanNumerics, FitReport, OpenConstants, XAnsatz,
};
use hjfield_core::model::{
    check_derivatives, free_scalar_lagrangian, hamiltonian_from_lagrangian, make_free_scalar_with_metric,
    FreeScalarParams, HamiltonianModel, LagrangianModel, LEGENDRE_TOL,
};
use hjfield_core::presets::{plane_boundary, sinusoid_constants, DataFamily, PlaneGeometry};
use hjfield_core::reconstruct::{export_grid, FieldSolution};
use hjfield_core::sinusoid::AmplitudeOracle;
use hjfield_core::verify::{
    default_tolerances, run_suite_detailed, write_residual_csv, ClosedForm, ResidualReport, SuiteSettings,
};
use hjfield_core::Error;
use serde::Serialize;

use crate::config::{AlphaConfig, AnsatzConfig, DataConfig, ModelConfig, RunConfig, SurfaceConfig};

pub const FAN_FILE: &str = "fan.csv";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const SOLUTION_META_FILE: &str = "solution_meta.json";
pub const FIT_FILE: &str = "fit.json";
pub const EMBEDDABILITY_FILE: &str = "embeddability_residual.csv";
pub const RESIDUALS_FILE: &str = "residuals.json";
pub const RESIDUAL_GRID_FILE: &str = "residual_grid.csv";
pub const VERIFY_FILE: &str = "verify_report.json";
pub const VERIFY_GRID_FILE: &str = "verify_residual_grid.csv";

/// Samples and finite-difference step of `check-derivatives`.
const DERIVATIVE_SAMPLES: usize = 200;
const DERIVATIVE_EPS: f64 = 1e-5;
const DERIVATIVE_TOL: f64 = 1e-6;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    MissingArtifact(PathBuf),
    BadArtifact { path: PathBuf, source: Error },
    Numerical { stage: &'static str, source: Error },
    Io { path: PathBuf, source: std::io::Error },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 64,
            Failure::BadArtifact { .. } => 65,
            Failure::MissingArtifact(_) => 66,
            Failure::Numerical { .. } | Failure::Io { .. } => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "config error: {msg}"),
            Failure::MissingArtifact(p) => write!(f, "missing artifact: {}", p.display()),
            Failure::BadArtifact { path, source } => write!(f, "unreadable artifact {}: {source}", path.display()),
            Failure::Numerical { stage, source } => write!(f, "numerical failure in {stage}: {source}"),
            Failure::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Failure {}

fn numerical(stage: &'static str) -> impl Fn(Error) -> Failure {
    move |source| Failure::Numerical { stage, source }
}

fn config(stage: &'static str) -> impl Fn(Error) -> Failure {
    move |e| Failure::Config(format!("{stage}: {e}"))
}

/// How a run or verification ended.
#[derive(Debug)]
pub enum Outcome {
    Verified(ResidualReport),
    /// Residual checks ran but some exceeded their tolerance.
    Unverified(ResidualReport),
    Incompatible(FitReport),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Verified(_) => 0,
            Outcome::Unverified(_) => 1,
            Outcome::Incompatible(_) => 2,
        }
    }

    fn from_report(report: ResidualReport) -> Self {
        if report.passed {
            Outcome::Verified(report)
        } else {
            Outcome::Unverified(report)
        }
    }
}

/// Everything derived from the configuration before any tracing.
pub struct Setup {
    pub model: HamiltonianModel,
    pub lagrangian: LagrangianModel,
    pub target: BoundarySpec,
    pub family: AnsatzFamily,
    pub constants: Option<OpenConstants>,
    pub numerics: FanNumerics,
    pub closed_form: Option<ClosedForm>,
    pub tolerance_scale: f64,
    pub tolerances: BTreeMap<String, f64>,
}

fn build_model(cfg: &ModelConfig) -> Result<(HamiltonianModel, LagrangianModel), Failure> {
    let (n, mu, metric) = (cfg.n(), cfg.mu(), cfg.metric());
    let lagrangian = free_scalar_lagrangian(n, mu, &metric).map_err(config("model"))?;
    let model = match cfg {
        ModelConfig::FreeScalar { .. } => {
            let params = FreeScalarParams::new(mu).map_err(config("model"))?;
            make_free_scalar_with_metric(n, params, &metric).map_err(config("model"))?
        }
        ModelConfig::FreeScalarLagrangian { .. } => {
            hamiltonian_from_lagrangian(&lagrangian, LEGENDRE_TOL).map_err(config("model"))?
        }
    };
    Ok((model, lagrangian))
}

fn build_data(cfg: &RunConfig, base_dir: &Path) -> Result<DataFamily, Failure> {
    Ok(match &cfg.boundary.data {
        DataConfig::CompatibleSinusoid { a, b, c, mu } => DataFamily::Sinusoid {
            a0: *a,
            b0: *b,
            c: *c,
            mu: mu.unwrap_or(cfg.model.mu()),
        },
        DataConfig::Polynomial { field, normal } => DataFamily::Polynomial {
            field: field.clone(),
            normal: normal.clone(),
        },
        DataConfig::Csv { path } => {
            let full = base_dir.join(path);
            let file = File::open(&full).map_err(|_| Failure::MissingArtifact(full.clone()))?;
            DataFamily::read_tabulated(file).map_err(|source| Failure::BadArtifact { path: full, source })?
        }
    })
}

fn build_ansatz(cfg: &AnsatzConfig) -> Result<AnsatzFamily, Failure> {
    let (ansatz, free) = match cfg {
        AnsatzConfig::Constant { a, free } => (XAnsatz::Constant { a: a.clone() }, free),
        AnsatzConfig::ScaledDirection { direction, alpha, free } => {
            let alpha = match *alpha {
                AlphaConfig::Constant { value } => AlphaProfile::Constant { value },
                AlphaConfig::Sine { base, amplitude } => AlphaProfile::Sine { base, amplitude },
            };
            (
                XAnsatz::ScaledDirection {
                    direction: direction.clone(),
                    alpha,
                },
                free,
            )
        }
    };
    let names: Vec<&str> = free.iter().map(String::as_str).collect();
    AnsatzFamily::new(ansatz, &names).map_err(config("ansatz"))
}

fn unit_metric_scalar(cfg: &RunConfig) -> bool {
    cfg.n() == 2 && cfg.model.metric().iter().all(|g| *g == 1.0)
}

/// Open subset of the sinusoid amplitudes, the rest held at their initial
/// values.
fn build_constants(cfg: &RunConfig, geom: &PlaneGeometry, target: &BoundarySpec) -> Result<Option<OpenConstants>, Failure> {
    let open = &cfg.fit.open_constants;
    if open.is_empty() {
        return Ok(None);
    }
    if !unit_metric_scalar(cfg) || cfg.model.mu() <= 0.0 {
        return Err(Failure::Config(
            "fit.open_constants needs a two-dimensional free scalar with unit metric and positive mass".into(),
        ));
    }
    let full = sinusoid_constants(geom, target, cfg.fit.data_coupling, cfg.model.mu()).map_err(config("fit"))?;
    let slots: Vec<usize> = open
        .iter()
        .map(|name| full.names.iter().position(|n| n == name).expect("validated constant name"))
        .collect();
    let initial = match &cfg.fit.initial_constants {
        Some(v) => v.clone(),
        None => slots.iter().map(|&k| full.initial[k]).collect(),
    };
    let base = full.initial.clone();
    let build = full.build.clone();
    let fill = slots.clone();
    Ok(Some(OpenConstants {
        names: open.clone(),
        initial,
        build: std::sync::Arc::new(move |vals: &[f64]| {
            let mut all = base.clone();
            for (slot, v) in fill.iter().zip(vals) {
                all[*slot] = *v;
            }
            build(&all)
        }),
    }))
}

/// Reference solution for sinusoid data on `x¹ = 0` with unit transverse.
fn build_closed_form(cfg: &RunConfig) -> Result<Option<ClosedForm>, Failure> {
    let DataConfig::CompatibleSinusoid { a, b, c, mu } = cfg.boundary.data else {
        return Ok(None);
    };
    let SurfaceConfig::CoordinatePlane { axis, transverse } = &cfg.boundary.surface;
    let mu_data = mu.unwrap_or(cfg.model.mu());
    let unit_transverse = transverse.as_ref().is_none_or(|t| t.as_slice() == [1.0, 0.0]);
    if !unit_metric_scalar(cfg) || *axis != 1 || !unit_transverse || mu_data != cfg.model.mu() {
        return Ok(None);
    }
    let [lo, hi] = cfg.boundary.zeta_box[0];
    let oracle = AmplitudeOracle::new(a, b, c, mu_data, [lo - 1.0, hi + 1.0], 1e-4).map_err(config("boundary"))?;
    Ok(Some(ClosedForm { oracle, alpha: 1.0 }))
}

impl Setup {
    pub fn build(cfg: &RunConfig, base_dir: &Path) -> Result<Self, Failure> {
        let (model, lagrangian) = build_model(&cfg.model)?;
        let SurfaceConfig::CoordinatePlane { axis, transverse } = &cfg.boundary.surface;
        let mut geom = PlaneGeometry::new(cfg.n(), axis - 1, cfg.boundary.zeta_box.clone()).map_err(config("boundary"))?;
        if let Some(t) = transverse {
            geom = geom.with_transverse(t.clone()).map_err(config("boundary"))?;
        }
        let data = build_data(cfg, base_dir)?;
        let target = plane_boundary(&geom, &data).map_err(config("boundary"))?;
        let family = build_ansatz(&cfg.ansatz)?;
        let constants = build_constants(cfg, &geom, &target)?;
        let numerics = FanNumerics {
            zeta_grid: cfg.numerics.zeta_grid.clone(),
            xi_max: cfg.numerics.xi_max,
            steps: cfg.numerics.steps,
        };
        let samples = sample_boundary(&target, &numerics.zeta_grid).map_err(config("boundary"))?;
        let mut tolerances = default_tolerances();
        for (k, v) in &cfg.numerics.tol {
            if tolerances.contains_key(k) {
                tolerances.insert(k.clone(), *v);
            }
        }
        Ok(Self {
            model,
            lagrangian,
            target,
            family,
            constants,
            numerics,
            closed_form: build_closed_form(cfg)?,
            tolerance_scale: data_magnitude(&samples),
            tolerances,
        })
    }

    fn suite_settings(&self, cfg: &RunConfig) -> SuiteSettings {
        SuiteSettings {
            resolution: cfg.verify_resolution(),
            fd_step: cfg.numerics.fd_step,
            tolerances: self.tolerances.clone(),
            tolerance_scale: self.tolerance_scale,
        }
    }

    fn grid(&self) -> Result<ZetaGrid, Failure> {
        ZetaGrid::new(&self.numerics.zeta_grid, &self.target.zeta_box).map_err(config("numerics"))
    }

    fn trace(&self, spec: &BoundarySpec, ansatz: &XAnsatz) -> Result<CharacteristicFan, Error> {
        let samples = sample_boundary(spec, &self.numerics.zeta_grid)?;
        let grid = ZetaGrid::new(&self.numerics.zeta_grid, &spec.zeta_box)?;
        trace_fan(&self.model, &samples, grid, ansatz, self.numerics.xi_max, self.numerics.steps)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|source| Failure::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), Failure> {
    w.flush().map_err(|source| Failure::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    fs::write(path, text).map_err(|source| Failure::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_with(path: &Path, stage: &'static str, f: impl FnOnce(&mut BufWriter<File>) -> hjfield_core::Result<()>) -> Result<(), Failure> {
    let mut w = create(path)?;
    f(&mut w).map_err(numerical(stage))?;
    finish(path, w)
}

/// Boundary-direction residual per trajectory and step.
fn write_embeddability_csv(model: &HamiltonianModel, fan: &CharacteristicFan, out: &mut impl Write) -> hjfield_core::Result<()> {
    let res = embeddability_residual(model, fan);
    let mut wtr = csv::Writer::from_writer(out);
    let width = res.points.first().map_or(0, |p| p.values.len());
    let mut header: Vec<String> = vec!["zeta_index".into(), "xi_index".into()];
    header.extend((1..=fan.grid.axes()).map(|k| format!("zeta{k}")));
    header.push("xi".into());
    header.extend((1..=width).map(|k| format!("R{k}")));
    wtr.write_record(&header)?;
    for p in &res.points {
        let mut rec = vec![p.zeta_index.to_string(), p.xi_index.to_string()];
        rec.extend(fan.zeta(p.zeta_index).into_iter().map(fmt_f64));
        rec.push(fmt_f64(fan.xi_at(p.xi_index)));
        rec.extend(p.values.iter().map(|v| fmt_f64(*v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FitOutput<'a> {
    #[serde(flatten)]
    report: &'a FitReport,
    open_constants: &'a [String],
    constants: &'a [f64],
    /// Per-point residual CSV beside this file; absent when the fitted data
    /// could not be traced.
    residual_csv: Option<&'static str>,
}

fn write_fit(cfg: &RunConfig, setup: &Setup, fit: &EmbeddabilityFit, fan: Option<&CharacteristicFan>, out_dir: &Path) -> Result<(), Failure> {
    let residual_csv = match fan {
        Some(fan) => {
            write_with(&out_dir.join(EMBEDDABILITY_FILE), "embeddability", |w| {
                write_embeddability_csv(&setup.model, fan, w)
            })?;
            Some(EMBEDDABILITY_FILE)
        }
        None => None,
    };
    write_json(
        &out_dir.join(FIT_FILE),
        &FitOutput {
            report: &fit.report(),
            open_constants: &cfg.fit.open_constants,
            constants: &fit.constants,
            residual_csv,
        },
    )
}

fn write_suite(
    setup: &Setup,
    cfg: &RunConfig,
    sol: &FieldSolution,
    json: &Path,
    grid: &Path,
) -> Result<ResidualReport, Failure> {
    let suite = run_suite_detailed(
        &setup.model,
        Some(&setup.lagrangian),
        sol,
        setup.closed_form.as_ref(),
        &setup.suite_settings(cfg),
    )
    .map_err(numerical("verify"))?;
    write_json(json, &suite.report)?;
    write_with(grid, "verify", |w| write_residual_csv(&suite.points, w))?;
    Ok(suite.report)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|source| Failure::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Fits, traces, reconstructs and verifies. `base_dir` resolves relative data
/// paths in the configuration.
pub fn run(cfg: &RunConfig, base_dir: &Path, out_dir: &Path) -> Result<Outcome, Failure> {
    let setup = Setup::build(cfg, base_dir)?;
    ensure_dir(out_dir)?;
    let emits = |what| cfg.outputs.emits(what);

    let fit = fit_embeddability(
        &setup.model,
        &setup.target,
        &setup.family,
        setup.constants.as_ref(),
        &setup.numerics,
        cfg.fit.tol,
        cfg.fit.max_iter,
    )
    .map_err(numerical("embeddability"))?;
    let spec = fitted_boundary(&fit, &setup.target, setup.constants.as_ref()).map_err(numerical("embeddability"))?;
    let fan = setup.trace(&spec, &fit.ansatz);

    if !fit.compatible {
        if emits("fit") {
            write_fit(cfg, &setup, &fit, fan.as_ref().ok(), out_dir)?;
        }
        return Ok(Outcome::Incompatible(fit.report()));
    }
    let fan = fan.map_err(numerical("characteristics"))?;
    if emits("fit") {
        write_fit(cfg, &setup, &fit, Some(&fan), out_dir)?;
    }
    if emits("fan") {
        write_with(&out_dir.join(FAN_FILE), "characteristics", |w| write_fan_csv(&fan, w))?;
    }

    let sol = FieldSolution::new(setup.model.clone(), fan, Some(fit)).map_err(numerical("reconstruct"))?;
    if emits("solution") {
        let path = out_dir.join(SOLUTION_FILE);
        let mut w = create(&path)?;
        let meta = export_grid(&sol, &cfg.grid_resolution(), None, &mut w).map_err(numerical("reconstruct"))?;
        finish(&path, w)?;
        write_json(&out_dir.join(SOLUTION_META_FILE), &meta)?;
    }

    let report = if emits("residuals") {
        write_suite(&setup, cfg, &sol, &out_dir.join(RESIDUALS_FILE), &out_dir.join(RESIDUAL_GRID_FILE))?
    } else {
        run_suite_detailed(
            &setup.model,
            Some(&setup.lagrangian),
            &sol,
            setup.closed_form.as_ref(),
            &setup.suite_settings(cfg),
        )
        .map_err(numerical("verify"))?
        .report
    };
    Ok(Outcome::from_report(report))
}

/// Reruns the residual suite on a stored fan without retracing.
pub fn verify(cfg: &RunConfig, base_dir: &Path, solution_dir: &Path) -> Result<Outcome, Failure> {
    let setup = Setup::build(cfg, base_dir)?;
    let path = solution_dir.join(FAN_FILE);
    let file = File::open(&path).map_err(|_| Failure::MissingArtifact(path.clone()))?;
    let fan = read_fan_csv(file, setup.grid()?, cfg.n(), setup.target.r)
        .map_err(|source| Failure::BadArtifact { path: path.clone(), source })?;
    let sol = FieldSolution::new(setup.model.clone(), fan, None).map_err(numerical("reconstruct"))?;
    let report = write_suite(
        &setup,
        cfg,
        &sol,
        &solution_dir.join(VERIFY_FILE),
        &solution_dir.join(VERIFY_GRID_FILE),
    )?;
    Ok(Outcome::from_report(report))
}

/// Largest analytic-versus-difference derivative gap and its tolerance.
pub fn derivative_check(cfg: &RunConfig) -> Result<(f64, f64), Failure> {
    let (model, _) = build_model(&cfg.model)?;
    let worst = check_derivatives(&model, DERIVATIVE_SAMPLES, DERIVATIVE_EPS, cfg.seed);
    let tol = cfg.numerics.tol.get("derivatives").copied().unwrap_or(DERIVATIVE_TOL);
    Ok((worst, tol))
}
