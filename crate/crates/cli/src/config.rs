//! Run configuration (JSON). Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

/// Tolerance names accepted in `numerics.tol`.
pub const TOLERANCE_KEYS: [&str; 6] = [
    "hj",
    "hamilton_first",
    "hamilton_second",
    "euler_lagrange",
    "closed_form",
    "derivatives",
];

/// Artifact names accepted in `outputs.emit`.
pub const EMIT_KEYS: [&str; 4] = ["fan", "solution", "fit", "residuals"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub boundary: BoundaryConfig,
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub fit: FitConfig,
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Seed for randomized checks.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `H = ½(Σ g_μ p_μ² + μ² y²)` with analytic derivatives.
    FreeScalar {
        n: usize,
        mu: f64,
        metric_diag: Option<Vec<f64>>,
    },
    /// The free-scalar Lagrangian, Legendre-transformed numerically.
    FreeScalarLagrangian {
        n: usize,
        mu: f64,
        metric_diag: Option<Vec<f64>>,
    },
}

impl ModelConfig {
    pub fn n(&self) -> usize {
        match self {
            ModelConfig::FreeScalar { n, .. } | ModelConfig::FreeScalarLagrangian { n, .. } => *n,
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            ModelConfig::FreeScalar { mu, .. } | ModelConfig::FreeScalarLagrangian { mu, .. } => *mu,
        }
    }

    pub fn metric(&self) -> Vec<f64> {
        match self {
            ModelConfig::FreeScalar { metric_diag, n, .. } | ModelConfig::FreeScalarLagrangian { metric_diag, n, .. } => {
                metric_diag.clone().unwrap_or_else(|| vec![1.0; *n])
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub surface: SurfaceConfig,
    pub zeta_box: Vec<[f64; 2]>,
    pub data: DataConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceConfig {
    /// `x^axis = 0` (axis counted from 1), parametrised by the other
    /// coordinates in order.
    CoordinatePlane { axis: usize, transverse: Option<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Sinusoid family with amplitudes `a(0) = a`, `b(0) = b`.
    CompatibleSinusoid { a: f64, b: f64, c: f64, mu: Option<f64> },
    /// Polynomials in `ζ¹`, coefficients in increasing degree.
    Polynomial { field: Vec<f64>, normal: Vec<f64> },
    /// CSV with header `zeta,psi,psihat`, relative to the config file.
    Csv { path: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnsatzConfig {
    Constant {
        a: Vec<f64>,
        #[serde(default)]
        free: Vec<String>,
    },
    ScaledDirection {
        direction: Vec<f64>,
        alpha: AlphaConfig,
        #[serde(default)]
        free: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaConfig {
    Constant { value: f64 },
    Sine { base: f64, amplitude: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Sinusoid amplitudes opened as unknowns: any of `"A"`, `"B"`.
    #[serde(default)]
    pub open_constants: Vec<String>,
    /// Coupling `c` of the candidate sinusoid family.
    #[serde(default)]
    pub data_coupling: f64,
    /// Initial values for the open constants; read off the data when absent.
    pub initial_constants: Option<Vec<f64>>,
    #[serde(default = "default_fit_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_fit_tol() -> f64 {
    1e-3
}

fn default_max_iter() -> usize {
    50
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            open_constants: Vec::new(),
            data_coupling: 0.0,
            initial_constants: None,
            tol: default_fit_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub xi_max: f64,
    pub steps: usize,
    pub zeta_grid: Vec<usize>,
    /// Finite-difference step of the verification suite.
    pub fd_step: Option<f64>,
    /// Verification grid; 20 per axis when absent.
    pub verify_resolution: Option<Vec<usize>>,
    /// Overrides of the default residual tolerances.
    #[serde(default)]
    pub tol: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Solution grid; 41 per axis when absent.
    pub grid_resolution: Option<Vec<usize>>,
    #[serde(default = "default_emit")]
    pub emit: Vec<String>,
}

fn default_dir() -> String {
    "hjfield-out".into()
}

fn default_emit() -> Vec<String> {
    EMIT_KEYS.iter().map(|s| s.to_string()).collect()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            grid_resolution: None,
            emit: default_emit(),
        }
    }
}

impl OutputConfig {
    pub fn emits(&self, what: &str) -> bool {
        self.emit.iter().any(|e| e == what)
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn verify_resolution(&self) -> Vec<usize> {
        self.numerics.verify_resolution.clone().unwrap_or_else(|| vec![20; self.n()])
    }

    pub fn grid_resolution(&self) -> Vec<usize> {
        self.outputs.grid_resolution.clone().unwrap_or_else(|| vec![41; self.n()])
    }

    fn validate(&self) -> Result<(), String> {
        let n = self.n();
        if n == 0 {
            return Err("model.n must be at least 1".into());
        }
        let num = &self.numerics;
        positive("numerics.xi_max", num.xi_max)?;
        if num.steps < 10 {
            return Err(format!("numerics.steps must be at least 10, got {}", num.steps));
        }
        if num.zeta_grid.len() + 1 != n || num.zeta_grid.iter().any(|&k| k < 3) {
            return Err(format!(
                "numerics.zeta_grid needs {} entries of at least 3, got {:?}",
                n - 1,
                num.zeta_grid
            ));
        }
        if self.boundary.zeta_box.len() + 1 != n {
            return Err(format!("boundary.zeta_box needs {} intervals", n - 1));
        }
        if let Some(h) = num.fd_step {
            positive("numerics.fd_step", h)?;
        }
        for (k, v) in &num.tol {
            if !TOLERANCE_KEYS.contains(&k.as_str()) {
                return Err(format!("unknown tolerance {k:?}; expected one of {TOLERANCE_KEYS:?}"));
            }
            positive(&format!("numerics.tol.{k}"), *v)?;
        }
        let res = self.verify_resolution();
        if res.len() != n || res.contains(&0) {
            return Err(format!("numerics.verify_resolution needs {n} positive entries"));
        }
        let grid = self.grid_resolution();
        if grid.len() != n || grid.iter().any(|&k| k < 2) {
            return Err(format!("outputs.grid_resolution needs {n} entries of at least 2"));
        }
        for e in &self.outputs.emit {
            if !EMIT_KEYS.contains(&e.as_str()) {
                return Err(format!("unknown output {e:?}; expected one of {EMIT_KEYS:?}"));
            }
        }
        positive("fit.tol", self.fit.tol)?;
        for c in &self.fit.open_constants {
            if c != "A" && c != "B" {
                return Err(format!("fit.open_constants accepts \"A\" and \"B\", got {c:?}"));
            }
        }
        if let Some(init) = &self.fit.initial_constants {
            if init.len() != self.fit.open_constants.len() {
                return Err("fit.initial_constants needs one value per open constant".into());
            }
        }
        let SurfaceConfig::CoordinatePlane { axis, transverse } = &self.boundary.surface;
        if *axis == 0 || *axis > n {
            return Err(format!("boundary.surface.axis must lie in 1..={n}, got {axis}"));
        }
        if transverse.as_ref().is_some_and(|t| t.len() != n) {
            return Err(format!("boundary.surface.transverse needs {n} components"));
        }
        let ansatz_len = match &self.ansatz {
            AnsatzConfig::Constant { a, .. } => a.len(),
            AnsatzConfig::ScaledDirection { direction, .. } => direction.len() + 1,
        };
        if ansatz_len != n {
            return Err(format!("ansatz does not match the base dimension {n}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "model": {"kind": "free_scalar", "n": 2, "mu": 1.0},
        "boundary": {
            "surface": {"kind": "coordinate_plane", "axis": 1},
            "zeta_box": [[0.0, 1.0]],
            "data": {"kind": "polynomial", "field": [0.0, 1.0], "normal": []}
        },
        "ansatz": {"kind": "scaled_direction", "direction": [0.0], "alpha": {"kind": "constant", "value": 1.0}, "free": ["c"]},
        "numerics": {"xi_max": 1.0, "steps": 100, "zeta_grid": [11]}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.fit.max_iter, 50);
        assert_eq!(cfg.verify_resolution(), vec![20, 20]);
        assert_eq!(cfg.grid_resolution(), vec![41, 41]);
        assert!(cfg.outputs.emits("fan"));
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn rejects_unknown_keys_everywhere() {
        let top = MINIMAL.replacen("\"numerics\"", "\"extra\": 1, \"numerics\"", 1);
        assert!(RunConfig::parse(&top).is_err());
        let nested = MINIMAL.replace("\"mu\": 1.0}", "\"mu\": 1.0, \"mass\": 2}");
        assert!(RunConfig::parse(&nested).is_err());
        let tagged = MINIMAL.replace("\"free\": [\"c\"]", "\"free\": [\"c\"], \"bogus\": true");
        assert!(RunConfig::parse(&tagged).is_err());
    }

    #[test]
    fn rejects_invalid_numerics() {
        assert!(RunConfig::parse(&MINIMAL.replace("\"steps\": 100", "\"steps\": 9")).is_err());
        assert!(RunConfig::parse(&MINIMAL.replace("[11]", "[2]")).is_err());
        let tol = MINIMAL.replace("\"zeta_grid\": [11]", "\"zeta_grid\": [11], \"tol\": {\"hj\": -1}");
        assert!(RunConfig::parse(&tol).is_err());
        let tol = MINIMAL.replace("\"zeta_grid\": [11]", "\"zeta_grid\": [11], \"tol\": {\"hjj\": 1}");
        assert!(RunConfig::parse(&tol).is_err());
        assert!(RunConfig::parse(&MINIMAL.replace("\"axis\": 1", "\"axis\": 3")).is_err());
        assert!(RunConfig::parse("{not json").is_err());
    }
}
