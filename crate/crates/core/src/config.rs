//! JSON run configuration.
//!
//! ```json
//! {
//!   "material": { "a0": 23, "C": [[-0.5, 0], [0, -0.5]],
//!                 "perturbation": { "kind": "p_breaking" }, "delta": 6 },
//!   "mesh": { "N": 32, "L": 10 },
//!   "sweep": { "K": 33, "m": 25 }
//! }
//! ```
//!
//! Every other section and key is optional and falls back to the defaults
//! below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::eigensolver::SolverOptions;
use crate::error::{Error, Result};
use crate::lattice::K3Convention;
use crate::material::{BulkSpec, DomainWallSpec, PerturbationSpec, WallProfile};
use crate::mesh::Diagonal;
use crate::scalar::Real;
use crate::spectrum::{SweepConfig, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    PBreaking,
    CBreaking,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    Tanh,
    Algebraic,
}

/// Third dual vector used in the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum K3Kind {
    /// `k3 = -(k1 + k2)`.
    #[default]
    MinusSum,
    /// `k3 = k2 - k1`.
    Difference,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub a0: f64,
    #[serde(rename = "C")]
    pub c: [[f64; 2]; 2],
    pub perturbation: PerturbationConfig,
    pub delta: f64,
    #[serde(default = "one")]
    pub eta_infinity: f64,
    #[serde(default)]
    pub wall_profile: ProfileKind,
    #[serde(default)]
    pub k3: K3Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalKind {
    #[default]
    Regular,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default)]
    pub diagonal: DiagonalKind,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Probe momenta; the first drives classification.
    #[serde(default = "default_probes")]
    pub probe_k: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            k: default_k(),
            m: default_m(),
            probe_k: default_probes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    #[serde(default = "default_theta")]
    pub theta_c: f64,
    #[serde(default = "default_theta")]
    pub theta_b: f64,
    #[serde(default = "default_theta_gap")]
    pub theta_gap: f64,
}

impl Default for ClassifySection {
    fn default() -> Self {
        Self {
            theta_c: default_theta(),
            theta_b: default_theta(),
            theta_gap: default_theta_gap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(rename = "N_list", default = "default_n_list")]
    pub n_list: Vec<usize>,
    /// Defaults to `0.56π`, the projection of `0.28 k1`.
    #[serde(default = "default_convergence_k")]
    pub k_par: f64,
    #[serde(default = "default_convergence_bands")]
    pub bands: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            n_list: default_n_list(),
            k_par: default_convergence_k(),
            bands: default_convergence_bands(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_out_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}
fn default_quad_order() -> usize {
    crate::assembly::DEFAULT_QUAD_ORDER
}
fn default_k() -> usize {
    33
}
fn default_m() -> usize {
    25
}
fn default_probes() -> Vec<f64> {
    let p = 2.0 * std::f64::consts::PI / 3.0;
    vec![p, 2.0 * p]
}
fn default_tol() -> f64 {
    1e-9
}
fn default_max_iter() -> usize {
    500
}
fn default_seed() -> u64 {
    SolverOptions::<f64>::default().seed
}
fn default_theta() -> f64 {
    0.8
}
fn default_theta_gap() -> f64 {
    0.5
}
fn default_n_list() -> Vec<usize> {
    vec![16, 32, 64, 128]
}
fn default_convergence_k() -> f64 {
    0.56 * std::f64::consts::PI
}
fn default_convergence_bands() -> usize {
    6
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv]
}

fn range_error(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks on every numeric field.
    pub fn validate(&self) -> Result<()> {
        let m = &self.material;
        for (key, v) in [
            ("material.a0", m.a0),
            ("material.delta", m.delta),
            ("material.eta_infinity", m.eta_infinity),
        ] {
            if !v.is_finite() {
                return Err(range_error(key, format!("must be finite, got {v}")));
            }
        }
        if m.c.iter().flatten().any(|v| !v.is_finite()) {
            return Err(range_error("material.C", "entries must be finite"));
        }
        if m.delta < 0.0 {
            return Err(range_error(
                "material.delta",
                format!("must be non-negative, got {}", m.delta),
            ));
        }
        if m.eta_infinity <= 0.0 {
            return Err(range_error(
                "material.eta_infinity",
                format!("must be positive, got {}", m.eta_infinity),
            ));
        }
        if self.mesh.n < 2 {
            return Err(range_error(
                "mesh.N",
                format!("must be at least 2, got {}", self.mesh.n),
            ));
        }
        if self.mesh.l < 1 {
            return Err(range_error(
                "mesh.L",
                format!("must be at least 1, got {}", self.mesh.l),
            ));
        }
        if self.mesh.diagonal == DiagonalKind::Alternating && self.mesh.n % 2 == 1 {
            return Err(range_error("mesh.diagonal", "alternating diagonals need an even N"));
        }
        if !crate::assembly::quadrature::SUPPORTED_ORDERS.contains(&self.mesh.quad_order) || self.mesh.quad_order < 2 {
            return Err(range_error(
                "mesh.quad_order",
                format!("must be one of 2, 3, 4, 6, got {}", self.mesh.quad_order),
            ));
        }
        if self.sweep.k < 2 {
            return Err(range_error(
                "sweep.K",
                format!("must be at least 2, got {}", self.sweep.k),
            ));
        }
        if self.sweep.m < 1 {
            return Err(range_error("sweep.m", "must be at least 1"));
        }
        if let Some(p) = self.sweep.probe_k.iter().find(|p| !p.is_finite()) {
            return Err(range_error("sweep.probe_k", format!("must be finite, got {p}")));
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return Err(range_error(
                "solver.tol",
                format!("must lie in (0, 1), got {}", self.solver.tol),
            ));
        }
        if self.solver.max_iter < 1 {
            return Err(range_error("solver.max_iter", "must be at least 1"));
        }
        for (key, v) in [
            ("classify.theta_c", self.classify.theta_c),
            ("classify.theta_b", self.classify.theta_b),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(range_error(key, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.classify.theta_gap >= 0.0) || !self.classify.theta_gap.is_finite() {
            return Err(range_error("classify.theta_gap", "must be finite and non-negative"));
        }
        if self.convergence.bands < 1 {
            return Err(range_error("convergence.bands", "must be at least 1"));
        }
        if !self.convergence.k_par.is_finite() {
            return Err(range_error("convergence.k_par", "must be finite"));
        }
        if self.output.formats.is_empty() {
            return Err(range_error("output.formats", "must name at least one format"));
        }
        Ok(())
    }

    fn parts<T: Real>(&self) -> (BulkSpec<T>, PerturbationSpec<T>, T, T, WallProfile) {
        let m = &self.material;
        let bulk = BulkSpec {
            a0: T::lit(m.a0),
            c: m.c.map(|row| row.map(T::lit)),
        };
        let pert = match m.perturbation.kind {
            PerturbationKind::PBreaking => PerturbationSpec::PBreaking,
            PerturbationKind::CBreaking => PerturbationSpec::CBreaking,
        };
        let profile = match m.wall_profile {
            ProfileKind::Tanh => WallProfile::Tanh,
            ProfileKind::Algebraic => WallProfile::Algebraic,
        };
        (bulk, pert, T::lit(m.delta), T::lit(m.eta_infinity), profile)
    }

    /// Checked material; fails for `a0 ≤ 0`.
    pub fn spec<T: Real>(&self) -> Result<DomainWallSpec<T>> {
        let (bulk, pert, delta, eta, profile) = self.parts();
        let mut spec = DomainWallSpec::new(bulk, pert, delta, eta)?;
        spec.wall_profile = profile;
        Ok(spec.with_k3_convention(self.k3_convention()))
    }

    /// Material as written, for the validator.
    pub fn spec_unchecked<T: Real>(&self) -> DomainWallSpec<T> {
        let (bulk, pert, delta, eta, profile) = self.parts();
        let mut spec = DomainWallSpec::new_unchecked(bulk, pert, delta, eta);
        spec.wall_profile = profile;
        spec.with_k3_convention(self.k3_convention())
    }

    fn k3_convention(&self) -> K3Convention {
        match self.material.k3 {
            K3Kind::MinusSum => K3Convention::MinusSum,
            K3Kind::Difference => K3Convention::Difference,
        }
    }

    pub fn diagonal(&self) -> Diagonal {
        match self.mesh.diagonal {
            DiagonalKind::Regular => Diagonal::Regular,
            DiagonalKind::Alternating => Diagonal::Alternating,
        }
    }

    pub fn solver_options<T: Real>(&self) -> SolverOptions<T> {
        SolverOptions {
            tol: T::lit(self.solver.tol),
            max_iter: self.solver.max_iter,
            seed: self.solver.seed,
            shift: None,
        }
    }

    pub fn sweep_config<T: Real>(&self) -> SweepConfig<T> {
        let mut cfg = SweepConfig::new(self.sweep.k, self.sweep.m);
        cfg.probes = self.sweep.probe_k.iter().map(|&p| T::lit(p)).collect();
        cfg.thresholds = Thresholds {
            center: T::lit(self.classify.theta_c),
            boundary: T::lit(self.classify.theta_b),
            gap: T::lit(self.classify.theta_gap),
            ..Thresholds::default()
        };
        cfg.solver = self.solver_options();
        cfg
    }
}

/// Reads and validates a JSON configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}
