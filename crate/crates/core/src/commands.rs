//! The four CLI commands as library calls: each one reads a [`RunConfig`]
//! and writes its CSV files into a directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::convergence::{csv_err, run_study, ConvergenceReport, StudyConfig};
use crate::error::{Error, Result};
use crate::material::{validate_symmetries, SymmetryReport};
use crate::spectrum::{classify_bands, sweep, BandClass, BandLabel, Discretization, ModeField, SweepResult};
use crate::F;

pub const BANDS_HEADER: [&str; 8] = [
    "k_index",
    "k_par",
    "band",
    "E_fem",
    "E_recovered",
    "center_fraction",
    "boundary_fraction",
    "class",
];
pub const MODE_HEADER: [&str; 7] = ["tau1", "tau2", "x", "y", "re", "im", "abs"];

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn num(v: F) -> String {
    v.to_string()
}

pub fn discretization(cfg: &RunConfig) -> Result<Discretization<F>> {
    let spec = cfg.spec::<F>()?;
    spec.check_ellipticity()?;
    Discretization::new(spec, cfg.mesh.n, cfg.mesh.l, cfg.diagonal(), cfg.mesh.quad_order)
}

#[derive(Debug, Clone)]
pub struct BandsOutput {
    pub path: PathBuf,
    pub result: SweepResult<F>,
    /// Labels per probe, in probe order.
    pub probe_labels: Vec<Vec<BandLabel<F>>>,
}

impl BandsOutput {
    /// 1-based indices of the bands labeled `class` at the first probe.
    pub fn bands_of(&self, class: BandClass) -> Vec<usize> {
        self.result
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.class == class)
            .map(|(b, _)| b + 1)
            .collect()
    }
}

/// Runs the sweep and writes `bands.csv`: one row per `(k, band)` without
/// fractions or class, then one row per `(probe, band)` with a blank
/// `k_index`. Bands are numbered from 1.
pub fn cmd_bands(cfg: &RunConfig, out_dir: &Path) -> Result<BandsOutput> {
    let disc = discretization(cfg)?;
    let sc = cfg.sweep_config::<F>();
    let result = sweep(&disc, &sc)?;
    let probe_labels: Vec<Vec<BandLabel<F>>> = result
        .probes
        .iter()
        .map(|p| classify_bands(&result.bands, p, &sc.thresholds))
        .collect();

    let (path, file) = create(out_dir, "bands.csv")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(BANDS_HEADER).map_err(csv_err)?;
    let bands = &result.bands;
    for (row, (&ki, &k)) in bands.k_index.iter().zip(&bands.k_grid).enumerate() {
        if bands.failures.iter().any(|(i, _)| *i == ki) {
            continue;
        }
        for (b, p) in bands.points[row].iter().enumerate() {
            w.write_record([
                ki.to_string(),
                num(k),
                (b + 1).to_string(),
                num(p.e_fem),
                num(p.e_recovered),
                String::new(),
                String::new(),
                String::new(),
            ])
            .map_err(csv_err)?;
        }
    }
    for (probe, labels) in result.probes.iter().zip(&probe_labels) {
        for (b, f) in probe.fields.iter().enumerate() {
            w.write_record([
                String::new(),
                num(probe.k_par),
                (b + 1).to_string(),
                num(f.eigenvalue),
                num(f.recovered_eigenvalue),
                num(f.center_fraction),
                num(f.boundary_fraction),
                labels[b].class.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    if !bands.failures.is_empty() {
        let list: Vec<String> = bands
            .failures
            .iter()
            .map(|(i, e)| format!("k_index {i}: {e}"))
            .collect();
        return Err(Error::InvalidArgument(format!(
            "solver failed at {} k points (rows omitted from {}): {}",
            list.len(),
            path.display(),
            list.join("; ")
        )));
    }
    Ok(BandsOutput {
        path,
        result,
        probe_labels,
    })
}

/// File name used for a mode: `mode_k<k>_b<band>.csv`, `k` with 4 decimals.
pub fn mode_file_name(k_par: F, band: usize) -> String {
    format!("mode_k{k_par:.4}_b{band}.csv")
}

/// Writes one mode file per requested band (1-based) at `k_par`.
pub fn cmd_modes(cfg: &RunConfig, k_par: F, bands: &[usize], out_dir: &Path) -> Result<Vec<(PathBuf, ModeField<F>)>> {
    let disc = discretization(cfg)?;
    let n_dof = disc.map.n_dof;
    if bands.is_empty() {
        return Err(Error::InvalidArgument("no bands requested".into()));
    }
    if let Some(&b) = bands.iter().find(|&&b| b == 0 || b > n_dof) {
        return Err(Error::InvalidArgument(format!("band {b} out of range 1..={n_dof}")));
    }
    let top = bands.iter().copied().max().unwrap_or(1);
    let r = disc.solve(k_par, top, &cfg.solver_options())?;
    let mut written = Vec::with_capacity(bands.len());
    for &b in bands {
        let field = disc.mode_field(k_par, b - 1, r.eigenvalues[b - 1], &r.eigenvectors[b - 1])?;
        let (path, file) = create(out_dir, &mode_file_name(k_par, b))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(MODE_HEADER).map_err(csv_err)?;
        for (g, nd) in disc.mesh.nodes.iter().enumerate() {
            let z = field.nodal[disc.map.node_to_periodic[g]];
            w.write_record([
                num(nd.tau1),
                num(nd.tau2),
                num(nd.x.x),
                num(nd.x.y),
                num(z.re),
                num(z.im),
                num(z.norm()),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        written.push((path, field));
    }
    Ok(written)
}

/// Runs the refinement study and writes `convergence.csv` and, with three
/// or more meshes, `slopes.csv`.
pub fn cmd_converge(cfg: &RunConfig, n_list: Option<&[usize]>, out_dir: &Path) -> Result<ConvergenceReport<F>> {
    let spec = cfg.spec::<F>()?;
    spec.check_ellipticity()?;
    let study = StudyConfig {
        n_list: n_list.map_or_else(|| cfg.convergence.n_list.clone(), <[usize]>::to_vec),
        l: cfg.mesh.l,
        k_par: cfg.convergence.k_par,
        bands: cfg.convergence.bands,
        diagonal: cfg.diagonal(),
        quad_order: cfg.mesh.quad_order,
        solver: cfg.solver_options(),
    };
    let report = run_study(&spec, &study)?;
    let (_, file) = create(out_dir, "convergence.csv")?;
    report.write_errors(file)?;
    if !report.slopes.is_empty() {
        let (_, file) = create(out_dir, "slopes.csv")?;
        report.write_slopes(file)?;
    }
    Ok(report)
}

/// Symmetry and definiteness report of the configured material, without
/// rejecting a broken `a0` first.
pub fn cmd_validate(cfg: &RunConfig) -> Result<SymmetryReport> {
    validate_symmetries(&cfg.spec_unchecked::<F>(), 256, cfg.solver.seed)
}
