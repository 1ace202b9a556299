use std::f64::consts::PI;

use edgemode::assembly::{assemble, bloch_stiffness};
use edgemode::convergence::{fit_slope, run_study, StudyConfig};
use edgemode::eigensolver::{solve_gevp, SolverOptions};
use edgemode::material::{BulkSpec, DomainWallSpec, PerturbationSpec};
use edgemode::mesh::{build_dof_map, build_mesh, Diagonal};
use edgemode::scalar::cis;
use edgemode::spectrum::{classify_bands, sweep, Discretization, ProbeSolution, SweepConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tc1(delta: f64) -> DomainWallSpec<f64> {
    DomainWallSpec::new(BulkSpec::isotropic(23.0, -0.5), PerturbationSpec::PBreaking, delta, 1.0).unwrap()
}

fn unit() -> DomainWallSpec<f64> {
    DomainWallSpec::new(BulkSpec::isotropic(1.0, 0.0), PerturbationSpec::PBreaking, 0.0, 1.0).unwrap()
}

fn eigenvalues(spec: &DomainWallSpec<f64>, n: usize, l: usize, k: f64, m: usize) -> Vec<f64> {
    Discretization::with_defaults(spec.clone(), n, l)
        .unwrap()
        .solve(k, m, &SolverOptions::default())
        .unwrap()
        .eigenvalues
}

/// Observed order of `errs` against `h = 1/N`.
fn order(ns: &[usize], errs: &[f64]) -> f64 {
    let log_h: Vec<f64> = ns.iter().map(|&n| -(n as f64).ln()).collect();
    let log_e: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    fit_slope(&log_h, &log_e)
}

// For W = I and k = 0 the lowest mode is sin(π(τ2 + L)/2L), constant along
// v1. Its gradient is u'(τ2) k2/2π with |k2/2π|² = 4/3.
#[test]
fn unit_weight_ground_state_converges_to_the_analytic_value() {
    let l = 2;
    let exact = PI * PI / (3.0 * (l * l) as f64);
    let ns = [8, 16, 32];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| eigenvalues(&unit(), n, l, 0.0, 1)[0] - exact)
        .collect();
    assert!(errs.iter().all(|&e| e > 0.0), "{errs:?}");
    let slope = order(&ns, &errs);
    assert!((1.9..=2.1).contains(&slope), "slope {slope}, errors {errs:?}");
    // Richardson extrapolation of the h² model hits the analytic value.
    let extrapolated = exact + (4.0 * errs[2] - errs[1]) / 3.0;
    assert!(
        (extrapolated - exact).abs() < 0.05 * errs[2],
        "{extrapolated} vs {exact}"
    );
}

#[test]
fn refinement_never_raises_the_lowest_eigenvalues() {
    let spec = tc1(2.0);
    let k = 0.56 * PI;
    let mut prev: Option<Vec<f64>> = None;
    let mut gaps = Vec::new();
    let ns = [8, 16, 32];
    for &n in &ns {
        let disc = Discretization::with_defaults(spec.clone(), n, 1).unwrap();
        let r = disc.solve(k, 6, &SolverOptions::default()).unwrap();
        let rec: Vec<f64> = (0..6)
            .map(|b| {
                disc.mode_field(k, b, r.eigenvalues[b], &r.eigenvectors[b])
                    .unwrap()
                    .recovered_eigenvalue
            })
            .collect();
        if let Some(p) = &prev {
            for (coarse, fine) in p.iter().zip(&r.eigenvalues) {
                assert!(*fine <= coarse * (1.0 + 1e-9), "N = {n}: {fine} > {coarse}");
            }
        }
        gaps.push(r.eigenvalues[0] - rec[0]);
        prev = Some(r.eigenvalues);
    }
    // E - Ê is the squared gradient defect, which shrinks like h².
    let slope = order(&ns, &gaps);
    assert!((1.5..=2.5).contains(&slope), "correction slope {slope}, {gaps:?}");
}

#[test]
fn bloch_stiffness_is_a_pure_function_of_k() {
    let spec = tc1(6.0);
    let mesh = build_mesh::<f64>(8, 1).unwrap();
    let map = build_dof_map(&mesh);
    let ms = assemble(&mesh, &map, &spec, 4).unwrap();
    let k = 2.0 * PI / 3.0;
    let a = solve_gevp(&bloch_stiffness(&ms, k).s, &ms.m_mass, 6, &SolverOptions::default()).unwrap();
    let _ = bloch_stiffness(&ms, 1.0);
    let b = solve_gevp(&bloch_stiffness(&ms, k).s, &ms.m_mass, 6, &SolverOptions::default()).unwrap();
    assert_eq!(a.eigenvalues, b.eigenvalues);
}

// Complex conjugation maps the k problem to the -k problem exactly for real
// W. The shift to 2π - k multiplies by exp(2πiτ1), which P1 elements only
// represent up to O(h²).
#[test]
fn reflected_momentum_agrees_up_to_the_gauge_error() {
    let spec = tc1(6.0);
    let k = 2.0 * PI / 3.0;
    let diff = |n: usize| {
        let a = eigenvalues(&spec, n, 1, k, 3);
        let b = eigenvalues(&spec, n, 1, 2.0 * PI - k, 3);
        (a[0] - b[0]).abs()
    };
    let (d8, d16) = (diff(8), diff(16));
    assert!(d16 < d8 / 3.0, "{d8} {d16}");
}

#[test]
fn sweep_entries_do_not_depend_on_which_momenta_are_solved() {
    let disc = Discretization::with_defaults(tc1(6.0), 4, 2).unwrap();
    let mut cfg = SweepConfig::<f64>::new(17, 6);
    let full = sweep(&disc, &cfg).unwrap();
    cfg.window_only = true;
    let part = sweep(&disc, &cfg).unwrap();
    assert!(part.bands.k_index.len() < full.bands.k_index.len());
    for (row, &i) in part.bands.k_index.iter().enumerate() {
        for (a, b) in part.bands.points[row].iter().zip(&full.bands.points[i]) {
            assert_eq!(a.e_fem, b.e_fem);
            assert_eq!(a.e_recovered, b.e_recovered);
        }
    }
    assert_eq!(part.labels, full.labels);
}

#[test]
fn quadrature_order_four_is_converged() {
    let spec = tc1(6.0);
    let k = 2.0 * PI / 3.0;
    let solve = |q: usize| {
        Discretization::new(spec.clone(), 32, 10, Diagonal::Regular, q)
            .unwrap()
            .solve(k, 10, &SolverOptions::default())
            .unwrap()
            .eigenvalues
    };
    let (a, b) = (solve(4), solve(6));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-8 * y.abs(), "{x} vs {y}");
    }
}

#[test]
fn slopes_do_not_depend_on_the_seed() {
    let spec = tc1(2.0);
    let mut cfg = StudyConfig::desk();
    cfg.n_list = vec![8, 16, 32];
    cfg.l = 1;
    cfg.bands = 3;
    let a = run_study(&spec, &cfg).unwrap();
    cfg.solver.seed = 977;
    let b = run_study(&spec, &cfg).unwrap();
    for (x, y) in a.slopes.iter().zip(&b.slopes) {
        assert!((x.err_fem - y.err_fem).abs() < 0.1);
        assert!((x.err_recovered - y.err_recovered).abs() < 0.1);
        assert!((x.de_gradient - y.de_gradient).abs() < 0.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn recovered_eigenvalue_is_below_the_fem_eigenvalue(k in 0.0..2.0 * PI, delta in 0.0..6.0f64) {
        let disc = Discretization::with_defaults(tc1(delta), 8, 1).unwrap();
        let r = disc.solve(k, 6, &SolverOptions::default()).unwrap();
        for b in 0..6 {
            let f = disc.mode_field(k, b, r.eigenvalues[b], &r.eigenvectors[b]).unwrap();
            prop_assert!(f.recovered_eigenvalue <= f.eigenvalue);
            prop_assert!(f.correction >= 0.0);
        }
    }

    #[test]
    fn conjugate_momentum_gives_identical_bands(k in 0.0..PI) {
        let spec = tc1(6.0);
        let a = eigenvalues(&spec, 8, 1, k, 6);
        let b = eigenvalues(&spec, 8, 1, -k, 6);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs());
        }
    }

    #[test]
    fn classification_ignores_eigenvector_phases(seed in any::<u64>()) {
        let disc = Discretization::with_defaults(tc1(6.0), 4, 2).unwrap();
        let mut cfg = SweepConfig::<f64>::new(17, 8);
        cfg.window_only = true;
        cfg.probes.truncate(1);
        let r = sweep(&disc, &cfg).unwrap();
        let probe = &r.probes[0];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fields = probe
            .fields
            .iter()
            .map(|f| {
                let phase = cis(rng.gen_range(0.0..2.0 * PI));
                let v: Vec<_> = f.dofs.iter().map(|&z| z * phase).collect();
                disc.mode_field(probe.k_par, f.band, f.eigenvalue, &v).unwrap()
            })
            .collect::<Vec<_>>();
        for (a, b) in probe.fields.iter().zip(&fields) {
            prop_assert!((a.recovered_eigenvalue - b.recovered_eigenvalue).abs() <= 1e-10 * a.eigenvalue);
            prop_assert!((a.center_fraction - b.center_fraction).abs() <= 1e-12);
            prop_assert!((a.boundary_fraction - b.boundary_fraction).abs() <= 1e-12);
        }
        let rotated = ProbeSolution { k_par: probe.k_par, fields };
        let labels = classify_bands(&r.bands, &rotated, &cfg.thresholds);
        let classes: Vec<_> = labels.iter().map(|l| l.class).collect();
        let expected: Vec<_> = r.labels.iter().map(|l| l.class).collect();
        prop_assert_eq!(classes, expected);
    }
}
