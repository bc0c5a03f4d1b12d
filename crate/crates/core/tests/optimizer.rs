use bopp::concentration::{autonomous_ground_state, make_phi, profile_distance, RadialConfig};
use bopp::energy::{energy, Nonlinearity, Potential, Problem, SignClass};
use bopp::fields::{GridSpec, ScalarField};
use bopp::optimizer::{minimize, multi_start, same_solution, SolveConfig};

fn problem(n: usize, l: f64, v0: f64, f: Nonlinearity) -> Problem {
    Problem::new(GridSpec::new(n, l).unwrap(), Potential::Constant { v0 }, 1.0, f, 1.0).unwrap()
}

fn gaussian(g: GridSpec, width: f64, sign: f64) -> ScalarField {
    ScalarField::from_fn(g, |[x, y, z]| sign * (-(x * x + y * y + z * z) / (width * width)).exp())
}

fn check_trajectory(rec: &bopp::optimizer::SolutionRecord) {
    let t = &rec.trajectory;
    assert!(t.is_monotone(), "energy increased along the run");
    assert!(t.constraint_dev <= 1e-10, "constraint drift {:e}", t.constraint_dev);
    assert!(t.tangency <= 1e-12, "tangency {:e}", t.tangency);
    let first = t.lp_norms[0];
    assert!(t.min_lp_norm() >= 0.5 * first, "L^12/5 norm collapsed: {} vs {first}", t.min_lp_norm());
}

#[test]
fn gaussian_start_matches_radial_ground_state() {
    let p = problem(48, 12.0, 2.0, Nonlinearity::zero());
    let gs = autonomous_ground_state(2.0, Nonlinearity::zero(), 1.0, &RadialConfig::default()).unwrap();
    let rec = minimize(&p, &gaussian(*p.grid(), 1.5, -1.0), &SolveConfig::default()).unwrap();
    assert!(rec.converged, "residual {:e}", rec.residual);
    rec.check_invariants(1.0, 1e-8).unwrap();
    check_trajectory(&rec);
    let dist = profile_distance(&rec.u, &gs.profile, rec.barycenter).unwrap();
    assert!(dist < 1e-3, "distance to radial profile {dist:e}");
    assert!((rec.energy - gs.energy).abs() / gs.energy < 1e-3);

    let again = minimize(&p, &rec.u, &SolveConfig::default()).unwrap();
    assert!(again.iterations <= 2, "fixed point took {} iterations", again.iterations);
    assert!(same_solution(&rec, &again, 1e-8));
    assert!((again.energy - rec.energy).abs() <= 1e-12 * rec.energy);
}

#[test]
fn one_sign_descent_stays_negative_and_is_deterministic() {
    let f = Nonlinearity::one_sign(3.0, 1.0).unwrap();
    let p = problem(24, 10.0, 2.0, f);
    let g = *p.grid();
    let start = ScalarField::from_fn(g, |[x, y, z]| -(-(x * x / 2.0 + y * y / 3.0 + z * z / 4.0)).exp());
    let a = minimize(&p, &start, &SolveConfig::default()).unwrap();
    let b = minimize(&p, &start, &SolveConfig::default()).unwrap();
    assert!(a.converged);
    check_trajectory(&a);
    assert_eq!(a.sign_class, SignClass::Negative);
    assert_eq!(a.u.values(), b.u.values());
    assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    assert!(a.energy <= energy(&p, &bopp::energy::project_to_manifold(&p, &start).unwrap().1).unwrap());
}

#[test]
fn odd_power_descent_converges_from_either_sign() {
    let f = Nonlinearity::odd_power(3.0, 1.0).unwrap();
    let p = problem(24, 10.0, 2.0, f);
    let g = *p.grid();
    let neg = minimize(&p, &gaussian(g, 1.5, -1.0), &SolveConfig::default()).unwrap();
    let pos = minimize(&p, &gaussian(g, 1.5, 1.0), &SolveConfig::default()).unwrap();
    assert!(neg.converged && pos.converged);
    assert_eq!(neg.sign_class, SignClass::Negative);
    assert_eq!(pos.sign_class, SignClass::Positive);
    assert!((neg.energy - pos.energy).abs() <= 1e-12 * neg.energy);
}

#[test]
fn descent_from_bump_does_not_raise_energy() {
    let f = Nonlinearity::zero();
    let gs = autonomous_ground_state(2.0, f, 1.0, &RadialConfig::default()).unwrap();
    let g = GridSpec::new(24, 9.0).unwrap();
    let v = Potential::MultiWell { v0: 2.0, kappa: 0.25, centers: vec![[0.5, 0.0, 0.0]] };
    let p = Problem::new(g, v, 0.5, f, 1.0).unwrap();
    let cut = bopp::concentration::CutoffSpec::new(3.0).unwrap();
    let phi = make_phi(&p, &gs, [0.5, 0.0, 0.0], &cut).unwrap();
    let rec = minimize(&p, &phi, &SolveConfig::default()).unwrap();
    assert!(rec.converged);
    assert!(rec.energy <= energy(&p, &phi).unwrap());
    check_trajectory(&rec);
}

#[test]
fn multi_start_merges_duplicates_and_flags_failures() {
    let p = problem(24, 10.0, 2.0, Nonlinearity::zero());
    let g = *p.grid();
    assert!(multi_start(&p, &[], &SolveConfig::default()).is_empty());

    let s = gaussian(g, 1.5, -1.0);
    let recs = multi_start(&p, &[s.clone(), s.clone()], &SolveConfig::default());
    assert_eq!(recs.len(), 1);

    let recs = multi_start(&p, &[ScalarField::zeros(g), s], &SolveConfig::default());
    assert_eq!(recs.len(), 2);
    assert!(recs[0].failure.is_none() && recs[0].converged);
    assert!(recs[1].failure.is_some());
}

#[test]
fn degenerate_start_is_rejected() {
    let p = problem(8, 5.0, 1.0, Nonlinearity::zero());
    assert!(minimize(&p, &ScalarField::zeros(*p.grid()), &SolveConfig::default()).is_err());
    let other = ScalarField::zeros(GridSpec::new(10, 5.0).unwrap());
    assert!(minimize(&p, &other, &SolveConfig::default()).is_err());
}

#[test]
fn solve_config_validation() {
    assert!(SolveConfig::default().validate().is_ok());
    for bad in [
        SolveConfig { tol_residual: 0.0, ..Default::default() },
        SolveConfig { max_iter: 0, ..Default::default() },
        SolveConfig { armijo_c: 1.0, ..Default::default() },
        SolveConfig { step_init: -1.0, ..Default::default() },
        SolveConfig { step_shrink: 1.0, ..Default::default() },
        SolveConfig { distinct_tol: 0.0, ..Default::default() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn iteration_cap_gives_flagged_record() {
    let p = problem(16, 7.0, 2.0, Nonlinearity::zero());
    let cfg = SolveConfig { max_iter: 2, ..Default::default() };
    let rec = minimize(&p, &gaussian(*p.grid(), 3.0, -1.0), &cfg).unwrap();
    assert!(!rec.converged);
    assert!(rec.failure.is_none());
    assert!(rec.check_invariants(1.0, 1e-8).is_err());
    assert!(rec.residual.is_finite());
}
