use bopp::concentration::*;
use bopp::energy::{energy, w_norm_sq, Nonlinearity, Potential, Problem, RadialProblem};
use bopp::fields::{GridSpec, RadialGrid, ScalarField};
use bopp::potential::constraint_value;

fn gs(mu: f64, f: Nonlinearity, c: f64) -> AutonomousGroundState {
    autonomous_ground_state(mu, f, c, &RadialConfig::default()).unwrap()
}

#[test]
fn cutoff_plateau_and_support() {
    let cut = CutoffSpec::new(3.0).unwrap();
    assert_eq!(cut.eta(0.0), 1.0);
    assert_eq!(cut.eta(1.5), 1.0);
    assert_eq!(cut.eta(3.0), 0.0);
    assert_eq!(cut.eta(7.0), 0.0);
    let samples: Vec<f64> = (0..=400).map(|i| cut.eta(i as f64 * 0.01)).collect();
    assert!(samples.windows(2).all(|w| w[1] <= w[0]));
    assert!(cut.eta(2.2) > 0.0 && cut.eta(2.2) < 1.0);
    assert!(CutoffSpec::new(0.0).is_err());
    assert!(CutoffSpec::new(f64::NAN).is_err());
}

#[test]
fn ground_state_is_negative_and_certified() {
    for f in [Nonlinearity::zero(), Nonlinearity::one_sign(3.0, 1.0).unwrap(), Nonlinearity::odd_power(3.0, 1.0).unwrap()] {
        let s = gs(1.0, f, 1.0);
        assert!(s.converged, "{f:?}: residual {:e}", s.residual);
        assert!(s.residual <= 1e-8 * s.grad_norm.max(1.0));
        assert!(s.profile.values().iter().all(|&v| v <= 0.0), "{f:?}: profile has positive values");
        assert!(s.energy > 0.0 && s.lambda < 0.0);
        let g = s.radial_problem().unwrap().constraint(&s.profile).unwrap();
        assert!((g - 1.0).abs() <= 1e-8);
        if !matches!(f.family, bopp::energy::Family::OddPower) {
            assert!((s.energy - s.half_norm_sq).abs() <= 1e-14 * s.energy);
        }
    }
}

#[test]
fn regression_baseline_unit_mass() {
    let s = gs(1.0, Nonlinearity::zero(), 1.0);
    assert!((s.energy - 1.16272).abs() < 1e-4, "E = {}", s.energy);
    assert!((s.lambda + 2.0 * s.energy).abs() < 1e-8);
}

#[test]
fn ground_state_scales_with_level() {
    let one = gs(1.0, Nonlinearity::zero(), 1.0);
    for c in [0.25, 4.0] {
        let other = gs(1.0, Nonlinearity::zero(), c);
        assert!((other.energy - c.sqrt() * one.energy).abs() <= 1e-9 * other.energy);
        assert!((other.lambda - one.lambda / c.sqrt()).abs() <= 1e-9 * other.lambda.abs());
        let s = c.powf(0.25);
        let diff = one
            .profile
            .values()
            .iter()
            .zip(other.profile.values())
            .map(|(a, b)| (s * a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-8 * other.profile.values()[0].abs(), "profile mismatch {diff:e}");
    }
}

fn radial_problem() -> RadialProblem {
    RadialProblem::new(RadialGrid::new(400, 20.0).unwrap(), 1.0, Nonlinearity::zero(), 1.0).unwrap()
}

#[test]
fn symmetrization_of_decreasing_profile_is_identity() {
    let rp = radial_problem();
    let data: Vec<f64> = rp.grid().nodes().iter().map(|r| (-r * r / 4.0).exp()).collect();
    let s = symmetrization_test(&rp, &data).unwrap();
    assert!(s.holds);
    assert!((s.t_star - 1.0).abs() < 1e-12);
    assert!((s.energy_after - s.energy_before).abs() <= 1e-12 * s.energy_before);
}

#[test]
fn symmetrization_lowers_shell_energy() {
    let rp = radial_problem();
    let data: Vec<f64> = rp.grid().nodes().iter().map(|r| (-(r - 4.0).powi(2)).exp()).collect();
    let s = symmetrization_test(&rp, &data).unwrap();
    assert!(s.holds);
    assert!(s.energy_after < s.energy_before - 1e-3 * s.energy_before);
}

#[test]
fn symmetrization_rejects_zero() {
    let rp = radial_problem();
    assert!(symmetrization_test(&rp, &vec![0.0; rp.grid().len()]).is_err());
}

#[test]
fn rearrangement_sorts_by_volume() {
    let grid = RadialGrid::new(50, 5.0).unwrap();
    let v: Vec<f64> = grid.nodes().iter().map(|r| (r - 2.0).abs()).collect();
    let star = rearrange(&grid, &v);
    assert!(star.windows(2).all(|w| w[1] <= w[0]));
    let dec: Vec<f64> = grid.nodes().iter().map(|r| 5.0 - r).collect();
    assert_eq!(rearrange(&grid, &dec), dec);
}

#[test]
fn bump_without_cutoff_is_sampled_profile() {
    let s = gs(2.0, Nonlinearity::zero(), 1.0);
    let g = GridSpec::new(16, 12.0).unwrap();
    let cut = CutoffSpec::new(1e3).unwrap();
    let bump = make_bump(&s, 1.0, [0.0; 3], &cut, &g).unwrap();
    let direct = sample_profile(&s.profile, &g, [0.0; 3]);
    assert_eq!(bump.values(), direct.values());
    assert!(bump.values().iter().all(|&v| v <= 0.0));
}

#[test]
fn bump_follows_grid_shifts() {
    let s = gs(2.0, Nonlinearity::zero(), 1.0);
    let g = GridSpec::new(24, 9.0).unwrap();
    let h = g.spacing();
    let eps = 0.5;
    let cut = CutoffSpec::new(2.0).unwrap();
    let y = [2.0 * h * eps, -h * eps, 0.0];
    let at_y = make_bump(&s, eps, y, &cut, &g).unwrap();
    let moved = make_bump(&s, eps, [0.0; 3], &cut, &g).unwrap().shifted([2, -1, 0]);
    let diff = at_y.lin_comb(1.0, &moved, -1.0).unwrap().max_abs();
    assert!(diff < 1e-8 * at_y.max_abs(), "shift mismatch {diff:e}");
}

#[test]
fn bump_must_fit_the_box() {
    let s = gs(2.0, Nonlinearity::zero(), 1.0);
    let g = GridSpec::new(16, 6.0).unwrap();
    let cut = s.default_cutoff();
    assert!(matches!(make_bump(&s, 0.25, [1.0, 0.0, 0.0], &cut, &g), Err(bopp::Error::Geometry(_))));
    assert!(make_bump(&s, 0.0, [0.0; 3], &cut, &g).is_err());
}

#[test]
fn projected_bump_lies_on_the_negative_manifold() {
    let f = Nonlinearity::one_sign(3.0, 1.0).unwrap();
    let s = gs(2.0, f, 1.0);
    let g = GridSpec::new(24, 9.0).unwrap();
    let v = Potential::MultiWell { v0: 2.0, kappa: 0.25, centers: vec![[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]] };
    let p = Problem::new(g, v, 0.5, f, 1.0).unwrap();
    let cut = CutoffSpec::new(3.0).unwrap();
    let phi = make_phi(&p, &s, [0.5, 0.0, 0.0], &cut).unwrap();
    let c = constraint_value(p.kernel(), &phi).unwrap();
    assert!((c - 1.0).abs() <= 1e-10);
    assert!(phi.max() <= 0.0);
    let e = energy(&p, &phi).unwrap();
    assert!((e - 0.5 * w_norm_sq(&p, &phi).unwrap()).abs() <= 1e-13 * e);
}

#[test]
fn barycenter_of_even_field_is_origin() {
    let g = GridSpec::new(16, 8.0).unwrap();
    let u = ScalarField::from_fn(g, |[x, y, z]| -(-(x * x + 2.0 * y * y + 3.0 * z * z + x * y)).exp());
    let b = barycenter(&u, 1.0, f64::INFINITY).unwrap();
    for (a, v) in b.iter().enumerate() {
        assert!(v.abs() < 1e-12, "axis {a}: {v}");
    }
}

#[test]
fn barycenter_inside_truncation_is_scaled_centroid() {
    let g = GridSpec::new(16, 6.0).unwrap();
    let u = ScalarField::from_fn(g, |[x, y, z]| (-((x - 1.0).powi(2) + y * y + z * z)).exp());
    let eps = 0.5;
    let w: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let total: f64 = w.iter().sum();
    let cx: f64 = w.iter().enumerate().map(|(i, wi)| wi * eps * g.point(i)[0]).sum::<f64>() / total;
    let b = barycenter(&u, eps, 100.0).unwrap();
    assert!((b[0] - cx).abs() < 1e-12);
    let tight = barycenter(&u, eps, 0.1).unwrap();
    assert!(tight.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.1 + 1e-12);
    assert!(barycenter(&ScalarField::zeros(g), 1.0, 1.0).is_err());
}

#[test]
fn truncation_encloses_twice_the_cutoff() {
    let cut = CutoffSpec::new(2.0).unwrap();
    let rho = truncation_radius(&[[1.0, 0.0, 0.0], [0.0, -3.0, 4.0]], &cut);
    assert!((rho - 9.0).abs() < 1e-12);
    assert_eq!(truncate([3.0, 4.0, 0.0], 10.0), [3.0, 4.0, 0.0]);
    let t = truncate([3.0, 4.0, 0.0], 1.0);
    assert!((t[0] - 0.6).abs() < 1e-15 && (t[1] - 0.8).abs() < 1e-15);
}

#[test]
fn angular_variation_vanishes_for_radial_fields() {
    let g = GridSpec::new(24, 8.0).unwrap();
    let radial = ScalarField::from_fn(g, |[x, y, z]| (-(x * x + y * y + z * z) / 4.0).exp());
    assert!(angular_variation(&radial, [0.0; 3], 3.0, 6) < 1e-6);
    let skew = ScalarField::from_fn(g, |[x, y, z]| (-(x * x + 2.0 * y * y + z * z) / 4.0).exp());
    assert!(angular_variation(&skew, [0.0; 3], 3.0, 6) > 0.1);
}
