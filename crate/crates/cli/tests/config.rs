use bopp_cli::config::{PotentialKind, StartKind};
use bopp_cli::experiments::{analyze_bifurcation, grid_for, BifurcationRow};
use bopp_cli::{CliError, RunConfig};

#[test]
fn defaults_validate_and_round_trip() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    let text = cfg.to_toml().unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
}

#[test]
fn partial_tables_keep_defaults() {
    let cfg = RunConfig::from_toml("seed = 9\n[problem]\nn = 16\n[problem.potential]\nkind = \"radial_coercive\"\n").unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.problem.n, 16);
    assert_eq!(cfg.problem.half_len, 10.0);
    assert_eq!(cfg.problem.potential.kind, PotentialKind::RadialCoercive);
    assert_eq!(cfg.experiment.start.kind, StartKind::Gaussian);
    assert!(cfg.build_problem().is_ok());
}

#[test]
fn validation_rejects_bad_inputs() {
    for body in [
        "[problem.nonlinearity]\nfamily = \"odd_power\"\np = 6.0\n",
        "[problem.nonlinearity]\nfamily = \"one_sign_power\"\np = 2.0\n",
        "[problem.potential]\nv0 = -1.0\n",
        "[problem.potential]\nkind = \"multi_well\"\n",
        "[problem.potential]\nkind = \"field\"\n",
        "[problem]\neps = 0.0\n",
        "[problem]\nc = -1.0\n",
        "[experiment]\nc = [1.0, 0.5]\n",
        "[experiment]\neps = []\n",
        "[experiment]\ncutoff = 0.0\n",
        "[experiment.start]\nkind = \"file\"\n",
        "[solver]\narmijo_c = 2.0\n",
        "threads = 0\n",
        "[morse]\nk = 0\n",
    ] {
        let err = RunConfig::from_toml(body).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{body}: {err}");
    }
    assert!(matches!(RunConfig::from_toml("[solver]\nbogus = 1\n"), Err(CliError::Parse(_))));
}

#[test]
fn zero_family_ignores_exponent() {
    let cfg = RunConfig::from_toml("[problem.nonlinearity]\nfamily = \"zero\"\np = 9.0\n").unwrap();
    assert!(cfg.nonlinearity().unwrap().is_zero());
}

#[test]
fn tracked_box_keeps_spacing() {
    let mut cfg = RunConfig::from_toml("[problem]\nn = 48\nhalf_len = 12.0\n[experiment]\nmargin = 12.0\n").unwrap();
    let centers = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
    let sizes: Vec<(usize, f64)> =
        [1.0, 0.5, 0.25].iter().map(|&e| grid_for(&cfg, &centers, e).map(|g| (g.n(), g.half_len())).unwrap()).collect();
    assert_eq!(sizes, vec![(52, 13.0), (56, 14.0), (64, 16.0)]);
    cfg.experiment.margin = None;
    assert_eq!(grid_for(&cfg, &centers, 0.25).unwrap().n(), 48);
}

fn row(c: f64, q: f64, lambda: f64) -> BifurcationRow {
    BifurcationRow {
        c,
        w_norm_sq: q * c.sqrt(),
        lambda,
        q,
        energy: 0.5 * q * c.sqrt(),
        f_term: 0.0,
        identity_error: 0.0,
        residual: 0.0,
        converged: true,
    }
}

#[test]
fn bifurcation_analysis_separates_constant_and_increasing() {
    let solve = bopp::optimizer::SolveConfig::default();
    let flat: Vec<_> = [0.25, 0.5, 1.0].iter().map(|&c: &f64| row(c, 4.0, -4.0 / c.sqrt())).collect();
    let a = analyze_bifurcation(&flat, &[], &solve);
    assert!(a.nondecreasing && !a.strictly_increasing);
    assert_eq!(a.q_spread, 0.0);
    assert!((a.lambda_slope + 0.5).abs() < 1e-12);
    assert_eq!(format!("{:?}", a.trend), "Divergent");

    let rising: Vec<_> = [0.25, 0.5, 1.0].iter().enumerate().map(|(i, &c)| row(c, 4.0 + i as f64, -1.0)).collect();
    let b = analyze_bifurcation(&rising, &[], &solve);
    assert!(b.strictly_increasing);
    assert_eq!(format!("{:?}", b.trend), "Bounded");

    let falling = vec![row(0.25, 4.0, -1.0), row(0.5, 3.0, -1.0)];
    assert!(!analyze_bifurcation(&falling, &[], &solve).nondecreasing);
}
