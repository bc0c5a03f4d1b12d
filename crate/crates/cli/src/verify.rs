//! Self-check suite: potential oracle, scaling laws, finite-difference
//! derivative checks and the symmetrization inequality.

use std::io::Write;

use bopp::concentration::symmetrization_test;
use bopp::energy::{
    constraint_gradient, energy, euclidean_gradient, hessian_apply, lagrange_multiplier, project_to_manifold, Nonlinearity,
    Potential, Problem, RadialProblem,
};
use bopp::fields::{GridSpec, RadialGrid, ScalarField};
use bopp::potential::{constraint_value, kernel, solve_potential, solve_potential_direct, KernelPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub quick: bool,
    pub seed: u64,
    /// Multiply the kernel by `1 + fault`; a test hook.
    pub kernel_fault: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check { name: name.into(), value, tol, pass: value <= tol }
    }
}

fn rel_max(a: &ScalarField, b: &ScalarField) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    a.lin_comb(1.0, b, -1.0).map(|d| d.max_abs() / scale).unwrap_or(f64::INFINITY)
}

/// Sum of Gaussian blobs with random centres, widths and signed amplitudes.
pub fn random_blobs(grid: GridSpec, rng: &mut impl Rng, count: usize, signed: bool) -> ScalarField {
    let reach = 0.3 * grid.half_len();
    let blobs: Vec<(f64, [f64; 3], f64)> = (0..count)
        .map(|_| {
            let a = if signed && rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.3..1.0);
            let c = [0, 1, 2].map(|_| rng.random_range(-reach..reach));
            (a, c, rng.random_range(0.8..1.5))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        blobs
            .iter()
            .map(|(a, c, w)| a * (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)) / (w * w)).exp())
            .sum()
    })
}

/// Central-difference step used by the derivative checks.
pub const FD_STEP: f64 = 1e-5;

/// `|I′(u)[v] − (I(u+δv) − I(u−δv))/2δ|` relative to `|I′(u)[v]|`.
pub fn gradient_fd_error(p: &Problem, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    let exact = euclidean_gradient(p, u)?.dot(v)?;
    let fd = (energy(p, &u.lin_comb(1.0, v, FD_STEP)?)? - energy(p, &u.lin_comb(1.0, v, -FD_STEP)?)?) / (2.0 * FD_STEP);
    Ok((exact - fd).abs() / exact.abs())
}

/// The same test for `G′(u)[v] = 4∫φ_u u v`.
pub fn constraint_fd_error(p: &Problem, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    let exact = 4.0 * constraint_gradient(p, u)?.dot(v)?;
    let g = |w: ScalarField| constraint_value(p.kernel(), &w);
    let fd = (g(u.lin_comb(1.0, v, FD_STEP)?)? - g(u.lin_comb(1.0, v, -FD_STEP)?)?) / (2.0 * FD_STEP);
    Ok((exact - fd).abs() / exact.abs())
}

/// `‖Hv − (∇L(u+δv) − ∇L(u−δv))/2δ‖ / ‖Hv‖` for the Lagrangian gradient
/// `∇L = g + λφ_u u`.
pub fn hessian_fd_error(p: &Problem, u: &ScalarField, lambda: f64, v: &ScalarField) -> Result<f64> {
    let hv = hessian_apply(p, u, lambda, v)?;
    let grad = |w: &ScalarField| -> Result<ScalarField> {
        Ok(euclidean_gradient(p, w)?.lin_comb(1.0, &constraint_gradient(p, w)?, lambda)?)
    };
    let plus = grad(&u.lin_comb(1.0, v, FD_STEP)?)?;
    let minus = grad(&u.lin_comb(1.0, v, -FD_STEP)?)?;
    let fd = plus.lin_comb(0.5 / FD_STEP, &minus, -0.5 / FD_STEP)?;
    Ok(hv.lin_comb(1.0, &fd, -1.0)?.norm_l2() / hv.norm_l2())
}

fn plan(grid: GridSpec, opts: &VerifyOptions) -> KernelPlan {
    match opts.kernel_fault {
        Some(f) => KernelPlan::with_kernel(grid, move |r| kernel(r) * (1.0 + f)),
        None => KernelPlan::new(grid),
    }
}

fn families() -> Vec<(&'static str, Nonlinearity)> {
    vec![
        ("zero", Nonlinearity::zero()),
        ("one_sign", Nonlinearity::one_sign(3.0, 1.0).expect("valid exponent")),
        ("odd_power", Nonlinearity::odd_power(4.0, 0.5).expect("valid exponent")),
    ]
}

pub fn run_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();

    let sizes: &[usize] = if opts.quick { &[12] } else { &[12, 16] };
    for &n in sizes {
        let g = GridSpec::new(n, 6.0)?;
        let pl = plan(g, opts);
        let u = random_blobs(g, &mut rng, 3, true);
        let fast = solve_potential(&pl, &u)?;
        out.push(Check::at_most(format!("potential oracle n={n}"), rel_max(&fast, &solve_potential_direct(&u)?), 1e-10));
    }

    let g = GridSpec::new(12, 6.0)?;
    let pl = plan(g, opts);
    let u = random_blobs(g, &mut rng, 3, true);
    let phi = solve_potential(&pl, &u)?;
    out.push(Check { name: "potential nonnegative".into(), value: phi.min(), tol: 0.0, pass: phi.min() >= 0.0 });
    let g1 = constraint_value(&pl, &u)?;
    let mut hom: f64 = 0.0;
    let mut quad: f64 = 0.0;
    for t in [0.5, 2.0, 3.0] {
        let ut = u.scaled(t);
        hom = hom.max((constraint_value(&pl, &ut)? - t.powi(4) * g1).abs() / (t.powi(4) * g1));
        quad = quad.max(rel_max(&solve_potential(&pl, &ut)?, &phi.scaled(t * t)));
    }
    out.push(Check::at_most("constraint quartic scaling", hom, 1e-12));
    out.push(Check::at_most("potential quadratic scaling", quad, 1e-12));

    let wells = Potential::MultiWell { v0: 1.0, kappa: 0.5, centers: vec![[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]] };
    for (name, f) in families() {
        let p = Problem::with_kernel(g, wells.clone(), 0.7, f, 1.0, plan(g, opts))?;
        let u = random_blobs(g, &mut rng, 2, true);
        let v = random_blobs(g, &mut rng, 2, true);
        out.push(Check::at_most(format!("energy gradient vs differences ({name})"), gradient_fd_error(&p, &u, &v)?, 1e-6));
        out.push(Check::at_most(format!("constraint gradient vs differences ({name})"), constraint_fd_error(&p, &u, &v)?, 1e-6));
        let lambda = lagrange_multiplier(&p, &u)?;
        out.push(Check::at_most(format!("hessian vs gradient differences ({name})"), hessian_fd_error(&p, &u, lambda, &v)?, 1e-5));

        let (t, on) = project_to_manifold(&p, &u)?;
        let c = constraint_value(p.kernel(), &on)?;
        out.push(Check::at_most(format!("projection hits the level ({name})"), (c - 1.0).abs(), 1e-12));
        let (t2, _) = project_to_manifold(&p, &u.scaled(2.0))?;
        out.push(Check::at_most(format!("projection scaling t(2u) = t(u)/2 ({name})"), (2.0 * t2 - t).abs() / t, 1e-12));
        let neg = lagrange_multiplier(&p, &on)?;
        out.push(Check { name: format!("multiplier negative ({name})"), value: neg, tol: 0.0, pass: neg < 0.0 });
        if name == "odd_power" {
            let a = energy(&p, &u)?;
            let b = energy(&p, &u.scaled(-1.0))?;
            out.push(Check::at_most("odd family energy is even", (a - b).abs() / a.abs(), 1e-14));
        }
    }

    let rp = RadialProblem::new(RadialGrid::new(300, 16.0)?, 1.0, Nonlinearity::zero(), 1.0)?;
    let nodes = rp.grid().nodes();
    let trials = if opts.quick { 10 } else { 50 };
    let mut worst = f64::NEG_INFINITY;
    let mut held = true;
    for _ in 0..trials {
        let data = random_radial(&nodes, &mut rng);
        let s = symmetrization_test(&rp, &data)?;
        held &= s.holds;
        worst = worst.max((s.energy_after - s.energy_before) / s.energy_before);
    }
    out.push(Check { name: format!("symmetrization lowers energy ({trials} profiles)"), value: worst, tol: 0.0, pass: held });
    Ok(out)
}

/// A random radial profile: a few signed shells plus a small decaying floor.
pub fn random_radial(nodes: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let shells: Vec<(f64, f64, f64)> = (0..rng.random_range(1..4))
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..8.0), rng.random_range(0.3..2.0)))
        .collect();
    nodes
        .iter()
        .map(|r| shells.iter().map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp()).sum::<f64>() + 1e-3 * (-r).exp())
        .collect()
}

pub fn cmd_verify(opts: &VerifyOptions, out: &mut dyn Write) -> Result<()> {
    let checks = run_checks(opts)?;
    for c in &checks {
        writeln!(out, "{:<4} {:<52} {:>12.3e}  (tol {:.0e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tol)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        writeln!(out, "all {} checks passed", checks.len())?;
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}
