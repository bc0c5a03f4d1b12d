//! Autonomous radial ground state, localized bumps built from it, and the
//! barycenter map used to locate solutions near the wells of `V`.

use serde::{Deserialize, Serialize};

use crate::energy::{evaluate, project_to_manifold, Landscape, Nonlinearity, Problem, RadialProblem};
use crate::error::{Error, Result};
use crate::fields::{compensated_sum, GridSpec, RadialGrid, RadialProfile, ScalarField, Spectral};
use crate::optimizer::{descend, is_certified, SolveConfig};

/// `η(s) = 1` on `[0, T/2]`, `0` on `[T, ∞)`, with a quintic smoothstep in
/// `s²` between, so `η` is C² and nonincreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    t: f64,
}

impl CutoffSpec {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("cutoff radius T = {t} must be positive")));
        }
        Ok(CutoffSpec { t })
    }

    pub fn radius(&self) -> f64 {
        self.t
    }

    pub fn eta(&self, s: f64) -> f64 {
        let lo = 0.25 * self.t * self.t;
        let hi = self.t * self.t;
        let s2 = s * s;
        if s2 <= lo {
            1.0
        } else if s2 >= hi {
            0.0
        } else {
            let x = (s2 - lo) / (hi - lo);
            1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialConfig {
    pub m: usize,
    pub r_max: f64,
    pub solve: SolveConfig,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig { m: 2000, r_max: 24.0, solve: SolveConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct AutonomousGroundState {
    pub mu: f64,
    pub c: f64,
    pub nonlinearity: Nonlinearity,
    /// Nonpositive profile.
    pub profile: RadialProfile,
    pub energy: f64,
    /// `½‖𝔲‖²_μ`; equals `energy` when `F` vanishes on the profile.
    pub half_norm_sq: f64,
    pub lambda: f64,
    pub residual: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl AutonomousGroundState {
    pub fn radial_problem(&self) -> Result<RadialProblem> {
        RadialProblem::new(*self.profile.grid(), self.mu, self.nonlinearity, self.c)
    }

    pub fn half_mass_radius(&self) -> f64 {
        half_mass_radius(&self.profile)
    }

    /// Default cutoff: four half-mass radii.
    pub fn default_cutoff(&self) -> CutoffSpec {
        CutoffSpec { t: 4.0 * self.half_mass_radius() }
    }

    /// Radius beyond which `|𝔲|` stays below `1e−4·max|𝔲|`.
    pub fn tail_radius(&self) -> f64 {
        let v = self.profile.values();
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let last = v.iter().rposition(|x| x.abs() >= 1e-4 * peak).unwrap_or(0);
        self.profile.grid().r((last + 1).min(self.profile.grid().m()))
    }
}

/// Ground state of `E_μ` on `{G = c}` among radial functions.
pub fn autonomous_ground_state(mu: f64, f: Nonlinearity, c: f64, cfg: &RadialConfig) -> Result<AutonomousGroundState> {
    let grid = RadialGrid::new(cfg.m, cfg.r_max)?;
    let rp = RadialProblem::new(grid, mu, f, c)?;
    let width = 2.0 / mu.sqrt();
    let start: Vec<f64> = grid.nodes().iter().map(|r| -(-(r / width).powi(2)).exp()).collect();
    let run = descend(&rp, &start, &cfg.solve)?;
    let mut u = run.eval.u;
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    if max > -min {
        // odd nonlinearities admit both signs; keep the nonpositive one
        u.iter_mut().for_each(|v| *v = -*v);
    }
    let ev = evaluate(&rp, u)?;
    let converged = is_certified(&ev, cfg.solve.tol_residual);
    Ok(AutonomousGroundState {
        mu,
        c,
        nonlinearity: f,
        half_norm_sq: 0.5 * rp.inner(&ev.u, &ev.lu),
        energy: ev.energy,
        lambda: ev.lambda,
        residual: ev.residual,
        grad_norm: ev.grad_norm,
        profile: RadialProfile::from_vec(grid, ev.u),
        iterations: run.iterations,
        converged,
    })
}

/// `r` with `∫_{|x|<r} u² = ½∫u²`.
pub fn half_mass_radius(p: &RadialProfile) -> f64 {
    let w = p.grid().weights();
    let mass: Vec<f64> = p.values().iter().zip(&w).map(|(u, w)| u * u * w).collect();
    let total = compensated_sum(mass.iter().copied());
    let mut acc = 0.0;
    for (j, m) in mass.iter().enumerate() {
        if acc + m >= 0.5 * total {
            let frac = (0.5 * total - acc) / m;
            let g = p.grid();
            let lo = (g.r(j) - 0.5 * g.dr()).max(0.0);
            let hi = (g.r(j) + 0.5 * g.dr()).min(g.r_max());
            return lo + frac * (hi - lo);
        }
        acc += m;
    }
    p.grid().r_max()
}

/// Decreasing rearrangement of nonnegative nodal data: each node takes the
/// value whose distribution-function volume matches its control cell.
pub fn rearrange(grid: &RadialGrid, values: &[f64]) -> Vec<f64> {
    let w = grid.weights();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut cum = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &i in &order {
        acc += w[i];
        cum.push(acc);
    }
    let mut out = Vec::with_capacity(values.len());
    let mut k = 0;
    let mut before = 0.0;
    for wj in &w {
        let target = before + 0.5 * wj;
        while k + 1 < cum.len() && cum[k] < target {
            k += 1;
        }
        out.push(values[order[k]]);
        before += wj;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symmetrization {
    pub energy_before: f64,
    pub energy_after: f64,
    pub t_star: f64,
    pub holds: bool,
}

/// Compares `E_μ(u)` with `E_μ(t_* u*)` for `u = |data|` taken on the
/// constraint, where `u*` is the decreasing rearrangement and `t_*`
/// rescales it back onto `{G = c}`.
pub fn symmetrization_test(rp: &RadialProblem, data: &[f64]) -> Result<Symmetrization> {
    if data.len() != rp.dim() {
        return Err(Error::Dimension { expected: rp.dim(), got: data.len() });
    }
    let grid = *rp.grid();
    let abs: Vec<f64> = data.iter().map(|v| v.abs()).collect();
    let project = |v: &[f64]| -> Result<(f64, RadialProfile)> {
        let p = RadialProfile::from_vec(grid, v.to_vec());
        let g = rp.constraint(&p)?;
        if !(g > 0.0) {
            return Err(Error::Degenerate("profile has G = 0"));
        }
        let t = (rp.level() / g).powf(0.25);
        Ok((t, RadialProfile::from_vec(grid, v.iter().map(|x| t * x).collect())))
    };
    let (_, u) = project(&abs)?;
    let star = rearrange(&grid, u.values());
    let (t_star, us) = project(&star)?;
    let energy_before = rp.energy(&u);
    let energy_after = rp.energy(&us);
    Ok(Symmetrization { energy_before, energy_after, t_star, holds: energy_after <= energy_before + 1e-10 })
}

/// Support radius of a bump in `x`: the cutoff `T/ε`, or the radius where
/// the profile has decayed to `1e−4` of its peak if that is smaller.
pub fn bump_support(gs: &AutonomousGroundState, eps: f64, cut: &CutoffSpec) -> f64 {
    (cut.radius() / eps).min(gs.tail_radius())
}

/// `Ψ_{ε,y}(x) = η(|εx − y|)·𝔲(|x − y/ε|)`.
pub fn make_bump(gs: &AutonomousGroundState, eps: f64, y: [f64; 3], cut: &CutoffSpec, grid: &GridSpec) -> Result<ScalarField> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    let center = [y[0] / eps, y[1] / eps, y[2] / eps];
    let reach = bump_support(gs, eps, cut);
    let l = grid.half_len();
    for (a, c) in center.iter().enumerate() {
        if c.abs() + reach > l {
            return Err(Error::Geometry(format!(
                "bump at y/eps = {:.3} (axis {a}) with support {reach:.3} leaves the box [-{l}, {l})",
                c
            )));
        }
    }
    Ok(ScalarField::from_fn(*grid, |x| {
        let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2)).sqrt();
        let eta = cut.eta(eps * r);
        if eta == 0.0 {
            0.0
        } else {
            eta * gs.profile.interpolate(r)
        }
    }))
}

/// `Φ_ε(y) = t·Ψ_{ε,y}` on the constraint surface of `p`.
pub fn make_phi(p: &Problem, gs: &AutonomousGroundState, y: [f64; 3], cut: &CutoffSpec) -> Result<ScalarField> {
    let bump = make_bump(gs, p.eps(), y, cut, p.grid())?;
    Ok(project_to_manifold(p, &bump)?.1)
}

/// `χ(x) = x` inside the ball of radius ρ and `ρx/|x|` outside.
pub fn truncate(x: [f64; 3], rho: f64) -> [f64; 3] {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r <= rho {
        x
    } else {
        let s = rho / r;
        [x[0] * s, x[1] * s, x[2] * s]
    }
}

/// `β_ε(u) = ∫χ(εx)u² / ∫u²`.
pub fn barycenter(u: &ScalarField, eps: f64, rho: f64) -> Result<[f64; 3]> {
    let g = u.grid();
    let w: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let total = compensated_sum(w.iter().copied());
    if !(total > 0.0) {
        return Err(Error::Degenerate("barycenter of the zero field"));
    }
    let mut out = [0.0; 3];
    for (a, o) in out.iter_mut().enumerate() {
        *o = compensated_sum(w.iter().enumerate().map(|(idx, wi)| {
            let x = g.point(idx);
            wi * truncate([eps * x[0], eps * x[1], eps * x[2]], rho)[a]
        })) / total;
    }
    Ok(out)
}

/// Truncation radius enclosing the `2T`-neighbourhood of the wells.
pub fn truncation_radius(centers: &[[f64; 3]], cut: &CutoffSpec) -> f64 {
    let far = centers.iter().map(|y| (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()).fold(0.0, f64::max);
    far + 2.0 * cut.radius()
}

/// Ground-state profile sampled around `center` on the grid of `u`.
pub fn sample_profile(profile: &RadialProfile, grid: &GridSpec, center: [f64; 3]) -> ScalarField {
    ScalarField::from_fn(*grid, |x| {
        let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2)).sqrt();
        profile.interpolate(r)
    })
}

/// `‖u − 𝔲(|· − center|)‖ / ‖𝔲(|· − center|)‖` on the grid.
pub fn profile_distance(u: &ScalarField, profile: &RadialProfile, center: [f64; 3]) -> Result<f64> {
    let s = sample_profile(profile, u.grid(), center);
    Ok(u.lin_comb(1.0, &s, -1.0)?.norm_l2() / s.norm_l2())
}

/// Largest spread of `u` over 26 lattice directions at common radii, relative
/// to `‖u‖_∞`, using the trigonometric interpolant.
pub fn angular_variation(u: &ScalarField, center: [f64; 3], r_max: f64, shells: usize) -> f64 {
    let mut dirs = Vec::new();
    for a in -1i32..=1 {
        for b in -1i32..=1 {
            for c in -1i32..=1 {
                if (a, b, c) != (0, 0, 0) {
                    let n = ((a * a + b * b + c * c) as f64).sqrt();
                    dirs.push([a as f64 / n, b as f64 / n, c as f64 / n]);
                }
            }
        }
    }
    let mut pts = Vec::new();
    for k in 1..=shells {
        let r = r_max * k as f64 / shells as f64;
        for d in &dirs {
            pts.push([center[0] + r * d[0], center[1] + r * d[1], center[2] + r * d[2]]);
        }
    }
    let vals = Spectral::new(*u.grid()).interpolate(u.values(), &pts);
    let scale = u.max_abs();
    vals.chunks(dirs.len())
        .map(|ch| {
            let hi = ch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = ch.iter().copied().fold(f64::INFINITY, f64::min);
            (hi - lo) / scale
        })
        .fold(0.0, f64::max)
}
