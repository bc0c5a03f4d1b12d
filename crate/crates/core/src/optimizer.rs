//! Projected descent on `{G(u) = c}`.
//!
//! Each step moves along a tangent direction, rescales back onto the
//! constraint exactly (`G` is quartic, so `t = (c/G)^{1/4}`), and accepts by
//! an Armijo test. Energy decreases are computed from the step itself
//! rather than by subtracting two energies, so the test stays meaningful
//! when the decrease falls below the rounding level of `I`.

use serde::{Deserialize, Serialize};

use crate::concentration::barycenter;
use crate::energy::{classify_sign, evaluate_with, Evaluation, Landscape, Problem, SignClass};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::potential::square;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub tol_residual: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub step_init: f64,
    pub step_shrink: f64,
    pub precondition: bool,
    pub distinct_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol_residual: 1e-8,
            max_iter: 20000,
            armijo_c: 1e-4,
            step_init: 1.0,
            step_shrink: 0.5,
            precondition: true,
            distinct_tol: 0.05,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(format!("solver: {what}")));
        if !(self.tol_residual > 0.0) {
            return bad("tol_residual must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad("step_init must be positive");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0, 1)");
        }
        if !(self.distinct_tol > 0.0) {
            return bad("distinct_tol must be positive");
        }
        Ok(())
    }
}

/// Per-run diagnostics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    /// Energy after each accepted step, starting from the projected start.
    /// Built by accumulating the computed decreases.
    pub energies: Vec<f64>,
    /// Largest gap between the accumulated and the directly evaluated energy.
    pub energy_drift: f64,
    /// `‖u_k‖_{12/5}` per accepted iterate.
    pub lp_norms: Vec<f64>,
    /// `max_k |G(u_k) − c|/c`.
    pub constraint_dev: f64,
    /// `max_k |⟨d_k, b_k⟩|/(‖d_k‖‖b_k‖)`.
    pub tangency: f64,
    pub backtracks: usize,
}

impl Trajectory {
    pub fn is_monotone(&self) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn min_lp_norm(&self) -> f64 {
        self.lp_norms.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of [`descend`] on any [`Landscape`].
#[derive(Debug, Clone)]
pub struct Descent {
    pub eval: Evaluation,
    pub iterations: usize,
    pub converged: bool,
    /// The line search could no longer make progress.
    pub stalled: bool,
    pub trajectory: Trajectory,
}

fn lp_norm<L: Landscape + ?Sized>(land: &L, u: &[f64], p: f64) -> f64 {
    let a: Vec<f64> = u.iter().map(|v| v.abs().powf(p)).collect();
    land.integral(&a).powf(1.0 / p)
}

fn norm<L: Landscape + ?Sized>(land: &L, a: &[f64]) -> f64 {
    land.inner(a, a).sqrt()
}

pub fn is_certified(ev: &Evaluation, tol: f64) -> bool {
    ev.residual <= tol * ev.grad_norm.max(1.0)
}

/// `∫F(u + δ) − F(u)` by Simpson's rule on `θ ↦ f(u + θδ)δ`.
fn primitive_increment<L: Landscape + ?Sized>(land: &L, u: &[f64], delta: &[f64]) -> f64 {
    let nl = land.nonlinearity();
    if nl.is_zero() {
        return 0.0;
    }
    let inc: Vec<f64> = u
        .iter()
        .zip(delta)
        .map(|(&a, &d)| d * (nl.f(a) + 4.0 * nl.f(a + 0.5 * d) + nl.f(a + d)) / 6.0)
        .collect();
    land.integral(&inc)
}

/// Tangent descent direction and the matching dual vector `w` with
/// `d = P w`. With preconditioning, `w = r − αb` where α makes `d`
/// L²-orthogonal to `b`. Built from the residual `r = g + λb` rather than
/// `g`, which gives the same direction without the cancellation of two
/// nearly parallel vectors.
fn direction<L: Landscape + ?Sized>(land: &L, ev: &Evaluation, precondition: bool) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let b = &ev.cgrad;
    let res: Vec<f64> = ev.grad.iter().zip(b).map(|(g, b)| g + ev.lambda * b).collect();
    if precondition {
        let pr = land.precondition(&res);
        let pb = land.precondition(b);
        let bpb = land.inner(b, &pb);
        if !(bpb > 0.0) {
            return Err(Error::Degenerate("constraint gradient vanishes"));
        }
        let alpha = land.inner(b, &pr) / bpb;
        let d = pr.iter().zip(&pb).map(|(x, y)| x - alpha * y).collect();
        let w = res.iter().zip(b).map(|(x, y)| x - alpha * y).collect();
        Ok((d, w, res))
    } else {
        let bb = land.inner(b, b);
        if !(bb > 0.0) {
            return Err(Error::Degenerate("constraint gradient vanishes"));
        }
        let alpha = land.inner(&res, b) / bb;
        let d: Vec<f64> = res.iter().zip(b).map(|(x, y)| x - alpha * y).collect();
        Ok((d.clone(), d, res))
    }
}

/// Scale `u0` onto the constraint surface and evaluate there.
pub fn project_start<L: Landscape + ?Sized>(land: &L, u0: &[f64]) -> Result<Evaluation> {
    if u0.len() != land.dim() {
        return Err(Error::Dimension { expected: land.dim(), got: u0.len() });
    }
    let phi = land.potential(u0)?;
    let g = land.inner(&phi, &square(u0));
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Degenerate("start has G(u0) = 0"));
    }
    let t = (land.level() / g).powf(0.25);
    let u: Vec<f64> = u0.iter().map(|v| t * v).collect();
    let lu = land.linear(&u);
    let phi = phi.into_iter().map(|v| t * t * v).collect();
    evaluate_with(land, u, lu, phi)
}

/// Iterations without a 1% residual improvement before a run is called stalled.
pub const STAGNATION_WINDOW: usize = 500;

pub fn descend<L: Landscape + ?Sized>(land: &L, u0: &[f64], cfg: &SolveConfig) -> Result<Descent> {
    cfg.validate()?;
    let c = land.level();
    let mut ev = project_start(land, u0)?;
    let mut traj = Trajectory {
        energies: vec![ev.energy],
        lp_norms: vec![lp_norm(land, &ev.u, 2.4)],
        constraint_dev: (ev.constraint - c).abs() / c,
        ..Trajectory::default()
    };
    // running energy as a compensated pair
    let (mut e_hi, mut e_lo) = (ev.energy, 0.0);
    let s_min = 1e-3 * cfg.step_init;
    let s_max = 1e3 * cfg.step_init;
    let mut s = cfg.step_init;
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None; // (u, d, w)
    let mut iterations = 0;
    let mut stalled = false;
    let mut best = (ev.residual, 0usize);

    while iterations < cfg.max_iter && !is_certified(&ev, cfg.tol_residual) {
        let (d, w, res) = direction(land, &ev, cfg.precondition)?;
        // equals ⟨g, d⟩ since d ⟂ b
        let slope = land.inner(&res, &d);
        let dn = norm(land, &d);
        let bn = norm(land, &ev.cgrad);
        if dn > 0.0 {
            traj.tangency = traj.tangency.max(land.inner(&d, &ev.cgrad).abs() / (dn * bn));
        }
        if !(slope > 0.0) {
            stalled = true;
            break;
        }
        // two-point step from the previous pair, in the metric of P
        if let Some((pu, pd, pw)) = &prev {
            let du: Vec<f64> = ev.u.iter().zip(pu).map(|(a, b)| a - b).collect();
            let yw: Vec<f64> = w.iter().zip(pw).map(|(a, b)| a - b).collect();
            let yd: Vec<f64> = d.iter().zip(pd).map(|(a, b)| a - b).collect();
            let num = land.inner(&du, &yw);
            let den = land.inner(&yw, &yd);
            if num > 0.0 && den > 0.0 {
                s = num / den;
            } else {
                s /= cfg.step_shrink;
            }
            s = s.clamp(s_min, s_max);
        }

        let ad = land.linear(&d);
        let u_inf = ev.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d_inf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut accepted = None;
        for _ in 0..60 {
            if s * d_inf <= 1e-15 * u_inf {
                break;
            }
            let v: Vec<f64> = ev.u.iter().zip(&d).map(|(a, b)| a - s * b).collect();
            let phi_v = land.potential(&v)?;
            let gv = land.inner(&phi_v, &square(&v));
            if !(gv > 1e-300 && gv.is_finite()) {
                s *= cfg.step_shrink;
                traj.backtracks += 1;
                continue;
            }
            let t = (c / gv).powf(0.25);
            let u_new: Vec<f64> = v.iter().map(|x| t * x).collect();
            let lu_new: Vec<f64> = ev.lu.iter().zip(&ad).map(|(a, b)| t * (a - s * b)).collect();
            let delta: Vec<f64> = u_new.iter().zip(&ev.u).map(|(a, b)| a - b).collect();
            let adelta: Vec<f64> = lu_new.iter().zip(&ev.lu).map(|(a, b)| a - b).collect();
            let de = land.inner(&ev.lu, &delta) + 0.5 * land.inner(&delta, &adelta)
                + primitive_increment(land, &ev.u, &delta);
            if de <= -cfg.armijo_c * s * slope {
                let phi_new = phi_v.into_iter().map(|x| t * t * x).collect();
                accepted = Some((u_new, lu_new, phi_new, de));
                break;
            }
            s *= cfg.step_shrink;
            traj.backtracks += 1;
        }
        let Some((u_new, lu_new, phi_new, de)) = accepted else {
            stalled = true;
            break;
        };
        let old_u = std::mem::take(&mut ev.u);
        ev = evaluate_with(land, u_new, lu_new, phi_new)?;
        let y = e_hi + de;
        e_lo += (e_hi - y) + de;
        e_hi = y;
        let tracked = (e_hi + e_lo).min(*traj.energies.last().unwrap());
        traj.energies.push(tracked);
        traj.energy_drift = traj.energy_drift.max((tracked - ev.energy).abs());
        traj.lp_norms.push(lp_norm(land, &ev.u, 2.4));
        traj.constraint_dev = traj.constraint_dev.max((ev.constraint - c).abs() / c);
        prev = Some((old_u, d, w));
        iterations += 1;
        if ev.residual < 0.99 * best.0 {
            best = (ev.residual, iterations);
        } else if iterations - best.1 >= STAGNATION_WINDOW {
            stalled = true;
            break;
        }
    }
    let converged = is_certified(&ev, cfg.tol_residual);
    Ok(Descent { eval: ev, iterations, converged, stalled: stalled && !converged, trajectory: traj })
}

/// A converged (or flagged) critical point with diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub u: ScalarField,
    pub lambda: f64,
    pub energy: f64,
    pub constraint: f64,
    pub residual: f64,
    pub grad_norm: f64,
    pub barycenter: [f64; 3],
    pub sign_class: SignClass,
    pub morse_index: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the solve failed outright; the record then carries its start.
    pub failure: Option<String>,
    pub trajectory: Trajectory,
}

impl SolutionRecord {
    /// Stored invariants: constraint, residual, sign of λ and energy.
    pub fn check_invariants(&self, level: f64, tol: f64) -> std::result::Result<(), String> {
        if !self.converged {
            return Err(format!("not converged (residual {:e})", self.residual));
        }
        if (self.constraint - level).abs() / level > 1e-8 {
            return Err(format!("constraint {} differs from {level}", self.constraint));
        }
        if self.residual > tol * self.grad_norm.max(1.0) {
            return Err(format!("residual {:e} above tolerance", self.residual));
        }
        if !(self.lambda < 0.0) {
            return Err(format!("multiplier {} is not negative", self.lambda));
        }
        if !(self.energy > 0.0) {
            return Err(format!("energy {} is not positive", self.energy));
        }
        Ok(())
    }
}

pub fn minimize(p: &Problem, u0: &ScalarField, cfg: &SolveConfig) -> Result<SolutionRecord> {
    if u0.grid() != p.grid() {
        return Err(Error::Dimension { expected: p.grid().len(), got: u0.grid().len() });
    }
    let run = descend(p, u0.values(), cfg)?;
    let ev = run.eval;
    let u = p.field(ev.u);
    let barycenter = barycenter(&u, p.eps(), p.barycenter_radius())?;
    Ok(SolutionRecord {
        sign_class: classify_sign(u.values()),
        u,
        lambda: ev.lambda,
        energy: ev.energy,
        constraint: ev.constraint,
        residual: ev.residual,
        grad_norm: ev.grad_norm,
        barycenter,
        morse_index: None,
        iterations: run.iterations,
        converged: run.converged,
        failure: None,
        trajectory: run.trajectory,
    })
}

fn failed_record(start: &ScalarField, err: Error) -> SolutionRecord {
    SolutionRecord {
        u: start.clone(),
        lambda: f64::NAN,
        energy: f64::NAN,
        constraint: f64::NAN,
        residual: f64::INFINITY,
        grad_norm: f64::NAN,
        barycenter: [f64::NAN; 3],
        sign_class: classify_sign(start.values()),
        morse_index: None,
        iterations: 0,
        converged: false,
        failure: Some(err.to_string()),
        trajectory: Trajectory::default(),
    }
}

/// Relative L² distance and relative multiplier gap below `tol`.
pub fn same_solution(a: &SolutionRecord, b: &SolutionRecord, tol: f64) -> bool {
    if a.failure.is_some() || b.failure.is_some() {
        return false;
    }
    let scale = a.u.norm_l2().max(b.u.norm_l2());
    let dist = match a.u.lin_comb(1.0, &b.u, -1.0) {
        Ok(d) => d.norm_l2() / scale,
        Err(_) => return false,
    };
    dist < tol && (a.lambda - b.lambda).abs() / a.lambda.abs() < tol
}

/// Minimize from every start, merge duplicates, sort by energy then λ.
pub fn multi_start(p: &Problem, starts: &[ScalarField], cfg: &SolveConfig) -> Vec<SolutionRecord> {
    let mut all: Vec<SolutionRecord> = starts
        .iter()
        .map(|s| minimize(p, s, cfg).unwrap_or_else(|e| failed_record(s, e)))
        .collect();
    sort_records(&mut all);
    let mut kept: Vec<SolutionRecord> = Vec::new();
    for rec in all {
        match kept.iter().position(|k| same_solution(k, &rec, cfg.distinct_tol)) {
            Some(i) => {
                if !kept[i].converged && rec.converged {
                    kept[i] = rec;
                }
            }
            None => kept.push(rec),
        }
    }
    sort_records(&mut kept);
    kept
}

fn sort_records(recs: &mut [SolutionRecord]) {
    recs.sort_by(|a, b| {
        let key = |r: &SolutionRecord| (r.failure.is_some(), r.energy, r.lambda);
        let (fa, ea, la) = key(a);
        let (fb, eb, lb) = key(b);
        fa.cmp(&fb).then(ea.total_cmp(&eb)).then(la.total_cmp(&lb))
    });
}
