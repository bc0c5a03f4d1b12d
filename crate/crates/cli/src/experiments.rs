//! The solve, autonomous, bifurcation and multiplicity commands.

use std::io::Write;
use std::time::Instant;

use bopp::concentration::{
    autonomous_ground_state, barycenter, make_phi, profile_distance, truncation_radius, AutonomousGroundState, CutoffSpec,
};
use bopp::energy::{energy, w_norm_sq, Problem, SignClass};
use bopp::fields::{integrate, GridSpec, ScalarField};
use bopp::morse::{morse_index, SpectrumReport};
use bopp::optimizer::{minimize, multi_start, same_solution, SolutionRecord, SolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{OutputDir, RecordLine};
use crate::par;

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Morse report for a certified record; also stores the index on the record.
pub fn attach_morse(cfg: &RunConfig, p: &Problem, rec: &mut SolutionRecord) -> Option<SpectrumReport> {
    if !cfg.morse.enabled || !rec.converged || rec.failure.is_some() {
        return None;
    }
    let report = morse_index(p, rec, cfg.morse.k, &cfg.eigen_config()).ok()?;
    rec.morse_index = Some(report.morse_index);
    Some(report)
}

fn progress(cfg: &RunConfig, msg: String) {
    if cfg.verbose {
        eprintln!("[bopp] {msg}");
    }
}

fn certified(rec: &SolutionRecord, level: f64, solve: &SolveConfig) -> bool {
    rec.failure.is_none() && rec.check_invariants(level, solve.tol_residual).is_ok()
}

// ---------------------------------------------------------------- solve

pub struct SolveOutcome {
    pub record: SolutionRecord,
    pub spectrum: Option<SpectrumReport>,
    pub certified: bool,
}

pub fn run_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    let p = cfg.build_problem()?;
    let start = cfg.start_field(*p.grid())?;
    let mut record = minimize(&p, &start, &cfg.solver)?;
    let spectrum = attach_morse(cfg, &p, &mut record);
    let certified = certified(&record, p.level(), &cfg.solver);
    Ok(SolveOutcome { record, spectrum, certified })
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let res = run_solve(cfg)?;
    let mut dir = OutputDir::create(&cfg.output, cfg)?;
    let rec = &res.record;
    let mut line = RecordLine::new("solve", 0, cfg.problem.eps, cfg.problem.c, rec);
    line.spectrum = res.spectrum.clone();
    line.field = Some(dir.write_field("solve", &rec.u)?);
    dir.emit(line, rec, cfg.problem.c, cfg.solver.tol_residual)?;
    dir.finish()?;
    writeln!(
        out,
        "solve: energy {:.10} lambda {:.10} residual {:.3e} iterations {} sign {:?} morse {}",
        rec.energy,
        rec.lambda,
        rec.residual,
        rec.iterations,
        rec.sign_class,
        rec.morse_index.map_or("-".to_string(), |m| m.to_string())
    )?;
    if !res.certified {
        return Err(CliError::NotConverged(format!("residual {:e} after {} iterations", rec.residual, rec.iterations)));
    }
    Ok(())
}

// ----------------------------------------------------------- autonomous

#[derive(Debug, Clone, Serialize)]
pub struct AutonomousSummary {
    pub mu: f64,
    pub c: f64,
    pub energy: f64,
    pub half_norm_sq: f64,
    pub lambda: f64,
    pub residual: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub nonpositive: bool,
    pub half_mass_radius: f64,
    pub tail_radius: f64,
}

pub fn ground_state(cfg: &RunConfig) -> Result<AutonomousGroundState> {
    let v0 = cfg.potential()?.v0();
    Ok(autonomous_ground_state(v0, cfg.nonlinearity()?, cfg.problem.c, &cfg.radial_config())?)
}

pub fn summarize(gs: &AutonomousGroundState) -> AutonomousSummary {
    AutonomousSummary {
        mu: gs.mu,
        c: gs.c,
        energy: gs.energy,
        half_norm_sq: gs.half_norm_sq,
        lambda: gs.lambda,
        residual: gs.residual,
        grad_norm: gs.grad_norm,
        iterations: gs.iterations,
        converged: gs.converged,
        nonpositive: gs.profile.values().iter().all(|&v| v <= 0.0),
        half_mass_radius: gs.half_mass_radius(),
        tail_radius: gs.tail_radius(),
    }
}

#[derive(Serialize)]
struct ProfileRow {
    r: f64,
    u: f64,
}

pub fn cmd_autonomous(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let gs = ground_state(cfg)?;
    let s = summarize(&gs);
    let dir = OutputDir::create(&cfg.output, cfg)?;
    let rows: Vec<ProfileRow> =
        gs.profile.grid().nodes().into_iter().zip(gs.profile.values()).map(|(r, &u)| ProfileRow { r, u }).collect();
    dir.write_csv("profile.csv", &rows)?;
    dir.write_json("autonomous.json", &s)?;
    dir.finish()?;
    writeln!(
        out,
        "autonomous: mu {} energy {:.10} lambda {:.10} residual {:.3e} half-mass radius {:.4}",
        s.mu, s.energy, s.lambda, s.residual, s.half_mass_radius
    )?;
    if !s.converged {
        return Err(CliError::NotConverged(format!("radial residual {:e}", s.residual)));
    }
    if !s.nonpositive {
        return Err(CliError::Assertion("ground-state profile has positive values".into()));
    }
    Ok(())
}

// ---------------------------------------------------------- bifurcation

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationRow {
    pub c: f64,
    pub w_norm_sq: f64,
    pub lambda: f64,
    pub q: f64,
    pub energy: f64,
    /// `∫f(u)u`.
    pub f_term: f64,
    /// `|λc + ‖u‖²_W + ∫f(u)u| / (‖u‖²_W + |∫f(u)u|)`.
    pub identity_error: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaTrend {
    Bounded,
    Divergent,
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationAnalysis {
    pub all_certified: bool,
    pub lambda_negative: bool,
    pub identity_max: f64,
    pub nondecreasing: bool,
    pub strictly_increasing: bool,
    /// `(max q − min q)/min q`.
    pub q_spread: f64,
    /// Slope of `log|λ|` against `log c` over the two smallest levels.
    pub lambda_slope: f64,
    pub trend: LambdaTrend,
}

pub struct BifurcationSweep {
    pub rows: Vec<BifurcationRow>,
    pub records: Vec<SolutionRecord>,
    pub analysis: BifurcationAnalysis,
}

/// Relative tolerance for the multiplier identity and for the q comparisons.
pub const BIFURCATION_TOL: f64 = 1e-6;

pub fn analyze_bifurcation(rows: &[BifurcationRow], records: &[SolutionRecord], solve: &SolveConfig) -> BifurcationAnalysis {
    let q: Vec<f64> = rows.iter().map(|r| r.q).collect();
    let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
    let qmax = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_slope = if rows.len() >= 2 {
        ((rows[1].lambda.abs()).ln() - (rows[0].lambda.abs()).ln()) / (rows[1].c.ln() - rows[0].c.ln())
    } else {
        f64::NAN
    };
    BifurcationAnalysis {
        all_certified: records.len() == rows.len() && records.iter().zip(rows).all(|(r, row)| certified(r, row.c, solve)),
        lambda_negative: rows.iter().all(|r| r.lambda < 0.0),
        identity_max: rows.iter().map(|r| r.identity_error).fold(0.0, f64::max),
        nondecreasing: q.windows(2).all(|w| w[1] - w[0] >= -BIFURCATION_TOL * w[0]),
        strictly_increasing: q.windows(2).all(|w| w[1] - w[0] > BIFURCATION_TOL * w[0]),
        q_spread: (qmax - qmin) / qmin,
        lambda_slope,
        // |λ| growing like a negative power of c as c → 0
        trend: if lambda_slope < -0.1 { LambdaTrend::Divergent } else { LambdaTrend::Bounded },
    }
}

pub fn bifurcation_sweep(cfg: &RunConfig) -> Result<BifurcationSweep> {
    let grid = cfg.grid()?;
    let nl = cfg.nonlinearity()?;
    let cells = par::map(cfg.threads, &cfg.experiment.c, |_, &c| -> Result<(BifurcationRow, SolutionRecord)> {
        let p = cfg.build_problem_at(grid, cfg.problem.eps, c)?;
        let rec = minimize(&p, &cfg.start_field(grid)?, &cfg.solver)?;
        let w = w_norm_sq(&p, &rec.u)?;
        let f_term = integrate(&rec.u.map(|v| nl.f(v) * v));
        let row = BifurcationRow {
            c,
            w_norm_sq: w,
            lambda: rec.lambda,
            q: w / c.sqrt(),
            energy: rec.energy,
            f_term,
            identity_error: (rec.lambda * c + w + f_term).abs() / (w + f_term.abs()),
            residual: rec.residual,
            converged: rec.converged,
        };
        Ok((row, rec))
    });
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for cell in cells {
        let (row, rec) = cell?;
        rows.push(row);
        records.push(rec);
    }
    let analysis = analyze_bifurcation(&rows, &records, &cfg.solver);
    Ok(BifurcationSweep { rows, records, analysis })
}

pub fn cmd_bifurcation(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let sweep = bifurcation_sweep(cfg)?;
    let mut dir = OutputDir::create(&cfg.output, cfg)?;
    for (i, (row, rec)) in sweep.rows.iter().zip(&sweep.records).enumerate() {
        let mut line = RecordLine::new("bifurcation", i, cfg.problem.eps, row.c, rec);
        line.field = Some(dir.write_field(&format!("bifurcation_{i}"), &rec.u)?);
        dir.emit(line, rec, row.c, cfg.solver.tol_residual)?;
    }
    dir.write_csv("bifurcation.csv", &sweep.rows)?;
    dir.write_json("bifurcation.json", &sweep.analysis)?;
    dir.finish()?;

    writeln!(out, "{:>8} {:>14} {:>14} {:>14} {:>10}", "c", "|u|^2_W", "lambda", "q", "identity")?;
    for r in &sweep.rows {
        writeln!(out, "{:>8} {:>14.8} {:>14.8} {:>14.10} {:>10.2e}", r.c, r.w_norm_sq, r.lambda, r.q, r.identity_error)?;
    }
    let a = &sweep.analysis;
    writeln!(
        out,
        "q spread {:.3e}; strictly increasing: {}; lambda slope {:.4} ({:?})",
        a.q_spread, a.strictly_increasing, a.lambda_slope, a.trend
    )?;

    if !a.all_certified {
        return Err(CliError::NotConverged("a bifurcation solve was not certified".into()));
    }
    let mut fails = Vec::new();
    if !a.lambda_negative {
        fails.push("a multiplier is not negative".to_string());
    }
    if a.identity_max > BIFURCATION_TOL {
        fails.push(format!("multiplier identity off by {:e}", a.identity_max));
    }
    if !a.nondecreasing {
        fails.push("q(c) decreases".to_string());
    }
    if !fails.is_empty() {
        return Err(CliError::Assertion(fails.join("; ")));
    }
    Ok(())
}

// --------------------------------------------------------- multiplicity

#[derive(Debug, Clone, Serialize)]
pub struct BumpRow {
    pub eps: f64,
    pub well: usize,
    pub y_x: f64,
    pub y_y: f64,
    pub y_z: f64,
    /// `I_ε(Φ_ε(y))`.
    pub energy: f64,
    /// `|I_ε(Φ_ε(y)) − E(𝔲)|`.
    pub gap: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_z: f64,
    pub beta_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionRow {
    pub eps: f64,
    pub index: usize,
    pub energy: f64,
    pub lambda: f64,
    pub residual: f64,
    pub sign_class: SignClass,
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_z: f64,
    pub nearest_well: usize,
    pub well_distance: f64,
    pub morse_index: Option<usize>,
    pub profile_distance: f64,
    pub certified: bool,
    pub below_level: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    pub n: usize,
    pub half_len: f64,
    /// `h(ε)`: largest bump gap over the wells.
    pub h: f64,
    pub max_beta_error: f64,
    pub distinct: usize,
    pub certified: usize,
}

pub struct EpsCell {
    pub eps: f64,
    pub grid: GridSpec,
    pub bumps: Vec<BumpRow>,
    pub h: f64,
    pub records: Vec<SolutionRecord>,
    pub spectra: Vec<Option<SpectrumReport>>,
    pub solutions: Vec<SolutionRow>,
}

impl EpsCell {
    pub fn row(&self) -> EpsRow {
        EpsRow {
            eps: self.eps,
            n: self.grid.n(),
            half_len: self.grid.half_len(),
            h: self.h,
            max_beta_error: self.bumps.iter().map(|b| b.beta_error).fold(0.0, f64::max),
            distinct: self.records.len(),
            certified: self.solutions.iter().filter(|s| s.certified).count(),
        }
    }
}

pub struct Exploration {
    pub starts: usize,
    /// Certified solutions not seen among the bump-started ones.
    pub finds: Vec<SolutionRow>,
    pub records: Vec<SolutionRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityChecks {
    pub wells: usize,
    pub separation: f64,
    pub count_ok: bool,
    pub all_negative: bool,
    pub below_level: bool,
    pub wells_resolved: bool,
    pub beta_decreasing: bool,
    pub beta_small: bool,
    pub gap_decreasing: bool,
}

impl MultiplicityChecks {
    /// Failures among the quantities asserted at the smallest ε.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.count_ok {
            out.push(format!("fewer than {} distinct certified solutions", self.wells));
        }
        if !self.all_negative {
            out.push("a certified solution is not negative".into());
        }
        if !self.below_level {
            out.push("a solution lies above E + h(eps)".into());
        }
        if !self.wells_resolved {
            out.push("barycenters do not resolve every well".into());
        }
        out
    }
}

pub struct MultiplicityRun {
    pub ground_state: AutonomousGroundState,
    pub cutoff: f64,
    pub rho: f64,
    pub centers: Vec<[f64; 3]>,
    pub cells: Vec<EpsCell>,
    pub exploration: Option<Exploration>,
    pub checks: MultiplicityChecks,
}

/// Box for one ε. With a margin, the spacing of the configured grid is kept
/// and the half-width grows to cover the farthest well `y/ε` plus the margin.
pub fn grid_for(cfg: &RunConfig, centers: &[[f64; 3]], eps: f64) -> Result<GridSpec> {
    let base = cfg.grid()?;
    let Some(margin) = cfg.experiment.margin else {
        return Ok(base);
    };
    let h = base.spacing();
    let far = centers.iter().flat_map(|y| y.iter().map(|v| v.abs())).fold(0.0, f64::max);
    let cells = ((far / eps + margin) / h).ceil().max(4.0) as usize;
    GridSpec::new(2 * cells, cells as f64 * h).map_err(|e| CliError::Config(e.to_string()))
}

fn solution_row(
    eps: f64,
    index: usize,
    rec: &SolutionRecord,
    centers: &[[f64; 3]],
    gs: &AutonomousGroundState,
    level: f64,
    cfg: &RunConfig,
) -> SolutionRow {
    let (nearest_well, well_distance) = centers
        .iter()
        .enumerate()
        .map(|(i, y)| (i, dist(*y, rec.barycenter)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let center = rec.barycenter.map(|b| b / eps);
    SolutionRow {
        eps,
        index,
        energy: rec.energy,
        lambda: rec.lambda,
        residual: rec.residual,
        sign_class: rec.sign_class,
        beta_x: rec.barycenter[0],
        beta_y: rec.barycenter[1],
        beta_z: rec.barycenter[2],
        nearest_well,
        well_distance,
        morse_index: rec.morse_index,
        profile_distance: profile_distance(&rec.u, &gs.profile, center).unwrap_or(f64::NAN),
        certified: certified(rec, cfg.problem.c, &cfg.solver),
        below_level: rec.energy <= level,
    }
}

fn eps_cell(
    cfg: &RunConfig,
    gs: &AutonomousGroundState,
    cut: &CutoffSpec,
    rho: f64,
    centers: &[[f64; 3]],
    eps: f64,
    is_last: bool,
) -> Result<(EpsCell, Problem, Vec<ScalarField>)> {
    let grid = grid_for(cfg, centers, eps)?;
    let p = cfg.build_problem_at(grid, eps, cfg.problem.c)?.with_barycenter_radius(rho);
    let mut bumps = Vec::new();
    let mut phis = Vec::new();
    for (i, &y) in centers.iter().enumerate() {
        let phi = make_phi(&p, gs, y, cut)?;
        let e = energy(&p, &phi)?;
        let beta = barycenter(&phi, eps, rho)?;
        bumps.push(BumpRow {
            eps,
            well: i,
            y_x: y[0],
            y_y: y[1],
            y_z: y[2],
            energy: e,
            gap: (e - gs.energy).abs(),
            beta_x: beta[0],
            beta_y: beta[1],
            beta_z: beta[2],
            beta_error: dist(beta, y),
        });
        phis.push(phi);
    }
    let h = bumps.iter().map(|b| b.gap).fold(0.0, f64::max);
    let t0 = Instant::now();
    let mut records = multi_start(&p, &phis, &cfg.solver);
    let iters: Vec<usize> = records.iter().map(|r| r.iterations).collect();
    progress(cfg, format!("eps {eps}: n = {}, {} solutions, iterations {iters:?}, {:.1} s", grid.n(), records.len(), t0.elapsed().as_secs_f64()));
    let t0 = Instant::now();
    let morse = cfg.morse.every_eps || is_last;
    let spectra: Vec<_> = records.iter_mut().map(|r| if morse { attach_morse(cfg, &p, r) } else { None }).collect();
    if cfg.morse.enabled && morse {
        progress(cfg, format!("eps {eps}: Morse indices {:.1} s", t0.elapsed().as_secs_f64()));
    }
    let solutions = records
        .iter()
        .enumerate()
        .map(|(j, r)| solution_row(eps, j, r, centers, gs, gs.energy + h, cfg))
        .collect();
    Ok((EpsCell { eps, grid, bumps, h, records, spectra, solutions }, p, phis))
}

/// [`same_solution`] for `u` or `−u`; the mirror of a solution is only new
/// when the nonlinearity breaks the symmetry, which the energy then shows.
fn same_up_to_sign(a: &SolutionRecord, b: &SolutionRecord, tol: f64) -> bool {
    if same_solution(a, b, tol) {
        return true;
    }
    let mut flipped = b.clone();
    flipped.u = b.u.scaled(-1.0);
    same_solution(a, &flipped, tol) && (a.energy - b.energy).abs() <= tol * a.energy.abs()
}

/// Random signed combinations of the bumps, orthogonalized against the
/// solutions already found.
fn exploration_starts(cfg: &RunConfig, phis: &[ScalarField], known: &[SolutionRecord]) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for _ in 0..cfg.experiment.random_starts {
        let mut s = phis[0].scaled(0.0);
        for phi in phis {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a = sign * rng.random_range(0.2..1.0);
            s = s.lin_comb(1.0, phi, a).expect("bumps share the grid");
        }
        for rec in known.iter().filter(|r| r.failure.is_none()) {
            let uu = rec.u.dot(&rec.u).unwrap_or(0.0);
            if uu > 0.0 {
                let t = s.dot(&rec.u).unwrap_or(0.0) / uu;
                s = s.lin_comb(1.0, &rec.u, -t).expect("records share the grid");
            }
        }
        if s.max_abs() > 1e-8 * phis.iter().map(|p| p.max_abs()).fold(0.0, f64::max) {
            out.push(s);
        }
    }
    out
}

pub fn multiplicity_experiment(cfg: &RunConfig) -> Result<MultiplicityRun> {
    let potential = cfg.potential()?;
    let centers = potential.centers();
    if centers.is_empty() {
        return Err(CliError::Config("multiplicity needs a potential with wells".into()));
    }
    let gs = ground_state(cfg)?;
    if !gs.converged {
        return Err(CliError::NotConverged(format!("autonomous ground state residual {:e}", gs.residual)));
    }
    let cut = match cfg.experiment.cutoff {
        Some(t) => CutoffSpec::new(t)?,
        None => gs.default_cutoff(),
    };
    let rho = truncation_radius(&centers, &cut);
    let last = cfg.experiment.eps.len() - 1;
    let cells = par::map(cfg.threads, &cfg.experiment.eps, |i, &eps| -> Result<_> {
        let (cell, p, phis) = eps_cell(cfg, &gs, &cut, rho, &centers, eps, i == last)?;
        // only the smallest ε keeps its problem for the exploratory search
        Ok(if i == last { (cell, Some((p, phis))) } else { (cell, None) })
    });
    let mut out_cells = Vec::new();
    let mut tail = None;
    for c in cells {
        let (cell, extra) = c?;
        if extra.is_some() {
            tail = extra;
        }
        out_cells.push(cell);
    }

    let exploration = match tail {
        Some((p, phis)) if cfg.experiment.random_starts > 0 => {
            let cell = out_cells.last().expect("nonempty eps list");
            let starts = exploration_starts(cfg, &phis, &cell.records);
            let solve = SolveConfig { max_iter: cfg.solver.max_iter.min(cfg.experiment.explore_max_iter), ..cfg.solver };
            let mut finds = Vec::new();
            let mut records = Vec::new();
            for s in &starts {
                let t0 = Instant::now();
                let Ok(mut rec) = minimize(&p, s, &solve) else { continue };
                progress(cfg, format!("exploration: {} iterations, {:?}, {:.1} s", rec.iterations, rec.sign_class, t0.elapsed().as_secs_f64()));
                let new = !cell.records.iter().chain(&records).any(|k| same_up_to_sign(k, &rec, cfg.solver.distinct_tol));
                if new && certified(&rec, cfg.problem.c, &cfg.solver) {
                    attach_morse(cfg, &p, &mut rec);
                    finds.push(solution_row(cell.eps, records.len(), &rec, &centers, &gs, gs.energy + cell.h, cfg));
                    records.push(rec);
                }
            }
            Some(Exploration { starts: starts.len(), finds, records })
        }
        _ => None,
    };

    let checks = check_multiplicity(&out_cells, &centers);
    Ok(MultiplicityRun { ground_state: gs, cutoff: cut.radius(), rho, centers, cells: out_cells, exploration, checks })
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub fn check_multiplicity(cells: &[EpsCell], centers: &[[f64; 3]]) -> MultiplicityChecks {
    let k = centers.len();
    let mut separation = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            separation = separation.min(dist(centers[i], centers[j]));
        }
    }
    let last = cells.last().expect("nonempty eps list");
    let good: Vec<&SolutionRow> = last.solutions.iter().filter(|s| s.certified).collect();
    let mut hit = vec![false; k];
    for s in &good {
        if s.well_distance < 0.1 * separation {
            hit[s.nearest_well] = true;
        }
    }
    let beta: Vec<f64> = cells.iter().map(|c| c.row().max_beta_error).collect();
    let gaps: Vec<f64> = cells.iter().map(|c| c.h).collect();
    MultiplicityChecks {
        wells: k,
        separation,
        count_ok: good.len() >= k,
        all_negative: good.iter().all(|s| s.sign_class == SignClass::Negative && s.lambda < 0.0),
        below_level: good.iter().all(|s| s.below_level),
        wells_resolved: hit.iter().all(|&h| h),
        beta_decreasing: strictly_decreasing(&beta),
        beta_small: beta.last().is_some_and(|&b| b < 0.1 * separation),
        gap_decreasing: strictly_decreasing(&gaps),
    }
}

pub fn cmd_multiplicity(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let run = multiplicity_experiment(cfg)?;
    let mut dir = OutputDir::create(&cfg.output, cfg)?;
    let mut bumps = Vec::new();
    let mut sols = Vec::new();
    for (e, cell) in run.cells.iter().enumerate() {
        bumps.extend(cell.bumps.iter().cloned());
        sols.extend(cell.solutions.iter().cloned());
        for (j, (rec, spec)) in cell.records.iter().zip(&cell.spectra).enumerate() {
            let mut line = RecordLine::new("multiplicity", e, cell.eps, cfg.problem.c, rec);
            line.spectrum = spec.clone();
            line.field = Some(dir.write_field(&format!("multiplicity_e{e}_s{j}"), &rec.u)?);
            dir.emit(line, rec, cfg.problem.c, cfg.solver.tol_residual)?;
        }
    }
    let eps_rows: Vec<EpsRow> = run.cells.iter().map(EpsCell::row).collect();
    dir.write_csv("bumps.csv", &bumps)?;
    dir.write_csv("eps.csv", &eps_rows)?;
    dir.write_csv("solutions.csv", &sols)?;
    if let Some(ex) = &run.exploration {
        let e = run.cells.len() - 1;
        dir.write_csv("exploration.csv", &ex.finds)?;
        for (j, rec) in ex.records.iter().enumerate() {
            let mut line = RecordLine::new("exploration", e, run.cells[e].eps, cfg.problem.c, rec);
            line.field = Some(dir.write_field(&format!("exploration_s{j}"), &rec.u)?);
            dir.emit(line, rec, cfg.problem.c, cfg.solver.tol_residual)?;
        }
    }
    dir.write_json("checks.json", &run.checks)?;
    dir.finish()?;

    writeln!(out, "ground state energy {:.8}, cutoff T = {:.4}, rho = {:.4}", run.ground_state.energy, run.cutoff, run.rho)?;
    writeln!(out, "{:>6} {:>4} {:>7} {:>12} {:>12} {:>9} {:>9}", "eps", "n", "L", "h(eps)", "max|b-y|", "distinct", "certified")?;
    for r in &eps_rows {
        writeln!(
            out,
            "{:>6} {:>4} {:>7.3} {:>12.4e} {:>12.4e} {:>9} {:>9}",
            r.eps, r.n, r.half_len, r.h, r.max_beta_error, r.distinct, r.certified
        )?;
    }
    writeln!(out, "{:>6} {:>3} {:>14} {:>14} {:>14} {:>5} {:>10} {:>6} {:>10}", "eps", "#", "energy", "lambda", "sign", "well", "|b-y|", "morse", "profile")?;
    for s in &sols {
        writeln!(
            out,
            "{:>6} {:>3} {:>14.8} {:>14.8} {:>14} {:>5} {:>10.3e} {:>6} {:>10.3e}",
            s.eps,
            s.index,
            s.energy,
            s.lambda,
            format!("{:?}", s.sign_class),
            s.nearest_well,
            s.well_distance,
            s.morse_index.map_or("-".to_string(), |m| m.to_string()),
            s.profile_distance
        )?;
    }
    if let Some(ex) = &run.exploration {
        writeln!(out, "exploration: {} starts, {} new certified solutions", ex.starts, ex.finds.len())?;
        for s in &ex.finds {
            writeln!(out, "  energy {:.8} lambda {:.8} sign {:?} morse {:?}", s.energy, s.lambda, s.sign_class, s.morse_index)?;
        }
    }
    let c = &run.checks;
    writeln!(
        out,
        "trend: |b-y| strictly decreasing {}; h(eps) strictly decreasing {}; final |b-y| < 0.1 sep {}",
        c.beta_decreasing, c.gap_decreasing, c.beta_small
    )?;
    let fails = c.failures();
    if !fails.is_empty() {
        return Err(CliError::Assertion(fails.join("; ")));
    }
    Ok(())
}
