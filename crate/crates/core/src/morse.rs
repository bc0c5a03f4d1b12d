//! Morse index of a certified critical point: the number of negative
//! eigenvalues of the Lagrangian Hessian on the tangent space `{v : ⟨v, b⟩ = 0}`.
//!
//! The smallest eigenpairs come from a block preconditioned conjugate
//! gradient iteration (LOBPCG) with all iterates kept orthogonal to `b`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{HessianOperator, Problem};
use crate::error::{Error, Result};
use crate::fields::dot_slices;
use crate::optimizer::SolutionRecord;

/// A symmetric operator on a subspace of `R^dim`, with a preconditioner
/// and the projector onto that subspace.
pub trait SymOperator {
    fn dim(&self) -> usize;
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
    fn apply_pair(&self, v: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.apply(v), self.apply(w))
    }
    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
    fn project(&self, _v: &mut [f64]) {}
}

/// `v ↦ Π H Π v` with `Π` the L²-orthogonal projector off `b = φ_u u`.
pub struct ProjectedHessian<'a> {
    hessian: HessianOperator<'a>,
    b: Vec<f64>,
    bb: f64,
}

impl<'a> ProjectedHessian<'a> {
    pub fn new(p: &'a Problem, rec: &SolutionRecord) -> Result<Self> {
        Self::at(p, &rec.u, rec.lambda)
    }

    pub fn at(p: &'a Problem, u: &crate::fields::ScalarField, lambda: f64) -> Result<Self> {
        let hessian = HessianOperator::new(p, u, lambda)?;
        let phi = crate::potential::solve_potential(p.kernel(), u)?;
        let b: Vec<f64> = phi.values().iter().zip(u.values()).map(|(a, b)| a * b).collect();
        let bb = dot_slices(&b, &b);
        if !(bb > 0.0) {
            return Err(Error::Degenerate("constraint gradient vanishes"));
        }
        Ok(ProjectedHessian { hessian, b, bb })
    }

    fn proj(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project(&mut out);
        out
    }
}

impl SymOperator for ProjectedHessian<'_> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.hessian.problem().grid().cell_volume() * dot_slices(a, b)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.proj(&self.hessian.apply(&self.proj(v)))
    }

    fn apply_pair(&self, v: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (hv, hw) = self.hessian.apply_pair(&self.proj(v), &self.proj(w));
        (self.proj(&hv), self.proj(&hw))
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let p = self.hessian.problem();
        let v0 = p.v0();
        self.proj(&p.spectral().apply_symbol(v, |k2| 1.0 / (k2 + v0)))
    }

    fn project(&self, v: &mut [f64]) {
        let a = dot_slices(v, &self.b) / self.bb;
        v.iter_mut().zip(&self.b).for_each(|(x, b)| *x -= a * b);
    }
}

/// `−Δ + V(εx)` without projection.
pub struct LinearPart<'a>(pub &'a Problem);

impl SymOperator for LinearPart<'_> {
    fn dim(&self) -> usize {
        self.0.grid().len()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.0.grid().cell_volume() * dot_slices(a, b)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        crate::energy::Landscape::linear(self.0, v)
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        crate::energy::Landscape::precondition(self.0, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub max_iter: usize,
    /// Extra block vectors beyond the requested count.
    pub guards: usize,
    /// Eigen-residual target relative to the operator norm.
    pub rel_residual: f64,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { max_iter: 300, guards: 3, rel_residual: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn apply_all<O: SymOperator + ?Sized>(op: &O, vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(vs.len());
    let mut it = vs.chunks(2);
    for ch in &mut it {
        if ch.len() == 2 {
            let (a, b) = op.apply_pair(&ch[0], &ch[1]);
            out.push(a);
            out.push(b);
        } else {
            out.push(op.apply(&ch[0]));
        }
    }
    out
}

fn combine(basis: &[Vec<f64>], coef: &DMatrix<f64>, col: usize) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (i, v) in basis.iter().enumerate() {
        let c = coef[(i, col)];
        if c != 0.0 {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
        }
    }
    out
}

fn gram<O: SymOperator + ?Sized>(op: &O, a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| op.inner(&a[i], &b[j]))
}

/// Orthonormalize `s` (and its images `as_`), dropping near-dependent directions.
fn orthonormalize<O: SymOperator + ?Sized>(
    op: &O,
    s: &[Vec<f64>],
    as_: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let g = gram(op, s, s);
    let eig = SymmetricEigen::new(g);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut cols = Vec::new();
    for (i, &d) in eig.eigenvalues.iter().enumerate() {
        if d > 1e-13 * top {
            cols.push(i);
        }
    }
    let mut coef = DMatrix::zeros(s.len(), cols.len());
    for (c, &i) in cols.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[i].sqrt();
        for r in 0..s.len() {
            coef[(r, c)] = eig.eigenvectors[(r, i)] * scale;
        }
    }
    let basis = (0..cols.len()).map(|c| combine(s, &coef, c)).collect();
    let images = (0..cols.len()).map(|c| combine(as_, &coef, c)).collect();
    (basis, images)
}

/// Rayleigh–Ritz on an orthonormal basis; returns ascending values and
/// coefficient columns.
fn rayleigh_ritz<O: SymOperator + ?Sized>(op: &O, basis: &[Vec<f64>], images: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let mut h = gram(op, basis, images);
    let ht = h.transpose();
    h = (h + ht) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..basis.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let coef = DMatrix::from_fn(basis.len(), basis.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, coef)
}

/// The `k` smallest eigenpairs of `op`, converged to `‖Av − θv‖ ≤ tol`.
pub fn smallest_eigenpairs<O: SymOperator + ?Sized>(op: &O, k: usize, tol: f64, cfg: &EigenConfig) -> Result<EigenPairs> {
    let dim = op.dim();
    let nx = (k + cfg.guards).min(dim);
    if k == 0 || k > dim {
        return Err(Error::Parameter(format!("cannot compute {k} eigenpairs in dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start: Vec<Vec<f64>> = (0..nx)
        .map(|_| {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            v = op.precondition(&v);
            op.project(&mut v);
            v
        })
        .collect();
    let a_start = apply_all(op, &start);
    let (basis, images) = orthonormalize(op, &start, &a_start);
    let (vals, coef) = rayleigh_ritz(op, &basis, &images);
    let mut x: Vec<Vec<f64>> = (0..nx).map(|c| combine(&basis, &coef, c)).collect();
    let mut ax: Vec<Vec<f64>> = (0..nx).map(|c| combine(&images, &coef, c)).collect();
    let mut theta: Vec<f64> = vals[..nx].to_vec();
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut ap: Vec<Vec<f64>> = Vec::new();
    let mut residuals = vec![f64::INFINITY; nx];
    let mut iterations = 0;
    let mut converged = false;

    for it in 0..cfg.max_iter {
        iterations = it + 1;
        let r: Vec<Vec<f64>> = (0..nx)
            .map(|i| ax[i].iter().zip(&x[i]).map(|(a, b)| a - theta[i] * b).collect())
            .collect();
        for i in 0..nx {
            residuals[i] = op.inner(&r[i], &r[i]).sqrt();
        }
        if residuals[..k].iter().all(|&r| r <= tol) {
            converged = true;
            break;
        }
        // only unconverged columns feed the new directions
        let w: Vec<Vec<f64>> = (0..nx)
            .filter(|&i| residuals[i] > tol)
            .map(|i| {
                let mut v = op.precondition(&r[i]);
                op.project(&mut v);
                v
            })
            .collect();
        let aw = apply_all(op, &w);
        let mut s = x.clone();
        s.extend(w.iter().cloned());
        s.extend(p.iter().cloned());
        let mut as_ = ax.clone();
        as_.extend(aw);
        as_.extend(ap.iter().cloned());
        let (basis, images) = orthonormalize(op, &s, &as_);
        if basis.len() < nx {
            break;
        }
        let (vals, coef) = rayleigh_ritz(op, &basis, &images);
        let x_new: Vec<Vec<f64>> = (0..nx).map(|c| combine(&basis, &coef, c)).collect();
        let ax_new: Vec<Vec<f64>> = (0..nx).map(|c| combine(&images, &coef, c)).collect();
        // P: new iterates with their component along the old block removed
        let overlap = gram(op, &x, &x_new);
        p = (0..nx)
            .map(|j| {
                let mut v = x_new[j].clone();
                for (i, xi) in x.iter().enumerate() {
                    let c = overlap[(i, j)];
                    v.iter_mut().zip(xi).for_each(|(o, a)| *o -= c * a);
                }
                v
            })
            .collect();
        ap = (0..nx)
            .map(|j| {
                let mut v = ax_new[j].clone();
                for (i, axi) in ax.iter().enumerate() {
                    let c = overlap[(i, j)];
                    v.iter_mut().zip(axi).for_each(|(o, a)| *o -= c * a);
                }
                v
            })
            .collect();
        x = x_new;
        ax = ax_new;
        theta = vals[..nx].to_vec();
    }
    Ok(EigenPairs {
        values: theta[..k].to_vec(),
        vectors: x.into_iter().take(k).collect(),
        residuals: residuals[..k].to_vec(),
        iterations,
        converged,
    })
}

/// Largest `|θ|` of `op` from a short Lanczos run with full
/// reorthogonalization.
pub fn norm_estimate<O: SymOperator + ?Sized>(op: &O, steps: usize, seed: u64) -> f64 {
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    op.project(&mut q);
    let n0 = op.inner(&q, &q).sqrt();
    if !(n0 > 0.0) {
        return 0.0;
    }
    q.iter_mut().for_each(|v| *v /= n0);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..steps.min(dim) {
        let mut w = op.apply(&basis[j]);
        let a = op.inner(&w, &basis[j]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = op.inner(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nb = op.inner(&w, &w).sqrt();
        if nb <= 1e-12 * a.abs().max(1.0) || j + 1 == steps.min(dim) {
            break;
        }
        beta.push(nb);
        w.iter_mut().for_each(|x| *x /= nb);
        basis.push(w);
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t).eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// The `k` smallest eigenvalues of `ΠHΠ` on the tangent space, ascending.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub morse_index: usize,
    pub tol_eig: f64,
    pub norm_estimate: f64,
    /// Eigenvalues with `|θ| ≤ tol_eig` (translation modes on a flat potential).
    pub near_zero: usize,
    /// Smallest `|θ|` outside the near-zero cluster.
    pub margin: f64,
    /// The k-th eigenvalue is itself negative.
    pub index_may_exceed_k: bool,
    /// False when the eigensolver stopped before reaching the residual target.
    pub converged: bool,
    pub iterations: usize,
}

pub fn operator_norm_estimate(p: &Problem, rec: &SolutionRecord) -> Result<f64> {
    certified(p, rec)?;
    let op = ProjectedHessian::new(p, rec)?;
    Ok(norm_estimate(&op, 40, 1))
}

fn certified(p: &Problem, rec: &SolutionRecord) -> Result<()> {
    if !rec.converged || rec.failure.is_some() {
        return Err(Error::Precondition(format!(
            "record is not a certified critical point (residual {:e})",
            rec.residual
        )));
    }
    if rec.u.grid() != p.grid() {
        return Err(Error::Dimension { expected: p.grid().len(), got: rec.u.grid().len() });
    }
    Ok(())
}

/// Spectrum report from precomputed pairs.
pub fn report(pairs: &EigenPairs, norm: f64, rel_tol: f64) -> SpectrumReport {
    let tol_eig = rel_tol * norm;
    let morse_index = pairs.values.iter().filter(|&&v| v < -tol_eig).count();
    let near_zero = pairs.values.iter().filter(|v| v.abs() <= tol_eig).count();
    let margin = pairs
        .values
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > tol_eig)
        .fold(f64::INFINITY, f64::min);
    SpectrumReport {
        eigenvalues: pairs.values.clone(),
        residuals: pairs.residuals.clone(),
        morse_index,
        tol_eig,
        norm_estimate: norm,
        near_zero,
        margin,
        index_may_exceed_k: pairs.values.last().is_some_and(|&v| v < -tol_eig),
        converged: pairs.converged,
        iterations: pairs.iterations,
    }
}

/// Count the negative directions of the constrained second variation.
pub fn morse_index(p: &Problem, rec: &SolutionRecord, k: usize, cfg: &EigenConfig) -> Result<SpectrumReport> {
    certified(p, rec)?;
    let op = ProjectedHessian::new(p, rec)?;
    let norm = norm_estimate(&op, 40, cfg.seed.wrapping_add(1));
    let pairs = smallest_eigenpairs(&op, k, cfg.rel_residual * norm, cfg)?;
    Ok(report(&pairs, norm, 1e-6))
}
