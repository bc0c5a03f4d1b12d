//! The constrained energy: nonlinearities, external potentials, the problem
//! instance, and the first and second variations.
//!
//! Everything the optimizer needs is expressed through [`Landscape`], which
//! both the 3D box discretization ([`Problem`]) and the radial one
//! ([`RadialProblem`]) implement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{compensated_sum, dot_slices, GridSpec, RadialGrid, RadialProfile, ScalarField, Spectral};
use crate::potential::{clamp_dust, radial_convolve, square, KernelPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Zero,
    OneSignPower,
    OddPower,
}

/// `f` and its primitive `F` with `F(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub family: Family,
    pub p: f64,
    pub a: f64,
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity { family: Family::Zero, p: 4.0, a: 0.0 }
    }

    pub fn new(family: Family, p: f64, a: f64) -> Result<Self> {
        let nl = Nonlinearity { family, p, a };
        nl.validate()?;
        Ok(nl)
    }

    pub fn one_sign(p: f64, a: f64) -> Result<Self> {
        Self::new(Family::OneSignPower, p, a)
    }

    pub fn odd_power(p: f64, a: f64) -> Result<Self> {
        Self::new(Family::OddPower, p, a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::Zero {
            return Ok(());
        }
        if !(self.p > 2.0 && self.p < 6.0) {
            return Err(Error::Parameter(format!("exponent p = {} outside (2, 6)", self.p)));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::Parameter(format!("amplitude a = {} must be >= 0", self.a)));
        }
        Ok(())
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::OneSignPower => {
                if u > 0.0 {
                    self.a * u.powf(self.p - 1.0)
                } else {
                    0.0
                }
            }
            Family::OddPower => self.a * u.abs().powf(self.p - 2.0) * u,
        }
    }

    #[inline]
    pub fn primitive(&self, u: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::OneSignPower => {
                if u > 0.0 {
                    self.a * u.powf(self.p) / self.p
                } else {
                    0.0
                }
            }
            Family::OddPower => self.a * u.abs().powf(self.p) / self.p,
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::OneSignPower => {
                if u > 0.0 {
                    self.a * (self.p - 1.0) * u.powf(self.p - 2.0)
                } else {
                    0.0
                }
            }
            Family::OddPower => self.a * (self.p - 1.0) * u.abs().powf(self.p - 2.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.family == Family::Zero || self.a == 0.0
    }
}

/// External potential `V`; the problem samples `V(εx)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Constant { v0: f64 },
    /// `V = V₀ + κ·d(x)²` with the harmonic distance
    /// `d² = 1/Σ_i |x − y_i|^{−2}`, which vanishes exactly on the centers
    /// and is smooth elsewhere.
    MultiWell { v0: f64, kappa: f64, centers: Vec<[f64; 3]> },
    RadialCoercive { v0: f64, kappa: f64 },
    /// Samples of `V(x)` on their own grid, trilinearly interpolated.
    UserField(ScalarField),
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let v0 = self.v0();
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(Error::Parameter(format!("inf V = {v0} must be positive")));
        }
        match self {
            Potential::MultiWell { kappa, centers, .. } => {
                if centers.is_empty() {
                    return Err(Error::Parameter("multi-well potential needs at least one center".into()));
                }
                if !(*kappa >= 0.0) {
                    return Err(Error::Parameter(format!("stiffness {kappa} must be >= 0")));
                }
            }
            Potential::RadialCoercive { kappa, .. } if !(*kappa >= 0.0) => {
                return Err(Error::Parameter(format!("stiffness {kappa} must be >= 0")));
            }
            _ => {}
        }
        Ok(())
    }

    /// `inf V`.
    pub fn v0(&self) -> f64 {
        match self {
            Potential::Constant { v0 }
            | Potential::MultiWell { v0, .. }
            | Potential::RadialCoercive { v0, .. } => *v0,
            Potential::UserField(f) => f.min(),
        }
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        match self {
            Potential::Constant { v0 } => *v0,
            Potential::MultiWell { v0, kappa, centers } => {
                let mut inv = 0.0;
                for y in centers {
                    let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2);
                    if d2 == 0.0 {
                        return *v0;
                    }
                    inv += 1.0 / d2;
                }
                v0 + kappa / inv
            }
            Potential::RadialCoercive { v0, kappa } => v0 + kappa * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]),
            Potential::UserField(f) => trilinear(f, x),
        }
    }

    /// Well centers, when the potential has a finite minimum set.
    pub fn centers(&self) -> Vec<[f64; 3]> {
        match self {
            Potential::MultiWell { centers, .. } => centers.clone(),
            Potential::RadialCoercive { .. } => vec![[0.0; 3]],
            _ => Vec::new(),
        }
    }
}

fn trilinear(f: &ScalarField, x: [f64; 3]) -> f64 {
    let g = f.grid();
    let n = g.n();
    let h = g.spacing();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let s = ((x[a] + g.half_len()) / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        base[a] = i;
        frac[a] = s - i as f64;
    }
    let v = f.values();
    let mut acc = 0.0;
    for di in 0..2 {
        for dj in 0..2 {
            for dk in 0..2 {
                let w = (if di == 0 { 1.0 - frac[0] } else { frac[0] })
                    * (if dj == 0 { 1.0 - frac[1] } else { frac[1] })
                    * (if dk == 0 { 1.0 - frac[2] } else { frac[2] });
                acc += w * v[g.index(base[0] + di, base[1] + dj, base[2] + dk)];
            }
        }
    }
    acc
}

/// A discretized constrained energy `½⟨u, Lu⟩ + ∫F(u)` on `{⟨φ_u, u²⟩ = c}`.
///
/// `linear` returns the L²-representation of the quadratic form with respect
/// to `inner`.
pub trait Landscape {
    fn dim(&self) -> usize;
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
    fn integral(&self, a: &[f64]) -> f64;
    fn linear(&self, u: &[f64]) -> Vec<f64>;
    fn potential(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn precondition(&self, v: &[f64]) -> Vec<f64>;
    fn nonlinearity(&self) -> &Nonlinearity;
    fn level(&self) -> f64;
}

/// Energy, gradients and multiplier at one point, with the intermediate
/// fields kept for reuse.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub u: Vec<f64>,
    pub lu: Vec<f64>,
    pub phi: Vec<f64>,
    /// `g = Lu + f(u)`.
    pub grad: Vec<f64>,
    /// `b = φ_u u`, so that `G′(u)[v] = 4⟨b, v⟩`.
    pub cgrad: Vec<f64>,
    pub energy: f64,
    pub constraint: f64,
    pub lambda: f64,
    pub residual: f64,
    pub grad_norm: f64,
}

pub fn energy_from_parts<L: Landscape + ?Sized>(land: &L, u: &[f64], lu: &[f64]) -> f64 {
    let nl = land.nonlinearity();
    let quad = 0.5 * land.inner(u, lu);
    if nl.is_zero() {
        return quad;
    }
    let big_f: Vec<f64> = u.iter().map(|&v| nl.primitive(v)).collect();
    quad + land.integral(&big_f)
}

pub fn evaluate<L: Landscape + ?Sized>(land: &L, u: Vec<f64>) -> Result<Evaluation> {
    let lu = land.linear(&u);
    let phi = land.potential(&u)?;
    evaluate_with(land, u, lu, phi)
}

/// Assemble an [`Evaluation`] from precomputed `Lu` and `φ_u`.
pub fn evaluate_with<L: Landscape + ?Sized>(land: &L, u: Vec<f64>, lu: Vec<f64>, phi: Vec<f64>) -> Result<Evaluation> {
    let nl = land.nonlinearity();
    let energy = energy_from_parts(land, &u, &lu);
    let grad: Vec<f64> = if nl.is_zero() {
        lu.clone()
    } else {
        lu.iter().zip(&u).map(|(l, &v)| l + nl.f(v)).collect()
    };
    let cgrad: Vec<f64> = phi.iter().zip(&u).map(|(p, v)| p * v).collect();
    let constraint = land.inner(&cgrad, &u);
    if !(constraint > 0.0) {
        return Err(Error::Degenerate("constraint value G(u) is zero"));
    }
    let lambda = -land.inner(&grad, &u) / constraint;
    let res: Vec<f64> = grad.iter().zip(&cgrad).map(|(g, b)| g + lambda * b).collect();
    let residual = land.inner(&res, &res).sqrt();
    let grad_norm = land.inner(&grad, &grad).sqrt();
    Ok(Evaluation { u, lu, phi, grad, cgrad, energy, constraint, lambda, residual, grad_norm })
}

/// Full problem instance on the 3D box.
#[derive(Debug)]
pub struct Problem {
    grid: GridSpec,
    potential: Potential,
    eps: f64,
    nonlinearity: Nonlinearity,
    level: f64,
    v_eps: Vec<f64>,
    v0: f64,
    rho: f64,
    spectral: Spectral,
    kernel: KernelPlan,
}

impl Problem {
    pub fn new(grid: GridSpec, potential: Potential, eps: f64, nonlinearity: Nonlinearity, level: f64) -> Result<Self> {
        Self::with_kernel(grid, potential, eps, nonlinearity, level, KernelPlan::new(grid))
    }

    pub fn with_kernel(
        grid: GridSpec,
        potential: Potential,
        eps: f64,
        nonlinearity: Nonlinearity,
        level: f64,
        kernel: KernelPlan,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Parameter(format!("eps = {eps} must be positive")));
        }
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::Parameter(format!("constraint level c = {level} must be positive")));
        }
        if kernel.grid() != &grid {
            return Err(Error::Dimension { expected: grid.len(), got: kernel.grid().len() });
        }
        potential.validate()?;
        nonlinearity.validate()?;
        let v_eps: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let [x, y, z] = grid.point(idx);
                potential.value([eps * x, eps * y, eps * z])
            })
            .collect();
        let v0 = potential.v0();
        Ok(Problem {
            grid,
            potential,
            eps,
            nonlinearity,
            level,
            v_eps,
            v0,
            rho: f64::INFINITY,
            spectral: Spectral::new(grid),
            kernel,
        })
    }

    /// Truncation radius of the barycenter map used for records.
    pub fn with_barycenter_radius(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn external_potential(&self) -> &Potential {
        &self.potential
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn barycenter_radius(&self) -> f64 {
        self.rho
    }

    pub fn kernel(&self) -> &KernelPlan {
        &self.kernel
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Cached samples of `V(εx)`.
    pub fn v_field(&self) -> ScalarField {
        ScalarField::from_vec(self.grid, self.v_eps.clone())
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::Dimension { expected: self.grid.len(), got: u.grid().len() });
        }
        Ok(())
    }

    pub fn field(&self, values: Vec<f64>) -> ScalarField {
        ScalarField::from_vec(self.grid, values)
    }
}

impl Landscape for Problem {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.cell_volume() * dot_slices(a, b)
    }

    fn integral(&self, a: &[f64]) -> f64 {
        self.grid.cell_volume() * compensated_sum(a.iter().copied())
    }

    fn linear(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.spectral.neg_laplacian(u);
        for ((o, v), x) in out.iter_mut().zip(&self.v_eps).zip(u) {
            *o += v * x;
        }
        out
    }

    fn potential(&self, u: &[f64]) -> Result<Vec<f64>> {
        clamp_dust(self.kernel.convolve(&square(u)))
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let v0 = self.v0;
        self.spectral.apply_symbol(v, |k2| 1.0 / (k2 + v0))
    }

    fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    fn level(&self) -> f64 {
        self.level
    }
}

/// `I_ε(u) = ½∫|∇u|² + ½∫V(εx)u² + ∫F(u)`.
pub fn energy(p: &Problem, u: &ScalarField) -> Result<f64> {
    p.check(u)?;
    let lu = p.linear(u.values());
    Ok(energy_from_parts(p, u.values(), &lu))
}

/// `‖u‖²_{W_ε} = ∫|∇u|² + ∫V(εx)u²`.
pub fn w_norm_sq(p: &Problem, u: &ScalarField) -> Result<f64> {
    p.check(u)?;
    let lu = p.linear(u.values());
    Ok(p.inner(u.values(), &lu))
}

/// `g = −Δu + V(εx)u + f(u)`, the L² gradient of `I_ε`.
pub fn euclidean_gradient(p: &Problem, u: &ScalarField) -> Result<ScalarField> {
    p.check(u)?;
    let nl = p.nonlinearity;
    let g = p.linear(u.values()).into_iter().zip(u.values()).map(|(l, &v)| l + nl.f(v)).collect();
    Ok(p.field(g))
}

/// `b = φ_u u`.
pub fn constraint_gradient(p: &Problem, u: &ScalarField) -> Result<ScalarField> {
    p.check(u)?;
    let phi = p.potential(u.values())?;
    Ok(p.field(phi.iter().zip(u.values()).map(|(a, b)| a * b).collect()))
}

/// Scale `u` onto the constraint surface: `t = (c/G(u))^{1/4}`.
pub fn project_to_manifold(p: &Problem, u: &ScalarField) -> Result<(f64, ScalarField)> {
    p.check(u)?;
    let phi = p.potential(u.values())?;
    let g = p.inner(&phi, &square(u.values()));
    if !(g > 0.0) {
        return Err(Error::Degenerate("cannot project: G(u) = 0"));
    }
    let t = (p.level / g).powf(0.25);
    Ok((t, u.scaled(t)))
}

/// `λ(u) = −(‖u‖²_{W_ε} + ∫f(u)u)/G(u)`.
pub fn lagrange_multiplier(p: &Problem, u: &ScalarField) -> Result<f64> {
    p.check(u)?;
    Ok(evaluate(p, u.values().to_vec())?.lambda)
}

/// `(‖g + λb‖, λ)`.
pub fn residual(p: &Problem, u: &ScalarField) -> Result<(f64, f64)> {
    p.check(u)?;
    let ev = evaluate(p, u.values().to_vec())?;
    Ok((ev.residual, ev.lambda))
}

/// `v − (⟨v, b⟩/⟨b, b⟩) b`.
pub fn tangent_project(p: &Problem, u: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    p.check(v)?;
    let b = constraint_gradient(p, u)?;
    let bb = b.dot(&b)?;
    if !(bb > 0.0) {
        return Err(Error::Degenerate("constraint gradient vanishes"));
    }
    v.lin_comb(1.0, &b, -v.dot(&b)? / bb)
}

/// Second variation of `u ↦ I_ε(u) + (λ/4)·G(u)` at a fixed point, with
/// `φ_u` and `f′(u)` cached for repeated application.
pub struct HessianOperator<'a> {
    problem: &'a Problem,
    u: Vec<f64>,
    lambda: f64,
    phi: Vec<f64>,
    fprime: Vec<f64>,
}

impl<'a> HessianOperator<'a> {
    pub fn new(problem: &'a Problem, u: &ScalarField, lambda: f64) -> Result<Self> {
        problem.check(u)?;
        let phi = problem.potential(u.values())?;
        let nl = problem.nonlinearity;
        let fprime = u.values().iter().map(|&v| nl.derivative(v)).collect();
        Ok(HessianOperator { problem, u: u.values().to_vec(), lambda, phi, fprime })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    fn finish(&self, v: &[f64], cross: &[f64]) -> Vec<f64> {
        let mut out = self.problem.linear(v);
        for i in 0..out.len() {
            out[i] += self.fprime[i] * v[i] + self.lambda * (self.phi[i] * v[i] + 2.0 * cross[i] * self.u[i]);
        }
        out
    }

    fn product(&self, v: &[f64]) -> Vec<f64> {
        self.u.iter().zip(v).map(|(a, b)| a * b).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let cross = self.problem.kernel.convolve(&self.product(v));
        self.finish(v, &cross)
    }

    /// Two applications sharing one padded convolution.
    pub fn apply_pair(&self, v: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (cv, cw) = self.problem.kernel.convolve_pair(&self.product(v), &self.product(w));
        (self.finish(v, &cv), self.finish(w, &cw))
    }
}

/// `Hv = −Δv + V(εx)v + f′(u)v + λ(φ_u v + 2(K*(uv))u)`.
pub fn hessian_apply(p: &Problem, u: &ScalarField, lambda: f64, v: &ScalarField) -> Result<ScalarField> {
    p.check(v)?;
    let op = HessianOperator::new(p, u, lambda)?;
    Ok(p.field(op.apply(v.values())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Negative,
    Positive,
    SignChanging,
    /// Opposite-sign values too large for one-sign, too small for sign-changing.
    Marginal,
    Zero,
}

/// Negative if `max u ≤ 1e−8‖u‖_∞`; sign-changing if both `min < −θ` and
/// `max > θ` with `θ = 1e−6‖u‖_∞`.
pub fn classify_sign(values: &[f64]) -> SignClass {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let inf = max.abs().max(min.abs());
    if inf == 0.0 {
        return SignClass::Zero;
    }
    if max <= 1e-8 * inf {
        SignClass::Negative
    } else if min >= -1e-8 * inf {
        SignClass::Positive
    } else if min < -1e-6 * inf && max > 1e-6 * inf {
        SignClass::SignChanging
    } else {
        SignClass::Marginal
    }
}

/// The autonomous functional `E_μ` restricted to radial functions, on the
/// control-cell discretization of a [`RadialGrid`].
#[derive(Debug, Clone)]
pub struct RadialProblem {
    grid: RadialGrid,
    mu: f64,
    nonlinearity: Nonlinearity,
    level: f64,
    r: Vec<f64>,
    weights: Vec<f64>,
    /// Stiffness of each interval: `∫ 4πr² dr / dr²`.
    stiff: Vec<f64>,
}

impl RadialProblem {
    pub fn new(grid: RadialGrid, mu: f64, nonlinearity: Nonlinearity, level: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Parameter(format!("mu = {mu} must be positive")));
        }
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::Parameter(format!("constraint level c = {level} must be positive")));
        }
        nonlinearity.validate()?;
        let r = grid.nodes();
        let dr = grid.dr();
        let stiff = (0..grid.m())
            .map(|j| 4.0 * std::f64::consts::PI * (r[j + 1].powi(3) - r[j].powi(3)) / (3.0 * dr * dr))
            .collect();
        Ok(RadialProblem { grid, mu, nonlinearity, level, r, weights: grid.weights(), stiff })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫|u′|² 4πr² dr` for the piecewise-linear interpolant.
    pub fn gradient_sq(&self, u: &[f64]) -> f64 {
        compensated_sum(self.stiff.iter().enumerate().map(|(j, a)| a * (u[j + 1] - u[j]).powi(2)))
    }

    pub fn energy(&self, p: &RadialProfile) -> f64 {
        let lu = self.linear(p.values());
        energy_from_parts(self, p.values(), &lu)
    }

    pub fn constraint(&self, p: &RadialProfile) -> Result<f64> {
        let phi = self.potential(p.values())?;
        Ok(self.inner(&phi, &square(p.values())))
    }
}

impl Landscape for RadialProblem {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        compensated_sum(self.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y))
    }

    fn integral(&self, a: &[f64]) -> f64 {
        dot_slices(&self.weights, a)
    }

    fn linear(&self, u: &[f64]) -> Vec<f64> {
        let m = self.grid.m();
        (0..=m)
            .map(|j| {
                let mut acc = 0.0;
                if j > 0 {
                    acc += self.stiff[j - 1] * (u[j] - u[j - 1]);
                }
                if j < m {
                    acc += self.stiff[j] * (u[j] - u[j + 1]);
                }
                acc / self.weights[j] + self.mu * u[j]
            })
            .collect()
    }

    fn potential(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rho: Vec<f64> = u.iter().zip(&self.weights).map(|(v, w)| w * v * v).collect();
        clamp_dust(radial_convolve(&self.r, &rho))
    }

    /// Solves `(T + μW)x = Wv` for the tridiagonal stiffness `T`.
    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let m = self.grid.m();
        let len = m + 1;
        let a = &self.stiff;
        let diag: Vec<f64> = (0..len)
            .map(|j| {
                let mut d = self.mu * self.weights[j];
                if j > 0 {
                    d += a[j - 1];
                }
                if j < m {
                    d += a[j];
                }
                d
            })
            .collect();
        let rhs: Vec<f64> = v.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
        // Thomas algorithm; off-diagonals are −a_j.
        let mut c_prime = vec![0.0; len];
        let mut d_prime = vec![0.0; len];
        c_prime[0] = -a[0] / diag[0];
        d_prime[0] = rhs[0] / diag[0];
        for j in 1..len {
            let sub = -a[j - 1];
            let denom = diag[j] - sub * c_prime[j - 1];
            if j < m {
                c_prime[j] = -a[j] / denom;
            }
            d_prime[j] = (rhs[j] - sub * d_prime[j - 1]) / denom;
        }
        let mut x = vec![0.0; len];
        x[m] = d_prime[m];
        for j in (0..m).rev() {
            x[j] = d_prime[j] - c_prime[j] * x[j + 1];
        }
        x
    }

    fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    fn level(&self) -> f64 {
        self.level
    }
}
