//! The Bopp–Podolsky potential `φ_u = K * u²` with `K(r) = (1 − e^{−r})/r`.
//!
//! The fast path is a free-space convolution on the 2n zero-padded cube with
//! the kernel sampled in real space, so the Coulomb tail sees no periodic
//! images and the `ξ = 0` singularity of the Fourier symbol never appears.
//! The direct double sum and the radial shell formula are independent slow
//! routes used as oracles.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::fields::{compensated_sum, dot_slices, GridSpec, RadialProfile, ScalarField};

/// `K(r) = (1 − e^{−r})/r`, with `K(0) = 1`.
pub fn kernel(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        -(-r).exp_m1() / r
    }
}

pub struct KernelPlan {
    grid: GridSpec,
    fft: Fft3,
    /// Real transform of the padded kernel, scaled by h³/(2n)³.
    symbol: Vec<f64>,
}

impl std::fmt::Debug for KernelPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelPlan").field("grid", &self.grid).finish()
    }
}

impl KernelPlan {
    pub fn new(grid: GridSpec) -> Self {
        Self::with_kernel(grid, kernel)
    }

    /// Plan for an arbitrary radial kernel; used for fault injection.
    pub fn with_kernel(grid: GridSpec, k: impl Fn(f64) -> f64) -> Self {
        let n = grid.n();
        let m = 2 * n;
        let h = grid.spacing();
        let disp = |j: usize| -> f64 {
            let d = if j <= n { j as f64 } else { j as f64 - m as f64 };
            d * h
        };
        let mut buf = vec![Complex64::default(); m * m * m];
        for i in 0..m {
            let x = disp(i);
            for j in 0..m {
                let y = disp(j);
                for l in 0..m {
                    let z = disp(l);
                    buf[(i * m + j) * m + l] = Complex64::new(k((x * x + y * y + z * z).sqrt()), 0.0);
                }
            }
        }
        let fft = Fft3::new(m);
        fft.forward(&mut buf);
        let scale = grid.cell_volume() / (m * m * m) as f64;
        let symbol = buf.into_iter().map(|z| z.re * scale).collect();
        KernelPlan { grid, fft, symbol }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::Dimension { expected: self.grid.len(), got: u.grid().len() });
        }
        Ok(())
    }

    /// `h³ Σ_j K(|x_i − x_j|) ρ_j` for a density on the grid.
    pub fn convolve(&self, density: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let m = 2 * n;
        let mut buf = vec![Complex64::default(); m * m * m];
        self.embed(&mut buf, |idx| Complex64::new(density[idx], 0.0));
        self.apply_symbol(&mut buf);
        let mut out = vec![0.0; n * n * n];
        self.extract(&buf, |idx, z| out[idx] = z.re);
        out
    }

    /// Two convolutions for the price of one: the padded kernel is even, so
    /// its transform is real and the real/imaginary channels stay separate.
    pub fn convolve_pair(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n();
        let m = 2 * n;
        let mut buf = vec![Complex64::default(); m * m * m];
        self.embed(&mut buf, |idx| Complex64::new(a[idx], b[idx]));
        self.apply_symbol(&mut buf);
        let mut out_a = vec![0.0; n * n * n];
        let mut out_b = vec![0.0; n * n * n];
        self.extract(&buf, |idx, z| {
            out_a[idx] = z.re;
            out_b[idx] = z.im;
        });
        (out_a, out_b)
    }

    fn embed(&self, buf: &mut [Complex64], mut value: impl FnMut(usize) -> Complex64) {
        let n = self.grid.n();
        let m = 2 * n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    buf[(i * m + j) * m + k] = value((i * n + j) * n + k);
                }
            }
        }
    }

    fn extract(&self, buf: &[Complex64], mut put: impl FnMut(usize, Complex64)) {
        let n = self.grid.n();
        let m = 2 * n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    put((i * n + j) * n + k, buf[(i * m + j) * m + k]);
                }
            }
        }
    }

    fn apply_symbol(&self, buf: &mut [Complex64]) {
        self.fft.forward_low_octant(buf);
        for (z, s) in buf.iter_mut().zip(&self.symbol) {
            *z *= *s;
        }
        self.fft.inverse_low_octant(buf);
    }
}

/// Clamp FFT round-off below zero; anything beyond `-1e-12·max` is a real error.
pub(crate) fn clamp_dust(mut phi: Vec<f64>) -> Result<Vec<f64>> {
    let max = phi.iter().copied().fold(0.0, f64::max);
    let min = phi.iter().copied().fold(0.0, f64::min);
    if min < -1e-12 * max {
        return Err(Error::NegativeDust { min, max });
    }
    for v in phi.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(phi)
}

pub(crate) fn square(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v * v).collect()
}

pub fn solve_potential(plan: &KernelPlan, u: &ScalarField) -> Result<ScalarField> {
    plan.check(u)?;
    let phi = clamp_dust(plan.convolve(&square(u.values())))?;
    Ok(ScalarField::from_vec(*plan.grid(), phi))
}

/// `K * (v·w)`.
pub fn bilinear_potential(plan: &KernelPlan, v: &ScalarField, w: &ScalarField) -> Result<ScalarField> {
    plan.check(v)?;
    plan.check(w)?;
    let rho: Vec<f64> = v.values().iter().zip(w.values()).map(|(a, b)| a * b).collect();
    Ok(ScalarField::from_vec(*plan.grid(), plan.convolve(&rho)))
}

/// `G(u) = ∫ φ_u u²`.
pub fn constraint_value(plan: &KernelPlan, u: &ScalarField) -> Result<f64> {
    let phi = solve_potential(plan, u)?;
    let rho = square(u.values());
    Ok(u.grid().cell_volume() * dot_slices(phi.values(), &rho))
}

/// O(n⁶) double sum with the fast path's quadrature convention.
pub fn solve_potential_direct(u: &ScalarField) -> Result<ScalarField> {
    let grid = *u.grid();
    let n = grid.n();
    if n > 32 {
        return Err(Error::TooLarge(n));
    }
    let h = grid.spacing();
    let mut table = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let r = h * ((a * a + b * b + c * c) as f64).sqrt();
                table[(a * n + b) * n + c] = kernel(r);
            }
        }
    }
    let rho = square(u.values());
    let hv = grid.cell_volume();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for p in 0..n {
                    let a = i.abs_diff(p);
                    for q in 0..n {
                        let b = j.abs_diff(q);
                        let row = (p * n + q) * n;
                        let trow = (a * n + b) * n;
                        for s in 0..n {
                            acc += table[trow + k.abs_diff(s)] * rho[row + s];
                        }
                    }
                }
                out[(i * n + j) * n + k] = hv * acc;
            }
        }
    }
    Ok(ScalarField::from_vec(grid, out))
}

/// `sinh(s)/s`, equal to 1 at 0.
fn sinhc(s: f64) -> f64 {
    if s < 1e-4 {
        1.0 + s * s / 6.0
    } else {
        s.sinh() / s
    }
}

/// Radial potential from the shell decomposition `K = 1/r − e^{−r}/r`:
/// `φ(r) = Σ_j w_j u_j² k(r, r_j)` with
/// `k(r, s) = 1/max(r,s) − sinh(min(r,s))·e^{−max(r,s)}/(r s)`, evaluated in
/// O(m) with prefix/suffix sums over the control-cell weights `w_j`.
pub fn solve_potential_radial(p: &RadialProfile) -> RadialProfile {
    let grid = *p.grid();
    let rho: Vec<f64> = p.values().iter().zip(grid.weights()).map(|(u, w)| w * u * u).collect();
    RadialProfile::from_vec(grid, radial_convolve(&grid.nodes(), &rho))
}

/// `Σ_j ρ_j k(r_i, r_j)` for already weighted shell masses `ρ_j`.
pub(crate) fn radial_convolve(r: &[f64], rho: &[f64]) -> Vec<f64> {
    let len = r.len();
    // prefix over j <= i
    let mut a = vec![0.0; len];
    let mut b = vec![0.0; len];
    let (mut sa, mut sb) = (0.0, 0.0);
    for j in 0..len {
        sa += rho[j];
        sb += rho[j] * sinhc(r[j]);
        a[j] = sa;
        b[j] = sb;
    }
    // suffix over j > i
    let mut c = vec![0.0; len];
    let mut d = vec![0.0; len];
    let (mut sc, mut sd) = (0.0, 0.0);
    for j in (0..len).rev() {
        c[j] = sc;
        d[j] = sd;
        if r[j] > 0.0 {
            sc += rho[j] / r[j];
            sd += rho[j] * (-r[j]).exp() / r[j];
        }
    }
    (0..len)
        .map(|i| {
            let ri = r[i];
            if ri == 0.0 {
                // k(0, s) = (1 − e^{−s})/s
                rho[i] + compensated_sum((i + 1..len).map(|j| rho[j] * kernel(r[j])))
            } else {
                (a[i] - (-ri).exp() * b[i]) / ri + c[i] - sinhc(ri) * d[i]
            }
        })
        .collect()
}

/// Radial shell kernel `k(r, s)`, the spherical average of `K(|x − y|)`
/// over |x| = r, |y| = s.
pub fn shell_kernel(r: f64, s: f64) -> f64 {
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    if hi == 0.0 {
        return 1.0;
    }
    if lo == 0.0 {
        return kernel(hi);
    }
    1.0 / hi - sinhc(lo) * (-hi).exp() / hi
}

/// `G` for a radial profile with the control-cell quadrature.
pub fn constraint_value_radial(p: &RadialProfile) -> f64 {
    let phi = solve_potential_radial(p);
    let w = p.grid().weights();
    compensated_sum(
        p.values().iter().zip(phi.values()).zip(&w).map(|((u, f), w)| w * u * u * f),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::RadialGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_max(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    fn gaussian(grid: GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |[x, y, z]| (-(x * x + y * y + z * z)).exp())
    }

    #[test]
    fn kernel_limits_and_monotonicity() {
        assert_eq!(kernel(0.0), 1.0);
        assert!((kernel(1e-9) - 1.0).abs() < 1e-9);
        let mut prev = 1.0;
        for i in 1..2000 {
            let k = kernel(i as f64 * 0.01);
            assert!(k > 0.0 && k < prev);
            prev = k;
        }
    }

    #[test]
    fn zero_field_gives_zero_potential() {
        let g = GridSpec::new(8, 2.0).unwrap();
        let plan = KernelPlan::new(g);
        let phi = solve_potential(&plan, &ScalarField::zeros(g)).unwrap();
        assert!(phi.values().iter().all(|&v| v == 0.0));
        assert_eq!(constraint_value(&plan, &ScalarField::zeros(g)).unwrap(), 0.0);
        let direct = solve_potential_direct(&ScalarField::zeros(g)).unwrap();
        assert!(direct.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn point_source_reproduces_kernel() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let c = g.index(8, 8, 8);
        let mut vals = vec![0.0; g.len()];
        vals[c] = 3.0;
        let u = ScalarField::new(g, vals).unwrap();
        let phi = solve_potential(&KernelPlan::new(g), &u).unwrap();
        let h = g.spacing();
        for idx in 0..g.len() {
            let [x, y, z] = g.point(idx);
            let r = (x * x + y * y + z * z).sqrt();
            let expect = h.powi(3) * 9.0 * kernel(r);
            assert!((phi.values()[idx] - expect).abs() <= 1e-12 * h.powi(3) * 9.0, "idx {idx}");
        }
    }

    #[test]
    fn fast_matches_direct_on_gaussian() {
        let g = GridSpec::new(16, 6.0).unwrap();
        let u = gaussian(g);
        let fast = solve_potential(&KernelPlan::new(g), &u).unwrap();
        let direct = solve_potential_direct(&u).unwrap();
        assert!(rel_max(fast.values(), direct.values()) < 1e-10);
    }

    #[test]
    fn fast_matches_direct_on_random_field() {
        let g = GridSpec::new(12, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = ScalarField::from_fn(g, |_| rng.random_range(-1.0..1.0));
        let fast = solve_potential(&KernelPlan::new(g), &u).unwrap();
        let direct = solve_potential_direct(&u).unwrap();
        assert!(rel_max(fast.values(), direct.values()) < 1e-10);
    }

    #[test]
    fn direct_refuses_large_grids() {
        let g = GridSpec::new(34, 3.0).unwrap();
        assert!(matches!(solve_potential_direct(&ScalarField::zeros(g)), Err(Error::TooLarge(34))));
    }

    #[test]
    fn direct_is_symmetric_for_symmetric_sources() {
        let g = GridSpec::new(10, 2.5).unwrap();
        let mut vals = vec![0.0; g.len()];
        // x = ±1 on the axis through the origin (index 5 is x = 0)
        vals[g.index(3, 5, 5)] = 1.0;
        vals[g.index(7, 5, 5)] = 1.0;
        let phi = solve_potential_direct(&ScalarField::new(g, vals).unwrap()).unwrap();
        let n = g.n();
        for i in 1..n {
            for j in 1..n {
                for k in 1..n {
                    let a = phi.values()[g.index(i, j, k)];
                    let b = phi.values()[g.index(n - i, n - j, n - k)];
                    assert!((a - b).abs() <= 1e-14 * a.abs());
                }
            }
        }
    }

    #[test]
    fn bilinear_is_symmetric_and_extends_potential() {
        let g = GridSpec::new(8, 2.0).unwrap();
        let plan = KernelPlan::new(g);
        let v = ScalarField::from_fn(g, |[x, y, z]| (-(x * x + 2.0 * y * y + z * z)).exp());
        let w = ScalarField::from_fn(g, |[x, y, _]| x * (-(x * x + y * y)).exp());
        let vw = bilinear_potential(&plan, &v, &w).unwrap();
        let wv = bilinear_potential(&plan, &w, &v).unwrap();
        assert_eq!(vw, wv);
        assert_eq!(bilinear_potential(&plan, &v, &v).unwrap(), ScalarField::from_vec(g, plan.convolve(&square(v.values()))));
        let phi = solve_potential(&plan, &v).unwrap();
        let vv = bilinear_potential(&plan, &v, &v).unwrap();
        assert_eq!(phi, vv);
        let zero = bilinear_potential(&plan, &v, &ScalarField::zeros(g)).unwrap();
        assert!(zero.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pair_convolution_matches_single() {
        let g = GridSpec::new(8, 2.0).unwrap();
        let plan = KernelPlan::new(g);
        let a: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.7).cos()).collect();
        let (pa, pb) = plan.convolve_pair(&a, &b);
        assert!(rel_max(&pa, &plan.convolve(&a)) < 1e-13);
        assert!(rel_max(&pb, &plan.convolve(&b)) < 1e-13);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let plan = KernelPlan::new(GridSpec::new(8, 2.0).unwrap());
        let u = ScalarField::zeros(GridSpec::new(10, 2.0).unwrap());
        assert!(matches!(solve_potential(&plan, &u), Err(Error::Dimension { .. })));
    }

    #[test]
    fn quartic_homogeneity() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let plan = KernelPlan::new(g);
        let u = ScalarField::from_fn(g, |[x, y, z]| (-(x * x + y * y + z * z) / 2.0).exp() * (1.0 + 0.3 * x));
        let base = constraint_value(&plan, &u).unwrap();
        for t in [0.5, 2.0, 3.0] {
            let got = constraint_value(&plan, &u.scaled(t)).unwrap();
            assert!((got - t.powi(4) * base).abs() <= 1e-12 * got);
        }
    }

    #[test]
    fn constraint_matches_brute_force_double_sum() {
        let g = GridSpec::new(16, 5.0).unwrap();
        let u = gaussian(g);
        let fast = constraint_value(&KernelPlan::new(g), &u).unwrap();
        let h3 = g.cell_volume();
        let pts: Vec<[f64; 3]> = (0..g.len()).map(|i| g.point(i)).collect();
        let rho = square(u.values());
        let mut acc = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if rho[i] < 1e-300 {
                continue;
            }
            for (j, q) in pts.iter().enumerate() {
                let r = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                acc += kernel(r) * rho[i] * rho[j];
            }
        }
        let brute = h3 * h3 * acc;
        assert!((fast - brute).abs() / brute < 1e-10, "{fast} vs {brute}");
    }

    #[test]
    fn radial_zero_and_single_shell() {
        let rg = RadialGrid::new(200, 10.0).unwrap();
        let zero = solve_potential_radial(&RadialProfile::from_fn(rg, |_| 0.0));
        assert!(zero.values().iter().all(|&v| v == 0.0));

        // all mass on one shell at s0: φ(r) = W·k(r, s0) with
        // k(r, s0) = 1/r − sinh(s0)e^{−r}/(r s0) outside and
        // 1/s0 − sinh(r)e^{−s0}/(r s0) inside.
        let j0 = 60;
        let s0 = rg.r(j0);
        let mut vals = vec![0.0; rg.len()];
        vals[j0] = 0.7;
        let p = RadialProfile::new(rg, vals).unwrap();
        let big_w = rg.weights()[j0] * 0.49;
        let phi = solve_potential_radial(&p);
        for (j, &got) in phi.values().iter().enumerate() {
            let r = rg.r(j);
            let expect = if r == 0.0 {
                big_w * (1.0 - (-s0).exp()) / s0
            } else if r >= s0 {
                big_w * (1.0 / r - s0.sinh() * (-r).exp() / (r * s0))
            } else {
                big_w * (1.0 / s0 - r.sinh() * (-s0).exp() / (r * s0))
            };
            assert!((got - expect).abs() <= 1e-12 * big_w, "r = {r}: {got} vs {expect}");
        }
    }

    #[test]
    fn radial_prefix_sums_match_pairwise_sum() {
        let rg = RadialGrid::new(300, 12.0).unwrap();
        let p = RadialProfile::from_fn(rg, |r| (1.0 + r) * (-r).exp());
        let fast = solve_potential_radial(&p);
        let r = rg.nodes();
        let w = rg.weights();
        for i in (0..rg.len()).step_by(17) {
            let slow: f64 = (0..rg.len()).map(|j| w[j] * p.values()[j].powi(2) * shell_kernel(r[i], r[j])).sum();
            assert!((fast.values()[i] - slow).abs() < 1e-11 * slow.abs());
        }
    }

    #[test]
    fn radial_matches_3d_potential() {
        let rg = RadialGrid::new(4000, 13.0).unwrap();
        let prof = RadialProfile::from_fn(rg, |r| (-r * r / 2.0).exp());
        let phi_r = solve_potential_radial(&prof);
        // the sampled kernel's cusp at the origin gives O(h^4) error
        let g = GridSpec::new(64, 7.0).unwrap();
        let u = ScalarField::from_fn(g, |[x, y, z]| (-(x * x + y * y + z * z) / 2.0).exp());
        let phi = solve_potential(&KernelPlan::new(g), &u).unwrap();
        let scale = phi.max_abs();
        let mut err = 0.0f64;
        for idx in 0..g.len() {
            let [x, y, z] = g.point(idx);
            let r = (x * x + y * y + z * z).sqrt();
            err = err.max((phi.values()[idx] - phi_r.interpolate(r)).abs());
        }
        assert!(err / scale < 1e-4, "relative error {}", err / scale);
    }
}
