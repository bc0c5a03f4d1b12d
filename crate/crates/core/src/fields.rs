//! Uniform-grid scalar fields on the periodic box `[-L, L)^3`, spectral
//! derivatives, quadrature, the BPF1 on-disk format, and radial grids.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;

/// Neumaier-compensated sum; fixed order so repeated runs agree bitwise.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    half_len: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_len: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Grid(format!("n must be even and >= 8, got {n}")));
        }
        if !(half_len > 0.0 && half_len.is_finite()) {
            return Err(Error::Grid(format!("half length must be positive, got {half_len}")));
        }
        Ok(GridSpec { n, half_len })
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Half box length L.
    pub fn half_len(&self) -> f64 {
        self.half_len
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_len / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_len + i as f64 * self.spacing()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// Position of flat index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Largest resolved wavenumber per axis.
    pub fn nyquist(&self) -> f64 {
        PI * (self.n / 2) as f64 / self.half_len
    }

    fn wavenumber(&self, m: usize) -> f64 {
        let n = self.n;
        let freq = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
        PI * freq / self.half_len
    }
}

/// Real field sampled on a [`GridSpec`], row-major with x slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_vec(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        ScalarField { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, t: f64) -> ScalarField {
        self.map(|v| t * v)
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(ScalarField { grid: self.grid, values })
    }

    pub(crate) fn check_same(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension { expected: self.grid.len(), got: other.grid.len() });
        }
        Ok(())
    }

    /// L² inner product `h³ Σ a b`.
    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.grid.cell_volume() * dot_slices(&self.values, &other.values))
    }

    pub fn norm_l2(&self) -> f64 {
        (self.grid.cell_volume() * dot_slices(&self.values, &self.values)).sqrt()
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        let s = compensated_sum(self.values.iter().map(|v| v.abs().powf(p)));
        (self.grid.cell_volume() * s).powf(1.0 / p)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic roll by whole cells: `out[i + s] = self[i]`.
    pub fn shifted(&self, s: [isize; 3]) -> ScalarField {
        let n = self.grid.n as isize;
        let mut out = vec![0.0; self.values.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let src = self.grid.index(i as usize, j as usize, k as usize);
                    let dst = self.grid.index(
                        (i + s[0]).rem_euclid(n) as usize,
                        (j + s[1]).rem_euclid(n) as usize,
                        (k + s[2]).rem_euclid(n) as usize,
                    );
                    out[dst] = self.values[src];
                }
            }
        }
        ScalarField { grid: self.grid, values: out }
    }
}

/// Midpoint rule on the periodic box.
pub fn integrate(u: &ScalarField) -> f64 {
    u.grid.cell_volume() * compensated_sum(u.values.iter().copied())
}

/// `∫|∇u|²` with spectral differentiation.
pub fn gradient_sq_integral(u: &ScalarField) -> f64 {
    Spectral::new(*u.grid()).gradient_sq_integral(u.values())
}

/// Spectral differential operators on one grid.
#[derive(Debug)]
pub struct Spectral {
    grid: GridSpec,
    fft: Fft3,
    k2: Vec<f64>,
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.n();
        let ks: Vec<f64> = (0..n).map(|m| grid.wavenumber(m)).collect();
        let mut k2 = Vec::with_capacity(grid.len());
        for a in &ks {
            for b in &ks {
                for c in &ks {
                    k2.push(a * a + b * b + c * c);
                }
            }
        }
        Spectral { grid, fft: Fft3::new(n), k2 }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Multiply by `symbol(|k|²)` in Fourier space.
    pub fn apply_symbol(&self, u: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        let norm = 1.0 / self.grid.len() as f64;
        for (z, &k2) in buf.iter_mut().zip(&self.k2) {
            *z *= symbol(k2) * norm;
        }
        self.fft.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `−Δu`.
    pub fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.apply_symbol(u, |k2| k2)
    }

    pub fn gradient_sq_integral(&self, u: &[f64]) -> f64 {
        let lap = self.neg_laplacian(u);
        self.grid.cell_volume() * dot_slices(u, &lap)
    }

    /// Evaluate the trigonometric interpolant of `u` at arbitrary points.
    pub fn interpolate(&self, u: &[f64], points: &[[f64; 3]]) -> Vec<f64> {
        let n = self.grid.n();
        let l = self.grid.half_len();
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        let norm = 1.0 / self.grid.len() as f64;
        let freq = |a: usize| if a < n / 2 { a as f64 } else { a as f64 - n as f64 };
        let phases = |x: f64| -> Vec<Complex64> {
            (0..n).map(|a| Complex64::from_polar(1.0, PI * freq(a) * (x + l) / l)).collect()
        };
        points
            .iter()
            .map(|&[x, y, z]| {
                let (px, py, pz) = (phases(x), phases(y), phases(z));
                let mut acc = Complex64::default();
                for a in 0..n {
                    let mut row = Complex64::default();
                    for b in 0..n {
                        let base = (a * n + b) * n;
                        let mut inner = Complex64::default();
                        for c in 0..n {
                            inner += buf[base + c] * pz[c];
                        }
                        row += inner * py[b];
                    }
                    acc += row * px[a];
                }
                acc.re * norm
            })
            .collect()
    }

    /// Largest eigenvalue of the discrete `−Δ` (corner of the wavenumber cube).
    pub fn max_k2(&self) -> f64 {
        self.k2.iter().copied().fold(0.0, f64::max)
    }
}

const MAGIC: &[u8; 4] = b"BPF1";

pub fn write_bpf1<W: Write>(mut w: W, u: &ScalarField) -> Result<()> {
    let n = u.grid.n() as u32;
    w.write_all(MAGIC)?;
    for _ in 0..3 {
        w.write_all(&n.to_le_bytes())?;
    }
    w.write_all(&u.grid.half_len().to_le_bytes())?;
    for v in &u.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bpf1<R: Read>(mut r: R) -> Result<ScalarField> {
    let eof = |e: io::Error| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::Format("truncated file".into())
        } else {
            Error::Io(e)
        }
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(eof)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(eof)?;
        *d = u32::from_le_bytes(b) as usize;
    }
    if dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(Error::Format(format!("non-cubic dims {dims:?}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(eof)?;
    let half_len = f64::from_le_bytes(b8);
    let grid = GridSpec::new(dims[0], half_len).map_err(|e| Error::Format(e.to_string()))?;
    let mut payload = vec![0u8; grid.len() * 8];
    r.read_exact(&mut payload).map_err(eof)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ScalarField::new(grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_field(path: impl AsRef<Path>, u: &ScalarField) -> Result<()> {
    write_bpf1(BufWriter::new(File::create(path)?), u)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    read_bpf1(BufReader::new(File::open(path)?))
}

/// Radial grid with nodes `r_j = j·r_max/m`, `j = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    m: usize,
    r_max: f64,
}

impl RadialGrid {
    pub fn new(m: usize, r_max: f64) -> Result<Self> {
        if m < 4 {
            return Err(Error::Grid(format!("radial grid needs m >= 4, got {m}")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Grid(format!("r_max must be positive, got {r_max}")));
        }
        Ok(RadialGrid { m, r_max })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of nodes (m + 1).
    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.m as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.r(j)).collect()
    }

    /// Volume of the spherical control cell around each node; they tile the
    /// ball of radius `r_max` exactly.
    pub fn weights(&self) -> Vec<f64> {
        let dr = self.dr();
        (0..self.len())
            .map(|j| {
                let lo = (self.r(j) - 0.5 * dr).max(0.0);
                let hi = (self.r(j) + 0.5 * dr).min(self.r_max);
                4.0 * PI / 3.0 * (hi.powi(3) - lo.powi(3))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(RadialProfile { grid, values })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        RadialProfile { grid, values: grid.nodes().into_iter().map(f).collect() }
    }

    pub(crate) fn from_vec(grid: RadialGrid, values: Vec<f64>) -> Self {
        RadialProfile { grid, values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ u 4πr² dr`.
    pub fn integrate(&self) -> f64 {
        dot_slices(&self.values, &self.grid.weights())
    }

    pub fn norm_l2(&self) -> f64 {
        let w = self.grid.weights();
        compensated_sum(self.values.iter().zip(&w).map(|(v, w)| v * v * w)).sqrt()
    }

    /// Cubic (Catmull–Rom) interpolation in r, using the even extension
    /// across the origin; zero beyond `r_max`.
    pub fn interpolate(&self, r: f64) -> f64 {
        let r = r.abs();
        let dr = self.grid.dr();
        let m = self.grid.m;
        if r > self.grid.r_max {
            return 0.0;
        }
        let x = r / dr;
        let j = (x.floor() as usize).min(m - 1);
        let s = x - j as f64;
        let at = |i: isize| -> f64 {
            let idx = i.unsigned_abs();
            if idx > m {
                0.0
            } else {
                self.values[idx]
            }
        };
        let j = j as isize;
        let (p0, p1, p2, p3) = (at(j - 1), at(j), at(j + 1), at(j + 2));
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = -0.5 * p0 + 0.5 * p2;
        ((a * s + b) * s + c) * s + p1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |[x, y, z]| (-(x * x + y * y + z * z)).exp())
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(6, 1.0).is_err());
        assert!(GridSpec::new(9, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        let g = GridSpec::new(8, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.len(), 512);
    }

    #[test]
    fn integrate_constant_and_zero() {
        let g = GridSpec::new(8, 4.0).unwrap();
        assert_eq!(integrate(&ScalarField::constant(g, 1.0)), 512.0);
        assert_eq!(integrate(&ScalarField::zeros(g)), 0.0);
    }

    #[test]
    fn integrate_gaussian_matches_closed_form() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let exact = PI.powf(1.5);
        let got = integrate(&gaussian(g));
        assert!((got - exact).abs() / exact < 1e-8, "{got} vs {exact}");
    }

    #[test]
    fn gradient_of_plane_wave() {
        let g = GridSpec::new(16, 3.0).unwrap();
        let l = g.half_len();
        let u = ScalarField::from_fn(g, |[x, _, _]| (PI * x / l).sin());
        let exact = (PI / l).powi(2) * (2.0 * l).powi(3) / 2.0;
        let got = gradient_sq_integral(&u);
        assert!((got - exact).abs() / exact < 1e-12);
        assert_eq!(gradient_sq_integral(&ScalarField::zeros(g)), 0.0);
    }

    #[test]
    fn gradient_of_gaussian() {
        // |∇e^{-r²}|² = 4r²e^{-2r²}, so ∫ = 16π·∫r⁴e^{-2r²}dr = (3/2)·π·(π/2)^{1/2}
        let g = GridSpec::new(64, 8.0).unwrap();
        let exact = 3.0 * (PI / 2.0).sqrt() * PI / 2.0;
        let got = gradient_sq_integral(&gaussian(g));
        assert!((got - exact).abs() / exact < 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn bpf1_rejects_bad_input() {
        let g = GridSpec::new(16, 2.0).unwrap();
        let u = gaussian(g);
        let mut bytes = Vec::new();
        write_bpf1(&mut bytes, &u).unwrap();
        assert_eq!(bytes.len(), 4 + 12 + 8 + 8 * 4096);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_bpf1(&bad[..]), Err(Error::Format(_))));

        let truncated = &bytes[..bytes.len() - 8];
        assert!(matches!(read_bpf1(truncated), Err(Error::Format(_))));

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(read_bpf1(&trailing[..]), Err(Error::Format(_))));

        assert_eq!(read_bpf1(&bytes[..]).unwrap(), u);
    }

    #[test]
    fn spectral_interpolation_reproduces_smooth_fields() {
        let g = GridSpec::new(32, 6.0).unwrap();
        let f = |[x, y, z]: [f64; 3]| (-(x * x + 2.0 * y * y + z * z) / 2.0).exp();
        let u = ScalarField::from_fn(g, f);
        let sp = Spectral::new(g);
        let pts = [[0.0, 0.0, 0.0], [0.31, -0.7, 1.13], [g.coord(5), g.coord(20), g.coord(9)]];
        for (p, v) in pts.iter().zip(sp.interpolate(u.values(), &pts)) {
            assert!((v - f(*p)).abs() < 1e-9, "{v} vs {}", f(*p));
        }
    }

    #[test]
    fn radial_weights_tile_ball() {
        let rg = RadialGrid::new(100, 5.0).unwrap();
        let total: f64 = rg.weights().iter().sum();
        let exact = 4.0 * PI / 3.0 * 125.0;
        assert!((total - exact).abs() / exact < 1e-13, "{total} vs {exact}");
        let err = |m| {
            let p = RadialProfile::from_fn(RadialGrid::new(m, 5.0).unwrap(), |r| (-r * r).exp());
            (p.integrate() - PI.powf(1.5)).abs()
        };
        let (e1, e2) = (err(100), err(200));
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "second order: {e1} {e2}");
        assert!(err(400) / PI.powf(1.5) < 1e-4);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_cubics() {
        let rg = RadialGrid::new(50, 5.0).unwrap();
        let p = RadialProfile::from_fn(rg, |r| 1.0 + r * r);
        for j in 0..50 {
            assert!((p.interpolate(rg.r(j)) - p.values()[j]).abs() < 1e-14);
        }
        let r = 2.345;
        assert!((p.interpolate(r) - (1.0 + r * r)).abs() < 1e-12);
        assert!((p.interpolate(-0.05) - p.interpolate(0.05)).abs() < 1e-15);
        assert_eq!(p.interpolate(6.0), 0.0);
    }

    #[test]
    fn shift_is_periodic() {
        let g = GridSpec::new(8, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |[x, y, z]| x + 2.0 * y + 3.0 * z);
        let back = u.shifted([3, -2, 5]).shifted([-3, 2, -5]);
        assert_eq!(back, u);
    }
}
