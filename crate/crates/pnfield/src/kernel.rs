//! Elastic interaction kernels: the degree(-3)-homogeneous kernel with angular
//! part sampled on the circle, and its dyadic band truncations.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Symmetric N x N matrix stored dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    a: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    /// Build from the n(n+1)/2 upper-triangular entries in row-major order.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::BadKernelTable(format!(
                "expected {} upper-triangular entries for N = {}, got {}",
                n * (n + 1) / 2,
                n,
                upper.len()
            )));
        }
        let mut m = Self::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m.a[i * n + j] = upper[k];
                m.a[j * n + i] = upper[k];
                k += 1;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    /// Quadratic form m d . d.
    pub fn quad(&self, d: &[f64]) -> f64 {
        debug_assert_eq!(d.len(), self.n);
        let mut s = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.a[i * self.n + j] * d[j];
            }
            s += row * d[i];
        }
        s
    }

    pub fn scaled(&self, t: f64) -> Self {
        SymMat { n: self.n, a: self.a.iter().map(|v| v * t).collect() }
    }

    pub fn add_scaled(&mut self, other: &SymMat, t: f64) {
        debug_assert_eq!(self.n, other.n);
        for (x, y) in self.a.iter_mut().zip(other.a.iter()) {
            *x += t * y;
        }
    }

    pub fn max_abs_diff(&self, other: &SymMat) -> f64 {
        self.a
            .iter()
            .zip(other.a.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Largest |m_ij - m_ji|; zero for anything built through `set_sym`/`from_upper`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.a[i * self.n + j] - self.a[j * self.n + i]).abs());
            }
        }
        worst
    }

    /// (min, max) eigenvalue of the symmetric matrix.
    pub fn eigen_range(&self) -> (f64, f64) {
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.a);
        let eig = m.symmetric_eigen();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in eig.eigenvalues.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Angular kernel variant: closed-form isotropic-cubic elasticity, or a table
/// sampled on K uniform angles with linear interpolation in between.
#[derive(Debug, Clone)]
pub enum KernelVariant {
    Cubic { mu: f64, nu: f64 },
    Tabulated { matrices: Vec<SymMat> },
}

/// The angular part of the interaction kernel, with cached ellipticity bounds.
///
/// Directions are canonicalized to the upper half-circle before evaluation, so
/// evenness in the direction argument holds bit-exactly for both variants.
#[derive(Debug, Clone)]
pub struct AnisotropyKernel {
    n_components: usize,
    variant: KernelVariant,
    lambda_min: f64,
    lambda_max: f64,
}

pub const DEFAULT_ELLIPTICITY_SAMPLES: usize = 4096;

fn canonical_dir(y: [f64; 2]) -> [f64; 2] {
    if y[1] < 0.0 || (y[1] == 0.0 && y[0] < 0.0) {
        [-y[0], -y[1]]
    } else {
        y
    }
}

impl AnisotropyKernel {
    /// Isotropic-cubic crystal kernel; elliptic for mu > 0 and nu in (-1, 1/2).
    pub fn cubic(mu: f64, nu: f64) -> Result<Self> {
        Self::build(2, KernelVariant::Cubic { mu, nu })
    }

    /// Tabulated kernel from K matrices at angles 2 pi j / K. K must be even;
    /// the table is symmetrized under the half-turn at construction.
    pub fn tabulated(matrices: Vec<SymMat>) -> Result<Self> {
        let k = matrices.len();
        if k < 2 || k % 2 != 0 {
            return Err(Error::BadKernelTable(format!(
                "need an even number of angular samples >= 2, got {k}"
            )));
        }
        let n = matrices[0].dim();
        if matrices.iter().any(|m| m.dim() != n) {
            return Err(Error::BadKernelTable("inconsistent matrix dimensions".into()));
        }
        // Enforce evenness: average each node with the node half a turn away.
        let mut sym = matrices.clone();
        for j in 0..k / 2 {
            let jj = j + k / 2;
            for i in 0..n {
                for l in i..n {
                    let v = 0.5 * (matrices[j].get(i, l) + matrices[jj].get(i, l));
                    sym[j].set_sym(i, l, v);
                    sym[jj].set_sym(i, l, v);
                }
            }
        }
        Self::build(n, KernelVariant::Tabulated { matrices: sym })
    }

    /// Load a tabulated kernel from a text file: first line "N K", then K
    /// lines with the N(N+1)/2 upper-triangular entries of the matrix at
    /// angle 2 pi j / K.
    pub fn from_table_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::BadKernelTable("empty table file".into()))?;
        let mut hp = header.split_whitespace();
        let n: usize = hp
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::BadKernelTable("bad N in header".into()))?;
        let k: usize = hp
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::BadKernelTable("bad K in header".into()))?;
        let mut matrices = Vec::with_capacity(k);
        for j in 0..k {
            let line = lines.next().ok_or_else(|| {
                Error::BadKernelTable(format!("expected {k} rows, file ends at row {j}"))
            })?;
            let entries: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(|t| t.parse::<f64>()).collect();
            let entries = entries
                .map_err(|e| Error::BadKernelTable(format!("row {j}: {e}")))?;
            matrices.push(SymMat::from_upper(n, &entries)?);
        }
        Self::tabulated(matrices)
    }

    fn build(n_components: usize, variant: KernelVariant) -> Result<Self> {
        let (lambda_min, lambda_max) =
            sample_ellipticity(&variant, n_components, DEFAULT_ELLIPTICITY_SAMPLES)?;
        Ok(AnisotropyKernel { n_components, variant, lambda_min, lambda_max })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Re-sample the ellipticity bounds over `n_samples` uniform angles and
    /// refresh the cached values.
    pub fn check_ellipticity(&mut self, n_samples: usize) -> Result<(f64, f64)> {
        let bounds = sample_ellipticity(&self.variant, self.n_components, n_samples)?;
        self.lambda_min = bounds.0;
        self.lambda_max = bounds.1;
        Ok(bounds)
    }

    /// Angular part at the direction (cos theta, sin theta).
    pub fn gamma_hat(&self, theta: f64) -> SymMat {
        self.gamma_hat_dir([theta.cos(), theta.sin()])
    }

    /// Angular part at a nonzero direction (normalized internally).
    pub fn gamma_hat_dir(&self, y: [f64; 2]) -> SymMat {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let yh = canonical_dir([y[0] / r, y[1] / r]);
        match &self.variant {
            KernelVariant::Cubic { mu, nu } => {
                let pref = mu / (16.0 * PI * (1.0 - nu));
                let mut m = SymMat::zeros(2);
                m.set_sym(0, 0, pref * (nu + 1.0 - 3.0 * nu * yh[1] * yh[1]));
                m.set_sym(1, 1, pref * (nu + 1.0 - 3.0 * nu * yh[0] * yh[0]));
                m.set_sym(0, 1, pref * 3.0 * nu * yh[0] * yh[1]);
                m
            }
            KernelVariant::Tabulated { matrices } => {
                let k = matrices.len();
                let (j0, j1, w) = table_index(yh, k);
                let mut m = matrices[j0].scaled(1.0 - w);
                m.add_scaled(&matrices[j1], w);
                m
            }
        }
    }

    /// Quadratic form of the angular part at a nonzero direction, allocation-free.
    pub fn gamma_hat_quad(&self, y: [f64; 2], d: &[f64]) -> f64 {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let yh = canonical_dir([y[0] / r, y[1] / r]);
        match &self.variant {
            KernelVariant::Cubic { mu, nu } => {
                let pref = mu / (16.0 * PI * (1.0 - nu));
                let norm2 = d[0] * d[0] + d[1] * d[1];
                let perp = yh[1] * d[0] - yh[0] * d[1];
                pref * ((nu + 1.0) * norm2 - 3.0 * nu * perp * perp)
            }
            KernelVariant::Tabulated { matrices } => {
                let k = matrices.len();
                let (j0, j1, w) = table_index(yh, k);
                (1.0 - w) * matrices[j0].quad(d) + w * matrices[j1].quad(d)
            }
        }
    }

    /// Full kernel |z|^-3 gamma_hat(z/|z|) at a nonzero point.
    pub fn gamma(&self, z: [f64; 2]) -> Result<SymMat> {
        let r2 = z[0] * z[0] + z[1] * z[1];
        if r2 == 0.0 {
            return Err(Error::SingularPoint);
        }
        let r = r2.sqrt();
        Ok(self.gamma_hat_dir(z).scaled(1.0 / (r * r * r)))
    }

    /// Quadratic form gamma(z) d . d, allocation-free; zero at z = 0 is a
    /// domain error so callers must exclude the diagonal themselves.
    #[inline]
    pub fn gamma_quad(&self, z: [f64; 2], d: &[f64]) -> f64 {
        let r2 = z[0] * z[0] + z[1] * z[1];
        debug_assert!(r2 > 0.0, "kernel quadratic form at the singular point");
        let r = r2.sqrt();
        self.gamma_hat_quad(z, d) / (r * r * r)
    }

    /// Stable identifier used to tag tables built from this kernel.
    pub fn id(&self) -> String {
        format!("{self}")
    }
}

impl fmt::Display for AnisotropyKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            KernelVariant::Cubic { mu, nu } => write!(f, "cubic(mu={mu:.12e},nu={nu:.12e})"),
            KernelVariant::Tabulated { matrices } => {
                write!(f, "tabulated(N={},K={})", self.n_components, matrices.len())
            }
        }
    }
}

/// Interpolation weights for a canonical (upper half-circle) direction on a
/// K-node angular table.
fn table_index(yh: [f64; 2], k: usize) -> (usize, usize, f64) {
    let angle = yh[1].atan2(yh[0]); // in [0, pi] for canonical directions
    let t = angle * k as f64 / (2.0 * PI);
    let j0 = (t.floor() as usize).min(k - 1);
    let w = t - j0 as f64;
    (j0, (j0 + 1) % k, w)
}

fn sample_ellipticity(
    variant: &KernelVariant,
    n_components: usize,
    n_samples: usize,
) -> Result<(f64, f64)> {
    if n_samples < 4 {
        return Err(Error::InvalidQuery(format!(
            "ellipticity check needs at least 4 angular samples, got {n_samples}"
        )));
    }
    // Borrow a temporary kernel shell so both the constructor and re-checks
    // share one evaluation path. The cached bounds are not read here.
    let shell = AnisotropyKernel {
        n_components,
        variant: variant.clone(),
        lambda_min: f64::NAN,
        lambda_max: f64::NAN,
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n_samples {
        let theta = 2.0 * PI * i as f64 / n_samples as f64;
        let m = shell.gamma_hat(theta);
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NotElliptic(format!(
                "non-finite angular matrix at theta = {theta:.6}"
            )));
        }
        let (emin, emax) = m.eigen_range();
        lo = lo.min(emin);
        hi = hi.max(emax);
    }
    if !(lo > 0.0) {
        return Err(Error::NotElliptic(format!(
            "smallest sampled eigenvalue {lo:.6e} is not positive"
        )));
    }
    Ok((lo, hi))
}

/// Dyadic band truncation of a kernel: supported on |z| <= 2^-k, constant on
/// the inner disk |z| <= 2^-(k+1), and |z|^-3 - 2^(3k) in the transition band.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedKernel<'a> {
    base: &'a AnisotropyKernel,
    level: u32,
}

impl<'a> TruncatedKernel<'a> {
    pub fn new(base: &'a AnisotropyKernel, level: u32) -> Self {
        TruncatedKernel { base, level }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Outer support radius 2^-k.
    pub fn band_radius(&self) -> f64 {
        (2.0f64).powi(-(self.level as i32))
    }

    /// Radial factor of the band at radius r > 0.
    #[inline]
    pub fn radial_factor(&self, r: f64) -> f64 {
        let outer = self.band_radius();
        let inner = 0.5 * outer;
        let floor = (2.0f64).powi(3 * self.level as i32);
        if r > outer {
            0.0
        } else if r <= inner {
            8.0 * floor - floor
        } else {
            1.0 / (r * r * r) - floor
        }
    }

    pub fn eval(&self, z: [f64; 2]) -> Result<SymMat> {
        let r2 = z[0] * z[0] + z[1] * z[1];
        if r2 == 0.0 {
            return Err(Error::SingularPoint);
        }
        let r = r2.sqrt();
        let f = self.radial_factor(r);
        if f == 0.0 {
            return Ok(SymMat::zeros(self.base.n_components()));
        }
        Ok(self.base.gamma_hat_dir(z).scaled(f))
    }

    /// Quadratic form of the band at a nonzero point.
    #[inline]
    pub fn quad(&self, z: [f64; 2], d: &[f64]) -> f64 {
        let r2 = z[0] * z[0] + z[1] * z[1];
        debug_assert!(r2 > 0.0);
        let f = self.radial_factor(r2.sqrt());
        if f == 0.0 {
            return 0.0;
        }
        self.base.gamma_hat_quad(z, d) * f
    }
}

/// Closed form of the partial band sum: gamma_hat(z/|z|) times
/// min(|z|^-3, 2^(3(k+1))) - 1. Used as the telescoping oracle.
pub fn band_partial_sum_closed_form(
    kernel: &AnisotropyKernel,
    z: [f64; 2],
    k: u32,
) -> Result<SymMat> {
    let r2 = z[0] * z[0] + z[1] * z[1];
    if r2 == 0.0 {
        return Err(Error::SingularPoint);
    }
    let r = r2.sqrt();
    let cap = (2.0f64).powi(3 * (k as i32 + 1));
    let factor = (1.0 / (r * r * r)).min(cap) - 1.0;
    Ok(kernel.gamma_hat_dir(z).scaled(factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cubic() -> AnisotropyKernel {
        // mu = 16 pi, nu = 0 makes the angular part exactly the identity.
        AnisotropyKernel::cubic(16.0 * PI, 0.0).unwrap()
    }

    #[test]
    fn cubic_identity_at_any_angle() {
        let k = unit_cubic();
        for theta in [0.0, 0.3, 1.1, 2.0, 4.5] {
            let m = k.gamma_hat(theta);
            assert_relative_eq!(m.get(0, 0), 1.0, max_relative = 1e-12);
            assert_relative_eq!(m.get(1, 1), 1.0, max_relative = 1e-12);
            assert!(m.get(0, 1).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_scales_with_inverse_cube() {
        let k = unit_cubic();
        let m1 = k.gamma([1.0, 0.0]).unwrap();
        assert_relative_eq!(m1.get(0, 0), 1.0, max_relative = 1e-14);
        let m2 = k.gamma([2.0, 0.0]).unwrap();
        assert_relative_eq!(m2.get(0, 0), 0.125, max_relative = 1e-14);
        assert_relative_eq!(m2.get(1, 1), 0.125, max_relative = 1e-14);
    }

    #[test]
    fn gamma_at_origin_is_an_error() {
        let k = unit_cubic();
        assert!(matches!(k.gamma([0.0, 0.0]), Err(Error::SingularPoint)));
    }

    #[test]
    fn evenness_is_exact_in_the_direction() {
        let k = AnisotropyKernel::cubic(3.7, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let z = [rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64)];
            if z[0] == 0.0 && z[1] == 0.0 {
                continue;
            }
            let a = k.gamma(z).unwrap();
            let b = k.gamma([-z[0], -z[1]]).unwrap();
            assert_eq!(a, b);
        }
        // Through the angle the half-turn is only exact up to trig rounding.
        let a = k.gamma_hat(0.77);
        let b = k.gamma_hat(0.77 + PI);
        assert!(a.max_abs_diff(&b) < 1e-13);
    }

    #[test]
    fn returned_matrices_are_symmetric_with_bounded_spectrum() {
        let k = AnisotropyKernel::cubic(5.0, 0.45).unwrap();
        let (lo, hi) = (k.lambda_min(), k.lambda_max());
        assert!(lo > 0.0 && lo <= hi);
        for i in 0..64 {
            let m = k.gamma_hat(2.0 * PI * i as f64 / 64.0 + 0.013);
            assert_eq!(m.max_asymmetry(), 0.0);
            let (emin, emax) = m.eigen_range();
            assert!(emin >= lo - 1e-10 && emax <= hi + 1e-10);
        }
    }

    #[test]
    fn cubic_ellipticity_bounds() {
        let k = unit_cubic();
        assert_relative_eq!(k.lambda_min(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(k.lambda_max(), 1.0, max_relative = 1e-12);

        let k = AnisotropyKernel::cubic(1.0, 0.49).unwrap();
        assert!(k.lambda_min() > 0.0);

        // Outside the admissible Poisson range the kernel loses definiteness.
        assert!(matches!(
            AnisotropyKernel::cubic(1.0, 0.6),
            Err(Error::NotElliptic(_))
        ));
        assert!(matches!(
            AnisotropyKernel::cubic(-1.0, 0.0),
            Err(Error::NotElliptic(_))
        ));
    }

    #[test]
    fn tabulated_rejects_indefinite_samples() {
        let mut mats = vec![SymMat::identity(2); 8];
        mats[3].set_sym(0, 0, -2.0);
        // Symmetrization averages nodes 3 and 7; the result stays indefinite.
        mats[7].set_sym(0, 0, -2.0);
        assert!(matches!(
            AnisotropyKernel::tabulated(mats),
            Err(Error::NotElliptic(_))
        ));
    }

    #[test]
    fn tabulated_matches_cubic_when_sampled_from_it() {
        let cubic = AnisotropyKernel::cubic(2.0, 0.3).unwrap();
        let k = 512;
        let mats: Vec<SymMat> = (0..k)
            .map(|j| cubic.gamma_hat(2.0 * PI * j as f64 / k as f64))
            .collect();
        let tab = AnisotropyKernel::tabulated(mats).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let theta = rng.random_range(0.0..2.0 * PI);
            let a = cubic.gamma_hat(theta);
            let b = tab.gamma_hat(theta);
            assert!(a.max_abs_diff(&b) < 2e-4, "interp error too large");
        }
    }

    #[test]
    fn truncated_branches() {
        let k = unit_cubic();
        let t0 = TruncatedKernel::new(&k, 0);
        // Outside the support.
        let z = [2.0, 0.0];
        assert_eq!(t0.eval(z).unwrap(), SymMat::zeros(2));
        // Inner plateau: 2^3 - 2^0 = 7.
        let m = t0.eval([0.25, 0.0]).unwrap();
        assert_relative_eq!(m.get(0, 0), 7.0, max_relative = 1e-14);
        // Transition band at level 1: |z|^-3 - 8 with |z| = 3/8.
        let t1 = TruncatedKernel::new(&k, 1);
        let m = t1.eval([0.375, 0.0]).unwrap();
        let expect = (8.0f64 / 3.0).powi(3) - 8.0;
        assert_relative_eq!(m.get(0, 0), expect, max_relative = 1e-14);
        assert!(matches!(t1.eval([0.0, 0.0]), Err(Error::SingularPoint)));
    }

    #[test]
    fn bands_are_nonnegative_and_below_the_full_kernel() {
        let kernel = AnisotropyKernel::cubic(2.5, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let z = [rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64)];
            let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
            if r == 0.0 {
                continue;
            }
            let d = [rng.random_range(-2.0..2.0f64), rng.random_range(-2.0..2.0f64)];
            let mut partial = 0.0;
            for k in 0..=6u32 {
                let band = TruncatedKernel::new(&kernel, k).quad(z, &d);
                assert!(band >= -1e-12, "band {k} negative: {band}");
                partial += band;
            }
            let full = kernel.gamma_quad(z, &d);
            assert!(partial <= full * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn telescoping_identity() {
        let kernel = AnisotropyKernel::cubic(1.3, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z = [rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64)];
            let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
            if r == 0.0 || r > 1.0 {
                continue;
            }
            for k in [0u32, 1, 3, 10] {
                let mut sum = SymMat::zeros(2);
                for h in 0..=k {
                    sum.add_scaled(&TruncatedKernel::new(&kernel, h).eval(z).unwrap(), 1.0);
                }
                let closed = band_partial_sum_closed_form(&kernel, z, k).unwrap();
                let scale = closed
                    .as_slice()
                    .iter()
                    .map(|v| v.abs())
                    .fold(0.0, f64::max)
                    .max(1e-300);
                assert!(
                    sum.max_abs_diff(&closed) <= 1e-10 * scale,
                    "telescoping off at z = {z:?}, k = {k}"
                );
            }
        }
    }

    #[test]
    fn table_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kern.txt");
        // N = 2, K = 4, identity at every node.
        std::fs::write(&path, "2 4\n1 0 1\n1 0 1\n1 0 1\n1 0 1\n").unwrap();
        let k = AnisotropyKernel::from_table_file(&path).unwrap();
        assert_eq!(k.n_components(), 2);
        let m = k.gamma_hat(0.7);
        assert!(m.max_abs_diff(&SymMat::identity(2)) < 1e-15);
    }
}
