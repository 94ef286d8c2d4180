//! The slip energy: lattice-misfit term at scale eps plus the long-range
//! elastic double sum, with a direct quadrature route, a spectral route that
//! evaluates the identical sum, dyadic truncations, the exact discrete
//! gradient, and a descent minimizer.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::fields::GridField;
use crate::kernel::{AnisotropyKernel, TruncatedKernel};

/// Lattice misfit potential: squared distance to the integer lattice, with
/// rounding ties broken toward even so the gradient convention is fixed.
pub fn w_potential(xi: &[f64]) -> f64 {
    xi.iter()
        .map(|&x| {
            let d = x - x.round_ties_even();
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMethod {
    Direct,
    Convolution,
}

/// One energy evaluation with its misfit/elastic split and log normalizations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    pub eps: f64,
    pub w_term: f64,
    pub nonlocal_term: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.w_term + self.nonlocal_term
    }

    pub fn log_factor(&self) -> f64 {
        (1.0 / self.eps).ln()
    }

    pub fn per_log(&self) -> f64 {
        self.total() / self.log_factor()
    }

    pub fn per_log2(&self) -> f64 {
        self.total() / (self.log_factor() * self.log_factor())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "eps": self.eps,
            "w_term": self.w_term,
            "nonlocal_term": self.nonlocal_term,
            "total": self.total(),
            "per_log": self.per_log(),
            "per_log2": self.per_log2(),
        })
    }
}

fn check_components(gf: &GridField, kernel: &AnisotropyKernel) -> Result<()> {
    if gf.n_components() != kernel.n_components() {
        return Err(Error::DomainMismatch(format!(
            "field has {} components, kernel expects {}",
            gf.n_components(),
            kernel.n_components()
        )));
    }
    Ok(())
}

/// Kernel evaluation keyed by integer grid offsets.
///
/// On the torus an offset of exactly half the period has two minimal images
/// per axis; they are not related by the kernel's evenness, so the value is
/// defined as the average over the image set. This keeps every energy route
/// (pair sums, spectral convolution, bands) on one convention.
struct OffsetKernel<'a> {
    kernel: &'a AnisotropyKernel,
    torus: bool,
    dims: [i64; 2],
    h: [f64; 2],
}

/// Reduce an index offset to (-m/2, m/2]; the flag marks the half-period tie.
#[inline]
fn reduce_offset(d: i64, m: i64) -> (i64, bool) {
    let r = d.rem_euclid(m);
    if 2 * r == m {
        (r, true)
    } else if 2 * r > m {
        (r - m, false)
    } else {
        (r, false)
    }
}

impl<'a> OffsetKernel<'a> {
    fn new(gf: &GridField, kernel: &'a AnisotropyKernel) -> Self {
        OffsetKernel {
            kernel,
            torus: gf.domain().is_torus(),
            dims: [gf.dims()[0] as i64, gf.dims()[1] as i64],
            h: gf.spacing(),
        }
    }

    #[inline]
    fn images(&self, di: i64, dj: i64) -> ([f64; 2], Option<f64>, Option<f64>) {
        if !self.torus {
            return ([di as f64 * self.h[0], dj as f64 * self.h[1]], None, None);
        }
        let (ri, tie_i) = reduce_offset(di, self.dims[0]);
        let (rj, tie_j) = reduce_offset(dj, self.dims[1]);
        let z = [ri as f64 * self.h[0], rj as f64 * self.h[1]];
        let alt_i = tie_i.then(|| -z[0]);
        let alt_j = tie_j.then(|| -z[1]);
        (z, alt_i, alt_j)
    }

    /// Full kernel quadratic form at a nonzero index offset.
    #[inline]
    fn quad(&self, di: i64, dj: i64, d: &[f64]) -> f64 {
        let (z, alt_i, alt_j) = self.images(di, dj);
        match (alt_i, alt_j) {
            (None, None) => self.kernel.gamma_quad(z, d),
            (Some(xi), None) => {
                0.5 * (self.kernel.gamma_quad(z, d) + self.kernel.gamma_quad([xi, z[1]], d))
            }
            (None, Some(yj)) => {
                0.5 * (self.kernel.gamma_quad(z, d) + self.kernel.gamma_quad([z[0], yj], d))
            }
            (Some(xi), Some(yj)) => {
                0.25 * (self.kernel.gamma_quad(z, d)
                    + self.kernel.gamma_quad([xi, z[1]], d)
                    + self.kernel.gamma_quad([z[0], yj], d)
                    + self.kernel.gamma_quad([xi, yj], d))
            }
        }
    }

    /// Band-truncated quadratic form at a nonzero index offset.
    #[inline]
    fn quad_band(&self, band: &TruncatedKernel<'_>, di: i64, dj: i64, d: &[f64]) -> f64 {
        let (z, alt_i, alt_j) = self.images(di, dj);
        match (alt_i, alt_j) {
            (None, None) => band.quad(z, d),
            (Some(xi), None) => 0.5 * (band.quad(z, d) + band.quad([xi, z[1]], d)),
            (None, Some(yj)) => 0.5 * (band.quad(z, d) + band.quad([z[0], yj], d)),
            (Some(xi), Some(yj)) => {
                0.25 * (band.quad(z, d)
                    + band.quad([xi, z[1]], d)
                    + band.quad([z[0], yj], d)
                    + band.quad([xi, yj], d))
            }
        }
    }
}

/// Misfit term: (1/eps) sum of W(u(x)) times the cell area.
pub fn misfit_term(gf: &GridField, eps: f64) -> f64 {
    let n = gf.n_components();
    let sum: f64 = gf
        .values()
        .chunks_exact(n)
        .map(w_potential)
        .sum();
    sum * gf.cell_area() / eps
}

/// Long-range term by the direct double sum over distinct cell centers
/// (ordered pairs), with minimal-image offsets on the torus.
pub fn nonlocal_direct(gf: &GridField, kernel: &AnisotropyKernel) -> Result<f64> {
    check_components(gf, kernel)?;
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let vals = gf.values();
    let ok = OffsetKernel::new(gf, kernel);
    // Unordered pairs, row-partitioned; each partial is summed in a fixed
    // order so the result is schedule-independent.
    let rows: Vec<f64> = (0..m1)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut d = vec![0.0f64; n];
            for j in 0..m2 {
                let p = (i * m2 + j) * n;
                for i2 in i..m1 {
                    let j_start = if i2 == i { j + 1 } else { 0 };
                    for j2 in j_start..m2 {
                        let q = (i2 * m2 + j2) * n;
                        let mut nonzero = false;
                        for c in 0..n {
                            d[c] = vals[p + c] - vals[q + c];
                            nonzero |= d[c] != 0.0;
                        }
                        if !nonzero {
                            continue;
                        }
                        acc += ok.quad(i as i64 - i2 as i64, j as i64 - j2 as i64, &d);
                    }
                }
            }
            acc
        })
        .collect();
    let w = gf.cell_area();
    Ok(rows.iter().sum::<f64>() * 2.0 * w * w)
}

/// Grid-sampled kernel entry (a, b) over all wrapped offsets, zero at the
/// origin, plus its total. Entries come from quadratic forms on basis
/// vectors so no per-point matrix is allocated.
fn kernel_grid(
    gf: &GridField,
    kernel: &AnisotropyKernel,
    ca: usize,
    cb: usize,
) -> (Vec<f64>, f64) {
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let ok = OffsetKernel::new(gf, kernel);
    let mut ea = vec![0.0; n];
    ea[ca] = 1.0;
    let mut eb = vec![0.0; n];
    eb[cb] = 1.0;
    let mut eab = vec![0.0; n];
    eab[ca] += 1.0;
    eab[cb] += 1.0;
    let rows: Vec<(Vec<f64>, f64)> = (0..m1)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0f64; m2];
            let mut total = 0.0;
            for (j, slot) in row.iter_mut().enumerate() {
                if i == 0 && j == 0 {
                    continue;
                }
                let v = if ca == cb {
                    ok.quad(i as i64, j as i64, &ea)
                } else {
                    0.5 * (ok.quad(i as i64, j as i64, &eab)
                        - ok.quad(i as i64, j as i64, &ea)
                        - ok.quad(i as i64, j as i64, &eb))
                };
                *slot = v;
                total += v;
            }
            (row, total)
        })
        .collect();
    let mut grid = Vec::with_capacity(m1 * m2);
    let mut total = 0.0;
    for (row, t) in rows {
        grid.extend_from_slice(&row);
        total += t;
    }
    (grid, total)
}

/// Long-range term via periodic convolution: the algebraic identity
/// E = 2 w^2 (sum u . S u - sum u . (G conv u)) with S the kernel-grid total
/// and the convolution done spectrally per component pair.
pub fn nonlocal_convolution(gf: &GridField, kernel: &AnisotropyKernel) -> Result<f64> {
    check_components(gf, kernel)?;
    if !gf.domain().is_torus() {
        return Err(Error::ConvolutionNeedsTorus);
    }
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let pts = m1 * m2;
    // The energy only sees differences, so recentering on the mean is free
    // and removes the huge cancelling S |u|^2 bulk for near-constant fields.
    let mean = gf.mean();
    let centered: Vec<f64> = gf
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| v - mean[k % n])
        .collect();
    let vals = &centered;

    // Components whose spread exceeds the rounding noise of the centering;
    // anything below that is a constant for every difference in the sum.
    let noise = |c: usize| 4e-15 * (mean[c].abs() + 1.0);
    let active: Vec<usize> = (0..n)
        .filter(|&c| vals.iter().skip(c).step_by(n).any(|&v| v.abs() > noise(c)))
        .collect();
    if active.is_empty() {
        return Ok(0.0);
    }

    let fft = Fft2::new(m1, m2);
    let mut scratch = vec![Complex64::default(); pts];

    // Forward transforms of the active components.
    let mut u_hat: Vec<Vec<Complex64>> = Vec::with_capacity(active.len());
    for &c in &active {
        let mut buf: Vec<Complex64> = (0..pts)
            .map(|p| Complex64::new(vals[p * n + c], 0.0))
            .collect();
        fft.forward(&mut buf, &mut scratch);
        u_hat.push(buf);
    }

    // Accumulate Ghat_ab * uhat_b into the output spectrum of component a,
    // one kernel entry at a time to bound peak memory.
    let mut out_hat: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); pts]; active.len()];
    let mut s_tot = vec![0.0f64; active.len() * active.len()];
    for (ia, &ca) in active.iter().enumerate() {
        for (ib, &cb) in active.iter().enumerate() {
            if ib < ia {
                continue; // symmetric entry handled at (ia, ib)
            }
            let (grid, total) = kernel_grid(gf, kernel, ca, cb);
            s_tot[ia * active.len() + ib] = total;
            s_tot[ib * active.len() + ia] = total;
            let mut g_hat: Vec<Complex64> =
                grid.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.forward(&mut g_hat, &mut scratch);
            for p in 0..pts {
                out_hat[ia][p] += g_hat[p] * u_hat[ib][p];
            }
            if ib != ia {
                for p in 0..pts {
                    out_hat[ib][p] += g_hat[p] * u_hat[ia][p];
                }
            }
        }
    }
    drop(u_hat);

    // sum_x u . S u and sum_x u . (G conv u).
    let mut quad_s = 0.0;
    for (ia, &ca) in active.iter().enumerate() {
        for (ib, &cb) in active.iter().enumerate() {
            let s = s_tot[ia * active.len() + ib];
            if s == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for p in 0..pts {
                dot += vals[p * n + ca] * vals[p * n + cb];
            }
            quad_s += s * dot;
        }
    }
    let mut quad_conv = 0.0;
    for (ia, &ca) in active.iter().enumerate() {
        let mut buf = std::mem::take(&mut out_hat[ia]);
        fft.inverse(&mut buf, &mut scratch);
        let mut dot = 0.0;
        for p in 0..pts {
            dot += vals[p * n + ca] * buf[p].re;
        }
        quad_conv += dot;
    }
    let w = gf.cell_area();
    Ok(2.0 * w * w * (quad_s - quad_conv))
}

/// Full energy at scale eps with the chosen long-range route.
pub fn energy_eps(
    gf: &GridField,
    kernel: &AnisotropyKernel,
    eps: f64,
    method: EnergyMethod,
) -> Result<EnergyBreakdown> {
    if !(eps > 0.0) {
        return Err(Error::InvalidQuery(format!("eps must be positive, got {eps}")));
    }
    let nonlocal_term = match method {
        EnergyMethod::Direct => nonlocal_direct(gf, kernel)?,
        EnergyMethod::Convolution => nonlocal_convolution(gf, kernel)?,
    };
    Ok(EnergyBreakdown { eps, w_term: misfit_term(gf, eps), nonlocal_term })
}

/// Band-truncated long-range term: the same double sum with the level-k
/// dyadic band in place of the full kernel.
pub fn truncated_energy(gf: &GridField, kernel: &AnisotropyKernel, k: u32) -> Result<f64> {
    check_components(gf, kernel)?;
    let band = TruncatedKernel::new(kernel, k);
    let radius = band.band_radius();
    let h = gf.spacing();
    let spacing = h[0].max(h[1]);
    if radius < spacing {
        return Err(Error::UnresolvedBand { band: radius, spacing });
    }
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let domain = gf.domain();
    let vals = gf.values();
    let ok = OffsetKernel::new(gf, kernel);
    let w1 = (radius / h[0]).ceil() as i64;
    let w2 = (radius / h[1]).ceil() as i64;
    let windowed = w1 <= (m1 as i64 - 1) / 2 && w2 <= (m2 as i64 - 1) / 2;
    let rows: Vec<f64> = (0..m1)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut d = vec![0.0f64; n];
            for j in 0..m2 {
                let p = (i * m2 + j) * n;
                let (di_range, dj_range) = if windowed {
                    ((-w1..=w1), (-w2..=w2))
                } else {
                    ((0..=(m1 as i64 - 1)), (0..=(m2 as i64 - 1)))
                };
                for di in di_range.clone() {
                    for dj in dj_range.clone() {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (i2, j2) = if domain.is_torus() {
                            (
                                (i as i64 + di).rem_euclid(m1 as i64) as usize,
                                (j as i64 + dj).rem_euclid(m2 as i64) as usize,
                            )
                        } else {
                            let i2 = i as i64 + di;
                            let j2 = j as i64 + dj;
                            if i2 < 0 || j2 < 0 || i2 >= m1 as i64 || j2 >= m2 as i64 {
                                continue;
                            }
                            (i2 as usize, j2 as usize)
                        };
                        let q = (i2 * m2 + j2) * n;
                        let mut nonzero = false;
                        for c in 0..n {
                            d[c] = vals[p + c] - vals[q + c];
                            nonzero |= d[c] != 0.0;
                        }
                        if !nonzero {
                            continue;
                        }
                        acc += ok.quad_band(&band, -di, -dj, &d);
                    }
                }
            }
            acc
        })
        .collect();
    let w = gf.cell_area();
    Ok(rows.iter().sum::<f64>() * w * w)
}

/// Exact gradient of the discrete energy: misfit part (2/eps)(u - round(u))
/// per cell area, elastic part 4 w^2 (S u - G conv u).
pub fn energy_gradient(
    gf: &GridField,
    kernel: &AnisotropyKernel,
    eps: f64,
) -> Result<GridField> {
    check_components(gf, kernel)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidQuery(format!("eps must be positive, got {eps}")));
    }
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let pts = m1 * m2;
    let vals = gf.values();
    let area = gf.cell_area();
    let w2 = area * area;
    let mut grad = GridField::zeros(gf.domain(), gf.dims(), n)?;

    // Elastic part via convolution on the torus, direct sums on a box.
    if gf.domain().is_torus() {
        let fft = Fft2::new(m1, m2);
        let mut scratch = vec![Complex64::default(); pts];
        let mut u_hat: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for c in 0..n {
            let mut buf: Vec<Complex64> = (0..pts)
                .map(|p| Complex64::new(vals[p * n + c], 0.0))
                .collect();
            fft.forward(&mut buf, &mut scratch);
            u_hat.push(buf);
        }
        for ca in 0..n {
            let mut acc = vec![Complex64::default(); pts];
            let mut s_row = vec![0.0f64; n];
            for cb in 0..n {
                let (grid, total) = kernel_grid(gf, kernel, ca.min(cb), ca.max(cb));
                s_row[cb] = total;
                let mut g_hat: Vec<Complex64> =
                    grid.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.forward(&mut g_hat, &mut scratch);
                for p in 0..pts {
                    acc[p] += g_hat[p] * u_hat[cb][p];
                }
            }
            fft.inverse(&mut acc, &mut scratch);
            let g = grad.values_mut();
            for p in 0..pts {
                let mut su = 0.0;
                for cb in 0..n {
                    su += s_row[cb] * vals[p * n + cb];
                }
                g[p * n + ca] = 4.0 * w2 * (su - acc[p].re);
            }
        }
    } else {
        let ok = OffsetKernel::new(gf, kernel);
        let rows: Vec<Vec<f64>> = (0..m1)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![0.0f64; m2 * n];
                let mut d = vec![0.0f64; n];
                for j in 0..m2 {
                    let p = (i * m2 + j) * n;
                    for i2 in 0..m1 {
                        for j2 in 0..m2 {
                            if i2 == i && j2 == j {
                                continue;
                            }
                            let q = (i2 * m2 + j2) * n;
                            for c in 0..n {
                                d[c] = vals[q + c];
                            }
                            let (di, dj) = (i as i64 - i2 as i64, j as i64 - j2 as i64);
                            // Row of gamma against u(y) and against u(x).
                            for ca in 0..n {
                                let mut ea = vec![0.0; n];
                                ea[ca] = 1.0;
                                let mut row_u_y = 0.0;
                                let mut row_u_x = 0.0;
                                for cb in 0..n {
                                    let mut eb = vec![0.0; n];
                                    eb[cb] = 1.0;
                                    let mut eab = ea.clone();
                                    eab[cb] += 1.0;
                                    let entry = 0.5
                                        * (ok.quad(di, dj, &eab)
                                            - ok.quad(di, dj, &ea)
                                            - ok.quad(di, dj, &eb));
                                    row_u_y += entry * d[cb];
                                    row_u_x += entry * vals[p + cb];
                                }
                                out[(j * n) + ca] += 4.0 * w2 * (row_u_x - row_u_y);
                            }
                        }
                    }
                }
                out
            })
            .collect();
        let g = grad.values_mut();
        for (i, row) in rows.into_iter().enumerate() {
            g[i * m2 * n..(i + 1) * m2 * n].copy_from_slice(&row);
        }
    }

    // Misfit part.
    let g = grad.values_mut();
    for p in 0..pts {
        for c in 0..n {
            let x = vals[p * n + c];
            g[p * n + c] += 2.0 / eps * (x - x.round_ties_even()) * area;
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iterations: 500,
            grad_tol: 1e-8,
            initial_step: 1.0,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

/// Gradient descent with backtracking line search on the torus (the gradient
/// uses the spectral route). Accepted steps strictly decrease the energy;
/// the gradient norm is the Euclidean norm over all samples and components.
pub fn minimize(
    gf0: &GridField,
    kernel: &AnisotropyKernel,
    eps: f64,
    opts: &MinimizeOptions,
) -> Result<(GridField, Vec<TraceRow>)> {
    if !gf0.domain().is_torus() {
        return Err(Error::ConvolutionNeedsTorus);
    }
    let mut u = gf0.clone();
    let mut trace = Vec::new();
    let mut energy = energy_eps(&u, kernel, eps, EnergyMethod::Convolution)?.total();
    let mut step = opts.initial_step;
    for it in 0..opts.max_iterations {
        let grad = energy_gradient(&u, kernel, eps)?;
        let grad_norm =
            grad.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        trace.push(TraceRow { iteration: it, energy, grad_norm, step });
        if grad_norm <= opts.grad_tol {
            break;
        }
        let g2 = grad_norm * grad_norm;
        let mut accepted = false;
        for halving in 0..=opts.max_halvings {
            let mut candidate = u.clone();
            for (x, g) in candidate.values_mut().iter_mut().zip(grad.values()) {
                *x -= step * g;
            }
            let cand_energy =
                energy_eps(&candidate, kernel, eps, EnergyMethod::Convolution)?.total();
            if cand_energy <= energy - opts.armijo * step * g2 {
                u = candidate;
                energy = cand_energy;
                accepted = true;
                // Let the step recover so a single bad region does not pin it.
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if halving == opts.max_halvings {
                return Err(Error::LineSearchFailure { halvings: halving, iteration: it });
            }
        }
        if !accepted {
            return Err(Error::LineSearchFailure {
                halvings: opts.max_halvings,
                iteration: it,
            });
        }
    }
    Ok((u, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{h12_seminorm_sq, mollify, DomainSpec, Mollifier};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit_kernel() -> AnisotropyKernel {
        AnisotropyKernel::cubic(16.0 * PI, 0.0).unwrap()
    }

    fn aniso_kernel() -> AnisotropyKernel {
        AnisotropyKernel::cubic(5.0, 0.3).unwrap()
    }

    fn random_field(dims: [usize; 2], seed: u64, amp: f64) -> GridField {
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let mut gf = GridField::zeros(domain, dims, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in gf.values_mut() {
            *v = rng.random_range(-amp..amp);
        }
        gf
    }

    #[test]
    fn misfit_potential_values() {
        assert_eq!(w_potential(&[3.0, -2.0]), 0.0);
        assert_eq!(w_potential(&[0.5, 0.0]), 0.25);
        // Lattice periodicity is exact on dyadic inputs.
        assert_eq!(w_potential(&[0.25, -0.75]), w_potential(&[1.25, 0.25]));
    }

    #[test]
    fn constant_fields() {
        let k = unit_kernel();
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let gf = GridField::constant(domain, [16, 16], &[2.0, -1.0]).unwrap();
        let e = energy_eps(&gf, &k, 0.1, EnergyMethod::Direct).unwrap();
        assert_eq!(e.total(), 0.0);

        let gf = GridField::constant(domain, [16, 16], &[0.4, 0.0]).unwrap();
        let e = energy_eps(&gf, &k, 0.1, EnergyMethod::Convolution).unwrap();
        assert_eq!(e.nonlocal_term, 0.0);
        assert_relative_eq!(e.w_term, 0.16 / 0.1, max_relative = 1e-12);
    }

    #[test]
    fn direct_and_convolution_agree() {
        let k = aniso_kernel();
        for seed in 0..4 {
            let gf = random_field([24, 24], seed, 1.5);
            let a = nonlocal_direct(&gf, &k).unwrap();
            let b = nonlocal_convolution(&gf, &k).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn convolution_requires_torus() {
        let k = aniso_kernel();
        let gf =
            GridField::zeros(DomainSpec::rect(1.0, 1.0).unwrap(), [8, 8], 2).unwrap();
        assert!(matches!(
            nonlocal_convolution(&gf, &k),
            Err(Error::ConvolutionNeedsTorus)
        ));
    }

    #[test]
    fn lattice_shift_invariance() {
        let k = aniso_kernel();
        let gf = random_field([12, 12], 3, 0.8);
        let shifted = gf.translated_values(&[2.0, -3.0]).unwrap();
        let a = energy_eps(&gf, &k, 0.05, EnergyMethod::Direct).unwrap();
        let b = energy_eps(&shifted, &k, 0.05, EnergyMethod::Direct).unwrap();
        assert_relative_eq!(a.total(), b.total(), max_relative = 1e-12);
    }

    #[test]
    fn coercivity_sandwich_against_seminorm() {
        let k = aniso_kernel();
        let (lo, hi) = (k.lambda_min(), k.lambda_max());
        for seed in [5, 6] {
            let gf = random_field([14, 14], seed, 1.0);
            let nl = nonlocal_direct(&gf, &k).unwrap();
            let semi = h12_seminorm_sq(&gf);
            assert!(nl >= lo * semi * (1.0 - 1e-10));
            assert!(nl <= hi * semi * (1.0 + 1e-10));
        }
    }

    #[test]
    fn truncated_energies_telescope_below_full() {
        let k = aniso_kernel();
        let gf = random_field([16, 16], 9, 1.0);
        let full = nonlocal_direct(&gf, &k).unwrap();
        let mut partial = 0.0;
        let mut last = 0.0;
        for level in 0..=4u32 {
            partial += truncated_energy(&gf, &k, level).unwrap();
            assert!(partial >= last - 1e-12, "partial sums must be nondecreasing");
            assert!(partial <= full * (1.0 + 1e-9));
            last = partial;
        }
        // The constant field carries no band energy.
        let c = GridField::constant(gf.domain(), [16, 16], &[0.3, 0.7]).unwrap();
        assert_eq!(truncated_energy(&c, &k, 2).unwrap(), 0.0);
        // A band below the grid spacing is unresolvable.
        assert!(matches!(
            truncated_energy(&gf, &k, 9),
            Err(Error::UnresolvedBand { .. })
        ));
    }

    #[test]
    fn separated_disturbances_do_not_interact_through_the_band() {
        let k = unit_kernel();
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        // Two point disturbances separated by 1/2 > 2^-2: the band energy
        // splits into the two local self-contributions exactly, the cross
        // pairs all fall outside the band support.
        let mut both = GridField::zeros(domain, [32, 32], 2).unwrap();
        both.set(0, 0, &[1.0, 0.0]);
        both.set(0, 16, &[-1.0, 0.0]);
        let mut first = GridField::zeros(domain, [32, 32], 2).unwrap();
        first.set(0, 0, &[1.0, 0.0]);
        let mut second = GridField::zeros(domain, [32, 32], 2).unwrap();
        second.set(0, 16, &[-1.0, 0.0]);
        let e_both = truncated_energy(&both, &k, 2).unwrap();
        let e_split = truncated_energy(&first, &k, 2).unwrap()
            + truncated_energy(&second, &k, 2).unwrap();
        assert_relative_eq!(e_both, e_split, max_relative = 1e-12);
    }

    #[test]
    fn mollification_does_not_increase_nonlocal_energy() {
        let k = aniso_kernel();
        let gf = random_field([32, 32], 11, 1.0);
        let before = nonlocal_convolution(&gf, &k).unwrap();
        for scale_cells in [2.0, 4.0, 8.0] {
            let m = Mollifier::new(scale_cells / 32.0).unwrap();
            let sm = mollify(&gf, &m).unwrap();
            let after = nonlocal_convolution(&sm, &k).unwrap();
            assert!(
                after <= before * (1.0 + 1e-9),
                "mollification increased the energy: {after} > {before}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = aniso_kernel();
        let gf = random_field([10, 10], 13, 0.4);
        let eps = 0.2;
        let grad = energy_gradient(&gf, &k, eps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..12 {
            let p = rng.random_range(0..gf.values().len());
            let delta = 1e-6;
            let mut up = gf.clone();
            up.values_mut()[p] += delta;
            let mut dn = gf.clone();
            dn.values_mut()[p] -= delta;
            let ep = energy_eps(&up, &k, eps, EnergyMethod::Direct).unwrap().total();
            let en = energy_eps(&dn, &k, eps, EnergyMethod::Direct).unwrap().total();
            let fd = (ep - en) / (2.0 * delta);
            let an = grad.values()[p];
            assert_relative_eq!(an, fd, max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn gradient_is_lattice_shift_invariant() {
        let k = aniso_kernel();
        let gf = random_field([8, 8], 17, 0.3);
        let shifted = gf.translated_values(&[1.0, 4.0]).unwrap();
        let g0 = energy_gradient(&gf, &k, 0.1).unwrap();
        let g1 = energy_gradient(&shifted, &k, 0.1).unwrap();
        for (a, b) in g0.values().iter().zip(g1.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn minimizer_basics() {
        let k = aniso_kernel();
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        // Integer constant: zero gradient, returns immediately.
        let flat = GridField::constant(domain, [8, 8], &[1.0, -2.0]).unwrap();
        let (out, trace) = minimize(&flat, &k, 0.1, &MinimizeOptions::default()).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(out.values(), flat.values());

        // A fractional constant descends toward the lattice with no elastic
        // cost; the trace must be monotone.
        let tilted = GridField::constant(domain, [8, 8], &[0.4, 0.0]).unwrap();
        let (out, trace) = minimize(&tilted, &k, 0.1, &MinimizeOptions::default()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-15);
        }
        let final_e = energy_eps(&out, &k, 0.1, EnergyMethod::Convolution).unwrap();
        assert!(final_e.total() < 1e-12, "did not reach the lattice well");
        assert!(out.values().iter().step_by(2).all(|&v| v.abs() < 1e-6));
    }
}
