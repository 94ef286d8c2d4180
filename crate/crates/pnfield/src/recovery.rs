//! Recovery constructions for the two log-scaling regimes: mollified
//! polyhedral jumps for the line-tension scale, replicated shifted copies at
//! L = sigma * ln(1/eps) for the squared-log scale, shift selection by the
//! averaging argument, and the epsilon-sweep harness with its fit.

use std::io::Write;
use std::path::Path;

use crate::energy::{energy_eps, EnergyBreakdown, EnergyMethod};
use crate::error::{Error, Result};
use crate::fields::{mollify, replicate_shift, GridField, Mollifier, PolyhedralField};
use crate::kernel::AnisotropyKernel;

/// Geometry of the replicated-shift construction (everything but eps).
#[derive(Debug, Clone, Copy)]
pub struct RecoveryGeometry {
    pub rho: f64,
    pub alpha: f64,
    pub zeta: [f64; 2],
    /// Distance from the evaluation domain to the boundary of the field's
    /// coverage; only meaningful on a box, where shifts must stay inside.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryParams {
    pub eps: f64,
    pub geometry: RecoveryGeometry,
}

impl RecoveryParams {
    pub fn validate(&self, pf: &PolyhedralField) -> Result<()> {
        let g = &self.geometry;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidQuery(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if !(g.alpha > 0.0 && g.alpha < 0.5) {
            return Err(Error::InvalidQuery(format!(
                "alpha must lie in (0, 1/2), got {}",
                g.alpha
            )));
        }
        if !(g.rho > 0.0) {
            return Err(Error::InvalidQuery(format!("rho must be positive, got {}", g.rho)));
        }
        let z = (g.zeta[0] * g.zeta[0] + g.zeta[1] * g.zeta[1]).sqrt();
        if z > 1.0 + 1e-12 {
            return Err(Error::InvalidQuery(format!(
                "zeta must lie in the closed unit ball, |zeta| = {z}"
            )));
        }
        let l = replication_count(pf.sigma(), self.eps);
        if l < 1.0 {
            return Err(Error::InvalidQuery(format!(
                "replication parameter sigma ln(1/eps) = {l:.3} must be at least 1"
            )));
        }
        if !pf.domain().is_torus() && 3.0 * g.rho.powf(g.alpha) >= g.margin {
            return Err(Error::MarginViolation(format!(
                "3 rho^alpha = {:.6} must stay below the coverage margin {:.6}",
                3.0 * g.rho.powf(g.alpha),
                g.margin
            )));
        }
        Ok(())
    }
}

/// L = sigma * ln(1/eps), the number of replicated copies before flooring.
pub fn replication_count(sigma: f64, eps: f64) -> f64 {
    sigma * (1.0 / eps).ln()
}

/// Rasterize an integer polyhedral field and mollify at scale eps: the
/// line-tension-regime construction. The sweep of its long-range term per
/// ln(1/eps) approaches the jump-set line-tension integral.
pub fn mollified_jump(pf: &PolyhedralField, eps: f64, dims: [usize; 2]) -> Result<GridField> {
    if (pf.sigma() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidQuery(format!(
            "mollified jumps take sigma = 1 fields, got sigma = {}",
            pf.sigma()
        )));
    }
    let raster = pf.rasterize(dims)?;
    mollify(&raster, &Mollifier::new(eps)?)
}

/// The squared-log-regime construction: replicate each interface
/// floor(sigma ln(1/eps)) times along zeta, mollify at scale eps, and
/// rescale by ln(1/eps). Away from the replicated jump set the samples sit
/// exactly on the integer lattice.
pub fn build_recovery(
    pf: &PolyhedralField,
    params: &RecoveryParams,
    dims: [usize; 2],
) -> Result<GridField> {
    params.validate(pf)?;
    let g = &params.geometry;
    let log = (1.0 / params.eps).ln();
    let l = replication_count(pf.sigma(), params.eps);
    let avg = replicate_shift(pf, l, g.zeta, g.rho, g.alpha)?;
    let raster = avg.rasterize(dims)?;
    let smooth = mollify(&raster, &Mollifier::new(params.eps)?)?;
    Ok(smooth.scaled(log))
}

#[derive(Debug, Clone)]
pub struct ZetaChoice {
    pub zeta: [f64; 2],
    /// All sampled candidates with their cross-interaction proxies.
    pub proxies: Vec<([f64; 2], f64)>,
}

impl ZetaChoice {
    pub fn mean_proxy(&self) -> f64 {
        self.proxies.iter().map(|p| p.1).sum::<f64>() / self.proxies.len() as f64
    }
}

/// Halton low-discrepancy point in [0,1)^d coordinates for bases 2 and 3.
fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index + 1;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Pick the shift direction by the averaging argument: sample candidates in
/// the unit ball from the mollifier density (low-discrepancy points with
/// rejection), evaluate the cross-interaction proxy of each, and return the
/// minimizer. The proxy is the long-range energy of the replicated field
/// minus the sum over single shifted copies, so a lone copy scores zero.
pub fn choose_zeta(
    pf: &PolyhedralField,
    params: &RecoveryParams,
    kernel: &AnisotropyKernel,
    dims: [usize; 2],
    n_candidates: usize,
) -> Result<ZetaChoice> {
    if n_candidates == 0 {
        return Err(Error::InvalidQuery("need at least one zeta candidate".into()));
    }
    let g = &params.geometry;
    let mut candidates = Vec::with_capacity(n_candidates);
    let mut index = 0usize;
    while candidates.len() < n_candidates && index < 100 * (n_candidates + 8) {
        let x = 2.0 * halton(index, 2) - 1.0;
        let y = 2.0 * halton(index, 3) - 1.0;
        let accept = halton(index, 5);
        index += 1;
        let r = (x * x + y * y).sqrt();
        if r > 1.0 {
            continue;
        }
        // Rejection against the mollifier profile density.
        if accept <= Mollifier::profile(r) {
            candidates.push([x, y]);
        }
    }
    if candidates.is_empty() {
        return Err(Error::InvalidQuery("zeta sampling produced no candidate".into()));
    }

    let l = replication_count(pf.sigma(), params.eps);
    let copies = l.floor() as usize;
    let moll = Mollifier::new(params.eps)?;
    let method = if pf.domain().is_torus() {
        EnergyMethod::Convolution
    } else {
        EnergyMethod::Direct
    };
    let mut proxies = Vec::with_capacity(candidates.len());
    for zeta in candidates {
        let avg = replicate_shift(pf, l, zeta, g.rho, g.alpha)?;
        let grid = avg.rasterize(dims)?;
        let full = energy_eps(&mollify(&grid, &moll)?, kernel, params.eps, method)?
            .nonlocal_term;
        // Diagonal reference: each copy alone through the same pipeline.
        let mut diag = 0.0;
        for j in 1..=copies {
            let single = replicate_single_copy(pf, l, zeta, g.rho, g.alpha, j, dims)?;
            diag += energy_eps(&mollify(&single, &moll)?, kernel, params.eps, method)?
                .nonlocal_term;
        }
        proxies.push((zeta, full - diag));
    }
    let best = proxies
        .iter()
        .cloned()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok(ZetaChoice { zeta: best.0, proxies })
}

/// Raster of one shifted copy with the replicated construction's weight, so
/// the single-copy case reproduces the full construction bit for bit.
fn replicate_single_copy(
    pf: &PolyhedralField,
    l: f64,
    zeta: [f64; 2],
    rho: f64,
    alpha: f64,
    copy: usize,
    dims: [usize; 2],
) -> Result<GridField> {
    let reach = rho.powf(alpha);
    let mut gf = GridField::zeros(pf.domain(), dims, pf.n_components())?;
    let t = reach * copy as f64 / l;
    let w = pf.sigma() / l;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            let c = gf.cell_center(i, j);
            let p = [c[0] + t * zeta[0], c[1] + t * zeta[1]];
            let v = pf
                .value_at(p)
                .ok_or(Error::ShiftOutOfCoverage { x: p[0], y: p[1] })?;
            let scaled: Vec<f64> = v.iter().map(|&k| k as f64 * w).collect();
            gf.set(i, j, &scaled);
        }
    }
    Ok(gf)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Grid-resolution policy for a sweep: spacing h <= eps / factor per axis,
/// optionally capped (a cap can push h above the mollifier scale, which the
/// construction then rejects).
#[derive(Debug, Clone, Copy)]
pub struct DimsPolicy {
    pub factor: f64,
    pub max_dims: Option<usize>,
}

impl Default for DimsPolicy {
    fn default() -> Self {
        DimsPolicy { factor: 4.0, max_dims: None }
    }
}

impl DimsPolicy {
    pub fn dims_for(&self, side: [f64; 2], eps: f64) -> [usize; 2] {
        let mut d = [0usize; 2];
        for a in 0..2 {
            let m = (side[a] * self.factor / eps).ceil() as usize;
            d[a] = match self.max_dims {
                Some(cap) => m.min(cap),
                None => m,
            }
            .max(1);
        }
        d
    }
}

/// Which construction a sweep drives.
#[derive(Debug, Clone, Copy)]
pub enum SweepBuilder {
    MollifiedJump,
    Recovery(RecoveryGeometry),
}

/// Which normalized ratio the sweep fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioKind {
    NonlocalPerLog,
    TotalPerLogSq,
}

/// One sweep point; the normalized ratios are always recomputed from the
/// stored breakdown.
#[derive(Debug, Clone, Copy)]
pub struct ScalingRecord {
    pub eps: f64,
    pub breakdown: EnergyBreakdown,
    pub target: f64,
}

impl ScalingRecord {
    pub fn ratio(&self, kind: RatioKind) -> f64 {
        let log = self.breakdown.log_factor();
        match kind {
            RatioKind::NonlocalPerLog => self.breakdown.nonlocal_term / log,
            RatioKind::TotalPerLogSq => self.breakdown.total() / (log * log),
        }
    }
}

/// Least-squares fit ratio(eps) = a + b / ln(1/eps) with its RMS residual.
#[derive(Debug, Clone, Copy)]
pub struct SweepFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

pub fn fit_log_correction(points: &[(f64, f64)]) -> Option<SweepFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(eps, y) in points {
        let x = 1.0 / (1.0 / eps).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let a = (sy * sxx - sx * sxy) / det;
    let b = (n * sxy - sx * sy) / det;
    let mut rss = 0.0;
    for &(eps, y) in points {
        let x = 1.0 / (1.0 / eps).ln();
        let e = y - a - b * x;
        rss += e * e;
    }
    Some(SweepFit { a, b, residual: (rss / n).sqrt() })
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<ScalingRecord>,
    pub fit: Option<SweepFit>,
    pub kind: RatioKind,
}

fn check_dyadic_decreasing(eps_list: &[f64]) -> Result<()> {
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidQuery("eps list must be strictly decreasing".into()));
        }
    }
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::InvalidQuery("eps values must be positive".into()));
        }
        let p = -eps.log2();
        if (p - p.round()).abs() > 1e-12 {
            return Err(Error::InvalidQuery(format!(
                "eps = {eps} is not dyadic (2^-p)"
            )));
        }
    }
    Ok(())
}

/// Run a full sweep: per eps, resolve the grid by the policy, build the
/// field, and record the energy; then fit the normalized ratio against
/// 1/ln(1/eps). `target` is the limit value the ratio is compared to.
pub fn scaling_sweep(
    pf: &PolyhedralField,
    builder: SweepBuilder,
    eps_list: &[f64],
    kernel: &AnisotropyKernel,
    policy: DimsPolicy,
    target: f64,
) -> Result<SweepResult> {
    check_dyadic_decreasing(eps_list)?;
    let kind = match builder {
        SweepBuilder::MollifiedJump => RatioKind::NonlocalPerLog,
        SweepBuilder::Recovery(_) => RatioKind::TotalPerLogSq,
    };
    let method = if pf.domain().is_torus() {
        EnergyMethod::Convolution
    } else {
        EnergyMethod::Direct
    };
    let mut records = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let dims = policy.dims_for(pf.domain().side, eps);
        let field = match builder {
            SweepBuilder::MollifiedJump => mollified_jump(pf, eps, dims)?,
            SweepBuilder::Recovery(geometry) => {
                build_recovery(pf, &RecoveryParams { eps, geometry }, dims)?
            }
        };
        let breakdown = energy_eps(&field, kernel, eps, method)?;
        records.push(ScalingRecord { eps, breakdown, target });
    }
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.eps, r.ratio(kind))).collect();
    let fit = fit_log_correction(&points);
    Ok(SweepResult { records, fit, kind })
}

impl SweepResult {
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "eps,w_term,nonlocal,total,per_log,per_log2,target,fit_a,fit_residual"
        )?;
        let last = self.records.len().saturating_sub(1);
        for (i, r) in self.records.iter().enumerate() {
            let b = &r.breakdown;
            write!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.eps,
                b.w_term,
                b.nonlocal_term,
                b.total(),
                b.per_log(),
                b.per_log2(),
                r.target
            )?;
            match (&self.fit, i == last) {
                (Some(f), true) => writeln!(w, ",{:.16e},{:.16e}", f.a, f.residual)?,
                _ => writeln!(w, ",,")?,
            }
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.to_csv(std::io::BufWriter::new(f))
    }
}
