//! Line-tension densities: the unrelaxed density by two independent
//! quadratures, a certified relaxation upper bound from splitting and zigzag
//! microstructure moves, and the (b, normal) tables feeding the envelope.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::kernel::{AnisotropyKernel, KernelVariant, SymMat};

pub const DEFAULT_QUAD_NODES: usize = 8192;

/// Arguments of the line-tension density: integer slip coefficients and a
/// unit jump normal.
#[derive(Debug, Clone)]
pub struct LineTensionQuery {
    pub b: Vec<i64>,
    pub n: [f64; 2],
    pub quad_nodes: usize,
}

impl LineTensionQuery {
    pub fn new(b: Vec<i64>, n: [f64; 2]) -> Result<Self> {
        Self::with_nodes(b, n, DEFAULT_QUAD_NODES)
    }

    pub fn with_nodes(b: Vec<i64>, n: [f64; 2], quad_nodes: usize) -> Result<Self> {
        let norm = (n[0] * n[0] + n[1] * n[1]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidQuery(format!(
                "normal must be unit to 1e-12, |n| = {norm:.15}"
            )));
        }
        if quad_nodes < 16 {
            return Err(Error::InvalidQuery(format!(
                "quad_nodes must be >= 16, got {quad_nodes}"
            )));
        }
        Ok(LineTensionQuery { b, n, quad_nodes })
    }

    fn check_against(&self, kernel: &AnisotropyKernel) -> Result<()> {
        if self.b.len() != kernel.n_components() {
            return Err(Error::InvalidQuery(format!(
                "slip vector has {} components, kernel expects {}",
                self.b.len(),
                kernel.n_components()
            )));
        }
        Ok(())
    }

    fn b_f64(&self) -> Vec<f64> {
        self.b.iter().map(|&v| v as f64).collect()
    }
}

/// Search-space bounds for the relaxation fixed point.
#[derive(Debug, Clone)]
pub struct RelaxationOptions {
    /// Max infinity-norm of the split slip vectors.
    pub b_max: i64,
    /// Angular grid size for zigzag normals.
    pub n_directions: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub quad_nodes: usize,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        RelaxationOptions {
            b_max: 3,
            n_directions: 32,
            max_iterations: 200,
            tolerance: 1e-12,
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }
}

impl RelaxationOptions {
    fn validate(&self) -> Result<()> {
        if self.b_max < 1 {
            return Err(Error::InvalidQuery("b_max must be >= 1".into()));
        }
        if self.n_directions < 8 {
            return Err(Error::InvalidQuery(format!(
                "n_directions must be >= 8, got {}",
                self.n_directions
            )));
        }
        if self.max_iterations == 0 || self.tolerance <= 0.0 {
            return Err(Error::InvalidQuery(
                "max_iterations and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Unit normal of the j-th direction on a K-grid.
pub fn grid_normal(j: usize, k: usize) -> [f64; 2] {
    let theta = 2.0 * PI * j as f64 / k as f64;
    [theta.cos(), theta.sin()]
}

/// Nearest grid index to a unit normal, with the residual snap angle.
pub fn snap_normal(n: [f64; 2], k: usize) -> (usize, f64) {
    let theta = n[1].atan2(n[0]).rem_euclid(2.0 * PI);
    let step = 2.0 * PI / k as f64;
    let j = (theta / step).round() as usize % k;
    let snapped = j as f64 * step;
    let mut delta = (theta - snapped).abs();
    if delta > PI {
        delta = 2.0 * PI - delta;
    }
    (j, delta)
}

// ---------------------------------------------------------------------------
// Quadratures
// ---------------------------------------------------------------------------

fn gauss_legendre(order: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(order)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(order)))
        .clone()
}

/// Nodes and weights on [-1, 1] by Newton iteration on the Legendre recurrence.
fn compute_gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let n = order;
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Angles in (-pi/2, pi/2) at which the angular table is only C0, so the
/// line quadrature splits there. Empty for the closed-form variant.
fn line_integrand_kinks(kernel: &AnisotropyKernel, n: [f64; 2]) -> Vec<f64> {
    let KernelVariant::Tabulated { matrices } = kernel.variant() else {
        return Vec::new();
    };
    let k = matrices.len();
    let phi_n = n[1].atan2(n[0]);
    let mut kinks = Vec::new();
    // Table nodes repeat with period pi after symmetrization.
    for j in 0..k / 2 {
        let node = 2.0 * PI * j as f64 / k as f64;
        let mut theta = (node - phi_n).rem_euclid(PI);
        if theta > PI / 2.0 {
            theta -= PI;
        }
        if theta.abs() < PI / 2.0 - 1e-14 {
            kinks.push(theta);
        }
    }
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    kinks
}

fn line_quadrature(kernel: &AnisotropyKernel, query: &LineTensionQuery, order: usize) -> f64 {
    let b = query.b_f64();
    let n = query.n;
    let nperp = [-n[1], n[0]];
    let rule = gauss_legendre(order);
    let mut pieces = vec![-PI / 2.0];
    pieces.extend(line_integrand_kinks(kernel, n));
    pieces.push(PI / 2.0);
    let mut total = 0.0;
    for w in pieces.windows(2) {
        let (a, c) = (w[0], w[1]);
        if c - a < 1e-14 {
            continue;
        }
        let mid = 0.5 * (a + c);
        let half = 0.5 * (c - a);
        let mut acc = 0.0;
        for &(x, wt) in rule.iter() {
            let theta = mid + half * x;
            let y = [
                n[0] * theta.cos() + nperp[0] * theta.sin(),
                n[1] * theta.cos() + nperp[1] * theta.sin(),
            ];
            acc += wt * theta.cos() * kernel.gamma_hat_quad(y, &b);
        }
        total += 2.0 * half * acc;
    }
    total
}

/// Line-tension density as the hyperplane integral 2 * integral over
/// {x . n = 1} of gamma(x) b . b, mapped to a bounded smooth integrand by
/// t = tan(theta). Converges to 1e-8 relative or reports the residual.
pub fn psi_line(kernel: &AnisotropyKernel, query: &LineTensionQuery) -> Result<f64> {
    query.check_against(kernel)?;
    if query.b.iter().all(|&v| v == 0) {
        return Ok(0.0);
    }
    let order = query.quad_nodes.clamp(16, 512);
    let coarse = line_quadrature(kernel, query, order);
    let fine = line_quadrature(kernel, query, 2 * order);
    let residual = (fine - coarse).abs();
    let tol = 1e-8;
    if residual > tol * fine.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::QuadratureNonConvergence { residual, tol });
    }
    Ok(fine)
}

/// Line-tension density as the circle integral of |y . n| gamma_hat(y) b . b
/// by the periodic trapezoidal rule over `quad_nodes` angles.
pub fn psi_circle(kernel: &AnisotropyKernel, query: &LineTensionQuery) -> Result<f64> {
    query.check_against(kernel)?;
    if query.b.iter().all(|&v| v == 0) {
        return Ok(0.0);
    }
    let b = query.b_f64();
    let k = query.quad_nodes;
    let mut acc = 0.0;
    for j in 0..k {
        let theta = 2.0 * PI * j as f64 / k as f64;
        let y = [theta.cos(), theta.sin()];
        let dot = (y[0] * query.n[0] + y[1] * query.n[1]).abs();
        acc += dot * kernel.gamma_hat_quad(y, &b);
    }
    Ok(acc * 2.0 * PI / k as f64)
}

/// Angular mass matrix M(n) = integral over the circle of |y . n| gamma_hat(y);
/// psi(b, n) = M(n) b . b.
pub fn angular_mass_matrix(kernel: &AnisotropyKernel, n: [f64; 2], quad_nodes: usize) -> SymMat {
    let mut m = SymMat::zeros(kernel.n_components());
    for j in 0..quad_nodes {
        let theta = 2.0 * PI * j as f64 / quad_nodes as f64;
        let y = [theta.cos(), theta.sin()];
        let dot = (y[0] * n[0] + y[1] * n[1]).abs();
        m.add_scaled(&kernel.gamma_hat_dir(y), dot);
    }
    m.scaled(2.0 * PI / quad_nodes as f64)
}

/// Certified coercivity constant: the smallest eigenvalue of M(n) over the
/// K-grid of normals. Every table value obeys psi >= floor * |b|^2 and
/// psi_rel_upper >= floor * |b|.
pub fn coercivity_floor(kernel: &AnisotropyKernel, k_directions: usize, quad_nodes: usize) -> f64 {
    let mut floor = f64::INFINITY;
    for j in 0..k_directions {
        let m = angular_mass_matrix(kernel, grid_normal(j, k_directions), quad_nodes);
        floor = floor.min(m.eigen_range().0);
    }
    floor
}

// ---------------------------------------------------------------------------
// Relaxation on the (b, normal) cube
// ---------------------------------------------------------------------------

struct BCube {
    n_comp: usize,
    b_max: i64,
}

impl BCube {
    fn len(&self) -> usize {
        (2 * self.b_max + 1).pow(self.n_comp as u32) as usize
    }

    fn index(&self, b: &[i64]) -> Option<usize> {
        let side = 2 * self.b_max + 1;
        let mut idx = 0usize;
        for &c in b.iter().rev() {
            if c.abs() > self.b_max {
                return None;
            }
            idx = idx * side as usize + (c + self.b_max) as usize;
        }
        Some(idx)
    }

    fn vector(&self, mut idx: usize) -> Vec<i64> {
        let side = (2 * self.b_max + 1) as usize;
        let mut b = vec![0i64; self.n_comp];
        for c in b.iter_mut() {
            *c = (idx % side) as i64 - self.b_max;
            idx /= side;
        }
        b
    }
}

/// Admissible zigzag decomposition: tangent of the target normal written as a
/// nonnegative combination of two grid tangents, lengths adding along the
/// sawtooth.
struct ZigzagMove {
    j1: usize,
    j2: usize,
    w1: f64,
    w2: f64,
}

fn zigzag_moves(k: usize) -> Vec<Vec<ZigzagMove>> {
    let tangents: Vec<[f64; 2]> = (0..k)
        .map(|j| {
            let n = grid_normal(j, k);
            [-n[1], n[0]]
        })
        .collect();
    (0..k)
        .map(|j| {
            let t = tangents[j];
            let mut moves = Vec::new();
            for j1 in 0..k {
                for j2 in (j1 + 1)..k {
                    let (t1, t2) = (tangents[j1], tangents[j2]);
                    let det = t1[0] * t2[1] - t1[1] * t2[0];
                    // Antiparallel (and parallel) tangent pairs are degenerate.
                    if det.abs() < 1e-9 {
                        continue;
                    }
                    let w1 = (t[0] * t2[1] - t[1] * t2[0]) / det;
                    let w2 = (t1[0] * t[1] - t1[1] * t[0]) / det;
                    if w1 < -1e-12 || w2 < -1e-12 {
                        continue;
                    }
                    moves.push(ZigzagMove { j1, j2, w1: w1.max(0.0), w2: w2.max(0.0) });
                }
            }
            moves
        })
        .collect()
}

struct RelaxedCube {
    cube: BCube,
    k: usize,
    psi: Vec<f64>,
    relaxed: Vec<f64>,
}

fn relax_cube(kernel: &AnisotropyKernel, opts: &RelaxationOptions) -> Result<RelaxedCube> {
    opts.validate()?;
    let n_comp = kernel.n_components();
    let cube = BCube { n_comp, b_max: opts.b_max };
    let k = opts.n_directions;
    let nb = cube.len();

    let mut psi = vec![0.0; nb * k];
    for ib in 0..nb {
        let b = cube.vector(ib);
        if b.iter().all(|&v| v == 0) {
            continue;
        }
        for j in 0..k {
            let q = LineTensionQuery::with_nodes(b.clone(), grid_normal(j, k), opts.quad_nodes)?;
            psi[ib * k + j] = psi_line(kernel, &q)?;
        }
    }

    let mut e = psi.clone();
    let moves = zigzag_moves(k);
    // Splitting candidates: nonzero b1 with nonzero remainder inside the cube.
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let mut change = 0.0f64;
        // (a) Slip splitting at fixed normal.
        for ib in 0..nb {
            let b = cube.vector(ib);
            if b.iter().all(|&v| v == 0) {
                continue;
            }
            for ib1 in 0..nb {
                let b1 = cube.vector(ib1);
                if b1.iter().all(|&v| v == 0) {
                    continue;
                }
                let b2: Vec<i64> = b.iter().zip(b1.iter()).map(|(x, y)| x - y).collect();
                if b2.iter().all(|&v| v == 0) {
                    continue;
                }
                let Some(ib2) = cube.index(&b2) else { continue };
                for j in 0..k {
                    let cand = e[ib1 * k + j] + e[ib2 * k + j];
                    let cur = e[ib * k + j];
                    if cand < cur {
                        change = change.max(cur - cand);
                        e[ib * k + j] = cand;
                    }
                }
            }
        }
        // (b) Zigzag of the normal at fixed slip.
        for ib in 0..nb {
            for j in 0..k {
                let cur = e[ib * k + j];
                let mut best = cur;
                for mv in &moves[j] {
                    let cand = mv.w1 * e[ib * k + mv.j1] + mv.w2 * e[ib * k + mv.j2];
                    if cand < best {
                        best = cand;
                    }
                }
                if best < cur {
                    change = change.max(cur - best);
                    e[ib * k + j] = best;
                }
            }
        }
        let scale = e.iter().cloned().fold(0.0, f64::max).max(1.0);
        last_change = change / scale;
        if last_change <= opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::RelaxationNonConvergence {
            iterations: opts.max_iterations,
            last_change,
        });
    }
    Ok(RelaxedCube { cube, k, psi, relaxed: e })
}

/// Upper bound for the relaxed line-tension density at (b, n): the fixed
/// point of the splitting and zigzag moves started from the unrelaxed table.
pub fn psi_rel_upper(
    kernel: &AnisotropyKernel,
    b: &[i64],
    n: [f64; 2],
    opts: &RelaxationOptions,
) -> Result<f64> {
    if b.iter().map(|v| v.abs()).max().unwrap_or(0) > opts.b_max {
        return Err(Error::InvalidQuery(format!(
            "|b|_inf exceeds the relaxation bound b_max = {}",
            opts.b_max
        )));
    }
    let relaxed = relax_cube(kernel, opts)?;
    let ib = relaxed.cube.index(b).ok_or_else(|| {
        Error::InvalidQuery("slip vector outside the relaxation cube".into())
    })?;
    let (j, _) = snap_normal(n, relaxed.k);
    Ok(relaxed.relaxed[ib * relaxed.k + j])
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TableRow {
    pub b: Vec<i64>,
    pub n_index: usize,
    pub psi: f64,
    pub psi_rel_upper: f64,
}

/// Line-tension values on a (slip vector, direction-grid) product, with both
/// the unrelaxed density and its relaxation upper bound.
#[derive(Debug, Clone)]
pub struct LineTensionTable {
    pub kernel_id: String,
    pub n_components: usize,
    pub k_directions: usize,
    pub b_max: i64,
    /// Certified coercivity constant of the generating kernel (0 if unknown).
    pub lambda_star: f64,
    rows: Vec<TableRow>,
    index: HashMap<(Vec<i64>, usize), usize>,
}

impl LineTensionTable {
    /// Assemble a table from explicit rows (synthetic costs, external data).
    pub fn from_rows(
        kernel_id: String,
        n_components: usize,
        k_directions: usize,
        b_max: i64,
        lambda_star: f64,
        rows: Vec<TableRow>,
    ) -> Self {
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.b.clone(), r.n_index), i))
            .collect();
        LineTensionTable {
            kernel_id,
            n_components,
            k_directions,
            b_max,
            lambda_star,
            rows,
            index,
        }
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn get(&self, b: &[i64], n_index: usize) -> Option<&TableRow> {
        self.index.get(&(b.to_vec(), n_index)).map(|&i| &self.rows[i])
    }

    pub fn psi(&self, b: &[i64], n_index: usize) -> Option<f64> {
        self.get(b, n_index).map(|r| r.psi)
    }

    pub fn psi_rel(&self, b: &[i64], n_index: usize) -> Option<f64> {
        self.get(b, n_index).map(|r| r.psi_rel_upper)
    }

    pub fn normal(&self, n_index: usize) -> [f64; 2] {
        grid_normal(n_index, self.k_directions)
    }

    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let bs: Vec<String> = (1..=self.n_components).map(|i| format!("b{i}")).collect();
        writeln!(w, "{},theta,psi,psi_rel_upper", bs.join(","))?;
        for r in &self.rows {
            let b: Vec<String> = r.b.iter().map(|v| v.to_string()).collect();
            let theta = 2.0 * PI * r.n_index as f64 / self.k_directions as f64;
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e}",
                b.join(","),
                theta,
                r.psi,
                r.psi_rel_upper
            )?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.to_csv(std::io::BufWriter::new(f))
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::BadFieldFile("empty table csv".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let n_components = cols.iter().take_while(|c| c.starts_with('b')).count();
        if n_components == 0 || cols.len() != n_components + 3 {
            return Err(Error::BadFieldFile(format!("unexpected table header: {header}")));
        }
        let mut raw: Vec<(Vec<i64>, f64, f64, f64)> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != n_components + 3 {
                return Err(Error::BadFieldFile(format!("bad table row: {line}")));
            }
            let b: std::result::Result<Vec<i64>, _> =
                parts[..n_components].iter().map(|t| t.parse::<i64>()).collect();
            let b = b.map_err(|e| Error::BadFieldFile(format!("bad slip entry: {e}")))?;
            let theta: f64 = parts[n_components]
                .parse()
                .map_err(|e| Error::BadFieldFile(format!("bad theta: {e}")))?;
            let psi: f64 = parts[n_components + 1]
                .parse()
                .map_err(|e| Error::BadFieldFile(format!("bad psi: {e}")))?;
            let rel: f64 = parts[n_components + 2]
                .parse()
                .map_err(|e| Error::BadFieldFile(format!("bad psi_rel_upper: {e}")))?;
            raw.push((b, theta, psi, rel));
        }
        let mut thetas: Vec<f64> = raw.iter().map(|r| r.1).collect();
        thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let k = thetas.len();
        if k == 0 {
            return Err(Error::BadFieldFile("table has no rows".into()));
        }
        let mut rows = Vec::with_capacity(raw.len());
        let mut b_max = 0i64;
        for (b, theta, psi, rel) in raw {
            let j = (theta * k as f64 / (2.0 * PI)).round() as usize % k;
            if (theta - 2.0 * PI * j as f64 / k as f64).abs() > 1e-9 {
                return Err(Error::BadFieldFile(format!(
                    "theta {theta} is not on a uniform {k}-grid"
                )));
            }
            b_max = b_max.max(b.iter().map(|v| v.abs()).max().unwrap_or(0));
            rows.push(TableRow { b, n_index: j, psi, psi_rel_upper: rel });
        }
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.b.clone(), r.n_index), i))
            .collect();
        Ok(LineTensionTable {
            kernel_id: "imported".into(),
            n_components,
            k_directions: k,
            b_max,
            lambda_star: 0.0,
            rows,
            index,
        })
    }

    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv(std::io::BufReader::new(f))
    }
}

/// Build the table over `b_set` x K-grid; the relaxation fixed point runs on
/// the full cube |b|_inf <= opts.b_max so splits can leave `b_set`.
pub fn build_linetension_table(
    kernel: &AnisotropyKernel,
    b_set: &[Vec<i64>],
    k_directions: usize,
    opts: &RelaxationOptions,
) -> Result<LineTensionTable> {
    if b_set.is_empty() {
        return Err(Error::InvalidQuery("empty slip-vector set".into()));
    }
    let mut opts = opts.clone();
    opts.n_directions = k_directions;
    let needed_bmax = b_set
        .iter()
        .map(|b| b.iter().map(|v| v.abs()).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    opts.b_max = opts.b_max.max(needed_bmax).max(1);
    for b in b_set {
        if b.len() != kernel.n_components() {
            return Err(Error::InvalidQuery(format!(
                "slip vector {:?} has wrong dimension for the kernel",
                b
            )));
        }
    }

    let relaxed = relax_cube(kernel, &opts)?;
    let lambda_star = coercivity_floor(kernel, k_directions, opts.quad_nodes);

    let mut sorted: Vec<Vec<i64>> = b_set.to_vec();
    sorted.sort();
    sorted.dedup();

    let mut rows = Vec::with_capacity(sorted.len() * k_directions);
    for b in &sorted {
        let ib = relaxed.cube.index(b).expect("b_set inside cube by construction");
        for j in 0..k_directions {
            rows.push(TableRow {
                b: b.clone(),
                n_index: j,
                psi: relaxed.psi[ib * k_directions + j],
                psi_rel_upper: relaxed.relaxed[ib * k_directions + j],
            });
        }
    }
    let index = rows
        .iter()
        .enumerate()
        .map(|(i, r)| ((r.b.clone(), r.n_index), i))
        .collect();
    Ok(LineTensionTable {
        kernel_id: kernel.id(),
        n_components: kernel.n_components(),
        k_directions,
        b_max: opts.b_max,
        lambda_star,
        rows,
        index,
    })
}

/// All integer vectors with |b|_inf <= b_max, zero excluded.
pub fn slip_cube(n_components: usize, b_max: i64) -> Vec<Vec<i64>> {
    let cube = BCube { n_comp: n_components, b_max };
    (0..cube.len())
        .map(|i| cube.vector(i))
        .filter(|b| b.iter().any(|&v| v != 0))
        .collect()
}

/// Numerical Lipschitz-in-normal constant: psi(b, n) - psi(b, n') is bounded
/// by |n - n'| times the full circle integral of gamma_hat b . b, which the
/// coercivity of psi turns into a relative bound.
pub fn lipschitz_bound(kernel: &AnisotropyKernel, table: &LineTensionTable) -> f64 {
    let quad = 8192;
    let mut c = 0.0f64;
    let mut ring = SymMat::zeros(kernel.n_components());
    for j in 0..quad {
        let theta = 2.0 * PI * j as f64 / quad as f64;
        ring.add_scaled(&kernel.gamma_hat(theta), 1.0);
    }
    let ring = ring.scaled(2.0 * PI / quad as f64);
    let mut seen: Vec<&Vec<i64>> = Vec::new();
    for row in table.rows() {
        if seen.contains(&&row.b) {
            continue;
        }
        seen.push(&row.b);
        if row.b.iter().all(|&v| v == 0) {
            continue;
        }
        let bf: Vec<f64> = row.b.iter().map(|&v| v as f64).collect();
        let upper = ring.quad(&bf);
        let min_psi = (0..table.k_directions)
            .filter_map(|j| table.psi(&row.b, j))
            .fold(f64::INFINITY, f64::min);
        if min_psi > 0.0 {
            c = c.max(upper / min_psi);
        }
    }
    c * (1.0 + 1e-9)
}
