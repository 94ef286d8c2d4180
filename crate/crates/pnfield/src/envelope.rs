//! Convex macroscopic slip density: a linear program over rank-one atoms
//! b (x) n with relaxed line-tension costs, plus the rank-one density it
//! envelopes and certified norm-equivalence constants.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linetension::{grid_normal, slip_cube, LineTensionTable};

/// Rank-one slip atom: integer coefficients, grid normal, the N x 2 matrix
/// b (x) n, and its energy-per-length cost.
#[derive(Debug, Clone)]
pub struct Atom {
    pub b: Vec<i64>,
    pub n_index: usize,
    /// Row-major N x 2 matrix b (x) n.
    pub matrix: Vec<f64>,
    pub cost: f64,
}

/// Finite generating set for the envelope program, closed under the sign
/// pairing (b, n) ~ (-b, -n) which leaves b (x) n invariant.
#[derive(Debug, Clone)]
pub struct AtomSet {
    pub n_components: usize,
    pub k_directions: usize,
    pub b_max: i64,
    /// Coercivity floor inherited from the generating table.
    pub lambda_star: f64,
    atoms: Vec<Atom>,
}

impl AtomSet {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Same generation metadata over a hand-picked atom list (oracle tests,
    /// restricted searches).
    pub fn with_atoms(&self, atoms: Vec<Atom>) -> AtomSet {
        AtomSet { atoms, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

fn outer(b: &[i64], n: [f64; 2]) -> Vec<f64> {
    let mut m = Vec::with_capacity(b.len() * 2);
    for &bi in b {
        m.push(bi as f64 * n[0]);
        m.push(bi as f64 * n[1]);
    }
    m
}

/// One atom per distinct rank-one matrix reachable from the table.
pub fn build_atoms(table: &LineTensionTable, b_max: i64, k_directions: usize) -> Result<AtomSet> {
    if b_max < 1 {
        return Err(Error::EmptyAtomSet(format!("b_max = {b_max} generates no atoms")));
    }
    if k_directions < 4 {
        return Err(Error::InvalidQuery(format!(
            "need at least 4 directions to span, got {k_directions}"
        )));
    }
    if k_directions != table.k_directions {
        return Err(Error::InvalidQuery(format!(
            "atom grid K = {k_directions} does not match table K = {}",
            table.k_directions
        )));
    }
    let n_comp = table.n_components;
    let mut missing = Vec::new();
    let mut atoms = Vec::new();
    for b in slip_cube(n_comp, b_max) {
        // Sign-canonical representative: first nonzero coefficient positive.
        // Valid only on sign-symmetric (even K) grids.
        let canonical = b.iter().find(|&&v| v != 0).is_none_or(|&v| v > 0);
        if k_directions % 2 == 0 && !canonical {
            continue;
        }
        for j in 0..k_directions {
            match table.psi_rel(&b, j) {
                Some(cost) => atoms.push(Atom {
                    matrix: outer(&b, grid_normal(j, k_directions)),
                    b: b.clone(),
                    n_index: j,
                    cost,
                }),
                None => missing.push(format!("(b = {b:?}, j = {j})")),
            }
        }
    }
    if !missing.is_empty() {
        let shown = missing.iter().take(8).cloned().collect::<Vec<_>>().join(", ");
        return Err(Error::MissingTableRows(format!(
            "{} rows absent, first: {shown}",
            missing.len()
        )));
    }
    if atoms.is_empty() {
        return Err(Error::EmptyAtomSet("no nonzero slip vectors in range".into()));
    }
    atoms.sort_by(|a, c| a.b.cmp(&c.b).then(a.n_index.cmp(&c.n_index)));
    Ok(AtomSet {
        n_components: n_comp,
        k_directions,
        b_max,
        lambda_star: table.lambda_star,
        atoms,
    })
}

/// Result of one envelope evaluation; the support is a basic LP solution, so
/// it has at most 2N (+1) atoms.
#[derive(Debug, Clone)]
pub struct GEval {
    pub value: f64,
    /// (atom index, weight) pairs with positive weight.
    pub support: Vec<(usize, f64)>,
    pub k_directions: usize,
}

/// Convex 1-homogeneous density: minimize total atom cost over nonnegative
/// combinations reproducing the N x 2 matrix `a` (row-major).
pub fn g_eval(atoms: &AtomSet, a: &[f64]) -> Result<GEval> {
    if atoms.is_empty() {
        return Err(Error::EmptyAtomSet("cannot evaluate on an empty atom set".into()));
    }
    let rows = 2 * atoms.n_components;
    if a.len() != rows {
        return Err(Error::InvalidQuery(format!(
            "matrix has {} entries, expected {rows}",
            a.len()
        )));
    }
    if a.iter().all(|&v| v == 0.0) {
        return Ok(GEval { value: 0.0, support: Vec::new(), k_directions: atoms.k_directions });
    }
    let columns: Vec<&[f64]> = atoms.atoms.iter().map(|at| at.matrix.as_slice()).collect();
    let costs: Vec<f64> = atoms.atoms.iter().map(|at| at.cost).collect();
    let sol = simplex_min(&columns, &costs, a)?;
    Ok(GEval { value: sol.value, support: sol.support, k_directions: atoms.k_directions })
}

/// The rank-one density enveloped by `g_eval`: zero at zero, the table cost on
/// scaled rank-one matrices from the grid, +infinity elsewhere.
pub fn g0_eval(table: &LineTensionTable, a: &[f64], tol: f64) -> f64 {
    if a.iter().all(|&v| v.abs() <= tol) {
        return 0.0;
    }
    for row in table.rows() {
        let m = outer(&row.b, grid_normal(row.n_index, table.k_directions));
        if m.len() == a.len()
            && m.iter().zip(a.iter()).all(|(x, y)| (x - y).abs() <= tol)
        {
            return row.psi_rel_upper;
        }
    }
    f64::INFINITY
}

/// Certified norm-equivalence constants (lower, upper): for every matrix,
/// lower * |A|_F <= g(A) <= upper * |A|_F.
///
/// The lower constant is the coercivity floor: each atom costs at least
/// lambda_star * |b| = lambda_star * |b (x) n|_F, and the Frobenius norm is
/// convex. The upper constant expands each row of A over two adjacent grid
/// normals, paying at most 1/cos(pi/K) per unit length.
pub fn certified_bounds(atoms: &AtomSet) -> (f64, f64) {
    let mut unit_cost = 0.0f64;
    for at in atoms.atoms() {
        let ones = at.b.iter().map(|v| v.abs()).sum::<i64>();
        let inf = at.b.iter().map(|v| v.abs()).max().unwrap_or(0);
        if ones == 1 && inf == 1 {
            unit_cost = unit_cost.max(at.cost);
        }
    }
    let n = atoms.n_components as f64;
    let sector = (PI / atoms.k_directions as f64).cos();
    (atoms.lambda_star, unit_cost * n.sqrt() / sector)
}

/// Write an optimal decomposition as CSV rows "lambda,b1..bN,theta,cost".
pub fn decomposition_to_csv<W: Write>(atoms: &AtomSet, eval: &GEval, mut w: W) -> Result<()> {
    let bs: Vec<String> = (1..=atoms.n_components).map(|i| format!("b{i}")).collect();
    writeln!(w, "lambda,{},theta,cost", bs.join(","))?;
    for &(idx, lambda) in &eval.support {
        let at = &atoms.atoms[idx];
        let theta = 2.0 * PI * at.n_index as f64 / atoms.k_directions as f64;
        let b: Vec<String> = at.b.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{lambda:.16e},{},{theta:.16e},{:.16e}", b.join(","), at.cost)?;
    }
    Ok(())
}

pub fn save_decomposition<P: AsRef<Path>>(atoms: &AtomSet, eval: &GEval, path: P) -> Result<()> {
    let f = std::fs::File::create(path)?;
    decomposition_to_csv(atoms, eval, std::io::BufWriter::new(f))
}

// ---------------------------------------------------------------------------
// Dense two-phase primal simplex with Bland's rule.
// ---------------------------------------------------------------------------

struct LpSolution {
    value: f64,
    support: Vec<(usize, f64)>,
}

const PIVOT_EPS: f64 = 1e-11;

/// Minimize cost . x subject to sum_j x_j col_j = rhs, x >= 0.
fn simplex_min(columns: &[&[f64]], costs: &[f64], rhs: &[f64]) -> Result<LpSolution> {
    let m = rhs.len();
    let n = columns.len();
    let total = n + m; // real variables then one artificial per row
    let scale = rhs.iter().map(|v| v.abs()).sum::<f64>().max(1.0);

    // Tableau rows [A | I | b] with b >= 0 after sign normalization.
    let mut t = vec![vec![0.0f64; total + 1]; m];
    for i in 0..m {
        let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * columns[j][i];
        }
        t[i][n + i] = 1.0;
        t[i][total] = sign * rhs[i];
    }
    let mut basis: Vec<usize> = (n..total).collect();

    // Phase 1: minimize the sum of artificials.
    let phase1: Vec<f64> = (0..total).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    run_simplex(&mut t, &mut basis, &phase1, total, None)?;
    let infeas: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &bj)| bj >= n)
        .map(|(i, _)| t[i][total])
        .sum();
    if infeas > 1e-9 * scale {
        return Err(Error::LpInfeasible(format!(
            "phase-1 residual {infeas:.3e} on scale {scale:.3e}"
        )));
    }
    // Drive surviving artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > PIVOT_EPS) {
                pivot(&mut t, &mut basis, i, j, total);
            }
        }
    }

    // Phase 2 on the real costs; artificials are barred from re-entering.
    let mut phase2 = vec![0.0; total];
    phase2[..n].copy_from_slice(costs);
    run_simplex(&mut t, &mut basis, &phase2, total, Some(n))?;

    let mut support = Vec::new();
    let mut value = 0.0;
    for i in 0..m {
        if basis[i] < n && t[i][total] > PIVOT_EPS {
            support.push((basis[i], t[i][total]));
            value += costs[basis[i]] * t[i][total];
        }
    }
    support.sort_by_key(|&(j, _)| j);
    Ok(LpSolution { value, support })
}

fn run_simplex(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    total: usize,
    bar_from: Option<usize>,
) -> Result<()> {
    let m = t.len();
    let max_iter = 200 * (total + m);
    for _ in 0..max_iter {
        // Reduced costs against the current basis.
        let mut entering = None;
        for j in 0..total {
            if let Some(bar) = bar_from {
                if j >= bar {
                    continue;
                }
            }
            if basis.contains(&j) {
                continue;
            }
            let mut r = cost[j];
            for i in 0..m {
                r -= cost[basis[i]] * t[i][j];
            }
            if r < -PIVOT_EPS {
                entering = Some(j); // Bland: smallest index
                break;
            }
        }
        let Some(j) = entering else { return Ok(()) };
        // Ratio test, ties broken toward the smallest basis index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][j] > PIVOT_EPS {
                let ratio = t[i][total] / t[i][j];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS
                            || ((ratio - lr).abs() <= PIVOT_EPS && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return Err(Error::LpInternal(
                "unbounded descent direction with positive costs".into(),
            ));
        };
        pivot(t, basis, i, j, total);
    }
    Err(Error::LpInternal("simplex iteration cap exceeded".into()))
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize, total: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    for i in 0..t.len() {
        if i != row && t[i][col].abs() > 0.0 {
            let f = t[i][col];
            for j in 0..=total {
                t[i][j] -= f * t[row][j];
            }
        }
    }
    basis[row] = col;
}
