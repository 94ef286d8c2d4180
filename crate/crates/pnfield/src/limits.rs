//! Limit functionals on composite (smooth + polyhedral-jump) fields: the
//! sigma-scaled line-tension functional, the self-energy with the convex
//! density on both the absolutely continuous and jump parts, and the full
//! limit with the long-range quadratic form.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{nonlocal_convolution, nonlocal_direct};
use crate::envelope::{g_eval, AtomSet};
use crate::error::{Error, Result};
use crate::fields::{GridField, PolyhedralField};
use crate::kernel::AnisotropyKernel;
use crate::linetension::{snap_normal, LineTensionTable};

/// Smooth plus jump decomposition of a slip field on a shared domain.
#[derive(Debug, Clone)]
pub struct CompositeField {
    pub smooth: GridField,
    pub jump: PolyhedralField,
}

impl CompositeField {
    pub fn new(smooth: GridField, jump: PolyhedralField) -> Result<Self> {
        if smooth.domain() != jump.domain() {
            return Err(Error::DomainMismatch(
                "smooth and jump parts must share the domain".into(),
            ));
        }
        if smooth.n_components() != jump.n_components() {
            return Err(Error::DomainMismatch(
                "smooth and jump parts must share the component count".into(),
            ));
        }
        Ok(CompositeField { smooth, jump })
    }

    /// Total field: smooth part plus the jump part rasterized on its grid.
    pub fn total_field(&self) -> Result<GridField> {
        let raster = self.jump.rasterize(self.smooth.dims())?;
        self.smooth.add(&raster)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EltSigmaReport {
    pub value: f64,
    /// Largest angle by which a segment normal was snapped to the table grid.
    pub max_snap_angle: f64,
}

/// Sigma-scaled line-tension functional of a polyhedral field: the sum over
/// segments of length * sigma * psi(jump, normal), normals snapped to the
/// table's direction grid. `use_relaxed` selects the relaxed upper bound.
pub fn elt_sigma(
    pf: &PolyhedralField,
    table: &LineTensionTable,
    use_relaxed: bool,
) -> Result<EltSigmaReport> {
    let mut value = 0.0;
    let mut max_snap = 0.0f64;
    let mut missing = Vec::new();
    for seg in pf.segments() {
        let (j, snap) = snap_normal(seg.normal, table.k_directions);
        max_snap = max_snap.max(snap);
        let row = match table.get(&seg.jump, j) {
            Some(r) => r,
            None => {
                missing.push(format!("(b = {:?}, j = {j})", seg.jump));
                continue;
            }
        };
        let density = if use_relaxed { row.psi_rel_upper } else { row.psi };
        value += seg.length() * pf.sigma() * density;
    }
    if !missing.is_empty() {
        return Err(Error::MissingTableRows(missing.join(", ")));
    }
    Ok(EltSigmaReport { value, max_snap_angle: max_snap })
}

#[derive(Debug, Clone, Copy, Default)]
pub enum FdScheme {
    /// Centered differences, periodic on the torus, one-sided at box edges.
    #[default]
    Central,
}

#[derive(Debug, Clone, Serialize)]
pub struct FSelfReport {
    pub ac: f64,
    pub jump: f64,
}

impl FSelfReport {
    pub fn total(&self) -> f64 {
        self.ac + self.jump
    }
}

/// Finite-difference gradient of the smooth part at one sample, as the
/// row-major N x 2 matrix expected by the envelope program.
fn fd_gradient(gf: &GridField, i: usize, j: usize, _scheme: FdScheme) -> Vec<f64> {
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let h = gf.spacing();
    let torus = gf.domain().is_torus();
    let mut a = vec![0.0; n * 2];
    let deriv = |plus: &[f64], minus: &[f64], span: f64, c: usize| -> f64 {
        (plus[c] - minus[c]) / span
    };
    // Axis 0.
    let (ip, im, span0) = if torus {
        ((i + 1) % m1, (i + m1 - 1) % m1, 2.0 * h[0])
    } else if i == 0 {
        (1, 0, h[0])
    } else if i == m1 - 1 {
        (m1 - 1, m1 - 2, h[0])
    } else {
        (i + 1, i - 1, 2.0 * h[0])
    };
    // Axis 1.
    let (jp, jm, span1) = if torus {
        ((j + 1) % m2, (j + m2 - 1) % m2, 2.0 * h[1])
    } else if j == 0 {
        (1, 0, h[1])
    } else if j == m2 - 1 {
        (m2 - 1, m2 - 2, h[1])
    } else {
        (j + 1, j - 1, 2.0 * h[1])
    };
    for c in 0..n {
        a[c * 2] = deriv(gf.get(ip, j), gf.get(im, j), span0, c);
        a[c * 2 + 1] = deriv(gf.get(i, jp), gf.get(i, jm), span1, c);
    }
    a
}

/// Self energy: the convex density integrated over the smooth gradient plus
/// its 1-homogeneous evaluation on the jump part.
pub fn f_self(cf: &CompositeField, atoms: &AtomSet, scheme: FdScheme) -> Result<FSelfReport> {
    let gf = &cf.smooth;
    let [m1, m2] = gf.dims();
    let area = gf.cell_area();
    let rows: Vec<Result<f64>> = (0..m1)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..m2 {
                let a = fd_gradient(gf, i, j, scheme);
                acc += g_eval(atoms, &a)?.value;
            }
            Ok(acc)
        })
        .collect();
    let mut ac = 0.0;
    for r in rows {
        ac += r?;
    }
    ac *= area;

    let mut jump = 0.0;
    for seg in cf.jump.segments() {
        let mut m = Vec::with_capacity(seg.jump.len() * 2);
        for &b in &seg.jump {
            m.push(b as f64 * cf.jump.sigma() * seg.normal[0]);
            m.push(b as f64 * cf.jump.sigma() * seg.normal[1]);
        }
        jump += seg.length() * g_eval(atoms, &m)?.value;
    }
    Ok(FSelfReport { ac, jump })
}

#[derive(Debug, Clone, Serialize)]
pub struct F0Report {
    pub f_self_ac: f64,
    pub f_self_jump: f64,
    pub nonlocal: f64,
    pub f0: f64,
}

impl F0Report {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "f_self_ac": self.f_self_ac,
            "f_self_jump": self.f_self_jump,
            "nonlocal": self.nonlocal,
            "f0": self.f0,
        })
    }
}

/// Full limit functional: self energy plus the long-range quadratic form of
/// the total (smooth + rasterized jump) field.
pub fn f0(cf: &CompositeField, kernel: &AnisotropyKernel, atoms: &AtomSet) -> Result<F0Report> {
    let fs = f_self(cf, atoms, FdScheme::Central)?;
    let total = cf.total_field()?;
    let nonlocal = if total.domain().is_torus() {
        nonlocal_convolution(&total, kernel)?
    } else {
        nonlocal_direct(&total, kernel)?
    };
    Ok(F0Report {
        f_self_ac: fs.ac,
        f_self_jump: fs.jump,
        nonlocal,
        f0: fs.total() + nonlocal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{build_atoms, certified_bounds};
    use crate::fields::DomainSpec;
    use crate::linetension::{build_linetension_table, slip_cube, RelaxationOptions};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup(k_dirs: usize) -> (AnisotropyKernel, LineTensionTable, AtomSet) {
        let kernel = AnisotropyKernel::cubic(4.0 * PI, 0.3).unwrap();
        let table = build_linetension_table(
            &kernel,
            &slip_cube(2, 2),
            k_dirs,
            &RelaxationOptions { b_max: 2, n_directions: k_dirs, ..Default::default() },
        )
        .unwrap();
        let atoms = build_atoms(&table, 2, k_dirs).unwrap();
        (kernel, table, atoms)
    }

    #[test]
    fn constant_jump_field_is_free() {
        let (_, table, _) = setup(8);
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let pf = PolyhedralField::new(
            domain,
            1.0,
            vec![crate::fields::Cell {
                vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                value: vec![3, -1],
            }],
        )
        .unwrap();
        let r = elt_sigma(&pf, &table, false).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn single_segment_matches_table_and_scales_in_sigma() {
        let (_, table, _) = setup(8);
        let domain = DomainSpec::rect(1.0, 1.0).unwrap();
        let b = vec![1i64, 0];
        let pf1 = PolyhedralField::horizontal_jump(domain, 0.5, 0.5, b.clone()).unwrap();
        let pf2 = PolyhedralField::horizontal_jump(domain, 1.0, 0.5, b.clone()).unwrap();
        // Normal (0, 1) is direction index K/4 on the grid.
        let psi = table.psi(&b, 2).unwrap();
        let r1 = elt_sigma(&pf1, &table, false).unwrap();
        assert!(r1.max_snap_angle < 1e-12);
        assert_relative_eq!(r1.value, 0.5 * psi, max_relative = 1e-12);
        let r2 = elt_sigma(&pf2, &table, false).unwrap();
        assert_relative_eq!(r2.value, 2.0 * r1.value, max_relative = 1e-12);
    }

    #[test]
    fn relaxed_functional_never_exceeds_unrelaxed() {
        let (_, table, _) = setup(8);
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        for b in [vec![1i64, 0], vec![2, 0], vec![2, -2]] {
            let pf =
                PolyhedralField::horizontal_strip(domain, 1.0, 0.25, 0.75, b).unwrap();
            let rel = elt_sigma(&pf, &table, true).unwrap().value;
            let unrel = elt_sigma(&pf, &table, false).unwrap().value;
            assert!(rel <= unrel * (1.0 + 1e-12));
        }
    }

    #[test]
    fn missing_rows_error() {
        let (_, table, _) = setup(8);
        let domain = DomainSpec::rect(1.0, 1.0).unwrap();
        let pf = PolyhedralField::horizontal_jump(domain, 1.0, 0.5, vec![3, 3]).unwrap();
        assert!(matches!(
            elt_sigma(&pf, &table, false),
            Err(Error::MissingTableRows(_))
        ));
    }

    #[test]
    fn zero_composite_and_ordering() {
        let (kernel, _, atoms) = setup(8);
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let smooth = GridField::zeros(domain, [16, 16], 2).unwrap();
        let jump = PolyhedralField::new(
            domain,
            1.0,
            vec![crate::fields::Cell {
                vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                value: vec![0, 0],
            }],
        )
        .unwrap();
        let cf = CompositeField::new(smooth, jump).unwrap();
        let r = f0(&cf, &kernel, &atoms).unwrap();
        assert_eq!(r.f0, 0.0);
        assert!(r.f0 >= r.f_self_ac + r.f_self_jump - 1e-15);
    }

    #[test]
    fn pure_jump_composite_single_segment() {
        let (kernel, _, atoms) = setup(8);
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let sigma = 0.5;
        let pf = PolyhedralField::horizontal_strip(domain, sigma, 0.25, 0.75, vec![1, 0])
            .unwrap();
        let smooth = GridField::zeros(domain, [32, 32], 2).unwrap();
        let cf = CompositeField::new(smooth, pf).unwrap();
        let fs = f_self(&cf, &atoms, FdScheme::Central).unwrap();
        assert_eq!(fs.ac, 0.0);
        // Two unit-length segments with jump +/- e1 across (0, 1).
        let m = [sigma * 0.0, sigma * 1.0, 0.0, 0.0];
        let per_seg = g_eval(&atoms, &m).unwrap().value;
        assert_relative_eq!(fs.jump, 2.0 * per_seg, max_relative = 1e-10);
        // Norm equivalence of the density on the jump part.
        let (lo, hi) = certified_bounds(&atoms);
        let dv = cf.jump.bv_measure().total;
        assert!(fs.jump >= lo * dv - 1e-9);
        assert!(fs.jump <= hi * dv + 1e-9);
        // The long-range term is nonnegative, so f0 dominates f_self.
        let r = f0(&cf, &kernel, &atoms).unwrap();
        assert!(r.nonlocal > 0.0);
        assert!(r.f0 >= fs.total());
    }

    #[test]
    fn affine_smooth_part_integrates_exactly() {
        let (_, _, atoms) = setup(8);
        let domain = DomainSpec::rect(1.0, 1.0).unwrap();
        let a = [0.7, -0.3, 0.2, 1.1]; // row-major N x 2
        let mut smooth = GridField::zeros(domain, [24, 24], 2).unwrap();
        for i in 0..24 {
            for j in 0..24 {
                let x = smooth.cell_center(i, j);
                let v = [a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
                smooth.set(i, j, &v);
            }
        }
        let jump = PolyhedralField::new(
            domain,
            1.0,
            vec![crate::fields::Cell {
                vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                value: vec![0, 0],
            }],
        )
        .unwrap();
        let cf = CompositeField::new(smooth, jump).unwrap();
        let fs = f_self(&cf, &atoms, FdScheme::Central).unwrap();
        let g_a = g_eval(&atoms, &a).unwrap().value;
        assert_relative_eq!(fs.ac, g_a, max_relative = 1e-9);
        assert_eq!(fs.jump, 0.0);
    }

    #[test]
    fn jump_part_dominated_by_relaxed_line_tension() {
        let (_, table, atoms) = setup(8);
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let pf =
            PolyhedralField::horizontal_strip(domain, 1.0, 0.25, 0.75, vec![2, 1]).unwrap();
        let smooth = GridField::zeros(domain, [16, 16], 2).unwrap();
        let cf = CompositeField::new(smooth, pf).unwrap();
        let fs = f_self(&cf, &atoms, FdScheme::Central).unwrap();
        let rel = elt_sigma(&cf.jump, &table, true).unwrap().value;
        assert!(fs.jump <= rel * (1.0 + 1e-10) + 1e-12);
    }
}
