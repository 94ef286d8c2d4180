//! Replicated shifted copies of a polyhedral field and their running-average
//! limit: the lattice-refining construction behind the recovery fields.

use crate::error::{Error, Result};
use crate::fields::{GridField, PolyhedralField};

/// Finite replicated-shift average: x maps to the mean of floor(L) copies of
/// the field shifted along zeta, taking values in (sigma / L) Z^N.
pub struct ShiftedAverage<'a> {
    pf: &'a PolyhedralField,
    /// Replication parameter L; floor(L) copies are summed with weight 1/L.
    pub l: f64,
    pub copies: usize,
    /// Shift reach rho^alpha, multiplied by j/L per copy.
    pub reach: f64,
    pub zeta: [f64; 2],
}

fn validate_shift_params(l: f64, zeta: [f64; 2], rho: f64, alpha: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::InvalidQuery(format!("L must be positive, got {l}")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidQuery(format!("rho must be positive, got {rho}")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidQuery(format!(
            "alpha must lie in (0, 1/2), got {alpha}"
        )));
    }
    let z = (zeta[0] * zeta[0] + zeta[1] * zeta[1]).sqrt();
    if z > 1.0 + 1e-12 {
        return Err(Error::InvalidQuery(format!(
            "zeta must lie in the closed unit ball, |zeta| = {z}"
        )));
    }
    Ok(rho.powf(alpha))
}

/// Build the finite replicated-shift evaluator. On a box the caller must
/// supply a field covering the enlarged domain the shifts reach into.
pub fn replicate_shift(
    pf: &PolyhedralField,
    l: f64,
    zeta: [f64; 2],
    rho: f64,
    alpha: f64,
) -> Result<ShiftedAverage<'_>> {
    let reach = validate_shift_params(l, zeta, rho, alpha)?;
    Ok(ShiftedAverage { pf, l, copies: l.floor() as usize, reach, zeta })
}

impl ShiftedAverage<'_> {
    /// Value at a point: sum over j = 1..floor(L) of pf(x + reach (j/L) zeta) / L.
    pub fn eval(&self, x: [f64; 2]) -> Result<Vec<f64>> {
        let n = self.pf.n_components();
        let mut acc = vec![0.0; n];
        for j in 1..=self.copies {
            let t = self.reach * j as f64 / self.l;
            let p = [x[0] + t * self.zeta[0], x[1] + t * self.zeta[1]];
            let v = self
                .pf
                .value_at(p)
                .ok_or(Error::ShiftOutOfCoverage { x: p[0], y: p[1] })?;
            for c in 0..n {
                acc[c] += v[c] as f64;
            }
        }
        let w = self.pf.sigma() / self.l;
        acc.iter_mut().for_each(|v| *v *= w);
        Ok(acc)
    }

    /// Cell-center rasterization of the averaged field.
    pub fn rasterize(&self, dims: [usize; 2]) -> Result<GridField> {
        let mut gf = GridField::zeros(self.pf.domain(), dims, self.pf.n_components())?;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let v = self.eval(gf.cell_center(i, j))?;
                gf.set(i, j, &v);
            }
        }
        Ok(gf)
    }

    /// Distance from a point to the union of the replicated jump segments.
    pub fn distance_to_replicated_jumps(&self, x: [f64; 2]) -> f64 {
        let mut best = f64::INFINITY;
        for j in 1..=self.copies {
            let t = self.reach * j as f64 / self.l;
            let p = [x[0] + t * self.zeta[0], x[1] + t * self.zeta[1]];
            best = best.min(self.pf.distance_to_jump_set(p));
        }
        best
    }
}

/// Running-average limit of the replicated shifts: the integral over t in
/// [0, 1] of pf(x + reach t zeta), by a composite midpoint rule.
pub struct InfinityAverage<'a> {
    pf: &'a PolyhedralField,
    pub reach: f64,
    pub zeta: [f64; 2],
    pub quad_nodes: usize,
}

pub fn average_shift_limit(
    pf: &PolyhedralField,
    zeta: [f64; 2],
    rho: f64,
    alpha: f64,
    quad_nodes: usize,
) -> Result<InfinityAverage<'_>> {
    let reach = validate_shift_params(1.0, zeta, rho, alpha)?;
    if quad_nodes == 0 {
        return Err(Error::InvalidQuery("quadrature needs at least one node".into()));
    }
    Ok(InfinityAverage { pf, reach, zeta, quad_nodes })
}

impl InfinityAverage<'_> {
    pub fn eval(&self, x: [f64; 2]) -> Result<Vec<f64>> {
        let n = self.pf.n_components();
        let mut acc = vec![0.0; n];
        for q in 0..self.quad_nodes {
            let t = self.reach * (q as f64 + 0.5) / self.quad_nodes as f64;
            let p = [x[0] + t * self.zeta[0], x[1] + t * self.zeta[1]];
            let v = self
                .pf
                .value_at(p)
                .ok_or(Error::ShiftOutOfCoverage { x: p[0], y: p[1] })?;
            for c in 0..n {
                acc[c] += v[c] as f64;
            }
        }
        let w = self.pf.sigma() / self.quad_nodes as f64;
        acc.iter_mut().for_each(|v| *v *= w);
        Ok(acc)
    }

    pub fn rasterize(&self, dims: [usize; 2]) -> Result<GridField> {
        let mut gf = GridField::zeros(self.pf.domain(), dims, self.pf.n_components())?;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let v = self.eval(gf.cell_center(i, j))?;
                gf.set(i, j, &v);
            }
        }
        Ok(gf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Cell, DomainSpec, PolyhedralField};
    use approx::assert_relative_eq;

    fn constant_pf(value: i64) -> PolyhedralField {
        PolyhedralField::new(
            DomainSpec::torus(1.0, 1.0).unwrap(),
            0.5,
            vec![Cell {
                vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                value: vec![value],
            }],
        )
        .unwrap()
    }

    #[test]
    fn sub_unit_l_gives_the_empty_sum() {
        let pf = constant_pf(3);
        let avg = replicate_shift(&pf, 0.7, [1.0, 0.0], 0.1, 0.25).unwrap();
        assert_eq!(avg.copies, 0);
        assert_eq!(avg.eval([0.4, 0.4]).unwrap(), vec![0.0]);
    }

    #[test]
    fn constant_field_scales_by_floor_over_l() {
        let pf = constant_pf(2);
        let l = 5.7;
        let avg = replicate_shift(&pf, l, [0.3, 0.4], 0.2, 0.3).unwrap();
        let v = avg.eval([0.5, 0.5]).unwrap();
        // sigma * value * floor(L) / L.
        assert_relative_eq!(v[0], 0.5 * 2.0 * 5.0 / l, max_relative = 1e-14);
    }

    #[test]
    fn values_live_on_the_refined_lattice() {
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let pf =
            PolyhedralField::horizontal_strip(domain, 0.5, 0.25, 0.75, vec![2]).unwrap();
        let l = 6.3;
        let avg = replicate_shift(&pf, l, [0.1, 0.9], 0.05, 0.3).unwrap();
        for p in [[0.1, 0.2], [0.5, 0.26], [0.9, 0.74], [0.3, 0.5]] {
            let v = avg.eval(p).unwrap()[0];
            let scaled = v * l / pf.sigma();
            assert!(
                (scaled - scaled.round()).abs() < 1e-9,
                "value {v} not in (sigma/L) Z"
            );
        }
    }

    #[test]
    fn finite_average_approaches_the_running_average() {
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let pf =
            PolyhedralField::horizontal_strip(domain, 1.0, 0.25, 0.75, vec![1]).unwrap();
        let (zeta, rho, alpha) = ([0.2, 0.8], 0.1, 0.3);
        let limit = average_shift_limit(&pf, zeta, rho, alpha, 4096).unwrap();
        let dims = [16, 64];
        let lim_grid = limit.rasterize(dims).unwrap();
        let bv = pf.bv_measure().total;
        let reach = rho.powf(alpha);
        for l in [8.0f64, 32.0, 128.0] {
            let avg = replicate_shift(&pf, l, zeta, rho, alpha).unwrap();
            let grid = avg.rasterize(dims).unwrap();
            let dist = grid.l1_distance(&lim_grid).unwrap();
            // Budget: reach/L * |Dv| plus the floor defect, padded
            // for the rasterized comparison.
            let defect = (l - l.floor()) / l * pf.linf_norm() * pf.domain().area();
            let budget = reach / l * bv + defect + 0.02 / l + 1e-3;
            assert!(dist <= budget, "L = {l}: distance {dist} > budget {budget}");
        }
    }

    #[test]
    fn box_shift_out_of_coverage_errors() {
        let domain = DomainSpec::rect(1.0, 1.0).unwrap();
        let pf = PolyhedralField::horizontal_jump(domain, 1.0, 0.5, vec![1]).unwrap();
        let avg = replicate_shift(&pf, 4.0, [1.0, 0.0], 0.9, 0.45).unwrap();
        // A point close to the right edge shifts out of the box.
        let res = avg.eval([0.999, 0.5]);
        assert!(matches!(res, Err(Error::ShiftOutOfCoverage { .. })));
    }

    #[test]
    fn enlarged_box_coverage_admits_interior_shifts() {
        // Cells extend past the nominal box so shifted evaluation points
        // stay covered; negative vertex coordinates must keep distinct
        // edge identities.
        let domain = DomainSpec::rect(1.0, 1.0).unwrap();
        let rect = |x0: f64, x1: f64, y0: f64, y1: f64| {
            vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
        };
        let pf = PolyhedralField::new(
            domain,
            1.0,
            vec![
                Cell { vertices: rect(-0.5, 1.5, -0.5, 0.5), value: vec![0] },
                Cell { vertices: rect(-0.5, 1.5, 0.5, 1.5), value: vec![1] },
            ],
        )
        .unwrap();
        assert_eq!(pf.segments().len(), 1);
        let avg = replicate_shift(&pf, 4.0, [0.6, 0.8], 0.01, 0.3).unwrap();
        for p in [[0.1, 0.1], [0.9, 0.9], [0.5, 0.45]] {
            assert!(avg.eval(p).is_ok(), "interior point {p:?} must stay covered");
        }
    }
}
