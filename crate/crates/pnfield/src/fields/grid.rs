//! Sampled slip fields on a regular grid, their discrete fractional seminorm,
//! and the binary field-file format.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{DomainKind, DomainSpec};

/// A slip field sampled at cell centers of an M1 x M2 grid; values are
/// real N-vectors stored component-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: DomainSpec,
    dims: [usize; 2],
    n_components: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(domain: DomainSpec, dims: [usize; 2], n_components: usize) -> Result<Self> {
        if dims[0] == 0 || dims[1] == 0 || n_components == 0 {
            return Err(Error::DomainMismatch(format!(
                "grid dims and component count must be positive, got {dims:?} x {n_components}"
            )));
        }
        Ok(GridField {
            domain,
            dims,
            n_components,
            values: vec![0.0; dims[0] * dims[1] * n_components],
        })
    }

    pub fn constant(domain: DomainSpec, dims: [usize; 2], value: &[f64]) -> Result<Self> {
        let mut gf = Self::zeros(domain, dims, value.len())?;
        for p in 0..dims[0] * dims[1] {
            gf.values[p * value.len()..(p + 1) * value.len()].copy_from_slice(value);
        }
        Ok(gf)
    }

    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            self.domain.side[0] / self.dims[0] as f64,
            self.domain.side[1] / self.dims[1] as f64,
        ]
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [(i as f64 + 0.5) * h[0], (j as f64 + 0.5) * h[1]]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i * self.dims[1] + j) * self.n_components
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let k = self.index(i, j);
        &self.values[k..k + self.n_components]
    }

    pub fn set(&mut self, i: usize, j: usize, value: &[f64]) {
        let k = self.index(i, j);
        self.values[k..k + self.n_components].copy_from_slice(value);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_layout(&self, other: &GridField) -> bool {
        self.domain == other.domain
            && self.dims == other.dims
            && self.n_components == other.n_components
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_components;
        let mut m = vec![0.0; n];
        for p in 0..self.dims[0] * self.dims[1] {
            for c in 0..n {
                m[c] += self.values[p * n + c];
            }
        }
        let count = (self.dims[0] * self.dims[1]) as f64;
        m.iter_mut().for_each(|v| *v /= count);
        m
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// L1 distance, counting cell areas.
    pub fn l1_distance(&self, other: &GridField) -> Result<f64> {
        if !self.same_layout(other) {
            return Err(Error::DomainMismatch("layout mismatch in l1_distance".into()));
        }
        let per_point: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(per_point * self.cell_area())
    }

    pub fn scaled(&self, t: f64) -> GridField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= t);
        out
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        if !self.same_layout(other) {
            return Err(Error::DomainMismatch("layout mismatch in add".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(other.values.iter()) {
            *a += b;
        }
        Ok(out)
    }

    /// Shift every sample by a constant vector (lattice shifts leave the
    /// energy invariant).
    pub fn translated_values(&self, d: &[f64]) -> Result<GridField> {
        if d.len() != self.n_components {
            return Err(Error::DomainMismatch("component mismatch in translation".into()));
        }
        let mut out = self.clone();
        let n = self.n_components;
        for p in 0..self.dims[0] * self.dims[1] {
            for c in 0..n {
                out.values[p * n + c] += d[c];
            }
        }
        Ok(out)
    }

    /// Cyclic index shift on the torus (exact symmetry of periodic sums).
    pub fn rolled(&self, di: usize, dj: usize) -> GridField {
        let mut out = self.clone();
        let [m1, m2] = self.dims;
        let n = self.n_components;
        for i in 0..m1 {
            for j in 0..m2 {
                let src = self.index((i + di) % m1, (j + dj) % m2);
                let dst = (i * m2 + j) * n;
                out.values[dst..dst + n].copy_from_slice(&self.values[src..src + n]);
            }
        }
        out
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(
            f,
            "PNFIELD v1\n{} {} {} {} {:.17e} {:.17e}\n",
            self.domain.kind,
            self.dims[0],
            self.dims[1],
            self.n_components,
            self.domain.side[0],
            self.domain.side[1]
        )?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut bytes = Vec::new();
        f.read_to_end(&mut bytes)?;
        let header_end = bytes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .map(|(i, _)| i)
            .nth(1)
            .ok_or_else(|| Error::BadFieldFile("missing header lines".into()))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| Error::BadFieldFile("non-utf8 header".into()))?;
        let mut lines = header.lines();
        let magic = lines.next().unwrap_or("");
        if magic != "PNFIELD v1" {
            return Err(Error::BadFieldFile(format!("bad magic: {magic}")));
        }
        let parts: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if parts.len() != 6 {
            return Err(Error::BadFieldFile("header needs: kind M1 M2 N side1 side2".into()));
        }
        let kind = match parts[0] {
            "torus" => DomainKind::Torus,
            "box" => DomainKind::Box,
            other => return Err(Error::BadFieldFile(format!("unknown domain kind {other}"))),
        };
        let m1: usize = parts[1].parse().map_err(|_| Error::BadFieldFile("bad M1".into()))?;
        let m2: usize = parts[2].parse().map_err(|_| Error::BadFieldFile("bad M2".into()))?;
        let n: usize = parts[3].parse().map_err(|_| Error::BadFieldFile("bad N".into()))?;
        let s1: f64 = parts[4].parse().map_err(|_| Error::BadFieldFile("bad side1".into()))?;
        let s2: f64 = parts[5].parse().map_err(|_| Error::BadFieldFile("bad side2".into()))?;
        let domain = DomainSpec { kind, side: [s1, s2] };
        let payload = &bytes[header_end + 1..];
        let expected = m1 * m2 * n * 8;
        if payload.len() != expected {
            return Err(Error::BadFieldFile(format!(
                "payload has {} bytes, expected {expected}",
                payload.len()
            )));
        }
        let mut values = Vec::with_capacity(m1 * m2 * n);
        for chunk in payload.chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadFieldFile("non-finite sample".into()));
        }
        Ok(GridField { domain, dims: [m1, m2], n_components: n, values })
    }
}

/// Discrete squared fractional seminorm: the double sum over distinct grid
/// points of |u(x) - u(y)|^2 / |x - y|^3 weighted by the squared cell area,
/// with minimal-image distances on the torus.
pub fn h12_seminorm_sq(gf: &GridField) -> f64 {
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let h = gf.spacing();
    let w = gf.cell_area() * gf.cell_area();
    let vals = gf.values();
    let domain = gf.domain();
    // Ordered pairs, accumulated per source row and reduced sequentially so
    // the result does not depend on the parallel schedule.
    let rows: Vec<f64> = (0..m1)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..m2 {
                let p = (i * m2 + j) * n;
                for i2 in 0..m1 {
                    for j2 in 0..m2 {
                        if i2 == i && j2 == j {
                            continue;
                        }
                        let q = (i2 * m2 + j2) * n;
                        let d = domain.wrap_delta([
                            (i as f64 - i2 as f64) * h[0],
                            (j as f64 - j2 as f64) * h[1],
                        ]);
                        let r2 = d[0] * d[0] + d[1] * d[1];
                        let r3 = r2 * r2.sqrt();
                        let mut diff2 = 0.0;
                        for c in 0..n {
                            let dv = vals[p + c] - vals[q + c];
                            diff2 += dv * dv;
                        }
                        acc += diff2 / r3;
                    }
                }
            }
            acc
        })
        .collect();
    rows.iter().sum::<f64>() * w
}

/// Anisotropic discrete total variation: axis differences weighted by the
/// transverse spacing, wrapping on the torus.
pub fn grid_total_variation(gf: &GridField) -> f64 {
    let [m1, m2] = gf.dims();
    let n = gf.n_components();
    let h = gf.spacing();
    let mut tv = 0.0;
    for i in 0..m1 {
        for j in 0..m2 {
            let p = gf.index(i, j);
            let mut neighbors = Vec::with_capacity(2);
            if i + 1 < m1 {
                neighbors.push((gf.index(i + 1, j), h[1]));
            } else if gf.domain().is_torus() {
                neighbors.push((gf.index(0, j), h[1]));
            }
            if j + 1 < m2 {
                neighbors.push((gf.index(i, j + 1), h[0]));
            } else if gf.domain().is_torus() {
                neighbors.push((gf.index(i, 0), h[0]));
            }
            for (q, weight) in neighbors {
                let mut d2 = 0.0;
                for c in 0..n {
                    let dv = gf.values()[p + c] - gf.values()[q + c];
                    d2 += dv * dv;
                }
                tv += d2.sqrt() * weight;
            }
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(dims: [usize; 2], n: usize, seed: u64) -> GridField {
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let mut gf = GridField::zeros(domain, dims, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in gf.values_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        gf
    }

    #[test]
    fn seminorm_of_constant_is_zero() {
        let domain = DomainSpec::torus(1.0, 1.0).unwrap();
        let gf = GridField::constant(domain, [12, 12], &[0.7, -0.2]).unwrap();
        assert_eq!(h12_seminorm_sq(&gf), 0.0);
        assert_eq!(grid_total_variation(&gf), 0.0);
    }

    #[test]
    fn seminorm_quadratic_scaling() {
        let gf = random_field([10, 14], 2, 3);
        let a = h12_seminorm_sq(&gf);
        let b = h12_seminorm_sq(&gf.scaled(2.0));
        assert_relative_eq!(b, 4.0 * a, max_relative = 1e-12);
    }

    #[test]
    fn seminorm_translation_invariant_on_torus() {
        let gf = random_field([9, 11], 1, 8);
        let a = h12_seminorm_sq(&gf);
        let b = h12_seminorm_sq(&gf.rolled(4, 7));
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn field_file_roundtrip() {
        let gf = random_field([7, 5], 3, 21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pnf");
        gf.save(&path).unwrap();
        let back = GridField::load(&path).unwrap();
        assert_eq!(gf, back);
    }

    #[test]
    fn load_rejects_truncated_payload() {
        let gf = random_field([4, 4], 1, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pnf");
        gf.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(GridField::load(&path), Err(Error::BadFieldFile(_))));
    }
}
