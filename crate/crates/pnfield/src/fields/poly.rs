//! Piecewise-constant fields on polygonal partitions: cells carry integer
//! slip vectors scaled by sigma, jumps live on the derived segment list.
//!
//! Cells must meet edge to edge; shared edges are matched through quantized
//! endpoint keys (wrapped on the torus) and turned into jump segments.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{DomainKind, DomainSpec, GridField};

#[derive(Debug, Clone)]
pub struct Cell {
    /// Convex polygon, counterclockwise.
    pub vertices: Vec<[f64; 2]>,
    /// Integer slip coefficients; the field value is sigma times this.
    pub value: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Unit normal pointing from the minus cell into the plus cell.
    pub normal: [f64; 2],
    /// Integer jump: plus-side value minus minus-side value.
    pub jump: Vec<i64>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    pub fn jump_norm(&self) -> f64 {
        self.jump.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
    }

    pub fn midpoint(&self) -> [f64; 2] {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }

    /// Distance from a point to the segment, with minimal-image wrapping.
    pub fn distance(&self, p: [f64; 2], domain: &DomainSpec) -> f64 {
        let ab = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let ap = domain.wrap_delta([p[0] - self.a[0], p[1] - self.a[1]]);
        let t = if len2 > 0.0 {
            ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct BvMeasure {
    pub total: f64,
    /// Contribution of each segment, aligned with the segment list.
    pub per_segment: Vec<f64>,
}

/// Piecewise-constant field with values in sigma * Z^N on a polygonal
/// partition, with the jump segments derived at construction.
#[derive(Debug, Clone)]
pub struct PolyhedralField {
    domain: DomainSpec,
    sigma: f64,
    n_components: usize,
    cells: Vec<Cell>,
    segments: Vec<Segment>,
}

const INSIDE_EPS: f64 = 1e-12;

impl PolyhedralField {
    pub fn new(domain: DomainSpec, sigma: f64, cells: Vec<Cell>) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidQuery(format!("sigma must be positive, got {sigma}")));
        }
        if cells.is_empty() {
            return Err(Error::InvalidQuery("a polyhedral field needs at least one cell".into()));
        }
        let n_components = cells[0].value.len();
        if n_components == 0 || cells.iter().any(|c| c.value.len() != n_components) {
            return Err(Error::InvalidQuery("inconsistent cell value dimensions".into()));
        }
        let mut cells = cells;
        for cell in &mut cells {
            if cell.vertices.len() < 3 {
                return Err(Error::InvalidQuery("polygon needs at least 3 vertices".into()));
            }
            // Normalize to counterclockwise orientation.
            if signed_area(&cell.vertices) < 0.0 {
                cell.vertices.reverse();
            }
        }
        let segments = derive_segments(&domain, &cells)?;
        Ok(PolyhedralField { domain, sigma, n_components, cells, segments })
    }

    /// Three-band partition of the domain: zero below y_lo, `value` between
    /// the two cuts, zero above y_hi. On a torus this is the canonical
    /// two-parallel-jumps geometry.
    pub fn horizontal_strip(
        domain: DomainSpec,
        sigma: f64,
        y_lo: f64,
        y_hi: f64,
        value: Vec<i64>,
    ) -> Result<Self> {
        let [s1, s2] = domain.side;
        if !(0.0 < y_lo && y_lo < y_hi && y_hi < s2) {
            return Err(Error::InvalidQuery(format!(
                "strip cuts must satisfy 0 < {y_lo} < {y_hi} < {s2}"
            )));
        }
        let zero = vec![0i64; value.len()];
        let rect = |y0: f64, y1: f64| vec![[0.0, y0], [s1, y0], [s1, y1], [0.0, y1]];
        Self::new(
            domain,
            sigma,
            vec![
                Cell { vertices: rect(0.0, y_lo), value: zero.clone() },
                Cell { vertices: rect(y_lo, y_hi), value },
                Cell { vertices: rect(y_hi, s2), value: zero },
            ],
        )
    }

    /// Half-plane jump: zero below the cut, `value` above.
    pub fn horizontal_jump(
        domain: DomainSpec,
        sigma: f64,
        y_cut: f64,
        value: Vec<i64>,
    ) -> Result<Self> {
        let [s1, s2] = domain.side;
        if !(0.0 < y_cut && y_cut < s2) {
            return Err(Error::InvalidQuery(format!("cut must satisfy 0 < {y_cut} < {s2})")));
        }
        let zero = vec![0i64; value.len()];
        let rect = |y0: f64, y1: f64| vec![[0.0, y0], [s1, y0], [s1, y1], [0.0, y1]];
        Self::new(
            domain,
            sigma,
            vec![
                Cell { vertices: rect(0.0, y_cut), value: zero },
                Cell { vertices: rect(y_cut, s2), value },
            ],
        )
    }

    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn max_jump_norm(&self) -> f64 {
        self.segments.iter().map(|s| s.jump_norm()).fold(0.0, f64::max)
    }

    pub fn linf_norm(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.value.iter())
            .map(|&v| v.abs() as f64 * self.sigma)
            .fold(0.0, f64::max)
    }

    /// Integer value at a point: the first cell containing it wins, so points
    /// on shared edges resolve deterministically.
    pub fn value_at(&self, p: [f64; 2]) -> Option<&[i64]> {
        let p = self.domain.wrap_point(p);
        let scale = self.domain.side[0].max(self.domain.side[1]);
        let eps = INSIDE_EPS * scale;
        self.cells
            .iter()
            .find(|c| contains(&c.vertices, p, eps))
            .map(|c| c.value.as_slice())
    }

    /// Field value sigma * integer at a point.
    pub fn eval(&self, p: [f64; 2]) -> Result<Vec<f64>> {
        match self.value_at(p) {
            Some(v) => Ok(v.iter().map(|&k| k as f64 * self.sigma).collect()),
            None => Err(Error::UncoveredPoint { x: p[0], y: p[1] }),
        }
    }

    /// Cell-center sampling onto a grid; values land exactly in sigma * Z^N.
    pub fn rasterize(&self, dims: [usize; 2]) -> Result<GridField> {
        let mut gf = GridField::zeros(self.domain, dims, self.n_components)?;
        let [m1, m2] = dims;
        for i in 0..m1 {
            for j in 0..m2 {
                let p = gf.cell_center(i, j);
                let v = self
                    .value_at(p)
                    .ok_or(Error::UncoveredPoint { x: p[0], y: p[1] })?;
                let scaled: Vec<f64> = v.iter().map(|&k| k as f64 * self.sigma).collect();
                gf.set(i, j, &scaled);
            }
        }
        Ok(gf)
    }

    /// Total variation: sum over segments of length * |jump| * sigma.
    pub fn bv_measure(&self) -> BvMeasure {
        let per_segment: Vec<f64> = self
            .segments
            .iter()
            .map(|s| s.length() * s.jump_norm() * self.sigma)
            .collect();
        BvMeasure { total: per_segment.iter().sum(), per_segment }
    }

    /// Distance from a point to the jump set.
    pub fn distance_to_jump_set(&self, p: [f64; 2]) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance(p, &self.domain))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "PNPOLY v1")?;
        writeln!(
            f,
            "{} {:.17e} {:.17e}",
            self.domain.kind, self.domain.side[0], self.domain.side[1]
        )?;
        writeln!(f, "sigma {:.17e}", self.sigma)?;
        writeln!(f, "components {}", self.n_components)?;
        writeln!(f, "cells {}", self.cells.len())?;
        for cell in &self.cells {
            let vals: Vec<String> = cell.value.iter().map(|v| v.to_string()).collect();
            writeln!(f, "cell {} {}", cell.vertices.len(), vals.join(" "))?;
            for v in &cell.vertices {
                writeln!(f, "{:.17e} {:.17e}", v[0], v[1])?;
            }
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::parse(f)
    }

    pub fn parse<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            loop {
                match lines.next() {
                    Some(Ok(l)) if l.trim().is_empty() => continue,
                    Some(Ok(l)) => return Ok(l.trim().to_string()),
                    Some(Err(e)) => return Err(e.into()),
                    None => return Err(Error::BadFieldFile("unexpected end of file".into())),
                }
            }
        };
        if next()? != "PNPOLY v1" {
            return Err(Error::BadFieldFile("bad magic, expected PNPOLY v1".into()));
        }
        let dom = next()?;
        let parts: Vec<&str> = dom.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::BadFieldFile("domain line needs: kind side1 side2".into()));
        }
        let kind = match parts[0] {
            "torus" => DomainKind::Torus,
            "box" => DomainKind::Box,
            o => return Err(Error::BadFieldFile(format!("unknown domain kind {o}"))),
        };
        let s1: f64 = parts[1].parse().map_err(|_| Error::BadFieldFile("bad side1".into()))?;
        let s2: f64 = parts[2].parse().map_err(|_| Error::BadFieldFile("bad side2".into()))?;
        let sigma_line = next()?;
        let sigma: f64 = sigma_line
            .strip_prefix("sigma")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::BadFieldFile("expected 'sigma <value>'".into()))?;
        let comp_line = next()?;
        let n: usize = comp_line
            .strip_prefix("components")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::BadFieldFile("expected 'components <N>'".into()))?;
        let cells_line = next()?;
        let ncells: usize = cells_line
            .strip_prefix("cells")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::BadFieldFile("expected 'cells <count>'".into()))?;
        let mut cells = Vec::with_capacity(ncells);
        for _ in 0..ncells {
            let head = next()?;
            let toks: Vec<&str> = head.split_whitespace().collect();
            if toks.first() != Some(&"cell") || toks.len() != 2 + n {
                return Err(Error::BadFieldFile(format!(
                    "expected 'cell <nverts> <{n} integers>', got: {head}"
                )));
            }
            let nv: usize =
                toks[1].parse().map_err(|_| Error::BadFieldFile("bad vertex count".into()))?;
            let value: std::result::Result<Vec<i64>, _> =
                toks[2..].iter().map(|t| t.parse::<i64>()).collect();
            let value = value.map_err(|_| Error::BadFieldFile("bad cell value".into()))?;
            let mut vertices = Vec::with_capacity(nv);
            for _ in 0..nv {
                let line = next()?;
                let xy: Vec<&str> = line.split_whitespace().collect();
                if xy.len() != 2 {
                    return Err(Error::BadFieldFile(format!("bad vertex line: {line}")));
                }
                vertices.push([
                    xy[0].parse().map_err(|_| Error::BadFieldFile("bad x".into()))?,
                    xy[1].parse().map_err(|_| Error::BadFieldFile("bad y".into()))?,
                ]);
            }
            cells.push(Cell { vertices, value });
        }
        Self::new(DomainSpec { kind, side: [s1, s2] }, sigma, cells)
    }
}

fn signed_area(vertices: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for k in 0..vertices.len() {
        let p = vertices[k];
        let q = vertices[(k + 1) % vertices.len()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn contains(vertices: &[[f64; 2]], p: [f64; 2], eps: f64) -> bool {
    for k in 0..vertices.len() {
        let a = vertices[k];
        let b = vertices[(k + 1) % vertices.len()];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross < -eps {
            return false;
        }
    }
    true
}

/// Quantized edge key, seam-aware on the torus. Box cells may extend to
/// negative coordinates (enlarged coverage), so quantization stays signed.
fn edge_key(domain: &DomainSpec, a: [f64; 2], b: [f64; 2]) -> (i64, i64, i64, i64) {
    let q = |p: [f64; 2]| -> (i64, i64) {
        let w = domain.wrap_point(p);
        let scale = 2f64.powi(33);
        let mut qx = ((w[0] / domain.side[0]) * scale).round() as i64;
        let mut qy = ((w[1] / domain.side[1]) * scale).round() as i64;
        if domain.is_torus() {
            qx = qx.rem_euclid(1i64 << 33);
            qy = qy.rem_euclid(1i64 << 33);
        }
        (qx, qy)
    };
    let (ka, kb) = (q(a), q(b));
    if ka <= kb {
        (ka.0, ka.1, kb.0, kb.1)
    } else {
        (kb.0, kb.1, ka.0, ka.1)
    }
}

fn derive_segments(domain: &DomainSpec, cells: &[Cell]) -> Result<Vec<Segment>> {
    let mut edges: HashMap<(i64, i64, i64, i64), Vec<(usize, [f64; 2], [f64; 2])>> =
        HashMap::new();
    for (ci, cell) in cells.iter().enumerate() {
        let nv = cell.vertices.len();
        for k in 0..nv {
            let a = cell.vertices[k];
            let b = cell.vertices[(k + 1) % nv];
            edges.entry(edge_key(domain, a, b)).or_default().push((ci, a, b));
        }
    }
    let mut segments = Vec::new();
    let mut keys: Vec<_> = edges.keys().cloned().collect();
    keys.sort();
    for key in keys {
        let owners = &edges[&key];
        if owners.len() != 2 || owners[0].0 == owners[1].0 {
            continue; // boundary edge, or a degenerate self-match
        }
        let (ci, a, b) = owners[0];
        let cj = owners[1].0;
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        if len == 0.0 {
            continue;
        }
        // Outward normal of the counterclockwise cell ci along a -> b.
        let normal = [t[1] / len, -t[0] / len];
        let jump: Vec<i64> = cells[cj]
            .value
            .iter()
            .zip(cells[ci].value.iter())
            .map(|(p, m)| p - m)
            .collect();
        if jump.iter().all(|&v| v == 0) {
            continue;
        }
        segments.push(Segment { a, b, normal, jump });
    }
    Ok(segments)
}
