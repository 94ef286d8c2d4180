//! Field representations: sampled grid fields, piecewise-constant polyhedral
//! fields with polygonal partitions, mollifiers, and replicated-shift
//! averages.

mod grid;
mod mollify;
mod poly;
mod shift;

pub use grid::{grid_total_variation, h12_seminorm_sq, GridField};
pub use mollify::{mollify, Mollifier};
pub use poly::{BvMeasure, Cell, PolyhedralField, Segment};
pub use shift::{average_shift_limit, replicate_shift, InfinityAverage, ShiftedAverage};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Torus,
    Box,
}

/// Rectangular computational domain, periodic or not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub side: [f64; 2],
}

impl DomainSpec {
    pub fn torus(s1: f64, s2: f64) -> Result<Self> {
        Self::new(DomainKind::Torus, s1, s2)
    }

    pub fn rect(s1: f64, s2: f64) -> Result<Self> {
        Self::new(DomainKind::Box, s1, s2)
    }

    fn new(kind: DomainKind, s1: f64, s2: f64) -> Result<Self> {
        if !(s1 > 0.0 && s2 > 0.0) {
            return Err(Error::DomainMismatch(format!(
                "side lengths must be positive, got {s1} x {s2}"
            )));
        }
        Ok(DomainSpec { kind, side: [s1, s2] })
    }

    pub fn is_torus(&self) -> bool {
        self.kind == DomainKind::Torus
    }

    pub fn area(&self) -> f64 {
        self.side[0] * self.side[1]
    }

    /// Minimal-image separation on the torus; the plain difference on a box.
    #[inline]
    pub fn wrap_delta(&self, mut d: [f64; 2]) -> [f64; 2] {
        if self.is_torus() {
            for a in 0..2 {
                let s = self.side[a];
                d[a] -= (d[a] / s).round() * s;
            }
        }
        d
    }

    /// Map a point into [0, side) per axis on the torus; identity on a box.
    #[inline]
    pub fn wrap_point(&self, mut p: [f64; 2]) -> [f64; 2] {
        if self.is_torus() {
            for a in 0..2 {
                p[a] = p[a].rem_euclid(self.side[a]);
            }
        }
        p
    }
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainKind::Torus => write!(f, "torus"),
            DomainKind::Box => write!(f, "box"),
        }
    }
}
