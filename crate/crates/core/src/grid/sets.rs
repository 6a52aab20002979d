use serde::{Deserialize, Serialize};

use super::{Cube, Grid, SampledFunction};
use crate::{Error, Result};

/// A closed axis-parallel rectangle `Π [lo_a, hi_a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Rect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
            return Err(Error::Config("rectangle bounds must have matching dimension 1 or 2".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::Config("rectangle needs finite bounds with lo < hi".into()));
        }
        Ok(Rect { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Rect::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    /// Euclidean distance from `x` to the rectangle (zero inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|a| {
                let d = (self.lo[a] - x[a]).max(x[a] - self.hi[a]).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Overlap measure with another rectangle.
    pub fn overlap(&self, lo: &[f64], hi: &[f64]) -> f64 {
        (0..self.dim()).map(|a| (self.hi[a].min(hi[a]) - self.lo[a].max(lo[a])).max(0.0)).product()
    }
}

/// A finite union of rectangles in dimension one or two.
///
/// Measures and distances are computed exactly by compressing the
/// coordinates into elementary cells, each of which is either inside or
/// outside the union.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    dim: usize,
    rects: Vec<Rect>,
}

struct Cells {
    edges: Vec<Vec<f64>>,
    covered: Vec<bool>,
}

impl Cells {
    fn shape(&self) -> (usize, usize) {
        let n0 = self.edges[0].len().saturating_sub(1);
        let n1 = if self.edges.len() > 1 { self.edges[1].len().saturating_sub(1) } else { 1 };
        (n0, n1)
    }

    fn bounds(&self, i: usize, j: usize) -> ([f64; 2], [f64; 2]) {
        let e = &self.edges;
        if e.len() == 1 {
            ([e[0][i], 0.0], [e[0][i + 1], 0.0])
        } else {
            ([e[0][i], e[1][j]], [e[0][i + 1], e[1][j + 1]])
        }
    }
}

impl BoxSet {
    pub fn empty(dim: usize) -> Self {
        BoxSet { dim, rects: Vec::new() }
    }

    pub fn new(dim: usize, rects: Vec<Rect>) -> Result<Self> {
        if rects.iter().any(|r| r.dim() != dim) {
            return Err(Error::Config("rectangles of mixed dimension".into()));
        }
        Ok(BoxSet { dim, rects })
    }

    pub fn from_cubes(dim: usize, cubes: &[Cube]) -> Result<Self> {
        BoxSet::new(dim, cubes.iter().map(Cube::as_rect).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.rects.iter().any(|r| r.contains(x))
    }

    fn cells(&self, extra: Option<(&[f64], &[f64])>) -> Cells {
        let mut edges = vec![Vec::new(); self.dim];
        for r in &self.rects {
            for a in 0..self.dim {
                edges[a].push(r.lo[a]);
                edges[a].push(r.hi[a]);
            }
        }
        if let Some((lo, hi)) = extra {
            for a in 0..self.dim {
                edges[a].push(lo[a]);
                edges[a].push(hi[a]);
            }
        }
        for e in edges.iter_mut() {
            e.sort_by(f64::total_cmp);
            e.dedup();
        }
        let mut cells = Cells { edges, covered: Vec::new() };
        let (n0, n1) = cells.shape();
        let mut covered = Vec::with_capacity(n0 * n1);
        for i in 0..n0 {
            for j in 0..n1 {
                let (lo, hi) = cells.bounds(i, j);
                let mid: Vec<f64> = (0..self.dim).map(|a| 0.5 * (lo[a] + hi[a])).collect();
                covered.push(self.contains(&mid));
            }
        }
        cells.covered = covered;
        cells
    }

    /// Lebesgue measure of the union.
    pub fn measure(&self) -> f64 {
        if self.rects.is_empty() {
            return 0.0;
        }
        let cells = self.cells(None);
        let (n0, n1) = cells.shape();
        let mut total = 0.0;
        for i in 0..n0 {
            for j in 0..n1 {
                if cells.covered[i * n1 + j] {
                    let (lo, hi) = cells.bounds(i, j);
                    total += (0..self.dim).map(|a| hi[a] - lo[a]).product::<f64>();
                }
            }
        }
        total
    }

    /// Measure of the intersection with the rectangle `[lo, hi]`.
    pub fn intersection_measure(&self, lo: &[f64], hi: &[f64]) -> f64 {
        if self.rects.is_empty() {
            return 0.0;
        }
        let cells = self.cells(Some((lo, hi)));
        let (n0, n1) = cells.shape();
        let mut total = 0.0;
        for i in 0..n0 {
            for j in 0..n1 {
                if cells.covered[i * n1 + j] {
                    let (clo, chi) = cells.bounds(i, j);
                    total += (0..self.dim).map(|a| (chi[a].min(hi[a]) - clo[a].max(lo[a])).max(0.0)).product::<f64>();
                }
            }
        }
        total
    }

    pub fn cube_measure(&self, q: &Cube) -> f64 {
        let hi: Vec<f64> = (0..q.dim()).map(|a| q.upper(a)).collect();
        self.intersection_measure(q.corner(), &hi)
    }

    /// Radius of the largest ball centred at `x` inside the union.
    ///
    /// Zero when `x` is outside. Distances to the complement are measured to
    /// every uncovered elementary cell and to the outside of the bounding box.
    pub fn inradius(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let cells = self.cells(None);
        let mut best = f64::INFINITY;
        for a in 0..self.dim {
            let e = &cells.edges[a];
            best = best.min(x[a] - e[0]).min(e[e.len() - 1] - x[a]);
        }
        let (n0, n1) = cells.shape();
        for i in 0..n0 {
            for j in 0..n1 {
                if !cells.covered[i * n1 + j] {
                    let (lo, hi) = cells.bounds(i, j);
                    let r = Rect { lo: lo[..self.dim].to_vec(), hi: hi[..self.dim].to_vec() };
                    best = best.min(r.distance(x));
                }
            }
        }
        best.max(0.0)
    }

    /// Cell-averaged indicator on a grid: each node gets the fraction of its
    /// cell `x + [-h/2, h/2]^n` covered by the union.
    pub fn cell_average(&self, grid: &Grid) -> Result<SampledFunction> {
        if grid.dim() != self.dim {
            return Err(Error::Config("set and grid differ in dimension".into()));
        }
        let half = 0.5 * grid.h();
        let vol = grid.cell_volume();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                let lo: Vec<f64> = (0..self.dim).map(|a| p[a] - half).collect();
                let hi: Vec<f64> = (0..self.dim).map(|a| p[a] + half).collect();
                if !self.rects.iter().any(|r| r.overlap(&lo, &hi) > 0.0) {
                    return 0.0;
                }
                (self.intersection_measure(&lo, &hi) / vol).clamp(0.0, 1.0)
            })
            .collect();
        SampledFunction::new(grid.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_measure_counts_overlaps_once() {
        let s = BoxSet::new(1, vec![Rect::interval(0.0, 2.0).unwrap(), Rect::interval(1.0, 3.0).unwrap()]).unwrap();
        assert!((s.measure() - 3.0).abs() < 1e-15);
        let s = BoxSet::new(
            2,
            vec![
                Rect::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(),
                Rect::new(vec![1.0, 1.0], vec![3.0, 3.0]).unwrap(),
            ],
        )
        .unwrap();
        assert!((s.measure() - 7.0).abs() < 1e-15);
        assert!((s.intersection_measure(&[0.0, 0.0], &[1.5, 1.5]) - 2.25).abs() < 1e-15);
    }

    #[test]
    fn inradius_of_an_interval() {
        let s = BoxSet::new(1, vec![Rect::interval(-1.0, 1.0).unwrap()]).unwrap();
        assert!((s.inradius(&[0.0]) - 1.0).abs() < 1e-15);
        assert!((s.inradius(&[0.75]) - 0.25).abs() < 1e-15);
        assert_eq!(s.inradius(&[2.0]), 0.0);
    }

    #[test]
    fn inradius_sees_holes() {
        let s = BoxSet::new(
            1,
            vec![Rect::interval(0.0, 1.0).unwrap(), Rect::interval(1.5, 4.0).unwrap()],
        )
        .unwrap();
        assert!((s.inradius(&[2.0]) - 0.5).abs() < 1e-15);
        let l = BoxSet::new(
            2,
            vec![
                Rect::new(vec![0.0, 0.0], vec![4.0, 1.0]).unwrap(),
                Rect::new(vec![0.0, 0.0], vec![1.0, 4.0]).unwrap(),
            ],
        )
        .unwrap();
        assert!((l.inradius(&[0.5, 0.5]) - 0.5).abs() < 1e-15);
        let r = l.inradius(&[0.9, 0.9]);
        assert!((r - 0.02f64.sqrt()).abs() < 1e-12, "{r}");
    }

    #[test]
    fn cell_average_is_fractional_at_edges() {
        let s = BoxSet::new(1, vec![Rect::interval(0.0, 1.0).unwrap()]).unwrap();
        let g = Grid::interval(-1.0, 2.0, 0.5).unwrap();
        let f = s.cell_average(&g).unwrap();
        assert_eq!(f.values(), &[0.0, 0.0, 0.5, 1.0, 0.5, 0.0, 0.0]);
    }
}
