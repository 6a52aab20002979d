//! Cubes, uniformly sampled fields, scale grids and the convolution engine.
//!
//! Every field lives on a [`Grid`]: a cube in dimension one or two sampled
//! with a uniform spacing that divides the side exactly. Node layout is
//! row-major with the first coordinate varying slowest. Integrals in space
//! use the trapezoid rule; integrals in scale use the midpoint rule in
//! `log t` (see [`ScaleGrid`]).

mod convolve;
mod family;
mod scale;
mod sets;

pub use convolve::{convolve, Method};
pub use family::CubeFamily;
pub use scale::{scale_integrate, ScaleField, ScaleGrid, ScaleMeasure};
pub use sets::{BoxSet, Rect};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative slack used when matching spacings and lattice offsets.
const LATTICE_EPS: f64 = 1e-9;

/// An axis-parallel cube `corner + [0, side]^n`, `n ∈ {1, 2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    corner: Vec<f64>,
    side: f64,
}

impl Cube {
    pub fn new(corner: Vec<f64>, side: f64) -> Result<Self> {
        if corner.is_empty() || corner.len() > 2 {
            return Err(Error::Config(format!("dimension {} not in {{1, 2}}", corner.len())));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::Config(format!("cube side must be positive, got {side}")));
        }
        if corner.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("cube corner must be finite".into()));
        }
        Ok(Cube { corner, side })
    }

    /// The interval `[a, b]`.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Cube::new(vec![a], b - a)
    }

    /// The cube of the given side centred at `center`.
    pub fn centered(center: &[f64], side: f64) -> Result<Self> {
        Cube::new(center.iter().map(|c| c - 0.5 * side).collect(), side)
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn corner(&self) -> &[f64] {
        &self.corner
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    pub fn center(&self) -> Vec<f64> {
        self.corner.iter().map(|c| c + 0.5 * self.side).collect()
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.corner[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.corner[axis] + self.side
    }

    /// Closed containment.
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| x[a] >= self.lower(a) && x[a] <= self.upper(a))
    }

    /// Half-open containment `[lower, upper)` per axis.
    pub fn contains_half_open(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| x[a] >= self.lower(a) && x[a] < self.upper(a))
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        let tol = 1e-12 * self.side.max(other.side);
        (0..self.dim())
            .all(|a| other.lower(a) >= self.lower(a) - tol && other.upper(a) <= self.upper(a) + tol)
    }

    /// Concentric dilate by `factor` (so `dilate(2.0)` is the double `2Q`).
    pub fn dilate(&self, factor: f64) -> Cube {
        let c = self.center();
        Cube::centered(&c, self.side * factor).expect("dilation of a valid cube")
    }

    /// The `2^n` dyadic children, in row-major order.
    pub fn children(&self) -> Vec<Cube> {
        let half = 0.5 * self.side;
        match self.dim() {
            1 => vec![
                Cube { corner: vec![self.corner[0]], side: half },
                Cube { corner: vec![self.corner[0] + half], side: half },
            ],
            _ => {
                let mut out = Vec::with_capacity(4);
                for i in 0..2 {
                    for j in 0..2 {
                        out.push(Cube {
                            corner: vec![self.corner[0] + i as f64 * half, self.corner[1] + j as f64 * half],
                            side: half,
                        });
                    }
                }
                out
            }
        }
    }

    pub fn as_rect(&self) -> Rect {
        Rect::new(
            self.corner.clone(),
            self.corner.iter().map(|c| c + self.side).collect(),
        )
        .expect("cube is a valid rectangle")
    }
}

/// A uniform lattice over a cube.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    cube: Cube,
    h: f64,
    per_axis: usize,
}

impl Grid {
    /// Fails with a configuration error unless `h` divides the side.
    pub fn new(cube: Cube, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("spacing must be positive, got {h}")));
        }
        let ratio = cube.side / h;
        let cells = ratio.round();
        if cells < 1.0 || (ratio - cells).abs() > LATTICE_EPS * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "spacing {h} does not divide side {}",
                cube.side
            )));
        }
        Ok(Grid { cube, h, per_axis: cells as usize + 1 })
    }

    /// Convenience constructor for `[a, b]` with spacing `h`.
    pub fn interval(a: f64, b: f64, h: f64) -> Result<Self> {
        Grid::new(Cube::interval(a, b)?, h)
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.cube.corner[axis] + i as f64 * self.h
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx / self.per_axis, idx % self.per_axis],
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        match self.dim() {
            1 => mi[0],
            _ => mi[0] * self.per_axis + mi[1],
        }
    }

    /// Coordinates of a node; the second entry is zero in dimension one.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let mi = self.multi_index(idx);
        match self.dim() {
            1 => [self.coord(0, mi[0]), 0.0],
            _ => [self.coord(0, mi[0]), self.coord(1, mi[1])],
        }
    }

    /// Index of the node nearest to `x`, if `x` lies in the cube.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        if !self.cube.contains(x) {
            return None;
        }
        let mut mi = [0usize; 2];
        for a in 0..self.dim() {
            let r = ((x[a] - self.cube.corner[a]) / self.h).round();
            mi[a] = (r.max(0.0) as usize).min(self.per_axis - 1);
        }
        Some(self.flat_index(mi))
    }

    /// Index of the node exactly at `x` (up to lattice slack).
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let idx = self.nearest(x)?;
        let p = self.point(idx);
        let ok = (0..self.dim()).all(|a| (p[a] - x[a]).abs() <= LATTICE_EPS * self.h.max(1.0));
        ok.then_some(idx)
    }

    /// Trapezoid weight of a node, including the factor `h^n`.
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        let mi = self.multi_index(idx);
        let edge = |i: usize| if i == 0 || i + 1 == self.per_axis { 0.5 } else { 1.0 };
        let mut w = self.cell_volume();
        for &i in mi.iter().take(self.dim()) {
            w *= edge(i);
        }
        w
    }

    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.dim() == other.dim() && (self.h - other.h).abs() <= 1e-12 * self.h
    }

    /// Distance from node `idx` to the boundary of the cube.
    pub fn boundary_distance(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        (0..self.dim())
            .map(|a| (p[a] - self.cube.lower(a)).min(self.cube.upper(a) - p[a]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Nodes lying in `cube` (closed), as flat indices in row-major order.
    pub fn nodes_in(&self, cube: &Cube) -> Vec<usize> {
        let ranges: Vec<(usize, usize)> = (0..self.dim())
            .map(|a| {
                let lo = ((cube.lower(a) - self.cube.lower(a)) / self.h - LATTICE_EPS).ceil().max(0.0) as usize;
                let hi_f = ((cube.upper(a) - self.cube.lower(a)) / self.h + LATTICE_EPS).floor();
                let hi = if hi_f < 0.0 { 0 } else { (hi_f as usize).min(self.per_axis - 1) };
                (lo, hi)
            })
            .collect();
        if ranges.iter().any(|&(lo, hi)| lo > hi || hi_outside(lo, hi, self.per_axis)) {
            return Vec::new();
        }
        match self.dim() {
            1 => (ranges[0].0..=ranges[0].1).collect(),
            _ => {
                let mut v = Vec::new();
                for i in ranges[0].0..=ranges[0].1 {
                    for j in ranges[1].0..=ranges[1].1 {
                        v.push(self.flat_index([i, j]));
                    }
                }
                v
            }
        }
    }
}

fn hi_outside(lo: usize, _hi: usize, per_axis: usize) -> bool {
    lo >= per_axis
}

/// Node selection used to restrict reductions to a trustworthy interior.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    keep: Vec<bool>,
}

impl Mask {
    pub fn all(len: usize) -> Self {
        Mask { keep: vec![true; len] }
    }

    pub fn from_vec(keep: Vec<bool>) -> Self {
        Mask { keep }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn get(&self, idx: usize) -> bool {
        self.keep[idx]
    }

    pub fn count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i))
    }

    pub fn intersect(&self, other: &Mask) -> Mask {
        Mask { keep: self.keep.iter().zip(&other.keep).map(|(a, b)| *a && *b).collect() }
    }
}

/// Nodes at distance at least `radius` from the boundary of the grid's cube.
pub fn guard_band(grid: &Grid, radius: f64) -> Result<Mask> {
    if !(radius >= 0.0) {
        return Err(Error::Parameter(format!("guard radius must be non-negative, got {radius}")));
    }
    let slack = 1e-12 * grid.cube().side();
    let mask = Mask::from_vec((0..grid.len()).map(|i| grid.boundary_distance(i) >= radius - slack).collect());
    if mask.count() == 0 {
        return Err(Error::DegenerateDomain(format!(
            "guard radius {radius} leaves no interior nodes in a cube of side {}",
            grid.cube().side()
        )));
    }
    Ok(mask)
}

/// A real field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Kernel(format!("non-finite sample at node {i}")));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        SampledFunction { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        SampledFunction { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Value at the node located at `x`, if any.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        self.grid.node_at(x).map(|i| self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SampledFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &SampledFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Config("fields live on different grids".into()));
        }
        Ok(SampledFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Trapezoid integral over the grid.
    pub fn integrate(&self) -> f64 {
        integrate(self)
    }

    /// Trapezoid integral restricted to masked nodes.
    pub fn integrate_masked(&self, mask: &Mask) -> f64 {
        mask.indices().map(|i| self.grid.trapezoid_weight(i) * self.values[i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_masked(&self, mask: &Mask) -> f64 {
        mask.indices().fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    /// `(∫ |f|^p)^{1/p}` over masked nodes.
    pub fn lp_norm_masked(&self, p: f64, mask: &Mask) -> f64 {
        let s: f64 = mask
            .indices()
            .map(|i| self.grid.trapezoid_weight(i) * self.values[i].abs().powf(p))
            .sum();
        s.powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm_masked(2.0, &Mask::all(self.values.len()))
    }

    /// Trapezoid Fourier transform `Σ w_j f_j e^{-i ξ·x_j}`.
    pub fn transform_at(&self, xi: &[f64]) -> Complex64 {
        let n = self.grid.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let p = self.grid.point(i);
            let phase: f64 = (0..n).map(|a| xi[a] * p[a]).sum();
            acc += Complex64::from_polar(self.grid.trapezoid_weight(i) * v, -phase);
        }
        acc
    }

    /// Restriction to a sub-cube lying on the same lattice.
    pub fn restrict(&self, cube: &Cube) -> Result<SampledFunction> {
        let sub = Grid::new(cube.clone(), self.grid.h)?;
        let mut values = Vec::with_capacity(sub.len());
        for i in 0..sub.len() {
            let p = sub.point(i);
            let idx = self
                .grid
                .node_at(&p[..sub.dim()])
                .ok_or_else(|| Error::Config("sub-cube is not aligned with the lattice".into()))?;
            values.push(self.values[idx]);
        }
        Ok(SampledFunction { grid: sub, values })
    }
}

/// Samples a pointwise rule at every node of `cube` with spacing `h`.
pub fn sample(cube: &Cube, h: f64, rule: impl Fn(&[f64]) -> f64) -> Result<SampledFunction> {
    let grid = Grid::new(cube.clone(), h)?;
    sample_on(&grid, rule)
}

/// Samples a pointwise rule on an existing grid.
pub fn sample_on(grid: &Grid, rule: impl Fn(&[f64]) -> f64) -> Result<SampledFunction> {
    let n = grid.dim();
    let values = (0..grid.len()).map(|i| rule(&grid.point(i)[..n])).collect();
    SampledFunction::new(grid.clone(), values)
}

/// Trapezoid-rule integral `Σ weights · values`, weights including `h^n`.
pub fn integrate(f: &SampledFunction) -> f64 {
    f.values.iter().enumerate().map(|(i, v)| f.grid.trapezoid_weight(i) * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_zero_rule() {
        let f = sample(&Cube::interval(0.0, 1.0).unwrap(), 0.25, |_| 0.0).unwrap();
        assert_eq!(f.values().len(), 5);
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_indicator_is_exact_on_nodes() {
        let f = sample(&Cube::interval(-2.0, 2.0).unwrap(), 0.25, |x| {
            if x[0] > 0.0 && x[0] < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        for i in 0..f.grid().len() {
            let x = f.grid().point(i)[0];
            let expect = if x > 0.0 && x < 1.0 { 1.0 } else { 0.0 };
            assert_eq!(f.value(i), expect);
        }
    }

    #[test]
    fn non_divisible_spacing_is_a_configuration_error() {
        let err = sample(&Cube::interval(0.0, 1.0).unwrap(), 0.3, |_| 0.0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn trapezoid_examples() {
        let c = Cube::interval(0.0, 1.0).unwrap();
        assert!((integrate(&sample(&c, 0.125, |_| 1.0).unwrap()) - 1.0).abs() < 1e-15);
        assert_eq!(integrate(&sample(&c, 0.125, |_| 0.0).unwrap()), 0.0);
        let lin = sample(&c, 1.0 / 1024.0, |x| x[0]).unwrap();
        assert!((integrate(&lin) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_in_two_dimensions() {
        let c = Cube::new(vec![0.0, 0.0], 1.0).unwrap();
        let f = sample(&c, 1.0 / 64.0, |x| x[0] + 2.0 * x[1]).unwrap();
        assert!((integrate(&f) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn guard_band_examples() {
        let g = Grid::interval(-2.0, 2.0, 0.25).unwrap();
        assert_eq!(guard_band(&g, 0.0).unwrap().count(), g.len());
        let m = guard_band(&g, 1.0).unwrap();
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert_eq!(m.get(i), (-1.0..=1.0).contains(&x), "node {x}");
        }
        let err = guard_band(&g, 2.0 + 0.25).unwrap_err();
        assert!(matches!(err, Error::DegenerateDomain(_)));
    }

    #[test]
    fn children_tile_the_parent() {
        let q = Cube::new(vec![-1.0, 0.0], 2.0).unwrap();
        let kids = q.children();
        assert_eq!(kids.len(), 4);
        let vol: f64 = kids.iter().map(Cube::volume).sum();
        assert_eq!(vol, q.volume());
        assert!(kids.iter().all(|k| q.contains_cube(k)));
    }

    #[test]
    fn nodes_in_subcube() {
        let g = Grid::interval(-2.0, 2.0, 0.5).unwrap();
        let q = Cube::interval(-1.0, 0.0).unwrap();
        let idx = g.nodes_in(&q);
        let xs: Vec<f64> = idx.iter().map(|&i| g.point(i)[0]).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0]);
    }

    #[test]
    fn transform_of_gaussian() {
        let f = sample(&Cube::interval(-12.0, 12.0).unwrap(), 1.0 / 32.0, |x| (-0.5 * x[0] * x[0]).exp()).unwrap();
        let v = f.transform_at(&[1.5]);
        let exact = (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * 1.5f64 * 1.5).exp();
        assert!((v.re - exact).abs() < 1e-12 && v.im.abs() < 1e-12);
    }
}
