use std::collections::VecDeque;

use rayon::prelude::*;

use super::smooth;
use crate::grid::{CubeFamily, Grid, SampledFunction, ScaleGrid};
use crate::kernels::Profile;
use crate::{Error, Result};

/// Cubes over which the Hardy–Littlewood maximal function is taken.
#[derive(Clone, Debug, PartialEq)]
pub enum MaximalFamily {
    Dyadic(CubeFamily),
    /// Every lattice-aligned cube of the given sides lying in the grid.
    Sliding { sides: Vec<f64> },
}

impl MaximalFamily {
    /// Sliding cubes of sides `h, 2h, 4h, …` up to the grid side.
    pub fn sliding_dyadic(grid: &Grid) -> Self {
        let mut sides = Vec::new();
        let mut k = 1usize;
        while k < grid.per_axis() {
            sides.push(k as f64 * grid.h());
            k *= 2;
        }
        MaximalFamily::Sliding { sides }
    }
}

/// Number of cells spanned by a length, if it is a positive multiple of `h`.
fn cells(len: f64, h: f64) -> Result<usize> {
    let r = len / h;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-9 * r {
        return Err(Error::Config(format!("cube side {len} is not a multiple of the spacing {h}")));
    }
    Ok(k as usize)
}

/// `sup_{Q ∋ x} ⨍_Q |f|`, averages by the trapezoid rule on each cube.
pub fn hl_maximal(f: &SampledFunction, family: &MaximalFamily) -> Result<SampledFunction> {
    let grid = f.grid();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let mut out = vec![0.0f64; grid.len()];
    match family {
        MaximalFamily::Sliding { sides } => {
            for &side in sides {
                let k = cells(side, grid.h())?;
                if k >= grid.per_axis() {
                    continue;
                }
                let means = window_means(&abs, grid, k);
                let m = spread_max(&means, grid, k);
                for (o, v) in out.iter_mut().zip(m) {
                    *o = o.max(v);
                }
            }
        }
        MaximalFamily::Dyadic(fam) => {
            if fam.root().dim() != grid.dim() {
                return Err(Error::Config("cube family and grid differ in dimension".into()));
            }
            let mut covered = vec![false; grid.len()];
            for q in fam.cubes() {
                let k = cells(q.side(), grid.h())?;
                let nodes = grid.nodes_in(&q);
                if nodes.is_empty() {
                    continue;
                }
                let lo = grid.multi_index(nodes[0]);
                let mut s = 0.0;
                for &i in &nodes {
                    let mi = grid.multi_index(i);
                    let mut w = 1.0;
                    for a in 0..grid.dim() {
                        if mi[a] == lo[a] || mi[a] == lo[a] + k {
                            w *= 0.5;
                        }
                    }
                    s += w * abs[i];
                }
                let avg = s / (k as f64).powi(grid.dim() as i32);
                for &i in &nodes {
                    out[i] = out[i].max(avg);
                    covered[i] = true;
                }
            }
            if covered.iter().any(|c| !c) {
                return Err(Error::Config("cube family does not cover the grid".into()));
            }
        }
    }
    SampledFunction::new(grid.clone(), out)
}

/// Trapezoid means over every window of `k` cells, indexed by the window's
/// lower corner; the result has `(P - k)^n` entries in row-major order.
fn window_means(v: &[f64], grid: &Grid, k: usize) -> Vec<f64> {
    let p = grid.per_axis();
    let l = p - k;
    let line = |xs: &[f64]| -> Vec<f64> {
        let mut pre = vec![0.0; xs.len() + 1];
        for (i, x) in xs.iter().enumerate() {
            pre[i + 1] = pre[i] + x;
        }
        (0..xs.len() - k).map(|i| (pre[i + k + 1] - pre[i] - 0.5 * (xs[i] + xs[i + k])) / k as f64).collect()
    };
    match grid.dim() {
        1 => line(v),
        _ => {
            // along axis 1 first, then along axis 0
            let rows: Vec<f64> = v.chunks(p).flat_map(line).collect();
            let mut out = vec![0.0; l * l];
            let mut col = vec![0.0; p];
            for j in 0..l {
                for i in 0..p {
                    col[i] = rows[i * l + j];
                }
                for (i, m) in line(&col).into_iter().enumerate() {
                    out[i * l + j] = m;
                }
            }
            out
        }
    }
}

/// `out[x] = max` of `a[s]` over windows `s ≤ x ≤ s + k`, per axis.
fn spread_max(a: &[f64], grid: &Grid, k: usize) -> Vec<f64> {
    let p = grid.per_axis();
    let l = p - k;
    let line = |xs: &[f64]| -> Vec<f64> { range_max(xs, p, |x| (x.saturating_sub(k), x.min(l - 1))) };
    match grid.dim() {
        1 => line(a),
        _ => {
            let rows: Vec<f64> = a.chunks(l).flat_map(line).collect();
            columnwise(&rows, l, p, line)
        }
    }
}

/// Applies a line operation producing `p` entries to each of the `p`
/// columns of a `rows × p` array.
fn columnwise(a: &[f64], rows: usize, p: usize, line: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; p * p];
    let mut col = vec![0.0; rows];
    for j in 0..p {
        for i in 0..rows {
            col[i] = a[i * p + j];
        }
        for (i, m) in line(&col).into_iter().enumerate() {
            out[i * p + j] = m;
        }
    }
    out
}

/// `out[x] = max a[lo(x)..=hi(x)]` for `x < len` with both bounds
/// nondecreasing in `x`.
fn range_max(a: &[f64], len: usize, bounds: impl Fn(usize) -> (usize, usize)) -> Vec<f64> {
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    let mut out = Vec::with_capacity(len);
    for x in 0..len {
        let (lo, hi) = bounds(x);
        while next <= hi && next < a.len() {
            while dq.back().is_some_and(|&b| a[b] <= a[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while dq.front().is_some_and(|&f| f < lo) {
            dq.pop_front();
        }
        out.push(dq.front().map_or(0.0, |&f| a[f]));
    }
    out
}

/// `M_φ f(x) = sup_t sup_{|x-y|<t} |φ_t ∗ f(y)|` over the scales of `scales`.
pub fn nt_maximal(phi: &Profile, f: &SampledFunction, scales: &ScaleGrid) -> Result<SampledFunction> {
    let grid = f.grid();
    let cones = scales
        .nodes()
        .par_iter()
        .map(|&t| {
            let u = smooth(phi, t, f)?;
            let abs: Vec<f64> = u.values().iter().map(|v| v.abs()).collect();
            Ok(cone_max(&abs, grid, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0f64; grid.len()];
    for c in cones {
        for (o, v) in out.iter_mut().zip(c) {
            *o = o.max(v);
        }
    }
    SampledFunction::new(grid.clone(), out)
}

/// Largest `d ≥ 0` with `d h < r`, or `None` when `r ≤ 0`.
fn below(r: f64, h: f64) -> Option<usize> {
    if r <= 0.0 {
        return None;
    }
    let d = (r / h * (1.0 - 1e-12)).ceil() - 1.0;
    Some(d.max(0.0) as usize)
}

/// Max over nodes at Euclidean distance `< t`.
fn cone_max(a: &[f64], grid: &Grid, t: f64) -> Vec<f64> {
    let p = grid.per_axis();
    let h = grid.h();
    let d = below(t, h).unwrap_or(0);
    let sym = |xs: &[f64], w: usize| range_max(xs, xs.len(), |x| (x.saturating_sub(w), x + w));
    match grid.dim() {
        1 => sym(a, d),
        _ => {
            let mut out = vec![0.0f64; p * p];
            for dy in 0..=d {
                let w = match below((t * t - (dy as f64 * h).powi(2)).max(0.0).sqrt(), h) {
                    Some(w) if (dy as f64 * h) < t => w,
                    _ => continue,
                };
                let rows: Vec<f64> = a.chunks(p).flat_map(|r| sym(r, w)).collect();
                for i in 0..p {
                    for off in [i.checked_sub(dy), Some(i + dy)].into_iter().flatten() {
                        if off >= p {
                            continue;
                        }
                        for j in 0..p {
                            let v = rows[off * p + j];
                            if v > out[i * p + j] {
                                out[i * p + j] = v;
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_on, Cube};

    #[test]
    fn constants_are_fixed() {
        let g = Grid::new(Cube::new(vec![0.0, 0.0], 4.0).unwrap(), 0.25).unwrap();
        let f = SampledFunction::constant(&g, -3.0);
        let m = hl_maximal(&f, &MaximalFamily::sliding_dyadic(&g)).unwrap();
        assert!(m.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
        let fam = CubeFamily::dyadic(g.cube().clone(), 0, 4).unwrap();
        let m = hl_maximal(&f, &MaximalFamily::Dyadic(fam)).unwrap();
        assert!(m.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
    }

    /// Brute force over all windows containing each node.
    #[test]
    fn sliding_matches_brute_force() {
        let g = Grid::interval(0.0, 2.0, 0.125).unwrap();
        let f = sample_on(&g, |x| (7.0 * x[0]).sin()).unwrap();
        let m = hl_maximal(&f, &MaximalFamily::Sliding { sides: vec![0.25, 0.5] }).unwrap();
        let p = g.per_axis();
        for x in 0..p {
            let mut best = 0.0f64;
            for k in [2usize, 4] {
                for s in 0..p - k {
                    if s <= x && x <= s + k {
                        let mut acc = 0.0;
                        for i in s..=s + k {
                            let w = if i == s || i == s + k { 0.5 } else { 1.0 };
                            acc += w * f.value(i).abs();
                        }
                        best = best.max(acc / k as f64);
                    }
                }
            }
            assert!((m.value(x) - best).abs() < 1e-13);
        }
    }

    #[test]
    fn ball_indicator_lower_bound() {
        let g = Grid::interval(-8.0, 8.0, 1.0 / 64.0).unwrap();
        let (x0, d) = (0.5, 0.75);
        let f = crate::grid::BoxSet::new(1, vec![crate::grid::Rect::interval(x0 - d, x0 + d).unwrap()])
            .unwrap()
            .cell_average(&g)
            .unwrap();
        let m = hl_maximal(&f, &MaximalFamily::sliding_dyadic(&g)).unwrap();
        for i in 0..g.len() {
            let x = g.point(i)[0];
            let bound = d / (d + (x - x0).abs());
            // dyadic window sides lose at most a factor two against the
            // optimal interval
            assert!(m.value(i) >= 0.5 * bound - 1e-12, "x = {x}");
            assert!(m.value(i) + 1e-12 >= f.value(i));
        }
    }

    #[test]
    fn nontangential_dominates_radial() {
        let g = Grid::new(Cube::new(vec![-4.0, -4.0], 8.0).unwrap(), 0.125).unwrap();
        let f = sample_on(&g, |x| (x[0] * 1.3).cos() * (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp()).unwrap();
        let phi = Profile::Bump { n: 2 };
        let scales = ScaleGrid::log_uniform(0.25, 2.0, 2).unwrap();
        let m = nt_maximal(&phi, &f, &scales).unwrap();
        for &t in scales.nodes() {
            let u = smooth(&phi, t, &f).unwrap();
            for i in 0..g.len() {
                assert!(m.value(i) >= u.value(i).abs());
            }
        }
        assert!(nt_maximal(&phi, &SampledFunction::zeros(&g), &scales).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn cone_max_brute_force() {
        let g = Grid::new(Cube::new(vec![0.0, 0.0], 2.0).unwrap(), 0.125).unwrap();
        let a: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64).collect();
        let t = 0.3;
        let out = cone_max(&a, &g, t);
        for x in 0..g.len() {
            let px = g.point(x);
            let mut best = 0.0f64;
            for y in 0..g.len() {
                let py = g.point(y);
                if ((px[0] - py[0]).powi(2) + (px[1] - py[1]).powi(2)).sqrt() < t {
                    best = best.max(a[y]);
                }
            }
            assert_eq!(out[x], best);
        }
    }
}
