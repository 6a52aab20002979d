use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{BoxSet, Cube, Grid, Rect, SampledFunction};
use crate::quad;
use crate::{Error, Result};

/// Generator for one named stream of a run.
pub fn scenario_rng(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a of the name, so streams do not depend on execution order
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn spectral_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// A real function on the line whose transform vanishes outside
/// `lo ≤ |ξ| ≤ hi`.
///
/// The spectrum is a sum of `pieces` smooth compactly supported bumps with
/// random complex amplitudes and centres, so the cut-off is exact and the
/// function decays faster than any power.
pub fn band_limited(grid: &Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64, pieces: usize) -> Result<SampledFunction> {
    if grid.dim() != 1 {
        return Err(Error::Config("band-limited fixtures are one-dimensional".into()));
    }
    if !(lo >= 0.0 && hi > lo && pieces > 0) {
        return Err(Error::Parameter(format!("invalid band [{lo}, {hi}]")));
    }
    let delta = (0.25 * (hi - lo)).min(0.5);
    let mut comps = Vec::with_capacity(pieces);
    for _ in 0..pieces {
        let xi = rng.random_range(lo + delta..=hi - delta);
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        comps.push((xi, a, b));
    }
    let (nodes, weights) = quad::gauss_legendre(64);
    // W(x) = ∫_{-δ}^{δ} B(η/δ) cos(ηx) dη
    let window = |x: f64| -> f64 {
        nodes
            .iter()
            .zip(&weights)
            .map(|(u, w)| w * delta * spectral_bump(*u) * (delta * u * x).cos())
            .sum()
    };
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.coord(0, i);
            let carrier: f64 = comps.iter().map(|(xi, a, b)| a * (xi * x).cos() - b * (xi * x).sin()).sum();
            carrier * window(x)
        })
        .collect();
    SampledFunction::new(grid.clone(), values)
}

/// A union of up to `max_rects` random boxes inside `root`, with corners on
/// a lattice of `1/grain` of the root side.
pub fn random_box_set(rng: &mut ChaCha8Rng, root: &Cube, max_rects: usize, grain: u32) -> Result<BoxSet> {
    let n = root.dim();
    let count = rng.random_range(1..=max_rects.max(1));
    let step = root.side() / grain as f64;
    let mut rects = Vec::with_capacity(count);
    for _ in 0..count {
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for a in 0..n {
            let i = rng.random_range(0..grain);
            let j = rng.random_range(i + 1..=grain);
            lo.push(root.lower(a) + i as f64 * step);
            hi.push(root.lower(a) + j as f64 * step);
        }
        rects.push(Rect::new(lo, hi)?);
    }
    BoxSet::new(n, rects)
}
