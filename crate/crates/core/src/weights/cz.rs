use serde::{Deserialize, Serialize};

use crate::grid::{BoxSet, Cube};
use crate::{Error, Result};

/// Maximal dyadic subcubes of `root` (down to `max_depth`) on which the
/// density of `E` exceeds `λ`, in depth-first row-major order.
pub fn cz_decompose(set: &BoxSet, lambda: f64, root: &Cube, max_depth: u32) -> Result<Vec<Cube>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Parameter(format!("height {lambda} not in (0, 1)")));
    }
    if set.dim() != root.dim() {
        return Err(Error::Config("set and root cube differ in dimension".into()));
    }
    let mut out = Vec::new();
    if !set.is_empty() {
        descend(set, lambda, root, 0, max_depth, &mut out);
    }
    Ok(out)
}

fn descend(set: &BoxSet, lambda: f64, q: &Cube, depth: u32, max_depth: u32, out: &mut Vec<Cube>) {
    let inside = set.cube_measure(q);
    if inside <= 0.0 {
        return;
    }
    if inside > lambda * q.volume() {
        out.push(q.clone());
        return;
    }
    if depth < max_depth {
        for child in q.children() {
            descend(set, lambda, &child, depth + 1, max_depth, out);
        }
    }
}

/// Covering and measure bookkeeping for a selection of cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzCheck {
    pub set_measure: f64,
    pub covered: f64,
    pub cubes_measure: f64,
}

impl CzCheck {
    /// `E ⊂ ∪Q_j` up to a null set.
    pub fn covers(&self) -> bool {
        self.set_measure - self.covered <= 1e-12 * self.set_measure.max(1.0)
    }

    /// `Σ|Q_j| ≤ |E|/λ`.
    pub fn within(&self, lambda: f64) -> bool {
        self.cubes_measure <= self.set_measure / lambda * (1.0 + 1e-12)
    }
}

/// Measures of `E`, of `E ∩ ∪Q_j` and of `∪Q_j` for disjoint cubes.
pub fn cz_check(set: &BoxSet, cubes: &[Cube]) -> CzCheck {
    CzCheck {
        set_measure: set.measure(),
        covered: cubes.iter().map(|q| set.cube_measure(q)).sum(),
        cubes_measure: cubes.iter().map(Cube::volume).sum(),
    }
}
