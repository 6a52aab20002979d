use serde::{Deserialize, Serialize};

use super::Cube;
use crate::{Error, Result};

/// Dyadic descendants of a root cube between two depths.
///
/// Enumeration is depth by depth, and row-major within a depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeFamily {
    root: Cube,
    min_depth: u32,
    max_depth: u32,
}

impl CubeFamily {
    pub fn dyadic(root: Cube, min_depth: u32, max_depth: u32) -> Result<Self> {
        if min_depth > max_depth {
            return Err(Error::Config(format!("depth range {min_depth}..={max_depth} is empty")));
        }
        let count = (1u64 << (root.dim() as u32 * max_depth)) as f64;
        if count > 1e8 {
            return Err(Error::Capacity(format!("depth {max_depth} yields {count:e} cubes")));
        }
        Ok(CubeFamily { root, min_depth, max_depth })
    }

    pub fn root(&self) -> &Cube {
        &self.root
    }

    pub fn min_depth(&self) -> u32 {
        self.min_depth
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn depths(&self) -> std::ops::RangeInclusive<u32> {
        self.min_depth..=self.max_depth
    }

    pub fn side_at(&self, depth: u32) -> f64 {
        self.root.side() / (1u64 << depth) as f64
    }

    /// All cubes of one depth, row-major.
    pub fn cubes_at(&self, depth: u32) -> Vec<Cube> {
        let k = 1usize << depth;
        let side = self.side_at(depth);
        let c = self.root.corner();
        match self.root.dim() {
            1 => (0..k).map(|i| Cube::new(vec![c[0] + i as f64 * side], side).expect("dyadic cube")).collect(),
            _ => {
                let mut v = Vec::with_capacity(k * k);
                for i in 0..k {
                    for j in 0..k {
                        v.push(Cube::new(vec![c[0] + i as f64 * side, c[1] + j as f64 * side], side).expect("dyadic cube"));
                    }
                }
                v
            }
        }
    }

    pub fn cubes(&self) -> Vec<Cube> {
        self.depths().flat_map(|d| self.cubes_at(d)).collect()
    }

    pub fn len(&self) -> usize {
        self.depths().map(|d| 1usize << (self.root.dim() as u32 * d)).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn describe(&self) -> String {
        let c: Vec<String> = self.root.corner().iter().map(|v| format!("{v}")).collect();
        format!(
            "dyadic cubes of [{}] + [0, {}]^{}, depths {}..={}",
            c.join(", "),
            self.root.side(),
            self.root.dim(),
            self.min_depth,
            self.max_depth
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_nested_and_complete() {
        let f = CubeFamily::dyadic(Cube::interval(-8.0, 8.0).unwrap(), 0, 3).unwrap();
        let all = f.cubes();
        assert_eq!(all.len(), 15);
        assert_eq!(all.len(), f.len());
        assert_eq!(all[0], Cube::interval(-8.0, 8.0).unwrap());
        let level3 = f.cubes_at(3);
        assert_eq!(level3[0], Cube::interval(-8.0, -6.0).unwrap());
        for q in &level3 {
            assert!(f.cubes_at(2).iter().filter(|p| p.contains_cube(q)).count() == 1);
        }
        let f2 = CubeFamily::dyadic(Cube::new(vec![0.0, 0.0], 1.0).unwrap(), 2, 2).unwrap();
        assert_eq!(f2.cubes().len(), 16);
    }
}
