use serde::{Deserialize, Serialize};

use super::SampledFunction;
use crate::{Error, Result};

/// The measure `dτ(t)` a [`ScaleGrid`] integrates against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMeasure {
    /// `dt/t`, integrated by the midpoint rule in `log t`.
    LogUniform,
    /// Unit point masses at `t = 2^{-k}`.
    Dyadic,
}

/// Geometric scale nodes over `[t_min, t_max]` with quadrature weights.
///
/// In the log-uniform kind the range is cut into `K = ceil(J·log2(t_max/t_min))`
/// equal cells in `log t` and each node sits at the log-midpoint of its cell,
/// so a node carries weight `ln(t_max/t_min)/K`, which is `ln 2 / J` whenever
/// the range spans a whole number of `1/J` octaves. Partial ranges integrate
/// with fractional cell weights, so constants integrate exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleGrid {
    t_min: f64,
    t_max: f64,
    per_octave: usize,
    measure: ScaleMeasure,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ScaleGrid {
    pub fn log_uniform(t_min: f64, t_max: f64, per_octave: usize) -> Result<Self> {
        check_range(t_min, t_max)?;
        if per_octave == 0 {
            return Err(Error::Config("scales per octave must be positive".into()));
        }
        let octaves = (t_max / t_min).log2();
        let cells = ((octaves * per_octave as f64) - 1e-9).ceil().max(1.0) as usize;
        let delta = (t_max / t_min).ln() / cells as f64;
        let nodes = (0..cells).map(|j| t_min * ((j as f64 + 0.5) * delta).exp()).collect();
        Ok(ScaleGrid {
            t_min,
            t_max,
            per_octave,
            measure: ScaleMeasure::LogUniform,
            nodes,
            weights: vec![delta; cells],
        })
    }

    /// Nodes `2^{-k}` (any integer `k`) lying in `[t_min, t_max]`, unit masses.
    pub fn dyadic(t_min: f64, t_max: f64) -> Result<Self> {
        check_range(t_min, t_max)?;
        let lo = (t_min.log2() - 1e-9).ceil() as i32;
        let hi = (t_max.log2() + 1e-9).floor() as i32;
        if lo > hi {
            return Err(Error::Config(format!("no dyadic scale in [{t_min}, {t_max}]")));
        }
        let nodes: Vec<f64> = (lo..=hi).map(|e| 2f64.powi(e)).collect();
        let weights = vec![1.0; nodes.len()];
        Ok(ScaleGrid { t_min, t_max, per_octave: 1, measure: ScaleMeasure::Dyadic, nodes, weights })
    }

    pub fn new(t_min: f64, t_max: f64, per_octave: usize, measure: ScaleMeasure) -> Result<Self> {
        match measure {
            ScaleMeasure::LogUniform => ScaleGrid::log_uniform(t_min, t_max, per_octave),
            ScaleMeasure::Dyadic => ScaleGrid::dyadic(t_min, t_max),
        }
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn per_octave(&self) -> usize {
        self.per_octave
    }

    pub fn measure(&self) -> ScaleMeasure {
        self.measure
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature weights for `∫_{lo}^{hi} · dτ(t)` restricted to this grid.
    ///
    /// Log-uniform cells are clipped to `[lo, hi]`; dyadic masses count when
    /// `lo < t ≤ hi`.
    pub fn weights_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self.measure {
            ScaleMeasure::LogUniform => {
                let (llo, lhi) = (lo.max(self.t_min).ln(), hi.min(self.t_max).ln());
                let delta = self.weights[0];
                let base = self.t_min.ln();
                (0..self.nodes.len())
                    .map(|j| {
                        let a = base + j as f64 * delta;
                        let b = a + delta;
                        (b.min(lhi) - a.max(llo)).max(0.0)
                    })
                    .collect()
            }
            ScaleMeasure::Dyadic => {
                let slack = 1e-12;
                self.nodes
                    .iter()
                    .map(|&t| if t > lo * (1.0 + slack) && t <= hi * (1.0 + slack) { 1.0 } else { 0.0 })
                    .collect()
            }
        }
    }

    pub fn weights_upto(&self, hi: f64) -> Vec<f64> {
        self.weights_between(0.0, hi)
    }

    /// `∫ values dτ` over the whole grid, summed in node order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        scale_integrate(values, self)
    }

    pub fn integrate_between(&self, values: &[f64], lo: f64, hi: f64) -> f64 {
        assert_eq!(values.len(), self.nodes.len(), "one value per scale node");
        self.weights_between(lo, hi).iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_upto(&self, values: &[f64], hi: f64) -> f64 {
        self.integrate_between(values, 0.0, hi)
    }

    /// The sub-grid of nodes with `lo ≤ t ≤ hi`, keeping their weights.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<ScaleGrid> {
        let keep: Vec<usize> = (0..self.nodes.len()).filter(|&j| self.nodes[j] >= lo && self.nodes[j] <= hi).collect();
        if keep.is_empty() {
            return Err(Error::Config(format!("no scale node in [{lo}, {hi}]")));
        }
        Ok(ScaleGrid {
            t_min: self.t_min,
            t_max: self.t_max,
            per_octave: self.per_octave,
            measure: self.measure,
            nodes: keep.iter().map(|&j| self.nodes[j]).collect(),
            weights: keep.iter().map(|&j| self.weights[j]).collect(),
        })
    }
}

fn check_range(t_min: f64, t_max: f64) -> Result<()> {
    if !(t_min > 0.0 && t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(Error::Config(format!("invalid scale range [{t_min}, {t_max}]")));
    }
    Ok(())
}

/// `Σ_j w_j v_j` in node order.
pub fn scale_integrate(values: &[f64], grid: &ScaleGrid) -> f64 {
    assert_eq!(values.len(), grid.len(), "one value per scale node");
    grid.weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// One field per scale node, all on the same spatial grid.
#[derive(Clone, Debug)]
pub struct ScaleField {
    scales: ScaleGrid,
    fields: Vec<SampledFunction>,
}

impl ScaleField {
    pub fn new(scales: ScaleGrid, fields: Vec<SampledFunction>) -> Result<Self> {
        if fields.len() != scales.len() {
            return Err(Error::Config(format!("{} fields for {} scales", fields.len(), scales.len())));
        }
        if let Some(first) = fields.first() {
            if fields.iter().any(|f| f.grid() != first.grid()) {
                return Err(Error::Config("scale field mixes spatial grids".into()));
            }
        }
        Ok(ScaleField { scales, fields })
    }

    pub fn scales(&self) -> &ScaleGrid {
        &self.scales
    }

    pub fn fields(&self) -> &[SampledFunction] {
        &self.fields
    }

    pub fn field(&self, j: usize) -> &SampledFunction {
        &self.fields[j]
    }

    /// Values of every scale at one spatial node.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f.value(idx)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrates_to_log_ratio() {
        for j in [1, 7, 16, 64] {
            let g = ScaleGrid::log_uniform(1.0, 16.0, j).unwrap();
            let v = g.integrate(&vec![1.0; g.len()]);
            assert!((v - 4.0 * std::f64::consts::LN_2).abs() < 1e-12, "J={j}: {v}");
            assert!((g.weights()[0] - std::f64::consts::LN_2 / j as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_values() {
        let g = ScaleGrid::log_uniform(0.5, 3.0, 16).unwrap();
        assert_eq!(g.integrate(&vec![0.0; g.len()]), 0.0);
    }

    #[test]
    fn identity_integrand_gives_length() {
        let g = ScaleGrid::log_uniform(1.0, 2.0, 64).unwrap();
        let v = g.integrate(g.nodes());
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn partial_ranges_are_exact_for_constants() {
        let g = ScaleGrid::log_uniform(1.0 / 64.0, 8.0, 16).unwrap();
        let ones = vec![1.0; g.len()];
        for hi in [0.03, 0.25, 1.0, 3.3] {
            let v = g.integrate_upto(&ones, hi);
            assert!((v - (hi * 64.0f64).ln()).abs() < 1e-12);
        }
        let v = g.integrate_between(&ones, 0.1, 0.7);
        assert!((v - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dyadic_nodes_and_masses() {
        let g = ScaleGrid::dyadic(1.0 / 8.0, 2.0).unwrap();
        assert_eq!(g.nodes(), &[0.125, 0.25, 0.5, 1.0, 2.0]);
        assert_eq!(g.integrate(&[1.0; 5]), 5.0);
        assert_eq!(g.integrate_upto(&[1.0; 5], 0.5), 3.0);
        assert_eq!(g.integrate_between(&[1.0; 5], 0.25, 1.0), 2.0);
    }

    #[test]
    fn invalid_ranges() {
        assert!(ScaleGrid::log_uniform(1.0, 1.0, 4).is_err());
        assert!(ScaleGrid::log_uniform(0.0, 1.0, 4).is_err());
        assert!(ScaleGrid::log_uniform(1.0, 2.0, 0).is_err());
    }
}
