use rayon::prelude::*;

use super::{smooth, ThetaOperator};
use crate::grid::{Mask, SampledFunction, ScaleField, ScaleGrid};
use crate::kernels::Profile;
use crate::Result;

/// `S(f⃗)(x) = (∫ |Θ_t f⃗(x)|² dτ(t))^{1/2}` together with the per-scale field.
#[derive(Clone, Debug)]
pub struct SquareFunctionResult {
    pub field: ScaleField,
    pub values: SampledFunction,
    pub guard: Mask,
}

impl SquareFunctionResult {
    pub fn scales(&self) -> &ScaleGrid {
        self.field.scales()
    }

    /// `‖S‖_{L^p}` over the guard mask.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.values.lp_norm_masked(p, &self.guard)
    }
}

fn aggregate(fields: Vec<SampledFunction>, scales: &ScaleGrid) -> Result<(ScaleField, SampledFunction)> {
    let grid = fields[0].grid().clone();
    let w = scales.weights();
    let mut acc = vec![0.0; grid.len()];
    // fixed scale order keeps the reduction deterministic
    for (f, wj) in fields.iter().zip(w) {
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += wj * v * v;
        }
    }
    let values = SampledFunction::new(grid, acc.into_iter().map(f64::sqrt).collect())?;
    Ok((ScaleField::new(scales.clone(), fields)?, values))
}

pub fn square_function(op: &ThetaOperator, fs: &[&SampledFunction], scales: &ScaleGrid) -> Result<SquareFunctionResult> {
    let fields = scales.nodes().par_iter().map(|&t| op.apply(t, fs)).collect::<Result<Vec<_>>>()?;
    let (field, values) = aggregate(fields, scales)?;
    Ok(SquareFunctionResult { field, values, guard: op.guard().clone() })
}

/// `g_ψ f(x) = (∫ |ψ_t ∗ f(x)|² dτ(t))^{1/2}`.
pub fn g_psi(psi: &Profile, f: &SampledFunction, scales: &ScaleGrid) -> Result<SampledFunction> {
    let fields = scales.nodes().par_iter().map(|&t| smooth(psi, t, f)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(fields, scales)?.1)
}
