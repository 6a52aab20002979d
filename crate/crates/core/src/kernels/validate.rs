use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{majorant, KernelSlice, MLKernelSpec, Profile};
use crate::grid::{guard_band, Grid, ScaleGrid};
use crate::{Error, Result};

/// Deterministic sampling of `(t, x, y⃗)` for the kernel validators.
///
/// Every count grows by prefix: a refined plan samples a superset of the
/// points of the plan it came from, so validator constants never decrease
/// under [`SamplePlan::refined`].
#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub grid: Grid,
    pub scales: ScaleGrid,
    pub max_scales: usize,
    pub x_samples: usize,
    pub y_samples: usize,
    /// `|y_i - x| ≤ reach · t` for the size samples.
    pub reach: f64,
    /// Offsets `t/4, …, t/4^depth` for the regularity samples.
    pub holder_depth: u32,
    /// `x` is drawn from nodes at least this far from the boundary.
    pub guard: f64,
}

impl SamplePlan {
    pub fn new(grid: Grid, scales: ScaleGrid) -> Self {
        SamplePlan { grid, scales, max_scales: 8, x_samples: 16, y_samples: 64, reach: 3.0, holder_depth: 3, guard: 0.0 }
    }

    pub fn refined(&self) -> Self {
        SamplePlan {
            max_scales: self.max_scales * 2,
            x_samples: self.x_samples * 2,
            y_samples: self.y_samples * 2,
            holder_depth: self.holder_depth + 1,
            ..self.clone()
        }
    }

    fn scale_nodes(&self) -> Vec<f64> {
        let nodes = self.scales.nodes();
        let mut stride = 1usize;
        while nodes.len().div_ceil(stride) > self.max_scales {
            stride *= 2;
        }
        nodes.iter().step_by(stride).copied().collect()
    }

    fn x_nodes(&self) -> Result<Vec<usize>> {
        let mask = guard_band(&self.grid, self.guard)?;
        let pool: Vec<usize> = mask.indices().collect();
        Ok((0..self.x_samples).map(|i| pool[((halton(i as u64 + 1, 2) * pool.len() as f64) as usize).min(pool.len() - 1)]).collect())
    }
}

/// Radical inverse of `i` in `base`.
pub(crate) fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 8] = [3, 5, 7, 11, 13, 17, 19, 23];

/// Best constant found and where it was attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatorReport {
    pub constant: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub samples: usize,
}

impl ValidatorReport {
    fn empty() -> Self {
        ValidatorReport { constant: 0.0, t: 0.0, x: Vec::new(), y: Vec::new(), samples: 0 }
    }

    fn merge(self, other: ValidatorReport) -> ValidatorReport {
        let samples = self.samples + other.samples;
        let mut best = if other.constant > self.constant { other } else { self };
        best.samples = samples;
        best
    }
}

fn check_finite(v: f64, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Kernel(format!("non-finite kernel value at t = {t}")))
    }
}

/// `sup |θ_t(x, y⃗)| / Π_i Φ_t^N(x - y_i)` over the plan.
pub fn validate_size(spec: &MLKernelSpec, plan: &SamplePlan) -> Result<ValidatorReport> {
    let n = spec.n;
    let m = spec.m;
    let xs = plan.x_nodes()?;
    let per_scale: Vec<Result<ValidatorReport>> = plan
        .scale_nodes()
        .into_par_iter()
        .map(|t| {
            let slice = KernelSlice::new(spec, &plan.grid, t)?;
            let mut best = ValidatorReport::empty();
            for &x in &xs {
                let px = plan.grid.point(x);
                for s in 0..plan.y_samples {
                    let ys: Vec<Vec<f64>> = (0..m)
                        .map(|i| {
                            (0..n)
                                .map(|a| {
                                    let u = halton(s as u64 + 1, PRIMES[(i * n + a) % PRIMES.len()]);
                                    px[a] + t * plan.reach * (2.0 * u - 1.0)
                                })
                                .collect()
                        })
                        .collect();
                    let refs: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
                    let v = check_finite(slice.eval_point(x, &refs), t)?;
                    let bound: f64 = ys
                        .iter()
                        .map(|y| {
                            let d: Vec<f64> = (0..n).map(|a| px[a] - y[a]).collect();
                            majorant(spec.decay, n, t, &d)
                        })
                        .product();
                    let r = v.abs() / bound;
                    if r > best.constant {
                        best = ValidatorReport { constant: r, t, x: px[..n].to_vec(), y: ys.clone(), samples: 0 };
                    }
                    best.samples += 1;
                }
            }
            Ok(best)
        })
        .collect();
    let mut out = ValidatorReport::empty();
    for r in per_scale {
        out = out.merge(r?);
    }
    Ok(out)
}

/// `sup |θ_t(…, y_i, …) - θ_t(…, y_i', …)| / (t^{-mn} (|y_i - y_i'|/t)^γ)` with
/// `|y_i - y_i'| = t/4^k`, `k = 1..depth`.
///
/// In dimension one the varied slot sweeps a lattice of step `|y_i - y_i'|`,
/// so no jump of the kernel can fall between samples.
pub fn validate_holder(spec: &MLKernelSpec, plan: &SamplePlan) -> Result<ValidatorReport> {
    let n = spec.n;
    let m = spec.m;
    let xs = plan.x_nodes()?;
    let others = if m == 1 { 1 } else { plan.y_samples.min(8) };
    let per_scale: Vec<Result<ValidatorReport>> = plan
        .scale_nodes()
        .into_par_iter()
        .map(|t| {
            let slice = KernelSlice::new(spec, &plan.grid, t)?;
            let norm = t.powi(-((m * n) as i32));
            let mut best = ValidatorReport::empty();
            for &x in &xs {
                let px = plan.grid.point(x);
                let base = |s: usize, i: usize| -> Vec<f64> {
                    (0..n)
                        .map(|a| {
                            let u = halton(s as u64 + 1, PRIMES[(i * n + a) % PRIMES.len()]);
                            px[a] + t * plan.reach * (2.0 * u - 1.0)
                        })
                        .collect()
                };
                for slot in 0..m {
                    for o in 0..others {
                        let mut ys: Vec<Vec<f64>> = (0..m).map(|i| base(o, i)).collect();
                        for k in 1..=plan.holder_depth {
                            let delta = t / 4f64.powi(k as i32);
                            let pairs: Vec<(Vec<f64>, Vec<f64>)> = if n == 1 {
                                let steps = (plan.reach * t / delta).ceil() as i64;
                                let phase = halton(o as u64 + 1, 2) * delta;
                                (-steps..steps)
                                    .map(|j| {
                                        let y = px[0] + j as f64 * delta + phase;
                                        (vec![y], vec![y + delta])
                                    })
                                    .collect()
                            } else {
                                (0..plan.y_samples)
                                    .flat_map(|s| {
                                        let y = base(s, slot);
                                        (0..n).map(move |a| {
                                            let mut y2 = y.clone();
                                            y2[a] += delta;
                                            (y.clone(), y2)
                                        })
                                    })
                                    .collect()
                            };
                            for (y, y2) in pairs {
                                ys[slot] = y.clone();
                                let v1 = {
                                    let refs: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
                                    check_finite(slice.eval_point(x, &refs), t)?
                                };
                                ys[slot] = y2;
                                let v2 = {
                                    let refs: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
                                    check_finite(slice.eval_point(x, &refs), t)?
                                };
                                let r = (v1 - v2).abs() / (norm * (delta / t).powf(spec.gamma));
                                if r > best.constant {
                                    let mut yr = ys.clone();
                                    yr[slot] = y;
                                    best = ValidatorReport { constant: r, t, x: px[..n].to_vec(), y: yr, samples: 0 };
                                }
                                best.samples += 1;
                            }
                        }
                    }
                }
            }
            Ok(best)
        })
        .collect();
    let mut out = ValidatorReport::empty();
    for r in per_scale {
        out = out.merge(r?);
    }
    Ok(out)
}

/// `sup_ξ ∫ |ψ̂(tξ)|² dτ(t)` over the sampled nonzero frequencies.
pub fn fourier_admissibility(psi: &Profile, xis: &[Vec<f64>], scales: &ScaleGrid) -> Result<f64> {
    let n = psi.dim();
    let zero = vec![0.0; n];
    let mean = psi.transform(&zero).norm();
    if mean > 1e-8 {
        return Err(Error::Precondition(format!("kernel has integral {mean:e}, not zero")));
    }
    let values: Vec<f64> = xis
        .par_iter()
        .filter(|xi| xi.iter().any(|v| *v != 0.0))
        .map(|xi| {
            let vals: Vec<f64> = scales
                .nodes()
                .iter()
                .map(|&t| {
                    let txi: Vec<f64> = xi.iter().map(|v| t * v).collect();
                    psi.transform(&txi).norm_sqr()
                })
                .collect();
            scales.integrate(&vals)
        })
        .collect();
    Ok(values.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelForm, Multiplier, ProductForm};
    use std::sync::Arc;

    fn plan() -> SamplePlan {
        SamplePlan::new(Grid::interval(-4.0, 4.0, 1.0 / 64.0).unwrap(), ScaleGrid::log_uniform(0.125, 2.0, 4).unwrap())
    }

    #[test]
    fn self_majorant_has_unit_constant() {
        let spec = MLKernelSpec::convolution(Profile::Majorant { n: 1, decay: 2.0 }, 2.0, 1.0).unwrap();
        let r = validate_size(&spec, &plan()).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-14, "{}", r.constant);
    }

    #[test]
    fn zero_kernel_has_zero_constants() {
        let spec = MLKernelSpec::general(1, 1, 2.0, 1.0, 1.0, Arc::new(|_, _, _| 0.0)).unwrap();
        assert_eq!(validate_size(&spec, &plan()).unwrap().constant, 0.0);
        assert_eq!(validate_holder(&spec, &plan()).unwrap().constant, 0.0);
    }

    #[test]
    fn jump_multiplier_kernel_has_stable_size_constant() {
        let spec = MLKernelSpec::ex38(1).unwrap();
        let p = SamplePlan::new(Grid::interval(-2.0, 2.0, 1.0 / 256.0).unwrap(), ScaleGrid::log_uniform(1.0 / 16.0, 1.0, 8).unwrap());
        let a = validate_size(&spec, &p).unwrap().constant;
        let b = validate_size(&spec, &p.refined()).unwrap().constant;
        assert!(a.is_finite() && b >= a && b <= 1.1 * a, "{a} {b}");
        // |ψ_t ∗ b| ≤ 1 and φ ≤ c_1, while Φ_t^2 ≥ t^{-1}/4 on the support
        assert!(b <= 4.0 * crate::kernels::bump_constant(1) + 1e-9);
    }

    /// Mean value theorem: the ratio is at most `sup|a| · sup|φ'|` for
    /// `θ_t = a φ_t(x - y)` with `γ = 1`.
    #[test]
    fn smooth_kernel_has_finite_regularity_constant() {
        let spec = MLKernelSpec::convolution(Profile::Bump { n: 1 }, 3.0, 1.0).unwrap();
        let r = validate_holder(&spec, &plan()).unwrap().constant;
        let dphi = (0..20000)
            .map(|i| Profile::Grad { n: 1, k: 0 }.eval(&[-1.0 + i as f64 / 10000.0]).abs() / 2.0)
            .fold(0.0, f64::max);
        assert!(r > 0.0 && r <= dphi * 1.0001, "{r} vs {dphi}");
    }

    #[test]
    fn indicator_kernel_diverges_under_refinement() {
        let spec = MLKernelSpec::new(
            1,
            1,
            2.0,
            1.0,
            KernelForm::Product(ProductForm { multiplier: Multiplier::Constant(1.0), factors: vec![Profile::Indicator { lo: 0.0, hi: 1.0 }] }),
            true,
        )
        .unwrap();
        let mut p = plan();
        let mut last = validate_holder(&spec, &p).unwrap().constant;
        for _ in 0..3 {
            p = p.refined();
            let next = validate_holder(&spec, &p).unwrap().constant;
            assert!(next >= 3.0 * last, "{last} -> {next}");
            last = next;
        }
    }

    #[test]
    fn constants_never_decrease_under_refinement() {
        let spec = MLKernelSpec::ex37(2, 1, 0.5, super::super::Beta::RoughSign).unwrap();
        let p = SamplePlan { max_scales: 4, x_samples: 4, y_samples: 16, ..plan() };
        let q = p.refined();
        assert!(validate_size(&spec, &q).unwrap().constant >= validate_size(&spec, &p).unwrap().constant);
        assert!(validate_holder(&spec, &q).unwrap().constant >= validate_holder(&spec, &p).unwrap().constant);
    }

    #[test]
    fn jump_kernel_admissibility_constant() {
        let scales = ScaleGrid::log_uniform(2f64.powi(-12), 2f64.powi(12), 16).unwrap();
        let xis = vec![vec![0.5], vec![1.0], vec![-2.0], vec![3.0]];
        let v = fourier_admissibility(&Profile::Jump, &xis, &scales).unwrap();
        let exact = 4.0 * std::f64::consts::LN_2;
        assert!((v - exact).abs() <= 0.02 * exact, "{v}");
        assert!(matches!(
            fourier_admissibility(&Profile::Bump { n: 1 }, &xis, &scales),
            Err(Error::Precondition(_))
        ));
    }
}
