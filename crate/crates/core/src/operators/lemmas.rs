use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_pi, apply_qik, hl_maximal, MaximalFamily, ThetaOperator};
use crate::grid::{BoxSet, Cube, SampledFunction, ScaleGrid};
use crate::kernels::{derived_exponents, majorant, DerivedFamily};
use crate::quad;
use crate::{Error, Result};

/// Truncated reproducing formula at one scale `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub eps: f64,
    /// `‖Θ_t f⃗ - Σ_j ∫_ε^{1/ε} Θ_t Π_{j,s} f⃗ ds/s‖_{L²}` over the guard mask.
    pub residual: f64,
    /// `‖Θ_t f⃗‖_{L²}` over the same mask.
    pub theta_norm: f64,
}

pub fn reproducing_residual(
    op: &ThetaOperator,
    fam: &DerivedFamily,
    fs: &[&SampledFunction],
    t: f64,
    eps: f64,
    per_octave: usize,
) -> Result<Reproduction> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("ε = {eps} not in (0, 1)")));
    }
    let theta = op.apply(t, fs)?;
    let scales = ScaleGrid::log_uniform(eps, 1.0 / eps, per_octave)?;
    let m = fs.len();
    let terms = scales
        .nodes()
        .par_iter()
        .map(|&s| {
            let mut acc = vec![0.0; op.grid().len()];
            for j in 1..=m {
                let slots = apply_pi(j, s, fam, fs)?;
                let refs: Vec<&SampledFunction> = slots.iter().collect();
                for (a, v) in acc.iter_mut().zip(op.apply(t, &refs)?.values()) {
                    *a += v;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; op.grid().len()];
    for (term, w) in terms.iter().zip(scales.weights()) {
        for (a, v) in sum.iter_mut().zip(term) {
            *a += w * v;
        }
    }
    let diff = theta.zip_with(&SampledFunction::new(op.grid().clone(), sum)?, |a, b| a - b)?;
    Ok(Reproduction {
        eps,
        residual: diff.lp_norm_masked(2.0, op.guard()),
        theta_norm: theta.lp_norm_masked(2.0, op.guard()),
    })
}

/// `∫ Φ_t^M(v) Φ_s^L(d - v) dv` on `ℝ^n`, `n ∈ {1, 2}`.
fn majorant_convolution(big_m: f64, big_l: f64, n: usize, s: f64, t: f64, d: &[f64], tol: f64) -> f64 {
    let r = d[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    match n {
        1 => {
            let f = |v: f64| majorant(big_m, 1, t, &[v]) * majorant(big_l, 1, s, &[r - v]);
            quad::semi_infinite(|u| f(-u), 0.0, tol) + quad::tanh_sinh(f, 0.0, r, tol) + quad::semi_infinite(f, r, tol)
        }
        _ => {
            // polar coordinates around the peak of Φ_t, angle measured from d
            let ring = |rho: f64| {
                let inner = |th: f64| {
                    let dist = (rho * rho + r * r - 2.0 * rho * r * th.cos()).max(0.0).sqrt();
                    majorant(big_l, 2, s, &[dist, 0.0])
                };
                2.0 * rho * majorant(big_m, 2, t, &[rho, 0.0]) * quad::tanh_sinh(inner, 0.0, PI, tol)
            };
            quad::tanh_sinh(ring, 0.0, r, tol) + quad::semi_infinite(ring, r, tol)
        }
    }
}

/// `sup_d ∫ Φ_t^M(d - u) Φ_s^L(u) du / (Φ_s^{M∧L}(d) + Φ_t^{M∧L}(d))` over the
/// sampled differences `d = x - y`.
pub fn almost_orth_ratio(big_m: f64, big_l: f64, n: usize, s: f64, t: f64, diffs: &[Vec<f64>]) -> Result<f64> {
    let nf = n as f64;
    if n != 1 && n != 2 {
        return Err(Error::Config(format!("dimension {n} not in {{1, 2}}")));
    }
    if !(big_m > nf && big_l > nf) {
        return Err(Error::Parameter(format!("need M, L > n, got M = {big_m}, L = {big_l}")));
    }
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::Parameter("scales must be positive".into()));
    }
    let low = big_m.min(big_l);
    let ratios: Vec<f64> = diffs
        .par_iter()
        .map(|d| {
            let den = majorant(low, n, s, d) + majorant(low, n, t, d);
            // a coarse pass fixes the size, the second is relative to it
            let rough = majorant_convolution(big_m, big_l, n, s, t, d, 1e-6 * den);
            majorant_convolution(big_m, big_l, n, s, t, d, 1e-13 * rough) / den
        })
        .collect();
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

fn ensure_vanishing(op: &ThetaOperator, s: f64, t: f64, asserted: bool) -> Result<()> {
    if s > t {
        if !asserted {
            return Err(Error::Contract("s > t requires the caller to assert Θ_t(1, …, 1) = 0".into()));
        }
        let ones = op.apply_ones(t)?.max_abs_masked(op.guard());
        if ones > 1e-8 {
            return Err(Error::Contract(format!("asserted Θ_t(1, …, 1) = 0 but found {ones:e} at t = {t}")));
        }
    }
    Ok(())
}

/// `‖Θ_t Π_{j,s} f⃗‖_∞` over the guard mask.
fn pi_numerator(op: &ThetaOperator, fam: &DerivedFamily, j: usize, s: f64, t: f64, fs: &[&SampledFunction]) -> Result<f64> {
    let slots = apply_pi(j, s, fam, fs)?;
    let refs: Vec<&SampledFunction> = slots.iter().collect();
    Ok(op.apply(t, &refs)?.max_abs_masked(op.guard()))
}

/// The quotient of `‖Θ_t Π_{j,s} f⃗‖_∞` by its pointwise majorant
/// `(s/t ∧ t/s)^{γ'} Σ_k M Q_s^{2,k} f_j Π_{i≠j} M f_i`.
///
/// `theta_one_vanishes` is the caller's assertion that `Θ_t(1, …, 1) = 0`;
/// it is required, and checked, for `s > t`.
#[allow(clippy::too_many_arguments)]
pub fn pi_decay_ratio(
    op: &ThetaOperator,
    fam: &DerivedFamily,
    j: usize,
    s: f64,
    t: f64,
    fs: &[&SampledFunction],
    family: &MaximalFamily,
    theta_one_vanishes: bool,
) -> Result<f64> {
    ensure_vanishing(op, s, t, theta_one_vanishes)?;
    let spec = op.spec();
    let gp = derived_exponents(spec.decay, spec.gamma, spec.n)?.gamma_prime;
    let num = pi_numerator(op, fam, j, s, t, fs)?;
    let grid = op.grid();
    let mut sum_q = SampledFunction::zeros(grid);
    for k in 1..=spec.n {
        let mq = hl_maximal(&apply_qik(fam, 2, k, s, fs[j - 1])?, family)?;
        sum_q = sum_q.zip_with(&mq, |a, b| a + b)?;
    }
    let mut major = sum_q;
    for (i, f) in fs.iter().enumerate() {
        if i + 1 != j {
            major = major.zip_with(&hl_maximal(f, family)?, |a, b| a * b)?;
        }
    }
    let den = (s / t).min(t / s).powf(gp) * major.max_abs_masked(op.guard());
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// Decay of `‖Θ_t Π_{j,s} f⃗‖_∞` in `s/t ∧ t/s`, measured separately on the
/// two sides of `s = t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiDecay {
    pub gamma_prime: f64,
    /// Regression slope of `log ‖·‖_∞` against `log(s/t)` for `s < t`.
    pub slope_small: f64,
    /// The same against `log(t/s)` for `s > t`.
    pub slope_large: f64,
    /// `(s, ‖Θ_t Π_{j,s} f⃗‖_∞)` for every sampled `s`.
    pub samples: Vec<(f64, f64)>,
}

impl PiDecay {
    pub fn slope(&self) -> f64 {
        self.slope_small.min(self.slope_large)
    }
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Samples `s = t 2^{±k}`, `k = 1, …, octaves`, and regresses each side.
pub fn pi_decay_slope(
    op: &ThetaOperator,
    fam: &DerivedFamily,
    j: usize,
    t: f64,
    fs: &[&SampledFunction],
    octaves: u32,
    theta_one_vanishes: bool,
) -> Result<PiDecay> {
    if octaves < 2 {
        return Err(Error::Parameter("a slope needs at least two octaves".into()));
    }
    ensure_vanishing(op, 2.0 * t, t, theta_one_vanishes)?;
    let spec = op.spec();
    let gamma_prime = derived_exponents(spec.decay, spec.gamma, spec.n)?.gamma_prime;
    let ks: Vec<i32> = (1..=octaves as i32).flat_map(|k| [-k, k]).collect();
    let values = ks
        .par_iter()
        .map(|&k| pi_numerator(op, fam, j, t * 2f64.powi(k), t, fs))
        .collect::<Result<Vec<_>>>()?;
    let side = |sign: i32| -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = ks
            .iter()
            .zip(&values)
            .filter(|(k, _)| k.signum() == sign)
            .map(|(k, v)| (-(k.abs() as f64) * 2f64.ln(), v.ln()))
            .unzip();
        regression_slope(&xs, &ys)
    };
    let samples = ks.iter().zip(&values).map(|(&k, &v)| (t * 2f64.powi(k), v)).collect();
    Ok(PiDecay { gamma_prime, slope_small: side(-1), slope_large: side(1), samples })
}

/// Sampled constants in `|Θ_t(χ_{E⃗})| ≲ t^{-n} min_i |E_i|` and, on a cube
/// `Q` with `2Q` missing some `E_i`, `≲ t^{N-n} ℓ(Q)^{-(N-n)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRatios {
    pub ratio35: f64,
    pub ratio36: Option<f64>,
}

pub fn kernel_tail_bounds(op: &ThetaOperator, sets: &[BoxSet], q: Option<&Cube>, t: f64) -> Result<TailRatios> {
    let grid = op.grid();
    let spec = op.spec();
    let chis = sets.iter().map(|e| e.cell_average(grid)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SampledFunction> = chis.iter().collect();
    let theta = op.apply(t, &refs)?;
    let nf = spec.n as f64;
    let min_measure = sets.iter().map(BoxSet::measure).fold(f64::INFINITY, f64::min);
    let ratio35 = if min_measure == 0.0 { 0.0 } else { theta.max_abs() / (t.powf(-nf) * min_measure) };
    let ratio36 = match q {
        None => None,
        Some(q) => {
            let doubled = q.dilate(2.0);
            if !sets.iter().any(|e| e.cube_measure(&doubled) == 0.0) {
                return Err(Error::Contract("2Q meets every set".into()));
            }
            let sup = grid.nodes_in(q).into_iter().map(|i| theta.value(i).abs()).fold(0.0, f64::max);
            let excess = spec.decay - nf;
            Some(sup / (t.powf(excess) * q.side().powf(-excess)))
        }
    };
    Ok(TailRatios { ratio35, ratio36 })
}
