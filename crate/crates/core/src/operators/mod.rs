//! The operators `P_t`, `Q_t`, `Θ_t`, `Π_{j,s}`, square functions, maximal
//! functions and numerical checks of the estimates that drive the theory.
//!
//! Every operator acts on fields sampled on a common grid and extends its
//! inputs by zero outside the grid. Reductions are taken over a guard mask
//! chosen by the caller, typically [`ThetaOperator::guard_for`].

mod lemmas;
mod maximal;
mod square;

pub use lemmas::{
    almost_orth_ratio, kernel_tail_bounds, pi_decay_ratio, pi_decay_slope, reproducing_residual, PiDecay,
    Reproduction, TailRatios,
};
pub(crate) use lemmas::regression_slope;
pub use maximal::{hl_maximal, nt_maximal, MaximalFamily};
pub use square::{g_psi, square_function, SquareFunctionResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{convolve, guard_band, BoxSet, Grid, Mask, Method, SampledFunction};
use crate::kernels::{DerivedFamily, KernelForm, KernelSlice, MLKernelSpec, Profile};
use crate::{Error, Result};

/// Largest grid side, in nodes, accepted by the tensor-quadrature path.
pub const GENERAL_MAX_NODES_PER_AXIS: usize = 512;
/// Largest number of kernel evaluations per application on that path.
pub const GENERAL_MAX_WORK: f64 = 4e9;

/// How `Θ_t` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `a(x, t) Π_i (k_{i,t} ∗ f_i)(x)` by fast convolution.
    ProductConvolution,
    /// Direct tensor sum over every `y⃗` within the kernel's reach.
    GeneralQuadrature,
}

/// `Θ_t(f⃗)(x) = ∫ θ_t(x, y⃗) Π f_i(y_i) dy⃗` on a spatial grid.
#[derive(Clone, Debug)]
pub struct ThetaOperator {
    spec: MLKernelSpec,
    grid: Grid,
    guard: Mask,
    strategy: Strategy,
}

impl ThetaOperator {
    /// Product kernels default to the convolution path, rules to quadrature.
    pub fn new(spec: MLKernelSpec, grid: Grid) -> Result<Self> {
        if grid.dim() != spec.n {
            return Err(Error::Config(format!("{}-dimensional kernel on a {}-dimensional grid", spec.n, grid.dim())));
        }
        let strategy = match spec.form {
            KernelForm::Product(_) => Strategy::ProductConvolution,
            KernelForm::General { .. } => Strategy::GeneralQuadrature,
        };
        let guard = Mask::all(grid.len());
        Ok(ThetaOperator { spec, grid, guard, strategy })
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Result<Self> {
        if strategy == Strategy::ProductConvolution && self.spec.product().is_none() {
            return Err(Error::Config("a pointwise rule has no product-convolution form".into()));
        }
        self.strategy = strategy;
        Ok(self)
    }

    pub fn with_guard(mut self, guard: Mask) -> Result<Self> {
        if guard.len() != self.grid.len() {
            return Err(Error::Config("guard mask does not match the grid".into()));
        }
        if guard.count() == 0 {
            return Err(Error::DegenerateDomain("guard mask keeps no nodes".into()));
        }
        self.guard = guard;
        Ok(self)
    }

    /// Nodes whose distance to the boundary exceeds the reach at `t_max`.
    pub fn guard_for(&self, t_max: f64) -> Result<Mask> {
        guard_band(&self.grid, self.spec.reach() * t_max)
    }

    pub fn spec(&self) -> &MLKernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn guard(&self) -> &Mask {
        &self.guard
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn check_inputs(&self, fs: &[&SampledFunction]) -> Result<()> {
        if fs.len() != self.spec.m {
            return Err(Error::Config(format!("{} inputs for arity {}", fs.len(), self.spec.m)));
        }
        if fs.iter().any(|f| f.grid() != &self.grid) {
            return Err(Error::Config("input does not live on the operator's grid".into()));
        }
        Ok(())
    }

    /// `Θ_t(f_1, …, f_m)` at every node.
    pub fn apply(&self, t: f64, fs: &[&SampledFunction]) -> Result<SampledFunction> {
        self.check_inputs(fs)?;
        let slice = KernelSlice::new(&self.spec, &self.grid, t)?;
        match self.strategy {
            Strategy::ProductConvolution => {
                let mut out = slice.multiplier().expect("product slice").to_vec();
                for (f, k) in fs.iter().zip(slice.factors()) {
                    let g = convolve(f, k, Method::Auto)?;
                    for (o, v) in out.iter_mut().zip(g.values()) {
                        *o *= v;
                    }
                }
                SampledFunction::new(self.grid.clone(), out)
            }
            Strategy::GeneralQuadrature => self.apply_tensor(&slice, fs),
        }
    }

    /// Half-width in nodes of the `y` neighbourhood used by the tensor sum.
    fn tensor_reach(&self, slice: &KernelSlice) -> usize {
        let nodes = match &self.spec.form {
            KernelForm::Product(_) => slice.factors().iter().map(|k| k.grid().per_axis() / 2).max().unwrap_or(0),
            KernelForm::General { radius, .. } => (radius * slice.t() / self.grid.h()).ceil() as usize,
        };
        nodes.min(self.grid.per_axis() - 1)
    }

    fn apply_tensor(&self, slice: &KernelSlice, fs: &[&SampledFunction]) -> Result<SampledFunction> {
        let n = self.grid.dim();
        let m = self.spec.m;
        let p = self.grid.per_axis();
        if p > GENERAL_MAX_NODES_PER_AXIS + 1 || m > 2 {
            return Err(Error::Capacity(format!(
                "tensor quadrature is limited to {}^n nodes and arity two, got {} nodes per axis and arity {m}",
                GENERAL_MAX_NODES_PER_AXIS, p
            )));
        }
        let k = self.tensor_reach(slice);
        let hood = ((2 * k + 1).min(p) as f64).powi(n as i32);
        let work = self.grid.len() as f64 * hood.powi(m as i32);
        if work > GENERAL_MAX_WORK {
            return Err(Error::Capacity(format!("tensor quadrature needs {work:e} kernel evaluations")));
        }
        let cell = self.grid.cell_volume().powi(m as i32);
        let grid = &self.grid;
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let ys = neighbourhood(grid, x, k);
                let mut acc = 0.0;
                match m {
                    1 => {
                        for &y in &ys {
                            let f = fs[0].value(y);
                            if f != 0.0 {
                                acc += slice.eval_nodes(x, &[y]) * f;
                            }
                        }
                    }
                    _ => {
                        for &y1 in &ys {
                            let f1 = fs[0].value(y1);
                            if f1 == 0.0 {
                                continue;
                            }
                            let mut inner = 0.0;
                            for &y2 in &ys {
                                let f2 = fs[1].value(y2);
                                if f2 != 0.0 {
                                    inner += slice.eval_nodes(x, &[y1, y2]) * f2;
                                }
                            }
                            acc += f1 * inner;
                        }
                    }
                }
                acc * cell
            })
            .collect();
        SampledFunction::new(self.grid.clone(), values)
    }

    /// `Θ_t(1, …, 1)` with the constant one on all of `ℝ^n`.
    ///
    /// For product kernels this is the multiplier times the discrete factor
    /// masses and is exact at every node; rules are integrated against the
    /// constant on the grid, so only guard-banded nodes are meaningful.
    pub fn apply_ones(&self, t: f64) -> Result<SampledFunction> {
        match (&self.spec.form, self.strategy) {
            (KernelForm::Product(_), Strategy::ProductConvolution) => {
                let slice = KernelSlice::new(&self.spec, &self.grid, t)?;
                let mass: f64 = slice.factors().iter().map(discrete_mass).product();
                let values = slice.multiplier().expect("product slice").iter().map(|a| a * mass).collect();
                SampledFunction::new(self.grid.clone(), values)
            }
            _ => {
                let one = SampledFunction::constant(&self.grid, 1.0);
                let fs = vec![&one; self.spec.m];
                self.apply(t, &fs)
            }
        }
    }

    /// `Θ_t(χ_{A_1^c}, …, χ_{A_m^c})` for bounded sets `A_i` inside the grid.
    ///
    /// Uses `k ∗ χ_{A^c} = ∫k - k ∗ χ_A`, so no truncation of the unbounded
    /// complements is involved.
    pub fn apply_complement(&self, t: f64, sets: &[&BoxSet]) -> Result<SampledFunction> {
        if self.strategy != Strategy::ProductConvolution {
            return Err(Error::Config("complements are evaluated on the product-convolution path".into()));
        }
        if sets.len() != self.spec.m {
            return Err(Error::Config(format!("{} sets for arity {}", sets.len(), self.spec.m)));
        }
        let slice = KernelSlice::new(&self.spec, &self.grid, t)?;
        let mut out = slice.multiplier().expect("product slice").to_vec();
        for (set, k) in sets.iter().zip(slice.factors()) {
            check_inside(set, &self.grid)?;
            let chi = set.cell_average(&self.grid)?;
            let g = convolve(&chi, k, Method::Auto)?;
            let mass = discrete_mass(k);
            for (o, v) in out.iter_mut().zip(g.values()) {
                *o *= mass - v;
            }
        }
        SampledFunction::new(self.grid.clone(), out)
    }
}

fn check_inside(set: &BoxSet, grid: &Grid) -> Result<()> {
    let c = grid.cube();
    for r in set.rects() {
        for a in 0..grid.dim() {
            if r.lo()[a] < c.lower(a) || r.hi()[a] > c.upper(a) {
                return Err(Error::Config("set extends beyond the working box".into()));
            }
        }
    }
    Ok(())
}

/// `h^n Σ k_j`, the mass seen by the discrete convolution.
pub(crate) fn discrete_mass(k: &SampledFunction) -> f64 {
    k.values().iter().sum::<f64>() * k.grid().cell_volume()
}

/// Nodes within `k` lattice steps of `x` along every axis.
fn neighbourhood(grid: &Grid, x: usize, k: usize) -> Vec<usize> {
    let p = grid.per_axis();
    let mi = grid.multi_index(x);
    let range = |i: usize| i.saturating_sub(k)..=(i + k).min(p - 1);
    match grid.dim() {
        1 => range(mi[0]).collect(),
        _ => {
            let mut v = Vec::new();
            for i in range(mi[0]) {
                for j in range(mi[1]) {
                    v.push(grid.flat_index([i, j]));
                }
            }
            v
        }
    }
}

fn smooth(profile: &Profile, t: f64, f: &SampledFunction) -> Result<SampledFunction> {
    if profile.dim() != f.grid().dim() {
        return Err(Error::Config("kernel and field differ in dimension".into()));
    }
    let k = profile.sample_dilated(t, f.grid().h(), f.grid().cube().side())?;
    convolve(f, &k, Method::Auto)
}

/// `P_t f = φ_t ∗ f`.
pub fn apply_p(phi: &Profile, t: f64, f: &SampledFunction) -> Result<SampledFunction> {
    smooth(phi, t, f)
}

/// `P_t² f = P_t(P_t f)`.
pub fn apply_p2(phi: &Profile, t: f64, f: &SampledFunction) -> Result<SampledFunction> {
    smooth(phi, t, &smooth(phi, t, f)?)
}

/// `Π_i P_t f_i` pointwise.
pub fn apply_p_prod(phi: &Profile, t: f64, fs: &[&SampledFunction]) -> Result<SampledFunction> {
    let first = fs.first().ok_or_else(|| Error::Config("no inputs".into()))?;
    let mut out = SampledFunction::constant(first.grid(), 1.0);
    for f in fs {
        out = out.zip_with(&smooth(phi, t, f)?, |a, b| a * b)?;
    }
    Ok(out)
}

/// `Q_t f = Ψ_t ∗ f`.
pub fn apply_q(fam: &DerivedFamily, t: f64, f: &SampledFunction) -> Result<SampledFunction> {
    smooth(&fam.psi, t, f)
}

/// `Q_t^{i,k} f = Ψ_t^{i,k} ∗ f` with `i ∈ {1, 2}` and `k ∈ {1, …, n}`.
pub fn apply_qik(fam: &DerivedFamily, i: usize, k: usize, t: f64, f: &SampledFunction) -> Result<SampledFunction> {
    let set = match i {
        1 => &fam.psi1,
        2 => &fam.psi2,
        _ => return Err(Error::Parameter(format!("factor index {i} not in {{1, 2}}"))),
    };
    if k == 0 || k > set.len() {
        return Err(Error::Parameter(format!("direction {k} not in 1..={}", set.len())));
    }
    smooth(&set[k - 1], t, f)
}

/// `Π_{j,s} f⃗`: `Q_s` in slot `j` (one-based) and `P_s²` elsewhere.
pub fn apply_pi(j: usize, s: f64, fam: &DerivedFamily, fs: &[&SampledFunction]) -> Result<Vec<SampledFunction>> {
    if j == 0 || j > fs.len() {
        return Err(Error::Parameter(format!("slot {j} not in 1..={}", fs.len())));
    }
    fs.iter()
        .enumerate()
        .map(|(i, f)| if i + 1 == j { apply_q(fam, s, f) } else { apply_p2(&fam.phi, s, f) })
        .collect()
}

/// `Θ_t = R_t + U_t` with `U_t f⃗ = Θ_t(1, …, 1) Π_i P_t f_i`.
pub struct ThetaSplit<'a> {
    op: &'a ThetaOperator,
    phi: Profile,
}

pub fn split_theta(op: &ThetaOperator) -> Result<ThetaSplit<'_>> {
    Ok(ThetaSplit { op, phi: Profile::bump(op.spec.n)? })
}

impl ThetaSplit<'_> {
    /// The multiplier `Θ_t(1, …, 1)(x)` of the `U` part.
    pub fn u_multiplier(&self, t: f64) -> Result<SampledFunction> {
        self.op.apply_ones(t)
    }

    pub fn apply_u(&self, t: f64, fs: &[&SampledFunction]) -> Result<SampledFunction> {
        self.op.check_inputs(fs)?;
        let a = self.u_multiplier(t)?;
        a.zip_with(&apply_p_prod(&self.phi, t, fs)?, |x, y| x * y)
    }

    pub fn apply_r(&self, t: f64, fs: &[&SampledFunction]) -> Result<SampledFunction> {
        let theta = self.op.apply(t, fs)?;
        theta.zip_with(&self.apply_u(t, fs)?, |a, b| a - b)
    }
}
