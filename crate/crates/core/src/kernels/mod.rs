//! Kernel profiles, multilinear kernel descriptions and their validators.
//!
//! A kernel `θ_t(x, y_1, …, y_m)` is described by an [`MLKernelSpec`]. Most
//! kernels of interest have the product-convolution shape
//! `a(x, t) Π_i k_{i,t}(x - y_i)` where the multiplier `a` may itself be a
//! smoothed function `β(x,t)·(ψ_t ∗ b)(x)`; anything else can be given as a
//! pointwise rule.

mod config;
mod profile;
mod validate;

pub use config::{KernelConfig, KernelFile};
pub use profile::{bump_constant, jump_transform, psi_table, MomentClass, Profile, RadialTable, TAIL_EPS};
pub use validate::{fourier_admissibility, validate_holder, validate_size, SamplePlan, ValidatorReport};

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{convolve, BoxSet, Grid, Method, Rect, SampledFunction};
use crate::{Error, Result};

/// `(t, x) ↦ value`.
pub type FieldRule = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// `x ↦ value`.
pub type PointRule = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `(t, x, [y_1, …, y_m]) ↦ θ_t(x, y⃗)`.
pub type KernelRule = Arc<dyn Fn(f64, &[f64], &[&[f64]]) -> f64 + Send + Sync>;

/// The standard bump, unit mass, supported in the unit ball.
pub fn standard_bump(n: usize) -> Result<Profile> {
    Profile::bump(n)
}

/// `Φ_t^M(x) = t^{-n} (1 + |x|/t)^{-M}`.
pub fn majorant_eval(decay: f64, n: usize, t: f64, x: &[f64]) -> Result<f64> {
    if !(decay > n as f64) {
        return Err(Error::Parameter(format!("majorant decay {decay} must exceed the dimension {n}")));
    }
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("scale must be positive, got {t}")));
    }
    Ok(majorant(decay, n, t, x))
}

pub(crate) fn majorant(decay: f64, n: usize, t: f64, x: &[f64]) -> f64 {
    let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    t.powi(-(n as i32)) * (1.0 + r / t).powf(-decay)
}

/// The mean-zero family built from the standard bump.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedFamily {
    pub phi: Profile,
    pub psi: Profile,
    pub psi1: Vec<Profile>,
    pub psi2: Vec<Profile>,
    /// `σ` in `Ψ̂ = σ Σ_k Ψ̂^{1,k} Ψ̂^{2,k}`.
    pub sign: f64,
}

/// `Ψ = ∇·(x (φ∗φ))`, `Ψ^{1,k} = -2∂_kφ`, `Ψ^{2,k} = x_kφ`.
///
/// With `ψ̂(ξ) = ∫ψ e^{-iξ·x}` one has `Σ_k Ψ̂^{1,k}Ψ̂^{2,k} = ξ·∇(φ̂²) = -Ψ̂`,
/// so the factorisation holds with `σ = -1`; the unit tests confirm this
/// numerically.
pub fn derived_family(phi: &Profile) -> Result<DerivedFamily> {
    let n = match phi {
        Profile::Bump { n } => *n,
        _ => return Err(Error::Config("the derived family is built from the standard bump".into())),
    };
    Ok(DerivedFamily {
        phi: phi.clone(),
        psi: Profile::Psi { n },
        psi1: (0..n).map(|k| Profile::Grad { n, k }).collect(),
        psi2: (0..n).map(|k| Profile::Moment { n, k }).collect(),
        sign: -1.0,
    })
}

/// The jump kernel `χ_(0,1) - χ_(-1,0)`.
pub fn ex38_psi() -> Profile {
    Profile::Jump
}

/// Its transform `2(1 - cos ξ)/(iξ)`.
pub fn ex38_psihat(xi: f64) -> Complex64 {
    jump_transform(xi)
}

/// Exponents obtained by interpolating the size and regularity bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub eta: f64,
    pub gamma_prime: f64,
    pub n_prime: f64,
}

/// `η = (N-n)/(2(N+γ))`, `γ' = ηγ`, `N' = (N+n)/2`.
pub fn derived_exponents(decay: f64, gamma: f64, n: usize) -> Result<DerivedExponents> {
    let nf = n as f64;
    if !(decay > nf) || !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Parameter(format!("need N > n and 0 < γ ≤ 1, got N = {decay}, γ = {gamma}, n = {n}")));
    }
    let eta = (decay - nf) / (2.0 * (decay + gamma));
    let e = DerivedExponents { eta, gamma_prime: eta * gamma, n_prime: 0.5 * (decay + nf) };
    debug_assert!(e.gamma_prime > 0.0 && e.gamma_prime < gamma);
    debug_assert!(e.n_prime > nf && e.n_prime <= decay - e.gamma_prime + 1e-12);
    Ok(e)
}

/// Bounded multiplier `β(x, t)`.
#[derive(Clone)]
pub enum Beta {
    One,
    Constant(f64),
    /// `±1`, alternating in `x` on cells of width 1/4 and flipping with the
    /// octave of `t`; deliberately discontinuous in `x`.
    RoughSign,
    Rule { rule: FieldRule, bound: f64 },
}

impl Beta {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Beta::One => 1.0,
            Beta::Constant(c) => *c,
            Beta::RoughSign => {
                let cell = (4.0 * x[0]).floor() as i64 + if x.len() > 1 { (4.0 * x[1]).floor() as i64 } else { 0 };
                let octave = t.log2().floor() as i64;
                if (cell + octave).rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Beta::Rule { rule, .. } => rule(t, x),
        }
    }

    /// `‖β‖_∞`.
    pub fn sup(&self) -> f64 {
        match self {
            Beta::One | Beta::RoughSign => 1.0,
            Beta::Constant(c) => c.abs(),
            Beta::Rule { bound, .. } => *bound,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Beta::One => "one",
            Beta::Constant(_) => "constant",
            Beta::RoughSign => "rough-sign",
            Beta::Rule { .. } => "rule",
        }
    }
}

impl fmt::Debug for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Constant(c) => write!(f, "Beta::Constant({c})"),
            b => write!(f, "Beta::{}", b.name()),
        }
    }
}

/// The function `b` smoothed inside a modulated multiplier.
#[derive(Clone)]
pub enum Source {
    /// `χ_(lo,hi)` on the line, sampled by cell averages.
    Indicator { lo: f64, hi: f64 },
    /// `|x|^α exp(-|x|²)`: globally `α`-Hölder and in every `L^q`.
    HolderBump { alpha: f64 },
    Rule(PointRule),
}

impl Source {
    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        match self {
            Source::Indicator { lo, hi } => {
                if grid.dim() != 1 {
                    return Err(Error::Config("interval indicator needs a one-dimensional grid".into()));
                }
                BoxSet::new(1, vec![Rect::interval(*lo, *hi)?])?.cell_average(grid)
            }
            Source::HolderBump { alpha } => crate::grid::sample_on(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                r2.sqrt().powf(*alpha) * (-r2).exp()
            }),
            Source::Rule(rule) => crate::grid::sample_on(grid, |x| rule(x)),
        }
    }
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Indicator { lo, hi } => write!(f, "Source::Indicator({lo}, {hi})"),
            Source::HolderBump { alpha } => write!(f, "Source::HolderBump({alpha})"),
            Source::Rule(_) => write!(f, "Source::Rule"),
        }
    }
}

/// The `x`-dependent factor `a(x, t)` of a product-convolution kernel.
#[derive(Clone)]
pub enum Multiplier {
    Constant(f64),
    /// `β(x, t) · (ψ_t ∗ b)(x)`.
    Modulated { beta: Beta, psi: Profile, b: Source },
    Field(FieldRule),
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplier::Constant(c) => write!(f, "Multiplier::Constant({c})"),
            Multiplier::Modulated { beta, psi, b } => {
                write!(f, "Multiplier::Modulated {{ beta: {beta:?}, psi: {psi:?}, b: {b:?} }}")
            }
            Multiplier::Field(_) => write!(f, "Multiplier::Field"),
        }
    }
}

impl Multiplier {
    /// The multiplier sampled on every node of `grid` at scale `t`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        let n = grid.dim();
        match self {
            Multiplier::Constant(c) => Ok(vec![*c; grid.len()]),
            Multiplier::Field(rule) => Ok((0..grid.len()).map(|i| rule(t, &grid.point(i)[..n])).collect()),
            Multiplier::Modulated { beta, psi, b } => {
                let bs = b.sample(grid)?;
                let k = psi.sample_dilated(t, grid.h(), grid.cube().side())?;
                let qb = convolve(&bs, &k, Method::Auto)?;
                Ok((0..grid.len()).map(|i| beta.eval(t, &grid.point(i)[..n]) * qb.value(i)).collect())
            }
        }
    }

    /// Whether the multiplier is independent of `x` and `t`.
    pub fn is_constant(&self) -> bool {
        matches!(self, Multiplier::Constant(_))
    }
}

/// `a(x, t) Π_i k_{i,t}(x - y_i)`.
#[derive(Clone, Debug)]
pub struct ProductForm {
    pub multiplier: Multiplier,
    pub factors: Vec<Profile>,
}

/// How a kernel is evaluated.
#[derive(Clone)]
pub enum KernelForm {
    Product(ProductForm),
    /// A pointwise rule; `radius` bounds `|x - y_i|/t` on the support.
    General { rule: KernelRule, radius: f64 },
}

impl fmt::Debug for KernelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelForm::Product(p) => write!(f, "KernelForm::Product({p:?})"),
            KernelForm::General { radius, .. } => write!(f, "KernelForm::General {{ radius: {radius} }}"),
        }
    }
}

/// A multilinear kernel `θ_t` with its decay and regularity exponents.
#[derive(Clone, Debug)]
pub struct MLKernelSpec {
    pub m: usize,
    pub n: usize,
    /// `N` in the size bound.
    pub decay: f64,
    /// `γ` in the regularity bound.
    pub gamma: f64,
    pub form: KernelForm,
    /// The kernel is `Ψ_t` for a fixed `Ψ`, independent of `t` otherwise.
    pub t_constant: bool,
}

impl MLKernelSpec {
    pub fn new(m: usize, n: usize, decay: f64, gamma: f64, form: KernelForm, t_constant: bool) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("arity must be at least one".into()));
        }
        if n != 1 && n != 2 {
            return Err(Error::Config(format!("dimension {n} not in {{1, 2}}")));
        }
        if !(decay > n as f64) {
            return Err(Error::Parameter(format!("decay N = {decay} must exceed n = {n}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Parameter(format!("Hölder exponent γ = {gamma} not in (0, 1]")));
        }
        if let KernelForm::Product(p) = &form {
            if p.factors.len() != m {
                return Err(Error::Config(format!("{} factors for arity {m}", p.factors.len())));
            }
            if p.factors.iter().any(|k| k.dim() != n) {
                return Err(Error::Config("factor dimension differs from the kernel dimension".into()));
            }
            if let Multiplier::Modulated { psi, .. } = &p.multiplier {
                if psi.dim() != n {
                    return Err(Error::Config("multiplier kernel dimension differs from the kernel dimension".into()));
                }
            }
        }
        Ok(MLKernelSpec { m, n, decay, gamma, form, t_constant })
    }

    /// `θ_t(x, y) = ψ_t(x - y)`, a linear convolution operator.
    pub fn convolution(psi: Profile, decay: f64, gamma: f64) -> Result<Self> {
        let n = psi.dim();
        MLKernelSpec::new(
            1,
            n,
            decay,
            gamma,
            KernelForm::Product(ProductForm { multiplier: Multiplier::Constant(1.0), factors: vec![psi] }),
            true,
        )
    }

    /// `θ_t = Π_i k_i,t(x - y_i)` with a constant multiplier.
    pub fn product_convolution(c: f64, factors: Vec<Profile>, decay: f64, gamma: f64) -> Result<Self> {
        let m = factors.len();
        let n = factors.first().map(Profile::dim).unwrap_or(1);
        MLKernelSpec::new(
            m,
            n,
            decay,
            gamma,
            KernelForm::Product(ProductForm { multiplier: Multiplier::Constant(c), factors }),
            true,
        )
    }

    /// `(ψ_t ∗ χ_(0,1))(x) Π_i φ_t(x - y_i)` with the jump kernel `ψ`.
    pub fn ex38(m: usize) -> Result<Self> {
        MLKernelSpec::new(
            m,
            1,
            2.0,
            1.0,
            KernelForm::Product(ProductForm {
                multiplier: Multiplier::Modulated {
                    beta: Beta::One,
                    psi: Profile::Jump,
                    b: Source::Indicator { lo: 0.0, hi: 1.0 },
                },
                factors: vec![Profile::Bump { n: 1 }; m],
            }),
            false,
        )
    }

    /// `β(x,t)(ψ_t ∗ b)(x) Π_i φ_t(x - y_i)` with `b = |x|^α e^{-|x|²}` and
    /// `ψ` the smooth mean-zero kernel.
    pub fn ex37(m: usize, n: usize, alpha: f64, beta: Beta) -> Result<Self> {
        MLKernelSpec::new(
            m,
            n,
            4.0,
            1.0,
            KernelForm::Product(ProductForm {
                multiplier: Multiplier::Modulated { beta, psi: Profile::Psi { n }, b: Source::HolderBump { alpha } },
                factors: vec![Profile::Bump { n }; m],
            }),
            false,
        )
    }

    pub fn general(m: usize, n: usize, decay: f64, gamma: f64, radius: f64, rule: KernelRule) -> Result<Self> {
        MLKernelSpec::new(m, n, decay, gamma, KernelForm::General { rule, radius }, false)
    }

    pub fn product(&self) -> Option<&ProductForm> {
        match &self.form {
            KernelForm::Product(p) => Some(p),
            KernelForm::General { .. } => None,
        }
    }

    /// `|x - y_i| / t` beyond which the kernel is negligible.
    pub fn reach(&self) -> f64 {
        match &self.form {
            KernelForm::Product(p) => p.factors.iter().map(Profile::effective_radius).fold(0.0, f64::max),
            KernelForm::General { radius, .. } => *radius,
        }
    }

    /// The same kernel expressed as a pointwise rule, lattice slices included.
    pub fn as_general(&self) -> Result<MLKernelSpec> {
        let p = self.product().ok_or_else(|| Error::Config("kernel is already a pointwise rule".into()))?;
        if !p.multiplier.is_constant() {
            return Err(Error::Config("only constant multipliers have a closed pointwise rule".into()));
        }
        let c = match p.multiplier {
            Multiplier::Constant(c) => c,
            _ => unreachable!(),
        };
        let factors = p.factors.clone();
        let rule: KernelRule = Arc::new(move |t, x, ys| {
            let mut v = c;
            for (k, y) in factors.iter().zip(ys) {
                let d: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
                v *= k.eval_dilated(t, &d);
            }
            v
        });
        MLKernelSpec::general(self.m, self.n, self.decay, self.gamma, self.reach(), rule)
    }
}

/// `θ_t` frozen at one scale on one grid.
///
/// Product kernels keep the multiplier at every node and each factor on the
/// lattice, so lattice evaluation reproduces the convolution path exactly.
pub struct KernelSlice<'a> {
    spec: &'a MLKernelSpec,
    grid: Grid,
    t: f64,
    multiplier: Option<Vec<f64>>,
    factors: Vec<SampledFunction>,
}

impl<'a> KernelSlice<'a> {
    pub fn new(spec: &'a MLKernelSpec, grid: &Grid, t: f64) -> Result<Self> {
        if grid.dim() != spec.n {
            return Err(Error::Config("grid dimension differs from the kernel dimension".into()));
        }
        let (multiplier, factors) = match &spec.form {
            KernelForm::Product(p) => {
                let mult = p.multiplier.sample(grid, t)?;
                let diam = grid.cube().side();
                let factors = p
                    .factors
                    .iter()
                    .map(|k| k.sample_dilated(t, grid.h(), diam))
                    .collect::<Result<Vec<_>>>()?;
                (Some(mult), factors)
            }
            KernelForm::General { .. } => (None, Vec::new()),
        };
        Ok(KernelSlice { spec, grid: grid.clone(), t, multiplier, factors })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn multiplier(&self) -> Option<&[f64]> {
        self.multiplier.as_deref()
    }

    /// Lattice-sampled factor kernels (product form only).
    pub fn factors(&self) -> &[SampledFunction] {
        &self.factors
    }

    /// `θ_t(x, y⃗)` with `x` and every `y_i` grid nodes.
    pub fn eval_nodes(&self, x: usize, ys: &[usize]) -> f64 {
        let n = self.spec.n;
        let px = self.grid.point(x);
        match &self.spec.form {
            KernelForm::Product(_) => {
                let mut v = self.multiplier.as_ref().expect("product slice")[x];
                for (k, &y) in self.factors.iter().zip(ys) {
                    let py = self.grid.point(y);
                    let d = [px[0] - py[0], px[1] - py[1]];
                    match k.grid().node_at(&d[..n]) {
                        Some(i) => v *= k.value(i),
                        None => return 0.0,
                    }
                }
                v
            }
            KernelForm::General { rule, .. } => {
                let pts: Vec<[f64; 2]> = ys.iter().map(|&y| self.grid.point(y)).collect();
                let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..n]).collect();
                rule(self.t, &px[..n], &refs)
            }
        }
    }

    /// `θ_t(x, y⃗)` with `x` a grid node and arbitrary `y_i`; factors are
    /// evaluated pointwise.
    pub fn eval_point(&self, x: usize, ys: &[&[f64]]) -> f64 {
        let n = self.spec.n;
        let px = self.grid.point(x);
        match &self.spec.form {
            KernelForm::Product(p) => {
                let mut v = self.multiplier.as_ref().expect("product slice")[x];
                for (k, y) in p.factors.iter().zip(ys) {
                    let d = [px[0] - y[0], if n == 2 { px[1] - y[1] } else { 0.0 }];
                    v *= k.eval_dilated(self.t, &d[..n]);
                }
                v
            }
            KernelForm::General { rule, .. } => rule(self.t, &px[..n], ys),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_on, Cube};

    #[test]
    fn majorant_examples() {
        assert_eq!(majorant_eval(2.0, 1, 0.5, &[0.0]).unwrap(), 2.0);
        assert_eq!(majorant_eval(2.0, 1, 1.0, &[1.0]).unwrap(), 0.25);
        assert!(majorant_eval(1.0, 1, 1.0, &[0.0]).is_err());
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let v = majorant_eval(3.0, 2, 0.7, &[0.1 * i as f64, 0.0]).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn derived_exponent_examples() {
        let e = derived_exponents(2.0, 1.0, 1).unwrap();
        assert!((e.eta - 1.0 / 6.0).abs() < 1e-15);
        assert!((e.gamma_prime - 1.0 / 6.0).abs() < 1e-15);
        assert!((e.n_prime - 1.5).abs() < 1e-15);
        let e = derived_exponents(3.0, 1.0, 1).unwrap();
        assert!((e.eta - 0.25).abs() < 1e-15 && (e.n_prime - 2.0).abs() < 1e-15);
        assert!(derived_exponents(1.0, 1.0, 1).is_err());
        assert!(derived_exponents(2.0, 1.5, 1).is_err());
        assert!(derived_exponents(2.0, 0.0, 1).is_err());
    }

    /// Transforms computed by quadrature of each profile, independent of the
    /// closed form used to fix the sign.
    #[test]
    fn factorisation_holds_with_negative_sign() {
        for n in [1usize, 2] {
            let fam = derived_family(&Profile::Bump { n }).unwrap();
            let h = if n == 1 { 1.0 / 512.0 } else { 1.0 / 64.0 };
            let side = 4.0;
            let g = Grid::new(Cube::new(vec![-2.0; n], side).unwrap(), h).unwrap();
            let samp = |p: &Profile| sample_on(&g, |x| p.eval(x)).unwrap();
            let psi = samp(&fam.psi);
            let xis: Vec<Vec<f64>> = if n == 1 {
                vec![vec![0.5], vec![1.3], vec![2.7], vec![-4.0]]
            } else {
                vec![vec![0.5, 1.0], vec![-2.0, 1.5], vec![3.0, 0.0]]
            };
            for xi in &xis {
                let lhs: Complex64 = (0..n)
                    .map(|k| samp(&fam.psi1[k]).transform_at(xi) * samp(&fam.psi2[k]).transform_at(xi))
                    .sum();
                let rhs = psi.transform_at(xi);
                assert!((lhs - rhs * fam.sign).norm() < 1e-6, "n={n} ξ={xi:?}: {lhs} vs {rhs}");
                assert!((lhs - rhs).norm() > 1e-3 * rhs.norm());
            }
        }
    }

    #[test]
    fn jump_transform_matches_sampled_kernel() {
        let h = 1.0 / 1024.0;
        let k = ex38_psi().sample_dilated(1.0, h, 2.0).unwrap();
        let mut worst = 0.0f64;
        let mut xi = -20.0;
        while xi <= 20.0 {
            let d = (k.transform_at(&[xi]) - ex38_psihat(xi)).norm();
            worst = worst.max(d);
            xi += 0.05;
        }
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn spec_invariants_are_enforced() {
        assert!(MLKernelSpec::convolution(Profile::Bump { n: 1 }, 1.0, 1.0).is_err());
        assert!(MLKernelSpec::convolution(Profile::Bump { n: 1 }, 2.0, 0.0).is_err());
        assert!(MLKernelSpec::ex38(2).is_ok());
    }

    #[test]
    fn product_and_general_expansions_agree_on_the_lattice() {
        let spec = MLKernelSpec::product_convolution(1.5, vec![Profile::Bump { n: 1 }, Profile::Psi { n: 1 }], 3.0, 1.0).unwrap();
        let gen = spec.as_general().unwrap();
        let grid = Grid::interval(-1.0, 1.0, 1.0 / 32.0).unwrap();
        let t = 0.3;
        let a = KernelSlice::new(&spec, &grid, t).unwrap();
        let b = KernelSlice::new(&gen, &grid, t).unwrap();
        for (x, y1, y2) in [(32, 30, 35), (10, 12, 7), (40, 41, 44)] {
            let ya = [grid.point(y1)[0]];
            let yb = [grid.point(y2)[0]];
            let pa = a.eval_point(x, &[&ya, &yb]);
            let pb = b.eval_point(x, &[&ya, &yb]);
            assert!((pa - pb).abs() < 1e-12 * pa.abs().max(1.0));
        }
    }
}
