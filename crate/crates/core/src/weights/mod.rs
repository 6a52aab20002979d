//! Weights, the `A_p` characteristic on dyadic families, weighted norms and
//! the Calderón–Zygmund selection of cubes.
//!
//! Every norm takes a measure density directly. For the weighted space
//! `L^p(w^p)` pass `density = w^p`; [`WeightFn::density_for`] does the
//! conversion.

mod cz;

pub use cz::{cz_check, cz_decompose, CzCheck};

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{Cube, CubeFamily, Grid, Mask, SampledFunction};
use crate::kernels::PointRule;
use crate::quad;
use crate::{Error, Result};

/// The shape of a weight; the overall positive factor is kept separately.
#[derive(Clone)]
pub enum WeightShape {
    Constant,
    /// `|x|^a`.
    Power { a: f64 },
    Custom { tag: String, rule: PointRule },
}

impl fmt::Debug for WeightShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightShape::Constant => write!(f, "Constant"),
            WeightShape::Power { a } => write!(f, "Power({a})"),
            WeightShape::Custom { tag, .. } => write!(f, "Custom({tag})"),
        }
    }
}

/// A nonnegative weight `c · shape(x)` on `ℝ^n`, `n ∈ {1, 2}`.
#[derive(Clone, Debug)]
pub struct WeightFn {
    n: usize,
    scale: f64,
    shape: WeightShape,
}

/// Weight entries of a description file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightEntry {
    Constant {
        #[serde(default = "unit")]
        value: f64,
    },
    Power {
        a: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl WeightEntry {
    pub fn build(&self, n: usize) -> Result<WeightFn> {
        match self {
            WeightEntry::Constant { value } => Ok(WeightFn::constant(n)?.scaled(*value)),
            WeightEntry::Power { a } => WeightFn::power(n, *a),
        }
    }
}

impl WeightFn {
    pub fn constant(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(WeightFn { n, scale: 1.0, shape: WeightShape::Constant })
    }

    /// `|x|^a`, locally integrable for `a > -n`.
    pub fn power(n: usize, a: f64) -> Result<Self> {
        check_dim(n)?;
        if !(a > -(n as f64)) || !a.is_finite() {
            return Err(Error::Parameter(format!("|x|^{a} is not locally integrable in dimension {n}")));
        }
        Ok(WeightFn { n, scale: 1.0, shape: WeightShape::Power { a } })
    }

    pub fn custom(n: usize, tag: &str, rule: PointRule) -> Result<Self> {
        check_dim(n)?;
        Ok(WeightFn { n, scale: 1.0, shape: WeightShape::Custom { tag: tag.to_string(), rule } })
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &WeightShape {
        &self.shape
    }

    pub fn tag(&self) -> String {
        match &self.shape {
            WeightShape::Constant => format!("constant({})", self.scale),
            WeightShape::Power { a } => format!("power(a = {a})"),
            WeightShape::Custom { tag, .. } => tag.clone(),
        }
    }

    /// Whether `|x|^a` lies in `A_p`: `-n < a < n(p - 1)`.
    pub fn in_ap(&self, p: f64) -> Option<bool> {
        let n = self.n as f64;
        match self.shape {
            WeightShape::Constant => Some(true),
            WeightShape::Power { a } => Some(a > -n && a < n * (p - 1.0)),
            WeightShape::Custom { .. } => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.scale * self.shape_eval(x)
    }

    fn shape_eval(&self, x: &[f64]) -> f64 {
        match &self.shape {
            WeightShape::Constant => 1.0,
            WeightShape::Power { a } => {
                let r: f64 = x[..self.n].iter().map(|v| v * v).sum::<f64>().sqrt();
                r.powf(*a)
            }
            WeightShape::Custom { rule, .. } => rule(x),
        }
    }

    /// `w^e`.
    pub fn pow(&self, e: f64) -> WeightFn {
        let shape = match &self.shape {
            WeightShape::Constant => WeightShape::Constant,
            WeightShape::Power { a } => WeightShape::Power { a: a * e },
            WeightShape::Custom { tag, rule } => {
                let rule = rule.clone();
                WeightShape::Custom { tag: format!("({tag})^{e}"), rule: Arc::new(move |x| rule(x).powf(e)) }
            }
        };
        WeightFn { n: self.n, scale: self.scale.powf(e), shape }
    }

    /// The density of `L^p(w^p)`, i.e. `w^p`.
    pub fn density_for(&self, p: f64) -> WeightFn {
        self.pow(p)
    }

    /// The weight whose `p`-th power is this density.
    pub fn weight_of_density(&self, p: f64) -> WeightFn {
        self.pow(1.0 / p)
    }

    /// `∫_R shape` over the rectangle `[lo, hi]`.
    fn shape_integral(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match (&self.shape, self.n) {
            (WeightShape::Constant, _) => (0..self.n).map(|a| hi[a] - lo[a]).product(),
            (WeightShape::Power { a }, 1) => {
                let prim = |x: f64| x.signum() * x.abs().powf(a + 1.0) / (a + 1.0);
                prim(hi[0]) - prim(lo[0])
            }
            (WeightShape::Power { a }, _) => {
                let s = |x: f64, y: f64| x.signum() * y.signum() * power_corner_integral(*a, x.abs(), y.abs());
                s(hi[0], hi[1]) - s(lo[0], hi[1]) - s(hi[0], lo[1]) + s(lo[0], lo[1])
            }
            (WeightShape::Custom { rule, .. }, 1) => {
                let f = |x: f64| rule(&[x]);
                if lo[0] < 0.0 && hi[0] > 0.0 {
                    quad::tanh_sinh(f, lo[0], 0.0, 1e-13) + quad::tanh_sinh(f, 0.0, hi[0], 1e-13)
                } else {
                    quad::tanh_sinh(f, lo[0], hi[0], 1e-13)
                }
            }
            (WeightShape::Custom { rule, .. }, _) => {
                let (xs, ws) = quad::gauss_legendre(32);
                let (cx, dx) = (0.5 * (lo[0] + hi[0]), 0.5 * (hi[0] - lo[0]));
                let (cy, dy) = (0.5 * (lo[1] + hi[1]), 0.5 * (hi[1] - lo[1]));
                let mut s = 0.0;
                for (u, wu) in xs.iter().zip(&ws) {
                    for (v, wv) in xs.iter().zip(&ws) {
                        s += wu * wv * rule(&[cx + dx * u, cy + dy * v]);
                    }
                }
                s * dx * dy
            }
        }
    }

    pub fn cube_integral(&self, q: &Cube) -> f64 {
        let hi: Vec<f64> = (0..q.dim()).map(|a| q.upper(a)).collect();
        self.scale * self.shape_integral(q.corner(), &hi)
    }

    pub fn cube_average(&self, q: &Cube) -> f64 {
        self.cube_integral(q) / q.volume()
    }

    /// Cell averages of the weight around each node, so that integrable
    /// singularities stay finite on the grid.
    pub fn density_on(&self, grid: &Grid) -> Result<SampledFunction> {
        if grid.dim() != self.n {
            return Err(Error::Config("weight and grid differ in dimension".into()));
        }
        let half = 0.5 * grid.h();
        let vol = grid.cell_volume();
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let p = grid.point(i);
                let lo: Vec<f64> = (0..self.n).map(|a| p[a] - half).collect();
                let hi: Vec<f64> = (0..self.n).map(|a| p[a] + half).collect();
                self.scale * self.shape_integral(&lo, &hi) / vol
            })
            .collect();
        let f = SampledFunction::new(grid.clone(), values)
            .map_err(|_| Error::DegenerateWeight(format!("{} is not locally integrable on the grid", self.tag())))?;
        if f.values().iter().any(|v| *v < 0.0) {
            return Err(Error::DegenerateWeight(format!("{} takes negative values", self.tag())));
        }
        Ok(f)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("dimension {n} not in {{1, 2}}")))
    }
}

/// `∫_0^X ∫_0^Y (x² + y²)^{a/2} dy dx` for `X, Y ≥ 0`, `a > -2`, in polar
/// coordinates split along the diagonal of the rectangle.
fn power_corner_integral(a: f64, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let theta0 = y.atan2(x);
    let sec = |t: f64| t.cos().powf(-(a + 2.0));
    let i1 = quad::adaptive(sec, 0.0, theta0, 1e-15);
    let i2 = quad::adaptive(sec, 0.0, FRAC_PI_2 - theta0, 1e-15);
    (x.powf(a + 2.0) * i1 + y.powf(a + 2.0) * i2) / (a + 2.0)
}

/// A sampled lower bound for `[w]_{A_p}` and the cube attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApEstimate {
    pub p: f64,
    pub value: f64,
    pub family: String,
    pub cube: Cube,
}

/// `max_Q (avg_Q w)(avg_Q w^{1-p'})^{p-1}` over the family.
///
/// The overall scale of `w` cancels in the product and is dropped, so
/// `w` and `c·w` give bitwise identical estimates.
pub fn ap_constant(w: &WeightFn, p: f64, family: &CubeFamily) -> Result<ApEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("A_p needs 1 < p < ∞, got {p}")));
    }
    if w.dim() != family.root().dim() {
        return Err(Error::Config("weight and family differ in dimension".into()));
    }
    let shape = WeightFn { scale: 1.0, ..w.clone() };
    let dual = shape.pow(1.0 - p / (p - 1.0));
    let cubes = family.cubes();
    let values: Vec<Result<f64>> = cubes
        .par_iter()
        .map(|q| {
            let aw = shape.cube_average(q);
            let ad = dual.cube_average(q);
            if !(aw > 0.0) || !(ad > 0.0) {
                return Err(Error::DegenerateWeight(format!("zero average of {} on {q:?}", w.tag())));
            }
            Ok(aw * ad.powf(p - 1.0))
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(ApEstimate { p, value: best.0, family: family.describe(), cube: cubes[best.1].clone() })
}

/// `(∫ |f|^p · density)^{1/p}` over the masked nodes; a quasi-norm for `p < 1`.
pub fn weighted_lp_norm(f: &SampledFunction, density: &SampledFunction, p: f64, mask: &Mask) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("exponent must be positive, got {p}")));
    }
    if f.grid() != density.grid() {
        return Err(Error::Config("function and density live on different grids".into()));
    }
    let g = f.grid();
    let s: f64 = mask.indices().map(|i| g.trapezoid_weight(i) * f.value(i).abs().powf(p) * density.value(i)).sum();
    Ok(s.powf(1.0 / p))
}

/// `1/p = Σ 1/p_i`.
pub fn holder_index(ps: &[f64]) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::Parameter("no exponents given".into()));
    }
    if let Some(p) = ps.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
        return Err(Error::Parameter(format!("exponent {p} not in (1, ∞)")));
    }
    Ok(1.0 / ps.iter().map(|p| 1.0 / p).sum::<f64>())
}

/// Norms along the chain `(d + |x - x_0|)^{-1} ≤ d^{-1} Mχ_B(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayNormReport {
    /// `‖(d + |x - x_0|)^{-1}‖_{L^p(w)}` over the whole line.
    pub norm: f64,
    /// Contribution of `|x - x_0| ≤ L` and the computed remainder.
    pub inner: f64,
    pub tail: f64,
    /// Closed-form bound on the remainder.
    pub tail_bound: f64,
    /// `‖χ_B‖_{L^p(w)}`, `B = (x_0 - d, x_0 + d)`.
    pub ball_norm: f64,
    /// `‖Mχ_B‖_{L^p(w)}` with the uncentred maximal function.
    pub maximal_norm: f64,
    /// `norm / (‖χ_B‖ / d)`.
    pub ratio_ball: f64,
    /// `norm / (‖Mχ_B‖ / d)`, at most one by the pointwise chain.
    pub ratio_maximal: f64,
}

/// The weighted norm of `(d + |x - x_0|)^{-1}` on the line, for a density
/// `w` in the power class.
pub fn lemma44_check(w: &WeightFn, p: f64, x0: f64, d: f64) -> Result<DecayNormReport> {
    if w.dim() != 1 {
        return Err(Error::Config("the decay norm is implemented on the line".into()));
    }
    if !(p > 1.0) || !(d > 0.0) {
        return Err(Error::Parameter(format!("need p > 1 and d > 0, got p = {p}, d = {d}")));
    }
    let a = match w.shape {
        WeightShape::Constant => 0.0,
        WeightShape::Power { a } => a,
        WeightShape::Custom { .. } => return Err(Error::Config("decay norm needs a power or constant weight".into())),
    };
    if w.in_ap(p) != Some(true) {
        return Err(Error::Parameter(format!("{} is not in A_{p}", w.tag())));
    }
    let big_l = 64.0 * (d + x0.abs());
    let weight = |x: f64| w.eval(&[x]);
    let integrand = |x: f64| (d + (x - x0).abs()).powf(-p) * weight(x);
    // breakpoints where the integrand is not smooth
    let mut cuts = vec![x0 - big_l, x0 + big_l, x0, 0.0];
    cuts.retain(|c| *c >= x0 - big_l && *c <= x0 + big_l);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = |f: &dyn Fn(f64) -> f64, cuts: &[f64]| -> f64 {
        cuts.windows(2).map(|c| quad::tanh_sinh(f, c[0], c[1], 1e-14)).sum()
    };
    let inner = pieces(&integrand, &cuts);
    let tail = quad::semi_infinite(integrand, x0 + big_l, 1e-14) + quad::semi_infinite(|s| integrand(-s), big_l - x0, 1e-14);
    let tail_bound = w.scale * 2f64.powf(1.0 + a.abs()) * big_l.powf(a - p + 1.0) / (p - 1.0 - a);
    let norm = (inner + tail).powf(1.0 / p);

    let mut ball_cuts = vec![x0 - d, x0 + d, 0.0];
    ball_cuts.retain(|c| *c >= x0 - d && *c <= x0 + d);
    ball_cuts.sort_by(f64::total_cmp);
    ball_cuts.dedup();
    let ball_norm = pieces(&weight, &ball_cuts).powf(1.0 / p);

    // Mχ_B = 1 on B and 2d/(d + |x - x_0|) outside
    let mchi = |x: f64| {
        let r = (x - x0).abs();
        if r <= d {
            1.0
        } else {
            2.0 * d / (d + r)
        }
    };
    let mint = |x: f64| mchi(x).powf(p) * weight(x);
    let mut mcuts = cuts.clone();
    mcuts.extend([x0 - d, x0 + d]);
    mcuts.sort_by(f64::total_cmp);
    mcuts.dedup();
    let m_inner = pieces(&mint, &mcuts);
    let m_tail = quad::semi_infinite(mint, x0 + big_l, 1e-14) + quad::semi_infinite(|s| mint(-s), big_l - x0, 1e-14);
    let maximal_norm = (m_inner + m_tail).powf(1.0 / p);

    Ok(DecayNormReport {
        norm,
        inner,
        tail,
        tail_bound,
        ball_norm,
        maximal_norm,
        ratio_ball: norm * d / ball_norm,
        ratio_maximal: norm * d / maximal_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;

    fn fam(depth: u32) -> CubeFamily {
        CubeFamily::dyadic(Cube::interval(-8.0, 8.0).unwrap(), 0, depth).unwrap()
    }

    #[test]
    fn constant_weight_has_unit_characteristic() {
        for p in [1.5, 2.0, 4.0] {
            assert_eq!(ap_constant(&WeightFn::constant(1).unwrap(), p, &fam(6)).unwrap().value, 1.0);
        }
    }

    #[test]
    fn scale_invariance_is_exact() {
        let w = WeightFn::power(1, 0.5).unwrap();
        let a = ap_constant(&w, 2.0, &fam(8)).unwrap();
        let b = ap_constant(&w.clone().scaled(37.5), 2.0, &fam(8)).unwrap();
        assert_eq!(a, b);
    }

    /// Brute-force dyadic scan with a midpoint rule on each cube.
    #[test]
    fn power_weight_matches_brute_force_scan() {
        let w = WeightFn::power(1, 0.5).unwrap();
        let est = ap_constant(&w, 2.0, &fam(6)).unwrap();
        let mut brute = 0.0f64;
        for q in fam(6).cubes() {
            let k = 20000;
            let hh = q.side() / k as f64;
            let (mut s1, mut s2) = (0.0, 0.0);
            for i in 0..k {
                let x = q.lower(0) + (i as f64 + 0.5) * hh;
                s1 += x.abs().sqrt();
                s2 += 1.0 / x.abs().sqrt();
            }
            brute = brute.max(s1 / k as f64 * s2 / k as f64);
        }
        assert!((est.value - brute).abs() < 5e-3 * brute, "{} vs {brute}", est.value);
    }

    #[test]
    fn power_weight_stabilises_with_depth() {
        let w = WeightFn::power(1, 0.5).unwrap();
        let v: Vec<f64> = [10, 12, 14].iter().map(|&d| ap_constant(&w, 2.0, &fam(d)).unwrap().value).collect();
        assert!(v[0] <= v[1] && v[1] <= v[2]);
        assert!((v[2] - v[1]) / v[1] < 0.05);
    }

    #[test]
    fn duality_identity() {
        let p = 3.0;
        let pp = p / (p - 1.0);
        let w = WeightFn::power(1, 0.7).unwrap();
        let a = ap_constant(&w, p, &fam(8)).unwrap().value;
        let b = ap_constant(&w.pow(1.0 - pp), pp, &fam(8)).unwrap().value;
        assert!((b - a.powf(pp - 1.0)).abs() < 1e-12 * b);
    }

    #[test]
    fn two_dimensional_power_integrals() {
        let w = WeightFn::power(2, -1.0).unwrap();
        // ∫_{|x|<1} |x|^{-1} = 2π, and the unit square [0,1]^2 integral
        // equals 2 asinh(1)
        let q = Cube::new(vec![0.0, 0.0], 1.0).unwrap();
        assert!((w.cube_integral(&q) - 2.0 * 1f64.asinh()).abs() < 1e-12);
        let q = Cube::new(vec![-1.0, -1.0], 2.0).unwrap();
        assert!((w.cube_integral(&q) - 8.0 * 1f64.asinh()).abs() < 1e-12);
        let est = ap_constant(&w, 2.0, &CubeFamily::dyadic(Cube::new(vec![-1.0, -1.0], 2.0).unwrap(), 0, 5).unwrap()).unwrap();
        assert!(est.value > 1.0 && est.value.is_finite());
    }

    #[test]
    fn holder_index_examples() {
        assert_eq!(holder_index(&[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(holder_index(&[4.0, 4.0]).unwrap(), 2.0);
        assert!((holder_index(&[4.0 / 3.0, 4.0 / 3.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(holder_index(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        let c = Cube::interval(0.0, 1.0).unwrap();
        let one = sample(&c, 1.0 / 64.0, |_| 1.0).unwrap();
        let m = Mask::all(one.grid().len());
        assert!((weighted_lp_norm(&one, &one, 2.0, &m).unwrap() - 1.0).abs() < 1e-14);
        let f = sample(&c, 1.0 / 4096.0, |x| x[0] * x[0] + 0.1).unwrap();
        let dens = sample(&c, 1.0 / 4096.0, |x| 1.0 + x[0]).unwrap();
        let m = Mask::all(f.grid().len());
        let v = weighted_lp_norm(&f, &dens, 2.0 / 3.0, &m).unwrap();
        let exact = quad::adaptive(|x: f64| (x * x + 0.1).powf(2.0 / 3.0) * (1.0 + x), 0.0, 1.0, 1e-15).powf(1.5);
        assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
        for p in [0.5, 1.0, 3.0] {
            let a = weighted_lp_norm(&f.scaled(-2.5), &dens, p, &m).unwrap();
            assert!((a - 2.5 * weighted_lp_norm(&f, &dens, p, &m).unwrap()).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn decay_norm_for_the_unit_weight() {
        let r = lemma44_check(&WeightFn::constant(1).unwrap(), 2.0, 0.0, 1.0).unwrap();
        assert!((r.norm - 2f64.sqrt()).abs() < 1e-10, "{}", r.norm);
        assert!(r.tail <= r.tail_bound);
        assert!(r.ratio_maximal <= 1.0);
        // ‖(d + |x|)^{-1}‖_2 = sqrt(2/d) scales like d^{1/p - 1}
        let r4 = lemma44_check(&WeightFn::constant(1).unwrap(), 2.0, 0.0, 4.0).unwrap();
        assert!((r4.norm / r.norm - 4f64.powf(-0.5)).abs() < 1e-10);
    }

    #[test]
    fn decay_norm_for_power_weights() {
        for (a, p) in [(0.5, 2.0), (-0.5, 2.0), (1.5, 4.0)] {
            let r = lemma44_check(&WeightFn::power(1, a).unwrap(), p, 0.7, 0.5).unwrap();
            assert!(r.norm.is_finite() && r.tail <= r.tail_bound, "{r:?}");
            assert!(r.ratio_maximal <= 1.0 + 1e-12);
        }
        assert!(lemma44_check(&WeightFn::power(1, 1.5).unwrap(), 2.0, 0.0, 1.0).is_err());
    }
}
