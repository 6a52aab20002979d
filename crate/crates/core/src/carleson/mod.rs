//! Carleson, strong Carleson and two-cube constants of densities
//! `dμ = F(x,t) dτ(t) dx`, tents with their weighted bound, and the closed
//! constant formulas of the weighted theory.
//!
//! All suprema run over finite cube families and grid nodes. Reports keep
//! every per-cube value and name the cube (and node) attaining the maximum.


use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::grid::CubeFamily;

use crate::grid::{BoxSet, Cube, Grid, Mask, SampledFunction, ScaleField, ScaleGrid};
use crate::kernels::Profile;
use crate::operators::{apply_p, Strategy, ThetaOperator};
use crate::weights::{ap_constant, weighted_lp_norm, WeightFn};
use crate::{Error, Result};

/// Relative `x`-variation tolerated in `Θ_t(1)` of a convolution kernel.
const X_CONSTANT_TOL: f64 = 1e-8;

/// A nonnegative density `F(x,t)` on grid nodes and scale nodes.
#[derive(Clone, Debug)]
pub struct CarlesonField {
    field: ScaleField,
    guard: Mask,
}

impl CarlesonField {
    /// `guard` marks the nodes where `F` is meaningful.
    pub fn new(field: ScaleField, guard: Mask) -> Result<Self> {
        let grid = field.field(0).grid();
        if guard.len() != grid.len() {
            return Err(Error::Config("guard mask does not match the grid".into()));
        }
        if guard.count() == 0 {
            return Err(Error::DegenerateDomain("guard mask keeps no nodes".into()));
        }
        if field.fields().iter().any(|f| f.values().iter().any(|v| *v < 0.0)) {
            return Err(Error::Contract("Carleson density takes negative values".into()));
        }
        Ok(CarlesonField { field, guard })
    }

    pub fn from_rule(grid: &Grid, scales: &ScaleGrid, rule: impl Fn(&[f64], f64) -> f64 + Sync) -> Result<Self> {
        let n = grid.dim();
        let fields = scales
            .nodes()
            .par_iter()
            .map(|&t| SampledFunction::new(grid.clone(), (0..grid.len()).map(|i| rule(&grid.point(i)[..n], t)).collect()))
            .collect::<Result<Vec<_>>>()?;
        CarlesonField::new(ScaleField::new(scales.clone(), fields)?, Mask::all(grid.len()))
    }

    pub fn constant(grid: &Grid, scales: &ScaleGrid, c: f64) -> Result<Self> {
        CarlesonField::from_rule(grid, scales, |_, _| c)
    }

    pub fn grid(&self) -> &Grid {
        self.field.field(0).grid()
    }

    pub fn scales(&self) -> &ScaleGrid {
        self.field.scales()
    }

    pub fn field(&self) -> &ScaleField {
        &self.field
    }

    pub fn guard(&self) -> &Mask {
        &self.guard
    }

    /// `F(·, t_j)`.
    pub fn slice(&self, j: usize) -> &SampledFunction {
        self.field.field(j)
    }

    /// `∫_{t ≤ ell} F(x, t) dτ(t)` at every node.
    pub fn column_upto(&self, ell: f64) -> Vec<f64> {
        self.column_with(&self.scales().weights_upto(ell))
    }

    fn column_with(&self, w: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid().len()];
        for (f, &wj) in self.field.fields().iter().zip(w) {
            if wj == 0.0 {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += wj * v;
            }
        }
        acc
    }

    /// `∫_{t ≤ ell} F(x, t) dτ(t)` at the node `x`.
    pub fn value_at(&self, x: &[f64], ell: f64) -> Result<f64> {
        let idx = self
            .grid()
            .node_at(x)
            .ok_or_else(|| Error::Config(format!("{x:?} is not a grid node")))?;
        if !self.guard.get(idx) {
            return Err(Error::Config(format!("{x:?} lies outside the guard band")));
        }
        let w = self.scales().weights_upto(ell);
        Ok(self.field.fields().iter().zip(&w).map(|(f, wj)| wj * f.value(idx)).sum())
    }
}

/// `F(x,t) = |Θ_t(1, …, 1)(x)|²` at every scale node.
///
/// Product kernels are evaluated exactly at every node. Pointwise rules see
/// the constant only on the grid, so their field is restricted to nodes at
/// least `reach · t_max` from the boundary.
pub fn theta_one_field(op: &ThetaOperator, scales: &ScaleGrid) -> Result<CarlesonField> {
    let fields = scales
        .nodes()
        .par_iter()
        .map(|&t| op.apply_ones(t).map(|f| f.map(|v| v * v)))
        .collect::<Result<Vec<_>>>()?;
    let guard = match op.strategy() {
        Strategy::ProductConvolution => op.guard().clone(),
        Strategy::GeneralQuadrature => op.guard().intersect(&op.guard_for(scales.t_max())?),
    };
    let convolution = op.spec().product().is_some_and(|p| p.multiplier.is_constant());
    if convolution {
        for (f, t) in fields.iter().zip(scales.nodes()) {
            let vals: Vec<f64> = guard.indices().map(|i| f.value(i)).collect();
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi - lo > X_CONSTANT_TOL * hi.abs().max(1.0) {
                return Err(Error::Numerical(format!("Θ_t(1) of a convolution kernel varies by {} at t = {t}", hi - lo)));
            }
        }
    }
    CarlesonField::new(ScaleField::new(scales.clone(), fields)?, guard)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantKind {
    Carleson,
    Strong,
    TwoCube,
}

/// One per-cube value of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub kind: ConstantKind,
    pub corner: Vec<f64>,
    pub side: f64,
    pub value: f64,
    /// Node attaining the inner supremum of a strong constant.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub point: Option<Vec<f64>>,
    /// Side of the outer cube `Q` of a two-cube pair.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outer_side: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub kind: ConstantKind,
    pub records: Vec<CubeRecord>,
    /// Maximum of the per-cube values, zero for an empty family.
    pub supremum: f64,
    /// Index into `records` of the first maximal value.
    pub attaining: Option<usize>,
}

impl CarlesonReport {
    fn from_records(kind: ConstantKind, records: Vec<CubeRecord>) -> Self {
        let mut best: Option<usize> = None;
        for (i, r) in records.iter().enumerate() {
            if best.is_none_or(|b| r.value > records[b].value) {
                best = Some(i);
            }
        }
        let supremum = best.map_or(0.0, |b| records[b].value);
        CarlesonReport { kind, records, supremum, attaining: best }
    }

    pub fn attaining_record(&self) -> Option<&CubeRecord> {
        self.attaining.map(|i| &self.records[i])
    }

    /// The largest value among cubes of side `side`.
    pub fn sup_at_side(&self, side: f64) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| (r.side - side).abs() <= 1e-12 * side)
            .map(|r| r.value)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// Nodes of `q` with trapezoid weights relative to the cube, summing to one.
fn cube_quadrature(grid: &Grid, q: &Cube, guard: &Mask) -> Result<Vec<(usize, f64)>> {
    if !grid.cube().contains_cube(q) {
        return Err(Error::Config(format!("cube {q:?} leaves the working box")));
    }
    let nodes = grid.nodes_in(q);
    if nodes.is_empty() {
        return Err(Error::Config(format!("cube {q:?} contains no grid node")));
    }
    if nodes.iter().any(|&i| !guard.get(i)) {
        return Err(Error::Config(format!("cube {q:?} leaves the guard band")));
    }
    let first = grid.multi_index(nodes[0]);
    let last = grid.multi_index(nodes[nodes.len() - 1]);
    let mut out: Vec<(usize, f64)> = nodes
        .iter()
        .map(|&i| {
            let mi = grid.multi_index(i);
            let mut w = 1.0;
            for a in 0..grid.dim() {
                if first[a] != last[a] && (mi[a] == first[a] || mi[a] == last[a]) {
                    w *= 0.5;
                }
            }
            (i, w)
        })
        .collect();
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    for (_, w) in out.iter_mut() {
        *w /= total;
    }
    Ok(out)
}

fn check_family(field: &CarlesonField, family: &CubeFamily) -> Result<()> {
    if family.root().dim() != field.grid().dim() {
        return Err(Error::Config("cube family and field differ in dimension".into()));
    }
    Ok(())
}

fn per_depth(
    field: &CarlesonField,
    family: &CubeFamily,
    kind: ConstantKind,
    reduce: impl Fn(&[f64], &Cube) -> Result<(f64, Option<Vec<f64>>)> + Sync,
) -> Result<CarlesonReport> {
    check_family(field, family)?;
    let mut records = Vec::with_capacity(family.len());
    for depth in family.depths() {
        let ell = family.side_at(depth);
        let column = field.column_upto(ell);
        let cubes = family.cubes_at(depth);
        let vals = cubes.par_iter().map(|q| reduce(&column, q)).collect::<Result<Vec<_>>>()?;
        for (q, (value, point)) in cubes.iter().zip(vals) {
            records.push(CubeRecord {
                kind,
                corner: q.corner().to_vec(),
                side: q.side(),
                value,
                point,
                outer_side: None,
            });
        }
    }
    Ok(CarlesonReport::from_records(kind, records))
}

/// `sup_Q |Q|^{-1} ∫_Q ∫_{t ≤ ℓ(Q)} F(x,t) dτ(t) dx` over the family.
pub fn carleson_constant(field: &CarlesonField, family: &CubeFamily) -> Result<CarlesonReport> {
    let grid = field.grid();
    per_depth(field, family, ConstantKind::Carleson, |column, q| {
        let quad = cube_quadrature(grid, q, field.guard())?;
        Ok((quad.iter().map(|&(i, w)| w * column[i]).sum(), None))
    })
}

/// `sup_Q sup_{x ∈ Q} ∫_{t ≤ ℓ(Q)} F(x,t) dτ(t)`, the inner supremum over
/// the guarded nodes of `Q`.
pub fn strong_carleson_constant(field: &CarlesonField, family: &CubeFamily) -> Result<CarlesonReport> {
    let grid = field.grid();
    let n = grid.dim();
    per_depth(field, family, ConstantKind::Strong, |column, q| {
        if !grid.cube().contains_cube(q) {
            return Err(Error::Config(format!("cube {q:?} leaves the working box")));
        }
        let mut best: Option<usize> = None;
        for i in grid.nodes_in(q) {
            if field.guard().get(i) && best.is_none_or(|b| column[i] > column[b]) {
                best = Some(i);
            }
        }
        let b = best.ok_or_else(|| Error::Config(format!("cube {q:?} contains no guarded node")))?;
        Ok((column[b], Some(grid.point(b)[..n].to_vec())))
    })
}

/// `sup |R|^{-1} ∫_R ∫_{ℓ(R)}^{ℓ(Q)} |Θ_t(χ_{(2R)^c}, …) - Θ_t(χ_{(2Q)^c}, …)|² dτ dx`
/// over nested pairs `R ⊂ Q`; the doubled cubes must lie in the working box.
pub fn two_cube_constant(op: &ThetaOperator, pairs: &[(Cube, Cube)], scales: &ScaleGrid) -> Result<CarlesonReport> {
    for (r, q) in pairs {
        if !q.contains_cube(r) {
            return Err(Error::Contract(format!("{r:?} is not contained in {q:?}")));
        }
    }
    let grid = op.grid();
    let n = grid.dim();
    let m = op.spec().m;
    let records = pairs
        .par_iter()
        .map(|(r, q)| {
            let quad = cube_quadrature(grid, r, op.guard())?;
            let w = scales.weights_between(r.side(), q.side());
            let r2 = BoxSet::from_cubes(n, &[r.dilate(2.0)])?;
            let q2 = BoxSet::from_cubes(n, &[q.dilate(2.0)])?;
            let mut value = 0.0;
            for (&t, &wj) in scales.nodes().iter().zip(&w) {
                if wj == 0.0 {
                    continue;
                }
                let a = op.apply_complement(t, &vec![&r2; m])?;
                let b = op.apply_complement(t, &vec![&q2; m])?;
                let s: f64 = quad
                    .iter()
                    .map(|&(i, qw)| {
                        let d = a.value(i) - b.value(i);
                        qw * d * d
                    })
                    .sum();
                value += wj * s;
            }
            Ok(CubeRecord {
                kind: ConstantKind::TwoCube,
                corner: r.corner().to_vec(),
                side: r.side(),
                value,
                point: None,
                outer_side: Some(q.side()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CarlesonReport::from_records(ConstantKind::TwoCube, records))
}

/// The tent `Ê = {(x,t) : B(x,t) ⊂ E}` over a finite union of boxes.
#[derive(Clone, Copy, Debug)]
pub struct Tent<'a> {
    set: &'a BoxSet,
}

pub fn tent(set: &BoxSet) -> Tent<'_> {
    Tent { set }
}

impl Tent<'_> {
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        t > 0.0 && self.height(x) >= t
    }

    /// Largest `t` with `(x, t)` in the tent; zero outside `E`.
    pub fn height(&self, x: &[f64]) -> f64 {
        self.set.inradius(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentCheck {
    /// `∫∫_{Ê} w(x) F(x,t) dτ dx`.
    pub lhs: f64,
    /// Strong constant times `w(E)`.
    pub rhs: f64,
    pub strong: f64,
    pub weight_mass: f64,
}

impl TentCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + tol)
    }
}

/// Both sides of `μ_w(Ê) ≤ ‖μ‖_SC w(E)` with `‖μ‖_SC` taken from `strong`.
///
/// `w` enters through its cell averages, and `w(E)` is integrated with the
/// cell-averaged indicator of `E` on the same grid.
pub fn tent_bound_check(field: &CarlesonField, w: &WeightFn, set: &BoxSet, strong: &CarlesonReport) -> Result<TentCheck> {
    if strong.kind != ConstantKind::Strong {
        return Err(Error::Config("tent bound needs a strong Carleson report".into()));
    }
    let grid = field.grid();
    if set.dim() != grid.dim() {
        return Err(Error::Config("set and field differ in dimension".into()));
    }
    let density = w.density_on(grid)?;
    let chi = set.cell_average(grid)?;
    let n = grid.dim();
    let tent = tent(set);
    let weights_at = |x: usize| -> f64 {
        let height = tent.height(&grid.point(x)[..n]);
        if height <= 0.0 {
            return 0.0;
        }
        let wt = field.scales().weights_upto(height);
        field.field().fields().iter().zip(&wt).map(|(f, wj)| wj * f.value(x)).sum()
    };
    let idx: Vec<usize> = field.guard().indices().filter(|&i| chi.value(i) > 0.0).collect();
    let terms: Vec<f64> = idx
        .par_iter()
        .map(|&i| grid.trapezoid_weight(i) * density.value(i) * weights_at(i))
        .collect();
    let lhs: f64 = terms.iter().sum();
    let weight_mass: f64 = idx.iter().map(|&i| grid.trapezoid_weight(i) * density.value(i) * chi.value(i)).sum();
    Ok(TentCheck { lhs, rhs: strong.supremum * weight_mass, strong: strong.supremum, weight_mass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRatio {
    /// `(∫∫ |φ_t ∗ f|^p w dμ)^{1/p}`.
    pub lhs: f64,
    pub strong: f64,
    pub ap: f64,
    pub f_norm: f64,
    pub ratio: f64,
}

/// `(∫∫ |φ_t ∗ f(x)|^p w(x) dμ)^{1/p} / (‖μ‖_SC^{1/p} [w]_{A_p}^{1/(p-1)} ‖f‖_{L^p(w)})`.
///
/// `[w]_{A_p}` is estimated on `ap_family`; sums run over the field's guard.
pub fn embedding_ratio(
    field: &CarlesonField,
    phi: &Profile,
    f: &SampledFunction,
    w: &WeightFn,
    p: f64,
    strong: &CarlesonReport,
    ap_family: &CubeFamily,
) -> Result<EmbeddingRatio> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("embedding needs 1 < p < ∞, got {p}")));
    }
    if strong.kind != ConstantKind::Strong {
        return Err(Error::Config("embedding ratio needs a strong Carleson report".into()));
    }
    let grid = field.grid();
    if f.grid() != grid {
        return Err(Error::Config("input does not live on the field's grid".into()));
    }
    let density = w.density_on(grid)?;
    let scales = field.scales();
    let per_scale = scales
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(j, &t)| {
            let g = apply_p(phi, t, f)?;
            let fj = field.slice(j);
            Ok(field
                .guard()
                .indices()
                .map(|i| grid.trapezoid_weight(i) * density.value(i) * g.value(i).abs().powf(p) * fj.value(i))
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let lhs = scales.integrate(&per_scale).powf(1.0 / p);
    let ap = ap_constant(w, p, ap_family)?.value;
    let f_norm = weighted_lp_norm(f, &density, p, field.guard())?;
    let ratio = if lhs == 0.0 {
        0.0
    } else {
        lhs / (strong.supremum.powf(1.0 / p) * ap.powf(1.0 / (p - 1.0)) * f_norm)
    };
    Ok(EmbeddingRatio { lhs, strong: strong.supremum, ap, f_norm, ratio })
}

fn check_exponents(ps: &[f64]) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::Config("no exponents given".into()));
    }
    if let Some(p) = ps.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
        return Err(Error::Parameter(format!("exponent {p} not in (1, ∞)")));
    }
    Ok(())
}

fn check_sc(sc: f64) -> Result<()> {
    if !(sc >= 0.0 && sc.is_finite()) {
        return Err(Error::Parameter(format!("strong Carleson constant {sc} must be finite and nonnegative")));
    }
    Ok(())
}

/// `Π_i (1 + a_i^{max(1, r_i) + max(1/2, r_i)}) + sc^{m/2} Π_i a_i^{r_i}` with
/// `a_i = [w_i^{p_i}]_{A_{p_i}}` and `r_i = p_i'/p_i = 1/(p_i - 1)`.
pub fn bound_constant_43(ap: &[f64], ps: &[f64], sc: f64) -> Result<f64> {
    check_exponents(ps)?;
    check_sc(sc)?;
    if ap.len() != ps.len() {
        return Err(Error::Config(format!("{} weight constants for {} exponents", ap.len(), ps.len())));
    }
    if let Some(a) = ap.iter().find(|a| !(**a >= 1.0 - 1e-12 && a.is_finite())) {
        return Err(Error::Parameter(format!("A_p constant {a} below one")));
    }
    let m = ps.len() as f64;
    let mut first = 1.0;
    let mut second = sc.powf(0.5 * m);
    for (&a, &p) in ap.iter().zip(ps) {
        let r = 1.0 / (p - 1.0);
        first *= 1.0 + a.powf(r.max(1.0) + r.max(0.5));
        second *= a.powf(r);
    }
    Ok(first + second)
}

/// `Π_i 2B^{max(1, r_i) + max(1/2, r_i)} + sc^{m/2} Π_i B^{r_i}` with
/// `r_i = 1/(q_i - 1)`, the dimensional constant set to one.
pub fn c0_of_b(b: f64, qs: &[f64], sc: f64) -> Result<f64> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::Parameter(format!("B = {b} must exceed one")));
    }
    check_exponents(qs)?;
    check_sc(sc)?;
    let m = qs.len() as f64;
    let mut first = 1.0;
    let mut second = sc.powf(0.5 * m);
    for &q in qs {
        let r = 1.0 / (q - 1.0);
        first *= 2.0 * b.powf(r.max(1.0) + r.max(0.5));
        second *= b.powf(r);
    }
    Ok(first + second)
}
