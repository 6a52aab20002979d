use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::grid::{sample_on, Cube, Grid, SampledFunction};
use crate::quad;
use crate::{Error, Result};

/// Tail mass allowed outside the effective radius of a non-compact profile.
pub const TAIL_EPS: f64 = 1e-8;

/// A scale-one kernel profile `ψ`; its dilates are `ψ_t(x) = t^{-n} ψ(x/t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Unit-mass `c_n exp(-1/(1-|x|²))` on the unit ball.
    Bump { n: usize },
    /// `-t d/dt (φ_t ∗ φ_t)` at `t = 1`, i.e. `∇·(x (φ∗φ)(x))`.
    Psi { n: usize },
    /// `-2 ∂_k φ`.
    Grad { n: usize, k: usize },
    /// `x_k φ(x)`.
    Moment { n: usize, k: usize },
    /// `χ_(0,1) - χ_(-1,0)` on the line.
    Jump,
    /// `χ_(lo,hi)` on the line.
    Indicator { lo: f64, hi: f64 },
    /// `(1 + |x|)^{-decay}`, the scale-one majorant.
    Majorant { n: usize, decay: f64 },
    /// `coef · inner`.
    Scaled { coef: f64, inner: Box<Profile> },
}

/// Which discrete moment a sampled dilate is corrected to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentClass {
    /// Rescaled so the discrete mass equals `mass`.
    Mass(f64),
    /// Projected to discrete mean zero.
    MeanZero,
    /// Left as sampled.
    Raw,
}

impl Profile {
    pub fn bump(n: usize) -> Result<Profile> {
        check_dim(n)?;
        Ok(Profile::Bump { n })
    }

    pub fn scaled(self, coef: f64) -> Profile {
        Profile::Scaled { coef, inner: Box::new(self) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Profile::Bump { n } | Profile::Psi { n } | Profile::Majorant { n, .. } => *n,
            Profile::Grad { n, .. } | Profile::Moment { n, .. } => *n,
            Profile::Jump | Profile::Indicator { .. } => 1,
            Profile::Scaled { inner, .. } => inner.dim(),
        }
    }

    /// Sup-norm radius outside which the profile vanishes, if compact.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Profile::Bump { .. } | Profile::Grad { .. } | Profile::Moment { .. } | Profile::Jump => Some(1.0),
            Profile::Psi { .. } => Some(2.0),
            Profile::Indicator { lo, hi } => Some(lo.abs().max(hi.abs())),
            Profile::Majorant { .. } => None,
            Profile::Scaled { inner, .. } => inner.support_radius(),
        }
    }

    /// Radius beyond which at most [`TAIL_EPS`] of the absolute mass lies.
    pub fn effective_radius(&self) -> f64 {
        match self {
            Profile::Majorant { n, decay } => {
                // ∫_{|x|>R} (1+|x|)^{-M} relative to the total is at most
                // (1+R)^{n-M} up to a polynomial factor in R; solve with margin.
                let mut r = TAIL_EPS.powf(-1.0 / (decay - *n as f64)) - 1.0;
                r *= 1.0 + *n as f64;
                r.max(1.0)
            }
            _ => self.support_radius().unwrap_or(1.0),
        }
    }

    pub fn moment_class(&self) -> MomentClass {
        match self {
            Profile::Bump { .. } => MomentClass::Mass(1.0),
            Profile::Psi { .. } | Profile::Grad { .. } => MomentClass::MeanZero,
            Profile::Moment { .. } | Profile::Jump | Profile::Indicator { .. } | Profile::Majorant { .. } => MomentClass::Raw,
            Profile::Scaled { coef, inner } => match inner.moment_class() {
                MomentClass::Mass(m) => MomentClass::Mass(coef * m),
                c => c,
            },
        }
    }

    fn piecewise_constant(&self) -> bool {
        match self {
            Profile::Jump | Profile::Indicator { .. } => true,
            Profile::Scaled { inner, .. } => inner.piecewise_constant(),
            _ => false,
        }
    }

    /// Pointwise value at scale one. Jumps take the average of both sides.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Profile::Bump { n } => bump_constant(*n) * bump_raw(norm2(x, *n)),
            Profile::Psi { n } => psi_table(*n).eval(norm(x, *n)),
            Profile::Grad { n, k } => {
                let r2 = norm2(x, *n);
                if r2 >= 1.0 {
                    return 0.0;
                }
                let s = 1.0 - r2;
                -2.0 * bump_constant(*n) * bump_raw(r2) * (-2.0 * x[*k] / (s * s))
            }
            Profile::Moment { n, k } => x[*k] * bump_constant(*n) * bump_raw(norm2(x, *n)),
            Profile::Jump => {
                let v = x[0];
                let side = |a: f64, b: f64| {
                    if v > a && v < b {
                        1.0
                    } else if v == a || v == b {
                        0.5
                    } else {
                        0.0
                    }
                };
                side(0.0, 1.0) - side(-1.0, 0.0)
            }
            Profile::Indicator { lo, hi } => {
                let v = x[0];
                if v > *lo && v < *hi {
                    1.0
                } else if v == *lo || v == *hi {
                    0.5
                } else {
                    0.0
                }
            }
            Profile::Majorant { n, decay } => (1.0 + norm(x, *n)).powf(-decay),
            Profile::Scaled { coef, inner } => coef * inner.eval(x),
        }
    }

    /// `t^{-n} ψ(z / t)`.
    pub fn eval_dilated(&self, t: f64, z: &[f64]) -> f64 {
        let n = self.dim();
        let mut y = [0.0; 2];
        for a in 0..n {
            y[a] = z[a] / t;
        }
        t.powi(-(n as i32)) * self.eval(&y[..n])
    }

    /// Average of `ψ_t` over `[a, b]` for the piecewise-constant profiles.
    fn cell_mean_dilated(&self, t: f64, a: f64, b: f64) -> f64 {
        let overlap = |lo: f64, hi: f64| ((b.min(hi * t) - a.max(lo * t)).max(0.0)) / (b - a);
        match self {
            Profile::Jump => (overlap(0.0, 1.0) - overlap(-1.0, 0.0)) / t,
            Profile::Indicator { lo, hi } => overlap(*lo, *hi) / t,
            Profile::Scaled { coef, inner } => coef * inner.cell_mean_dilated(t, a, b),
            _ => unreachable!("cell means are only used for piecewise-constant profiles"),
        }
    }

    /// Samples `ψ_t` on the lattice `hℤ^n` inside `[-Kh, Kh]^n`.
    ///
    /// `K` covers the (effective) support, capped by `max_radius`. Smooth
    /// unit-mass profiles are rescaled to discrete mass one and smooth
    /// mean-zero profiles are projected to discrete mean zero, so that the
    /// lattice operators annihilate or reproduce constants exactly.
    /// Piecewise-constant profiles are sampled by exact cell averages.
    pub fn sample_dilated(&self, t: f64, h: f64, max_radius: f64) -> Result<SampledFunction> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("scale must be positive, got {t}")));
        }
        let n = self.dim();
        let radius = (self.effective_radius() * t).min(max_radius);
        let k = ((radius / h) * (1.0 - 1e-12)).ceil().max(1.0);
        let half = k * h;
        let grid = Grid::new(Cube::new(vec![-half; n], 2.0 * half)?, h)?;
        let raw = if self.piecewise_constant() {
            sample_on(&grid, |x| self.cell_mean_dilated(t, x[0] - 0.5 * h, x[0] + 0.5 * h))?
        } else {
            sample_on(&grid, |x| self.eval_dilated(t, x))?
        };
        let cell = grid.cell_volume();
        let mass: f64 = raw.values().iter().sum::<f64>() * cell;
        match self.moment_class() {
            MomentClass::Mass(target) if !self.piecewise_constant() => {
                if mass == 0.0 {
                    return Err(Error::Kernel(format!("sampled kernel at t = {t} has zero mass")));
                }
                Ok(raw.scaled(target / mass))
            }
            MomentClass::MeanZero if !self.piecewise_constant() => {
                let bump = Profile::Bump { n }.sample_dilated(t, h, max_radius)?;
                let mut values = raw.into_values();
                // both samples are centred on the origin; align the smaller one
                let bk = bump.grid().per_axis();
                let rk = grid.per_axis();
                let off = (rk - bk) / 2;
                for (i, bv) in bump.values().iter().enumerate() {
                    let mi = bump.grid().multi_index(i);
                    let idx = grid.flat_index([mi[0] + off, mi[1] + if n == 2 { off } else { 0 }]);
                    values[idx] -= mass * bv;
                }
                SampledFunction::new(grid, values)
            }
            _ => Ok(raw),
        }
    }

    /// `ψ̂(ξ) = ∫ ψ(x) e^{-i ξ·x} dx`.
    pub fn transform(&self, xi: &[f64]) -> Complex64 {
        match self {
            Profile::Jump => jump_transform(xi[0]),
            Profile::Indicator { lo, hi } => {
                let w = xi[0];
                if w == 0.0 {
                    Complex64::new(hi - lo, 0.0)
                } else {
                    (Complex64::from_polar(1.0, -w * lo) - Complex64::from_polar(1.0, -w * hi)) / Complex64::new(0.0, w)
                }
            }
            Profile::Scaled { coef, inner } => inner.transform(xi) * *coef,
            _ if self.dim() == 1 => {
                let r = self.effective_radius();
                let w = xi[0];
                let re = quad::adaptive(|x| self.eval(&[x]) * (w * x).cos(), -r, r, 1e-14);
                let im = quad::adaptive(|x| -self.eval(&[x]) * (w * x).sin(), -r, r, 1e-14);
                Complex64::new(re, im)
            }
            _ => {
                let r = self.effective_radius();
                let h = 1.0 / 128.0;
                let side = 2.0 * (r / h).ceil() * h;
                let grid = Grid::new(Cube::new(vec![-0.5 * side; 2], side).expect("cube"), h).expect("grid");
                sample_on(&grid, |x| self.eval(x)).expect("finite profile").transform_at(xi)
            }
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("dimension {n} not in {{1, 2}}")))
    }
}

fn norm2(x: &[f64], n: usize) -> f64 {
    x[..n].iter().map(|v| v * v).sum()
}

fn norm(x: &[f64], n: usize) -> f64 {
    norm2(x, n).sqrt()
}

/// `exp(-1/(1-r²))` for `r² < 1`, else zero.
fn bump_raw(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

fn bump_raw_derivative(r: f64) -> f64 {
    // d/dr exp(-1/(1-r²)) = exp(..) · (-2r/(1-r²)²)
    let r2 = r * r;
    if r2 >= 1.0 {
        0.0
    } else {
        let s = 1.0 - r2;
        bump_raw(r2) * (-2.0 * r / (s * s))
    }
}

/// Normalising constant `c_n` of the standard bump.
pub fn bump_constant(n: usize) -> f64 {
    static C: OnceLock<[f64; 2]> = OnceLock::new();
    let c = C.get_or_init(|| {
        let one = quad::adaptive(|x| bump_raw(x * x), -1.0, 1.0, 1e-15);
        let two = 2.0 * PI * quad::adaptive(|r| r * bump_raw(r * r), 0.0, 1.0, 1e-15);
        [1.0 / one, 1.0 / two]
    });
    c[n - 1]
}

/// `2(1 - cos ξ)/(iξ)`, with the removable value `0` at the origin.
pub fn jump_transform(xi: f64) -> Complex64 {
    if xi == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let v = if xi.abs() < 1e-4 {
        // 2(1 - cos ξ)/ξ = ξ - ξ³/12 + …
        xi - xi.powi(3) / 12.0
    } else {
        2.0 * (1.0 - xi.cos()) / xi
    };
    Complex64::new(0.0, -v)
}

/// A radial function tabulated on `[0, r_max]` with four-point interpolation.
pub struct RadialTable {
    step: f64,
    values: Vec<f64>,
}

impl RadialTable {
    pub fn eval(&self, r: f64) -> f64 {
        let u = r / self.step;
        let last = self.values.len() - 1;
        if u >= last as f64 {
            return 0.0;
        }
        let i = u.floor() as i64;
        let frac = u - i as f64;
        // even extension across r = 0, zero beyond the end
        let at = |j: i64| -> f64 {
            let j = j.unsigned_abs() as usize;
            if j > last {
                0.0
            } else {
                self.values[j]
            }
        };
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let s = frac;
        p1 + 0.5
            * s
            * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

const PSI_NODES: usize = 4096;

/// Table of `Ψ(r) = n G(r) + r G'(r)` with `G = φ∗φ` radial.
pub fn psi_table(n: usize) -> &'static RadialTable {
    static T: [OnceLock<RadialTable>; 2] = [OnceLock::new(), OnceLock::new()];
    T[n - 1].get_or_init(|| build_psi_table(n))
}

fn build_psi_table(n: usize) -> RadialTable {
    let step = 2.0 / PSI_NODES as f64;
    let c = bump_constant(n);
    let c2 = c * c;
    let values = (0..=PSI_NODES)
        .map(|j| {
            let r = j as f64 * step;
            if r >= 2.0 {
                return 0.0;
            }
            let (g, dg) = if n == 1 { autocorr_1d(r) } else { autocorr_2d(r) };
            c2 * (n as f64 * g + r * dg)
        })
        .collect();
    RadialTable { step, values }
}

/// `(∫ e(y) e(r-y) dy, ∫ e(y) e'(r-y) dy)` with `e(z) = exp(-1/(1-z²))`.
fn autocorr_1d(r: f64) -> (f64, f64) {
    let lo = r - 1.0;
    let g = quad::adaptive(|y| bump_raw(y * y) * bump_raw((r - y) * (r - y)), lo, 1.0, 1e-16);
    let dg = quad::adaptive(
        |y| {
            let z = r - y;
            bump_raw(y * y) * bump_raw_derivative(z.abs()) * z.signum()
        },
        lo,
        1.0,
        1e-16,
    );
    (g, dg)
}

/// Two-dimensional analogue along the first axis, exploiting the symmetry
/// `y ↔ r e_1 - y` of the lens where both bumps overlap.
fn autocorr_2d(r: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    let a = 0.5 * r;
    let panels = 6;
    let (xs, ws) = quad::gauss_legendre(24);
    let width = (1.0 - a) / panels as f64;
    for p in 0..panels {
        let y1_lo = a + p as f64 * width;
        for (xi, wi) in xs.iter().zip(&ws) {
            let y1 = y1_lo + 0.5 * width * (xi + 1.0);
            let w1 = 0.5 * width * wi;
            let s = (1.0 - y1 * y1).max(0.0).sqrt();
            let z1 = r - y1;
            let (mut ig, mut idg) = (0.0, 0.0);
            for q in 0..2 {
                let lo = 0.5 * s * q as f64;
                let hw = 0.25 * s;
                for (xj, wj) in xs.iter().zip(&ws) {
                    let y2 = lo + hw * (xj + 1.0);
                    let w2 = hw * wj;
                    let ry = (y1 * y1 + y2 * y2).sqrt();
                    let rz = (z1 * z1 + y2 * y2).sqrt();
                    let (e1, e2) = (bump_raw(ry * ry), bump_raw(rz * rz));
                    ig += w2 * e1 * e2;
                    if rz > 0.0 {
                        idg += w2 * e1 * bump_raw_derivative(rz) * z1 / rz;
                    }
                    if ry > 0.0 {
                        idg += w2 * e2 * bump_raw_derivative(ry) * y1 / ry;
                    }
                }
            }
            // y2 ∈ [-s, s] by evenness; the mirrored half y1 < r/2 is folded
            // in, which moves the derivative onto the first factor there
            g += 4.0 * w1 * ig;
            dg += 2.0 * w1 * idg;
        }
    }
    (g, dg)
}
