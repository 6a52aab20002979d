use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{SampledFunction, LATTICE_EPS};
use crate::{Error, Result};

/// How [`convolve`] evaluates the discrete sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Fourier,
    /// Picks whichever of the two is cheaper for the given sizes.
    Auto,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `(f ∗ k)(x_i) ≈ h^n Σ_j f(y_j) k(x_i − y_j)` on the nodes of `f`.
///
/// `f` is extended by zero outside its cube and `k` by zero outside its own.
/// Both must share the spacing, and the kernel's corner must sit on the
/// lattice `hℤ^n` so that every difference `x_i − y_j` is a kernel node.
pub fn convolve(f: &SampledFunction, k: &SampledFunction, method: Method) -> Result<SampledFunction> {
    let gf = f.grid();
    let gk = k.grid();
    if gf.dim() != gk.dim() {
        return Err(Error::Config("convolution of fields of different dimension".into()));
    }
    if (gf.h() - gk.h()).abs() > 1e-12 * gf.h() {
        return Err(Error::Config(format!("spacing mismatch: {} vs {}", gf.h(), gk.h())));
    }
    let n = gf.dim();
    let mut shift = [0i64; 2];
    for (a, s) in shift.iter_mut().enumerate().take(n) {
        let c = gk.cube().lower(a) / gf.h();
        let r = c.round();
        if (c - r).abs() > LATTICE_EPS * c.abs().max(1.0) {
            return Err(Error::Config("kernel corner is not on the lattice".into()));
        }
        *s = r as i64;
    }
    let nf = gf.per_axis();
    let nk = gk.per_axis();
    let method = match method {
        Method::Auto => {
            let direct = (nf * nk) as f64;
            let l = (nf + nk).next_power_of_two() as f64;
            let fourier = 15.0 * l * l.log2();
            let ratio = if n == 1 { direct / fourier } else { direct * direct / (fourier * l) };
            if ratio < 1.0 {
                Method::Direct
            } else {
                Method::Fourier
            }
        }
        m => m,
    };
    if f.values().iter().all(|v| *v == 0.0) || k.values().iter().all(|v| *v == 0.0) {
        return Ok(SampledFunction::zeros(gf));
    }
    let scale = gf.cell_volume();
    let values = match (n, method) {
        (1, Method::Direct) => direct_1d(f.values(), k.values(), shift[0], scale),
        (_, Method::Direct) => direct_2d(f.values(), nf, k.values(), nk, shift, scale),
        (1, _) => fourier_1d(f.values(), k.values(), shift[0], scale)?,
        (_, _) => fourier_2d(f.values(), nf, k.values(), nk, shift, scale)?,
    };
    SampledFunction::new(gf.clone(), values)
}

fn direct_1d(f: &[f64], k: &[f64], c: i64, scale: f64) -> Vec<f64> {
    let nf = f.len() as i64;
    let nk = k.len() as i64;
    (0..nf)
        .map(|i| {
            // kernel index m = i - j - c must lie in [0, nk)
            let j_lo = (i - c - nk + 1).max(0);
            let j_hi = (i - c).min(nf - 1);
            let mut s = 0.0;
            let mut j = j_lo;
            while j <= j_hi {
                s += f[j as usize] * k[(i - j - c) as usize];
                j += 1;
            }
            s * scale
        })
        .collect()
}

fn direct_2d(f: &[f64], nf: usize, k: &[f64], nk: usize, c: [i64; 2], scale: f64) -> Vec<f64> {
    let nf_i = nf as i64;
    let nk_i = nk as i64;
    let mut out = vec![0.0; nf * nf];
    for i0 in 0..nf_i {
        for i1 in 0..nf_i {
            let j0_lo = (i0 - c[0] - nk_i + 1).max(0);
            let j0_hi = (i0 - c[0]).min(nf_i - 1);
            let j1_lo = (i1 - c[1] - nk_i + 1).max(0);
            let j1_hi = (i1 - c[1]).min(nf_i - 1);
            let mut s = 0.0;
            let mut j0 = j0_lo;
            while j0 <= j0_hi {
                let m0 = (i0 - j0 - c[0]) as usize;
                let frow = &f[j0 as usize * nf..];
                let krow = &k[m0 * nk..];
                let mut j1 = j1_lo;
                while j1 <= j1_hi {
                    s += frow[j1 as usize] * krow[(i1 - j1 - c[1]) as usize];
                    j1 += 1;
                }
                j0 += 1;
            }
            out[(i0 * nf_i + i1) as usize] = s * scale;
        }
    }
    out
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse { p.plan_fft_inverse(buf.len()) } else { p.plan_fft_forward(buf.len()) };
        plan.process(buf);
    });
}

fn check_residue(imag: f64, bound: f64) -> Result<()> {
    if imag > 1e-10 * bound.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "Fourier convolution left an imaginary residue {imag:e} against scale {bound:e}"
        )));
    }
    Ok(())
}

fn fourier_1d(f: &[f64], k: &[f64], c: i64, scale: f64) -> Result<Vec<f64>> {
    let full = f.len() + k.len() - 1;
    let l = full.next_power_of_two();
    // Pack f and k into one complex sequence and split their spectra.
    let mut z: Vec<Complex64> = (0..l)
        .map(|i| Complex64::new(f.get(i).copied().unwrap_or(0.0), k.get(i).copied().unwrap_or(0.0)))
        .collect();
    fft_in_place(&mut z, false);
    let mut prod = vec![Complex64::new(0.0, 0.0); l];
    for i in 0..l {
        let a = z[i];
        let b = z[(l - i) % l].conj();
        let ff = (a + b) * 0.5;
        let kk = (a - b) * Complex64::new(0.0, -0.5);
        prod[i] = ff * kk;
    }
    fft_in_place(&mut prod, true);
    let norm = scale / l as f64;
    let mut imag = 0.0f64;
    let out = (0..f.len() as i64)
        .map(|i| {
            let m = i - c;
            if m < 0 || m as usize >= full {
                0.0
            } else {
                let v = prod[m as usize] * norm;
                imag = imag.max(v.im.abs());
                v.re
            }
        })
        .collect();
    let bound = scale * f.iter().map(|v| v.abs()).sum::<f64>() * k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check_residue(imag, bound)?;
    Ok(out)
}

fn fft_2d(buf: &mut [Complex64], l: usize, inverse: bool) {
    for row in buf.chunks_mut(l) {
        fft_in_place(row, inverse);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); l];
    for j in 0..l {
        for i in 0..l {
            col[i] = buf[i * l + j];
        }
        fft_in_place(&mut col, inverse);
        for i in 0..l {
            buf[i * l + j] = col[i];
        }
    }
}

fn fourier_2d(f: &[f64], nf: usize, k: &[f64], nk: usize, c: [i64; 2], scale: f64) -> Result<Vec<f64>> {
    let full = nf + nk - 1;
    let l = full.next_power_of_two();
    let mut z = vec![Complex64::new(0.0, 0.0); l * l];
    for i in 0..nf {
        for j in 0..nf {
            z[i * l + j].re = f[i * nf + j];
        }
    }
    for i in 0..nk {
        for j in 0..nk {
            z[i * l + j].im = k[i * nk + j];
        }
    }
    fft_2d(&mut z, l, false);
    let mut prod = vec![Complex64::new(0.0, 0.0); l * l];
    for i in 0..l {
        for j in 0..l {
            let a = z[i * l + j];
            let b = z[((l - i) % l) * l + (l - j) % l].conj();
            prod[i * l + j] = (a + b) * 0.5 * ((a - b) * Complex64::new(0.0, -0.5));
        }
    }
    fft_2d(&mut prod, l, true);
    let norm = scale / (l * l) as f64;
    let mut imag = 0.0f64;
    let mut out = vec![0.0; nf * nf];
    for i0 in 0..nf as i64 {
        for i1 in 0..nf as i64 {
            let m0 = i0 - c[0];
            let m1 = i1 - c[1];
            if m0 < 0 || m1 < 0 || m0 as usize >= full || m1 as usize >= full {
                continue;
            }
            let v = prod[m0 as usize * l + m1 as usize] * norm;
            imag = imag.max(v.im.abs());
            out[(i0 * nf as i64 + i1) as usize] = v.re;
        }
    }
    let bound = scale * f.iter().map(|v| v.abs()).sum::<f64>() * k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check_residue(imag, bound)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{guard_band, sample, Cube};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(cube: &Cube, h: f64, seed: u64) -> SampledFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = crate::grid::Grid::new(cube.clone(), h).unwrap();
        let v = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        SampledFunction::new(g, v).unwrap()
    }

    #[test]
    fn delta_kernel_is_identity() {
        let h = 1.0 / 16.0;
        let f = random_field(&Cube::interval(-1.0, 1.0).unwrap(), h, 1);
        let delta = sample(&Cube::interval(-h, h).unwrap(), h, |x| if x[0].abs() < 1e-12 { 1.0 / h } else { 0.0 }).unwrap();
        for m in [Method::Direct, Method::Fourier] {
            let g = convolve(&f, &delta, m).unwrap();
            for (a, b) in g.values().iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_mass_kernel_preserves_constants_inside() {
        let h = 1.0 / 32.0;
        let f = sample(&Cube::interval(-2.0, 2.0).unwrap(), h, |_| 1.0).unwrap();
        let k = sample(&Cube::interval(-0.5, 0.5).unwrap(), h, |_| 1.0).unwrap();
        let k = k.scaled(1.0 / k.values().iter().sum::<f64>() / h);
        let g = convolve(&f, &k, Method::Auto).unwrap();
        let m = guard_band(f.grid(), 0.5).unwrap();
        for i in m.indices() {
            assert!((g.value(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_and_fourier_agree_1d() {
        let h = 1.0 / 32.0;
        let f = random_field(&Cube::interval(-4.0, 4.0).unwrap(), h, 2);
        assert_eq!(f.values().len(), 257);
        let k = random_field(&Cube::interval(-1.5, 0.75).unwrap(), h, 3);
        let a = convolve(&f, &k, Method::Direct).unwrap();
        let b = convolve(&f, &k, Method::Fourier).unwrap();
        let d = a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d <= 1e-10, "{d}");
    }

    #[test]
    fn direct_and_fourier_agree_2d() {
        let h = 1.0 / 8.0;
        let f = random_field(&Cube::new(vec![-2.0, -2.0], 4.0).unwrap(), h, 4);
        let k = random_field(&Cube::new(vec![-0.5, -0.25], 1.0).unwrap(), h, 5);
        let a = convolve(&f, &k, Method::Direct).unwrap();
        let b = convolve(&f, &k, Method::Fourier).unwrap();
        let d = a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d <= 1e-10, "{d}");
    }

    #[test]
    fn spacing_mismatch_is_rejected() {
        let f = sample(&Cube::interval(0.0, 1.0).unwrap(), 0.25, |_| 1.0).unwrap();
        let k = sample(&Cube::interval(0.0, 1.0).unwrap(), 0.125, |_| 1.0).unwrap();
        assert!(matches!(convolve(&f, &k, Method::Direct), Err(Error::Config(_))));
    }

    #[test]
    fn commutes_on_a_common_box() {
        let h = 1.0 / 16.0;
        let c = Cube::interval(-2.0, 2.0).unwrap();
        let f = random_field(&c, h, 6);
        let k = random_field(&c, h, 7);
        let a = convolve(&f, &k, Method::Direct).unwrap();
        let b = convolve(&k, &f, Method::Direct).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
