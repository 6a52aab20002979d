//! Invariant batteries: fast checks of each module against exact or
//! independently computed values.

use std::f64::consts::PI;

use super::fixtures::{random_box_set, scenario_rng};
use super::{Check, Environment, ExperimentReport, Provenance};
use crate::carleson::{bound_constant_43, c0_of_b, carleson_constant, strong_carleson_constant, theta_one_field, CarlesonField};
use crate::grid::{convolve, sample_on, Cube, CubeFamily, Grid, Method, ScaleGrid};
use crate::kernels::{derived_exponents, derived_family, Beta, MLKernelSpec, Profile};
use crate::operators::{almost_orth_ratio, pi_decay_slope, reproducing_residual, ThetaOperator};
use crate::weights::{ap_constant, cz_check, cz_decompose, WeightFn};
use crate::{Error, Result};

pub(super) fn run(name: &str, seed: u64) -> Result<ExperimentReport> {
    let checks = match name {
        "grid" => grid()?,
        "kernels" => kernels()?,
        "operators" => operators()?,
        "weights" => weights(seed)?,
        "carleson" => carleson()?,
        other => return Err(Error::Config(format!("unknown battery '{other}'"))),
    };
    let env = Environment { grid_h: None, t_min: None, t_max: None, per_octave: None, seed, runtime_ms: None };
    Ok(ExperimentReport::new(name, serde_json::json!({}), checks, env))
}

fn grid() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let g = Grid::interval(-4.0, 4.0, 1.0 / 64.0)?;
    let f = sample_on(&g, |x| (1.3 * x[0]).cos() * (-x[0] * x[0]).exp())?;
    let k = Profile::Bump { n: 1 }.sample_dilated(0.5, g.h(), 8.0)?;
    let d = convolve(&f, &k, Method::Direct)?;
    let q = convolve(&f, &k, Method::Fourier)?;
    let dev = d.values().iter().zip(q.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / d.max_abs();
    out.push(
        Check::new("grid.convolve-methods", "direct and fast convolution agree", Provenance::Trivial)
            .computed(dev)
            .reference(0.0)
            .tolerance(1e-12)
            .absolute(),
    );

    let s = ScaleGrid::log_uniform(1.0 / 64.0, 16.0, 7)?;
    let total: f64 = s.weights().iter().sum();
    let between: f64 = s.weights_between(0.1, 3.0).iter().sum();
    let dev = ((total - (1024f64).ln()).abs()).max((between - 30f64.ln()).abs());
    out.push(
        Check::new("grid.scale-measure", "log-uniform scales integrate dt/t exactly", Provenance::Trivial)
            .computed(dev)
            .reference(0.0)
            .tolerance(1e-12)
            .absolute(),
    );

    let g1 = Grid::interval(-8.0, 8.0, 1.0 / 16.0)?;
    let e1 = (sample_on(&g1, |x| (-x[0] * x[0]).exp())?.integrate() - PI.sqrt()).abs();
    let g2 = Grid::new(Cube::new(vec![-6.0, -6.0], 12.0)?, 1.0 / 8.0)?;
    let e2 = (sample_on(&g2, |x| (-x[0] * x[0] - x[1] * x[1]).exp())?.integrate() - PI).abs();
    out.push(
        Check::new("grid.trapezoid", "Gaussian integrals sqrt(pi) and pi", Provenance::Derived)
            .computed(e1.max(e2))
            .reference(0.0)
            .tolerance(1e-12)
            .absolute(),
    );
    Ok(out)
}

fn kernels() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let h = 1.0 / 128.0;
    let mut mass_err: f64 = 0.0;
    let mut mean_err: f64 = 0.0;
    for t in [0.125, 0.5, 2.0] {
        let b = Profile::Bump { n: 1 }.sample_dilated(t, h, 16.0)?;
        mass_err = mass_err.max((b.values().iter().sum::<f64>() * h - 1.0).abs());
        let p = Profile::Psi { n: 1 }.sample_dilated(t, h, 16.0)?;
        mean_err = mean_err.max((p.values().iter().sum::<f64>() * h).abs());
    }
    out.push(
        Check::new("kernels.bump-mass", "the bump has unit mass", Provenance::Trivial)
            .computed(mass_err)
            .reference(0.0)
            .tolerance(1e-12)
            .absolute(),
    );
    out.push(
        Check::new("kernels.psi-mean-zero", "the derived kernel has mean zero", Provenance::Trivial)
            .computed(mean_err)
            .reference(0.0)
            .tolerance(1e-13)
            .absolute(),
    );
    let e = derived_exponents(4.0, 1.0, 1)?;
    let ok = e.gamma_prime > 0.0 && e.gamma_prime < 1.0 && e.n_prime > 1.0 && e.n_prime <= 4.0 - e.gamma_prime + 1e-12;
    out.push(
        Check::new("kernels.derived-exponents", "0 < gamma' < gamma and n < N' <= N - gamma'", Provenance::Trivial)
            .computed(e.gamma_prime)
            .pass_if(ok),
    );
    Ok(out)
}

fn operators() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let fam = derived_family(&Profile::Bump { n: 1 })?;
    let spec = MLKernelSpec::convolution(Profile::Psi { n: 1 }, 4.0, 1.0)?;

    let g = Grid::interval(-16.0, 16.0, 1.0 / 128.0)?;
    let op = ThetaOperator::new(spec.clone(), g.clone())?;
    let op = op.clone().with_guard(op.guard_for(1.0)?)?;
    let f = sample_on(&g, |x| (1.3 * x[0]).cos() * (-x[0] * x[0] / 8.0).exp())?;
    let mut residuals = Vec::new();
    let mut rel = f64::NAN;
    for e in [2, 4, 6] {
        let r = reproducing_residual(&op, &fam, &[&f], 1.0, 2f64.powi(-e), 16)?;
        residuals.push(r.residual);
        rel = r.residual / r.theta_norm;
    }
    let mut c = Check::new("operators.reproducing", "truncated reproducing formula converges", Provenance::Derived)
        .computed(rel)
        .reference(0.05)
        .at_most();
    c.pass &= residuals.windows(2).all(|w| w[1] < w[0]);
    out.push(c);

    let g = Grid::interval(-128.0, 128.0, 1.0 / 128.0)?;
    let op = ThetaOperator::new(spec, g.clone())?;
    let op = op.clone().with_guard(op.guard_for(4.0)?)?;
    let f = sample_on(&g, |x| (1.3 * x[0]).cos() * (-x[0] * x[0] / 8.0).exp())?;
    let d = pi_decay_slope(&op, &fam, 1, 1.0, &[&f], 6, true)?;
    out.push(
        Check::new("operators.pi-decay", "decay (s/t ^ t/s)^gamma' of Theta_t Pi_{j,s}", Provenance::Derived)
            .computed(d.slope())
            .reference(0.8 * d.gamma_prime)
            .at_least(),
    );

    let diffs: Vec<Vec<f64>> = [0.0, 0.3, 1.0, 4.0, 30.0].iter().map(|d| vec![*d]).collect();
    let lam = 3.7;
    let scaled: Vec<Vec<f64>> = diffs.iter().map(|d| vec![lam * d[0]]).collect();
    let mut dev: f64 = 0.0;
    let mut finite = true;
    for k in -6..=6 {
        let s = 2f64.powi(k);
        let r = almost_orth_ratio(2.0, 2.0, 1, s, 1.0, &diffs)?;
        let r2 = almost_orth_ratio(2.0, 2.0, 1, lam * s, lam, &scaled)?;
        finite &= r.is_finite() && r > 0.0;
        dev = dev.max((r - r2).abs() / r);
    }
    let mut c = Check::new("operators.almost-orth", "almost orthogonality of majorants", Provenance::Derived)
        .computed(dev)
        .reference(0.0)
        .tolerance(1e-6)
        .absolute();
    c.pass &= finite;
    out.push(c);
    Ok(out)
}

fn weights(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let fam = CubeFamily::dyadic(Cube::interval(-1.0, 1.0)?, 0, 10)?;
    let one = WeightFn::constant(1)?;
    let mut dev: f64 = 0.0;
    for p in [1.5, 2.0, 4.0] {
        dev = dev.max((ap_constant(&one, p, &fam)?.value - 1.0).abs());
    }
    out.push(
        Check::new("weights.ap-unit", "[1]_Ap = 1", Provenance::Trivial).computed(dev).reference(0.0).tolerance(0.0).absolute(),
    );

    let w = WeightFn::power(1, 0.5)?;
    let a = ap_constant(&w, 2.0, &fam)?.value;
    let b = ap_constant(&w.clone().scaled(13.0), 2.0, &fam)?.value;
    out.push(
        Check::new("weights.ap-scale", "[c w]_Ap = [w]_Ap", Provenance::Trivial)
            .computed((a - b).abs())
            .reference(0.0)
            .tolerance(0.0)
            .absolute(),
    );

    let d12 = ap_constant(&w, 2.0, &CubeFamily::dyadic(Cube::interval(-1.0, 1.0)?, 0, 12)?)?.value;
    let d14 = ap_constant(&w, 2.0, &CubeFamily::dyadic(Cube::interval(-1.0, 1.0)?, 0, 14)?)?.value;
    out.push(
        Check::new("weights.ap-depth", "[|x|^(1/2)]_A2 is finite", Provenance::Derived)
            .computed(d14)
            .reference(d12)
            .tolerance(0.05)
            .relative(),
    );

    let w = WeightFn::power(1, 0.3)?;
    let (p, pd) = (3.0, 1.5);
    let primal = ap_constant(&w, p, &fam)?.value;
    let dual = ap_constant(&w.pow(1.0 - pd), pd, &fam)?.value;
    out.push(
        Check::new("weights.ap-duality", "[w^(1-p')]_Ap' = [w]_Ap^(p'-1)", Provenance::Trivial)
            .computed((dual - primal.powf(pd - 1.0)).abs() / dual)
            .reference(0.0)
            .tolerance(1e-12)
            .absolute(),
    );

    let mut rng = scenario_rng(seed, "weights.cz");
    let mut failures = 0usize;
    for i in 0..100 {
        let n = 1 + i % 2;
        let root = Cube::new(vec![0.0; n], 1.0)?;
        let set = random_box_set(&mut rng, &root, 4, 64)?;
        let cubes = cz_decompose(&set, 0.5, &root, 10)?;
        let chk = cz_check(&set, &cubes);
        if !(chk.covers() && chk.within(0.5)) {
            failures += 1;
        }
    }
    out.push(
        Check::new("weights.cz", "Calderón-Zygmund cubes cover E with total measure <= |E|/lambda", Provenance::Paper)
            .computed(failures as f64)
            .reference(0.0)
            .at_most(),
    );
    Ok(out)
}

fn carleson() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let fam = CubeFamily::dyadic(Cube::interval(-8.0, 8.0)?, 0, 8)?;
    let scales = ScaleGrid::log_uniform(1.0 / 256.0, 16.0, 8)?;
    let g = Grid::interval(-8.0, 8.0, 1.0 / 128.0)?;

    let mut fields: Vec<(CarlesonField, bool)> = Vec::new();
    fields.push((theta_one_field(&ThetaOperator::new(MLKernelSpec::ex38(1)?, g.clone())?, &scales)?, false));
    let ex37 = MLKernelSpec::ex37(2, 1, 0.5, Beta::RoughSign)?;
    fields.push((theta_one_field(&ThetaOperator::new(ex37, g.clone())?, &scales)?, false));
    fields.push((CarlesonField::from_rule(&g, &scales, |x, t| (1.0 + x[0].sin()).powi(2) / (1.0 + t))?, false));
    let conv = MLKernelSpec::convolution(Profile::Bump { n: 1 }.scaled(0.6), 4.0, 1.0)?;
    fields.push((theta_one_field(&ThetaOperator::new(conv, g.clone())?, &scales)?, true));
    fields.push((CarlesonField::constant(&g, &scales, 0.3)?, true));

    let mut margin = f64::INFINITY;
    let mut gap: f64 = 0.0;
    for (f, x_constant) in &fields {
        let c = carleson_constant(f, &fam)?;
        let s = strong_carleson_constant(f, &fam)?;
        for (a, b) in c.records.iter().zip(&s.records) {
            margin = margin.min((b.value - a.value) / b.value.abs().max(1.0));
            if *x_constant {
                gap = gap.max((b.value - a.value).abs());
            }
        }
    }
    out.push(
        Check::new("carleson.strong-dominates", "sup over Q dominates the average over Q", Provenance::Trivial)
            .computed(margin)
            .reference(-1e-12)
            .at_least(),
    );
    out.push(
        Check::new("carleson.x-constant", "Theta_t(1, ..., 1)(x) constant in x: strong = Carleson", Provenance::Paper)
            .computed(gap)
            .reference(0.0)
            .tolerance(1e-10)
            .absolute(),
    );

    let dev = (bound_constant_43(&[1.0, 1.0], &[4.0, 4.0], 0.0)? - 4.0)
        .abs()
        .max((bound_constant_43(&[1.0, 1.0], &[4.0, 4.0], 1.0)? - 5.0).abs());
    out.push(
        Check::new("carleson.bound-constant", "weighted-bound constant at [w] = 1: 4 and 5", Provenance::Derived)
            .computed(dev)
            .reference(0.0)
            .tolerance(1e-14)
            .absolute(),
    );
    let v = c0_of_b(2.0, &[4.0, 4.0], 1.0)?;
    out.push(
        Check::new("carleson.c0", "C0(2) = 32 + 2^(2/3) for q = (4, 4), SC = 1", Provenance::Derived)
            .computed(v)
            .reference(32.0 + 2f64.powf(2.0 / 3.0))
            .tolerance(1e-12)
            .relative(),
    );
    Ok(out)
}
