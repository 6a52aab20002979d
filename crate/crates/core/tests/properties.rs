use proptest::prelude::*;

use sqfn::carleson::{bound_constant_43, c0_of_b, carleson_constant, strong_carleson_constant, tent, CarlesonField};
use sqfn::grid::{convolve, BoxSet, Cube, CubeFamily, Grid, Method, Rect, SampledFunction, ScaleGrid};
use sqfn::kernels::Profile;
use sqfn::weights::{ap_constant, cz_check, cz_decompose, holder_index, WeightFn};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 32, ..ProptestConfig::default() }
}

fn line(half: f64, h: f64) -> Grid {
    Grid::interval(-half, half, h).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn direct_and_fast_convolution_agree(
        values in prop::collection::vec(-1.0f64..1.0, 129),
        t in 0.05f64..1.0,
    ) {
        let g = line(4.0, 1.0 / 16.0);
        let f = SampledFunction::new(g.clone(), values).unwrap();
        let k = Profile::Bump { n: 1 }.sample_dilated(t, g.h(), 8.0).unwrap();
        let d = convolve(&f, &k, Method::Direct).unwrap();
        let q = convolve(&f, &k, Method::Fourier).unwrap();
        let scale = d.max_abs().max(1.0);
        for (a, b) in d.values().iter().zip(q.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn convolution_is_linear(values in prop::collection::vec(-1.0f64..1.0, 129), c in -5.0f64..5.0) {
        let g = line(4.0, 1.0 / 16.0);
        let f = SampledFunction::new(g.clone(), values).unwrap();
        let k = Profile::Psi { n: 1 }.sample_dilated(0.5, g.h(), 8.0).unwrap();
        let a = convolve(&f.scaled(c), &k, Method::Fourier).unwrap();
        let b = convolve(&f, &k, Method::Fourier).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - c * y).abs() <= 1e-12 * (1.0 + y.abs() * c.abs()));
        }
    }

    #[test]
    fn scale_weights_integrate_dt_over_t(lt in -10.0f64..0.0, octaves in 1.0f64..10.0, j in 1usize..32) {
        let (t_min, t_max) = (lt.exp2(), (lt + octaves).exp2());
        let s = ScaleGrid::log_uniform(t_min, t_max, j).unwrap();
        let total: f64 = s.weights().iter().sum();
        prop_assert!((total - (t_max / t_min).ln()).abs() <= 1e-12 * total.max(1.0));
        let (a, b) = (t_min * 1.3, t_max * 0.9);
        let between: f64 = s.weights_between(a, b).iter().sum();
        prop_assert!((between - (b / a).ln()).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn ap_constants_are_at_least_one_and_scale_free(a in -0.9f64..0.9, c in 0.01f64..100.0) {
        let fam = CubeFamily::dyadic(Cube::interval(-1.0, 1.0).unwrap(), 0, 8).unwrap();
        let w = WeightFn::power(1, a).unwrap();
        let v = ap_constant(&w, 2.0, &fam).unwrap().value;
        let u = ap_constant(&w.clone().scaled(c), 2.0, &fam).unwrap().value;
        prop_assert!(v >= 1.0 - 1e-12);
        prop_assert!((u - v).abs() <= 1e-12 * v);
    }

    #[test]
    fn cz_cubes_cover_and_stay_small(
        cuts in prop::collection::vec((0u32..64, 1u32..16), 1..6),
        dim in 1usize..3,
    ) {
        let root = Cube::new(vec![0.0; dim], 1.0).unwrap();
        let step = 1.0 / 64.0;
        let rects = cuts
            .iter()
            .map(|&(i, w)| {
                let lo = i as f64 * step;
                let hi = ((i + w).min(64)) as f64 * step;
                Rect::new(vec![lo; dim], vec![hi.max(lo + step); dim]).unwrap()
            })
            .collect();
        let set = BoxSet::new(dim, rects).unwrap();
        let cubes = cz_decompose(&set, 0.5, &root, 10).unwrap();
        let chk = cz_check(&set, &cubes);
        prop_assert!(chk.covers() && chk.within(0.5), "{chk:?}");
    }

    #[test]
    fn strong_constant_dominates_and_scales(a in 0.0f64..3.0, b in 0.1f64..2.0, c in 0.1f64..10.0) {
        let g = line(4.0, 1.0 / 16.0);
        let s = ScaleGrid::log_uniform(1.0 / 32.0, 8.0, 4).unwrap();
        let rule = move |x: &[f64], t: f64| (1.0 + (a * x[0]).sin()).powi(2) / (1.0 + b * t);
        let f = CarlesonField::from_rule(&g, &s, rule).unwrap();
        let fc = CarlesonField::from_rule(&g, &s, move |x: &[f64], t: f64| c * rule(x, t)).unwrap();
        let fam = CubeFamily::dyadic(Cube::interval(-4.0, 4.0).unwrap(), 0, 4).unwrap();
        let (cc, sc) = (carleson_constant(&f, &fam).unwrap(), strong_carleson_constant(&f, &fam).unwrap());
        prop_assert!(sc.supremum >= cc.supremum * (1.0 - 1e-12));
        let cc2 = carleson_constant(&fc, &fam).unwrap();
        prop_assert!((cc2.supremum - c * cc.supremum).abs() <= 1e-12 * c * cc.supremum);
    }

    #[test]
    fn carleson_constant_grows_with_the_field(a in 0.0f64..3.0, bump in 0.0f64..1.0) {
        let g = line(4.0, 1.0 / 16.0);
        let s = ScaleGrid::log_uniform(1.0 / 32.0, 8.0, 4).unwrap();
        let base = move |x: &[f64], _t: f64| (a * x[0]).cos().powi(2);
        let f = CarlesonField::from_rule(&g, &s, base).unwrap();
        let bigger = CarlesonField::from_rule(&g, &s, move |x: &[f64], t: f64| base(x, t) + bump * (-x[0] * x[0]).exp()).unwrap();
        let fam = CubeFamily::dyadic(Cube::interval(-4.0, 4.0).unwrap(), 0, 4).unwrap();
        let small_fam = CubeFamily::dyadic(Cube::interval(-4.0, 4.0).unwrap(), 1, 3).unwrap();
        let c0 = carleson_constant(&f, &fam).unwrap().supremum;
        prop_assert!(carleson_constant(&bigger, &fam).unwrap().supremum >= c0 - 1e-14);
        prop_assert!(carleson_constant(&f, &small_fam).unwrap().supremum <= c0 + 1e-14);
    }

    #[test]
    fn tent_membership_is_distance_to_the_complement(lo in -3.0f64..0.0, len in 0.1f64..3.0, x in -4.0f64..4.0, t in 0.0f64..2.0) {
        let hi = lo + len;
        let set = BoxSet::new(1, vec![Rect::interval(lo, hi).unwrap()]).unwrap();
        let dist = (x - lo).min(hi - x);
        prop_assume!((t - dist).abs() > 1e-9);
        prop_assert_eq!(tent(&set).contains(&[x], t), t > 0.0 && t <= dist);
    }

    #[test]
    fn bound_constants_are_monotone(
        a1 in 1.0f64..5.0, a2 in 1.0f64..5.0, da in 0.0f64..2.0,
        p1 in 1.1f64..6.0, p2 in 1.1f64..6.0,
        sc in 0.0f64..5.0, ds in 0.0f64..2.0,
        b in 1.01f64..5.0, db in 0.0f64..2.0,
    ) {
        let base = bound_constant_43(&[a1, a2], &[p1, p2], sc).unwrap();
        prop_assert!(bound_constant_43(&[a1 + da, a2], &[p1, p2], sc).unwrap() >= base);
        prop_assert!(bound_constant_43(&[a1, a2], &[p1, p2], sc + ds).unwrap() >= base);
        let c = c0_of_b(b, &[p1, p2], sc).unwrap();
        prop_assert!(c0_of_b(b + db, &[p1, p2], sc).unwrap() >= c);
    }

    #[test]
    fn holder_index_adds_reciprocals(ps in prop::collection::vec(1.0f64..10.0, 1..5)) {
        let p = holder_index(&ps).unwrap();
        let inv: f64 = ps.iter().map(|q| 1.0 / q).sum();
        prop_assert!((1.0 / p - inv).abs() <= 1e-12 * inv);
    }
}
