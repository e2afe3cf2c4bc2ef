use ndarray::Array2;
use proptest::prelude::*;

use fraccons::fracops::{
    left_frac_integral, linear_combination, rl_left_derivative, FractionalKind, TimeGrid, TimeSeries, Weight,
};
use fraccons::specialfn::{gamma, hyp2f1, mittag_leffler, SeriesControl};
use fraccons::symcat::{characteristic, list_symmetries, CatalogOptions, SymmetryId};
use fraccons::tfde::{Diffusivity, GridFunction, SpaceGrid};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_is_exact_on_linear_data(mu in 0.05f64..2.0, a in -3.0f64..3.0, b in -3.0f64..3.0, n in 4usize..40) {
        let grid = TimeGrid::new(1.5, n).unwrap();
        let f = TimeSeries::sample(grid, |t| a + b * t).unwrap();
        let got = left_frac_integral(&f, mu).unwrap().materialize();
        let (g1, g2) = (gamma(mu + 1.0).unwrap(), gamma(mu + 2.0).unwrap());
        for (i, v) in got.iter().enumerate() {
            let t = grid.node(i);
            let want = a * t.powf(mu) / g1 + b * t.powf(mu + 1.0) / g2;
            prop_assert!(close(*v, want, 1e-11), "i={i}: {v} vs {want}");
        }
    }

    #[test]
    fn integral_is_linear(mu in 0.05f64..1.95, a in -2.0f64..2.0, b in -2.0f64..2.0, w in 0.5f64..6.0) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let f = TimeSeries::sample(grid, |t| (w * t).sin()).unwrap();
        let g = TimeSeries::sample(grid, |t| (t * t).exp()).unwrap();
        let lhs = left_frac_integral(&linear_combination(&[(a, &f), (b, &g)]).unwrap(), mu).unwrap().materialize();
        let (fi, gi) = (left_frac_integral(&f, mu).unwrap().materialize(), left_frac_integral(&g, mu).unwrap().materialize());
        for i in 0..lhs.len() {
            prop_assert!(close(lhs[i], a * fi[i] + b * gi[i], 1e-12));
        }
    }

    #[test]
    fn rl_derivative_of_power_converges(alpha in 0.1f64..0.9, p in 0.0f64..2.0) {
        let c = gamma(p + 1.0).unwrap() / gamma(p + 1.0 - alpha).unwrap();
        let tail_err = |n: usize| -> f64 {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let f = TimeSeries::weighted(grid, Weight::new(p, 0.0), vec![1.0; n + 1]).unwrap();
            let d = rl_left_derivative(&f, alpha).unwrap().materialize();
            (n / 10..=n)
                .map(|i| {
                    let want = c * grid.node(i).powf(p - alpha);
                    ((d[i] - want) / want).abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (tail_err(64), tail_err(128));
        prop_assert!(fine < 1e-2 && coarse / fine > 2.5, "{coarse:e} -> {fine:e}");
    }

    #[test]
    fn gamma_recurrence(z in 0.05f64..12.0) {
        prop_assert!(close(gamma(z + 1.0).unwrap(), z * gamma(z).unwrap(), 1e-13));
    }

    #[test]
    fn mittag_leffler_reduces_to_exp_and_cos(z in -6.0f64..3.0) {
        let ctl = SeriesControl::default();
        prop_assert!(close(mittag_leffler(1.0, 1.0, z, &ctl).unwrap(), z.exp(), 1e-12));
        let y = z.abs().min(3.0);
        prop_assert!((mittag_leffler(2.0, 1.0, -y * y, &ctl).unwrap() - y.cos()).abs() < 1e-12);
    }

    #[test]
    fn hyp2f1_symmetric_in_numerator(a in -2.5f64..2.5, b in -2.5f64..2.5, c in 0.3f64..4.0, z in 0.0f64..0.9) {
        let (x, y) = (hyp2f1(a, b, c, z).unwrap(), hyp2f1(b, a, c, z).unwrap());
        prop_assert!(close(x, y, 1e-12));
    }

    #[test]
    fn characteristic_is_linear_in_u(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 1.0f64..3.0) {
        let time = TimeGrid::new(1.0, 16).unwrap();
        let space = SpaceGrid::new(0.0, 2.0, 16).unwrap();
        let u1 = GridFunction::from_fn(time, space, |t, x| (k * x).sin() * (1.0 + t));
        let u2 = GridFunction::from_fn(time, space, |t, x| x * x * t * t);
        let sum = GridFunction::new(time, space, u1.values() * a + u2.values() * b).unwrap();
        let d = Diffusivity::Constant { k0: 1.0 };
        let syms = list_symmetries(FractionalKind::Caputo, 0.6, &d, CatalogOptions::default());
        // Xinf is u-independent: W = h for a fixed solution h.
        for sym in syms.into_iter().filter(|s| s.id != SymmetryId::Xinf) {
            let w = |u: &GridFunction| -> Array2<f64> { characteristic(&sym, u).unwrap().materialize() };
            let (ws, w1, w2) = (w(&sum), w(&u1), w(&u2));
            let diff = (&ws - &(w1 * a + w2 * b)).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            prop_assert!(diff < 1e-9, "{:?}: {diff}", sym.id);
        }
    }
}
