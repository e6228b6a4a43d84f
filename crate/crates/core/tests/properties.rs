//! Randomised invariants of the spectral layer and the solvers.

use std::f64::consts::PI;
use std::sync::Arc;

use dnls_wkb_core::grenier::{integrate_until, trajectory_difference};
use dnls_wkb_core::nls::wkb_wave;
use dnls_wkb_core::spectral::{analytic_norm, sobolev_norm, TripleNormAccumulator};
use dnls_wkb_core::{
    integrate_nls, make_grid, FourierGrid, NonlinearitySpec, SpectralField, WKBState, WaveField, WeightSchedule,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid(n: usize) -> Arc<FourierGrid> {
    make_grid(n, 2.0 * PI).unwrap()
}

fn coefficients(band: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2 * band + 1)
}

fn field(g: &Arc<FourierGrid>, c: &[(f64, f64)], real: bool) -> SpectralField {
    let band = (c.len() / 2) as i64;
    let modes: Vec<(i64, Complex64)> = if real {
        let mut m = vec![(0, Complex64::new(c[0].0, 0.0))];
        for k in 1..=band {
            let z = Complex64::new(c[k as usize].0, c[k as usize].1);
            m.push((k, z));
            m.push((-k, z.conj()));
        }
        m
    } else {
        (-band..=band)
            .zip(c)
            .map(|(k, &(re, im))| (k, Complex64::new(re, im)))
            .collect()
    };
    SpectralField::from_modes(g, &modes, real).unwrap()
}

fn bump(g: &Arc<FourierGrid>) -> WKBState {
    WKBState::new(
        SpectralField::from_real_fn(g, |x| 0.3 * x.sin()),
        SpectralField::from_fn(g, |x| Complex64::new((0.5 * (x.cos() - 1.0)).exp(), 0.0)),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_against_quadrature(c in coefficients(10)) {
        let g = grid(64);
        let psi = field(&g, &c, false);
        let quad: f64 = psi.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() * g.length() / 64.0;
        let s0 = sobolev_norm(&psi, 0.0).unwrap();
        prop_assert!((s0 * s0 - quad).abs() <= 1e-10 * quad);
    }

    #[test]
    fn analytic_norm_monotone(c in coefficients(8), w in 0.0..1.5f64, dw in 0.0..1.0f64,
                              l in 0.0..4.0f64, dl in 0.0..2.0f64) {
        let g = grid(64);
        let psi = field(&g, &c, false);
        let base = analytic_norm(&psi, w, l).unwrap();
        prop_assert!(base <= analytic_norm(&psi, w + dw, l).unwrap() * (1.0 + 1e-14));
        prop_assert!(base <= analytic_norm(&psi, w, l + dl).unwrap() * (1.0 + 1e-14));
    }

    #[test]
    fn sobolev_norm_below_weighted_norm(c in coefficients(12), l in 0.0..4.0f64) {
        let g = grid(64);
        let psi = field(&g, &c, false);
        let s = sobolev_norm(&psi, l).unwrap();
        for w in [0.0, 0.1, 1.0] {
            prop_assert!(s <= analytic_norm(&psi, w, l).unwrap() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn integral_branch_monotone_in_rate(c in coefficients(6), m in 0.1..2.0f64, dm in 0.0..2.0f64) {
        let g = grid(32);
        let psi = field(&g, &c, false);
        let t = 0.4 / (m + dm).max(1.0);
        let fixed = |rate: f64| {
            let schedule = WeightSchedule::new(1.0, rate, t).unwrap();
            let mut acc = TripleNormAccumulator::new(1.0, schedule);
            for k in 0..=10 {
                acc.observe(t * k as f64 / 10.0, &psi).unwrap();
            }
            acc.integral_branch()
        };
        prop_assert!(fixed(m) <= fixed(m + dm) * (1.0 + 1e-12));
    }

    #[test]
    fn real_fields_stay_real(c in coefficients(10)) {
        let g = grid(64);
        let psi = field(&g, &c, true);
        for order in 1..=2 {
            let d = psi.derivative(order).unwrap();
            prop_assert!(d.is_real());
            prop_assert!(d.hermitian_defect() <= 1e-13 * d.max_abs_coefficient().max(1.0));
        }
        let back = SpectralField::from_real_samples(&g, &psi.real_samples()).unwrap();
        prop_assert!((&back - &psi).max_abs_coefficient() <= 1e-14);
        let im: f64 = psi.samples().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        prop_assert!(im <= 1e-13);
    }

    #[test]
    fn padded_product_is_pointwise(c1 in coefficients(8), c2 in coefficients(8)) {
        let g = grid(64);
        let (p, q) = (field(&g, &c1, false), field(&g, &c2, false));
        let pq = p.product(&q).unwrap();
        let direct: Vec<Complex64> = p.samples().iter().zip(q.samples()).map(|(a, b)| a * b).collect();
        let worst = pq.samples().iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-12);
    }

    #[test]
    fn h_times_s_is_g(alpha in -2.0..2.0f64, gamma in 1u32..4, s in 0.0..10.0f64) {
        let sp = NonlinearitySpec::new(alpha, gamma, 1.0, 1).unwrap();
        let g = sp.eval_g(s).unwrap();
        prop_assert!((sp.eval_h(s).unwrap() * s - g).abs() <= 1e-12 * g.abs().max(1.0));
    }

    #[test]
    fn approximant_modulus_is_amplitude(c1 in coefficients(4), c2 in coefficients(4), eps in 0.05..1.0f64) {
        let g = grid(64);
        let phi = field(&g, &c1, true);
        let a = field(&g, &c2, false);
        let u = wkb_wave(&phi, &a, eps).unwrap();
        for (z, w) in u.u.samples().iter().zip(a.samples()) {
            prop_assert!((z.norm() - w.norm()).abs() <= 1e-12 * w.norm().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn nls_gauge_covariance(theta in 0.0..(2.0 * PI)) {
        let g = grid(64);
        let sp = NonlinearitySpec::new(1.0, 1, 1.0, 1).unwrap();
        let u0 = wkb_wave(&bump(&g).phi, &bump(&g).a, 0.2).unwrap();
        let rot = Complex64::from_polar(1.0, theta);
        let v0 = WaveField::new(u0.u.scaled_complex(rot), 0.2).unwrap();
        let a = integrate_nls(&u0, &sp, 0.1, 1e-3).unwrap();
        let b = integrate_nls(&v0, &sp, 0.1, 1e-3).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            prop_assert!((&x.u.scaled_complex(rot) - &y.u).max_abs_coefficient() <= 1e-10);
        }
    }
}

#[test]
fn grenier_depends_linearly_on_small_eps() {
    let g = grid(64);
    let sp = NonlinearitySpec::new(1.0, 1, 1.0, 1).unwrap();
    let s0 = bump(&g);
    let schedule = WeightSchedule::new(0.5, 1.0, 0.2).unwrap();
    let limit = integrate_until(&s0, 0.0, &sp, 0.2, 1e-3).unwrap();
    let gap = |eps: f64| {
        let traj = integrate_until(&s0, eps, &sp, 0.2, 1e-3).unwrap();
        let (dp, da) = trajectory_difference(&traj, &limit, &schedule, 2.0).unwrap();
        dp + da
    };
    let (big, small) = (gap(0.1), gap(0.05));
    let ratio = big / small;
    assert!((1.8..=2.2).contains(&ratio), "{big:e} / {small:e} = {ratio}");
}

#[test]
fn limit_phase_stays_real_on_long_run() {
    let g = grid(64);
    let sp = NonlinearitySpec::new(0.5, 2, 1.0, 2).unwrap();
    let traj = integrate_until(&bump(&g), 0.0, &sp, 0.3, 1e-2).unwrap();
    for s in &traj.states {
        assert!(s.phi.is_real());
        assert!(s.phi.hermitian_defect() <= 1e-10);
    }
}
