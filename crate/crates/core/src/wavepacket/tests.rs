use super::*;
use crate::windows::{gaussian_self_wpt, window_self_wpt};
use proptest::prelude::*;

fn grid(n: usize, l: f64) -> Grid {
    Grid::new(1, n, l).unwrap()
}

fn gauss(g: Grid) -> Field {
    Field::from_real_fn(g, |x| (-x * x / 2.0).exp())
}

fn pts(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|&x| vec![x]).collect()
}

#[test]
fn gaussian_at_origin() {
    let g = grid(1024, 20.0);
    let w = Window::gaussian(0.25, 1.0, 1).unwrap();
    let s = wpt(&gauss(g), &w, &pts(&[0.0]), &pts(&[0.0])).unwrap();
    assert!((s.value(0, 0) - PI.sqrt()).norm() < 1e-12);
    let z = wpt(&Field::zeros(g), &w, &pts(&[0.0, 1.0]), &pts(&[0.5, -2.0])).unwrap();
    assert!(z.values.iter().all(|v| *v == ZERO));
}

#[test]
fn delta_closed_form() {
    let g = grid(256, 10.0);
    let d = Field::dirac(g, vec![0.0]).unwrap();
    let w = Window::gaussian(0.25, 1.0, 1).unwrap();
    let xs = [-1.5, 0.0, 0.7, 2.0];
    let s = wpt(&d, &w, &pts(&xs), &pts(&[-3.0, 0.0, 5.0])).unwrap();
    for (i, x) in xs.iter().enumerate() {
        for j in 0..3 {
            assert!((s.value(i, j).norm() - (-x * x / 2.0).exp()).abs() < 1e-15);
        }
    }
}

#[test]
fn nyquist_and_resolution_guards() {
    let g = grid(64, 4.0);
    let w = Window::gaussian(0.25, 1.0, 1).unwrap();
    let err = wpt(&gauss(g), &w, &pts(&[0.0]), &pts(&[g.nyquist() * 1.01])).unwrap_err();
    assert!(matches!(err, Error::FrequencyRange(_)));
    let sharp = Window::gaussian(0.5, 16.0, 1).unwrap();
    let g = grid(32, 4.0);
    assert!(matches!(wpt(&gauss(g), &sharp, &pts(&[0.0]), &pts(&[0.0])), Err(Error::Resolution(_))));
}

#[test]
fn evolved_self_transform_matches_closed_form() {
    let g = grid(4096, 40.0);
    for &(b, lambda, t) in &[(0.25, 1.0, 0.0), (0.25, 1.0, 1.0), (0.5, 16.0, 0.3), (0.25, 4.0, -1.0)] {
        let spec = WindowSpec::new(b, lambda, t, 1).unwrap();
        let f = evaluate_window(spec, g).unwrap();
        let xs = [-1.0, 0.0, 0.4, 2.5];
        let ks = [-3.0, 0.0, 1.0, 4.5];
        let s = wpt(&f, &Window::Evolved(spec), &pts(&xs), &pts(&ks)).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &k) in ks.iter().enumerate() {
                let exact = window_self_wpt(spec, &[x], &[k]);
                assert!((s.value(i, j) - exact).norm() < 1e-8, "{b} {lambda} {t} ({x},{k})");
            }
        }
    }
    // |W_{phi^(1)} phi^(1)(x, xi)| = |W_phi phi(x - xi, xi)|
    let spec = WindowSpec::new(0.25, 1.0, 1.0, 1).unwrap();
    let f = evaluate_window(spec, g).unwrap();
    let s = wpt(&f, &Window::Evolved(spec), &pts(&[0.5]), &pts(&[1.5])).unwrap();
    assert!((s.value(0, 0).norm() - gaussian_self_wpt(&[-1.0], &[1.5]).norm()).abs() < 1e-8);
}

fn engine_matches_pointwise(f: &Field, w: &Window, m0: i64, len: usize, etas: &[f64]) {
    let g = *f.grid();
    let engine = ColumnEngine::new(f, w, m0, len).unwrap();
    let cols = engine.columns(etas);
    let xs: Vec<Vec<f64>> = (0..len).map(|i| vec![g.coord(m0 + i as i64)]).collect();
    let s = wpt(f, w, &xs, &pts(etas)).unwrap();
    let scale = s.values.iter().map(|v| v.norm()).fold(1e-300, f64::max);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            assert!((v - s.value(i, j)).norm() <= 1e-12 * scale, "m={} eta={}", m0 + i as i64, etas[j]);
        }
    }
}

#[test]
fn column_engine_agrees_with_direct_sums() {
    let g = grid(1024, 16.0);
    let f = Field::from_real_fn(g, |x| x.signum() * (-x * x).exp());
    // a wide evolved window forces the FFT plan, a narrow one the direct plan
    let wide = Window::Evolved(WindowSpec::new(0.25, 16.0, 0.5, 1).unwrap());
    let narrow = Window::Dilated { shape: WindowShape::Hermite2, b: 0.5, lambda: 100.0 };
    engine_matches_pointwise(&f, &wide, -300, 1600, &[3.0, 17.5, -40.0]);
    engine_matches_pointwise(&f, &narrow, 500, 24, &[3.0, 60.0]);
    let bump = Window::Dilated { shape: WindowShape::Bump { radius: 4.0 }, b: 0.25, lambda: 8.0 };
    engine_matches_pointwise(&f, &bump, 0, 1024, &[1.0, 90.0]);
    let sampled = Window::Sampled(gauss(g));
    engine_matches_pointwise(&f, &sampled, 400, 200, &[2.0]);

    let d = Field::dirac(g, vec![0.25]).unwrap();
    engine_matches_pointwise(&d, &wide, 480, 64, &[5.0, 50.0]);
    let z = Field::zeros(g);
    assert!(ColumnEngine::new(&z, &wide, 0, 10).unwrap().column(1.0).iter().all(|v| *v == ZERO));
}

#[test]
fn engine_rejects_two_dimensional_fields() {
    let g = Grid::new(2, 16, 4.0).unwrap();
    let w = Window::gaussian(0.25, 1.0, 2).unwrap();
    let err = ColumnEngine::new(&Field::zeros(g), &w, 0, 4).err().unwrap();
    assert!(matches!(err, Error::UnsupportedDimension(2)));
}

#[test]
fn gaussian_plancherel_closed_form() {
    let g = grid(256, 12.0);
    let phi = gauss(g);
    let s = wpt_full(&phi, &phi).unwrap();
    let n = s.l2_norm().unwrap();
    assert!((n / (PI * 2f64.sqrt()) - 1.0).abs() < 1e-12);
    assert!((plancherel_ratio(&phi, &phi).unwrap() - 1.0).abs() < 1e-12);
    let shifted = Field::from_real_fn(g, |x| (-(x - 1.5).powi(2) / 2.0).exp());
    assert!((plancherel_ratio(&shifted, &phi).unwrap() - 1.0).abs() < 1e-12);
    assert!(matches!(plancherel_ratio(&Field::zeros(g), &phi), Err(Error::DegenerateInput(_))));
}

#[test]
fn full_lattice_matches_pointwise() {
    let g = grid(64, 8.0);
    let f = Field::from_real_fn(g, |x| (x - 0.5).tanh() * (-x * x / 3.0).exp());
    let phi = gauss(g);
    let full = wpt_full(&f, &phi).unwrap();
    let w = Window::Sampled(phi);
    // positions near the centre, where periodic wrap of the window is negligible
    for &m in &[30usize, 32, 34] {
        let s = wpt(&f, &w, &[g.position(m)], &full.xi_samples).unwrap();
        for k in 0..g.len() {
            assert!((s.value(0, k) - full.value(m, k)).norm() < 1e-12);
        }
    }
}

#[test]
fn inversion_with_two_windows() {
    let g = grid(256, 12.0);
    let phi = gauss(g);
    let f = Field::from_fn(g, |x| Complex64::from_polar((-x[0] * x[0] / 4.0).exp(), 2.0 * x[0]));
    let back = reconstruct(&f, &phi, &phi).unwrap();
    assert!(back.relative_l2_distance(&f).unwrap() < 1e-12);
    let psi = Field::from_real_fn(g, |x| (1.0 + x) * (-x * x).exp());
    let back = reconstruct(&phi, &phi, &psi).unwrap();
    assert!(back.relative_l2_distance(&phi).unwrap() < 1e-12);
    let odd = Field::from_real_fn(g, |x| x * (-x * x).exp());
    assert!(matches!(reconstruct(&phi, &phi, &odd), Err(Error::DegeneratePairing(_))));
}

#[test]
fn adjoint_edge_cases() {
    let g = grid(64, 8.0);
    let phi = gauss(g);
    let zero = wpt_full(&Field::zeros(g), &phi).unwrap();
    let back = adjoint_wpt(&zero, &phi).unwrap();
    assert!(back.samples().unwrap().iter().all(|v| *v == ZERO));
    let partial = wpt(&phi, &Window::Sampled(phi.clone()), &pts(&[0.0]), &pts(&[0.0])).unwrap();
    assert!(matches!(adjoint_wpt(&partial, &phi), Err(Error::PartialSlice(_))));
}

#[test]
fn adjoint_is_the_adjoint() {
    // <W f, F> = <f, W^* F> with the (2 pi)^{-n} convention carried by W^*
    let g = grid(64, 8.0);
    let phi = gauss(g);
    let f = Field::from_real_fn(g, |x| (x + 0.3).sin() * (-x * x / 4.0).exp());
    let h = Field::from_fn(g, |x| Complex64::new(x[0], 1.0) * (-x[0] * x[0] / 2.0).exp());
    let wf = wpt_full(&f, &phi).unwrap();
    let big_f = wpt_full(&h, &phi).unwrap();
    let lhs: Complex64 = wf.values.iter().zip(&big_f.values).map(|(a, b)| a * b.conj()).sum::<Complex64>()
        * g.spacing()
        * g.dual_spacing()
        / (2.0 * PI);
    let rhs = inner_product(&f, &adjoint_wpt(&big_f, &phi).unwrap()).unwrap();
    assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
}

#[test]
fn two_dimensional_identities() {
    let g = Grid::new(2, 32, 6.0).unwrap();
    let phi = Field::from_fn(g, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), 0.0));
    let f = Field::from_fn(g, |x| Complex64::from_polar((-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp(), x[0]));
    assert!((plancherel_ratio(&f, &phi).unwrap() - 1.0).abs() < 1e-12);
    let back = reconstruct(&f, &phi, &phi).unwrap();
    assert!(back.relative_l2_distance(&f).unwrap() < 1e-12);
    let w = Window::gaussian(0.25, 1.0, 2).unwrap();
    let s = wpt(&phi, &w, &[vec![0.0, 0.0]], &[vec![0.0, 0.0]]).unwrap();
    assert!((s.value(0, 0) - PI).norm() < 1e-6);
}

fn direct_window_change(f: &Field, a: &Field, nb: &Field) -> f64 {
    let g = *f.grid();
    let n = g.points_per_axis();
    let waf = wpt_full(f, a).unwrap();
    let waa = wpt_full(a, a).unwrap();
    let wnbf = wpt_full(f, nb).unwrap();
    let pairing = inner_product(a, nb).unwrap().norm();
    let scale = g.spacing() * g.dual_spacing() / (2.0 * PI) / pairing;
    let mut worst: f64 = 0.0;
    for m in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for m2 in 0..n {
                for k2 in 0..n {
                    let dm = (m + n + n / 2 - m2) % n;
                    let dk = (k + n + n / 2 - k2) % n;
                    acc += waa.value(dm, dk).norm() * wnbf.value(m2, k2).norm();
                }
            }
            worst = worst.max(waf.value(m, k).norm() - acc * scale);
        }
    }
    worst
}

#[test]
fn window_change_matches_direct_convolution() {
    let g = grid(64, 8.0);
    let phi = gauss(g);
    let rep = window_change_bound_check(&phi, &phi, &phi).unwrap();
    let direct = direct_window_change(&phi, &phi, &phi);
    assert!((rep.max_violation - direct.max(0.0)).abs() < 1e-12);
    assert!(rep.max_violation <= 1e-8);
    assert!(rep.max_ratio <= 1.0 + 1e-10);

    let spec = WindowSpec::new(0.25, 4.0, 0.3, 1).unwrap();
    let a = evaluate_window(spec, g).unwrap();
    let nb = a.map(|z| z * z).unwrap();
    let f = Field::from_real_fn(g, |x| x.tanh() * (-x * x).exp());
    let rep = window_change_bound_check(&f, &a, &nb).unwrap();
    assert!((rep.max_violation - direct_window_change(&f, &a, &nb).max(0.0)).abs() < 1e-12);
    assert!(rep.max_violation <= 1e-6);

    let zero = window_change_bound_check(&Field::zeros(g), &phi, &phi).unwrap();
    assert_eq!(zero.max_lhs, 0.0);
    assert!(zero.max_violation <= 1e-15);
    let odd = Field::from_real_fn(g, |x| x * (-x * x / 2.0).exp());
    assert!(matches!(window_change_bound_check(&phi, &phi, &odd), Err(Error::DegeneratePairing(_))));
}

#[test]
fn conjugation_identity() {
    let g = grid(256, 12.0);
    let real = Field::from_real_fn(g, |x| (x - 1.0).tanh() * (-x * x / 2.0).exp());
    let spec = WindowSpec::new(0.25, 2.0, 0.5, 1).unwrap();
    assert!(conjugation_identity_check(&real, spec).unwrap().passes(1e-10));
    let u = Field::from_fn(g, |x| Complex64::from_polar((-x[0] * x[0]).exp(), x[0]));
    assert!(conjugation_identity_check(&u, spec).unwrap().passes(1e-10));
    let stft = WindowSpec::new(0.25, 1.0, 0.0, 1).unwrap();
    assert!(conjugation_identity_check(&u, stft).unwrap().passes(1e-10));
}

#[test]
fn slice_serialisation() {
    let g = grid(64, 8.0);
    let w = Window::gaussian(0.25, 4.0, 1).unwrap();
    let s = wpt(&gauss(g), &w, &pts(&[-1.0, 0.0, 1.0]), &pts(&[0.0, 2.0])).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.contains("x,xi,re,im"));
    let back = WptSlice::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.values, s.values);
    assert_eq!(back.x_samples, s.x_samples);
    assert_eq!(back.lambda, Some(4.0));
    let mut m = Vec::new();
    s.write_gnuplot_matrix(&mut m).unwrap();
    let m = String::from_utf8(m).unwrap();
    assert_eq!(m.lines().next().unwrap().split_whitespace().count(), 3);
    assert_eq!(m.trim_end().lines().count(), 4);
}

fn arb_field(g: Grid) -> impl Strategy<Value = Field> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -2.0f64..2.0, 0.3f64..1.5), 1..4).prop_map(
        move |terms| {
            Field::from_fn(g, |x| {
                terms
                    .iter()
                    .map(|&(re, im, c, w)| {
                        Complex64::new(re, im) * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp()
                    })
                    .sum()
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn plancherel_on_random_fields(f in arb_field(grid(128, 10.0))) {
        prop_assume!(f.l2_norm().unwrap() > 1e-6);
        let phi = gauss(*f.grid());
        let r = plancherel_ratio(&f, &phi).unwrap();
        prop_assert!((r - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn translation_covariance(f in arb_field(grid(256, 12.0)), shift in -6i64..6, k in -10.0f64..10.0) {
        let g = *f.grid();
        let a = shift as f64 * g.spacing() * 4.0;
        let fa = Field::from_samples(g, (0..g.len()).map(|j| {
            let src = j as i64 - 4 * shift;
            if (0..g.len() as i64).contains(&src) { f.samples().unwrap()[src as usize] } else { ZERO }
        }).collect()).unwrap();
        let w = Window::gaussian(0.25, 2.0, 1).unwrap();
        let x = 0.375;
        let lhs = wpt(&fa, &w, &[vec![x]], &[vec![k]]).unwrap().value(0, 0);
        let rhs = wpt(&f, &w, &[vec![x - a]], &[vec![k]]).unwrap().value(0, 0)
            * Complex64::from_polar(1.0, -a * k);
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn modulation_covariance(f in arb_field(grid(256, 12.0)), eta_k in -20i64..20, k in -5.0f64..5.0) {
        let g = *f.grid();
        let eta = eta_k as f64 * g.dual_spacing();
        let fm = f.map_with_position(|y, z| z * Complex64::from_polar(1.0, eta * y[0])).unwrap();
        let w = Window::gaussian(0.25, 3.0, 1).unwrap();
        let lhs = wpt(&fm, &w, &[vec![-0.4]], &[vec![k]]).unwrap().value(0, 0);
        let rhs = wpt(&f, &w, &[vec![-0.4]], &[vec![k - eta]]).unwrap().value(0, 0);
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn window_change_never_violated(f in arb_field(grid(64, 8.0)), lam in 1.0f64..8.0, t in -0.5f64..0.5) {
        let g = *f.grid();
        let spec = WindowSpec::new(0.25, lam, t, 1).unwrap();
        let a = evaluate_window(spec, g).unwrap();
        let nb = a.map(|z| z * z * z.conj()).unwrap();
        let rep = window_change_bound_check(&f, &a, &nb).unwrap();
        prop_assert!(rep.max_violation <= 1e-10 * rep.max_lhs.max(1.0));
    }
}
