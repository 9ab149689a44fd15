use ossheet::linalg::SquareMatrix;
use ossheet::polar::*;
use proptest::prelude::*;

fn ctx(rows: &[&[f64]]) -> PolarContext {
    let m = SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    PolarContext::new(&m).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn identity_gives_euclidean_polar_coordinates() {
    let c = ctx(&[&[1.0, 0.0], &[0.0, 1.0]]);
    assert!(rel(c.homogeneous_norm(&[3.0, 4.0]).unwrap(), 5.0) < 1e-9);
    assert!(rel(c.radial_part(&[3.0, 4.0]).unwrap(), 5.0) < 1e-9);
    let l = c.direction(&[3.0, 4.0]).unwrap();
    assert!((l[0] - 0.6).abs() < 1e-9 && (l[1] - 0.8).abs() < 1e-9);
    assert_eq!(c.radial_part(&[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(c.homogeneous_norm(&[0.0, 0.0]).unwrap(), 0.0);
    assert!(c.direction(&[0.0, 0.0]).is_err());
}

#[test]
fn scalar_multiple_of_identity() {
    for a in [0.5, 1.7, 3.0] {
        let c = ctx(&[&[a, 0.0, 0.0], &[0.0, a, 0.0], &[0.0, 0.0, a]]);
        let x = [0.3, -2.0, 1.1];
        let nx = (0.09f64 + 4.0 + 1.21).sqrt();
        assert!(rel(c.homogeneous_norm(&x).unwrap(), nx / a) < 1e-9);
        assert!(rel(c.radial_part(&x).unwrap(), (nx / a).powf(1.0 / a)) < 1e-8);
    }
}

#[test]
fn pure_second_axis_of_diag_1_2() {
    let c = ctx(&[&[1.0, 0.0], &[0.0, 2.0]]);
    let p = c.polar(&[0.0, 9.0]).unwrap();
    assert!(rel(p.tau, 4.5f64.sqrt()) < 1e-9);
    assert!(p.direction[0].abs() < 1e-12 && (p.direction[1] - 2.0).abs() < 1e-8);
}

#[test]
fn high_precision_oracles() {
    // mpmath, 30 digits
    let j = ctx(&[&[1.0, 1.0], &[0.0, 1.0]]);
    assert!(rel(j.radial_part(&[1.0, 1.0]).unwrap(), 1.310352905221793) < 1e-8);
    assert!(rel(j.radial_part(&[0.3, -2.0]).unwrap(), 6.343774131201951) < 1e-8);
    assert!(rel(j.radial_part(&[5.0, 0.0]).unwrap(), 5.0) < 1e-8);
    let d = ctx(&[&[1.0, 0.0], &[0.0, 2.0]]);
    assert!(rel(d.radial_part(&[1.0, 1.0]).unwrap(), 1.120237598407245) < 1e-8);
    assert!(rel(d.radial_part(&[0.2, 3.0]).unwrap(), 1.240079748880280) < 1e-8);
}

#[test]
fn growth_bounds_are_finite_and_positive() {
    for rows in [[[1.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [0.0, 1.0]]] {
        let c = ctx(&[&rows[0], &rows[1]]);
        let rep = c.verify_growth_bounds(10_000, 0.05, 7).unwrap();
        assert!(rep.all_finite_positive(), "{rep:?}");
        assert!(rep.small_norm_tau_max < 0.05, "{rep:?}");
    }
    let id = ctx(&[&[1.0, 0.0], &[0.0, 1.0]]);
    let rep = id.verify_growth_bounds(2000, 0.05, 1).unwrap();
    // tau = ||x|| so every ratio lies within the eps-slack of 1 over the sampled radii
    for k in rep.constants() {
        assert!(k > 1e-6f64.powf(0.05) * 0.99 && k < 1e6f64.powf(0.05) * 1.01, "{rep:?}");
    }
    assert!(id.verify_growth_bounds(10, 0.5, 1).is_err());
}

#[test]
fn unit_ball_area_from_chart_matches_radial_profile() {
    for rows in [[[1.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [0.0, 1.0]], [[1.2, -0.7], [0.4, 1.5]]] {
        let c = ctx(&[&rows[0], &rows[1]]);
        let chart = PolarChart2::new(&c).unwrap();
        let q = rows[0][0] + rows[1][1];
        let n = 4000;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut via_chart = 0.0;
        let mut via_profile = 0.0;
        for k in 0..n {
            let th = (k as f64 + 0.5) * h;
            via_chart += chart.jacobian(th) * h / q;
            let e = [th.cos(), th.sin()];
            let rho = 1.0 / c.homogeneous_norm(&e).unwrap();
            via_profile += 0.5 * rho * rho * h;
        }
        assert!(rel(via_chart, via_profile) < 1e-6, "{via_chart} vs {via_profile}");
        let l = chart.l(0.4);
        assert!((c.homogeneous_norm(&l).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn fast_radial_agrees_with_root_solver() {
    for rows in [[[1.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [0.0, 1.0]], [[1.2, -0.7], [0.4, 1.5]], [[0.6, -2.0], [2.0, 0.6]]] {
        let c = ctx(&[&rows[0], &rows[1]]);
        let f = FastRadial2::new(&c).unwrap();
        for (i, x) in [[1.0, 0.0], [0.3, -7.0], [1e-4, 2e-5], [300.0, 1e4], [-0.2, 0.9]].iter().enumerate() {
            let exact = c.radial_part(x).unwrap();
            assert!(rel(f.tau(*x), exact) < 1e-9, "case {i}: {} vs {exact}", f.tau(*x));
        }
    }
}

fn pick(k: usize) -> PolarContext {
    match k {
        0 => ctx(&[&[1.0, 0.0], &[0.0, 2.0]]),
        1 => ctx(&[&[1.0, 1.0], &[0.0, 1.0]]),
        2 => ctx(&[&[0.6, -2.0], &[2.0, 0.6]]),
        _ => ctx(&[&[0.8, 0.3, 0.0], &[0.0, 1.4, 0.2], &[0.1, 0.0, 2.5]]),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homogeneity_and_reconstruction(k in 0usize..4, raw in prop::collection::vec(-1.0f64..1.0, 3),
                                      lr in -4.0f64..4.0, lc in -6.9f64..6.9) {
        let c = pick(k);
        let d = c.dim();
        let x: Vec<f64> = raw[..d].iter().map(|v| v * 10f64.powf(lr)).collect();
        prop_assume!(x.iter().any(|v| v.abs() > 1e-12));
        let cc = lc.exp();
        let p = c.polar(&x).unwrap();
        let y = c.power_apply(cc, &x).unwrap();
        let py = c.polar(&y).unwrap();
        prop_assert!((py.tau - cc * p.tau).abs() <= 1e-6 * cc * p.tau);
        for i in 0..d {
            prop_assert!((py.direction[i] - p.direction[i]).abs() <= 1e-6 * (1.0 + c.norm(&p.direction)));
        }
        let back = c.power_apply(p.tau, &p.direction).unwrap();
        let diff: Vec<f64> = back.iter().zip(&x).map(|(a, b)| a - b).collect();
        prop_assert!(c.norm(&diff) <= 1e-7 * (1.0 + c.norm(&x)));
        prop_assert!((c.homogeneous_norm(&p.direction).unwrap() - 1.0).abs() <= 1e-8);
    }
}
