use nalgebra::DMatrix;
use ossheet::linalg::*;
use proptest::prelude::*;

fn m(rows: &[&[f64]]) -> SquareMatrix {
    SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Plain Taylor series, good enough as an oracle for small norms.
fn taylor_exp(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..terms {
        term = &term * a / k as f64;
        sum += &term;
    }
    sum
}

#[test]
fn exp_of_zero_and_diagonal() {
    let z = mat_exp(&SquareMatrix::new(DMatrix::zeros(3, 3)).unwrap()).unwrap();
    assert_eq!(z.as_dmatrix(), &DMatrix::<f64>::identity(3, 3));
    let e = mat_exp(&SquareMatrix::diag(&[1.0, 2.0]).unwrap()).unwrap();
    assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-14);
    assert!((e[(1, 1)] - 2f64.exp()).abs() / 2f64.exp() < 1e-14);
    assert_eq!(e[(0, 1)], 0.0);
}

#[test]
fn jordan_power_matches_nilpotent_split() {
    let c: f64 = 4.0;
    let p = mat_power(c, &m(&[&[1.0, 1.0], &[0.0, 1.0]])).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[4.0, 4.0 * c.ln(), 0.0, 4.0]);
    assert!(rel_fro(p.as_dmatrix(), &expected) < 1e-13);
    let taylor = taylor_exp(&(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]) * c.ln()), 30);
    assert!(rel_fro(p.as_dmatrix(), &taylor) < 1e-13);
}

#[test]
fn powers_of_scalar_and_diagonal_matrices() {
    let i = mat_power(1.0, &m(&[&[0.3, 2.0], &[-1.0, 5.0]])).unwrap();
    assert_eq!(i.as_dmatrix(), &DMatrix::<f64>::identity(2, 2));
    let p = mat_power(3.0, &SquareMatrix::identity(2)).unwrap();
    assert!((p[(0, 0)] - 3.0).abs() < 1e-14 && p[(0, 1)] == 0.0);
    let p = mat_power(2.0, &SquareMatrix::diag(&[0.5, 1.5]).unwrap()).unwrap();
    assert!((p[(0, 0)] - 1.41421356237).abs() < 1e-10);
    assert!((p[(1, 1)] - 2.82842712475).abs() < 1e-10);
    assert!(mat_power(0.0, &SquareMatrix::identity(2)).is_err());
    assert!(mat_power(-1.0, &SquareMatrix::identity(2)).is_err());
}

#[test]
fn exp_accuracy_on_large_norm_matrices() {
    // 25 * rotation generator: exp is an exact rotation by 25 radians
    let a = m(&[&[0.0, -25.0], &[25.0, 0.0]]);
    let e = mat_exp(&a).unwrap();
    let (s, c) = 25f64.sin_cos();
    let expected = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    assert!(rel_fro(e.as_dmatrix(), &expected) < 1e-12);
    let b = SquareMatrix::diag(&[-20.0, 10.0, 30.0]).unwrap();
    let e = mat_exp(&b).unwrap();
    for (i, v) in [-20.0f64, 10.0, 30.0].iter().enumerate() {
        assert!((e[(i, i)] - v.exp()).abs() <= 1e-12 * v.exp());
    }
}

#[test]
fn non_finite_input_is_rejected() {
    assert!(SquareMatrix::from_rows(&[vec![f64::NAN]]).is_err());
    assert!(SquareMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
}

#[test]
fn trace_examples() {
    assert_eq!(trace(&SquareMatrix::identity(3)), 3.0);
    assert_eq!(trace(&SquareMatrix::diag(&[1.0, 2.0]).unwrap()), 3.0);
    assert_eq!(trace(&m(&[&[1.0, 7.0], &[-2.0, 0.5]])), 1.5);
}

#[test]
fn spectral_examples() {
    let sd = spectral_decompose(&SquareMatrix::diag(&[1.0, 2.0]).unwrap(), 1e-9).unwrap();
    assert_eq!(sd.p(), 2);
    assert!((sd.exponents[0] - 1.0).abs() < 1e-12 && (sd.exponents[1] - 2.0).abs() < 1e-12);
    let p0 = sd.projectors[0].as_dmatrix();
    assert!((p0 - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-12);

    let id = SquareMatrix::identity(3);
    let sd = spectral_decompose(&id, default_group_tol(&id)).unwrap();
    assert_eq!(sd.p(), 1);
    assert!((sd.projectors[0].as_dmatrix() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);

    let j = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
    let sd = spectral_decompose(&j, default_group_tol(&j)).unwrap();
    assert_eq!(sd.p(), 1);
    assert_eq!(sd.dims, vec![2]);
}

#[test]
fn conjugated_jordan_block_stays_one_cluster() {
    let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 1.2, 0.4, -0.5, 0.2, 0.9]);
    let j = DMatrix::from_row_slice(3, 3, &[1.5, 1.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 0.7]);
    let a = SquareMatrix::new(&s * j * s.clone().try_inverse().unwrap()).unwrap();
    let sd = spectral_decompose(&a, default_group_tol(&a)).unwrap();
    assert_eq!(sd.p(), 2);
    assert_eq!(sd.dims, vec![1, 2]);
    check_projectors(&a, &sd, 1e-8);
}

#[test]
fn rotation_blocks_group_conjugate_pairs() {
    let a = m(&[&[1.0, -3.0, 0.0], &[3.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
    let sd = spectral_decompose(&a, default_group_tol(&a)).unwrap();
    assert_eq!(sd.dims, vec![2, 1]);
    check_projectors(&a, &sd, 1e-10);
    assert!(spectral_decompose(&m(&[&[-1.0]]), 1e-9).unwrap().require_positive().is_err());
}

fn check_projectors(a: &SquareMatrix, sd: &SpectralDecomposition, tol: f64) {
    let n = a.order();
    let id = DMatrix::<f64>::identity(n, n);
    let sum = sd.projectors.iter().fold(DMatrix::zeros(n, n), |s, p| s + p.as_dmatrix());
    assert!((sum - &id).norm() < tol, "projectors do not sum to I");
    for (i, p) in sd.projectors.iter().enumerate() {
        for (k, q) in sd.projectors.iter().enumerate() {
            if i != k {
                assert!((p.as_dmatrix() * q.as_dmatrix()).norm() < tol);
            }
        }
        let inv = (&id - p.as_dmatrix()) * a.as_dmatrix() * p.as_dmatrix();
        assert!(inv.norm() <= tol * a.frobenius(), "V_{i} not invariant");
    }
    assert_eq!(sd.dims.iter().sum::<usize>(), n);
}

#[test]
fn embedding_examples() {
    let layout = BlockLayout::new(vec![SquareMatrix::diag(&[1.0]).unwrap(), SquareMatrix::diag(&[2.0]).unwrap()]).unwrap();
    let (list, e) = embed_blocks(&layout).unwrap();
    assert_eq!(e.as_dmatrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
    assert_eq!(list[0].as_dmatrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    assert_eq!(list[1].as_dmatrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]));
    let y = block_power_apply(&layout, 0, 2.0, &[3.0, 5.0]).unwrap();
    assert!((y[0] - 6.0).abs() < 1e-14);
    assert_eq!(y[1], 5.0);

    let single = BlockLayout::new(vec![m(&[&[1.0, 1.0], &[0.0, 2.0]])]).unwrap();
    let (list, e) = embed_blocks(&single).unwrap();
    assert_eq!(list[0], e);
}

fn matrix_with_real_parts(order: usize) -> impl Strategy<Value = SquareMatrix> {
    (
        prop::collection::vec(0.3f64..3.0, order),
        prop::collection::vec(-1.0f64..1.0, order * order),
        prop::collection::vec(-0.5f64..0.5, order * order),
    )
        .prop_filter_map("ill-conditioned similarity", move |(diag, s, upper)| {
            let mut t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
            for i in 0..order {
                for j in i + 1..order {
                    t[(i, j)] = upper[i * order + j];
                }
            }
            let s = DMatrix::from_row_slice(order, order, &s) + DMatrix::identity(order, order) * 2.0;
            let inv = s.clone().try_inverse()?;
            SquareMatrix::new(&s * t * inv).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn group_and_inverse_laws(e in prop_oneof![matrix_with_real_parts(2), matrix_with_real_parts(3)],
                              c in 0.1f64..10.0, d in 0.1f64..10.0) {
        let ce = mat_power(c, &e).unwrap();
        let de = mat_power(d, &e).unwrap();
        let cde = mat_power(c * d, &e).unwrap();
        let prod = ce.as_dmatrix() * de.as_dmatrix();
        prop_assert!(rel_fro(&prod, cde.as_dmatrix()) <= 1e-10);
        let inv = mat_power(1.0 / c, &e).unwrap();
        let n = e.order();
        prop_assert!((ce.as_dmatrix() * inv.as_dmatrix() - DMatrix::<f64>::identity(n, n)).norm() <= 1e-10);
    }

    #[test]
    fn block_locality_is_exact(x in prop::collection::vec(-10.0f64..10.0, 3), c in 0.01f64..100.0) {
        let layout = BlockLayout::new(vec![
            SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 2.0]]).unwrap(),
            SquareMatrix::diag(&[0.7]).unwrap(),
        ]).unwrap();
        let y = block_power_apply(&layout, 0, c, &x).unwrap();
        prop_assert_eq!(y[2], x[2]);
        let y = block_power_apply(&layout, 1, c, &x).unwrap();
        prop_assert_eq!(&y[..2], &x[..2]);
    }

    #[test]
    fn separated_clusters_give_valid_projectors(gap_base in 0.3f64..1.0, off in prop::collection::vec(-1.0f64..1.0, 9)) {
        let t = DMatrix::from_row_slice(3, 3, &[gap_base, off[0], off[1], 0.0, gap_base + 0.5, off[2], 0.0, 0.0, gap_base + 1.2]);
        let s = DMatrix::from_row_slice(3, 3, &off) + DMatrix::identity(3, 3) * 3.0;
        let a = SquareMatrix::new(&s * t * s.clone().try_inverse().unwrap()).unwrap();
        let sd = spectral_decompose(&a, default_group_tol(&a)).unwrap();
        prop_assert_eq!(sd.p(), 3);
        let n = 3;
        let id = DMatrix::<f64>::identity(n, n);
        let sum = sd.projectors.iter().fold(DMatrix::zeros(n, n), |s, p| s + p.as_dmatrix());
        prop_assert!((sum - &id).norm() < 1e-8);
        for (i, p) in sd.projectors.iter().enumerate() {
            for (k, q) in sd.projectors.iter().enumerate() {
                if i != k { prop_assert!((p.as_dmatrix() * q.as_dmatrix()).norm() < 1e-8); }
            }
            prop_assert!(((&id - p.as_dmatrix()) * a.as_dmatrix() * p.as_dmatrix()).norm() <= 1e-8 * a.frobenius());
        }
    }
}
