use nalgebra::DMatrix;

use super::SquareMatrix;
use crate::error::{Error, Result};

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by Padé scaling and squaring (degrees 3..13 chosen by the 1-norm).
pub fn mat_exp(m: &SquareMatrix) -> Result<SquareMatrix> {
    let a = m.as_dmatrix();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entries in matrix exponential".into()));
    }
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let nrm = norm1(a);
    if nrm == 0.0 {
        return SquareMatrix::new(ident);
    }
    let a2 = a * a;
    for &(deg, theta) in &THETA {
        if nrm <= theta {
            let (u, v) = match deg {
                3 => odd_even(a, &a2, &ident, &B3),
                5 => odd_even(a, &a2, &ident, &B5),
                7 => odd_even(a, &a2, &ident, &B7),
                _ => odd_even(a, &a2, &ident, &B9),
            };
            return finish(u, v);
        }
    }
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-s);
    let a1 = a * scale;
    let a2 = &a2 * (scale * scale);
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let uinner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a1 * uinner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];
    let mut r = finish(u, v)?.into_dmatrix();
    for _ in 0..s {
        r = &r * &r;
    }
    SquareMatrix::new(r)
}

fn odd_even(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    ident: &DMatrix<f64>,
    b: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut pow = ident.clone();
    let mut u = DMatrix::zeros(a.nrows(), a.nrows());
    let mut v = DMatrix::zeros(a.nrows(), a.nrows());
    for k in 0..b.len() / 2 {
        v += &pow * b[2 * k];
        u += &pow * b[2 * k + 1];
        pow = &pow * a2;
    }
    (a * u, v)
}

fn finish(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<SquareMatrix> {
    let p = &v + &u;
    let q = &v - &u;
    let sol = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical("singular Padé denominator".into()))?;
    SquareMatrix::new(sol)
}
