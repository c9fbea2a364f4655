//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (orders 3, 5, 7, 9, 13 selected from the 1-norm).

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
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

#[derive(Debug, Clone)]
pub struct MatrixFunctionResult<T: ComplexField> {
    pub value: DMatrix<T>,
    /// Number of squarings applied after the Padé step.
    pub scaling_squarings: u32,
}

fn one_norm<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, s: f64) -> DMatrix<T> {
    m.map(|z| z * T::from_real(s))
}

fn identity_times<T: ComplexField<RealField = f64>>(n: usize, s: f64) -> DMatrix<T> {
    DMatrix::<T>::identity(n, n).map(|z| z * T::from_real(s))
}

/// `e^X` for a real or complex square matrix.
pub fn matrix_exp<T>(x: &DMatrix<T>) -> Result<MatrixFunctionResult<T>>
where
    T: ComplexField<RealField = f64>,
{
    let n = x.nrows();
    if n != x.ncols() {
        return Err(Error::DimensionMismatch("matrix_exp needs a square matrix".into()));
    }
    if !x.iter().all(|z| z.clone().is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm = one_norm(x);
    let a2 = x * x;

    let low_order = |b: &[f64]| -> DMatrix<T> {
        // U = X Σ b_{2k+1} X^{2k}, V = Σ b_{2k} X^{2k}
        let mut u = identity_times::<T>(n, b[1]);
        let mut v = identity_times::<T>(n, b[0]);
        let mut power = DMatrix::<T>::identity(n, n);
        let mut k = 2;
        while k < b.len() {
            power = &power * &a2;
            v += scaled(&power, b[k]);
            if k + 1 < b.len() {
                u += scaled(&power, b[k + 1]);
            }
            k += 2;
        }
        let u = x * u;
        pade_quotient(&u, &v)
    };

    let value_and_s = if norm <= THETA_3 {
        (low_order(&B3), 0)
    } else if norm <= THETA_5 {
        (low_order(&B5), 0)
    } else if norm <= THETA_7 {
        (low_order(&B7), 0)
    } else if norm <= THETA_9 {
        (low_order(&B9), 0)
    } else {
        let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
        let factor = 0.5f64.powi(s as i32);
        let xs = scaled(x, factor);
        let b = &B13;
        let x2 = scaled(&a2, factor * factor);
        let x4 = &x2 * &x2;
        let x6 = &x4 * &x2;
        let inner_u = &x6 * (scaled(&x6, b[13]) + scaled(&x4, b[11]) + scaled(&x2, b[9]));
        let u = &xs
            * (inner_u
                + scaled(&x6, b[7])
                + scaled(&x4, b[5])
                + scaled(&x2, b[3])
                + identity_times::<T>(n, b[1]));
        let inner_v = &x6 * (scaled(&x6, b[12]) + scaled(&x4, b[10]) + scaled(&x2, b[8]));
        let v = inner_v
            + scaled(&x6, b[6])
            + scaled(&x4, b[4])
            + scaled(&x2, b[2])
            + identity_times::<T>(n, b[0]);
        let mut r = pade_quotient(&u, &v);
        for _ in 0..s {
            r = &r * &r;
        }
        (r, s)
    };
    let (value, scaling_squarings) = value_and_s;
    if !value.iter().all(|z| z.clone().is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(MatrixFunctionResult { value, scaling_squarings })
}

/// `(V - U)⁻¹ (V + U)`.
fn pade_quotient<T: ComplexField<RealField = f64>>(u: &DMatrix<T>, v: &DMatrix<T>) -> DMatrix<T> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).unwrap_or_else(|| DMatrix::from_element(u.nrows(), u.ncols(), T::from_real(f64::NAN)))
}

/// Convenience wrapper returning just `e^X`.
pub fn expm<T: ComplexField<RealField = f64>>(x: &DMatrix<T>) -> Result<DMatrix<T>> {
    matrix_exp(x).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block_j, CMat, Mat};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_gives_identity_exactly() {
        for n in [1, 2, 5] {
            let r = matrix_exp(&Mat::zeros(n, n)).unwrap();
            assert_eq!(r.value, Mat::identity(n, n));
            assert_eq!(r.scaling_squarings, 0);
        }
    }

    #[test]
    fn rotation_by_pi() {
        let e = expm(&(block_j() * PI)).unwrap();
        assert!((e + Mat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_matches_scalar_exp() {
        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-30.0, 0.5, 12.0]));
        let e = matrix_exp(&d).unwrap();
        assert!(e.scaling_squarings > 0);
        for (i, v) in [-30.0f64, 0.5, 12.0].iter().enumerate() {
            assert!((e.value[(i, i)] - v.exp()).abs() <= 1e-13 * v.exp());
        }
    }

    #[test]
    fn complex_scalar() {
        let z = Complex64::new(0.3, 2.0);
        let e = expm(&CMat::from_element(1, 1, z)).unwrap();
        assert!((e[(0, 0)] - z.exp()).norm() < 1e-14);
    }

    #[test]
    fn nilpotent_jordan_block() {
        // exp of [[0, t], [0, 0]] is [[1, t], [0, 1]] for all scales
        for t in [1e-3, 1.0, 50.0, 1e3] {
            let m = Mat::from_row_slice(2, 2, &[0.0, t, 0.0, 0.0]);
            let e = expm(&m).unwrap();
            assert!((e[(0, 1)] - t).abs() <= 1e-12 * t);
            assert!((e[(0, 0)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let m = Mat::from_element(2, 2, f64::NAN);
        assert_eq!(matrix_exp(&m).unwrap_err(), Error::NonFinite);
    }

    proptest! {
        #[test]
        fn inverse_property(entries in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let x = Mat::from_row_slice(4, 4, &entries);
            let prod = expm(&x).unwrap() * expm(&(-&x)).unwrap();
            prop_assert!((prod - Mat::identity(4, 4)).norm() < 1e-10);
        }
    }
}
