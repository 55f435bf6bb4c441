//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants (degrees 3, 5, 7, 9, 13 and the matching backward-error
//! thresholds of Higham, 2005).
//!
//! The input is first rescaled by an exact power-of-two diagonal similarity.
//! Lower-triangular inputs (the generator matrices) get a row-wise scaling
//! that bounds every subdiagonal entry, which matters when the entries grow
//! factorially down the rows; they also keep their exact zero pattern, the
//! Padé denominator being solved by forward substitution instead of LU.
//! Other inputs get Parlett–Reinsch balancing.

use nalgebra::DMatrix;

use crate::{Error, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn is_lower_triangular(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|j| (0..j).all(|i| a[(i, j)] == 0.0))
}

/// Power-of-two diagonal `d` such that `B = D⁻¹ A D` has comparable
/// off-diagonal row and column norms.
fn balance(a: &mut DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    for _ in 0..200 {
        let mut changed = false;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if c + r < 0.95 * total {
                changed = true;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Power-of-two exponents `e` for a lower-triangular `A` such that every
/// strictly-lower entry of `2^{-e_i} A_{ij} 2^{e_j}` is at most 1 in
/// magnitude (up to the rounding of the exponent). Generators whose entries
/// grow factorially down the rows become entrywise bounded, so the scaling
/// step needs few squarings and the small leading block is not swamped.
fn triangular_exponents(a: &DMatrix<f64>) -> Vec<i32> {
    let n = a.nrows();
    let mut e = vec![0i32; n];
    for i in 1..n {
        let mut best = f64::NEG_INFINITY;
        for j in 0..i {
            let v = a[(i, j)].abs();
            if v > 0.0 {
                best = best.max(e[j] as f64 + v.log2());
            }
        }
        e[i] = if best.is_finite() { best.ceil() as i32 } else { e[i - 1] };
    }
    e
}

/// `x · 2^k` without intermediate overflow of the power.
fn scale2(mut x: f64, mut k: i32) -> f64 {
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k)
}

/// `e^A` for a square matrix with finite entries.
pub fn matrix_exponential(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.iter().any(|v| !v.is_finite()) {
        return exp_unbalanced(a);
    }
    let n = a.nrows();
    if is_lower_triangular(a) {
        let ex = triangular_exponents(a);
        let b = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                a[(i, j)]
            } else {
                scale2(a[(i, j)], ex[j] - ex[i])
            }
        });
        let mut e = exp_unbalanced(&b)?;
        for j in 0..n {
            for i in j + 1..n {
                e[(i, j)] = scale2(e[(i, j)], ex[i] - ex[j]);
            }
        }
        return finite_or_overflow(e);
    }
    let mut b = a.clone();
    let d = balance(&mut b);
    let mut e = exp_unbalanced(&b)?;
    for j in 0..n {
        for i in 0..n {
            e[(i, j)] *= d[i] / d[j];
        }
    }
    finite_or_overflow(e)
}

fn finite_or_overflow(e: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "matrix exponential overflowed when undoing the balancing (dim {})",
            e.nrows()
        )));
    }
    Ok(e)
}

fn exp_unbalanced(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix exponential input has non-finite entries".into(),
        ));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let lower = is_lower_triangular(a);
    let norm = one_norm(a);
    let ident = DMatrix::<f64>::identity(n, n);

    for &(deg, theta) in &THETA[..4] {
        if norm <= theta {
            let a2 = a * a;
            let (u, v) = match deg {
                3 => odd_even(a, &a2, &ident, &B3),
                5 => odd_even(a, &a2, &ident, &B5),
                7 => odd_even(a, &a2, &ident, &B7),
                _ => odd_even(a, &a2, &ident, &B9),
            };
            return pade_solve(u, v, lower, norm, 0);
        }
    }

    let theta13 = THETA[4].1;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    if s > 1100 {
        return Err(Error::Numerical(format!(
            "matrix exponential: 1-norm {norm:e} needs {s} squarings (dim {n})"
        )));
    }
    let scaled = a * 2f64.powi(-s);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = &scaled * (&a6 * &inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * &inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let mut r = pade_solve(u, v, lower, norm, s)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "matrix exponential overflowed while squaring: 1-norm {norm:e}, {s} squarings, dim {n}"
        )));
    }
    Ok(r)
}

/// Odd part `U` and even part `V` of the degree-`2k+1` Padé numerator.
fn odd_even(a: &DMatrix<f64>, a2: &DMatrix<f64>, ident: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut pow = ident.clone();
    let mut odd = ident * b[1];
    let mut even = ident * b[0];
    for k in 1..b.len() / 2 {
        pow = &pow * a2;
        odd += &pow * b[2 * k + 1];
        even += &pow * b[2 * k];
    }
    (a * odd, even)
}

fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>, lower: bool, norm: f64, squarings: i32) -> Result<DMatrix<f64>> {
    let n = u.nrows();
    let p = &v + &u;
    let q = v - u;
    let solved = if lower {
        q.solve_lower_triangular(&p)
    } else {
        q.lu().solve(&p)
    };
    match solved {
        Some(r) if r.iter().all(|v| v.is_finite()) => Ok(r),
        _ => Err(Error::Numerical(format!(
            "matrix exponential: singular or non-finite Padé denominator (dim {n}, 1-norm {norm:e}, {squarings} squarings)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn taylor(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
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
    fn trivial_cases() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(matrix_exponential(&z).unwrap(), DMatrix::identity(4, 4));

        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.5, 0.3]));
        let e = matrix_exponential(&d).unwrap();
        assert_relative_eq!(e[(0, 0)], (-1.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(e[(1, 1)], 0.3f64.exp(), max_relative = 1e-15);
        assert_eq!(e[(0, 1)], 0.0);

        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let e = matrix_exponential(&nil).unwrap();
        assert_relative_eq!(e, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let mut a = DMatrix::<f64>::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matrix_exponential(&a).is_err());
        assert!(matrix_exponential(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn rotation_generator() {
        let th = 2.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let e = matrix_exponential(&a).unwrap();
        assert_relative_eq!(e[(0, 0)], th.cos(), epsilon = 1e-14);
        assert_relative_eq!(e[(1, 0)], th.sin(), epsilon = 1e-14);
    }

    #[test]
    fn large_norm_uses_squaring() {
        // 2x2 Jordan block: e^{λI + N} = e^λ (I + N)
        let a = DMatrix::from_row_slice(2, 2, &[-30.0, 0.0, 45.0, -30.0]);
        let e = matrix_exponential(&a).unwrap();
        let el = (-30.0f64).exp();
        assert_relative_eq!(e[(0, 0)], el, max_relative = 1e-13);
        assert_relative_eq!(e[(1, 0)], 45.0 * el, max_relative = 1e-13);
        assert_eq!(e[(0, 1)], 0.0);
    }

    proptest! {
        #[test]
        fn agrees_with_taylor_for_moderate_norms(
            entries in proptest::collection::vec(-1.0f64..1.0, 16),
            scale in 0.001f64..3.0,
        ) {
            let a = DMatrix::from_vec(4, 4, entries) * scale;
            let e = matrix_exponential(&a).unwrap();
            let t = taylor(&a, 80);
            let err = (&e - &t).abs().max();
            prop_assert!(err <= 1e-12 * t.abs().max().max(1.0));
        }
    }
}
