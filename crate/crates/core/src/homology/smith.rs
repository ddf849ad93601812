//! Smith normal form over the integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::matrix::IntMatrix;

/// Diagonal invariant factors `d_1 | d_2 | ...` of the Smith normal form,
/// `min(rows, cols)` of them, all non-negative. Zeros come last.
pub fn smith_invariant_factors(m: &IntMatrix) -> Vec<BigInt> {
    let mut a = m.clone();
    let (rows, cols) = (a.rows(), a.cols());
    let n = rows.min(cols);
    for t in 0..n {
        let Some((pi, pj)) = smallest_nonzero(&a, t) else {
            break;
        };
        a.swap_rows(t, pi);
        a.swap_cols(t, pj);
        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if a[(i, t)].is_zero() {
                    continue;
                }
                let q = a[(i, t)].div_floor(&a[(t, t)]);
                a.add_row_multiple(i, t, &-q);
                if !a[(i, t)].is_zero() {
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                if a[(t, j)].is_zero() {
                    continue;
                }
                let q = a[(t, j)].div_floor(&a[(t, t)]);
                a.add_col_multiple(j, t, &-q);
                if !a[(t, j)].is_zero() {
                    dirty = true;
                }
            }
            if dirty {
                // a remainder survived; it is smaller than the pivot
                let (pi, pj) = smallest_nonzero_in_cross(&a, t);
                a.swap_rows(t, pi);
                a.swap_cols(t, pj);
                continue;
            }
            // row and column cleared: enforce divisibility of the remaining block
            let offender = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !a[(i, j)].is_multiple_of(&a[(t, t)]));
            match offender {
                Some((i, _)) => {
                    let one = BigInt::from(1);
                    a.add_row_multiple(t, i, &one);
                }
                None => break,
            }
        }
    }
    (0..n).map(|i| a[(i, i)].abs()).collect()
}

/// The invariant factors different from 1: the torsion of the cokernel when
/// the matrix is non-singular.
pub fn nontrivial_factors(factors: &[BigInt]) -> Vec<BigInt> {
    factors.iter().filter(|d| **d != BigInt::from(1)).cloned().collect()
}

fn smallest_nonzero(a: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), BigInt)> = None;
    for i in t..a.rows() {
        for j in t..a.cols() {
            let v = a[(i, j)].abs();
            if v.is_zero() {
                continue;
            }
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some(((i, j), v));
            }
        }
    }
    best.map(|(p, _)| p)
}

fn smallest_nonzero_in_cross(a: &IntMatrix, t: usize) -> (usize, usize) {
    let mut best = ((t, t), a[(t, t)].abs());
    let candidates = (t + 1..a.rows()).map(|i| (i, t)).chain((t + 1..a.cols()).map(|j| (t, j)));
    for (i, j) in candidates {
        let v = a[(i, j)].abs();
        if !v.is_zero() && v < best.1 {
            best = ((i, j), v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(smith_invariant_factors(&IntMatrix::zeros(2, 2)), ints(&[0, 0]));
    }

    #[test]
    fn diagonal_two_three() {
        assert_eq!(smith_invariant_factors(&IntMatrix::diagonal(&[2, 3])), ints(&[1, 6]));
    }

    #[test]
    fn needs_divisibility_fix() {
        // diag(4, 6) has invariant factors 2, 12
        assert_eq!(smith_invariant_factors(&IntMatrix::diagonal(&[4, 6])), ints(&[2, 12]));
        assert_eq!(smith_invariant_factors(&IntMatrix::diagonal(&[6, 0, 4])), ints(&[2, 12, 0]));
    }

    #[test]
    fn rectangular_input() {
        let m = IntMatrix::from_rows(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]);
        assert_eq!(smith_invariant_factors(&m), ints(&[2, 6, 12]));
        let r = IntMatrix::from_rows(&[vec![2, 0, 0], vec![0, 3, 0]]);
        assert_eq!(smith_invariant_factors(&r), ints(&[1, 6]));
    }

    fn gcd_of_minors_2(m: &IntMatrix) -> BigInt {
        // gcd of all 2x2 minors of a 3x3 matrix
        let mut g = BigInt::zero();
        for r in [(0, 1), (0, 2), (1, 2)] {
            for c in [(0, 1), (0, 2), (1, 2)] {
                let minor = &m[(r.0, c.0)] * &m[(r.1, c.1)] - &m[(r.0, c.1)] * &m[(r.1, c.0)];
                g = g.gcd(&minor);
            }
        }
        g
    }

    proptest! {
        #[test]
        fn factors_match_determinantal_divisors(v in proptest::collection::vec(-9i64..=9, 9)) {
            let m = IntMatrix::from_rows(&[v[0..3].to_vec(), v[3..6].to_vec(), v[6..9].to_vec()]);
            let d = smith_invariant_factors(&m);
            let g1 = v.iter().fold(BigInt::zero(), |g, &x| g.gcd(&BigInt::from(x)));
            prop_assert_eq!(&d[0], &g1);
            prop_assert_eq!(&d[0] * &d[1], gcd_of_minors_2(&m));
            prop_assert_eq!(d.iter().product::<BigInt>(), m.determinant().abs());
            for w in d.windows(2) {
                prop_assert!(w[1].is_zero() || (!w[0].is_zero() && w[1].is_multiple_of(&w[0])));
            }
            prop_assert!(d.iter().all(|x| !x.is_negative()));
        }
    }
}
