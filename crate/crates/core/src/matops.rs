//! Matrix-calculus operators on `n x n` matrices.
//!
//! Index conventions. With 1-based indices, `vec` maps entry `(i, j)` to
//! position `(j - 1) n + i` and `vech` maps entry `(i, j)`, `i >= j`, to
//! position `(j - 1) n - j (j - 1) / 2 + i`. Everything here is 0-based, so
//! the same maps read `j n + i` and `j n - j (j + 1) / 2 + i`.
//!
//! All operators are dense; the dimensions in use are small.

use nalgebra::{DMatrix, DVector};

/// Position of entry `(i, j)` in `vec(T)` (0-based).
#[inline]
pub fn vec_index(n: usize, i: usize, j: usize) -> usize {
    j * n + i
}

/// Position of entry `(i, j)`, `i >= j`, in `vech(T)` (0-based).
#[inline]
pub fn vech_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    j * n - j * (j + 1) / 2 + i
}

/// Length of `vech` for an `n x n` matrix.
#[inline]
pub fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of [`vech_len`]: the `n` with `n (n + 1) / 2 == len`, if any.
pub fn dim_from_vech_len(len: usize) -> Option<usize> {
    (0..=len).find(|&n| vech_len(n) >= len).filter(|&n| vech_len(n) == len)
}

/// Column-major stacking of a square matrix.
pub fn vec_of(t: &DMatrix<f64>) -> DVector<f64> {
    assert!(t.is_square(), "vec_of expects a square matrix");
    // nalgebra stores column-major, which is exactly the vec order
    DVector::from_column_slice(t.as_slice())
}

/// Lower triangle (diagonal included) read column by column.
pub fn vech_of(t: &DMatrix<f64>) -> DVector<f64> {
    assert!(t.is_square(), "vech_of expects a square matrix");
    let n = t.nrows();
    let mut out = Vec::with_capacity(vech_len(n));
    for j in 0..n {
        for i in j..n {
            out.push(t[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Rebuilds the symmetric matrix whose `vech` is `v`.
pub fn unvech(v: &[f64]) -> DMatrix<f64> {
    let n = dim_from_vech_len(v.len()).expect("length is not triangular");
    let mut s = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let x = v[vech_index(n, i, j)];
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
    }
    s
}

pub fn diag_of(t: &DMatrix<f64>) -> DVector<f64> {
    assert!(t.is_square(), "diag_of expects a square matrix");
    t.diagonal()
}

pub fn diag_inv(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

/// The `n^2 x n^2` permutation with `C vec(T) = vec(T^T)`.
pub fn commutation_matrix(n: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            c[(vec_index(n, j, i), vec_index(n, i, j))] = 1.0;
        }
    }
    c
}

/// The `n^2 x n(n+1)/2` matrix with `D vech(S) = vec(S)` for symmetric `S`.
pub fn duplication_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n * n, vech_len(n));
    for j in 0..n {
        for i in 0..n {
            let k = vech_index(n, i.max(j), i.min(j));
            d[(vec_index(n, i, j), k)] = 1.0;
        }
    }
    d
}

/// Moore-Penrose inverse of the duplication matrix, built entrywise.
///
/// Row `k` of `D^+` picks the diagonal entry with weight 1, or averages the
/// two mirrored off-diagonal positions with weight 1/2 each.
pub fn dup_pinv(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(vech_len(n), n * n);
    for j in 0..n {
        for i in j..n {
            let k = vech_index(n, i, j);
            if i == j {
                p[(k, vec_index(n, i, i))] = 1.0;
            } else {
                p[(k, vec_index(n, i, j))] = 0.5;
                p[(k, vec_index(n, j, i))] = 0.5;
            }
        }
    }
    p
}

/// `vec(I_n)` as a column.
pub fn vec_identity(n: usize) -> DVector<f64> {
    vec_of(&DMatrix::identity(n, n))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst residual over the four Moore-Penrose conditions for `pinv` against `a`.
pub fn moore_penrose_residual(a: &DMatrix<f64>, pinv: &DMatrix<f64>) -> f64 {
    let apa = a * pinv * a;
    let pap = pinv * a * pinv;
    let ap = a * pinv;
    let pa = pinv * a;
    [
        max_abs_diff(&apa, a),
        max_abs_diff(&pap, pinv),
        max_abs_diff(&ap, &ap.transpose()),
        max_abs_diff(&pa, &pa.transpose()),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}
