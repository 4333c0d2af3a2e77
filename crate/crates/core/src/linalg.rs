//! Small dense linear algebra helpers shared across the crate.
//!
//! Everything here works on `Vec<T>` vectors and row-major `Vec<Vec<T>>`
//! matrices; dimensions are desk scale throughout.

use crate::scalar::Real;

pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

pub fn norm2<T: Real>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn scale<T: Real>(alpha: T, x: &[T]) -> Vec<T> {
    x.iter().map(|&v| alpha * v).collect()
}

pub fn sub<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&a, &b)| a - b).collect()
}

pub fn add<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&a, &b)| a + b).collect()
}

/// `A x` for a row-major matrix.
pub fn mat_vec<T: Real>(a: &[Vec<T>], x: &[T]) -> Vec<T> {
    a.iter().map(|row| dot(row, x)).collect()
}

/// Gram-Schmidt on the given vectors with a relative rank tolerance.
/// Returns the orthonormal vectors that survived; dependent inputs are
/// dropped.
pub fn orthonormalize<T: Real>(vectors: &[Vec<T>], rel_tol: T) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let original = norm2(v);
        if original == T::zero() {
            continue;
        }
        let mut w = v.clone();
        // two passes of re-orthogonalization keep the basis tight
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let n = norm2(&w);
        if n > rel_tol * original {
            basis.push(scale(n.recip(), &w));
        }
    }
    basis
}

/// Strict Gram-Schmidt: returns `None` if any input is (numerically)
/// dependent on its predecessors.
pub fn orthonormal_frame<T: Real>(vectors: &[Vec<T>], rel_tol: T) -> Option<Vec<Vec<T>>> {
    let frame = orthonormalize(vectors, rel_tol);
    (frame.len() == vectors.len()).then_some(frame)
}

/// Determinant via LU with partial pivoting.
pub fn det<T: Real>(a: &[Vec<T>]) -> T {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut sign = T::one();
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m[i][k].abs() > m[piv][k].abs() {
                piv = i;
            }
        }
        if m[piv][k] == T::zero() {
            return T::zero();
        }
        if piv != k {
            m.swap(piv, k);
            sign = -sign;
        }
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                let v = m[k][j];
                m[i][j] = m[i][j] - f * v;
            }
        }
    }
    let mut d = sign;
    for (k, row) in m.iter().enumerate() {
        d = d * row[k];
    }
    d
}

/// Solve `A x = b` via Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve<T: Real>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m[i][k].abs() > m[piv][k].abs() {
                piv = i;
            }
        }
        if m[piv][k].abs() <= T::epsilon() * T::c(16.0) {
            return None;
        }
        m.swap(piv, k);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..=n {
                let v = m[k][j];
                m[i][j] = m[i][j] - f * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = m[k][n];
        for j in k + 1..n {
            s = s - m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    Some(x)
}

pub fn standard_basis_vector<T: Real>(dim: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); dim];
    e[i] = T::one();
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_of_identity_like() {
        let a = vec![vec![2.0, 0.0], vec![0.0, 3.0]];
        assert!((det(&a) - 6.0f64).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_drops_dependent() {
        let v = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 5.0]];
        let b = orthonormalize(&v, 1e-10f64);
        assert_eq!(b.len(), 2);
        assert!(dot(&b[0], &b[1]).abs() < 1e-12);
    }

    #[test]
    fn solve_simple() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let x = solve(&a, &[4.0f64, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
