//! Finite-dimensional weighted-Hilbert linear algebra: inner products,
//! singular values via one-sided Jacobi, Hilbert-Schmidt norms and volume
//! numbers (with a brute-force subspace-search estimator).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Relative threshold under which a singular value counts as zero for rank
/// decisions.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Off-diagonal mass threshold for the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-14;

/// R^d with the inner product `<x,y> = sum_i w_i x_i y_i`, all `w_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedHilbert<T> {
    weights: Vec<T>,
}

impl<T: Real> WeightedHilbert<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpec("dimension must be >= 1".into()));
        }
        if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidSpec(
                "all weights must be strictly positive and finite".into(),
            ));
        }
        Ok(Self { weights })
    }

    /// Standard Euclidean space: all weights one.
    pub fn standard(dim: usize) -> Self {
        Self {
            weights: vec![T::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        self.weights
            .iter()
            .zip(x.iter().zip(y))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum()
    }

    pub fn norm(&self, x: &[T]) -> T {
        self.inner(x, x).sqrt()
    }

    /// Coordinates of `x` in an orthonormal basis of this space
    /// (`x_i * sqrt(w_i)`).
    pub fn to_orthonormal(&self, x: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .zip(x)
            .map(|(&w, &v)| w.sqrt() * v)
            .collect()
    }
}

/// A linear map between two weighted Hilbert spaces, stored as a row-major
/// `dim(codomain) x dim(domain)` matrix acting on coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap<T> {
    matrix: Vec<Vec<T>>,
    domain: WeightedHilbert<T>,
    codomain: WeightedHilbert<T>,
}

impl<T: Real> LinearMap<T> {
    pub fn new(
        matrix: Vec<Vec<T>>,
        domain: WeightedHilbert<T>,
        codomain: WeightedHilbert<T>,
    ) -> Result<Self> {
        if matrix.len() != codomain.dim() || matrix.iter().any(|r| r.len() != domain.dim()) {
            return Err(Error::InvalidSpec(format!(
                "matrix shape must be {}x{}",
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(Self {
            matrix,
            domain,
            codomain,
        })
    }

    /// Diagonal map between standard Euclidean spaces.
    pub fn diagonal(entries: &[T]) -> Self {
        let d = entries.len();
        let mut matrix = vec![vec![T::zero(); d]; d];
        for (i, &e) in entries.iter().enumerate() {
            matrix[i][i] = e;
        }
        Self {
            matrix,
            domain: WeightedHilbert::standard(d),
            codomain: WeightedHilbert::standard(d),
        }
    }

    /// The identity embedding between two spaces over the same R^d.
    pub fn identity_embedding(
        domain: WeightedHilbert<T>,
        codomain: WeightedHilbert<T>,
    ) -> Result<Self> {
        if domain.dim() != codomain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: codomain.dim(),
            });
        }
        let d = domain.dim();
        let mut matrix = vec![vec![T::zero(); d]; d];
        for (i, row) in matrix.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Self::new(matrix, domain, codomain)
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.matrix
    }

    pub fn domain(&self) -> &WeightedHilbert<T> {
        &self.domain
    }

    pub fn codomain(&self) -> &WeightedHilbert<T> {
        &self.codomain
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        linalg::mat_vec(&self.matrix, x)
    }

    /// Compose `self . other` (apply `other` first).
    pub fn compose(&self, other: &LinearMap<T>) -> Result<Self> {
        if other.codomain.dim() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim(),
                got: other.codomain.dim(),
            });
        }
        let rows = self.matrix.len();
        let cols = other.domain.dim();
        let inner = self.domain.dim();
        let mut matrix = vec![vec![T::zero(); cols]; rows];
        for i in 0..rows {
            for k in 0..inner {
                let a = self.matrix[i][k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..cols {
                    matrix[i][j] = matrix[i][j] + a * other.matrix[k][j];
                }
            }
        }
        Self::new(matrix, other.domain.clone(), self.codomain.clone())
    }

    /// `W_cod^{1/2} M W_dom^{-1/2}`: the matrix of the map between the
    /// orthonormalized coordinates of its spaces.
    pub fn normalized_matrix(&self) -> Vec<Vec<T>> {
        let wd: Vec<T> = self.domain.weights.iter().map(|&w| w.sqrt()).collect();
        let wc: Vec<T> = self.codomain.weights.iter().map(|&w| w.sqrt()).collect();
        self.matrix
            .iter()
            .zip(&wc)
            .map(|(row, &c)| row.iter().zip(&wd).map(|(&m, &d)| c * m / d).collect())
            .collect()
    }
}

/// Singular values, volume numbers and the HS norm of a map.
///
/// Between Hilbert spaces the Kolmogorov, approximation and Hilbert numbers
/// all coincide with the singular values, so one list serves them all.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SNumberReport<T> {
    pub singular_values: Vec<T>,
    pub volume_numbers: Vec<T>,
    pub hs_norm: T,
}

/// Hilbert-Schmidt norm: the Frobenius norm of the weight-normalized matrix.
pub fn hs_norm<T: Real>(map: &LinearMap<T>) -> T {
    let m = map.normalized_matrix();
    m.iter()
        .flat_map(|row| row.iter().map(|&v| v * v))
        .sum::<T>()
        .sqrt()
}

/// Singular values of the weight-normalized matrix, sorted descending,
/// length `min(dims)`. One-sided Jacobi with a deterministic sweep order.
pub fn singular_values<T: Real>(map: &LinearMap<T>) -> Vec<T> {
    let m = map.normalized_matrix();
    singular_values_of(&m)
}

pub(crate) fn singular_values_of<T: Real>(m: &[Vec<T>]) -> Vec<T> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // work on columns; transpose when needed so cols = min(dims)
    let (nr, nc, transposed) = if rows < cols {
        (cols, rows, true)
    } else {
        (rows, cols, false)
    };
    let mut col: Vec<Vec<T>> = (0..nc)
        .map(|j| {
            (0..nr)
                .map(|i| if transposed { m[j][i] } else { m[i][j] })
                .collect()
        })
        .collect();

    let tol = T::c(JACOBI_TOL).max(T::epsilon() * T::c(4.0));
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..nc {
            for q in p + 1..nc {
                let (cp, cq) = {
                    let (a, b) = col.split_at_mut(q);
                    (&mut a[p], &mut b[0])
                };
                let app = linalg::dot(cp, cp);
                let aqq = linalg::dot(cq, cq);
                let apq = linalg::dot(cp, cq);
                if app == T::zero() || aqq == T::zero() {
                    continue;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (T::c(2.0) * apq);
                let t = if zeta >= T::zero() {
                    (zeta + (T::one() + zeta * zeta).sqrt()).recip()
                } else {
                    -((-zeta + (T::one() + zeta * zeta).sqrt()).recip())
                };
                let c = (T::one() + t * t).sqrt().recip();
                let s = c * t;
                for i in 0..nr {
                    let vp = cp[i];
                    let vq = cq[i];
                    cp[i] = c * vp - s * vq;
                    cq[i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<T> = col.iter().map(|c| linalg::norm2(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Numerical rank from a singular value list.
pub fn rank_of<T: Real>(singular_values: &[T]) -> usize {
    let max = singular_values.first().copied().unwrap_or(T::zero());
    if max == T::zero() {
        return 0;
    }
    let cut = T::c(RANK_REL_TOL) * max;
    singular_values.iter().filter(|&&s| s > cut).count()
}

/// `v_n(T)`: geometric mean of the first `n` singular values; zero when the
/// rank is below `n`.
pub fn volume_number<T: Real>(map: &LinearMap<T>, n: usize) -> T {
    assert!(n >= 1, "n must be >= 1");
    let sv = singular_values(map);
    volume_number_from_singular_values(&sv, n)
}

pub fn volume_number_from_singular_values<T: Real>(sv: &[T], n: usize) -> T {
    if n > sv.len() || rank_of(sv) < n {
        return T::zero();
    }
    let log_sum: T = sv[..n].iter().map(|&s| s.ln()).sum();
    (log_sum / T::from_usize(n).unwrap()).exp()
}

pub fn s_number_report<T: Real>(map: &LinearMap<T>) -> SNumberReport<T> {
    let sv = singular_values(map);
    let volume_numbers = (1..=sv.len())
        .map(|n| volume_number_from_singular_values(&sv, n))
        .collect();
    let hs = sv.iter().map(|&s| s * s).sum::<T>().sqrt();
    SNumberReport {
        singular_values: sv,
        volume_numbers,
        hs_norm: hs,
    }
}

/// Brute-force estimate of `v_n`: maximize the n-dimensional volume ratio
/// over seeded random n-dimensional subspaces, then refine locally with a
/// shrinking random-perturbation search. A lower bound of the true value,
/// converging to it as `trials` grows. Returns zero when no sampled subspace
/// has an n-dimensional image and the map's rank is below `n`.
pub fn volume_number_bruteforce<T: Real>(
    map: &LinearMap<T>,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<T> {
    let d = map.domain().dim();
    if n < 1 || n > d {
        return Err(Error::InvalidSpec(format!(
            "n must be in 1..=dim(domain) = {d}, got {n}"
        )));
    }
    let a = map.normalized_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let objective = |frame: &[Vec<T>]| -> T {
        // columns of A restricted to the frame
        let image: Vec<Vec<T>> = frame.iter().map(|f| linalg::mat_vec(&a, f)).collect();
        let gram: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| linalg::dot(&image[i], &image[j])).collect())
            .collect();
        let det = linalg::det(&gram);
        if det <= T::zero() {
            T::zero()
        } else {
            det.ln().div(T::from_usize(2 * n).unwrap()).exp()
        }
    };

    let sample_frame = |rng: &mut ChaCha8Rng| -> Vec<Vec<T>> {
        loop {
            let cand: Vec<Vec<T>> = (0..n)
                .map(|_| (0..d).map(|_| T::c(gauss(rng))).collect())
                .collect();
            if let Some(f) = linalg::orthonormal_frame(&cand, T::c(1e-6)) {
                return f;
            }
        }
    };

    let mut best_frame = sample_frame(&mut rng);
    let mut best = objective(&best_frame);
    for _ in 1..trials.max(1) {
        let f = sample_frame(&mut rng);
        let v = objective(&f);
        if v > best {
            best = v;
            best_frame = f;
        }
    }

    if best == T::zero() {
        // every sampled image was rank deficient; the true value is zero
        // exactly when the map's rank is below n
        return Ok(T::zero());
    }

    // local refinement: random perturbations with a shrinking step
    let mut step = T::c(0.3);
    let mut fails = 0usize;
    let refine_iters = 4000usize;
    for _ in 0..refine_iters {
        let cand: Vec<Vec<T>> = best_frame
            .iter()
            .map(|f| {
                f.iter()
                    .map(|&v| v + step * T::c(gauss(&mut rng)))
                    .collect()
            })
            .collect();
        if let Some(f) = linalg::orthonormal_frame(&cand, T::c(1e-8)) {
            let v = objective(&f);
            if v > best {
                best = v;
                best_frame = f;
                fails = 0;
                continue;
            }
        }
        fails += 1;
        if fails >= 25 {
            step = step * T::c(0.5);
            fails = 0;
            if step < T::c(1e-9) {
                break;
            }
        }
    }
    Ok(best)
}

/// Standard normal sample via Box-Muller; deterministic given the rng state.
fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
