//! Structured convergent series in R^d.
//!
//! A series is a finite set of directions, each carrying a scalar
//! coefficient stream from a closed family of term rules. The closed
//! family is what makes convergence certificates decidable: each stream
//! classifies as absolutely convergent, conditionally convergent or
//! divergent by a rule table, and summation carries a closed-form tail
//! bound.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Cap on the number of terms certified summation may use.
pub const DEFAULT_TERM_CAP: u64 = 100_000_000;

/// Absolute resolution at which subset-sum points are deduplicated.
pub const CLOUD_DEDUP_RES: f64 = 1e-12;

fn default_scale<T: Real>() -> T {
    T::one()
}

/// A scalar coefficient stream `s(k)`, `k >= 1`, from a closed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub enum ScalarStream<T> {
    /// `s(k) = scale * k^{-alpha}`
    Power { alpha: T, scale: T },
    /// `s(k) = scale * (-1)^{k+1} * k^{-alpha}`
    AlternatingPower { alpha: T, scale: T },
    /// `s(k) = scale * ratio^k`
    Geometric { ratio: T, scale: T },
    /// `s(k) = scale * values[k-1]` for `k <= len`, else 0
    Finite {
        values: Vec<T>,
        #[serde(default = "default_scale")]
        scale: T,
    },
}

/// Convergence class decided by the rule table, not by numerics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Absolute,
    Conditional,
    Divergent,
}

/// Grouping key for the Gamma analysis: family plus decay parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signature {
    Power(u64),
    AlternatingPower(u64),
    Geometric(u64),
    Finite,
}

impl<T: Real> ScalarStream<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarStream::Power { alpha, scale } | ScalarStream::AlternatingPower { alpha, scale } => {
                if !(*alpha > T::zero()) {
                    return Err(Error::InvalidSpec("alpha must be > 0".into()));
                }
                if *scale == T::zero() {
                    return Err(Error::InvalidSpec("scale must be nonzero".into()));
                }
            }
            ScalarStream::Geometric { ratio, scale } => {
                if !(ratio.abs() < T::one()) {
                    return Err(Error::InvalidSpec("|ratio| must be < 1".into()));
                }
                if *scale == T::zero() {
                    return Err(Error::InvalidSpec("scale must be nonzero".into()));
                }
            }
            ScalarStream::Finite { .. } => {}
        }
        Ok(())
    }

    /// Term rule at index `k >= 1`.
    pub fn term(&self, k: u64) -> T {
        debug_assert!(k >= 1);
        let kf = T::from_u64(k).unwrap();
        match self {
            ScalarStream::Power { alpha, scale } => *scale * kf.powf(-*alpha),
            ScalarStream::AlternatingPower { alpha, scale } => {
                let sign = if k % 2 == 1 { T::one() } else { -T::one() };
                *scale * sign * kf.powf(-*alpha)
            }
            ScalarStream::Geometric { ratio, scale } => *scale * ratio.powi(k as i32),
            ScalarStream::Finite { values, scale } => values
                .get((k - 1) as usize)
                .map(|&v| *scale * v)
                .unwrap_or_else(T::zero),
        }
    }

    /// Rule-table classification of `sum |s(k)|`.
    pub fn classify(&self) -> Convergence {
        match self {
            ScalarStream::Power { alpha, .. } => {
                if *alpha > T::one() {
                    Convergence::Absolute
                } else {
                    Convergence::Divergent
                }
            }
            ScalarStream::AlternatingPower { alpha, .. } => {
                if *alpha > T::one() {
                    Convergence::Absolute
                } else {
                    Convergence::Conditional
                }
            }
            ScalarStream::Geometric { .. } | ScalarStream::Finite { .. } => Convergence::Absolute,
        }
    }

    pub fn scale(&self) -> T {
        match self {
            ScalarStream::Power { scale, .. }
            | ScalarStream::AlternatingPower { scale, .. }
            | ScalarStream::Geometric { scale, .. }
            | ScalarStream::Finite { scale, .. } => *scale,
        }
    }

    /// Grouping key; the scale is deliberately excluded.
    pub fn signature(&self) -> Signature {
        let bits = |x: &T| x.to_f64().unwrap().to_bits();
        match self {
            ScalarStream::Power { alpha, .. } => Signature::Power(bits(alpha)),
            ScalarStream::AlternatingPower { alpha, .. } => Signature::AlternatingPower(bits(alpha)),
            ScalarStream::Geometric { ratio, .. } => Signature::Geometric(bits(ratio)),
            ScalarStream::Finite { .. } => Signature::Finite,
        }
    }

    /// Certified sum: `(value, bound, terms_used)` with
    /// `|value - true sum| <= bound <= tol`.
    pub fn sum(&self, tol: T, term_cap: u64) -> Result<(T, T, u64)> {
        assert!(tol > T::zero(), "tol must be positive");
        match self {
            ScalarStream::Finite { values, scale } => {
                let s = values.iter().map(|&v| *scale * v).sum();
                Ok((s, T::zero(), values.len() as u64))
            }
            ScalarStream::Geometric { ratio, scale } => {
                // sum_{k>=1} scale * r^k = scale * r / (1 - r)
                Ok((*scale * *ratio / (T::one() - *ratio), T::zero(), 0))
            }
            ScalarStream::Power { alpha, scale } => {
                if !(*alpha > T::one()) {
                    return Err(Error::DivergentSeries("power stream with alpha <= 1".into()));
                }
                // integral tail bound: sum_{k>N} k^-a <= N^{1-a}/(a-1)
                let a = alpha.to_f64().unwrap();
                let sc = scale.abs().to_f64().unwrap();
                let t = tol.to_f64().unwrap();
                let needed = (sc / (t * (a - 1.0))).powf(1.0 / (a - 1.0)).ceil();
                let n = needed.max(1.0) as u64;
                if n > term_cap {
                    return Err(Error::ToleranceUnreachable {
                        required: n,
                        cap: term_cap,
                    });
                }
                let mut s = T::zero();
                for k in 1..=n {
                    s = s + self.term(k);
                }
                let nf = T::from_u64(n).unwrap();
                let bound = scale.abs() * nf.powf(T::one() - *alpha) / (*alpha - T::one());
                Ok((s, bound, n))
            }
            ScalarStream::AlternatingPower { alpha, scale } => {
                // alternating remainder: |tail after N| <= |s(N+1)|
                let a = alpha.to_f64().unwrap();
                let sc = scale.abs().to_f64().unwrap();
                let t = tol.to_f64().unwrap();
                let needed = (sc / t).powf(1.0 / a).ceil();
                let n = needed.max(1.0) as u64;
                if n > term_cap {
                    return Err(Error::ToleranceUnreachable {
                        required: n,
                        cap: term_cap,
                    });
                }
                let mut s = T::zero();
                for k in 1..=n {
                    s = s + self.term(k);
                }
                let bound = self.term(n + 1).abs();
                Ok((s, bound, n))
            }
        }
    }
}

/// One direction of a series with its coefficient stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Component<T> {
    pub direction: Vec<T>,
    pub stream: ScalarStream<T>,
}

/// A structured convergent series `u_k = sum_i s_i(k) d_i` in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawSeriesSpec<T>")]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SeriesSpec<T> {
    dimension: usize,
    components: Vec<Component<T>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
struct RawSeriesSpec<T> {
    dimension: usize,
    components: Vec<Component<T>>,
}

impl<T: Real> TryFrom<RawSeriesSpec<T>> for SeriesSpec<T> {
    type Error = Error;
    fn try_from(raw: RawSeriesSpec<T>) -> Result<Self> {
        SeriesSpec::new(raw.dimension, raw.components)
    }
}

impl<T: Real> SeriesSpec<T> {
    pub fn new(dimension: usize, components: Vec<Component<T>>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidSpec("dimension must be >= 1".into()));
        }
        if components.is_empty() {
            return Err(Error::InvalidSpec("components must be nonempty".into()));
        }
        for c in &components {
            if c.direction.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: c.direction.len(),
                });
            }
            if linalg::norm2(&c.direction) == T::zero() {
                return Err(Error::InvalidSpec("directions must be nonzero".into()));
            }
            c.stream.validate()?;
            if c.stream.classify() == Convergence::Divergent {
                return Err(Error::DivergentSeries(format!("{:?}", c.stream)));
            }
        }
        Ok(Self {
            dimension,
            components,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    /// `u_k`, `k >= 1`.
    pub fn term(&self, k: u64) -> Vec<T> {
        let mut u = vec![T::zero(); self.dimension];
        for c in &self.components {
            let s = c.stream.term(k);
            linalg::axpy(s, &c.direction, &mut u);
        }
        u
    }

    /// `sum_{k=1}^N u_k`; `N = 0` gives the zero vector.
    pub fn partial_sum(&self, n: u64) -> Vec<T> {
        let mut s = vec![T::zero(); self.dimension];
        for k in 1..=n {
            let u = self.term(k);
            for (a, b) in s.iter_mut().zip(&u) {
                *a = *a + *b;
            }
        }
        s
    }

    /// Certified sum: `(S, bound)` with `||S - true sum||_2 <= bound <= tol`.
    pub fn sum(&self, tol: T) -> Result<(Vec<T>, T)> {
        self.sum_with_cap(tol, DEFAULT_TERM_CAP)
    }

    pub fn sum_with_cap(&self, tol: T, term_cap: u64) -> Result<(Vec<T>, T)> {
        assert!(tol > T::zero(), "tol must be positive");
        let total_weight: T = self
            .components
            .iter()
            .map(|c| linalg::norm2(&c.direction))
            .sum();
        let mut s = vec![T::zero(); self.dimension];
        let mut bound = T::zero();
        for c in &self.components {
            let dir_norm = linalg::norm2(&c.direction);
            let per_tol = tol * dir_norm / total_weight / dir_norm; // = tol / total_weight
            let (v, b, _) = c.stream.sum(per_tol, term_cap)?;
            linalg::axpy(v, &c.direction, &mut s);
            bound = bound + b * dir_norm;
        }
        Ok((s, bound))
    }
}

/// Finite subset sums of tail terms, `Z_m` over the window `{m..=horizon}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetSumCloud<T> {
    pub m: u64,
    pub horizon: u64,
    pub points: Vec<Vec<T>>,
    pub truncated: bool,
}

impl<T: Real> SubsetSumCloud<T> {
    pub fn contains(&self, x: &[T], tol: T) -> bool {
        self.points
            .iter()
            .any(|p| linalg::norm2(&linalg::sub(p, x)) <= tol)
    }
}

/// Enumerate all subset sums over the index window `{m..=horizon}`,
/// breadth-first by subset cardinality, deduplicated at [`CLOUD_DEDUP_RES`].
/// The empty subset is included, so 0 is always a point.
pub fn enumerate_zm<T: Real>(
    spec: &SeriesSpec<T>,
    m: u64,
    horizon: u64,
    max_points: usize,
) -> SubsetSumCloud<T> {
    assert!(m >= 1 && max_points >= 1);
    let terms: Vec<Vec<T>> = if horizon >= m {
        (m..=horizon).map(|k| spec.term(k)).collect()
    } else {
        Vec::new()
    };
    let n = terms.len();
    let mut seen: HashSet<Vec<i128>> = HashSet::new();
    let mut points: Vec<Vec<T>> = Vec::new();
    let mut truncated = false;

    let key_of = |p: &[T]| -> Vec<i128> {
        p.iter()
            .map(|&v| (v.to_f64().unwrap() / CLOUD_DEDUP_RES).round() as i128)
            .collect()
    };
    let push = |p: Vec<T>, seen: &mut HashSet<Vec<i128>>, points: &mut Vec<Vec<T>>| -> bool {
        if seen.insert(key_of(&p)) {
            points.push(p);
        }
        points.len() >= max_points
    };

    push(vec![T::zero(); spec.dimension()], &mut seen, &mut points);

    // breadth-first by cardinality: combinations of each size in order
    'outer: for size in 1..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let mut sum = vec![T::zero(); spec.dimension()];
            for &i in &idx {
                for (a, b) in sum.iter_mut().zip(&terms[i]) {
                    *a = *a + *b;
                }
            }
            if push(sum, &mut seen, &mut points) {
                truncated = size < n || !is_last_combination(&idx, n);
                break 'outer;
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }

    SubsetSumCloud {
        m,
        horizon,
        points,
        truncated,
    }
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - (k - i) {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn is_last_combination(idx: &[usize], n: usize) -> bool {
    let k = idx.len();
    idx.iter().enumerate().all(|(i, &v)| v == n - k + i)
}
