//! Koethe matrices, echelon/co-echelon norms, the l1-ratio nuclearity test
//! and construction of truncated Hilbert-disc scales with HS <= 1/2 links.
//!
//! Grid families are a closed enumeration so that the l1-ratio decisions
//! rest on certified tail bounds instead of numeric truncation guesses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hs_norm, LinearMap, WeightedHilbert};
use crate::scalar::Real;

/// A Koethe matrix `a_n(i) > 0`, nondecreasing in `n`, from a closed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub enum KoetheMatrix<T> {
    /// `a_n(i) = i^n`; the grid of the space of rapidly decreasing sequences.
    Power,
    /// `a_n(i) = c`
    Constant { c: T },
    /// `a_n(i) = r_n^i` with the (finite, nondecreasing) ratio list `r_n`.
    Geometric { ratios: Vec<T> },
    /// explicit finite grid, `grid[n-1][i-1] = a_n(i)`
    Table { grid: Vec<Vec<T>> },
}

impl<T: Real> KoetheMatrix<T> {
    /// `r_n = 1 - 2^{-n}` for `n = 1..=levels`.
    pub fn geometric_dyadic(levels: usize) -> Self {
        KoetheMatrix::Geometric {
            ratios: (1..=levels)
                .map(|n| T::one() - T::c(2.0).powi(-(n as i32)))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KoetheMatrix::Power => Ok(()),
            KoetheMatrix::Constant { c } => {
                if *c > T::zero() {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec("constant grid needs c > 0".into()))
                }
            }
            KoetheMatrix::Geometric { ratios } => {
                if ratios.is_empty() {
                    return Err(Error::InvalidSpec("geometric grid needs ratios".into()));
                }
                if ratios.iter().any(|&r| !(r > T::zero())) {
                    return Err(Error::InvalidSpec("ratios must be positive".into()));
                }
                if ratios.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidSpec("ratios must be nondecreasing".into()));
                }
                Ok(())
            }
            KoetheMatrix::Table { grid } => {
                if grid.is_empty() || grid[0].is_empty() {
                    return Err(Error::InvalidSpec("table grid must be nonempty".into()));
                }
                let width = grid[0].len();
                if grid.iter().any(|row| row.len() != width) {
                    return Err(Error::InvalidSpec("table rows must have equal length".into()));
                }
                for row in grid {
                    if row.iter().any(|&v| !(v > T::zero())) {
                        return Err(Error::InvalidSpec("grid entries must be positive".into()));
                    }
                }
                for w in grid.windows(2) {
                    if w[0].iter().zip(&w[1]).any(|(&a, &b)| a > b) {
                        return Err(Error::InvalidSpec(
                            "grid must be nondecreasing in n".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// `a_n(i)`, both indices 1-based.
    pub fn entry(&self, n: usize, i: usize) -> Result<T> {
        assert!(n >= 1 && i >= 1);
        match self {
            KoetheMatrix::Power => Ok(T::from_usize(i).unwrap().powi(n as i32)),
            KoetheMatrix::Constant { c } => Ok(*c),
            KoetheMatrix::Geometric { ratios } => ratios
                .get(n - 1)
                .map(|r| r.powi(i as i32))
                .ok_or(Error::IndexOutOfRange {
                    index: n,
                    len: ratios.len(),
                }),
            KoetheMatrix::Table { grid } => grid
                .get(n - 1)
                .and_then(|row| row.get(i - 1))
                .copied()
                .ok_or(Error::IndexOutOfRange {
                    index: n,
                    len: grid.len(),
                }),
        }
    }
}

/// Outcome of the l1-ratio nuclearity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuclearityVerdict<T> {
    /// For each `n <= n_max` the least `m <= m_max` with
    /// `(a_n(i)/a_m(i))_i` summable, together with the tail-bounded value
    /// of the ratio sum.
    Nuclear { witness: Vec<WitnessEntry<T>> },
    /// No witness found inside the search box.
    NotNuclearWithin {
        n_max: usize,
        m_max: usize,
        failing_n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry<T> {
    pub n: usize,
    pub m: usize,
    pub ratio_sum: T,
}

/// Decide, for each `n <= n_max`, the least `m <= m_max` such that
/// `sum_i a_n(i)/a_m(i) < inf`, by the closed-form tail bound of the grid
/// family. `tail_tol` controls the accuracy of the reported sums.
pub fn nuclearity_test<T: Real>(
    a: &KoetheMatrix<T>,
    n_max: usize,
    m_max: usize,
    tail_tol: T,
) -> Result<NuclearityVerdict<T>> {
    if n_max >= m_max {
        return Err(Error::InvalidSpec("need n_max < m_max".into()));
    }
    a.validate()?;
    let mut witness = Vec::new();
    for n in 1..=n_max {
        let mut found = None;
        for m in n + 1..=m_max {
            match ratio_sum(a, n, m, tail_tol)? {
                Some(sum) => {
                    found = Some(WitnessEntry { n, m, ratio_sum: sum });
                    break;
                }
                None => continue,
            }
        }
        match found {
            Some(w) => witness.push(w),
            None => {
                return Ok(NuclearityVerdict::NotNuclearWithin {
                    n_max,
                    m_max,
                    failing_n: n,
                })
            }
        }
    }
    Ok(NuclearityVerdict::Nuclear { witness })
}

/// `Some(sum)` when `sum_i a_n(i)/a_m(i)` converges (sum accurate to
/// `tail_tol`), `None` when it provably diverges.
fn ratio_sum<T: Real>(a: &KoetheMatrix<T>, n: usize, m: usize, tail_tol: T) -> Result<Option<T>> {
    match a {
        KoetheMatrix::Power => {
            // ratio i^{n-m}: a p-series with exponent p = m - n
            let p = m - n;
            if p < 2 {
                return Ok(None);
            }
            // sum_{i<=N} i^{-p} with integral tail <= N^{1-p}/(p-1)
            let pf = T::from_usize(p).unwrap();
            let mut sum = T::zero();
            let mut i = 1u64;
            loop {
                let ifl = T::from_u64(i).unwrap();
                sum = sum + ifl.powi(-(p as i32));
                let tail = ifl.powf(T::one() - pf) / (pf - T::one());
                if tail <= tail_tol || i > 10_000_000 {
                    return Ok(Some(sum + tail * T::c(0.5)));
                }
                i += 1;
            }
        }
        KoetheMatrix::Constant { .. } => Ok(None),
        KoetheMatrix::Geometric { ratios } => {
            let rn = *ratios.get(n - 1).ok_or(Error::IndexOutOfRange {
                index: n,
                len: ratios.len(),
            })?;
            let rm = *ratios.get(m - 1).ok_or(Error::IndexOutOfRange {
                index: m,
                len: ratios.len(),
            })?;
            if rn >= rm {
                return Ok(None);
            }
            let q = rn / rm;
            Ok(Some(q / (T::one() - q)))
        }
        KoetheMatrix::Table { .. } => Err(Error::UndecidableFamily),
    }
}

/// Co-echelon norm `||u||_n = sup_i |u(i)| / a_n(i)` of a finitely
/// supported sequence (given densely, 1-based support `1..=len`).
pub fn dual_norm<T: Real>(u: &[T], a: &KoetheMatrix<T>, n: usize) -> Result<T> {
    let mut sup = T::zero();
    for (i, &v) in u.iter().enumerate() {
        if v == T::zero() {
            continue;
        }
        let an = a.entry(n, i + 1)?;
        sup = sup.max(v.abs() / an);
    }
    Ok(sup)
}

/// A truncated chain of Hilbert discs `B_1 subset B_2 subset ...` over R^D
/// with `HS(disc_n -> disc_{n+1}) <= 1/2` for all consecutive pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscScale<T> {
    discs: Vec<WeightedHilbert<T>>,
    rescale_factors: Vec<T>,
}

impl<T: Real> DiscScale<T> {
    pub fn from_discs(discs: Vec<WeightedHilbert<T>>, rescale_factors: Vec<T>) -> Result<Self> {
        if discs.len() < 2 {
            return Err(Error::InvalidSpec("scale needs at least two discs".into()));
        }
        let dim = discs[0].dim();
        if discs.iter().any(|d| d.dim() != dim) {
            return Err(Error::InvalidSpec("discs must share a dimension".into()));
        }
        for pair in discs.windows(2) {
            let (fine, coarse) = (&pair[0], &pair[1]);
            if fine
                .weights()
                .iter()
                .zip(coarse.weights())
                .any(|(&wf, &wc)| wc > wf * (T::one() + T::c(1e-12)))
            {
                return Err(Error::InvalidSpec(
                    "disc weights must be nonincreasing in the level".into(),
                ));
            }
        }
        Ok(Self {
            discs,
            rescale_factors,
        })
    }

    pub fn truncation_dim(&self) -> usize {
        self.discs[0].dim()
    }

    pub fn levels(&self) -> usize {
        self.discs.len()
    }

    pub fn disc(&self, n: usize) -> &WeightedHilbert<T> {
        &self.discs[n - 1]
    }

    pub fn discs(&self) -> &[WeightedHilbert<T>] {
        &self.discs
    }

    pub fn rescale_factors(&self) -> &[T] {
        &self.rescale_factors
    }
}

/// Build a Hilbert-disc scale from a Koethe matrix truncated to `i <= D`:
/// level `n` starts from weights `a_n(i)^{-2}` and is then enlarged by the
/// minimal factor that brings the embedding link `disc_n -> disc_{n+1}`
/// down to `HS <= 1/2`. Rescale factors are reported so the departure from
/// the raw grid stays visible.
pub fn build_hs_scale<T: Real>(
    a: &KoetheMatrix<T>,
    truncation_dim: usize,
    levels: usize,
) -> Result<DiscScale<T>> {
    if levels < 2 {
        return Err(Error::InvalidSpec("levels must be >= 2".into()));
    }
    if truncation_dim == 0 {
        return Err(Error::InvalidSpec("truncation dim must be >= 1".into()));
    }
    a.validate()?;

    let raw_weights = |n: usize| -> Result<Vec<T>> {
        (1..=truncation_dim)
            .map(|i| a.entry(n, i).map(|v| (v * v).recip()))
            .collect()
    };

    let mut discs = vec![WeightedHilbert::new(raw_weights(1)?)?];
    let mut factors = vec![T::one()];
    let mut cumulative = T::one();
    for n in 2..=levels {
        let candidate: Vec<T> = raw_weights(n)?
            .into_iter()
            .map(|w| w / (cumulative * cumulative))
            .collect();
        let prev = discs.last().unwrap();
        let raw_link: T = candidate
            .iter()
            .zip(prev.weights())
            .map(|(&wc, &wp)| wc / wp)
            .sum::<T>()
            .sqrt();
        let factor = if raw_link <= T::c(0.5) {
            T::one()
        } else {
            T::c(2.0) * raw_link
        };
        cumulative = cumulative * factor;
        let final_weights: Vec<T> = candidate
            .into_iter()
            .map(|w| w / (factor * factor))
            .collect();
        discs.push(WeightedHilbert::new(final_weights)?);
        factors.push(factor);
    }
    DiscScale::from_discs(discs, factors)
}

/// Recompute the HS norm of the identity embedding `disc_n -> disc_{n+1}`
/// (1-based, `n < levels`) through the hilbert module.
pub fn hs_link<T: Real>(scale: &DiscScale<T>, n: usize) -> Result<T> {
    if n < 1 || n >= scale.levels() {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: scale.levels(),
        });
    }
    let map = LinearMap::identity_embedding(scale.disc(n).clone(), scale.disc(n + 1).clone())?;
    Ok(hs_norm(&map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_grid_nuclear_witness() {
        let a = KoetheMatrix::<f64>::Power;
        let v = nuclearity_test(&a, 6, 12, 1e-9).unwrap();
        match v {
            NuclearityVerdict::Nuclear { witness } => {
                for w in &witness {
                    assert_eq!(w.m, w.n + 2, "minimal witness must be n+2");
                }
                // ratio at the witness is sum i^-2 = pi^2/6
                let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
                assert!((witness[0].ratio_sum - pi2_6).abs() < 1e-6);
            }
            other => panic!("expected nuclear, got {other:?}"),
        }
    }

    #[test]
    fn constant_grid_not_nuclear() {
        let a = KoetheMatrix::Constant { c: 3.0f64 };
        let v = nuclearity_test(&a, 6, 12, 1e-9).unwrap();
        assert!(matches!(v, NuclearityVerdict::NotNuclearWithin { .. }));
    }

    #[test]
    fn geometric_grid_decided_by_closed_form() {
        let a = KoetheMatrix::<f64>::geometric_dyadic(8);
        let v = nuclearity_test(&a, 3, 8, 1e-9).unwrap();
        match v {
            NuclearityVerdict::Nuclear { witness } => {
                for w in &witness {
                    assert_eq!(w.m, w.n + 1, "strictly increasing ratios: m = n+1");
                    let rn = 1.0 - 2f64.powi(-(w.n as i32));
                    let rm = 1.0 - 2f64.powi(-(w.m as i32));
                    let q = rn / rm;
                    assert!((w.ratio_sum - q / (1.0 - q)).abs() < 1e-12);
                }
            }
            other => panic!("expected nuclear, got {other:?}"),
        }
    }

    #[test]
    fn table_grid_undecidable() {
        let a = KoetheMatrix::Table {
            grid: vec![vec![1.0f64, 2.0], vec![2.0, 4.0]],
        };
        assert!(matches!(
            nuclearity_test(&a, 1, 2, 1e-9),
            Err(Error::UndecidableFamily)
        ));
    }

    #[test]
    fn dual_norm_basis_vectors() {
        let a = KoetheMatrix::<f64>::Power;
        // u = e_3
        let u = vec![0.0, 0.0, 1.0];
        for n in 1..=4 {
            let norm = dual_norm(&u, &a, n).unwrap();
            assert!((norm - 3f64.powi(-(n as i32))).abs() < 1e-15);
        }
        assert_eq!(dual_norm(&[0.0, 0.0], &a, 2).unwrap(), 0.0);
    }

    #[test]
    fn dual_norm_triangle_inequality() {
        let a = KoetheMatrix::<f64>::Power;
        let u = vec![1.0, -2.0, 0.5];
        let v = vec![0.25, 1.0, -1.5];
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = dual_norm(&sum, &a, 2).unwrap();
        let rhs = dual_norm(&u, &a, 2).unwrap() + dual_norm(&v, &a, 2).unwrap();
        assert!(lhs <= rhs + 1e-15);
    }

    #[test]
    fn scale_first_link_raw_value() {
        // powerGrid, D = 3: raw ratios (1, 1/2, 1/3)
        let raw = (1.0f64 + 0.25 + 1.0 / 9.0).sqrt();
        assert!((raw - 1.1666667).abs() < 1e-6);
        let scale = build_hs_scale(&KoetheMatrix::<f64>::Power, 3, 4).unwrap();
        assert!((scale.rescale_factors()[1] - 2.0 * raw).abs() < 1e-9);
        for n in 1..4 {
            assert!(hs_link(&scale, n).unwrap() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn scale_single_dim() {
        let scale = build_hs_scale(&KoetheMatrix::<f64>::Power, 1, 2).unwrap();
        // single ratio a_1/a_2 = 1/1 = 1, rescale = 2 * ratio
        assert!((scale.rescale_factors()[1] - 2.0).abs() < 1e-12);
        assert!((hs_link(&scale, 1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn equal_discs_link_is_sqrt_d() {
        let d = WeightedHilbert::<f64>::standard(4);
        let scale = DiscScale::from_discs(vec![d.clone(), d], vec![1.0, 1.0]).unwrap();
        assert!((hs_link(&scale, 1).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chain_submultiplicativity() {
        let scale = build_hs_scale(&KoetheMatrix::<f64>::Power, 3, 5).unwrap();
        for n in 1..scale.levels() {
            for m in n + 1..=scale.levels() {
                let map = LinearMap::identity_embedding(
                    scale.disc(n).clone(),
                    scale.disc(m).clone(),
                )
                .unwrap();
                let bound = 2.0 * 0.5f64.powi((m - n) as i32);
                assert!(
                    hs_norm(&map) <= bound + 1e-12,
                    "HS({n}->{m}) = {} > {bound}",
                    hs_norm(&map)
                );
            }
        }
    }

    #[test]
    fn disc_weights_nonincreasing() {
        let scale = build_hs_scale(&KoetheMatrix::<f64>::geometric_dyadic(5), 4, 5).unwrap();
        for pair in scale.discs().windows(2) {
            for (wf, wc) in pair[0].weights().iter().zip(pair[1].weights()) {
                assert!(*wc <= wf * (1.0 + 1e-12));
            }
        }
    }
}
