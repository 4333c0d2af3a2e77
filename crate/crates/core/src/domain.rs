//! Gamma analysis and domains of sums.
//!
//! For a structured series in R^d the functionals with absolutely summable
//! images form the subspace Gamma, and the domain of sums is the affine
//! subspace `sum + Gamma^perp`. Streams with distinct signatures cannot
//! cancel each other absolutely, so Gamma^perp is spanned exactly by the
//! per-signature combination vectors of the conditional classes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koethe::DiscScale;
use crate::linalg;
use crate::scalar::Real;
use crate::series::{Component, Convergence, ScalarStream, SeriesSpec, Signature};

/// Relative tolerance for rank and orthogonality decisions.
pub const RANK_TOL: f64 = 1e-10;

/// The split of (R^d)' into Gamma (absolutely summable images) and its
/// annihilator Gamma^perp, with the raw conditional combination vectors
/// that generate the latter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport<T> {
    pub gamma_basis: Vec<Vec<T>>,
    pub gamma_perp_basis: Vec<Vec<T>>,
    pub conditional_vectors: Vec<Vec<T>>,
}

/// `offset + span(directions)`; the descriptor of a domain of sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSubspace<T> {
    pub offset: Vec<T>,
    pub directions: Vec<Vec<T>>,
}

impl<T: Real> AffineSubspace<T> {
    /// Distance from `x` to the subspace (norm of the displacement
    /// projected off the direction span).
    pub fn distance(&self, x: &[T]) -> T {
        linalg::norm2(&self.residual(x))
    }

    /// Component of `x - offset` orthogonal to the direction span.
    pub fn residual(&self, x: &[T]) -> Vec<T> {
        let mut r = linalg::sub(x, &self.offset);
        for d in &self.directions {
            let c = linalg::dot(&r, d);
            linalg::axpy(-c, d, &mut r);
        }
        r
    }
}

/// Result of a domain membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership<T> {
    InDomain,
    NotInDomain { separating_functional: Vec<T> },
}

impl<T> Membership<T> {
    pub fn is_in_domain(&self) -> bool {
        matches!(self, Membership::InDomain)
    }
}

/// Compute Gamma and Gamma^perp for a convergent spec.
///
/// Components are grouped by stream signature; each class contributes the
/// combination vector `g_c = sum_i scale_i d_i`. A functional kills the
/// class absolutely iff it annihilates `g_c`, and distinct signatures
/// cannot cancel, so the conditional `g_c` span Gamma^perp exactly.
pub fn gamma<T: Real>(spec: &SeriesSpec<T>) -> GammaReport<T> {
    let dim = spec.dimension();
    let mut order: Vec<Signature> = Vec::new();
    let mut classes: HashMap<Signature, (Vec<T>, bool)> = HashMap::new();
    for comp in spec.components() {
        let sig = comp.stream.signature();
        let entry = classes
            .entry(sig)
            .or_insert_with(|| (vec![T::zero(); dim], false));
        if !order.contains(&sig) {
            order.push(sig);
        }
        linalg::axpy(comp.stream.scale(), &comp.direction, &mut entry.0);
        if comp.stream.classify() == Convergence::Conditional {
            entry.1 = true;
        }
    }

    let mut conditional: Vec<Vec<T>> = order
        .iter()
        .filter_map(|sig| {
            let (g, cond) = &classes[sig];
            (*cond && linalg::norm2(g) > T::zero()).then(|| g.clone())
        })
        .collect();
    sort_by_leading_coordinate(&mut conditional);

    let tol = T::c(RANK_TOL);
    let perp = linalg::orthonormalize(&conditional, tol);

    // extend the perp basis to a full orthonormal frame of R^d; the added
    // vectors form the Gamma basis
    let mut frame = perp.clone();
    for i in 0..dim {
        let e = linalg::standard_basis_vector(dim, i);
        let extended = linalg::orthonormalize(&[frame.clone(), vec![e]].concat(), tol);
        frame = extended;
    }
    let mut gamma_basis: Vec<Vec<T>> = frame.split_off(perp.len());
    sort_by_leading_coordinate(&mut gamma_basis);
    let mut gamma_perp_basis = perp;
    sort_by_leading_coordinate(&mut gamma_perp_basis);

    GammaReport {
        gamma_basis,
        gamma_perp_basis,
        conditional_vectors: conditional,
    }
}

/// Deterministic report ordering: by index of the first coordinate that is
/// not negligible, then sign-normalized so that coordinate is positive.
fn sort_by_leading_coordinate<T: Real>(vectors: &mut [Vec<T>]) {
    let lead = |v: &[T]| -> usize {
        let max = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        v.iter()
            .position(|&x| x.abs() > max * T::c(RANK_TOL))
            .unwrap_or(0)
    };
    for v in vectors.iter_mut() {
        let i = lead(v);
        if v[i] < T::zero() {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
    vectors.sort_by_key(|v| lead(v));
}

/// `S = sum + Gamma^perp`, the full domain of sums by the Levy-Steinitz
/// theorem. The offset is the certified sum at tolerance `tol`.
pub fn domain_of_sums<T: Real>(spec: &SeriesSpec<T>, tol: T) -> Result<AffineSubspace<T>> {
    let (offset, _) = spec.sum(tol)?;
    Ok(AffineSubspace {
        offset,
        directions: gamma(spec).gamma_perp_basis,
    })
}

/// Test whether `x` lies in the domain of sums within `tol`. A rejection
/// carries a unit functional from Gamma separating `x` from the domain.
pub fn membership<T: Real>(spec: &SeriesSpec<T>, x: &[T], tol: T) -> Result<Membership<T>> {
    if x.len() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: x.len(),
        });
    }
    // keep the offset error well below the decision tolerance
    let sub = domain_of_sums(spec, tol * T::c(0.25))?;
    let residual = sub.residual(x);
    let dist = linalg::norm2(&residual);
    if dist <= tol {
        Ok(Membership::InDomain)
    } else {
        Ok(Membership::NotInDomain {
            separating_functional: linalg::scale(dist.recip(), &residual),
        })
    }
}

/// The Remark's weak test: true iff `x - sum` annihilates every Gamma
/// functional within `tol`, equivalently iff every scalar image `x'(x)`
/// is attainable by rearranging the image series.
pub fn weak_domain_check<T: Real>(spec: &SeriesSpec<T>, x: &[T], tol: T) -> Result<bool> {
    if x.len() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: x.len(),
        });
    }
    let (sum, _) = spec.sum(tol * T::c(0.25))?;
    let displacement = linalg::sub(x, &sum);
    let report = gamma(spec);
    Ok(report
        .gamma_basis
        .iter()
        .all(|g| linalg::dot(g, &displacement).abs() <= tol))
}

/// Gamma^perp computed per disc of a scale. Over a finite truncation every
/// functional is continuous on every disc, so all reports coincide with
/// [`gamma`]; the per-level indexing is the API seam for the union formula
/// of the local theory.
pub fn gamma_local<T: Real>(
    spec: &SeriesSpec<T>,
    scale: &DiscScale<T>,
) -> Result<Vec<GammaReport<T>>> {
    if spec.dimension() != scale.truncation_dim() {
        return Err(Error::DimensionMismatch {
            expected: scale.truncation_dim(),
            got: spec.dimension(),
        });
    }
    let report = gamma(spec);
    Ok(vec![report; scale.levels()])
}

/// A spec whose domain of sums is all of R^d: one conditional alternating
/// power stream per coordinate axis, with pairwise distinct exponents
/// `alpha_j = 1 - (j-1)/(2d)` so the signature classes stay independent.
pub fn dense_domain_series<T: Real>(d: usize) -> SeriesSpec<T> {
    assert!(d >= 1);
    let components = (1..=d)
        .map(|j| Component {
            direction: linalg::standard_basis_vector(d, j - 1),
            stream: ScalarStream::AlternatingPower {
                alpha: T::one() - T::from_usize(j - 1).unwrap() / T::from_usize(2 * d).unwrap(),
                scale: T::one(),
            },
        })
        .collect();
    SeriesSpec::new(d, components).expect("recipe is always a valid convergent spec")
}
