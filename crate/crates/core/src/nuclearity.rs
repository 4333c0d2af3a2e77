//! Volume-number growth profiles: finite-range evidence for membership in
//! the classes V_eps, the composition inequalities behind "enough factors
//! make the composite nuclear", and the per-disc criterion profiles over a
//! Hilbert scale.
//!
//! A finite truncation can never certify that `(n^eps v_n)` is bounded as
//! an infinite sequence (past the rank every v_n is zero), so each report
//! carries the profile data and a disclaimer rather than a verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{singular_values, volume_number_from_singular_values, LinearMap, WeightedHilbert};
use crate::koethe::DiscScale;
use crate::scalar::Real;

/// Slack used when checking the proof inequalities numerically.
pub const INEQ_TOL: f64 = 1e-9;

pub const FINITE_EVIDENCE: &str =
    "finite-range evidence only: profiles over n = 1..n_max cannot certify l-infinity membership";

/// The sequence `n -> n^eps * v_n(T)` over a finite range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VEpsReport<T> {
    pub epsilon: T,
    /// `n^eps * v_n(T)` for `n = 1..=n_max`
    pub values: Vec<T>,
    pub sup_value: T,
    /// tail values have dropped below half of the peak
    pub decay_observed: bool,
    pub disclaimer: String,
}

impl<T: Real> VEpsReport<T> {
    fn from_values(epsilon: T, values: Vec<T>) -> Self {
        let sup_value = values.iter().fold(T::zero(), |m, &v| m.max(v));
        let decay_observed = values
            .last()
            .map(|&last| last < sup_value * T::c(0.5))
            .unwrap_or(false);
        Self {
            epsilon,
            values,
            sup_value,
            decay_observed,
            disclaimer: FINITE_EVIDENCE.to_string(),
        }
    }
}

fn check_profile_range<T: Real>(map: &LinearMap<T>, epsilon: T, n_max: usize) -> Result<()> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::InvalidSpec("epsilon must lie in (0, 1)".into()));
    }
    let bound = map.domain().dim().min(map.codomain().dim());
    if n_max < 1 || n_max > bound {
        return Err(Error::InvalidSpec(format!(
            "n_max must lie in 1..={bound}, got {n_max}"
        )));
    }
    Ok(())
}

/// Profile `n^eps * v_n(map)` for `n = 1..=n_max`.
pub fn veps_profile<T: Real>(map: &LinearMap<T>, epsilon: T, n_max: usize) -> Result<VEpsReport<T>> {
    check_profile_range(map, epsilon, n_max)?;
    let sv = singular_values(map);
    let values = (1..=n_max)
        .map(|n| {
            T::from_usize(n).unwrap().powf(epsilon) * volume_number_from_singular_values(&sv, n)
        })
        .collect();
    Ok(VEpsReport::from_values(epsilon, values))
}

/// Outcome of the chain check on a composition of V_eps factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckReport<T> {
    pub factors: usize,
    pub epsilon: T,
    /// `sup_l l^5 v_l(T)` for the composition
    pub sup5_value: T,
    /// `prod_i sup_l l^eps v_l(map_i)`
    pub factor_sup_product: T,
    /// the Prop display: sup5_value <= factor_sup_product + tol
    pub display_holds: bool,
    /// `delta_n <= n (prod h_l)^{1/n} <= (prod n v_l)^{1/n}` at every n
    pub delta_chain_holds: bool,
    /// `sum_{n<=n_max} n * delta_n(T)`
    pub summability_proxy: T,
    /// last summand has dropped below half of the largest
    pub tail_decaying: bool,
    pub disclaimer: String,
}

/// Compose the chain (in the given order: `maps[0]` is applied first) and
/// verify the proof inequalities of the "k >= 5/eps factors are nuclear"
/// argument numerically.
pub fn composition_chain_check<T: Real>(
    maps: &[LinearMap<T>],
    epsilon: T,
) -> Result<ChainCheckReport<T>> {
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(Error::InvalidSpec("epsilon must lie in (0, 1]".into()));
    }
    let need = (T::c(5.0) / epsilon).ceil().to_usize().unwrap_or(usize::MAX);
    if maps.len() < need {
        return Err(Error::ChainTooShort {
            need,
            got: maps.len(),
        });
    }

    let mut composition = maps[0].clone();
    for map in &maps[1..] {
        composition = map.compose(&composition)?;
    }
    let sv = singular_values(&composition);
    let n_max = composition
        .domain()
        .dim()
        .min(composition.codomain().dim());
    let volumes: Vec<T> = (1..=n_max)
        .map(|n| volume_number_from_singular_values(&sv, n))
        .collect();
    let tol = T::c(INEQ_TOL);

    let sup5_value = volumes
        .iter()
        .enumerate()
        .map(|(i, &v)| T::from_usize(i + 1).unwrap().powi(5) * v)
        .fold(T::zero(), T::max);
    let mut factor_sup_product = T::one();
    for map in maps {
        let bound = map.domain().dim().min(map.codomain().dim());
        let fsv = singular_values(map);
        let sup = (1..=bound)
            .map(|n| {
                T::from_usize(n).unwrap().powf(epsilon)
                    * volume_number_from_singular_values(&fsv, n)
            })
            .fold(T::zero(), T::max);
        factor_sup_product = factor_sup_product * sup;
    }
    let display_holds = sup5_value <= factor_sup_product + tol;

    // delta_n <= n (prod_{l<=n} h_l)^{1/n} <= (prod_{l<=n} n v_l)^{1/n};
    // between Hilbert spaces delta and h are both the singular values
    let mut delta_chain_holds = true;
    for n in 1..=n_max {
        let nf = T::from_usize(n).unwrap();
        let delta = sv.get(n - 1).copied().unwrap_or(T::zero());
        let mid = nf * volume_number_from_singular_values(&sv, n);
        let rhs = if volumes[..n].iter().any(|&v| v == T::zero()) {
            T::zero()
        } else {
            let log_sum: T = volumes[..n].iter().map(|&v| (nf * v).ln()).sum();
            (log_sum / nf).exp()
        };
        if delta > mid + tol || mid > rhs + tol {
            delta_chain_holds = false;
        }
    }

    let summands: Vec<T> = sv
        .iter()
        .take(n_max)
        .enumerate()
        .map(|(i, &s)| T::from_usize(i + 1).unwrap() * s)
        .collect();
    let summability_proxy = summands.iter().copied().sum();
    let peak = summands.iter().fold(T::zero(), |m, &v| m.max(v));
    let tail_decaying = summands
        .last()
        .map(|&last| last < peak * T::c(0.5))
        .unwrap_or(false);

    Ok(ChainCheckReport {
        factors: maps.len(),
        epsilon,
        sup5_value,
        factor_sup_product,
        display_holds,
        delta_chain_holds,
        summability_proxy,
        tail_decaying,
        disclaimer: FINITE_EVIDENCE.to_string(),
    })
}

/// Profile of a composition of three Hilbert-space factors together with
/// the AM-GM majorant from the two-summing argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSummingReport<T> {
    pub profile: VEpsReport<T>,
    /// `n^eps * (1/n) * sum_{i<=n} delta_i(T)`
    pub majorant: Vec<T>,
    /// HS norms of the factors; between Hilbert spaces the 2-summing norm
    /// coincides with these, and in finite dimension they are always finite
    pub factor_hs_norms: Vec<T>,
}

/// Prop-style check for a composition of three maps between Hilbert
/// spaces: the volume numbers of `c . b . a` are dominated pointwise by the
/// arithmetic mean of the singular values (AM-GM).
pub fn two_summing_composition_profile<T: Real>(
    a: &LinearMap<T>,
    b: &LinearMap<T>,
    c: &LinearMap<T>,
    epsilon: T,
) -> Result<TwoSummingReport<T>> {
    let composition = c.compose(&b.compose(a)?)?;
    let n_max = composition
        .domain()
        .dim()
        .min(composition.codomain().dim());
    check_profile_range(&composition, epsilon, n_max)?;
    let sv = singular_values(&composition);
    let profile = veps_profile(&composition, epsilon, n_max)?;
    let majorant = (1..=n_max)
        .map(|n| {
            let nf = T::from_usize(n).unwrap();
            let mean = sv.iter().take(n).copied().sum::<T>() / nf;
            nf.powf(epsilon) * mean
        })
        .collect();
    let factor_hs_norms = [a, b, c]
        .iter()
        .map(|m| crate::hilbert::hs_norm(m))
        .collect();
    Ok(TwoSummingReport {
        profile,
        majorant,
        factor_hs_norms,
    })
}

/// For each disc `B_n` of the scale, the profile of the identity map
/// `E_{B_n} -> E_p`. Bounded per-disc profiles are the finite-truncation
/// shadow of the "pi_p i_B in V_eps for every disc and seminorm" criterion.
pub fn scale_criterion_profile<T: Real>(
    scale: &DiscScale<T>,
    p: &WeightedHilbert<T>,
    epsilon: T,
    n_max: usize,
) -> Result<Vec<VEpsReport<T>>> {
    if p.dim() != scale.truncation_dim() {
        return Err(Error::DimensionMismatch {
            expected: scale.truncation_dim(),
            got: p.dim(),
        });
    }
    (1..=scale.levels())
        .map(|n| {
            let map = LinearMap::identity_embedding(scale.disc(n).clone(), p.clone())?;
            veps_profile(&map, epsilon, n_max)
        })
        .collect()
}

/// CSV rows `n, v_n, n^eps * v_n, majorant` for plotting; the majorant
/// column is empty when absent.
pub fn profile_csv<T: Real>(report: &VEpsReport<T>, majorant: Option<&[T]>) -> String {
    let mut out = String::from("n,v_n,n_eps_v_n,majorant\n");
    for (i, &value) in report.values.iter().enumerate() {
        let n = i + 1;
        let nf = T::from_usize(n).unwrap();
        let vn = value / nf.powf(report.epsilon);
        let maj = majorant
            .and_then(|m| m.get(i))
            .map(|m| format!("{m}"))
            .unwrap_or_default();
        out.push_str(&format!("{n},{vn},{value},{maj}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic_diag(d: usize) -> LinearMap<f64> {
        LinearMap::diagonal(&(1..=d).map(|i| 2f64.powi(-(i as i32))).collect::<Vec<_>>())
    }

    #[test]
    fn dyadic_profile_closed_form() {
        let map = dyadic_diag(6);
        let report = veps_profile(&map, 0.5, 6).unwrap();
        for (i, &value) in report.values.iter().enumerate() {
            let n = (i + 1) as f64;
            // v_n = 2^{-(n+1)/2}
            let expected = n.powf(0.5) * 2f64.powf(-(n + 1.0) / 2.0);
            assert!((value - expected).abs() < 1e-10, "n={n}: {value} vs {expected}");
        }
        assert!(report.decay_observed);
        assert!((report.sup_value - report.values[0].max(report.values[1])).abs() < 1e-12);
    }

    #[test]
    fn identity_profile_grows() {
        let map = LinearMap::identity_embedding(
            WeightedHilbert::<f64>::standard(5),
            WeightedHilbert::standard(5),
        )
        .unwrap();
        let report = veps_profile(&map, 0.5, 5).unwrap();
        for (i, &value) in report.values.iter().enumerate() {
            assert!((value - ((i + 1) as f64).powf(0.5)).abs() < 1e-10);
        }
        assert!((report.sup_value - 5f64.powf(0.5)).abs() < 1e-10);
        assert!(!report.decay_observed);
    }

    #[test]
    fn rank_one_profile_vanishes() {
        let map = LinearMap::new(
            vec![vec![1.0, 2.0], vec![2.0, 4.0]],
            WeightedHilbert::<f64>::standard(2),
            WeightedHilbert::standard(2),
        )
        .unwrap();
        let report = veps_profile(&map, 0.5, 2).unwrap();
        assert!(report.values[0] > 0.0);
        assert_eq!(report.values[1], 0.0);
    }

    #[test]
    fn profile_rejects_bad_arguments() {
        let map = dyadic_diag(3);
        assert!(veps_profile(&map, 0.0, 3).is_err());
        assert!(veps_profile(&map, 1.0, 3).is_err());
        assert!(veps_profile(&map, 0.5, 4).is_err());
    }

    #[test]
    fn chain_check_dyadic_factors() {
        let maps = vec![dyadic_diag(6); 5];
        let report = composition_chain_check(&maps, 1.0).unwrap();
        assert!(report.display_holds, "display: {report:?}");
        assert!(report.delta_chain_holds);
        assert!(report.tail_decaying);
        assert!(report.summability_proxy.is_finite());
    }

    #[test]
    fn chain_check_with_identity_factor() {
        let identity = LinearMap::identity_embedding(
            WeightedHilbert::<f64>::standard(6),
            WeightedHilbert::standard(6),
        )
        .unwrap();
        let mut maps = vec![dyadic_diag(6); 5];
        maps.push(identity);
        let report = composition_chain_check(&maps, 1.0).unwrap();
        assert!(report.display_holds);
        assert!(report.delta_chain_holds);
    }

    #[test]
    fn chain_too_short_rejected() {
        let maps = vec![dyadic_diag(4); 3];
        match composition_chain_check(&maps, 1.0) {
            Err(Error::ChainTooShort { need, got }) => {
                assert_eq!(need, 5);
                assert_eq!(got, 3);
            }
            other => panic!("expected ChainTooShort, got {other:?}"),
        }
    }

    #[test]
    fn chain_delta_inequality_on_random_chains() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for d in 2..=5usize {
            for _ in 0..10 {
                let maps: Vec<LinearMap<f64>> = (0..5)
                    .map(|_| {
                        let m: Vec<Vec<f64>> = (0..d)
                            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                            .collect();
                        LinearMap::new(
                            m,
                            WeightedHilbert::standard(d),
                            WeightedHilbert::standard(d),
                        )
                        .unwrap()
                    })
                    .collect();
                let report = composition_chain_check(&maps, 1.0).unwrap();
                assert!(report.delta_chain_holds, "d={d}");
            }
        }
    }

    #[test]
    fn two_summing_majorant_dominates() {
        let a = LinearMap::diagonal(&[1.0, 0.5, 0.25]);
        let report = two_summing_composition_profile(&a, &a, &a, 0.5).unwrap();
        for (value, maj) in report.profile.values.iter().zip(&report.majorant) {
            assert!(value <= &(maj + 1e-9), "{value} > {maj}");
        }
        assert_eq!(report.factor_hs_norms.len(), 3);
        let expected_hs = (1.0f64 + 0.25 + 0.0625).sqrt();
        for hs in &report.factor_hs_norms {
            assert!((hs - expected_hs).abs() < 1e-12);
        }
    }

    #[test]
    fn two_summing_zero_factor() {
        let a = LinearMap::diagonal(&[1.0, 0.5]);
        let zero = LinearMap::diagonal(&[0.0, 0.0]);
        let report = two_summing_composition_profile(&a, &zero, &a, 0.5).unwrap();
        assert!(report.profile.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn profile_submultiplicative_under_composition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let d = 4usize;
        for _ in 0..20 {
            let random = |rng: &mut rand_chacha::ChaCha8Rng| {
                let m: Vec<Vec<f64>> = (0..d)
                    .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                LinearMap::new(
                    m,
                    WeightedHilbert::standard(d),
                    WeightedHilbert::standard(d),
                )
                .unwrap()
            };
            let a = random(&mut rng);
            let b = random(&mut rng);
            let ab = b.compose(&a).unwrap();
            let sa = singular_values(&a);
            let sb = singular_values(&b);
            let sab = singular_values(&ab);
            for n in 1..=d {
                let lhs = volume_number_from_singular_values(&sab, n);
                let rhs = volume_number_from_singular_values(&sa, n)
                    * volume_number_from_singular_values(&sb, n);
                assert!(lhs <= rhs + 1e-9, "n={n}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn scale_profiles_behave() {
        let scale =
            crate::koethe::build_hs_scale(&crate::koethe::KoetheMatrix::<f64>::Power, 4, 3)
                .unwrap();
        let p = scale.disc(1).clone();
        let reports = scale_criterion_profile(&scale, &p, 0.5, 4).unwrap();
        assert_eq!(reports.len(), 3);
        // first profile is the identity profile n^eps
        for (i, &value) in reports[0].values.iter().enumerate() {
            assert!((value - ((i + 1) as f64).powf(0.5)).abs() < 1e-10);
        }
        // coarsening p lowers every profile value
        let coarse = WeightedHilbert::new(p.weights().iter().map(|w| w / 4.0).collect()).unwrap();
        let lowered = scale_criterion_profile(&scale, &coarse, 0.5, 4).unwrap();
        for (orig, low) in reports.iter().zip(&lowered) {
            for (a, b) in orig.values.iter().zip(&low.values) {
                assert!(b <= a, "{b} > {a}");
            }
        }
        let mismatch = scale_criterion_profile(&scale, &WeightedHilbert::standard(3), 0.5, 3);
        assert!(matches!(mismatch, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn csv_emission_shape() {
        let map = dyadic_diag(3);
        let report = veps_profile(&map, 0.5, 3).unwrap();
        let csv = profile_csv(&report, Some(&[1.0, 2.0, 3.0]));
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "n,v_n,n_eps_v_n,majorant");
        assert!(lines[1].starts_with("1,0.5,0.5,1"));
    }
}
