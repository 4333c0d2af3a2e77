//! Constructive rearrangement: the rounding-off and bounded-permutation
//! solvers, their composition into a staged rearrangement of a series to
//! any target in its domain of sums, and the classical scalar greedy
//! rearrangement.
//!
//! Solver outputs are never trusted: each one is checked against the bound
//! it claims before being returned, and emitted streams carry replayable
//! stage certificates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::domain::{membership, Membership};
use crate::error::{Error, Result};
use crate::hilbert::{hs_norm, LinearMap, WeightedHilbert};
use crate::koethe::{hs_link, DiscScale};
use crate::linalg;
use crate::scalar::Real;
use crate::series::{Convergence, ScalarStream, SeriesSpec};
use crate::simplex::phase_one;

/// Slack accepted on ball and HS preconditions.
pub const PRE_TOL: f64 = 1e-12;
/// Zonotope membership tolerance for the rounding-off program.
pub const ZONOTOPE_TOL: f64 = 1e-9;
/// Default number of series indices swept into each stage deadline.
pub const DEFAULT_STAGE_WIDTH: usize = 64;

const DFS_BUDGET: usize = 2_000_000;
const STAGE_ATTEMPTS: usize = 10;

/// Hypothesis data of the rounding-off lemma: points of `B_{H1}`, a target
/// in their zonotope, and a second space with `HS(H1 -> H2) <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOffInstance<T> {
    pub points: Vec<Vec<T>>,
    pub space_h1: WeightedHilbert<T>,
    pub space_h2: WeightedHilbert<T>,
    pub target: Vec<T>,
}

impl<T: Real> RoundOffInstance<T> {
    fn validate(&self) -> Result<()> {
        let slack = T::one() + T::c(PRE_TOL);
        for (k, p) in self.points.iter().enumerate() {
            if self.space_h1.norm(p) > slack {
                return Err(Error::PreconditionViolated(format!(
                    "point {k} outside the H1 ball"
                )));
            }
        }
        let embed =
            LinearMap::identity_embedding(self.space_h1.clone(), self.space_h2.clone())?;
        if hs_norm(&embed) > slack {
            return Err(Error::PreconditionViolated(
                "HS(H1 -> H2) exceeds 1".into(),
            ));
        }
        Ok(())
    }
}

/// Find `I` with `|| sum_{k in I} y_k - y ||_{H2} <= 1`.
///
/// The box program `sum lambda_k y_k = y` is solved at a basic feasible
/// point, leaving at most `d` fractional coordinates; their `2^d` roundings
/// are exhausted and the `H2`-minimal one returned. A full exhaustion over
/// subsets backs this up for small instances.
pub fn round_off<T: Real>(inst: &RoundOffInstance<T>) -> Result<Vec<usize>> {
    inst.validate()?;
    let s = inst.points.len();
    let d = inst.target.len();
    let a: Vec<Vec<T>> = (0..d)
        .map(|i| inst.points.iter().map(|p| p[i]).collect())
        .collect();
    let sol = phase_one(&a, &inst.target);
    if sol.residual > T::c(ZONOTOPE_TOL) {
        return Err(Error::PreconditionViolated(format!(
            "zonotope membership fails: l1 gap {}",
            sol.residual
        )));
    }

    let eps = T::c(1e-9);
    let base: Vec<usize> = (0..s).filter(|&k| sol.x[k] >= T::one() - eps).collect();
    let fractional: Vec<usize> = (0..s)
        .filter(|&k| sol.x[k] > eps && sol.x[k] < T::one() - eps)
        .collect();

    let error_of = |subset: &[usize]| -> T {
        let mut sum = vec![T::zero(); d];
        for &k in subset {
            linalg::axpy(T::one(), &inst.points[k], &mut sum);
        }
        let diff = linalg::sub(&sum, &inst.target);
        inst.space_h2.norm(&diff)
    };

    let mut best: Option<(T, Vec<usize>)> = None;
    // reverse order prefers rounding fractional coordinates up on ties
    for mask in (0u32..1 << fractional.len()).rev() {
        let mut candidate = base.clone();
        for (bit, &k) in fractional.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                candidate.push(k);
            }
        }
        candidate.sort_unstable();
        let err = error_of(&candidate);
        if best.as_ref().map_or(true, |(b, _)| err < *b) {
            best = Some((err, candidate));
        }
    }
    let (mut best_err, mut best_set) = best.expect("at least the empty rounding exists");

    if best_err > T::one() + T::c(PRE_TOL) && s <= 20 {
        for mask in 0u32..1 << s {
            let candidate: Vec<usize> = (0..s).filter(|k| mask & (1 << k) != 0).collect();
            let err = error_of(&candidate);
            if err < best_err {
                best_err = err;
                best_set = candidate;
            }
        }
    }
    if best_err > T::one() + T::c(PRE_TOL) {
        return Err(Error::BoundMissed {
            achieved: best_err.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(best_set)
}

/// Hypothesis data of the permutation lemma: vectors of `B_{H1}` whose
/// anchored total stays in `B_{H2}`, over a chain `H1, H2, H3` with HS
/// links `<= 1` and `<= 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermInstance<T> {
    pub vectors: Vec<Vec<T>>,
    pub anchor: Vec<T>,
    pub space_h1: WeightedHilbert<T>,
    pub space_h2: WeightedHilbert<T>,
    pub space_h3: WeightedHilbert<T>,
}

impl<T: Real> PermInstance<T> {
    fn validate(&self) -> Result<()> {
        let slack = T::one() + T::c(PRE_TOL);
        for (k, v) in self.vectors.iter().enumerate() {
            if self.space_h1.norm(v) > slack {
                return Err(Error::PreconditionViolated(format!(
                    "vector {k} outside the H1 ball"
                )));
            }
        }
        if self.space_h2.norm(&self.anchor) > slack {
            return Err(Error::PreconditionViolated(
                "anchor outside the H2 ball".into(),
            ));
        }
        let mut total = self.anchor.clone();
        for v in &self.vectors {
            linalg::axpy(T::one(), v, &mut total);
        }
        if self.space_h2.norm(&total) > slack {
            return Err(Error::PreconditionViolated(
                "anchored total outside the H2 ball".into(),
            ));
        }
        let link12 =
            LinearMap::identity_embedding(self.space_h1.clone(), self.space_h2.clone())?;
        if hs_norm(&link12) > slack {
            return Err(Error::PreconditionViolated(
                "HS(H1 -> H2) exceeds 1".into(),
            ));
        }
        let link23 =
            LinearMap::identity_embedding(self.space_h2.clone(), self.space_h3.clone())?;
        if hs_norm(&link23) > T::c(0.5) + T::c(PRE_TOL) {
            return Err(Error::PreconditionViolated(
                "HS(H2 -> H3) exceeds 1/2".into(),
            ));
        }
        Ok(())
    }
}

/// Order the vectors so every prefix `a + sum v_{sigma(k)}` stays in
/// `B_{H3}`: greedy by prefix norm with backtracking; the search is
/// complete for small instances, and existence is guaranteed by the lemma
/// whenever the preconditions hold.
pub fn permute_bounded<T: Real>(inst: &PermInstance<T>) -> Result<Vec<usize>> {
    inst.validate()?;
    let s = inst.vectors.len();
    let slack = T::one() + T::c(PRE_TOL);
    let mut order: Vec<usize> = Vec::with_capacity(s);
    let mut used = vec![false; s];
    let mut budget = DFS_BUDGET;

    fn dfs<T: Real>(
        inst: &PermInstance<T>,
        running: &[T],
        order: &mut Vec<usize>,
        used: &mut [bool],
        budget: &mut usize,
        slack: T,
    ) -> bool {
        if order.len() == inst.vectors.len() {
            return true;
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let mut candidates: Vec<(T, usize, Vec<T>)> = Vec::new();
        for (k, v) in inst.vectors.iter().enumerate() {
            if used[k] {
                continue;
            }
            let next = linalg::add(running, v);
            let norm = inst.space_h3.norm(&next);
            if norm <= slack {
                candidates.push((norm, k, next));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (_, k, next) in candidates {
            used[k] = true;
            order.push(k);
            if dfs(inst, &next, order, used, budget, slack) {
                return true;
            }
            order.pop();
            used[k] = false;
        }
        false
    }

    if dfs(
        inst,
        &inst.anchor.clone(),
        &mut order,
        &mut used,
        &mut budget,
        slack,
    ) {
        Ok(order)
    } else {
        Err(Error::SearchExhausted)
    }
}

/// One checkpoint of an emitted stream: after `prefix_length` terms the
/// partial sum is within `error_bound` of the target in the norm of disc
/// `disc_index` (0 means the Euclidean norm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCertificate<T> {
    pub stage: usize,
    pub prefix_length: usize,
    pub error_bound: T,
    pub disc_index: usize,
}

/// A growing rearrangement: distinct 1-based term indices interleaved with
/// stage certificates. Drive it sequentially; it is `Send` but not meant
/// for concurrent pulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PermutationStream<T> {
    pub emitted: Vec<u64>,
    pub certificates: Vec<StageCertificate<T>>,
}

impl<T: Real> PermutationStream<T> {
    /// Line-oriented form: one index per line, with
    /// `# stage L N bound disc` comment lines after each checkpoint.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut certs = self.certificates.iter().peekable();
        for (i, idx) in self.emitted.iter().enumerate() {
            out.push_str(&format!("{idx}\n"));
            while certs
                .peek()
                .map_or(false, |c| c.prefix_length == i + 1)
            {
                let c = certs.next().unwrap();
                out.push_str(&format!(
                    "# stage {} {} {} {}\n",
                    c.stage,
                    c.prefix_length,
                    c.error_bound.to_f64().unwrap(),
                    c.disc_index
                ));
            }
        }
        for c in certs {
            out.push_str(&format!(
                "# stage {} {} {} {}\n",
                c.stage,
                c.prefix_length,
                c.error_bound.to_f64().unwrap(),
                c.disc_index
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut stream = PermutationStream::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| {
                Error::RepresentationInvalid(format!("line {}: {what}", lineno + 1))
            };
            if let Some(rest) = line.strip_prefix('#') {
                if rest.starts_with('#') {
                    // `##` lines are free-form metadata, not certificates
                    continue;
                }
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 5 || fields[0] != "stage" {
                    return Err(bad("malformed certificate"));
                }
                stream.certificates.push(StageCertificate {
                    stage: fields[1].parse().map_err(|_| bad("stage"))?,
                    prefix_length: fields[2].parse().map_err(|_| bad("prefix"))?,
                    error_bound: T::c(fields[3].parse().map_err(|_| bad("bound"))?),
                    disc_index: fields[4].parse().map_err(|_| bad("disc"))?,
                });
            } else {
                stream
                    .emitted
                    .push(line.parse().map_err(|_| bad("index"))?);
            }
        }
        Ok(stream)
    }

    /// Replay the stream against the series: indices must be distinct and
    /// every certificate bound must hold for the recomputed partial sum.
    pub fn verify(
        &self,
        spec: &SeriesSpec<T>,
        target: &[T],
        scale: Option<&DiscScale<T>>,
    ) -> Result<()> {
        let mut seen = HashSet::new();
        for &idx in &self.emitted {
            if idx == 0 || !seen.insert(idx) {
                return Err(Error::CertificateReplayFailed(format!(
                    "index {idx} repeated or invalid"
                )));
            }
        }
        let mut prefix = vec![T::zero(); spec.dimension()];
        let mut pos = 0usize;
        for cert in &self.certificates {
            if cert.prefix_length > self.emitted.len() {
                return Err(Error::CertificateReplayFailed(format!(
                    "certificate at {} beyond stream length",
                    cert.prefix_length
                )));
            }
            while pos < cert.prefix_length {
                linalg::axpy(T::one(), &spec.term(self.emitted[pos]), &mut prefix);
                pos += 1;
            }
            let diff = linalg::sub(&prefix, target);
            let err = match cert.disc_index {
                0 => linalg::norm2(&diff),
                n => {
                    let scale = scale.ok_or_else(|| {
                        Error::CertificateReplayFailed(
                            "certificate references a disc but no scale given".into(),
                        )
                    })?;
                    if n > scale.levels() {
                        return Err(Error::CertificateReplayFailed(format!(
                            "disc index {n} beyond scale"
                        )));
                    }
                    scale.disc(n).norm(&diff)
                }
            };
            if err > cert.error_bound + T::c(1e-9) {
                return Err(Error::CertificateReplayFailed(format!(
                    "stage {}: error {} exceeds bound {}",
                    cert.stage, err, cert.error_bound
                )));
            }
        }
        Ok(())
    }
}

/// Tuning knobs for [`rearrange_to_target`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RearrangeOptions {
    /// every index `<= stage_width * l` is scheduled by stage `l`
    pub stage_width: usize,
    /// recorded for reproducibility; the stage solvers are deterministic
    pub seed: u64,
}

impl Default for RearrangeOptions {
    fn default() -> Self {
        Self {
            stage_width: DEFAULT_STAGE_WIDTH,
            seed: 0,
        }
    }
}

/// Rearrange the series to converge to `target`, staging per the 1/l
/// schedule: stage `l` force-schedules all indices up to its deadline,
/// selects a window subset whose sum repairs the residual to within `1/l`
/// in the certificate disc, and emits a checkpoint certificate.
pub fn rearrange_to_target<T: Real>(
    spec: &SeriesSpec<T>,
    target: &[T],
    scale: &DiscScale<T>,
    stages: usize,
    options: RearrangeOptions,
) -> Result<PermutationStream<T>> {
    if spec.dimension() != scale.truncation_dim() {
        return Err(Error::DimensionMismatch {
            expected: scale.truncation_dim(),
            got: spec.dimension(),
        });
    }
    if options.stage_width == 0 {
        return Err(Error::InvalidSpec("stage width must be positive".into()));
    }
    for n in 1..scale.levels() {
        if hs_link(scale, n)? > T::c(0.5) + T::c(PRE_TOL) {
            return Err(Error::PreconditionViolated(format!(
                "scale link {n} exceeds HS 1/2"
            )));
        }
    }
    match membership(spec, target, T::c(1e-6))? {
        Membership::InDomain => {}
        Membership::NotInDomain {
            separating_functional,
        } => {
            return Err(Error::NotInDomain {
                functional: separating_functional
                    .iter()
                    .map(|v| v.to_f64().unwrap())
                    .collect(),
            })
        }
    }

    let dim = spec.dimension();
    let disc_cert = 2.min(scale.levels());
    let disc_ord = 3.min(scale.levels());
    let cert_space = scale.disc(disc_cert);
    let ord_space = scale.disc(disc_ord);
    let fine_space = scale.disc(1);

    let mut stream = PermutationStream::default();
    let mut scheduled: HashSet<u64> = HashSet::new();
    let mut prefix = vec![T::zero(); dim];
    let mut window_floor: u64 = 0;

    for l in 2..=stages + 1 {
        let lf = T::from_usize(l).unwrap();
        let bound = lf.recip();
        let deadline = (l * options.stage_width) as u64;
        let mandatory: Vec<u64> = (1..=deadline)
            .filter(|k| !scheduled.contains(k))
            .collect();
        let mut base = prefix.clone();
        for &k in &mandatory {
            linalg::axpy(T::one(), &spec.term(k), &mut base);
        }
        let residual = linalg::sub(target, &base);

        let floor = window_floor.max(deadline);
        let mut chosen: Option<Vec<u64>> = None;
        let mut window_end = floor;
        for attempt in 0..STAGE_ATTEMPTS {
            window_end += (options.stage_width as u64) << attempt.min(6);
            let window: Vec<u64> = (floor + 1..=window_end)
                .filter(|k| {
                    !scheduled.contains(k)
                        && fine_space.norm(&spec.term(*k)) <= bound * T::c(0.5)
                })
                .collect();
            if window.is_empty() {
                continue;
            }
            // box program in the orthonormal coordinates of the
            // certificate disc, so the l1 gap dominates the disc norm
            let columns: Vec<Vec<T>> = window
                .iter()
                .map(|&k| cert_space.to_orthonormal(&spec.term(k)))
                .collect();
            let rhs = cert_space.to_orthonormal(&residual);
            let a: Vec<Vec<T>> = (0..dim)
                .map(|i| columns.iter().map(|c| c[i]).collect())
                .collect();
            let sol = phase_one(&a, &rhs);
            if sol.residual > bound * T::c(0.25) {
                continue;
            }
            let eps = T::c(1e-9);
            let picked: Vec<u64> = window
                .iter()
                .zip(&sol.x)
                .filter(|(_, &lam)| lam >= T::one() - eps)
                .map(|(&k, _)| k)
                .collect();
            let fractional: Vec<u64> = window
                .iter()
                .zip(&sol.x)
                .filter(|(_, &lam)| lam > eps && lam < T::one() - eps)
                .map(|(&k, _)| k)
                .collect();
            let error_of = |subset: &[u64]| -> T {
                let mut sum = base.clone();
                for &k in subset {
                    linalg::axpy(T::one(), &spec.term(k), &mut sum);
                }
                cert_space.norm(&linalg::sub(&sum, target))
            };
            let mut best: Option<(T, Vec<u64>)> = None;
            for mask in 0u32..1 << fractional.len() {
                let mut candidate = picked.clone();
                for (bit, &k) in fractional.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        candidate.push(k);
                    }
                }
                let err = error_of(&candidate);
                if best.as_ref().map_or(true, |(b, _)| err < *b) {
                    best = Some((err, candidate));
                }
            }
            let (err, subset) = best.expect("empty rounding always exists");
            if err <= bound {
                chosen = Some(subset);
                break;
            }
        }
        let Some(mut subset) = chosen else {
            return Err(Error::StageFailure {
                stage: l,
                detail: format!(
                    "no window subset within 1/{l} of the target (window up to {window_end})"
                ),
            });
        };
        window_floor = window_floor.max(window_end);

        // mandatory terms in natural order, then the repair subset ordered
        // greedily toward the target in the ordering disc
        for &k in &mandatory {
            linalg::axpy(T::one(), &spec.term(k), &mut prefix);
            stream.emitted.push(k);
            scheduled.insert(k);
        }
        while !subset.is_empty() {
            let (pos, _) = subset
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let mut next = prefix.clone();
                    linalg::axpy(T::one(), &spec.term(k), &mut next);
                    (i, ord_space.norm(&linalg::sub(&next, target)))
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let k = subset.swap_remove(pos);
            linalg::axpy(T::one(), &spec.term(k), &mut prefix);
            stream.emitted.push(k);
            scheduled.insert(k);
        }
        stream.certificates.push(StageCertificate {
            stage: l,
            prefix_length: stream.emitted.len(),
            error_bound: bound,
            disc_index: disc_cert,
        });
    }
    Ok(stream)
}

/// Classical greedy rearrangement of a conditionally convergent scalar
/// stream: emit positive terms until the running sum crosses the target,
/// then negative ones, certifying the error at each crossing by the
/// magnitude of the crossing term.
pub fn riemann_rearrange<T: Real>(
    stream: &ScalarStream<T>,
    target: T,
    max_terms: usize,
) -> Result<PermutationStream<T>> {
    stream.validate()?;
    if stream.classify() != Convergence::Conditional {
        return Err(Error::NotConditional);
    }
    let mut out = PermutationStream::default();
    let mut running = T::zero();
    let mut above = false;
    let mut next_pos: u64 = 1;
    let mut next_neg: u64 = 1;
    let mut crossings = 0usize;
    let advance = |from: u64, positive: bool| -> u64 {
        let mut k = from;
        loop {
            let t = stream.term(k);
            if (positive && t > T::zero()) || (!positive && t < T::zero()) {
                return k;
            }
            k += 1;
        }
    };
    for _ in 0..max_terms {
        let want_positive = running <= target;
        let k = if want_positive {
            next_pos = advance(next_pos, true);
            let k = next_pos;
            next_pos += 1;
            k
        } else {
            next_neg = advance(next_neg, false);
            let k = next_neg;
            next_neg += 1;
            k
        };
        let t = stream.term(k);
        running = running + t;
        out.emitted.push(k);
        let now_above = running > target;
        if now_above != above && !out.emitted.is_empty() {
            crossings += 1;
            out.certificates.push(StageCertificate {
                stage: crossings,
                prefix_length: out.emitted.len(),
                error_bound: t.abs(),
                disc_index: 0,
            });
        }
        above = now_above;
    }
    Ok(out)
}
