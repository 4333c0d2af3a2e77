//! Property-based invariants across the public API.

use proptest::prelude::*;

use steinitz_core::counterexample::{distance_p, DiagonalSeminorm, FinGenGroup};
use steinitz_core::hilbert::{
    hs_norm, singular_values, volume_number, LinearMap, WeightedHilbert,
};
use steinitz_core::koethe::{dual_norm, KoetheMatrix};
use steinitz_core::rearrange::{round_off, RoundOffInstance};
use steinitz_core::series::{ScalarStream, SeriesSpec};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-2.0..2.0f64, cols),
        rows,
    )
}

fn square_dim() -> impl Strategy<Value = usize> {
    1..=4usize
}

fn std_map(m: Vec<Vec<f64>>) -> LinearMap<f64> {
    let rows = m.len();
    let cols = m[0].len();
    LinearMap::new(
        m,
        WeightedHilbert::standard(cols),
        WeightedHilbert::standard(rows),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // property (1): every volume number is dominated by the operator norm
    #[test]
    fn volume_number_below_operator_norm(
        (d, m) in square_dim().prop_flat_map(|d| (Just(d), matrix(d, d)))
    ) {
        let map = std_map(m);
        let sv = singular_values(&map);
        let op = sv.first().copied().unwrap_or(0.0);
        for n in 1..=d {
            prop_assert!(volume_number(&map, n) <= op + 1e-12);
        }
    }

    // property (5): volume numbers dominate the singular values
    #[test]
    fn volume_number_above_hilbert_numbers(
        (d, m) in square_dim().prop_flat_map(|d| (Just(d), matrix(d, d)))
    ) {
        let map = std_map(m);
        let sv = singular_values(&map);
        for n in 1..=d {
            prop_assert!(volume_number(&map, n) >= sv[n - 1] - 1e-12);
        }
    }

    // property (2): submultiplicativity under composition
    #[test]
    fn volume_number_submultiplicative(
        (d, a, b) in square_dim()
            .prop_flat_map(|d| (Just(d), matrix(d, d), matrix(d, d)))
    ) {
        let s = std_map(a);
        let t = std_map(b);
        let ts = t.compose(&s).unwrap();
        for n in 1..=d {
            prop_assert!(
                volume_number(&ts, n)
                    <= volume_number(&t, n) * volume_number(&s, n) + 1e-9
            );
        }
    }

    // property (3): ideal property with norm factors on both sides
    #[test]
    fn volume_number_ideal_property(
        (d, r, t, s) in square_dim()
            .prop_flat_map(|d| (Just(d), matrix(d, d), matrix(d, d), matrix(d, d)))
    ) {
        let r = std_map(r);
        let t = std_map(t);
        let s = std_map(s);
        let rts = r.compose(&t.compose(&s).unwrap()).unwrap();
        let norm_r = singular_values(&r).first().copied().unwrap_or(0.0);
        let norm_s = singular_values(&s).first().copied().unwrap_or(0.0);
        for n in 1..=d {
            prop_assert!(
                volume_number(&rts, n) <= norm_r * volume_number(&t, n) * norm_s + 1e-9
            );
        }
    }

    #[test]
    fn hs_norm_dominates_operator_norm(
        (_d, m) in square_dim().prop_flat_map(|d| (Just(d), matrix(d, d)))
    ) {
        let map = std_map(m);
        let sv = singular_values(&map);
        prop_assert!(hs_norm(&map) >= sv.first().copied().unwrap_or(0.0) - 1e-12);
    }

    #[test]
    fn dual_norm_triangle_inequality(
        u in prop::collection::vec(-5.0..5.0f64, 1..8),
        v in prop::collection::vec(-5.0..5.0f64, 1..8),
        n in 1..=4usize,
    ) {
        let grid = KoetheMatrix::<f64>::Power;
        let len = u.len().max(v.len());
        let mut su = u.clone();
        su.resize(len, 0.0);
        let mut sv = v.clone();
        sv.resize(len, 0.0);
        let sum: Vec<f64> = su.iter().zip(&sv).map(|(a, b)| a + b).collect();
        let lhs = dual_norm(&sum, &grid, n).unwrap();
        let rhs = dual_norm(&su, &grid, n).unwrap() + dual_norm(&sv, &grid, n).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn dual_norm_of_basis_vector(i in 1..=30usize, n in 1..=4usize) {
        let grid = KoetheMatrix::<f64>::Power;
        let mut u = vec![0.0; i];
        u[i - 1] = 1.0;
        let expected = (i as f64).powi(-(n as i32));
        prop_assert!((dual_norm(&u, &grid, n).unwrap() - expected).abs() < 1e-12);
    }

    // rounding-off bound on feasible instances built from a box point
    #[test]
    fn round_off_meets_unit_bound(
        (d, _s, raw, lam) in (1..=3usize, 2..=8usize).prop_flat_map(|(d, s)| {
            (
                Just(d),
                Just(s),
                prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), s),
                prop::collection::vec(0.0..1.0f64, s),
            )
        })
    ) {
        let points: Vec<Vec<f64>> = raw
            .iter()
            .map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        let mut target = vec![0.0; d];
        for (p, &l) in points.iter().zip(&lam) {
            for (t, &x) in target.iter_mut().zip(p) {
                *t += l * x;
            }
        }
        let h2 = WeightedHilbert::new(vec![1.0 / d as f64; d]).unwrap();
        let inst = RoundOffInstance {
            points: points.clone(),
            space_h1: WeightedHilbert::standard(d),
            space_h2: h2.clone(),
            target: target.clone(),
        };
        let subset = round_off(&inst).unwrap();
        let mut sum = vec![0.0; d];
        for &k in &subset {
            for (acc, &x) in sum.iter_mut().zip(&points[k]) {
                *acc += x;
            }
        }
        let diff: Vec<f64> = sum.iter().zip(&target).map(|(a, b)| a - b).collect();
        prop_assert!(h2.norm(&diff) <= 1.0 + 1e-9);
    }

    // doubling every seminorm weight doubles certified distances
    #[test]
    fn distance_scales_with_seminorm(
        g in prop::collection::vec(0.5..3.0f64, 1..4),
        a in prop::collection::vec(-2.0..2.0f64, 1..4),
    ) {
        let d = g.len().min(a.len());
        let g = g[..d].to_vec();
        let a = a[..d].to_vec();
        let group = FinGenGroup { generators: vec![g], tags: vec![1] };
        let p1 = DiagonalSeminorm::new(vec![1.0; d]).unwrap();
        let p2 = DiagonalSeminorm::new(vec![2.0; d]).unwrap();
        let b1 = distance_p(&a, &group, &p1, 4.0).unwrap();
        let b2 = distance_p(&a, &group, &p2, 8.0).unwrap();
        if b1.shell_closed && b2.shell_closed {
            prop_assert!((b2.bound - 2.0 * b1.bound).abs() < 1e-7);
        }
    }

    // certified sums agree with a ten-times finer recomputation
    #[test]
    fn certified_sum_is_consistent(
        alpha in 1.1..2.5f64,
        scale in -2.0..2.0f64,
        dir in prop::collection::vec(-1.0..1.0f64, 1..3),
    ) {
        let spec = SeriesSpec::new(
            dir.len(),
            vec![steinitz_core::series::Component {
                direction: dir.clone(),
                stream: ScalarStream::Power { alpha, scale },
            }],
        )
        .unwrap();
        if let (Ok((coarse, bound)), Ok((fine, _))) = (spec.sum(1e-4), spec.sum(1e-5)) {
            let diff: f64 = coarse
                .iter()
                .zip(&fine)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            prop_assert!(diff <= bound + 1e-5);
        }
    }
}
