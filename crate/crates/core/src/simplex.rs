//! Phase-I bounded-variable simplex for zonotope membership.
//!
//! Solves `A x = b`, `0 <= x_j <= 1`, by minimizing the sum of artificial
//! variables. The optimum is a basic feasible point, so at most
//! `rows(A)` coordinates end up strictly between their bounds; that is
//! what keeps the rounding exhaustion downstream exponential only in the
//! dimension, never in the number of points.

use crate::scalar::Real;

const PIVOT_TOL: f64 = 1e-11;
const MAX_ITERS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Outcome of the Phase-I solve.
#[derive(Debug, Clone)]
pub struct PhaseOne<T> {
    /// box variables, length = columns of `a`
    pub x: Vec<T>,
    /// optimal `l1` infeasibility: total artificial mass left
    pub residual: T,
}

/// Minimize the `l1` infeasibility of `A x = b` over the box `[0,1]^s`.
///
/// Always returns the optimum; callers decide whether `residual` is small
/// enough to count as membership. Bland's rule keeps the iteration finite.
pub fn phase_one<T: Real>(a: &[Vec<T>], b: &[T]) -> PhaseOne<T> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let total = cols + rows;
    let tol = T::c(PIVOT_TOL);

    // rows with negative rhs are negated so the artificial basis is the
    // identity and every basic value starts nonnegative
    let mut tab: Vec<Vec<T>> = (0..rows)
        .map(|i| {
            let sign = if b[i] >= T::zero() { T::one() } else { -T::one() };
            let mut row: Vec<T> = a[i].iter().map(|&v| sign * v).collect();
            row.resize(total, T::zero());
            row[cols + i] = T::one();
            row
        })
        .collect();
    let mut basis: Vec<usize> = (0..rows).map(|i| cols + i).collect();
    let mut xb: Vec<T> = b.iter().map(|&v| v.abs()).collect();
    let mut status = vec![VarStatus::AtLower; total];
    for i in 0..rows {
        status[cols + i] = VarStatus::Basic;
    }
    let upper = |j: usize| -> T {
        if j < cols {
            T::one()
        } else {
            T::infinity()
        }
    };
    let cost = |j: usize| -> T {
        if j < cols {
            T::zero()
        } else {
            T::one()
        }
    };

    for _ in 0..MAX_ITERS {
        // reduced costs against the Phase-I objective
        let mut entering = None;
        for j in 0..total {
            if status[j] == VarStatus::Basic {
                continue;
            }
            let mut reduced = cost(j);
            for i in 0..rows {
                reduced = reduced - cost(basis[i]) * tab[i][j];
            }
            let improving = match status[j] {
                VarStatus::AtLower => reduced < -tol,
                VarStatus::AtUpper => reduced > tol,
                VarStatus::Basic => unreachable!(),
            };
            if improving {
                entering = Some(j);
                break; // Bland: first eligible index
            }
        }
        let Some(j) = entering else { break };
        let dir = if status[j] == VarStatus::AtLower {
            T::one()
        } else {
            -T::one()
        };

        // ratio test: entering moves by t, basic row i moves by -dir*tab[i][j]*t
        let mut t = upper(j); // bound flip distance
        let mut leaving: Option<(usize, VarStatus)> = None;
        for i in 0..rows {
            let delta = dir * tab[i][j];
            if delta > tol {
                let room = xb[i]; // lower bound of every variable is 0
                if room / delta < t {
                    t = room / delta;
                    leaving = Some((i, VarStatus::AtLower));
                }
            } else if delta < -tol {
                let room = upper(basis[i]) - xb[i];
                if room / -delta < t {
                    t = room / -delta;
                    leaving = Some((i, VarStatus::AtUpper));
                }
            }
        }
        if t == T::infinity() {
            break; // unbounded cannot happen for a Phase-I objective
        }
        let t = t.max(T::zero());
        for i in 0..rows {
            xb[i] = xb[i] - dir * tab[i][j] * t;
        }
        match leaving {
            None => {
                // entering ran to its other bound: no basis change
                status[j] = match status[j] {
                    VarStatus::AtLower => VarStatus::AtUpper,
                    VarStatus::AtUpper => VarStatus::AtLower,
                    VarStatus::Basic => unreachable!(),
                };
            }
            Some((r, leave_to)) => {
                // pivot (r, j)
                let entering_value = match status[j] {
                    VarStatus::AtLower => t,
                    VarStatus::AtUpper => T::one() - t,
                    VarStatus::Basic => unreachable!(),
                };
                let piv = tab[r][j];
                let inv = piv.recip();
                for v in tab[r].iter_mut() {
                    *v = *v * inv;
                }
                for i in 0..rows {
                    if i == r {
                        continue;
                    }
                    let f = tab[i][j];
                    if f == T::zero() {
                        continue;
                    }
                    for k in 0..total {
                        let v = tab[r][k];
                        tab[i][k] = tab[i][k] - f * v;
                    }
                }
                status[basis[r]] = leave_to;
                status[j] = VarStatus::Basic;
                basis[r] = j;
                xb[r] = entering_value;
            }
        }
    }

    let mut x = vec![T::zero(); cols];
    let mut residual = T::zero();
    for j in 0..cols {
        if status[j] == VarStatus::AtUpper {
            x[j] = T::one();
        }
    }
    for i in 0..rows {
        let v = xb[i].max(T::zero());
        if basis[i] < cols {
            x[basis[i]] = v.min(T::one());
        } else {
            residual = residual + v;
        }
    }
    PhaseOne { x, residual }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_of(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
        (0..a.len())
            .map(|i| {
                let ax: f64 = a[i].iter().zip(x).map(|(c, v)| c * v).sum();
                (ax - b[i]).abs()
            })
            .sum()
    }

    #[test]
    fn feasible_interval_problem() {
        // x1 - x2 = 0.5 with x in [0,1]^2
        let a = vec![vec![1.0, -1.0]];
        let sol = phase_one(&a, &[0.5]);
        assert!(sol.residual < 1e-9);
        assert!(residual_of(&a, &[0.5], &sol.x) < 1e-9);
    }

    #[test]
    fn infeasible_reports_gap() {
        // x1 + x2 = 3 cannot be reached in the unit box; best is 2
        let a: Vec<Vec<f64>> = vec![vec![1.0, 1.0]];
        let sol = phase_one(&a, &[3.0]);
        assert!((sol.residual - 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9 && (sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs() {
        let a = vec![vec![1.0, -1.0], vec![0.0, 1.0]];
        let sol = phase_one(&a, &[-0.25, 0.75]);
        assert!(sol.residual < 1e-9);
        assert!(residual_of(&a, &[-0.25, 0.75], &sol.x) < 1e-9);
    }

    #[test]
    fn basic_solution_has_few_fractional_coords() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = rng.gen_range(1..=4usize);
            let s = rng.gen_range(1..=12usize);
            let a: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            // rhs built from a random box point, so the system is feasible
            let lam: Vec<f64> = (0..s).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..d)
                .map(|i| a[i].iter().zip(&lam).map(|(c, v)| c * v).sum())
                .collect();
            let sol = phase_one(&a, &b);
            assert!(sol.residual < 1e-8, "feasible instance reported gap");
            assert!(residual_of(&a, &b, &sol.x) < 1e-7);
            let fractional = sol
                .x
                .iter()
                .filter(|&&v| v > 1e-9 && v < 1.0 - 1e-9)
                .count();
            assert!(fractional <= d, "{fractional} fractional > d = {d}");
        }
    }
}
