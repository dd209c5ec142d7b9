//! Dense convex QP solver for `min ½‖x‖²  subject to  Ax ≥ b`.
//!
//! Dual active-set method of the Goldfarb-Idnani family, specialized to an
//! identity Hessian: start from the unconstrained minimizer x = 0 (dual
//! feasible by construction), repeatedly pick the most violated constraint
//! and take the largest step toward satisfying it that keeps the multipliers
//! nonnegative, dropping whichever active constraint blocks first. With G = I
//! every primal step is a projection, so the only factorization needed is a
//! QR of the active constraint normals; the problems here are tiny (tens of
//! variables, at most a few hundred rows), so the QR is rebuilt from scratch
//! on each active-set change rather than updated by Givens rotations.

/// A point satisfying the KKT conditions of the QP.
#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Lagrange multipliers, one per constraint row (zero for inactive rows).
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

/// Non-convergence report carrying the best iterate reached.
#[derive(Clone, Debug)]
pub struct QpFailure {
    pub best: Vec<f64>,
    pub message: String,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt QR of the active constraint normals, two passes for
/// orthogonality at working precision. Returns `None` if the active set has
/// become numerically dependent (which the add rule is meant to prevent).
/// `r_cols[j]` holds column j of R, entries R[0..=j][j].
#[allow(clippy::type_complexity)]
fn rebuild_qr(rows: &[Vec<f64>], active: &[usize]) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    for &idx in active {
        let v = &rows[idx];
        let mut resid = v.clone();
        let mut r_col = vec![0.0; q_cols.len() + 1];
        for _ in 0..2 {
            for (j, qj) in q_cols.iter().enumerate() {
                let c = dot(qj, &resid);
                r_col[j] += c;
                for (ri, qi) in resid.iter_mut().zip(qj) {
                    *ri -= c * qi;
                }
            }
        }
        let nrm = dot(&resid, &resid).sqrt();
        if nrm <= 1e-14 * dot(v, v).sqrt() {
            return None;
        }
        r_col[q_cols.len()] = nrm;
        for ri in resid.iter_mut() {
            *ri /= nrm;
        }
        q_cols.push(resid);
        r_cols.push(r_col);
    }
    Some((q_cols, r_cols))
}

/// Back-substitution for `R r = w` with R upper triangular in column storage.
fn back_solve(r_cols: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let k = r_cols.len();
    let mut r = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = w[i];
        for (j, col) in r_cols.iter().enumerate().skip(i + 1) {
            s -= col[i] * r[j];
        }
        r[i] = s / r_cols[i][i];
    }
    r
}

/// Minimizes ½‖x‖² over x ∈ R^n subject to `rows[i]·x ≥ rhs[i]` for all i.
///
/// Returns a point whose KKT residuals (feasibility, dual nonnegativity,
/// complementarity, stationarity) are at working precision relative to the
/// problem scale, or a failure carrying the best iterate when the iteration
/// budget runs out or the constraints are inconsistent. Ties in the violated-
/// constraint and blocking-constraint choices break toward the lowest row
/// index so the solve path is deterministic.
pub fn solve_min_norm(n: usize, rows: &[Vec<f64>], rhs: &[f64]) -> Result<QpSolution, QpFailure> {
    let m = rows.len();
    debug_assert_eq!(rhs.len(), m);
    debug_assert!(rows.iter().all(|r| r.len() == n));

    let mut x = vec![0.0; n];
    if m == 0 {
        return Ok(QpSolution {
            x,
            multipliers: Vec::new(),
            iterations: 0,
        });
    }

    let scale = rhs.iter().fold(1.0f64, |acc, b| acc.max(b.abs()));
    let tol_violation = 1e-11 * scale;
    let tol_r = 1e-12;
    let budget = 50 * (m + n) + 100;

    let mut is_active = vec![false; m];
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        if iterations > budget {
            return Err(QpFailure {
                best: x,
                message: format!("iteration budget {budget} exhausted"),
            });
        }

        // Most violated inactive constraint; none means optimality.
        let mut p = None;
        let mut worst = -tol_violation;
        for i in 0..m {
            if is_active[i] {
                continue;
            }
            let v = dot(&rows[i], &x) - rhs[i];
            if v < worst {
                worst = v;
                p = Some(i);
            }
        }
        let Some(p) = p else {
            let mut multipliers = vec![0.0; m];
            for (&idx, &ui) in active.iter().zip(&u) {
                multipliers[idx] = ui;
            }
            return Ok(QpSolution {
                x,
                multipliers,
                iterations,
            });
        };

        let np = rows[p].clone();
        let np_norm2 = dot(&np, &np);
        let mut u_p = 0.0;

        // Work constraint p into the active set, dropping blockers as needed.
        loop {
            iterations += 1;
            if iterations > budget {
                return Err(QpFailure {
                    best: x,
                    message: format!("iteration budget {budget} exhausted"),
                });
            }

            // z: component of np orthogonal to the active normals (primal
            // step direction); r: expansion of np in the active normals
            // (dual step direction).
            let w: Vec<f64> = q_cols.iter().map(|q| dot(q, &np)).collect();
            let mut z = np.clone();
            for (wj, qj) in w.iter().zip(&q_cols) {
                for (zi, qi) in z.iter_mut().zip(qj) {
                    *zi -= wj * qi;
                }
            }
            let z_norm2 = dot(&z, &z);
            let full_step_exists = z_norm2 > 1e-20 * np_norm2;
            let r = back_solve(&r_cols, &w);

            let mut t1 = f64::INFINITY;
            let mut drop_pos = None;
            for (j, (&rj, &uj)) in r.iter().zip(&u).enumerate() {
                if rj > tol_r {
                    let t = uj / rj;
                    if t < t1 {
                        t1 = t;
                        drop_pos = Some(j);
                    }
                }
            }

            let violation = dot(&np, &x) - rhs[p];
            let t2 = if full_step_exists {
                -violation / z_norm2
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpFailure {
                    best: x,
                    message: "constraints are inconsistent (no primal or dual step exists)".into(),
                });
            }

            if t2 <= t1 {
                // Full step: constraint p becomes tight and joins the set.
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t2 * zi;
                }
                for (uj, rj) in u.iter_mut().zip(&r) {
                    *uj -= t2 * rj;
                }
                u_p += t2;
                active.push(p);
                is_active[p] = true;
                u.push(u_p);
                match rebuild_qr(rows, &active) {
                    Some((q, rr)) => {
                        q_cols = q;
                        r_cols = rr;
                    }
                    None => {
                        return Err(QpFailure {
                            best: x,
                            message: "active set became numerically dependent".into(),
                        })
                    }
                }
                break;
            }

            // Partial step to where the blocking multiplier hits zero, then
            // drop that constraint and retry.
            let j = drop_pos.expect("finite t1 has a blocking position");
            if full_step_exists {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t1 * zi;
                }
            }
            for (uj, rj) in u.iter_mut().zip(&r) {
                *uj -= t1 * rj;
            }
            u_p += t1;
            let dropped = active.remove(j);
            is_active[dropped] = false;
            u.remove(j);
            match rebuild_qr(rows, &active) {
                Some((q, rr)) => {
                    q_cols = q;
                    r_cols = rr;
                }
                None => {
                    return Err(QpFailure {
                        best: x,
                        message: "active set became numerically dependent".into(),
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn kkt_residuals(rows: &[Vec<f64>], rhs: &[f64], sol: &QpSolution) -> (f64, f64, f64, f64) {
        let n = sol.x.len();
        let mut worst_violation = 0.0f64;
        let mut worst_negative_u = 0.0f64;
        let mut worst_complementarity = 0.0f64;
        let mut grad = sol.x.clone();
        for ((row, &b), &ui) in rows.iter().zip(rhs).zip(&sol.multipliers) {
            let v = dot(row, &sol.x) - b;
            worst_violation = worst_violation.max(-v);
            worst_negative_u = worst_negative_u.max(-ui);
            worst_complementarity = worst_complementarity.max((ui * v).abs());
            for i in 0..n {
                grad[i] -= ui * row[i];
            }
        }
        let stationarity = dot(&grad, &grad).sqrt();
        (
            worst_violation,
            worst_negative_u,
            worst_complementarity,
            stationarity,
        )
    }

    #[test]
    fn unconstrained_returns_origin() {
        let sol = solve_min_norm(3, &[], &[]).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn satisfied_constraints_leave_origin() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let rhs = vec![-1.0, -2.0];
        let sol = solve_min_norm(2, &rows, &rhs).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        assert_eq!(sol.multipliers, vec![0.0, 0.0]);
    }

    #[test]
    fn single_constraint_projects_onto_hyperplane() {
        // min ½‖x‖² s.t. 3x₁ + 4x₂ ≥ 10 → x = (10/25)·(3, 4).
        let rows = vec![vec![3.0, 4.0]];
        let rhs = vec![10.0];
        let sol = solve_min_norm(2, &rows, &rhs).unwrap();
        assert!((sol.x[0] - 1.2).abs() < 1e-12);
        assert!((sol.x[1] - 1.6).abs() < 1e-12);
        assert!((sol.multipliers[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn corner_with_binding_diagonal() {
        // x₁ ≥ 1, x₂ ≥ 1, x₁ + x₂ ≥ 3: only the diagonal binds at (1.5, 1.5).
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let rhs = vec![1.0, 1.0, 3.0];
        let sol = solve_min_norm(2, &rows, &rhs).unwrap();
        assert!((sol.x[0] - 1.5).abs() < 1e-12);
        assert!((sol.x[1] - 1.5).abs() < 1e-12);
        assert!(sol.multipliers[0].abs() < 1e-12);
        assert!(sol.multipliers[1].abs() < 1e-12);
        assert!((sol.multipliers[2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn corner_with_redundant_diagonal() {
        // Same cone but the diagonal constraint is slack at the corner (1, 1).
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let rhs = vec![1.0, 1.0, 1.5];
        let sol = solve_min_norm(2, &rows, &rhs).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 1.0).abs() < 1e-12);
        assert!((sol.multipliers[1] - 1.0).abs() < 1e-12);
        assert!(sol.multipliers[2].abs() < 1e-12);
    }

    #[test]
    fn detects_inconsistent_constraints() {
        let rows = vec![vec![1.0], vec![-1.0]];
        let rhs = vec![1.0, 1.0];
        let err = solve_min_norm(1, &rows, &rhs).unwrap_err();
        assert!(err.message.contains("inconsistent"));
    }

    #[test]
    fn random_instances_satisfy_kkt() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for trial in 0..200 {
            let n = rng.random_range(2..=6);
            let m = rng.random_range(1..=12);
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            if rows.iter().any(|r| dot(r, r) < 1e-6) {
                continue;
            }
            // Guarantee feasibility: every rhs sits at or below a common
            // witness point's value, half the rows exactly on it.
            let witness: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rhs: Vec<f64> = rows
                .iter()
                .map(|row| {
                    let slack = if rng.random_bool(0.5) {
                        0.0
                    } else {
                        rng.random_range(0.0..1.0)
                    };
                    dot(row, &witness) - slack
                })
                .collect();
            match solve_min_norm(n, &rows, &rhs) {
                Ok(sol) => {
                    let (viol, neg_u, comp, stat) = kkt_residuals(&rows, &rhs, &sol);
                    assert!(viol < 1e-8, "trial {trial}: violation {viol}");
                    assert!(neg_u < 1e-10, "trial {trial}: negative multiplier {neg_u}");
                    assert!(comp < 1e-8, "trial {trial}: complementarity {comp}");
                    assert!(stat < 1e-8, "trial {trial}: stationarity {stat}");
                }
                Err(f) => panic!("trial {trial} failed: {}", f.message),
            }
        }
    }
}
