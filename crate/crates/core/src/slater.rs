//! Strictly feasible point search for `A z <= rhs` over a box.
//!
//! Projected subgradient ascent on the concave piecewise-linear min-margin
//! objective `z -> min_j (rhs_j - A_j z)`, step proportional to 1/sqrt(k).
//! This avoids embedding an LP solver. The full iteration budget is spent
//! keeping the best point seen: downstream bound formulas divide by the
//! returned margin, so a razor-thin early exit would poison them.

use crate::error::{Error, Result};
use crate::geometry::{clamp_in_place, BoxSet};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub struct SlaterOptions {
    /// Success threshold on the min constraint margin.
    pub margin: f64,
    /// Subgradient iteration budget.
    pub max_iters: usize,
}

impl Default for SlaterOptions {
    fn default() -> Self {
        Self {
            margin: 1e-6,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlaterPoint {
    pub point: Vec<f64>,
    /// `min_j (b_j + nu_j - phi - A_j z)`; `+inf` when there are no rows.
    pub margin: f64,
}

fn min_margin(a: &SparseMatrix, b: &[f64], nu: &[f64], phi: f64, z: &[f64]) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for j in 0..a.nrows() {
        let m = b[j] + nu[j] - phi - a.row_dot(j, z);
        if m < best {
            best = m;
            arg = j;
        }
    }
    (best, arg)
}

/// Find `z` with `A z - b - nu + phi 1 < 0` strictly and `z` strictly inside
/// the box. Reports the best point found on failure.
pub fn find_slater_point(
    a: &SparseMatrix,
    b: &[f64],
    nu: &[f64],
    phi: f64,
    zbox: &BoxSet,
    opts: &SlaterOptions,
) -> Result<SlaterPoint> {
    let dim = zbox.len();
    debug_assert_eq!(a.ncols(), dim);

    // Strict interiority of the box is part of the contract.
    for i in 0..dim {
        if zbox.width(i) <= 0.0 {
            return Err(Error::SlaterInfeasible {
                best_margin: f64::NEG_INFINITY,
                best_point: zbox.center(),
            });
        }
    }

    if a.nrows() == 0 {
        return Ok(SlaterPoint {
            point: zbox.center(),
            margin: f64::INFINITY,
        });
    }

    // Work inside a shrunken box so the answer is strictly interior.
    let inner_lo: Vec<f64> = (0..dim)
        .map(|i| zbox.lo()[i] + zbox.width(i) * 1e-3)
        .collect();
    let inner_hi: Vec<f64> = (0..dim)
        .map(|i| zbox.hi()[i] - zbox.width(i) * 1e-3)
        .collect();

    // Deterministic multi-start: the center stalls on large one-sided
    // systems, while the corner opposing each column's aggregate
    // coefficient is often already strictly feasible.
    let mut col_sums = vec![0.0f64; dim];
    for j in 0..a.nrows() {
        let (cols, vals) = a.row(j);
        for (c, v) in cols.iter().zip(vals) {
            col_sums[*c] += v;
        }
    }
    let signed_corner: Vec<f64> = (0..dim)
        .map(|i| {
            if col_sums[i] > 0.0 {
                inner_lo[i]
            } else {
                inner_hi[i]
            }
        })
        .collect();
    let candidates = [
        zbox.center(),
        signed_corner,
        inner_lo.clone(),
        inner_hi.clone(),
    ];
    let mut z = candidates[0].clone();
    let mut start_margin = f64::NEG_INFINITY;
    for cand in &candidates {
        let (m, _) = min_margin(a, b, nu, phi, cand);
        if m > start_margin {
            start_margin = m;
            z.copy_from_slice(cand);
        }
    }
    let mut best = SlaterPoint {
        point: z.clone(),
        margin: start_margin,
    };

    let scale = (0..dim).map(|i| zbox.width(i)).fold(0.0, f64::max);
    let row_norms = a.row_norms();
    let mut since_improved = 0usize;
    for k in 1..=opts.max_iters {
        let (m, j) = min_margin(a, b, nu, phi, &z);
        if m > best.margin {
            best.point.copy_from_slice(&z);
            best.margin = m;
            since_improved = 0;
        } else {
            since_improved += 1;
        }
        if best.margin >= opts.margin && since_improved > 2_000 {
            break;
        }
        let nj = row_norms[j];
        if nj == 0.0 {
            // The active row is all-zero: its margin is constant; nothing to do.
            break;
        }
        let step = scale / (k as f64).sqrt();
        let (cols, vals) = a.row(j);
        for (c, v) in cols.iter().zip(vals) {
            z[*c] -= step * v / nj;
        }
        clamp_in_place(&mut z, &inner_lo, &inner_hi);
    }

    if best.margin >= opts.margin {
        Ok(best)
    } else {
        Err(Error::SlaterInfeasible {
            best_margin: best.margin,
            best_point: best.point,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_constraint_interior() {
        // z <= 1 on Z = [0, 2]: any interior point qualifies.
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let zbox = BoxSet::new(vec![0.0], vec![2.0]).unwrap();
        let p = find_slater_point(&a, &[1.0], &[0.0], 0.0, &zbox, &SlaterOptions::default())
            .unwrap();
        assert!(p.margin >= 1e-6);
        assert!(p.point[0] < 1.0 - 1e-6);
        assert!(p.point[0] > 0.0 && p.point[0] < 2.0);
    }

    #[test]
    fn contradictory_constraints_infeasible() {
        // z <= -1 and -z <= -1 on Z = [0, 1]: empty.
        let a = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, -1.0)]).unwrap();
        let zbox = BoxSet::new(vec![0.0], vec![1.0]).unwrap();
        let err = find_slater_point(
            &a,
            &[-1.0, -1.0],
            &[0.0, 0.0],
            0.0,
            &zbox,
            &SlaterOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::SlaterInfeasible { best_margin, .. } => assert!(best_margin < 0.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn no_rows_returns_center() {
        let a = SparseMatrix::zeros(0, 2);
        let zbox = BoxSet::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let p = find_slater_point(&a, &[], &[], 0.0, &zbox, &SlaterOptions::default()).unwrap();
        assert_eq!(p.point, vec![0.5, 0.0]);
        assert!(p.margin.is_infinite());
    }

    #[test]
    fn degenerate_box_fails() {
        let a = SparseMatrix::zeros(0, 1);
        let zbox = BoxSet::new(vec![0.5], vec![0.5]).unwrap();
        assert!(find_slater_point(&a, &[], &[], 0.0, &zbox, &SlaterOptions::default()).is_err());
    }

    /// Strict point found whenever a 0.05-resolution grid finds one (3 vars).
    #[test]
    fn grid_cross_check_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let entries: Vec<(usize, usize, f64)> = (0..3)
                .flat_map(|r| {
                    (0..3).map(move |c| (r, c, 0.0)) // placeholder, filled below
                })
                .collect();
            let mut ent = entries;
            for e in ent.iter_mut() {
                e.2 = rng.gen_range(-2.0..2.0f64);
            }
            let a = SparseMatrix::from_triplets(3, 3, &ent).unwrap();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let zbox = BoxSet::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();

            // Grid oracle at resolution 0.05.
            let mut grid_best = f64::NEG_INFINITY;
            let steps = 40;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let z = [
                            -1.0 + i as f64 * 0.05,
                            -1.0 + j as f64 * 0.05,
                            -1.0 + k as f64 * 0.05,
                        ];
                        let m = (0..3)
                            .map(|r| b[r] - a.row_dot(r, &z))
                            .fold(f64::INFINITY, f64::min);
                        grid_best = grid_best.max(m);
                    }
                }
            }

            let nu = [0.0; 3];
            let res = find_slater_point(&a, &b, &nu, 0.0, &zbox, &SlaterOptions::default());
            if grid_best > 0.05 {
                assert!(
                    res.is_ok(),
                    "trial {trial}: grid found margin {grid_best} but solver failed"
                );
            }
            if let Ok(p) = res {
                // Any returned point is certified strictly feasible.
                let (m, _) = super::min_margin(&a, &b, &nu, 0.0, &p.point);
                assert!(m >= 1e-6, "trial {trial}: claimed point not strict");
            }
        }
    }

    /// 10-var instances: the returned point always satisfies strict
    /// inequality whenever rejection sampling shows strict points exist.
    #[test]
    fn random_10var_vs_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let mut ent = Vec::new();
            for r in 0..5 {
                for c in 0..10 {
                    if rng.gen_bool(0.5) {
                        ent.push((r, c, rng.gen_range(-2.0..2.0)));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(5, 10, &ent).unwrap();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..3.0)).collect();
            let nu = vec![0.0; 5];
            let zbox = BoxSet::new(vec![-1.0; 10], vec![1.0; 10]).unwrap();

            let mut sample_best = f64::NEG_INFINITY;
            for _ in 0..100_000 {
                let z: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let m = (0..5)
                    .map(|r| b[r] - a.row_dot(r, &z))
                    .fold(f64::INFINITY, f64::min);
                sample_best = sample_best.max(m);
            }

            let res = find_slater_point(&a, &b, &nu, 0.0, &zbox, &SlaterOptions::default());
            if sample_best > 0.05 {
                assert!(res.is_ok(), "sampling found margin {sample_best}");
            }
        }
    }
}
