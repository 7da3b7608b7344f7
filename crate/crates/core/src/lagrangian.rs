//! The regularized Lagrangian, its partial gradients, and the constants that
//! tighten and bound it.
//!
//! With `g(z) = A z - b - nu + phi 1` the saddle objective is
//!
//! ```text
//! L(z, lam) = c'z + (alpha/2)||z||^2 + lam' g(z) - (delta/2)||lam||^2,
//! ```
//!
//! strongly convex in `z` (modulus `alpha`) and strongly concave in `lam`
//! (modulus `delta`). The tightening `phi` enters the dualized rows so that
//! the violation the regularization induces stays inside the rounding slack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxSet;
use crate::partition::BlockPartition;
use crate::problem::{MilpInstance, RelaxedProblem};
use crate::sparse::SparseMatrix;

/// `max_{z in Z} ||z||_2`, exact from the box corners:
/// `r^2 = sum_i max(lo_i^2, hi_i^2)`.
pub fn radius_r(zbox: &BoxSet) -> f64 {
    zbox.max_norm()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Shared numerator `c'zbar + (alpha/2)||zbar||^2 + ||c|| r`.
fn bound_numerator(c: &[f64], alpha: f64, r: f64, zbar: &[f64]) -> f64 {
    dot(c, zbar) + 0.5 * alpha * dot(zbar, zbar) + norm(c) * r
}

/// Violation bound for the regularized saddle point:
/// `max_j ||A_j|| * (numerator / min_j (b_j + nu_j - A_j zbar)) * sqrt(delta/(2 alpha))`.
///
/// `zbar` must be strictly feasible for the untightened rows.
#[allow(clippy::too_many_arguments)]
pub fn phi_bound(
    c: &[f64],
    a: &SparseMatrix,
    b: &[f64],
    nu: &[f64],
    alpha: f64,
    delta: f64,
    r: f64,
    zbar: &[f64],
) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let min_margin = (0..a.nrows())
        .map(|j| b[j] + nu[j] - a.row_dot(j, zbar))
        .fold(f64::INFINITY, f64::min);
    if min_margin <= 0.0 {
        return Err(Error::NonpositiveMargin { margin: min_margin });
    }
    let max_row = a.row_norms().into_iter().fold(0.0, f64::max);
    Ok(max_row * (bound_numerator(c, alpha, r, zbar) / min_margin) * (delta / (2.0 * alpha)).sqrt())
}

/// 1-norm cap that contains the dual optimum:
/// `numerator / (min_j (b_j + nu_j - A_j zbar) + phi)`.
///
/// `zbar` must be strictly feasible for the phi-tightened rows, so the
/// denominator is strictly positive.
#[allow(clippy::too_many_arguments)]
pub fn lambda_radius(
    c: &[f64],
    a: &SparseMatrix,
    b: &[f64],
    nu: &[f64],
    alpha: f64,
    r: f64,
    phi: f64,
    zbar: &[f64],
) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let min_margin = (0..a.nrows())
        .map(|j| b[j] + nu[j] - a.row_dot(j, zbar))
        .fold(f64::INFINITY, f64::min);
    let denom = min_margin + phi;
    if denom <= 0.0 {
        return Err(Error::NonpositiveMargin { margin: denom });
    }
    Ok(bound_numerator(c, alpha, r, zbar) / denom)
}

/// Evaluate the regularized Lagrangian.
pub fn eval_l(prob: &RelaxedProblem, z: &[f64], lam: &[f64]) -> f64 {
    let mut v = dot(&prob.c, z) + 0.5 * prob.alpha * dot(z, z) - 0.5 * prob.delta * dot(lam, lam);
    for j in 0..prob.p() {
        v += lam[j] * (prob.a_mat.row_dot(j, z) - prob.b[j] - prob.nu[j] + prob.phi);
    }
    v
}

/// `grad_z L = c + alpha z + A' lam`, written coordinate by coordinate so the
/// simulator's per-block computation is bitwise identical.
pub fn grad_z(prob: &RelaxedProblem, z: &[f64], lam: &[f64], out: &mut [f64]) {
    for l in 0..prob.dim() {
        out[l] = prob.c[l] + prob.alpha * z[l] + prob.a_mat.col_dot(l, lam);
    }
}

/// Single coordinate of `grad_z L`; the primal agents' kernel.
#[inline]
pub fn grad_z_coord(prob: &RelaxedProblem, l: usize, z_l: f64, lam: &[f64]) -> f64 {
    prob.c[l] + prob.alpha * z_l + prob.a_mat.col_dot(l, lam)
}

/// `grad_lam L = A z - b - nu + phi 1 - delta lam`.
pub fn grad_lambda(prob: &RelaxedProblem, z: &[f64], lam: &[f64], out: &mut [f64]) {
    for j in 0..prob.p() {
        out[j] = grad_lambda_coord(prob, j, z, lam[j]);
    }
}

/// Single coordinate of `grad_lam L`; the dual agents' kernel.
#[inline]
pub fn grad_lambda_coord(prob: &RelaxedProblem, j: usize, z: &[f64], lam_j: f64) -> f64 {
    prob.a_mat.row_dot(j, z) - prob.b[j] - prob.nu[j] + prob.phi - prob.delta * lam_j
}

/// A relaxed problem together with the original instance and the block
/// layout agents use; the unit the simulator consumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleProblem {
    pub milp: MilpInstance,
    pub relaxed: RelaxedProblem,
    pub partition: BlockPartition,
}

impl SaddleProblem {
    pub fn new(
        milp: MilpInstance,
        relaxed: RelaxedProblem,
        partition: BlockPartition,
    ) -> Result<Self> {
        partition.validate(relaxed.dim(), relaxed.p())?;
        Ok(Self {
            milp,
            relaxed,
            partition,
        })
    }
}

/// A primal/dual pair in the saddle domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualPoint {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PrimalDualPoint {
    /// Box membership for `z`, nonnegativity and the per-vector 1-norm cap
    /// for `lambda`.
    pub fn in_domain(&self, prob: &RelaxedProblem, tol: f64) -> bool {
        prob.z_box.contains(&self.z, tol)
            && self.lambda.iter().all(|v| *v >= -tol)
            && self.lambda.iter().sum::<f64>() <= prob.lambda_radius + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_relaxation_with, PhiPolicy, RelaxOptions};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn radius_examples() {
        let b = BoxSet::new(vec![-1.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert!((radius_r(&b) - 5.0f64.sqrt()).abs() < 1e-15);
        let z = BoxSet::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(radius_r(&z), 0.0);
    }

    #[test]
    fn radius_matches_grid_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let lo: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..0.0)).collect();
            let hi: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..2.0)).collect();
            let b = BoxSet::new(lo.clone(), hi.clone()).unwrap();
            let mut best = 0.0f64;
            let steps = 50;
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        let z = [
                            lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64,
                            lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64,
                            lo[2] + (hi[2] - lo[2]) * k as f64 / steps as f64,
                        ];
                        best = best.max(z.iter().map(|v| v * v).sum::<f64>().sqrt());
                    }
                }
            }
            assert!(radius_r(&b) >= best - 1e-12);
            assert!(radius_r(&b) <= best + 1e-6 + 0.1, "corner max far from grid");
        }
    }

    /// One constraint `z <= 1` (A = 1, b + nu = 1), c = 1, alpha = delta =
    /// 0.1, zbar = 0, r = 1: phi = 1 * ((0 + 0 + 1)/1) * sqrt(0.5).
    #[test]
    fn phi_bound_toy() {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let phi = phi_bound(&[1.0], &a, &[1.0], &[0.0], 0.1, 0.1, 1.0, &[0.0]).unwrap();
        assert!((phi - 0.5f64.sqrt()).abs() < 1e-12);
        // delta -> 0 sends the bound to 0.
        let phi0 = phi_bound(&[1.0], &a, &[1.0], &[0.0], 0.1, 1e-18, 1.0, &[0.0]).unwrap();
        assert!(phi0 < 1e-8);
    }

    #[test]
    fn phi_bound_rejects_violating_point() {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        match phi_bound(&[1.0], &a, &[1.0], &[0.0], 0.1, 0.1, 1.0, &[2.0]) {
            Err(Error::NonpositiveMargin { .. }) => {}
            other => panic!("expected NonpositiveMargin, got {other:?}"),
        }
    }

    #[test]
    fn lambda_radius_toy() {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let r = lambda_radius(&[1.0], &a, &[1.0], &[0.0], 0.1, 1.0, 0.0, &[0.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        // Zero cost with zbar = 0 degenerates to radius 0.
        let r0 = lambda_radius(&[0.0], &a, &[1.0], &[0.0], 0.1, 1.0, 0.0, &[0.0]).unwrap();
        assert_eq!(r0, 0.0);
        // Larger margin means smaller radius.
        let tight = lambda_radius(&[1.0], &a, &[1.0], &[0.0], 0.1, 1.0, 0.0, &[0.5]).unwrap();
        let loose = lambda_radius(&[1.0], &a, &[2.0], &[0.0], 0.1, 1.0, 0.0, &[0.5]).unwrap();
        assert!(loose < tight);
    }

    fn toy_problem() -> RelaxedProblem {
        // One variable, one row 2y <= 6.75 equivalent; small instance built
        // through the real pipeline so fields are consistent.
        let milp = crate::problem::tests::one_var_instance();
        build_relaxation_with(
            &milp,
            &RelaxOptions {
                xi: Some(0.875),
                alpha: 0.1,
                delta: 0.1,
                phi: PhiPolicy::Fixed(0.0),
                ..RelaxOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn eval_l_examples() {
        let mut prob = toy_problem();
        // Force the hand-checked toy: A = (1), b + nu = 1, c = 1.
        prob.c = vec![1.0];
        prob.a_mat = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        prob.b = vec![1.0];
        prob.nu = vec![0.0];
        prob.phi = 0.0;
        assert_eq!(eval_l(&prob, &[0.0], &[0.0]), 0.0);
        // z = 1, lam = 1: 1 + 0.05 + (1 - 1) - 0.05 = 1.
        assert!((eval_l(&prob, &[1.0], &[1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_at_origin() {
        let prob = toy_problem();
        let z = vec![0.0; prob.dim()];
        let lam = vec![0.0; prob.p()];
        let mut gz = vec![0.0; prob.dim()];
        let mut gl = vec![0.0; prob.p()];
        grad_z(&prob, &z, &lam, &mut gz);
        grad_lambda(&prob, &z, &lam, &mut gl);
        assert_eq!(gz, prob.c);
        for j in 0..prob.p() {
            assert!((gl[j] - (-prob.b[j] - prob.nu[j] + prob.phi)).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let milp = crate::corpus::random_granular_instance(
            &crate::corpus::CorpusConfig::default(),
            3,
        )
        .unwrap();
        let prob = build_relaxation_with(&milp, &RelaxOptions::default()).unwrap();
        let dim = prob.dim();
        let p = prob.p();
        let eps = 1e-6;
        for _ in 0..100 {
            let z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lam: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut gz = vec![0.0; dim];
            let mut gl = vec![0.0; p];
            grad_z(&prob, &z, &lam, &mut gz);
            grad_lambda(&prob, &z, &lam, &mut gl);
            for l in 0..dim {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[l] += eps;
                zm[l] -= eps;
                let fd = (eval_l(&prob, &zp, &lam) - eval_l(&prob, &zm, &lam)) / (2.0 * eps);
                let denom = gz[l].abs().max(1.0);
                assert!(
                    (fd - gz[l]).abs() / denom <= 1e-6,
                    "z-gradient mismatch at {l}: fd {fd}, grad {}",
                    gz[l]
                );
            }
            for j in 0..p {
                let mut lp = lam.clone();
                let mut lm = lam.clone();
                lp[j] += eps;
                lm[j] -= eps;
                let fd = (eval_l(&prob, &z, &lp) - eval_l(&prob, &z, &lm)) / (2.0 * eps);
                let denom = gl[j].abs().max(1.0);
                assert!(
                    (fd - gl[j]).abs() / denom <= 1e-6,
                    "lambda-gradient mismatch at {j}"
                );
            }
        }
    }

    #[test]
    fn strong_convexity_and_concavity() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let milp = crate::corpus::random_granular_instance(
            &crate::corpus::CorpusConfig::default(),
            4,
        )
        .unwrap();
        let prob = build_relaxation_with(&milp, &RelaxOptions::default()).unwrap();
        let dim = prob.dim();
        let p = prob.p();
        for _ in 0..200 {
            let z1: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z2: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lam: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut g1 = vec![0.0; dim];
            let mut g2 = vec![0.0; dim];
            grad_z(&prob, &z1, &lam, &mut g1);
            grad_z(&prob, &z2, &lam, &mut g2);
            let lhs: f64 = (0..dim).map(|i| (g1[i] - g2[i]) * (z1[i] - z2[i])).sum();
            let dist2: f64 = (0..dim).map(|i| (z1[i] - z2[i]).powi(2)).sum();
            assert!(lhs >= prob.alpha * dist2 - 1e-9);

            let l1: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
            let l2: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
            let z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut d1 = vec![0.0; p];
            let mut d2 = vec![0.0; p];
            grad_lambda(&prob, &z, &l1, &mut d1);
            grad_lambda(&prob, &z, &l2, &mut d2);
            let lhs: f64 = (0..p).map(|j| (d1[j] - d2[j]) * (l1[j] - l2[j])).sum();
            let dist2: f64 = (0..p).map(|j| (l1[j] - l2[j]).powi(2)).sum();
            assert!(lhs <= -prob.delta * dist2 + 1e-9);
        }
    }
}
