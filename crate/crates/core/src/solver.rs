//! Synchronous reference saddle-point solver: simultaneous projected
//! gradient descent in `z` and ascent in `lambda` until the projected
//! fixed-point residual meets tolerance. Ground truth for the asynchronous
//! simulator and the bound checks.

use crate::error::{Error, Result};
use crate::geometry::{clamp_in_place, project_capped_simplex};
use crate::lagrangian::{grad_lambda, grad_z};
use crate::problem::RelaxedProblem;

#[derive(Debug, Clone)]
pub struct SolveSettings {
    pub gamma: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    /// Start iterate; origin projected onto the box when absent.
    pub z0: Option<Vec<f64>>,
    /// Start multipliers; zeros when absent.
    pub lambda0: Option<Vec<f64>>,
    /// Multiplies the dual projection cap. Values above 1 let tests check
    /// that the converged multiplier respects the nominal cap on its own.
    pub lambda_cap_scale: f64,
    /// Record the iterate every this many iterations (0 = never).
    pub snapshot_every: usize,
}

impl SolveSettings {
    pub fn new(gamma: f64, beta: f64) -> Self {
        Self {
            gamma,
            beta,
            max_iters: 2_000_000,
            residual_tol: 1e-9,
            z0: None,
            lambda0: None,
            lambda_cap_scale: 1.0,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveSnapshot {
    pub iter: usize,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub z_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    /// `||z - P_Z(z - gamma grad_z)|| + ||lam - P_L(lam + beta grad_lam)||`
    /// at exit.
    pub residual: f64,
    pub iters: usize,
    pub snapshots: Vec<SolveSnapshot>,
}

/// Admissible dual step bound: `min(2a/(||A|| + 2ad), 2d/(1 + d^2))`.
pub fn admissible_beta_bound(prob: &RelaxedProblem) -> f64 {
    let a = prob.alpha;
    let d = prob.delta;
    let term1 = 2.0 * a / (prob.norm_a + 2.0 * a * d);
    let term2 = 2.0 * d / (1.0 + d * d);
    term1.min(term2)
}

/// Documented default steps: `beta = 0.9 * admissible_beta_bound`,
/// `gamma = 1 / (alpha + ||A|| * scale)` with scale 1.
pub fn default_steps(prob: &RelaxedProblem) -> (f64, f64) {
    default_steps_scaled(prob, 1.0)
}

pub fn default_steps_scaled(prob: &RelaxedProblem, scale: f64) -> (f64, f64) {
    let beta = 0.9 * admissible_beta_bound(prob);
    let gamma = 1.0 / (prob.alpha + prob.norm_a * scale);
    (gamma, beta)
}

/// Steps that are additionally stable for the simultaneous update: capping
/// `beta` at `0.9 * alpha / (||A||^2 + alpha delta)` keeps the coupled
/// linearized map contracting for every `gamma <= 1/(alpha + ||A||)` (the
/// 2x2 mode at singular value `s` has modulus
/// `(1 - gamma alpha)(1 - beta delta) + gamma beta s^2 < 1`).
pub fn stable_steps(prob: &RelaxedProblem) -> (f64, f64) {
    let coupling_cap = prob.alpha / (prob.norm_a * prob.norm_a + prob.alpha * prob.delta);
    let beta = 0.9 * admissible_beta_bound(prob).min(coupling_cap);
    let gamma = 1.0 / (prob.alpha + prob.norm_a);
    (gamma, beta)
}

pub fn validate_settings(prob: &RelaxedProblem, s: &SolveSettings) -> Result<()> {
    if !(s.gamma > 0.0 && s.gamma.is_finite()) {
        return Err(Error::Invalid(format!("gamma must be positive, got {}", s.gamma)));
    }
    if !(s.beta > 0.0 && s.beta.is_finite()) {
        return Err(Error::Invalid(format!("beta must be positive, got {}", s.beta)));
    }
    let bound = admissible_beta_bound(prob);
    if s.beta >= bound {
        return Err(Error::StepSizeViolation {
            beta: s.beta,
            bound,
        });
    }
    if s.residual_tol.is_nan() || s.residual_tol <= 0.0 {
        return Err(Error::Invalid("residual_tol must be positive".into()));
    }
    Ok(())
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Run the simultaneous projected iteration to the residual tolerance.
/// Deterministic: identical inputs give bitwise-identical outputs.
pub fn solve(prob: &RelaxedProblem, settings: &SolveSettings) -> Result<SaddleSolution> {
    validate_settings(prob, settings)?;
    let dim = prob.dim();
    let p = prob.p();
    let cap = prob.lambda_radius * settings.lambda_cap_scale;

    let mut z = match &settings.z0 {
        Some(z0) => {
            if z0.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "z0".into(),
                    expected: dim,
                    found: z0.len(),
                });
            }
            let mut z = z0.clone();
            clamp_in_place(&mut z, prob.z_box.lo(), prob.z_box.hi());
            z
        }
        None => {
            let mut z = vec![0.0; dim];
            clamp_in_place(&mut z, prob.z_box.lo(), prob.z_box.hi());
            z
        }
    };
    let mut lam = match &settings.lambda0 {
        Some(l0) => {
            if l0.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "lambda0".into(),
                    expected: p,
                    found: l0.len(),
                });
            }
            project_capped_simplex(l0, cap)
        }
        None => vec![0.0; p],
    };

    let mut gz = vec![0.0; dim];
    let mut gl = vec![0.0; p];
    let mut z_new = vec![0.0; dim];
    let mut lam_buf = vec![0.0; p];
    let mut snapshots = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iters = 0;

    for k in 0..settings.max_iters {
        grad_z(prob, &z, &lam, &mut gz);
        grad_lambda(prob, &z, &lam, &mut gl);
        for l in 0..dim {
            z_new[l] = z[l] - settings.gamma * gz[l];
        }
        clamp_in_place(&mut z_new, prob.z_box.lo(), prob.z_box.hi());
        for j in 0..p {
            lam_buf[j] = lam[j] + settings.beta * gl[j];
        }
        let lam_new = project_capped_simplex(&lam_buf, cap);

        residual = norm_diff(&z_new, &z) + norm_diff(&lam_new, &lam);
        if settings.snapshot_every > 0 && k % settings.snapshot_every == 0 {
            snapshots.push(SolveSnapshot {
                iter: k,
                z: z.clone(),
                lambda: lam.clone(),
                residual,
            });
        }
        z.copy_from_slice(&z_new);
        lam = lam_new;
        iters = k + 1;
        if residual <= settings.residual_tol {
            return Ok(SaddleSolution {
                z_hat: z,
                lambda_hat: lam,
                residual,
                iters,
                snapshots,
            });
        }
    }

    Err(Error::NotConverged {
        residual,
        iters,
        last: Box::new(SaddleSolution {
            z_hat: z,
            lambda_hat: lam,
            residual,
            iters,
            snapshots,
        }),
    })
}
