//! Quantitative guarantees evaluated against measured behaviour: the
//! regularization gap, the Hoffman-based integer/relaxed gap, the end-to-end
//! suboptimality bound, and the dual/primal convergence envelopes. Includes
//! a brute-force oracle for small pure-integer instances.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::problem::{MilpInstance, RelaxedProblem};
use crate::sim::SimTrace;
use crate::sparse::SparseMatrix;

/// Default enumeration cap for the brute-force oracle.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub y_star: Vec<i64>,
    pub cost: f64,
    pub enumerated: u64,
}

/// Exhaustive minimization over the integer grid. Pure-integer only.
/// Parallel over chunks; ties break to the lexicographically smallest point
/// so the result is independent of the chunking.
pub fn brute_force_milp(milp: &MilpInstance) -> Result<OracleResult> {
    if milp.n() > 0 {
        return Err(Error::MixedUnsupported { n: milp.n() });
    }
    let m = milp.m();
    let widths: Vec<u128> = (0..m)
        .map(|j| (milp.y_hi()[j] - milp.y_lo()[j] + 1) as u128)
        .collect();
    let count: u128 = widths.iter().product();
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let total = count as u64;
    if total == 0 {
        return Err(Error::Infeasible);
    }

    let decode = |mut idx: u64| -> Vec<i64> {
        let mut y = vec![0i64; m];
        for j in 0..m {
            let w = widths[j] as u64;
            y[j] = milp.y_lo()[j] + (idx % w) as i64;
            idx /= w;
        }
        y
    };

    let chunk = 8192u64;
    let n_chunks = total.div_ceil(chunk) as usize;
    // Per-chunk best (cost, index); merged by (cost, index) order.
    let bests: Vec<Option<(f64, u64)>> = map_indexed(n_chunks, |ci| {
        let start = ci as u64 * chunk;
        let end = (start + chunk).min(total);
        let mut best: Option<(f64, u64)> = None;
        let mut yf = vec![0.0f64; m];
        for idx in start..end {
            let y = decode(idx);
            for j in 0..m {
                yf[j] = y[j] as f64;
            }
            let feasible =
                (0..milp.p()).all(|i| milp.f_mat().row_dot(i, &yf) <= milp.h()[i] + 1e-12);
            if !feasible {
                continue;
            }
            let cost: f64 = milp.d_cost().iter().zip(&yf).map(|(d, y)| d * y).sum();
            let better = match best {
                None => true,
                Some((bc, bi)) => cost < bc || (cost == bc && idx < bi),
            };
            if better {
                best = Some((cost, idx));
            }
        }
        best
    });

    let mut best: Option<(f64, u64)> = None;
    for b in bests.into_iter().flatten() {
        let better = match best {
            None => true,
            Some((bc, bi)) => b.0 < bc || (b.0 == bc && b.1 < bi),
        };
        if better {
            best = Some(b);
        }
    }
    match best {
        Some((cost, idx)) => Ok(OracleResult {
            y_star: decode(idx),
            cost,
            enumerated: total,
        }),
        None => Err(Error::Infeasible),
    }
}

/// Right-hand side of the regularization-gap guarantee:
/// `||c|| * lambda_radius * sqrt(delta / (2 alpha)) + (alpha / 2) r`.
pub fn regularization_gap_bound(prob: &RelaxedProblem) -> f64 {
    let c_norm = prob.c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c_norm * prob.lambda_radius * (prob.delta / (2.0 * prob.alpha)).sqrt()
        + 0.5 * prob.alpha * prob.r
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoffmanEstimate {
    pub sigma: f64,
    /// Running maximum after each sample; nondecreasing by construction.
    pub series: Vec<f64>,
    pub samples: usize,
}

/// Sampled lower bound on a Hoffman constant for `E x + F y <= h`:
/// max over violating samples of `dist(sample, P) / ||violation||`.
///
/// The distance is bounded from below through the dual of the projection
/// program (projected gradient ascent over `lam >= 0` on
/// `lam'(A u - h) - ||A' lam||^2 / 4`, whose optimum is the squared
/// distance), so the estimate never exceeds the true constant.
pub fn hoffman_estimate(
    e: &SparseMatrix,
    f: &SparseMatrix,
    h: &[f64],
    samples: usize,
    seed: u64,
) -> Result<HoffmanEstimate> {
    let a = SparseMatrix::hcat(e, f)?;
    let dim = a.ncols();
    let p = a.nrows();
    if p == 0 {
        return Err(Error::EmptyPolyhedron);
    }

    // A base feasible point certifies the polyhedron nonempty.
    let base = find_feasible_unbounded(&a, h, 20_000).ok_or(Error::EmptyPolyhedron)?;
    let scale = 1.0 + base.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let norm_a = a.spectral_norm().max(1e-12);
    let step = 1.0 / (0.5 * norm_a * norm_a);

    let ratios: Vec<f64> = map_indexed(samples, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9E3779B97F4A7C15)
                .wrapping_add(s as u64),
        );
        let u: Vec<f64> = (0..dim)
            .map(|i| base[i] + scale * 2.0 * (rng.gen::<f64>() - 0.5) * 3.0)
            .collect();
        let viol: Vec<f64> = (0..p)
            .map(|j| (a.row_dot(j, &u) - h[j]).max(0.0))
            .collect();
        let viol_norm = viol.iter().map(|v| v * v).sum::<f64>().sqrt();
        if viol_norm <= 1e-12 {
            // Feasible samples contribute nothing.
            return 0.0;
        }
        // Maximize d(lam) = lam'(A u - h) - ||A' lam||^2 / 4 over lam >= 0.
        let mut lam = vec![0.0f64; p];
        let mut at_lam = vec![0.0f64; dim];
        let mut best_val = 0.0f64;
        for _ in 0..300 {
            a.t_matvec(&lam, &mut at_lam);
            let val: f64 = (0..p)
                .map(|j| lam[j] * (a.row_dot(j, &u) - h[j]))
                .sum::<f64>()
                - 0.25 * at_lam.iter().map(|v| v * v).sum::<f64>();
            best_val = best_val.max(val);
            for j in 0..p {
                let grad = (a.row_dot(j, &u) - h[j]) - 0.5 * a.row_dot(j, &at_lam);
                lam[j] = (lam[j] + step * grad).max(0.0);
            }
        }
        let dist_lb = best_val.max(0.0).sqrt();
        dist_lb / viol_norm
    });

    let mut series = Vec::with_capacity(samples);
    let mut best = 0.0f64;
    for r in ratios {
        best = best.max(r);
        series.push(best);
    }
    Ok(HoffmanEstimate {
        sigma: best,
        series,
        samples,
    })
}

/// Subgradient search for any point with `A z <= h` (no box).
fn find_feasible_unbounded(a: &SparseMatrix, h: &[f64], iters: usize) -> Option<Vec<f64>> {
    let dim = a.ncols();
    let p = a.nrows();
    let mut z = vec![0.0f64; dim];
    let row_norms = a.row_norms();
    let margin = |z: &[f64]| -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for j in 0..p {
            let m = h[j] - a.row_dot(j, z);
            if m < best {
                best = m;
                arg = j;
            }
        }
        (best, arg)
    };
    let (m0, _) = margin(&z);
    if m0 >= 0.0 {
        return Some(z);
    }
    let mut best = (z.clone(), m0);
    for k in 1..=iters {
        let (m, j) = margin(&z);
        if m > best.1 {
            best = (z.clone(), m);
        }
        if m >= 0.0 {
            return Some(z);
        }
        if row_norms[j] == 0.0 {
            return None;
        }
        let step = (1.0 + m.abs()) / (k as f64).sqrt().min(100.0);
        let (cols, vals) = a.row(j);
        for (c, v) in cols.iter().zip(vals) {
            z[*c] -= step * v / row_norms[j];
        }
    }
    if best.1 >= 0.0 {
        Some(best.0)
    } else {
        None
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuboptimalityBound {
    /// `||c||/2 * (sigma ||F||_inf + 1)`.
    pub integer_gap_term: f64,
    /// `||d||_1 / 2`.
    pub rounding_term: f64,
    /// Regularization-gap right-hand side.
    pub regularization_term: f64,
    pub total: f64,
}

/// End-to-end suboptimality bound, returned with its three addends.
pub fn total_suboptimality_bound(prob: &RelaxedProblem, sigma: f64) -> SuboptimalityBound {
    let c_norm = prob.c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let integer_gap_term = 0.5 * c_norm * (sigma * prob.f_inf_norm + 1.0);
    let rounding_term = 0.5 * prob.d_l1;
    let regularization_term = regularization_gap_bound(prob);
    SuboptimalityBound {
        integer_gap_term,
        rounding_term,
        regularization_term,
        total: integer_gap_term + rounding_term + regularization_term,
    }
}

/// `q_d = (1 - beta delta)^2 + beta^2`.
pub fn q_dual(beta: f64, delta: f64) -> f64 {
    (1.0 - beta * delta).powi(2) + beta * beta
}

/// Dual-distance envelope per epoch `n = 1..=n_epochs`:
/// `q_d^n ||lam0 - lam_hat||^2
///  + (4 r^2 q_d q_p^2 + 8 r^2 beta^2 q_p) ||A||^2 * sum_{i=0..n} q_d^i`.
#[allow(clippy::too_many_arguments)]
pub fn dual_envelope(
    q_d: f64,
    lambda0_dist: f64,
    r: f64,
    norm_a: f64,
    beta: f64,
    q_p: f64,
    n_epochs: usize,
) -> Vec<f64> {
    let head = lambda0_dist * lambda0_dist;
    let floor = (4.0 * r * r * q_d * q_p * q_p + 8.0 * r * r * beta * beta * q_p)
        * norm_a
        * norm_a;
    let mut out = Vec::with_capacity(n_epochs);
    let mut q_pow = 1.0;
    let mut geo = 1.0; // sum_{i=0}^{0}
    for _ in 1..=n_epochs {
        q_pow *= q_d;
        geo += q_pow;
        out.push(q_pow * head + floor * geo);
    }
    out
}

/// Primal-distance envelope per epoch `n = 1..=n_epochs`:
/// `2 q_p^gap r + (||A|| / alpha) sqrt(dual-envelope partial at n - 1)`.
#[allow(clippy::too_many_arguments)]
pub fn primal_envelope(
    q_d: f64,
    lambda0_dist: f64,
    r: f64,
    norm_a: f64,
    alpha: f64,
    beta: f64,
    q_p: f64,
    n_epochs: usize,
    epoch_gap: u32,
) -> Vec<f64> {
    let head = lambda0_dist * lambda0_dist;
    let floor = (4.0 * r * r * q_d * q_p * q_p + 8.0 * r * r * beta * beta * q_p)
        * norm_a
        * norm_a;
    let lead = 2.0 * q_p.powi(epoch_gap as i32) * r;
    let mut out = Vec::with_capacity(n_epochs);
    let mut q_pow = 1.0; // q_d^{n-1} at n = 1
    let mut geo = 1.0; // sum_{i=0}^{n-1} at n = 1
    for n in 1..=n_epochs {
        if n > 1 {
            q_pow *= q_d;
            geo += q_pow;
        }
        out.push(lead + (norm_a / alpha) * (q_pow * head + floor * geo).sqrt());
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpMeasurement {
    /// Worst-case per-epoch contraction, clamped into [0, 1).
    pub q_p_hat: f64,
    /// Unclamped worst ratio (may exceed 1 under heavy staleness).
    pub raw_max: f64,
    pub epochs_measured: usize,
}

/// Measure the per-epoch primal contraction factor: the ratio of distances
/// to the fixed-dual minimizer across consecutive epochs, worst case over
/// epochs. `den[t]` and `num[t]` are the distances at epoch `t` and one
/// epoch later.
pub fn measure_q_p_parts(den: &[f64], num: &[f64]) -> QpMeasurement {
    let mut raw = 0.0f64;
    let mut used = 0usize;
    for (d, n) in den.iter().zip(num) {
        if *d > 1e-12 {
            raw = raw.max(n / d);
            used += 1;
        }
    }
    QpMeasurement {
        q_p_hat: raw.min(1.0 - 1e-9),
        raw_max: raw,
        epochs_measured: used,
    }
}

pub fn measure_q_p(trace: &SimTrace) -> QpMeasurement {
    measure_q_p_parts(&trace.contraction_den, &trace.contraction_num)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub epoch: u64,
    pub kind: String,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub ok: bool,
    pub first_violation: Option<EnvelopeViolation>,
    pub dual_envelope: Vec<f64>,
    pub primal_envelope: Vec<f64>,
}

/// Compare measured distance records against the envelopes (squared dual
/// distance against the dual series, primal distance against the primal
/// series), epoch by epoch starting from the first dual update.
pub fn check_envelopes_parts(
    prob: &RelaxedProblem,
    records: &[crate::sim::EpochRecord],
    lambda0_dist: f64,
    beta: f64,
    q_p: f64,
) -> EnvelopeCheck {
    let q_d = q_dual(beta, prob.delta);
    let n = records.len().saturating_sub(1);
    let dual = dual_envelope(q_d, lambda0_dist, prob.r, prob.norm_a, beta, q_p, n);
    let primal = primal_envelope(
        q_d,
        lambda0_dist,
        prob.r,
        prob.norm_a,
        prob.alpha,
        beta,
        q_p,
        n,
        1,
    );
    let mut first = None;
    for (i, rec) in records.iter().skip(1).enumerate() {
        let d2 = rec.dist_dual * rec.dist_dual;
        if d2 > dual[i] && first.is_none() {
            first = Some(EnvelopeViolation {
                epoch: rec.epoch,
                kind: "dual".into(),
                measured: d2,
                bound: dual[i],
            });
        }
        if rec.dist_primal > primal[i] && first.is_none() {
            first = Some(EnvelopeViolation {
                epoch: rec.epoch,
                kind: "primal".into(),
                measured: rec.dist_primal,
                bound: primal[i],
            });
        }
    }
    EnvelopeCheck {
        ok: first.is_none(),
        first_violation: first,
        dual_envelope: dual,
        primal_envelope: primal,
    }
}

pub fn check_envelopes(prob: &RelaxedProblem, trace: &SimTrace, q_p: f64) -> EnvelopeCheck {
    check_envelopes_parts(prob, &trace.records, trace.lambda0_dist, trace.beta, q_p)
}

/// Where the Hoffman constant in a report came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    Estimated,
    UserSupplied,
}

/// Evaluated bounds next to the measured quantities they dominate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub phi: f64,
    pub phi_bound: f64,
    pub lambda_radius: f64,
    pub reg_gap_bound: f64,
    pub hoffman_sigma: f64,
    pub sigma_source: SigmaSource,
    pub milp_lp_gap_bound: f64,
    pub total_bound: f64,
    pub rounding_term: f64,
    pub q_d: f64,
    pub q_p_hat: f64,
    pub q_p_raw_max: f64,
    pub lambda0_dist: f64,
    pub norm_a: f64,
    pub r: f64,
    pub envelope_dual: Vec<f64>,
    pub envelope_primal: Vec<f64>,
    pub envelope_ok: bool,
    pub first_violation: Option<EnvelopeViolation>,
}

/// Assemble the full report from trace parts.
#[allow(clippy::too_many_arguments)]
pub fn build_bounds_report_parts(
    prob: &RelaxedProblem,
    records: &[crate::sim::EpochRecord],
    contraction_den: &[f64],
    contraction_num: &[f64],
    lambda0_dist: f64,
    beta: f64,
    sigma: f64,
    sigma_source: SigmaSource,
) -> BoundsReport {
    let qp = measure_q_p_parts(contraction_den, contraction_num);
    let envelopes = check_envelopes_parts(prob, records, lambda0_dist, beta, qp.q_p_hat);
    let subopt = total_suboptimality_bound(prob, sigma);
    BoundsReport {
        phi: prob.phi,
        phi_bound: prob.phi_bound,
        lambda_radius: prob.lambda_radius,
        reg_gap_bound: subopt.regularization_term,
        hoffman_sigma: sigma,
        sigma_source,
        milp_lp_gap_bound: subopt.integer_gap_term,
        total_bound: subopt.total,
        rounding_term: subopt.rounding_term,
        q_d: q_dual(beta, prob.delta),
        q_p_hat: qp.q_p_hat,
        q_p_raw_max: qp.raw_max,
        lambda0_dist,
        norm_a: prob.norm_a,
        r: prob.r,
        envelope_dual: envelopes.dual_envelope,
        envelope_primal: envelopes.primal_envelope,
        envelope_ok: envelopes.ok,
        first_violation: envelopes.first_violation,
    }
}

/// Assemble the full report for a problem and one simulated trace.
pub fn build_bounds_report(
    prob: &RelaxedProblem,
    trace: &SimTrace,
    sigma: f64,
    sigma_source: SigmaSource,
) -> BoundsReport {
    build_bounds_report_parts(
        prob,
        &trace.records,
        &trace.contraction_den,
        &trace.contraction_num,
        trace.lambda0_dist,
        trace.beta,
        sigma,
        sigma_source,
    )
}
