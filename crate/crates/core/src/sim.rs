//! Deterministic discrete-event simulation of the block-partitioned
//! asynchronous saddle-point iteration.
//!
//! A global logical tick `k` drives everything. Primal agents own disjoint
//! blocks of `z` and hold a local copy of the full dual vector; dual agents
//! own disjoint blocks of `lambda` and hold a local copy of the full primal
//! vector. Ticks where `k % B == 0` are dual epochs: primal blocks are
//! transmitted to essential dual neighbors (fresh with probability
//! `comm_rate`, otherwise the previously delivered values persist), dual
//! blocks update by projected ascent, and the new dual values are broadcast
//! to every primal agent, becoming visible next tick. Every other tick only
//! primal agents move: each computes with probability `comp_rate`, with a
//! forced computation once it has idled `B - 1` consecutive ticks, so every
//! agent computes at least once in any window of `B` ticks.
//!
//! All reads within a tick see the pre-tick state and commits are
//! simultaneous. With `B = 1`, unit rates, and a single dual block this
//! reproduces the synchronous reference iteration bitwise.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::project_capped_simplex;
use crate::lagrangian::{grad_lambda_coord, grad_z_coord, SaddleProblem};
use crate::partition::derive_essential_neighbors;
use crate::problem::{check_feasibility_milp, round_solution, FeasibilityReport, RelaxedPoint};
use crate::solver::{admissible_beta_bound, SaddleSolution};

/// How the primal iterate is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitPolicy {
    /// Origin projected onto the box (matches the reference solver default).
    ProjectedOrigin,
    BoxCenter,
    UpperCorner,
    LowerCorner,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Delay bound: dual epochs fire every `b` ticks and no primal agent
    /// idles `b` ticks in a row.
    pub b: usize,
    /// Per-tick computation probability for each primal agent, in (0, 1].
    pub comp_rate: f64,
    /// Per-edge probability that an epoch transmission carries fresh values.
    pub comm_rate: f64,
    pub seed: u64,
    pub total_ticks: usize,
    pub gamma: f64,
    pub beta: f64,
    pub init: InitPolicy,
    /// Test hook: store full iterates every this many ticks (0 = never).
    pub record_state_every: usize,
}

impl SimConfig {
    pub fn new(b: usize, total_ticks: usize, gamma: f64, beta: f64, seed: u64) -> Self {
        Self {
            b,
            comp_rate: 1.0,
            comm_rate: 1.0,
            seed,
            total_ticks,
            gamma,
            beta,
            init: InitPolicy::ProjectedOrigin,
            record_state_every: 0,
        }
    }
}

/// One row of the per-epoch trace (the CSV schema, in column order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub tick: u64,
    pub epoch: u64,
    pub dist_primal: f64,
    pub dist_dual: f64,
    pub cost: f64,
    pub rounded_feasible: bool,
    pub msgs_sent: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTrace {
    pub records: Vec<EpochRecord>,
    /// Per epoch `t`: distance of the end-of-epoch iterate to the fixed-dual
    /// minimizer `zhat(lambda(tB))`.
    pub contraction_den: Vec<f64>,
    /// Per epoch `t`: same distance measured one epoch later (aligned with
    /// `contraction_den`; one entry shorter at the tail).
    pub contraction_num: Vec<f64>,
    /// `||lambda(0) - lambda_ref||`.
    pub lambda0_dist: f64,
    pub b: usize,
    pub gamma: f64,
    pub beta: f64,
    pub comp_rate: f64,
    pub comm_rate: f64,
    pub seed: u64,
    pub total_ticks: usize,
    /// Sorted essential edges `(primal, dual)`.
    pub edge_list: Vec<(usize, usize)>,
    /// Max observed age (ticks between a block's computation and its use by
    /// the dual neighbor), aligned with `edge_list`.
    pub edge_max_age: Vec<u64>,
    pub age_histogram: BTreeMap<u64, u64>,
    /// Max ticks between consecutive computations, per primal agent.
    pub max_compute_gap: Vec<u64>,
    /// Max age of the dual copy at a primal computation.
    pub lambda_max_age: u64,
    pub state_snapshots: Vec<StateSnapshot>,
}

impl SimTrace {
    pub fn first_feasible_epoch(&self) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.rounded_feasible)
            .map(|r| r.epoch)
    }

    /// First epoch from which every later recorded rounding stays feasible:
    /// stopping the run at or after this epoch yields a feasible output.
    /// `None` when the final rounding is infeasible.
    pub fn first_stable_feasible_epoch(&self) -> Option<u64> {
        if !self.records.last()?.rounded_feasible {
            return None;
        }
        let mut stable = self.records.last()?.epoch;
        for r in self.records.iter().rev() {
            if r.rounded_feasible {
                stable = r.epoch;
            } else {
                break;
            }
        }
        Some(stable)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimRun {
    pub trace: SimTrace,
    pub final_z: Vec<f64>,
    pub final_lambda: Vec<f64>,
    pub final_point: RelaxedPoint,
    pub rounded: crate::problem::RoundedPoint,
    pub feasibility: FeasibilityReport,
}

/// Staleness summary derived from a completed trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StalenessReport {
    pub per_edge: Vec<EdgeStaleness>,
    pub age_histogram: BTreeMap<u64, u64>,
    pub max_compute_gap: Vec<u64>,
    pub lambda_max_age: u64,
    /// Every compute gap within the delay bound.
    pub within_delay_bound: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeStaleness {
    pub primal: usize,
    pub dual: usize,
    pub max_age: u64,
}

pub fn staleness_report(trace: &SimTrace) -> StalenessReport {
    let per_edge = trace
        .edge_list
        .iter()
        .zip(&trace.edge_max_age)
        .map(|(&(i, q), &max_age)| EdgeStaleness {
            primal: i,
            dual: q,
            max_age,
        })
        .collect();
    StalenessReport {
        per_edge,
        age_histogram: trace.age_histogram.clone(),
        max_compute_gap: trace.max_compute_gap.clone(),
        lambda_max_age: trace.lambda_max_age,
        within_delay_bound: trace
            .max_compute_gap
            .iter()
            .all(|g| *g <= trace.b as u64),
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Stream keyed by role and index but not by the rate, so paired-seed runs
/// at different rates share their underlying randomness.
fn stream(seed: u64, kind: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(
        seed ^ splitmix(kind.wrapping_mul(0x9E37).wrapping_add(a) ^ (b << 32).wrapping_add(b)),
    ))
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn init_z(problem: &SaddleProblem, policy: InitPolicy) -> Vec<f64> {
    let zbox = &problem.relaxed.z_box;
    match policy {
        InitPolicy::ProjectedOrigin => {
            let mut z = vec![0.0; zbox.len()];
            crate::geometry::clamp_in_place(&mut z, zbox.lo(), zbox.hi());
            z
        }
        InitPolicy::BoxCenter => zbox.center(),
        InitPolicy::UpperCorner => zbox.hi().to_vec(),
        InitPolicy::LowerCorner => zbox.lo().to_vec(),
    }
}

/// Simulate the asynchronous iteration against a converged reference.
pub fn run(
    problem: &SaddleProblem,
    config: &SimConfig,
    reference: &SaddleSolution,
) -> Result<SimRun> {
    let prob = &problem.relaxed;
    let part = &problem.partition;
    let dim = prob.dim();
    let p = prob.p();

    if config.b < 1 {
        return Err(Error::Invalid("delay bound b must be >= 1".into()));
    }
    for (name, rate) in [("comp_rate", config.comp_rate), ("comm_rate", config.comm_rate)] {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Invalid(format!("{name} must be in (0, 1], got {rate}")));
        }
    }
    if config.total_ticks < 1 {
        return Err(Error::Invalid("total_ticks must be >= 1".into()));
    }
    if !(config.gamma > 0.0 && config.gamma.is_finite()) {
        return Err(Error::Invalid(format!("gamma must be positive, got {}", config.gamma)));
    }
    let bound = admissible_beta_bound(prob);
    if config.beta.is_nan() || config.beta <= 0.0 || config.beta >= bound {
        return Err(Error::StepSizeViolation {
            beta: config.beta,
            bound,
        });
    }
    const REFERENCE_RESIDUAL: f64 = 1e-9;
    if reference.residual > REFERENCE_RESIDUAL {
        return Err(Error::ReferenceMissing {
            residual: reference.residual,
            required: REFERENCE_RESIDUAL,
        });
    }
    if reference.z_hat.len() != dim || reference.lambda_hat.len() != p {
        return Err(Error::DimensionMismatch {
            what: "reference dimensions".into(),
            expected: dim + p,
            found: reference.z_hat.len() + reference.lambda_hat.len(),
        });
    }

    let adjacency = derive_essential_neighbors(&prob.a_mat, part);
    let n1 = part.n_primal();
    let edges = &adjacency.edges;

    // Agent state.
    let mut z = init_z(problem, config.init);
    let mut z_next = z.clone();
    let mut lam = vec![0.0; p];
    let mut lam_next = lam.clone();
    let mut lam_copy: Vec<Vec<f64>> = vec![lam.clone(); n1];
    let mut z_copy: Vec<Vec<f64>> = vec![z.clone(); part.n_dual()];
    let mut copy_birth: Vec<u64> = vec![0; edges.len()];
    let mut last_compute: Vec<i64> = vec![-1; n1];
    let mut held_lambda_birth: u64 = 0;

    // RNG streams: one per primal agent, one per essential edge.
    let mut comp_rng: Vec<ChaCha8Rng> = (0..n1)
        .map(|i| stream(config.seed, 1, i as u64, 0))
        .collect();
    let mut comm_rng: Vec<ChaCha8Rng> = edges
        .iter()
        .map(|&(i, q)| stream(config.seed, 2, i as u64, q as u64))
        .collect();

    // Bookkeeping.
    let mut msgs_sent: u64 = 0;
    let mut edge_max_age = vec![0u64; edges.len()];
    let mut age_histogram: BTreeMap<u64, u64> = BTreeMap::new();
    let mut max_compute_gap = vec![0u64; n1];
    let mut lambda_max_age = 0u64;
    let mut records = Vec::new();
    let mut contraction_den = Vec::new();
    let mut contraction_num = Vec::new();
    let mut prev_zhat: Option<Vec<f64>> = None;
    let mut state_snapshots = Vec::new();
    let lambda0_dist = norm_diff(&lam, &reference.lambda_hat);

    let mut dual_cand: Vec<f64> = Vec::new();

    for k in 0..config.total_ticks {
        let tick = k as u64;
        let is_epoch = k % config.b == 0;

        if is_epoch {
            // Primal -> dual transmissions of the pre-tick iterate.
            for (e, &(i, q)) in edges.iter().enumerate() {
                let fresh = if config.comm_rate >= 1.0 {
                    true
                } else {
                    comm_rng[e].gen::<f64>() < config.comm_rate
                };
                if fresh {
                    for &l in &part.primal_blocks[i] {
                        z_copy[q][l] = z[l];
                    }
                    copy_birth[e] = last_compute[i].max(0) as u64;
                }
                let age = tick - copy_birth[e];
                edge_max_age[e] = edge_max_age[e].max(age);
                *age_histogram.entry(age).or_insert(0) += 1;
            }
            msgs_sent += edges.len() as u64;

            // Dual updates: each block ascends with its own primal copy and
            // the dual values held since the previous epoch.
            for (q, block) in part.dual_blocks.iter().enumerate() {
                dual_cand.clear();
                for &j in block {
                    let g = grad_lambda_coord(prob, j, &z_copy[q], lam[j]);
                    dual_cand.push(lam[j] + config.beta * g);
                }
                let projected = project_capped_simplex(&dual_cand, prob.lambda_radius);
                for (slot, &j) in block.iter().enumerate() {
                    lam_next[j] = projected[slot];
                }
            }
            msgs_sent += edges.len() as u64;
        }

        // Primal computations read the pre-tick iterate and the dual copy
        // broadcast at the previous epoch.
        for (i, block) in part.primal_blocks.iter().enumerate() {
            let draw = if config.comp_rate >= 1.0 {
                0.0
            } else {
                comp_rng[i].gen::<f64>()
            };
            let forced = tick as i64 - last_compute[i] >= config.b as i64;
            let computes = config.comp_rate >= 1.0 || forced || draw < config.comp_rate;
            if computes {
                let gap = (tick as i64 - last_compute[i]) as u64;
                max_compute_gap[i] = max_compute_gap[i].max(gap);
                lambda_max_age = lambda_max_age.max(tick - held_lambda_birth);
                for &l in block {
                    let g = grad_z_coord(prob, l, z[l], &lam_copy[i]);
                    let cand = z[l] - config.gamma * g;
                    z_next[l] = cand.max(prob.z_box.lo()[l]).min(prob.z_box.hi()[l]);
                }
                last_compute[i] = tick as i64;
            } else {
                for &l in block {
                    z_next[l] = z[l];
                }
            }
        }

        // Simultaneous commit. Dual consistency is a hard invariant: every
        // primal agent must hold identical dual values at all times.
        z.copy_from_slice(&z_next);
        if is_epoch {
            lam.copy_from_slice(&lam_next);
            for copy in lam_copy.iter_mut() {
                copy.copy_from_slice(&lam);
            }
            held_lambda_birth = tick;
            assert!(
                lam_copy.iter().all(|c| c == &lam_copy[0]),
                "dual copies diverged at tick {tick}"
            );
        }

        if is_epoch {
            let epoch = (k / config.b) as u64;
            // Per-epoch primal contraction toward the fixed-dual minimizer.
            let mut zhat = vec![0.0; dim];
            for l in 0..dim {
                let unconstrained = -(prob.c[l] + prob.a_mat.col_dot(l, &lam)) / prob.alpha;
                zhat[l] = unconstrained
                    .max(prob.z_box.lo()[l])
                    .min(prob.z_box.hi()[l]);
            }
            if let Some(prev) = prev_zhat.take() {
                contraction_num.push(norm_diff(&z, &prev));
            }
            contraction_den.push(norm_diff(&z, &zhat));
            prev_zhat = Some(zhat);

            let point = prob.split_z(&z);
            let rounded = round_solution(&point);
            let feas = check_feasibility_milp(&problem.milp, &rounded, 1e-9);
            records.push(EpochRecord {
                tick,
                epoch,
                dist_primal: norm_diff(&z, &reference.z_hat),
                dist_dual: norm_diff(&lam, &reference.lambda_hat),
                cost: prob.cost(&z),
                rounded_feasible: feas.feasible,
                msgs_sent,
            });
        }

        if config.record_state_every > 0 && k % config.record_state_every == 0 {
            state_snapshots.push(StateSnapshot {
                tick,
                z: z.clone(),
                lambda: lam.clone(),
            });
        }
    }

    // The last contraction numerator has no successor epoch; lengths differ
    // by one and the analysis pairs them positionally.
    let final_point = prob.split_z(&z);
    let rounded = round_solution(&final_point);
    let feasibility = check_feasibility_milp(&problem.milp, &rounded, 1e-9);

    Ok(SimRun {
        trace: SimTrace {
            records,
            contraction_den,
            contraction_num,
            lambda0_dist,
            b: config.b,
            gamma: config.gamma,
            beta: config.beta,
            comp_rate: config.comp_rate,
            comm_rate: config.comm_rate,
            seed: config.seed,
            total_ticks: config.total_ticks,
            edge_list: edges.clone(),
            edge_max_age,
            age_histogram,
            max_compute_gap,
            lambda_max_age,
            state_snapshots,
        },
        final_z: z,
        final_lambda: lam,
        final_point,
        rounded,
        feasibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_granular_instance, CorpusConfig};
    use crate::partition::BlockPartition;
    use crate::problem::{build_relaxation_with, RelaxOptions};
    use crate::solver::{solve, stable_steps, SolveSettings};

    fn build_case(index: u64) -> (SaddleProblem, SaddleSolution, f64, f64) {
        let milp = random_granular_instance(&CorpusConfig::default(), index).unwrap();
        let relaxed = build_relaxation_with(&milp, &RelaxOptions::default()).unwrap();
        let (gamma, beta) = stable_steps(&relaxed);
        let mut settings = SolveSettings::new(gamma, beta);
        settings.residual_tol = 1e-10;
        let reference = solve(&relaxed, &settings).unwrap();
        let dim = relaxed.dim();
        let p = relaxed.p();
        let part = BlockPartition::contiguous(dim, dim.min(4), p, p.min(2).max(1)).unwrap();
        let problem = SaddleProblem::new(milp, relaxed, part).unwrap();
        (problem, reference, gamma, beta)
    }

    /// Degenerate synchrony with a single dual block reproduces the
    /// synchronous solver bitwise, tick by tick.
    #[test]
    fn degenerate_synchrony_matches_solver() {
        let milp = random_granular_instance(&CorpusConfig::default(), 30).unwrap();
        let relaxed = build_relaxation_with(&milp, &RelaxOptions::default()).unwrap();
        let (gamma, beta) = stable_steps(&relaxed);
        let dim = relaxed.dim();
        let p = relaxed.p();

        let mut settings = SolveSettings::new(gamma, beta);
        settings.max_iters = 400;
        settings.snapshot_every = 1;
        let solver_run = match solve(&relaxed, &settings) {
            Ok(sol) => sol,
            Err(crate::error::Error::NotConverged { last, .. }) => *last,
            Err(e) => panic!("{e}"),
        };

        let mut ref_settings = SolveSettings::new(gamma, beta);
        ref_settings.residual_tol = 1e-10;
        let reference = solve(&relaxed, &ref_settings).unwrap();

        let part = BlockPartition::contiguous(dim, dim, p, 1).unwrap();
        let problem = SaddleProblem::new(milp, relaxed, part).unwrap();
        let mut config = SimConfig::new(1, 400, gamma, beta, 7);
        config.record_state_every = 1;
        let sim = run(&problem, &config, &reference).unwrap();

        // Solver snapshot at iter k is the state entering iteration k; the
        // sim snapshot at tick k is the state after committing tick k, i.e.
        // the solver's state entering iteration k + 1.
        for snap in &sim.trace.state_snapshots {
            let k = snap.tick as usize;
            if k + 1 < solver_run.snapshots.len() {
                let sref = &solver_run.snapshots[k + 1];
                assert_eq!(snap.z, sref.z, "z diverged at tick {k}");
                assert_eq!(snap.lambda, sref.lambda, "lambda diverged at tick {k}");
            }
        }
    }

    #[test]
    fn same_seed_identical_traces() {
        let (problem, reference, gamma, beta) = build_case(31);
        let mut config = SimConfig::new(4, 500, gamma, beta, 99);
        config.comp_rate = 0.6;
        config.comm_rate = 0.7;
        let a = run(&problem, &config, &reference).unwrap();
        let b = run(&problem, &config, &reference).unwrap();
        assert_eq!(a.trace.records, b.trace.records);
        assert_eq!(a.final_z, b.final_z);
    }

    #[test]
    fn forced_compute_respects_delay_bound() {
        let (problem, reference, gamma, beta) = build_case(32);
        for (b, rate) in [(8usize, 0.5f64), (8, 0.1), (3, 0.25)] {
            let mut config = SimConfig::new(b, 600, gamma, beta, 5);
            config.comp_rate = rate;
            let out = run(&problem, &config, &reference).unwrap();
            let report = staleness_report(&out.trace);
            assert!(report.within_delay_bound, "B={b} rate={rate}");
            assert!(report.max_compute_gap.iter().all(|g| *g <= b as u64));
        }
    }

    #[test]
    fn synchronous_staleness_at_most_one() {
        let (problem, reference, gamma, beta) = build_case(33);
        let config = SimConfig::new(1, 200, gamma, beta, 1);
        let out = run(&problem, &config, &reference).unwrap();
        let report = staleness_report(&out.trace);
        assert!(report.per_edge.iter().all(|e| e.max_age <= 1));
        assert!(report.lambda_max_age <= 1);
    }

    #[test]
    fn stale_comm_has_heavier_ages() {
        let (problem, reference, gamma, beta) = build_case(34);
        let mut config = SimConfig::new(5, 2000, gamma, beta, 11);
        config.comm_rate = 0.5;
        let out = run(&problem, &config, &reference).unwrap();
        let report = staleness_report(&out.trace);
        // Some delivery was stale: ages beyond one epoch observed, with a
        // tail cut at the observed maximum.
        let max_age = report.per_edge.iter().map(|e| e.max_age).max().unwrap();
        assert!(max_age > 5, "expected stale ages, got max {max_age}");
        assert!(report.age_histogram.keys().all(|a| *a <= max_age));
    }

    #[test]
    fn iterates_stay_in_domain() {
        let (problem, reference, gamma, beta) = build_case(35);
        let mut config = SimConfig::new(3, 300, gamma, beta, 2);
        config.comp_rate = 0.5;
        config.comm_rate = 0.5;
        config.record_state_every = 1;
        let out = run(&problem, &config, &reference).unwrap();
        let prob = &problem.relaxed;
        for snap in &out.trace.state_snapshots {
            assert!(prob.z_box.contains(&snap.z, 0.0));
            assert!(snap.lambda.iter().all(|v| *v >= 0.0));
            for block in &problem.partition.dual_blocks {
                let s: f64 = block.iter().map(|j| snap.lambda[*j]).sum();
                assert!(s <= prob.lambda_radius + 1e-12);
            }
        }
    }

    #[test]
    fn converges_toward_reference() {
        let (problem, reference, gamma, beta) = build_case(36);
        let config = SimConfig::new(2, 60_000, gamma, beta, 3);
        let out = run(&problem, &config, &reference).unwrap();
        let last = out.trace.records.last().unwrap();
        assert!(
            last.dist_primal <= 1e-3,
            "final primal distance {}",
            last.dist_primal
        );
    }

    #[test]
    fn step_size_violation_rejected() {
        let (problem, reference, gamma, _) = build_case(37);
        let bound = admissible_beta_bound(&problem.relaxed);
        let config = SimConfig::new(2, 100, gamma, bound * 1.1, 3);
        assert!(matches!(
            run(&problem, &config, &reference),
            Err(Error::StepSizeViolation { .. })
        ));
    }

    #[test]
    fn poor_reference_rejected() {
        let (problem, mut reference, gamma, beta) = build_case(38);
        reference.residual = 1e-3;
        let config = SimConfig::new(2, 100, gamma, beta, 3);
        assert!(matches!(
            run(&problem, &config, &reference),
            Err(Error::ReferenceMissing { .. })
        ));
    }
}
