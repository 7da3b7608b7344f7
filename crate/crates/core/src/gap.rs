//! Generalized assignment benchmark: each of `p` agents takes at most one of
//! `q` tasks, and per-task resource consumption is capped. Pure-integer
//! binary instances with one assignment row per agent and one capacity row
//! per task.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::SaddleProblem;
use crate::partition::BlockPartition;
use crate::problem::{
    build_relaxation_with, xi_ladder, MilpInstance, PhiPolicy, RelaxOptions, RelaxedProblem,
};
use crate::sim::{run, InitPolicy, SimConfig, SimRun};
use crate::solver::{solve, stable_steps, SolveSettings};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapSpec {
    /// Agents (assignment rows).
    pub agents: usize,
    /// Tasks (capacity rows).
    pub tasks: usize,
    pub seed: u64,
    /// Integer weight range (inclusive).
    pub weight_range: (i64, i64),
    /// Per-task capacities; `round(capacity_factor * agents * mean_weight)`
    /// when absent.
    pub t_max: Option<Vec<f64>>,
    /// Fraction of the expected full-load consumption each capacity allows.
    /// The default makes capacities binding, so settling into feasibility
    /// depends on timely dual feedback rather than blanket suppression.
    pub capacity_factor: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
}

impl GapSpec {
    pub fn new(agents: usize, tasks: usize, seed: u64) -> Self {
        Self {
            agents,
            tasks,
            seed,
            weight_range: (1, 10),
            t_max: None,
            capacity_factor: 0.25,
            cost_mean: 0.0,
            cost_std: 1.0,
        }
    }
}

/// Build the pure-integer instance: variable `y_{ij}` (agent `i`, task `j`)
/// lives at column `i * tasks + j`; rows are the `agents` assignment rows
/// followed by the `tasks` capacity rows.
pub fn generate(spec: &GapSpec) -> Result<MilpInstance> {
    if spec.agents < 1 || spec.tasks < 1 {
        return Err(Error::Invalid("need agents >= 1 and tasks >= 1".into()));
    }
    let (w_lo, w_hi) = spec.weight_range;
    if w_lo < 1 || w_hi < w_lo {
        return Err(Error::Invalid(format!(
            "weight range must satisfy 1 <= lo <= hi, got ({w_lo}, {w_hi})"
        )));
    }
    let p = spec.agents;
    let q = spec.tasks;
    let m = p * q;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let weights: Vec<Vec<i64>> = (0..p)
        .map(|_| (0..q).map(|_| rng.gen_range(w_lo..=w_hi)).collect())
        .collect();

    let t_max = match &spec.t_max {
        Some(t) => {
            if t.len() != q {
                return Err(Error::DimensionMismatch {
                    what: "t_max".into(),
                    expected: q,
                    found: t.len(),
                });
            }
            t.clone()
        }
        None => {
            let mean = 0.5 * (w_lo + w_hi) as f64;
            vec![(spec.capacity_factor * p as f64 * mean).round(); q]
        }
    };

    let mut f_ent = Vec::with_capacity(m * 2);
    for i in 0..p {
        for j in 0..q {
            // Assignment row i: sum_j y_ij <= 1.
            f_ent.push((i, i * q + j, 1.0));
            // Capacity row p + j: sum_i w_ij y_ij <= T_j.
            f_ent.push((p + j, i * q + j, weights[i][j] as f64));
        }
    }
    let f = SparseMatrix::from_triplets(p + q, m, &f_ent)?;

    let mut h = vec![1.0; p];
    h.extend_from_slice(&t_max);

    let gauss = |rng: &mut ChaCha8Rng| -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let d: Vec<f64> = (0..m)
        .map(|_| spec.cost_mean + spec.cost_std * gauss(&mut rng))
        .collect();

    MilpInstance::new(
        vec![],
        d,
        SparseMatrix::zeros(p + q, 0),
        f,
        h,
        vec![0; m],
        vec![1; m],
        vec![],
        vec![],
    )
}

/// Shared pipeline settings for a family of simulated runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentBase {
    /// Enlargement parameter; auto-selected from the ladder when absent.
    pub xi: Option<f64>,
    pub alpha: f64,
    pub delta: f64,
    pub b: usize,
    pub total_ticks: usize,
    pub seed: u64,
    /// Primal agent count; one agent per task-sized variable group when
    /// absent.
    pub n_primal: Option<usize>,
    /// Dual agent count; `round(0.7 * agents)` when absent.
    pub n_dual: Option<usize>,
    pub ref_tol: f64,
    pub ref_max_iters: usize,
    pub init: InitPolicy,
    /// Multiplies the conservative dual step. The default sits near the top
    /// of the empirically convergent band, where stale information visibly
    /// delays settling; the step is still validated against the admissible
    /// bound at run time.
    pub beta_scale: f64,
}

impl Default for ExperimentBase {
    fn default() -> Self {
        Self {
            xi: None,
            alpha: 1.0,
            delta: 0.02,
            b: 10,
            total_ticks: 100_000,
            seed: 1,
            n_primal: None,
            n_dual: None,
            ref_tol: 1e-9,
            ref_max_iters: 5_000_000,
            init: InitPolicy::LowerCorner,
            beta_scale: 10.0,
        }
    }
}

/// One simulated configuration in a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentVariant {
    pub label: String,
    pub comm_rate: f64,
    pub comp_rate: f64,
    /// Fixed tightening amount for this variant's relaxation.
    pub phi_inflation: f64,
}

impl ExperimentVariant {
    pub fn comm(rate: f64) -> Self {
        Self {
            label: format!("comm-{rate}"),
            comm_rate: rate,
            comp_rate: 1.0,
            phi_inflation: 0.0,
        }
    }

    pub fn comp(rate: f64) -> Self {
        Self {
            label: format!("comp-{rate}"),
            comm_rate: 1.0,
            comp_rate: rate,
            phi_inflation: 0.0,
        }
    }

    pub fn phi(v: f64) -> Self {
        Self {
            label: format!("phi-{v}"),
            comm_rate: 0.5,
            comp_rate: 1.0,
            phi_inflation: v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub label: String,
    pub comm_rate: f64,
    pub comp_rate: f64,
    pub phi: f64,
    pub xi: f64,
    pub first_feasible_epoch: Option<u64>,
    /// First epoch from which the rounded output stays feasible.
    pub first_stable_feasible_epoch: Option<u64>,
    pub final_dist_primal: f64,
    pub final_dist_dual: f64,
    pub final_cost_relaxed: f64,
    pub final_cost_rounded: f64,
    pub rounded_feasible: bool,
    pub msgs_sent: u64,
}

pub struct ExperimentOutcome {
    pub row: ExperimentRow,
    pub run: SimRun,
    pub problem: SaddleProblem,
}

/// Pick the smallest ladder parameter at which the tightened relaxation
/// builds; assignment rows force values near one for realistic task counts.
pub fn select_xi(milp: &MilpInstance, alpha: f64, delta: f64, phi: PhiPolicy) -> Result<RelaxedProblem> {
    let gran = crate::problem::granularity(milp);
    let mut last_err = None;
    let default = crate::problem::default_xi(gran.xi_e);
    let mut candidates = vec![default];
    candidates.extend(xi_ladder(gran.xi_e));
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();
    // Larger systems get a proportionally larger search budget.
    let slater = crate::slater::SlaterOptions {
        max_iters: 10_000.max(5 * (milp.n() + milp.m())),
        ..Default::default()
    };
    for xi in candidates {
        match build_relaxation_with(
            milp,
            &RelaxOptions {
                xi: Some(xi),
                alpha,
                delta,
                phi,
                slater: slater.clone(),
            },
        ) {
            Ok(prob) => return Ok(prob),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::Infeasible))
}

/// Run the full pipeline (relax, tighten, reference solve, simulate, round,
/// certify) for each variant. Variants sharing a tightening amount share
/// the relaxation and the reference solve.
pub fn run_experiment(
    milp: &MilpInstance,
    base: &ExperimentBase,
    variants: &[ExperimentVariant],
) -> Result<Vec<ExperimentOutcome>> {
    let mut outcomes = Vec::with_capacity(variants.len());
    let mut cache: Vec<(f64, SaddleProblem, crate::solver::SaddleSolution, f64, f64)> = Vec::new();

    for variant in variants {
        let cached = cache
            .iter()
            .position(|(phi, ..)| *phi == variant.phi_inflation);
        let idx = match cached {
            Some(i) => i,
            None => {
                let relaxed = match base.xi {
                    Some(xi) => build_relaxation_with(
                        milp,
                        &RelaxOptions {
                            xi: Some(xi),
                            alpha: base.alpha,
                            delta: base.delta,
                            phi: PhiPolicy::Fixed(variant.phi_inflation),
                            ..RelaxOptions::default()
                        },
                    )?,
                    None => select_xi(
                        milp,
                        base.alpha,
                        base.delta,
                        PhiPolicy::Fixed(variant.phi_inflation),
                    )?,
                };
                let (gamma, beta_ref) = stable_steps(&relaxed);
                // The reference solve keeps the conservative step; the
                // simulated runs scale it toward the admissible bound.
                let mut settings = SolveSettings::new(gamma, beta_ref);
                settings.residual_tol = base.ref_tol;
                settings.max_iters = base.ref_max_iters;
                let reference = solve(&relaxed, &settings)?;
                let beta = beta_ref * base.beta_scale;
                let n1 = base.n_primal.unwrap_or_else(|| {
                    // One primal agent per task-sized variable group.
                    let dim = relaxed.dim();
                    let group = (dim as f64).sqrt().round() as usize;
                    (dim / group.max(1)).max(1)
                });
                let n2 = base
                    .n_dual
                    .unwrap_or_else(|| ((relaxed.p() as f64 * 0.35).round() as usize).max(1));
                let part = BlockPartition::contiguous(relaxed.dim(), n1, relaxed.p(), n2)?;
                let problem = SaddleProblem::new(milp.clone(), relaxed, part)?;
                cache.push((variant.phi_inflation, problem, reference, gamma, beta));
                cache.len() - 1
            }
        };
        let (_, problem, reference, gamma, beta) = &cache[idx];

        let mut config = SimConfig::new(base.b, base.total_ticks, *gamma, *beta, base.seed);
        config.comp_rate = variant.comp_rate;
        config.comm_rate = variant.comm_rate;
        config.init = base.init;
        let sim = run(problem, &config, reference)?;
        let last = sim
            .trace
            .records
            .last()
            .ok_or_else(|| Error::Invalid("empty trace".into()))?;
        let row = ExperimentRow {
            label: variant.label.clone(),
            comm_rate: variant.comm_rate,
            comp_rate: variant.comp_rate,
            phi: problem.relaxed.phi,
            xi: problem.relaxed.xi,
            first_feasible_epoch: sim.trace.first_feasible_epoch(),
            first_stable_feasible_epoch: sim.trace.first_stable_feasible_epoch(),
            final_dist_primal: last.dist_primal,
            final_dist_dual: last.dist_dual,
            final_cost_relaxed: problem.relaxed.cost(&sim.final_z),
            final_cost_rounded: problem.milp.cost_rounded(&sim.rounded),
            rounded_feasible: sim.feasibility.feasible,
            msgs_sent: last.msgs_sent,
        };
        outcomes.push(ExperimentOutcome {
            row,
            run: sim,
            problem: problem.clone(),
        });
    }
    Ok(outcomes)
}

/// Paper-shaped partition sizes for a GAP instance: one primal agent per
/// agent's task group, `round(0.7 * agents)` dual agents.
pub fn gap_partition(spec: &GapSpec) -> (usize, usize) {
    let n1 = spec.agents;
    let n2 = ((spec.agents as f64 * 0.7).round() as usize).clamp(1, spec.agents + spec.tasks);
    (n1, n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::brute_force_milp;
    use crate::problem::{certify_granularity, granularity};

    #[test]
    fn smallest_instance_structure() {
        let spec = GapSpec {
            t_max: Some(vec![1.0]),
            weight_range: (1, 1),
            ..GapSpec::new(1, 1, 4)
        };
        let milp = generate(&spec).unwrap();
        assert_eq!(milp.n(), 0);
        assert_eq!(milp.m(), 1);
        assert_eq!(milp.p(), 2);
        assert_eq!(milp.h(), &[1.0, 1.0]);
        assert_eq!(milp.y_lo(), &[0]);
        assert_eq!(milp.y_hi(), &[1]);
    }

    #[test]
    fn row_structure_counts() {
        let spec = GapSpec::new(4, 6, 9);
        let milp = generate(&spec).unwrap();
        // Assignment rows: exactly `tasks` ones each.
        for i in 0..4 {
            let (cols, vals) = milp.f_mat().row(i);
            assert_eq!(cols.len(), 6);
            assert!(vals.iter().all(|v| *v == 1.0));
        }
        // Capacity rows: exactly `agents` nonzeros each.
        for j in 0..6 {
            let (cols, vals) = milp.f_mat().row(4 + j);
            assert_eq!(cols.len(), 4);
            assert!(vals.iter().all(|v| *v >= 1.0 && *v <= 10.0));
        }
    }

    #[test]
    fn unit_rows_give_unit_omega_and_zero_xi_e() {
        let spec = GapSpec {
            weight_range: (1, 1),
            ..GapSpec::new(3, 3, 2)
        };
        let milp = generate(&spec).unwrap();
        let gran = granularity(&milp);
        assert!(gran.omega.iter().all(|w| *w == 1));
        assert_eq!(gran.xi_e, 0.0);
    }

    #[test]
    fn three_by_three_certifies_granular() {
        let milp = generate(&GapSpec::new(3, 3, 7)).unwrap();
        let cert = certify_granularity(&milp);
        assert!(cert.granular_by_slater);
        assert_eq!(granularity(&milp).xi_e, 0.0);
    }

    #[test]
    fn small_instances_oracle_solvable() {
        for (p, q) in [(2, 2), (3, 3), (4, 4)] {
            let milp = generate(&GapSpec::new(p, q, 11)).unwrap();
            let res = brute_force_milp(&milp).unwrap();
            // All-zero assignment is always feasible, so the optimum is <= 0.
            assert!(res.cost <= 1e-12);
        }
    }

    #[test]
    fn partition_shape_matches_paper_ratio() {
        assert_eq!(gap_partition(&GapSpec::new(20, 20, 0)), (20, 14));
        assert_eq!(gap_partition(&GapSpec::new(100, 100, 0)), (100, 70));
    }

    #[test]
    fn xi_selection_scales_with_tasks() {
        // Assignment rows need xi >= (q - 1)/(q + 1); the ladder must land
        // above that threshold.
        let milp = generate(&GapSpec::new(6, 6, 13)).unwrap();
        let prob = select_xi(&milp, 1.0, 0.02, PhiPolicy::Fixed(0.0)).unwrap();
        assert!(prob.xi > 5.0 / 7.0, "xi = {}", prob.xi);
    }
}
