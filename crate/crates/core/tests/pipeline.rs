//! Integration of the full library pipeline: relax, solve, simulate, round,
//! certify, and the saddle-point characterization of the solve output.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use granular_milp::corpus::{random_granular_instance, CorpusConfig};
use granular_milp::gap::{generate, run_experiment, ExperimentBase, ExperimentVariant, GapSpec};
use granular_milp::lagrangian::{eval_l, PrimalDualPoint};
use granular_milp::problem::{
    build_relaxation_with, check_feasibility_milp, round_solution, RelaxOptions,
};
use granular_milp::solver::{solve, stable_steps, SolveSettings};

/// The solve output satisfies the two-sided saddle inequalities against
/// random feasible probes.
#[test]
fn saddle_inequalities_hold_against_probes() {
    let milp = random_granular_instance(&CorpusConfig::default(), 50).unwrap();
    let prob = build_relaxation_with(&milp, &RelaxOptions::default()).unwrap();
    let (gamma, beta) = stable_steps(&prob);
    let mut settings = SolveSettings::new(gamma, beta);
    settings.residual_tol = 1e-11;
    let sol = solve(&prob, &settings).unwrap();
    let saddle = PrimalDualPoint {
        z: sol.z_hat.clone(),
        lambda: sol.lambda_hat.clone(),
    };
    assert!(saddle.in_domain(&prob, 1e-12));
    let l_star = eval_l(&prob, &sol.z_hat, &sol.lambda_hat);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dim = prob.dim();
    let p = prob.p();
    for _ in 0..1000 {
        let z: Vec<f64> = (0..dim)
            .map(|l| rng.gen_range(prob.z_box.lo()[l]..=prob.z_box.hi()[l]))
            .collect();
        // Random multipliers in the capped simplex.
        let raw: Vec<f64> = (0..p)
            .map(|_| rng.gen_range(0.0..prob.lambda_radius.max(1e-9)))
            .collect();
        let lam = granular_milp::project_capped_simplex(&raw, prob.lambda_radius);

        // L(z_hat, lam) <= L(z_hat, lam_hat) <= L(z, lam_hat).
        assert!(
            eval_l(&prob, &sol.z_hat, &lam) <= l_star + 1e-7,
            "dual probe beats the saddle"
        );
        assert!(
            eval_l(&prob, &z, &sol.lambda_hat) >= l_star - 1e-7,
            "primal probe beats the saddle"
        );
    }
}

/// Relax + solve + round is feasible for the original instance across a
/// small mixed corpus (the larger sweep lives in the acceptance suite).
#[test]
fn pipeline_rounding_feasible_on_corpus() {
    let cfg = CorpusConfig::default();
    for i in 60..75 {
        let milp = random_granular_instance(&cfg, i).unwrap();
        let prob = build_relaxation_with(&milp, &RelaxOptions::default()).unwrap();
        let (gamma, beta) = stable_steps(&prob);
        let sol = solve(&prob, &SolveSettings::new(gamma, beta)).unwrap();
        let rounded = round_solution(&prob.split_z(&sol.z_hat));
        let rep = check_feasibility_milp(&milp, &rounded, 1e-9);
        assert!(rep.feasible, "instance {i} rounded infeasible: {rep:?}");
    }
}

/// Paired-seed staleness comparison: with the dual step near the ringing
/// edge and epochs every other tick, the fully communicating run reaches
/// the 1e-3 ball strictly sooner than the rate-0.1 run.
#[test]
fn stale_communication_needs_more_ticks_to_converge() {
    let milp = generate(&GapSpec::new(20, 20, 2)).unwrap();
    for seed in [1u64, 2, 3] {
        let base = ExperimentBase {
            seed,
            b: 2,
            beta_scale: 12.0,
            n_primal: Some(20),
            n_dual: Some(14),
            total_ticks: 40_000,
            ..ExperimentBase::default()
        };
        let variants = vec![ExperimentVariant::comm(1.0), ExperimentVariant::comm(0.1)];
        let outcomes = run_experiment(&milp, &base, &variants).unwrap();
        let ticks_to = |i: usize| {
            outcomes[i]
                .run
                .trace
                .records
                .iter()
                .find(|r| r.dist_primal <= 1e-3)
                .map(|r| r.tick)
                .expect("run reached 1e-3")
        };
        let (full, stale) = (ticks_to(0), ticks_to(1));
        assert!(
            full < stale,
            "seed {seed}: full-rate {full} ticks vs stale {stale}"
        );
    }
}

/// Every point sampled from the relaxed region rounds into the feasible
/// set of the original instance: 500 samples on each of 20 instances.
#[test]
fn sampled_points_round_feasible() {
    use granular_milp::problem::{granularity, sample_m_xi};
    let cfg = CorpusConfig::default();
    let mut total = 0usize;
    for i in 300..320u64 {
        let milp = random_granular_instance(&cfg, i).unwrap();
        let gran = granularity(&milp);
        let xi = granular_milp::problem::default_xi(gran.xi_e);
        let pts = sample_m_xi(&milp, &gran, xi, 500, 2_000_000, i);
        assert!(
            pts.len() >= 500,
            "instance {i}: only {} samples accepted",
            pts.len()
        );
        for pt in &pts {
            let rep = check_feasibility_milp(&milp, &round_solution(pt), 1e-9);
            assert!(rep.feasible, "instance {i}: sampled point rounded infeasible");
        }
        total += pts.len();
    }
    assert!(total >= 10_000);
}

/// Containment is monotone in the enlargement parameter: 1000 random
/// (point, xi1 <= xi2) triples per instance across ten instances.
#[test]
fn containment_monotone_across_corpus() {
    use granular_milp::problem::{granularity, in_m_xi};
    let cfg = CorpusConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 330..340u64 {
        let milp = random_granular_instance(&cfg, i).unwrap();
        let gran = granularity(&milp);
        let n = milp.n();
        let m = milp.m();
        for _ in 0..1000 {
            let xi1 = rng.gen_range(gran.xi_e..1.0);
            let xi2 = rng.gen_range(xi1..1.0);
            let x: Vec<f64> = (0..n)
                .map(|k| rng.gen_range(milp.x_lo()[k] - 0.5..milp.x_hi()[k] + 0.5))
                .collect();
            let y: Vec<f64> = (0..m)
                .map(|k| {
                    rng.gen_range(milp.y_lo()[k] as f64 - 1.0..milp.y_hi()[k] as f64 + 1.0)
                })
                .collect();
            if in_m_xi(&milp, &gran, xi1, &x, &y, 0.0) {
                assert!(
                    in_m_xi(&milp, &gran, xi2, &x, &y, 1e-12),
                    "instance {i}: containment broken for xi1 {xi1} xi2 {xi2}"
                );
            }
        }
    }
}

/// Experiment rows carry the settled-feasibility epoch and the final
/// distances; the trace files have one record per dual epoch.
#[test]
fn experiment_report_structure() {
    let milp = generate(&GapSpec::new(6, 6, 4)).unwrap();
    let base = ExperimentBase {
        seed: 5,
        total_ticks: 30_000,
        n_primal: Some(6),
        n_dual: Some(4),
        ..ExperimentBase::default()
    };
    let variants = vec![ExperimentVariant::comm(1.0), ExperimentVariant::phi(0.05)];
    let outcomes = run_experiment(&milp, &base, &variants).unwrap();
    assert_eq!(outcomes.len(), 2);
    for o in &outcomes {
        assert!(o.row.rounded_feasible);
        assert!(o.row.first_stable_feasible_epoch.is_some());
        let n_epochs = 30_000usize.div_ceil(base.b);
        assert_eq!(o.run.trace.records.len(), n_epochs);
        for (i, r) in o.run.trace.records.iter().enumerate() {
            assert_eq!(r.epoch as usize, i);
            assert_eq!(r.tick as usize, i * base.b);
        }
    }
    // The tightened variant pays at least as much cost at the end.
    assert!(outcomes[1].row.phi > 0.0);
}
