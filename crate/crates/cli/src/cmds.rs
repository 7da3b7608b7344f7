//! Command implementations. Every command materializes its resolved
//! configuration into a manifest next to its artifacts; rerunning with the
//! same manifest inputs reproduces every output byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use granular_milp::analysis::{
    build_bounds_report_parts, hoffman_estimate, SigmaSource,
};
use granular_milp::error::Error;
use granular_milp::gap::{
    gap_partition, generate, run_experiment, select_xi, ExperimentBase, ExperimentVariant,
    GapSpec,
};
use granular_milp::io::{
    manifest_to_json, parse_problem_str, parse_relaxed_doc, parse_trace_csv, problem_to_doc,
    relaxed_doc_to_json, trace_to_csv, RelaxedDoc, RunManifest, SolutionDoc,
};
use granular_milp::partition::BlockPartition;
use granular_milp::problem::{
    build_relaxation_with, certify_granularity, check_feasibility_milp, round_solution,
    PhiPolicy, RelaxOptions,
};
use granular_milp::sim::{run as run_sim, EpochRecord, InitPolicy, SimConfig};
use granular_milp::solver::{solve as solve_sync, stable_steps, SolveSettings};
use granular_milp::svg::plot_trace_svg;
use granular_milp::SaddleProblem;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_ENVELOPE: u8 = 4;

fn fail(e: impl std::fmt::Display) -> u8 {
    eprintln!("error: {e}");
    EXIT_ERROR
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn manifest(
    command: &str,
    inputs: &[(&str, &Path)],
    config: serde_json::Value,
    seed: u64,
    artifacts: &[&Path],
) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        inputs: inputs
            .iter()
            .map(|(k, v)| (k.to_string(), v.display().to_string()))
            .collect::<BTreeMap<_, _>>(),
        config,
        seed,
        artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
    }
}

pub fn relax(
    problem_path: &Path,
    xi: Option<f64>,
    alpha: f64,
    delta: f64,
    phi_inflation: Option<f64>,
    out_dir: &Path,
) -> u8 {
    let text = match fs::read_to_string(problem_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", problem_path.display())),
    };
    let milp = match parse_problem_str(&text) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };

    let cert = certify_granularity(&milp);
    println!(
        "granular_by_slater: {} (xi_e = {}, certified at xi = {:?})",
        cert.granular_by_slater, cert.xi_e, cert.xi_certified
    );

    let policy = match phi_inflation {
        Some(v) => PhiPolicy::Fixed(v),
        None => PhiPolicy::ViolationBound,
    };
    let built = match xi {
        Some(xi) => build_relaxation_with(
            &milp,
            &RelaxOptions {
                xi: Some(xi),
                alpha,
                delta,
                phi: policy,
                ..RelaxOptions::default()
            },
        ),
        None => select_xi(&milp, alpha, delta, policy),
    };
    let relaxed = match built {
        Ok(r) => r,
        Err(e @ Error::SlaterInfeasible { .. }) | Err(e @ Error::TightenedInfeasible { .. }) => {
            eprintln!("infeasible: {e}");
            return EXIT_INFEASIBLE;
        }
        Err(e) => return fail(e),
    };

    println!(
        "xi = {}, omega = {:?}, rho = {:?}",
        relaxed.xi, relaxed.gran.omega, relaxed.gran.rho
    );
    println!(
        "phi = {} (bound {}), lambda_radius = {}, r = {}, slater margin = {:?}",
        relaxed.phi, relaxed.phi_bound, relaxed.lambda_radius, relaxed.r, relaxed.slater_margin
    );

    let relaxed_path = out_dir.join("relaxed.json");
    let report_path = out_dir.join("relax_report.json");
    let manifest_path = out_dir.join("manifest.json");
    let doc = RelaxedDoc {
        problem: problem_to_doc(&milp),
        relaxed,
    };
    let report = serde_json::json!({
        "certificate": cert,
        "xi": doc.relaxed.xi,
        "xi_e": doc.relaxed.gran.xi_e,
        "omega": doc.relaxed.gran.omega,
        "rho": doc.relaxed.gran.rho,
        "phi": doc.relaxed.phi,
        "phi_bound": doc.relaxed.phi_bound,
        "lambda_radius": doc.relaxed.lambda_radius,
        "slater_margin": doc.relaxed.slater_margin,
        "r": doc.relaxed.r,
        "norm_a": doc.relaxed.norm_a,
    });
    let m = manifest(
        "relax",
        &[("problem", problem_path)],
        serde_json::json!({
            "xi": xi, "alpha": alpha, "delta": delta, "phi_inflation": phi_inflation,
        }),
        0,
        &[&relaxed_path, &report_path],
    );
    for (path, contents) in [
        (&relaxed_path, relaxed_doc_to_json(&doc)),
        (&report_path, serde_json::to_string_pretty(&report).unwrap()),
        (&manifest_path, manifest_to_json(&m)),
    ] {
        if let Err(e) = write_file(path, &contents) {
            return fail(e);
        }
    }
    EXIT_OK
}

pub struct SolveArgs {
    pub relaxed: PathBuf,
    pub sync: bool,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub b: usize,
    pub comp_rate: f64,
    pub comm_rate: f64,
    pub seed: u64,
    pub iters: usize,
    pub tol: f64,
    pub primal_agents: Option<usize>,
    pub dual_agents: Option<usize>,
    pub init: InitPolicy,
    pub out_dir: PathBuf,
}

pub fn solve(args: SolveArgs) -> u8 {
    let text = match fs::read_to_string(&args.relaxed) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", args.relaxed.display())),
    };
    let (milp, relaxed) = match parse_relaxed_doc(&text) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let (g0, b0) = stable_steps(&relaxed);
    let gamma = args.gamma.unwrap_or(g0);
    let beta = args.beta.unwrap_or(b0);

    let trace_path = args.out_dir.join("trace.csv");
    let solution_path = args.out_dir.join("solution.json");
    let plot_path = args.out_dir.join("plot.svg");
    let manifest_path = args.out_dir.join("manifest.json");
    let config_json = serde_json::json!({
        "mode": if args.sync { "sync" } else { "async" },
        "gamma": gamma, "beta": beta, "B": args.b,
        "comp_rate": args.comp_rate, "comm_rate": args.comm_rate,
        "iters": args.iters, "tol": args.tol,
        "primal_agents": args.primal_agents, "dual_agents": args.dual_agents,
    });
    let m = manifest(
        "solve",
        &[("relaxed", &args.relaxed)],
        config_json,
        args.seed,
        &[&trace_path, &solution_path, &plot_path],
    );

    if args.sync {
        let mut settings = SolveSettings::new(gamma, beta);
        settings.max_iters = args.iters;
        settings.residual_tol = args.tol;
        settings.snapshot_every = (args.iters / 2000).max(1);
        let (solution, converged) = match solve_sync(&relaxed, &settings) {
            Ok(s) => (s, true),
            Err(Error::NotConverged { last, .. }) => (*last, false),
            Err(e) => return fail(e),
        };
        let point = relaxed.split_z(&solution.z_hat);
        let rounded = round_solution(&point);
        let feas = check_feasibility_milp(&milp, &rounded, 1e-9);
        let records: Vec<EpochRecord> = solution
            .snapshots
            .iter()
            .map(|s| {
                let pt = relaxed.split_z(&s.z);
                let rp = round_solution(&pt);
                EpochRecord {
                    tick: s.iter as u64,
                    epoch: s.iter as u64,
                    dist_primal: s
                        .z
                        .iter()
                        .zip(&solution.z_hat)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt(),
                    dist_dual: s
                        .lambda
                        .iter()
                        .zip(&solution.lambda_hat)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt(),
                    cost: relaxed.cost(&s.z),
                    rounded_feasible: check_feasibility_milp(&milp, &rp, 1e-9).feasible,
                    msgs_sent: 0,
                }
            })
            .collect();
        let doc = SolutionDoc {
            mode: "sync".into(),
            z: solution.z_hat.clone(),
            lambda: solution.lambda_hat.clone(),
            residual: Some(solution.residual),
            iters: solution.iters as u64,
            rounded: rounded.clone(),
            rounded_cost: milp.cost_rounded(&rounded),
            feasibility: feas.clone(),
            gamma,
            beta,
            b: 1,
            seed: args.seed,
            comp_rate: 1.0,
            comm_rate: 1.0,
            lambda0_dist: solution
                .lambda_hat
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt(),
            contraction_den: Vec::new(),
            contraction_num: Vec::new(),
        };
        for (path, contents) in [
            (&trace_path, trace_to_csv(&records)),
            (&solution_path, serde_json::to_string_pretty(&doc).unwrap()),
            (&plot_path, plot_trace_svg(&records)),
            (&manifest_path, manifest_to_json(&m)),
        ] {
            if let Err(e) = write_file(path, &contents) {
                return fail(e);
            }
        }
        println!(
            "sync: residual {} after {} iterations; rounded feasible: {}",
            solution.residual, solution.iters, feas.feasible
        );
        if !converged {
            eprintln!("solver did not reach tolerance {}", args.tol);
            return EXIT_NOT_CONVERGED;
        }
        EXIT_OK
    } else {
        // Asynchronous mode solves the reference first, then simulates.
        let mut ref_settings = SolveSettings::new(g0, b0);
        ref_settings.residual_tol = 1e-10;
        let reference = match solve_sync(&relaxed, &ref_settings) {
            Ok(s) => s,
            Err(e) => return fail(format!("reference solve failed: {e}")),
        };
        let dim = relaxed.dim();
        let p = relaxed.p();
        let n1 = args.primal_agents.unwrap_or(dim);
        let n2 = args.dual_agents.unwrap_or(p);
        let part = match BlockPartition::contiguous(dim, n1, p, n2) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let problem = match SaddleProblem::new(milp.clone(), relaxed, part) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let mut config = SimConfig::new(args.b, args.iters, gamma, beta, args.seed);
        config.comp_rate = args.comp_rate;
        config.comm_rate = args.comm_rate;
        config.init = args.init;
        let sim = match run_sim(&problem, &config, &reference) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let doc = SolutionDoc::from_sim(
            &sim.trace,
            &sim,
            problem.milp.cost_rounded(&sim.rounded),
        );
        for (path, contents) in [
            (&trace_path, trace_to_csv(&sim.trace.records)),
            (&solution_path, serde_json::to_string_pretty(&doc).unwrap()),
            (&plot_path, plot_trace_svg(&sim.trace.records)),
            (&manifest_path, manifest_to_json(&m)),
        ] {
            if let Err(e) = write_file(path, &contents) {
                return fail(e);
            }
        }
        let last = sim.trace.records.last().unwrap();
        println!(
            "async: {} ticks, final distances (primal {}, dual {}), rounded feasible: {}",
            args.iters, last.dist_primal, last.dist_dual, sim.feasibility.feasible
        );
        EXIT_OK
    }
}

pub fn analyze(
    trace_path: &Path,
    relaxed_path: &Path,
    solution: Option<PathBuf>,
    sigma: Option<f64>,
    sigma_samples: usize,
    seed: u64,
    out_dir: &Path,
) -> u8 {
    let trace_text = match fs::read_to_string(trace_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", trace_path.display())),
    };
    let records = match parse_trace_csv(&trace_text) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let relaxed_text = match fs::read_to_string(relaxed_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", relaxed_path.display())),
    };
    let (milp, relaxed) = match parse_relaxed_doc(&relaxed_text) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let solution_path = solution.unwrap_or_else(|| {
        trace_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("solution.json")
    });
    let sol_text = match fs::read_to_string(&solution_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", solution_path.display())),
    };
    let sol: SolutionDoc = match serde_json::from_str(&sol_text) {
        Ok(s) => s,
        Err(e) => return fail(Error::from(e)),
    };

    let (sigma_value, source) = match sigma {
        Some(s) => (s, SigmaSource::UserSupplied),
        None => {
            let est = match hoffman_estimate(
                milp.e_mat(),
                milp.f_mat(),
                milp.h(),
                sigma_samples,
                seed,
            ) {
                Ok(e) => e,
                Err(e) => return fail(e),
            };
            (est.sigma, SigmaSource::Estimated)
        }
    };

    let report = build_bounds_report_parts(
        &relaxed,
        &records,
        &sol.contraction_den,
        &sol.contraction_num,
        sol.lambda0_dist,
        sol.beta,
        sigma_value,
        source,
    );

    let bounds_path = out_dir.join("bounds.json");
    let manifest_path = out_dir.join("manifest.json");
    let m = manifest(
        "analyze",
        &[
            ("trace", trace_path),
            ("relaxed", relaxed_path),
            ("solution", &solution_path),
        ],
        serde_json::json!({"sigma": sigma, "sigma_samples": sigma_samples}),
        seed,
        &[&bounds_path],
    );
    for (path, contents) in [
        (&bounds_path, serde_json::to_string_pretty(&report).unwrap()),
        (&manifest_path, manifest_to_json(&m)),
    ] {
        if let Err(e) = write_file(path, &contents) {
            return fail(e);
        }
    }
    println!(
        "sigma = {} ({:?}), total bound = {}, q_d = {}, q_p = {}",
        report.hoffman_sigma, report.sigma_source, report.total_bound, report.q_d, report.q_p_hat
    );
    if !report.envelope_ok {
        if let Some(v) = &report.first_violation {
            eprintln!(
                "envelope violation at epoch {}: {} measured {} > bound {}",
                v.epoch, v.kind, v.measured, v.bound
            );
        }
        return EXIT_ENVELOPE;
    }
    println!("envelopes hold at every epoch");
    EXIT_OK
}

pub struct BenchArgs {
    pub p: usize,
    pub q: usize,
    pub seed: u64,
    pub comm_rates: Vec<f64>,
    pub comp_rates: Vec<f64>,
    pub phi_sweep: Vec<f64>,
    pub ticks: usize,
    pub b: usize,
    pub alpha: f64,
    pub delta: f64,
    pub xi: Option<f64>,
    pub t_factor: f64,
    pub beta_scale: f64,
    pub init: InitPolicy,
    pub primal_agents: Option<usize>,
    pub dual_agents: Option<usize>,
    pub out_dir: PathBuf,
}

pub fn bench_gap(args: BenchArgs) -> u8 {
    let spec = GapSpec {
        capacity_factor: args.t_factor,
        ..GapSpec::new(args.p, args.q, args.seed)
    };
    let milp = match generate(&spec) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let (n1_default, n2_default) = gap_partition(&spec);
    let base = ExperimentBase {
        xi: args.xi,
        alpha: args.alpha,
        delta: args.delta,
        b: args.b,
        total_ticks: args.ticks,
        seed: args.seed,
        n_primal: Some(args.primal_agents.unwrap_or(n1_default)),
        n_dual: Some(args.dual_agents.unwrap_or(n2_default)),
        beta_scale: args.beta_scale,
        init: args.init,
        ..ExperimentBase::default()
    };
    let mut variants: Vec<ExperimentVariant> = Vec::new();
    variants.extend(args.comm_rates.iter().map(|r| ExperimentVariant::comm(*r)));
    variants.extend(args.comp_rates.iter().map(|r| ExperimentVariant::comp(*r)));
    variants.extend(args.phi_sweep.iter().map(|v| ExperimentVariant::phi(*v)));
    if variants.is_empty() {
        return fail("no variants requested");
    }

    let outcomes = match run_experiment(&milp, &base, &variants) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };

    let mut summary_csv = String::from(
        "label,comm_rate,comp_rate,phi,xi,first_feasible_epoch,first_stable_feasible_epoch,final_dist_primal,final_dist_dual,final_cost_relaxed,final_cost_rounded,rounded_feasible,msgs_sent\n",
    );
    let opt = |e: Option<u64>| e.map(|e| e.to_string()).unwrap_or_else(|| "never".into());
    let mut rows = Vec::new();
    let mut artifact_paths: Vec<PathBuf> = Vec::new();
    for outcome in &outcomes {
        let r = &outcome.row;
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.comm_rate,
            r.comp_rate,
            r.phi,
            r.xi,
            opt(r.first_feasible_epoch),
            opt(r.first_stable_feasible_epoch),
            r.final_dist_primal,
            r.final_dist_dual,
            r.final_cost_relaxed,
            r.final_cost_rounded,
            u8::from(r.rounded_feasible),
            r.msgs_sent,
        ));
        rows.push(r.clone());
        println!(
            "{:<12} feasible from epoch {:>8}  final dist {:>12.6e}  rounded feasible {}",
            r.label,
            opt(r.first_stable_feasible_epoch),
            r.final_dist_primal,
            r.rounded_feasible
        );
        let trace_path = args.out_dir.join(format!("trace-{}.csv", r.label));
        let svg_path = args.out_dir.join(format!("plot-{}.svg", r.label));
        if let Err(e) = write_file(&trace_path, &trace_to_csv(&outcome.run.trace.records)) {
            return fail(e);
        }
        if let Err(e) = write_file(&svg_path, &plot_trace_svg(&outcome.run.trace.records)) {
            return fail(e);
        }
        artifact_paths.push(trace_path);
        artifact_paths.push(svg_path);
    }

    let summary_csv_path = args.out_dir.join("summary.csv");
    let summary_json_path = args.out_dir.join("summary.json");
    let manifest_path = args.out_dir.join("manifest.json");
    artifact_paths.push(summary_csv_path.clone());
    artifact_paths.push(summary_json_path.clone());
    let artifact_refs: Vec<&Path> = artifact_paths.iter().map(|p| p.as_path()).collect();
    let m = manifest(
        "bench-gap",
        &[],
        serde_json::json!({
            "p": args.p, "q": args.q, "comm_rates": args.comm_rates,
            "comp_rates": args.comp_rates, "phi_sweep": args.phi_sweep,
            "ticks": args.ticks, "B": args.b, "alpha": args.alpha,
            "delta": args.delta, "xi": args.xi,
        }),
        args.seed,
        &artifact_refs,
    );
    for (path, contents) in [
        (&summary_csv_path, summary_csv),
        (
            &summary_json_path,
            serde_json::to_string_pretty(&rows).unwrap(),
        ),
        (&manifest_path, manifest_to_json(&m)),
    ] {
        if let Err(e) = write_file(path, &contents) {
            return fail(e);
        }
    }
    EXIT_OK
}

pub fn oracle(problem_path: &Path, out_dir: &Path) -> u8 {
    let text = match fs::read_to_string(problem_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", problem_path.display())),
    };
    let milp = match parse_problem_str(&text) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let doc = match granular_milp::analysis::brute_force_milp(&milp) {
        Ok(res) => {
            println!(
                "optimal cost {} at y = {:?} ({} points enumerated)",
                res.cost, res.y_star, res.enumerated
            );
            serde_json::json!({
                "status": "optimal",
                "cost": res.cost,
                "y": res.y_star,
                "enumerated": res.enumerated,
            })
        }
        Err(Error::Infeasible) => {
            println!("infeasible");
            serde_json::json!({"status": "infeasible"})
        }
        Err(e) => return fail(e),
    };
    let oracle_path = out_dir.join("oracle.json");
    let manifest_path = out_dir.join("manifest.json");
    let m = manifest(
        "oracle",
        &[("problem", problem_path)],
        serde_json::json!({}),
        0,
        &[&oracle_path],
    );
    for (path, contents) in [
        (&oracle_path, serde_json::to_string_pretty(&doc).unwrap()),
        (&manifest_path, manifest_to_json(&m)),
    ] {
        if let Err(e) = write_file(path, &contents) {
            return fail(e);
        }
    }
    EXIT_OK
}
