//! Wire formats: problem files, relaxation documents, trace CSV, solution
//! and bounds documents, and the run manifest. All writers are
//! deterministic so identical inputs produce byte-identical artifacts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{FeasibilityReport, MilpInstance, RelaxedProblem, RoundedPoint};
use crate::sim::{EpochRecord, SimTrace};
use crate::sparse::{SparseMatrix, Triplets};

/// Problem-file schema: sparse triplets, 0-based indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    #[serde(rename = "E")]
    pub e: Triplets,
    #[serde(rename = "F")]
    pub f: Triplets,
    pub h: Vec<f64>,
    pub y_lo: Vec<i64>,
    pub y_hi: Vec<i64>,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
}

pub fn parse_problem_str(text: &str) -> Result<MilpInstance> {
    let doc: ProblemDoc = serde_json::from_str(text)?;
    if doc.e.shape != [doc.h.len(), doc.n] {
        return Err(Error::Invalid(format!(
            "E shape {:?} disagrees with p = {} rows and n = {} columns",
            doc.e.shape,
            doc.h.len(),
            doc.n
        )));
    }
    if doc.f.shape != [doc.h.len(), doc.m] {
        return Err(Error::Invalid(format!(
            "F shape {:?} disagrees with p = {} rows and m = {} columns",
            doc.f.shape,
            doc.h.len(),
            doc.m
        )));
    }
    let e = SparseMatrix::from_triplet_repr(&doc.e)?;
    let f = SparseMatrix::from_triplet_repr(&doc.f)?;
    MilpInstance::new(
        doc.a, doc.d, e, f, doc.h, doc.y_lo, doc.y_hi, doc.x_lo, doc.x_hi,
    )
}

pub fn problem_to_doc(milp: &MilpInstance) -> ProblemDoc {
    ProblemDoc {
        n: milp.n(),
        m: milp.m(),
        a: milp.a_cost().to_vec(),
        d: milp.d_cost().to_vec(),
        e: milp.e_mat().to_triplets(),
        f: milp.f_mat().to_triplets(),
        h: milp.h().to_vec(),
        y_lo: milp.y_lo().to_vec(),
        y_hi: milp.y_hi().to_vec(),
        x_lo: milp.x_lo().to_vec(),
        x_hi: milp.x_hi().to_vec(),
    }
}

pub fn problem_to_json(milp: &MilpInstance) -> String {
    serde_json::to_string_pretty(&problem_to_doc(milp)).expect("serializable")
}

/// Self-contained relaxation document: the original instance plus the
/// derived relaxed problem, so later stages need no other inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxedDoc {
    pub problem: ProblemDoc,
    pub relaxed: RelaxedProblem,
}

pub fn relaxed_doc_to_json(doc: &RelaxedDoc) -> String {
    serde_json::to_string_pretty(doc).expect("serializable")
}

pub fn parse_relaxed_doc(text: &str) -> Result<(MilpInstance, RelaxedProblem)> {
    let doc: RelaxedDoc = serde_json::from_str(text)?;
    let e = SparseMatrix::from_triplet_repr(&doc.problem.e)?;
    let f = SparseMatrix::from_triplet_repr(&doc.problem.f)?;
    let milp = MilpInstance::new(
        doc.problem.a,
        doc.problem.d,
        e,
        f,
        doc.problem.h,
        doc.problem.y_lo,
        doc.problem.y_hi,
        doc.problem.x_lo,
        doc.problem.x_hi,
    )?;
    Ok((milp, doc.relaxed))
}

pub const TRACE_HEADER: &str = "tick,epoch,dist_primal,dist_dual,cost,rounded_feasible,msgs_sent";

/// Serialize the per-epoch records. Floats use shortest round-trip form.
pub fn trace_to_csv(records: &[EpochRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 64 + TRACE_HEADER.len() + 1);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.tick,
            r.epoch,
            r.dist_primal,
            r.dist_dual,
            r.cost,
            u8::from(r.rounded_feasible),
            r.msgs_sent
        ));
    }
    out
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "bad trace header: expected {TRACE_HEADER:?}, found {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "trace line {}: expected 7 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("trace line {}: {what}: {e}", lineno + 2)))
        };
        let parse_u = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|e| Error::Parse(format!("trace line {}: {what}: {e}", lineno + 2)))
        };
        records.push(EpochRecord {
            tick: parse_u(fields[0], "tick")?,
            epoch: parse_u(fields[1], "epoch")?,
            dist_primal: parse_f(fields[2], "dist_primal")?,
            dist_dual: parse_f(fields[3], "dist_dual")?,
            cost: parse_f(fields[4], "cost")?,
            rounded_feasible: match fields[5] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse(format!(
                        "trace line {}: rounded_feasible must be 0 or 1, found {other}",
                        lineno + 2
                    )))
                }
            },
            msgs_sent: parse_u(fields[6], "msgs_sent")?,
        });
    }
    Ok(records)
}

/// Solve-stage output: the converged or final iterate, the rounded point
/// and its certificate, plus the scalars the analysis stage needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub mode: String,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Projected fixed-point residual; absent for simulated runs, which
    /// report distances to the reference instead.
    pub residual: Option<f64>,
    pub iters: u64,
    pub rounded: RoundedPoint,
    pub rounded_cost: f64,
    pub feasibility: FeasibilityReport,
    pub gamma: f64,
    pub beta: f64,
    pub b: u64,
    pub seed: u64,
    pub comp_rate: f64,
    pub comm_rate: f64,
    pub lambda0_dist: f64,
    pub contraction_den: Vec<f64>,
    pub contraction_num: Vec<f64>,
}

impl SolutionDoc {
    pub fn from_sim(trace: &SimTrace, run: &crate::sim::SimRun, rounded_cost: f64) -> Self {
        Self {
            mode: "async".into(),
            z: run.final_z.clone(),
            lambda: run.final_lambda.clone(),
            residual: None,
            iters: trace.total_ticks as u64,
            rounded: run.rounded.clone(),
            rounded_cost,
            feasibility: run.feasibility.clone(),
            gamma: trace.gamma,
            beta: trace.beta,
            b: trace.b as u64,
            seed: trace.seed,
            comp_rate: trace.comp_rate,
            comm_rate: trace.comm_rate,
            lambda0_dist: trace.lambda0_dist,
            contraction_den: trace.contraction_den.clone(),
            contraction_num: trace.contraction_num.clone(),
        }
    }
}

/// Everything needed to reproduce a command's outputs byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub artifacts: Vec<String>,
}

pub fn manifest_to_json(m: &RunManifest) -> String {
    serde_json::to_string_pretty(m).expect("serializable")
}
