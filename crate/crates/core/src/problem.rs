//! Mixed-integer linear programs, granularity quantities, and the relaxed
//! feasible description built from them.
//!
//! An instance is
//!
//! ```text
//! min  a'x + d'y   s.t.  E x + F y <= h,  y integer in [y_lo, y_hi],  x in X,
//! ```
//!
//! with `X` a box. The relaxation keeps `x` and treats `y` as real over a
//! shifted box, with the coupling rows floored to the per-row coefficient
//! grid and shrunk by half the row's 1-norm, then enlarged by `xi`:
//!
//! ```text
//! E x + F y <= floor_omega(h) + xi*omega - rho/2,
//! y in [y_lo + (1/2 - xi), y_hi + (xi - 1/2)].
//! ```
//!
//! Any point of that region rounds (nearest integer, ties toward -inf) to a
//! feasible point of the original instance once `xi >= xi_e`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxSet;
use crate::lagrangian;
use crate::slater::{find_slater_point, SlaterOptions};
use crate::sparse::SparseMatrix;

/// The original mixed-integer instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilpInstance {
    a: Vec<f64>,
    d: Vec<f64>,
    e: SparseMatrix,
    f: SparseMatrix,
    h: Vec<f64>,
    y_lo: Vec<i64>,
    y_hi: Vec<i64>,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
}

impl MilpInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Vec<f64>,
        d: Vec<f64>,
        e: SparseMatrix,
        f: SparseMatrix,
        h: Vec<f64>,
        y_lo: Vec<i64>,
        y_hi: Vec<i64>,
        x_lo: Vec<f64>,
        x_hi: Vec<f64>,
    ) -> Result<Self> {
        let n = a.len();
        let m = d.len();
        let p = h.len();
        let check = |what: &str, expected: usize, found: usize| -> Result<()> {
            if expected != found {
                Err(Error::DimensionMismatch {
                    what: what.into(),
                    expected,
                    found,
                })
            } else {
                Ok(())
            }
        };
        check("E columns (= n)", n, e.ncols())?;
        check("F columns (= m)", m, f.ncols())?;
        check("E rows (= p)", p, e.nrows())?;
        check("F rows (= p)", p, f.nrows())?;
        check("x_lo length", n, x_lo.len())?;
        check("x_hi length", n, x_hi.len())?;
        check("y_lo length", m, y_lo.len())?;
        check("y_hi length", m, y_hi.len())?;
        for (i, v) in a.iter().chain(&d).chain(&h).enumerate() {
            if !v.is_finite() {
                return Err(Error::Invalid(format!("non-finite cost/rhs entry {i}")));
            }
        }
        for i in 0..n {
            if !x_lo[i].is_finite() || !x_hi[i].is_finite() {
                return Err(Error::Invalid(format!("x bound {i} not finite")));
            }
            if x_lo[i] > x_hi[i] {
                return Err(Error::Invalid(format!(
                    "x bound {i} inverted: {} > {}",
                    x_lo[i], x_hi[i]
                )));
            }
        }
        for j in 0..m {
            if y_lo[j] > y_hi[j] {
                return Err(Error::Invalid(format!(
                    "y bound {j} inverted: {} > {}",
                    y_lo[j], y_hi[j]
                )));
            }
        }
        if !f.is_integer() {
            let t = f.to_triplets();
            let k = t.vals.iter().position(|v| v.fract() != 0.0).unwrap();
            return Err(Error::Invalid(format!(
                "F must be integer-valued; entry ({}, {}) = {}",
                t.rows[k], t.cols[k], t.vals[k]
            )));
        }
        Ok(Self {
            a,
            d,
            e,
            f,
            h,
            y_lo,
            y_hi,
            x_lo,
            x_hi,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn p(&self) -> usize {
        self.h.len()
    }

    pub fn a_cost(&self) -> &[f64] {
        &self.a
    }

    pub fn d_cost(&self) -> &[f64] {
        &self.d
    }

    pub fn e_mat(&self) -> &SparseMatrix {
        &self.e
    }

    pub fn f_mat(&self) -> &SparseMatrix {
        &self.f
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn y_lo(&self) -> &[i64] {
        &self.y_lo
    }

    pub fn y_hi(&self) -> &[i64] {
        &self.y_hi
    }

    pub fn x_lo(&self) -> &[f64] {
        &self.x_lo
    }

    pub fn x_hi(&self) -> &[f64] {
        &self.x_hi
    }

    /// Objective `a'x + d'y` at a rounded point.
    pub fn cost_rounded(&self, pt: &RoundedPoint) -> f64 {
        let cx: f64 = self.a.iter().zip(&pt.x).map(|(a, x)| a * x).sum();
        let cy: f64 = self.d.iter().zip(&pt.y).map(|(d, y)| d * (*y as f64)).sum();
        cx + cy
    }
}

/// Per-row coefficient grid, floored right-hand side, row 1-norms, and the
/// minimal enlargement parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GranularityData {
    pub omega: Vec<u64>,
    pub b_floor: Vec<f64>,
    pub rho: Vec<u64>,
    pub xi_e: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Per-row gcd of the integer coefficients, zeroed when the row touches a
/// continuous variable (or is empty).
pub fn compute_omega(milp: &MilpInstance) -> Vec<u64> {
    (0..milp.p())
        .map(|i| {
            if !milp.e.row_is_zero(i) {
                return 0;
            }
            let (_, vals) = milp.f.row(i);
            vals.iter()
                .fold(0u64, |g, v| gcd(g, v.abs().round() as u64))
        })
        .collect()
}

/// Componentwise largest multiple of `omega_i` not exceeding `h_i`;
/// identity where `omega_i = 0`.
pub fn floor_omega(h: &[f64], omega: &[u64]) -> Vec<f64> {
    debug_assert_eq!(h.len(), omega.len());
    h.iter()
        .zip(omega)
        .map(|(hi, w)| {
            if *w == 0 {
                *hi
            } else {
                let w = *w as f64;
                w * (hi / w).floor()
            }
        })
        .collect()
}

/// `max_i (h_i - b_floor_i) / omega_i` over rows with `omega_i != 0`; zero
/// when every `omega_i` is zero. Always in `[0, 1)`.
pub fn compute_xi_e(h: &[f64], omega: &[u64], b_floor: &[f64]) -> f64 {
    let mut xi = 0.0f64;
    for i in 0..h.len() {
        if omega[i] != 0 {
            xi = xi.max((h[i] - b_floor[i]) / omega[i] as f64);
        }
    }
    xi.clamp(0.0, 1.0 - f64::EPSILON)
}

pub fn granularity(milp: &MilpInstance) -> GranularityData {
    let omega = compute_omega(milp);
    let b_floor = floor_omega(&milp.h, &omega);
    let rho: Vec<u64> = milp
        .f
        .row_abs_sums()
        .into_iter()
        .map(|s| s.round() as u64)
        .collect();
    let xi_e = compute_xi_e(&milp.h, &omega, &b_floor);
    GranularityData {
        omega,
        b_floor,
        rho,
        xi_e,
    }
}

/// Default enlargement parameter: strictly inside `[xi_e, 1)` to avoid the
/// boundary degeneracy at `xi_e` itself.
pub fn default_xi(xi_e: f64) -> f64 {
    xi_e + 0.1 * (1.0 - xi_e)
}

/// Deterministic certification ladder: increasing candidates in `[xi_e, 1)`.
/// Strict feasibility at any rung certifies granularity (the relaxed regions
/// are nested increasing in `xi`).
pub fn xi_ladder(xi_e: f64) -> Vec<f64> {
    let mut c = vec![
        xi_e.max(0.6),
        0.5 * (1.0 + xi_e),
        0.9,
        0.95,
        0.99,
        0.995,
        0.999,
    ];
    c.retain(|x| *x >= xi_e && *x < 1.0);
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c.dedup();
    c
}

/// Right-hand side of the relaxed coupling rows at `xi`:
/// `b_floor + xi*omega - rho/2`.
pub fn relaxed_rhs(gran: &GranularityData, xi: f64) -> Vec<f64> {
    gran.b_floor
        .iter()
        .zip(gran.omega.iter().zip(&gran.rho))
        .map(|(b, (w, r))| b + xi * *w as f64 - 0.5 * *r as f64)
        .collect()
}

/// The shifted integer box at `xi`, or `None` when it is empty.
pub fn y_box(milp: &MilpInstance, xi: f64) -> Option<BoxSet> {
    let lo: Vec<f64> = milp.y_lo.iter().map(|l| *l as f64 + (0.5 - xi)).collect();
    let hi: Vec<f64> = milp.y_hi.iter().map(|u| *u as f64 + (xi - 0.5)).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return None;
    }
    BoxSet::new(lo, hi).ok()
}

fn z_box(milp: &MilpInstance, xi: f64) -> Option<BoxSet> {
    let yb = y_box(milp, xi)?;
    let mut lo = milp.x_lo.clone();
    let mut hi = milp.x_hi.clone();
    lo.extend_from_slice(yb.lo());
    hi.extend_from_slice(yb.hi());
    BoxSet::new(lo, hi).ok()
}

/// Membership test for the relaxed region at `xi`.
pub fn in_m_xi(
    milp: &MilpInstance,
    gran: &GranularityData,
    xi: f64,
    x: &[f64],
    y: &[f64],
    tol: f64,
) -> bool {
    let yb = match y_box(milp, xi) {
        Some(b) => b,
        None => return false,
    };
    if !yb.contains(y, tol) {
        return false;
    }
    for i in 0..milp.n() {
        if x[i] < milp.x_lo[i] - tol || x[i] > milp.x_hi[i] + tol {
            return false;
        }
    }
    let rhs = relaxed_rhs(gran, xi);
    (0..milp.p()).all(|i| milp.e.row_dot(i, x) + milp.f.row_dot(i, y) <= rhs[i] + tol)
}

/// How the tightening amount is chosen when building a relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiPolicy {
    /// Set `phi` to its evaluated violation bound (the default contract).
    ViolationBound,
    /// Use a fixed amount (0 disables tightening); experiment sweeps use this.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct RelaxOptions {
    /// Enlargement parameter; `None` selects `default_xi(xi_e)`.
    pub xi: Option<f64>,
    pub alpha: f64,
    pub delta: f64,
    pub phi: PhiPolicy,
    pub slater: SlaterOptions,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            xi: None,
            alpha: 0.3,
            delta: 0.01,
            phi: PhiPolicy::ViolationBound,
            slater: SlaterOptions::default(),
        }
    }
}

/// The relaxed, regularized, tightened problem description. Everything the
/// solvers and the analysis need is precomputed here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxedProblem {
    pub n: usize,
    pub m: usize,
    /// Stacked cost `(a, d)`.
    pub c: Vec<f64>,
    /// Coupling rows `(E F)`, `p x (n+m)`.
    pub a_mat: SparseMatrix,
    /// Floored right-hand side.
    pub b: Vec<f64>,
    /// Enlargement offset `xi*omega - rho/2`.
    pub nu: Vec<f64>,
    pub xi: f64,
    pub gran: GranularityData,
    /// Feasible box for `z = (x, y)`.
    pub z_box: BoxSet,
    /// Strictly feasible point of the phi-tightened rows.
    pub slater_point: Vec<f64>,
    /// Min tightened-row margin at `slater_point`; `None` when `p = 0`.
    pub slater_margin: Option<f64>,
    pub alpha: f64,
    pub delta: f64,
    /// Active tightening amount applied to the dualized rows.
    pub phi: f64,
    /// Evaluated violation bound at the untightened Slater point.
    pub phi_bound: f64,
    /// 1-norm cap for the dual variable (and each dual block).
    pub lambda_radius: f64,
    /// `max_{z in Z} ||z||`.
    pub r: f64,
    /// Spectral norm of the coupling matrix.
    pub norm_a: f64,
    /// `||F||_inf`, kept for the suboptimality bound.
    pub f_inf_norm: f64,
    /// `||d||_1`, kept for the rounding term of the suboptimality bound.
    pub d_l1: f64,
}

impl RelaxedProblem {
    pub fn p(&self) -> usize {
        self.b.len()
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    /// Split a stacked iterate into its continuous and relaxed-integer parts.
    pub fn split_z(&self, z: &[f64]) -> RelaxedPoint {
        RelaxedPoint {
            x: z[..self.n].to_vec(),
            y: z[self.n..].to_vec(),
        }
    }

    /// Margins `b + nu - phi - A z` of the tightened rows.
    pub fn tightened_margins(&self, z: &[f64]) -> Vec<f64> {
        (0..self.p())
            .map(|j| self.b[j] + self.nu[j] - self.phi - self.a_mat.row_dot(j, z))
            .collect()
    }

    /// Max positive violation of the untightened rows `A z <= b + nu`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        (0..self.p())
            .map(|j| self.a_mat.row_dot(j, z) - self.b[j] - self.nu[j])
            .fold(0.0, f64::max)
    }

    pub fn cost(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(c, z)| c * z).sum()
    }
}

/// Point of the relaxation: continuous `x`, real-valued `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Rounded point: continuous `x` unchanged, `y` integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedPoint {
    pub x: Vec<f64>,
    pub y: Vec<i64>,
}

/// Nearest integer with ties broken toward negative infinity. Deterministic
/// tie-breaking keeps traces reproducible.
#[inline]
pub fn round_half_down(v: f64) -> i64 {
    let f = v.floor();
    if v - f > 0.5 {
        f as i64 + 1
    } else {
        f as i64
    }
}

/// Round the relaxed-integer entries; `x` passes through.
pub fn round_solution(pt: &RelaxedPoint) -> RoundedPoint {
    RoundedPoint {
        x: pt.x.clone(),
        y: pt.y.iter().map(|v| round_half_down(*v)).collect(),
    }
}

/// Componentwise feasibility report against the original instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// `h_i - (E x + F y)_i` per row.
    pub row_margins: Vec<f64>,
    pub violated_rows: Vec<usize>,
    /// Indices where `y` leaves `[y_lo, y_hi]`.
    pub bound_violations: Vec<usize>,
    /// Indices where `x` leaves its box (beyond `tol`).
    pub box_violations: Vec<usize>,
    pub tol: f64,
}

pub fn check_feasibility_milp(
    milp: &MilpInstance,
    pt: &RoundedPoint,
    tol: f64,
) -> FeasibilityReport {
    let yf: Vec<f64> = pt.y.iter().map(|v| *v as f64).collect();
    let mut row_margins = Vec::with_capacity(milp.p());
    let mut violated_rows = Vec::new();
    for i in 0..milp.p() {
        let lhs = milp.e.row_dot(i, &pt.x) + milp.f.row_dot(i, &yf);
        let margin = milp.h[i] - lhs;
        if margin < -tol {
            violated_rows.push(i);
        }
        row_margins.push(margin);
    }
    let bound_violations: Vec<usize> = (0..milp.m())
        .filter(|j| pt.y[*j] < milp.y_lo[*j] || pt.y[*j] > milp.y_hi[*j])
        .collect();
    let box_violations: Vec<usize> = (0..milp.n())
        .filter(|i| pt.x[*i] < milp.x_lo[*i] - tol || pt.x[*i] > milp.x_hi[*i] + tol)
        .collect();
    FeasibilityReport {
        feasible: violated_rows.is_empty()
            && bound_violations.is_empty()
            && box_violations.is_empty(),
        row_margins,
        violated_rows,
        bound_violations,
        box_violations,
        tol,
    }
}

/// Build the relaxed problem with explicit `xi` and the default tightening
/// policy (`phi` set to its evaluated bound).
pub fn build_relaxation(
    milp: &MilpInstance,
    xi: f64,
    alpha: f64,
    delta: f64,
) -> Result<RelaxedProblem> {
    build_relaxation_with(
        milp,
        &RelaxOptions {
            xi: Some(xi),
            alpha,
            delta,
            ..RelaxOptions::default()
        },
    )
}

pub fn build_relaxation_with(milp: &MilpInstance, opts: &RelaxOptions) -> Result<RelaxedProblem> {
    let gran = granularity(milp);
    let xi = opts.xi.unwrap_or_else(|| default_xi(gran.xi_e));
    if xi < gran.xi_e - 1e-12 || xi >= 1.0 {
        return Err(Error::XiOutOfRange {
            xi,
            xi_e: gran.xi_e,
        });
    }
    if !(opts.alpha > 0.0 && opts.alpha.is_finite()) {
        return Err(Error::Invalid(format!("alpha must be positive, got {}", opts.alpha)));
    }
    if !(opts.delta > 0.0 && opts.delta.is_finite()) {
        return Err(Error::Invalid(format!("delta must be positive, got {}", opts.delta)));
    }

    let zb = match z_box(milp, xi) {
        Some(b) => b,
        None => {
            // The shifted integer box is already empty: no feasible region.
            return Err(Error::SlaterInfeasible {
                best_margin: f64::NEG_INFINITY,
                best_point: Vec::new(),
            });
        }
    };

    let mut c = milp.a.clone();
    c.extend_from_slice(&milp.d);
    let a_mat = SparseMatrix::hcat(&milp.e, &milp.f)?;
    let b = gran.b_floor.clone();
    let nu: Vec<f64> = gran
        .omega
        .iter()
        .zip(&gran.rho)
        .map(|(w, r)| xi * *w as f64 - 0.5 * *r as f64)
        .collect();

    let r = zb.max_norm();
    let norm_a = a_mat.spectral_norm();
    let f_inf_norm = milp.f.inf_norm();
    let d_l1: f64 = milp.d.iter().map(|v| v.abs()).sum();
    let p = milp.p();

    // Stage 1: a strictly feasible point of the untightened rows; its
    // margins give the violation bound.
    let stage1 = find_slater_point(&a_mat, &b, &nu, 0.0, &zb, &opts.slater)?;
    let phi_bound = if p == 0 {
        0.0
    } else {
        lagrangian::phi_bound(&c, &a_mat, &b, &nu, opts.alpha, opts.delta, r, &stage1.point)?
    };

    let phi = match opts.phi {
        PhiPolicy::ViolationBound => phi_bound,
        PhiPolicy::Fixed(v) => {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "fixed phi must be nonnegative, got {v}"
                )));
            }
            v
        }
    };

    // Stage 2: the tightened rows need their own strict-interior point.
    let slater = if phi > 0.0 && p > 0 {
        match find_slater_point(&a_mat, &b, &nu, phi, &zb, &opts.slater) {
            Ok(s) => s,
            Err(Error::SlaterInfeasible { best_margin, .. }) => {
                return Err(Error::TightenedInfeasible { phi, best_margin })
            }
            Err(e) => return Err(e),
        }
    } else {
        stage1
    };

    let lambda_radius = if p == 0 {
        0.0
    } else {
        lagrangian::lambda_radius(&c, &a_mat, &b, &nu, opts.alpha, r, phi, &slater.point)?
    };

    let slater_margin = if p == 0 { None } else { Some(slater.margin) };

    Ok(RelaxedProblem {
        n: milp.n(),
        m: milp.m(),
        c,
        a_mat,
        b,
        nu,
        xi,
        gran,
        z_box: zb,
        slater_point: slater.point,
        slater_margin,
        alpha: opts.alpha,
        delta: opts.delta,
        phi,
        phi_bound,
        lambda_radius,
        r,
        norm_a,
        f_inf_norm,
        d_l1,
    })
}

/// Outcome of the granularity certification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GranularityCertificate {
    pub granular_by_slater: bool,
    pub xi_e: f64,
    /// The ladder rung at which strict feasibility was certified.
    pub xi_certified: Option<f64>,
    pub slater_point: Option<Vec<f64>>,
    /// Best min-margin seen across the ladder (negative on failure).
    pub best_margin: f64,
}

/// Certify granularity by strict feasibility of the relaxed rows, trying a
/// deterministic ladder of enlargement parameters. Success at any rung
/// certifies every larger `xi` as well.
pub fn certify_granularity(milp: &MilpInstance) -> GranularityCertificate {
    let gran = granularity(milp);
    let opts = SlaterOptions::default();
    let mut best_margin = f64::NEG_INFINITY;
    for xi in xi_ladder(gran.xi_e) {
        let zb = match z_box(milp, xi) {
            Some(b) => b,
            None => continue,
        };
        let a_mat = match SparseMatrix::hcat(&milp.e, &milp.f) {
            Ok(m) => m,
            Err(_) => break,
        };
        let nu: Vec<f64> = gran
            .omega
            .iter()
            .zip(&gran.rho)
            .map(|(w, r)| xi * *w as f64 - 0.5 * *r as f64)
            .collect();
        match find_slater_point(&a_mat, &gran.b_floor, &nu, 0.0, &zb, &opts) {
            Ok(pt) => {
                return GranularityCertificate {
                    granular_by_slater: true,
                    xi_e: gran.xi_e,
                    xi_certified: Some(xi),
                    slater_point: Some(pt.point),
                    best_margin: if pt.margin.is_finite() { pt.margin } else { f64::MAX },
                };
            }
            Err(Error::SlaterInfeasible { best_margin: m, .. }) => {
                best_margin = best_margin.max(m);
            }
            Err(_) => {}
        }
    }
    GranularityCertificate {
        granular_by_slater: false,
        xi_e: gran.xi_e,
        xi_certified: None,
        slater_point: None,
        best_margin,
    }
}

/// Rejection-sample points of the relaxed region at `xi`. Used by tests.
pub fn sample_m_xi(
    milp: &MilpInstance,
    gran: &GranularityData,
    xi: f64,
    count: usize,
    max_attempts: usize,
    seed: u64,
) -> Vec<RelaxedPoint> {
    use rand::prelude::*;
    let zb = match z_box(milp, xi) {
        Some(b) => b,
        None => return Vec::new(),
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let n = milp.n();
    for _ in 0..max_attempts {
        if out.len() >= count {
            break;
        }
        let z: Vec<f64> = (0..zb.len())
            .map(|i| {
                if zb.width(i) == 0.0 {
                    zb.lo()[i]
                } else {
                    rng.gen_range(zb.lo()[i]..=zb.hi()[i])
                }
            })
            .collect();
        let (x, y) = z.split_at(n);
        if in_m_xi(milp, gran, xi, x, y, 1e-12) {
            out.push(RelaxedPoint {
                x: x.to_vec(),
                y: y.to_vec(),
            });
        }
    }
    out
}
