//! Projection operators used by every solver: boxes for primal blocks, the
//! nonnegative-orthant ∩ 1-norm-ball ("capped simplex") for dual blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `{ v : lo <= v <= hi }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                what: "box bounds".into(),
                expected: lo.len(),
                found: hi.len(),
            });
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::Invalid(format!("box bound {i} is not finite")));
            }
            if l > h {
                return Err(Error::Invalid(format!(
                    "box bound {i} inverted: lo = {l} > hi = {h}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.len() == self.len()
            && v.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol)
    }

    /// `max_{z in box} ||z||_2`, attained at a corner: per coordinate the
    /// larger magnitude endpoint.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.powi(2).max(h.powi(2)))
            .sum::<f64>()
            .sqrt()
    }
}

/// `{ lam >= 0 : ||lam||_1 <= radius }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CappedSimplex {
    radius: f64,
}

impl CappedSimplex {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Invalid(format!(
                "capped simplex radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.iter().all(|x| *x >= -tol) && v.iter().sum::<f64>() <= self.radius + tol
    }
}

/// Euclidean projection onto a box: componentwise clamp.
pub fn project_box(v: &[f64], b: &BoxSet) -> Vec<f64> {
    debug_assert_eq!(v.len(), b.len());
    v.iter()
        .zip(b.lo.iter().zip(&b.hi))
        .map(|(x, (l, h))| x.max(*l).min(*h))
        .collect()
}

/// In-place clamp against raw bounds; the solver hot path.
#[inline]
pub fn clamp_in_place(v: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..v.len() {
        v[i] = v[i].max(lo[i]).min(hi[i]);
    }
}

/// Euclidean projection onto `{ lam >= 0, ||lam||_1 <= radius }`.
///
/// If clamping negatives already lands inside the ball, that is the answer.
/// Otherwise the 1-norm constraint is active and the projection equals the
/// projection onto the simplex `{ lam >= 0, sum = radius }`, computed by the
/// O(d log d) sort-and-threshold rule: `max(0, v_i - tau)` with `tau` from the
/// cumulative sums. A radius of exactly zero collapses the set to the origin.
pub fn project_capped_simplex(v: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius >= 0.0);
    if radius == 0.0 {
        return vec![0.0; v.len()];
    }
    let clamped_sum: f64 = v.iter().map(|x| x.max(0.0)).sum();
    // The ulp-level band makes re-projection of an on-boundary output an
    // exact identity instead of a one-ulp threshold shift.
    if clamped_sum <= radius * (1.0 + 1e-13) {
        return v.iter().map(|x| x.max(0.0)).collect();
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cum = 0.0;
    let mut tau = 0.0;
    let mut k = 0usize;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
            k = j + 1;
        } else {
            break;
        }
    }
    debug_assert!(k > 0);
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}
