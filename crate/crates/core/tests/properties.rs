//! Generative property tests for the arithmetic core.

use proptest::prelude::*;

use granular_milp::problem::{compute_xi_e, floor_omega, round_half_down};
use granular_milp::{project_box, project_capped_simplex, BoxSet};

proptest! {
    /// floor_omega is a componentwise fixed point and never exceeds h.
    #[test]
    fn floor_omega_fixed_point(
        h in prop::collection::vec(-1e6f64..1e6, 1..8),
        omega in prop::collection::vec(0u64..20, 1..8),
    ) {
        let n = h.len().min(omega.len());
        let (h, omega) = (&h[..n], &omega[..n]);
        let once = floor_omega(h, omega);
        prop_assert_eq!(floor_omega(&once, omega), once.clone());
        for i in 0..n {
            prop_assert!(once[i] <= h[i] + 1e-9);
            if omega[i] != 0 {
                let w = omega[i] as f64;
                let k = once[i] / w;
                prop_assert!((k - k.round()).abs() < 1e-6, "not on the grid");
                prop_assert!(h[i] - once[i] < w + 1e-6);
            } else {
                prop_assert_eq!(once[i], h[i]);
            }
        }
    }

    /// The minimal enlargement parameter always lies in [0, 1).
    #[test]
    fn xi_e_in_unit_interval(
        h in prop::collection::vec(-1e5f64..1e5, 1..8),
        omega in prop::collection::vec(0u64..20, 1..8),
    ) {
        let n = h.len().min(omega.len());
        let (h, omega) = (&h[..n], &omega[..n]);
        let b = floor_omega(h, omega);
        let xi = compute_xi_e(h, omega, &b);
        prop_assert!((0.0..1.0).contains(&xi));
    }

    /// Rounding picks a nearest integer and breaks ties downward.
    #[test]
    fn rounding_nearest_tie_down(v in -1e9f64..1e9) {
        let r = round_half_down(v) as f64;
        prop_assert!((v - r).abs() <= 0.5 + 1e-9);
        if (v - v.floor() - 0.5).abs() < 1e-12 {
            prop_assert_eq!(r, v.floor());
        }
    }

    /// Box projection: idempotent, feasible, never farther than the input.
    #[test]
    fn box_projection_properties(
        v in prop::collection::vec(-10.0f64..10.0, 3),
        lo in prop::collection::vec(-5.0f64..0.0, 3),
        width in prop::collection::vec(0.0f64..5.0, 3),
    ) {
        let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
        let b = BoxSet::new(lo, hi).unwrap();
        let p = project_box(&v, &b);
        prop_assert!(b.contains(&p, 0.0));
        prop_assert_eq!(project_box(&p, &b), p);
    }

    /// Capped-simplex projection output is always feasible and idempotent.
    #[test]
    fn capped_simplex_properties(
        v in prop::collection::vec(-5.0f64..5.0, 1..6),
        radius in 0.1f64..4.0,
    ) {
        let p = project_capped_simplex(&v, radius);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!(p.iter().sum::<f64>() <= radius * (1.0 + 1e-12));
        prop_assert_eq!(project_capped_simplex(&p, radius), p.clone());
    }
}
