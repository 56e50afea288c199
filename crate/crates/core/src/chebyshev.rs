//! Two-variable Chebyshev polynomials and the scalar bounds behind the
//! propagator-polynomial estimates.
//!
//! The two-variable family satisfies
//! `U~_{k+1}(x,y) = x*U~_k(x,y) - y*U~_{k-1}(x,y)`, `U~_1 = x`, `U~_0 = 1`,
//! and reduces to the classical second-kind polynomials via
//! `U_k(x) = U~_k(2x, 1)`.

/// Below this value of 1 - x^2 the closed form is ill-conditioned and the
/// recurrence is used instead.
const CLOSED_FORM_CUTOFF: f64 = 1e-8;

/// Two-variable polynomial by forward recurrence.
pub fn u2_eval(k: usize, x: f64, y: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..k {
                let next = x * cur - y * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Classical second-kind Chebyshev polynomial U_k.
///
/// Uses sin((k+1) arccos x)/sqrt(1-x^2) away from the endpoints and the
/// recurrence U_{k+1} = 2x U_k - U_{k-1} when 1-x^2 < 1e-8 or |x| >= 1.
pub fn u_classical(k: usize, x: f64) -> f64 {
    let one_minus = 1.0 - x * x;
    if one_minus >= CLOSED_FORM_CUTOFF {
        (((k + 1) as f64) * x.acos()).sin() / one_minus.sqrt()
    } else {
        u2_eval(k, 2.0 * x, 1.0)
    }
}

/// Classical polynomial by recurrence only (dual path for conditioning tests).
pub fn u_classical_recurrence(k: usize, x: f64) -> f64 {
    u2_eval(k, 2.0 * x, 1.0)
}

/// One scalar-bound violation: which bound, at which degree and argument,
/// by how much.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub bound: &'static str,
    pub k: usize,
    pub x: f64,
    pub margin: f64,
}

/// Result of sweeping the four scalar bounds over degrees and sample points.
#[derive(Debug, Clone, Default)]
pub struct BoundsReport {
    pub checked: usize,
    pub violations: Vec<BoundViolation>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Envelope bound for |U_k(x)|: 1/sqrt(1-x^2).
pub fn envelope_bound(x: f64) -> f64 {
    1.0 / (1.0 - x * x).sqrt()
}

const BOUND_SLACK: f64 = 1e-12;

/// Checks, for all k <= k_max and each sample x in (-1,1):
///   |U_k(x)|            <= 1/sqrt(1-x^2)
///   |U_k(x)-U_{k-1}(x)| <= sqrt(2/(1+x))
///   |U_k(x)-x U_{k-1}(x)| <= 1
///   |x U_k(x)-U_{k-1}(x)| <= 1
/// each with 1e-12 relative slack. U_{-1} := 0 covers the k = 0 rows.
pub fn scalar_bounds_check(k_max: usize, x_samples: &[f64]) -> BoundsReport {
    let mut report = BoundsReport::default();
    for &x in x_samples {
        assert!(x.abs() < 1.0, "samples must lie in (-1, 1)");
        let mut prev = 0.0_f64; // U_{-1}
        let mut cur = 1.0_f64; // U_0
        for k in 0..=k_max {
            let mut fail = |bound: &'static str, lhs: f64, rhs: f64| {
                if lhs > rhs * (1.0 + BOUND_SLACK) + BOUND_SLACK {
                    report.violations.push(BoundViolation {
                        bound,
                        k,
                        x,
                        margin: lhs - rhs,
                    });
                }
            };
            fail("envelope", cur.abs(), envelope_bound(x));
            fail("difference", (cur - prev).abs(), (2.0 / (1.0 + x)).sqrt());
            fail("shifted_difference", (cur - x * prev).abs(), 1.0);
            fail("shifted_difference_rev", (x * cur - prev).abs(), 1.0);
            report.checked += 4;
            let next = 2.0 * x * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    report
}
