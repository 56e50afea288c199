//! Dense small-matrix certification of the scheme's operator identities,
//! inequalities, spectral inclusions and the Chebyshev error representation.
//!
//! Everything here works on symmetric positive definite matrices of dimension
//! at most 64. Operator functions (square roots, inverses, polynomials of the
//! propagator) go through symmetric eigendecompositions, so the checks are
//! exact up to eigensolver accuracy. Slack policy: relative 1e-10 plus
//! absolute 1e-13, scaled by the quantity being compared.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const REL_SLACK: f64 = 1e-10;
const ABS_SLACK: f64 = 1e-13;

/// Symmetric eigendecomposition with matrix-function evaluation.
#[derive(Debug, Clone)]
struct SymEig {
    q: DMatrix<f64>,
    vals: Vec<f64>,
}

impl SymEig {
    fn new(m: &DMatrix<f64>) -> Self {
        let se = m.clone().symmetric_eigen();
        Self {
            q: se.eigenvectors,
            vals: se.eigenvalues.as_slice().to_vec(),
        }
    }

    fn func(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.vals.len(),
            self.vals.iter().map(|&v| f(v)),
        ));
        &self.q * d * self.q.transpose()
    }

    fn min(&self) -> f64 {
        self.vals.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky (backward
/// stable, unlike roundtripping through an eigendecomposition).
fn spd_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone()
        .cholesky()
        .expect("matrix is SPD by construction")
        .inverse()
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Derived matrices for one splitting instance: the per-part resolvents
/// S_j = (I + tau^2/eta_j A_j)^{-1}, their weighted average S, the unsplit
/// resolvent L = (I + tau^2 A)^{-1} and the propagator B = S^{1/2}.
pub struct OracleWorkspace {
    pub dim: usize,
    pub tau: f64,
    pub etas: Vec<f64>,
    pub parts: Vec<DMatrix<f64>>,
    pub alphas: Vec<f64>,
    pub a: DMatrix<f64>,
    pub s_parts: Vec<DMatrix<f64>>,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub b: DMatrix<f64>,
    a_eig: SymEig,
    s_eig: SymEig,
}

/// Validates parts and builds every derived matrix.
pub fn build_workspace(
    parts: Vec<DMatrix<f64>>,
    etas: Vec<f64>,
    tau: f64,
) -> Result<OracleWorkspace> {
    if parts.is_empty() || parts.len() != etas.len() {
        return Err(Error::OracleInput("need one weight per part".into()));
    }
    let dim = parts[0].nrows();
    if dim == 0 || dim > 64 {
        return Err(Error::OracleInput(format!("dimension {dim} out of range")));
    }
    let mut alphas = Vec::with_capacity(parts.len());
    for (j, p) in parts.iter().enumerate() {
        if p.nrows() != dim || p.ncols() != dim {
            return Err(Error::OracleInput(format!("part {j} has wrong shape")));
        }
        let scale = p.norm().max(1.0);
        if (p - p.transpose()).norm() > 1e-12 * scale {
            return Err(Error::OracleInput(format!("part {j} not symmetric")));
        }
        let min_eig = SymEig::new(p).min();
        if min_eig <= 0.0 {
            return Err(Error::OracleInput(format!(
                "part {j} not positive definite (min eigenvalue {min_eig})"
            )));
        }
        alphas.push(min_eig);
    }
    let mut a = DMatrix::zeros(dim, dim);
    for p in &parts {
        a += p;
    }
    let tau2 = tau * tau;
    let s_parts: Vec<DMatrix<f64>> = parts
        .iter()
        .zip(&etas)
        .map(|(p, &eta)| spd_inverse(&(DMatrix::identity(dim, dim) + (tau2 / eta) * p)))
        .collect();
    let mut s = DMatrix::zeros(dim, dim);
    for (sj, &eta) in s_parts.iter().zip(&etas) {
        s += eta * sj;
    }
    // symmetrize against roundoff before taking the square root
    let s = 0.5 * (&s + s.transpose());
    let a_eig = SymEig::new(&a);
    let l = spd_inverse(&(DMatrix::identity(dim, dim) + tau2 * &a));
    let s_eig = SymEig::new(&s);
    let b = s_eig.func(|v| v.max(0.0).sqrt());
    Ok(OracleWorkspace {
        dim,
        tau,
        etas,
        parts,
        alphas,
        a,
        s_parts,
        s,
        l,
        b,
        a_eig,
        s_eig,
    })
}

impl OracleWorkspace {
    pub fn m(&self) -> usize {
        self.parts.len()
    }

    /// nu = min_j alpha_j.
    pub fn nu(&self) -> f64 {
        self.alphas.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    fn a_pow(&self, p: f64) -> DMatrix<f64> {
        self.a_eig.func(|v| v.powf(p))
    }

    /// (I - S)^{-1/2}; needs tau > 0 so that S < I strictly.
    fn inv_sqrt_one_minus_s(&self) -> DMatrix<f64> {
        assert!(self.tau > 0.0, "degenerate step: S = I");
        self.s_eig.func(|v| 1.0 / (1.0 - v).max(f64::MIN_POSITIVE).sqrt())
    }

    /// Eigenvalues of the propagator B (clamped at zero).
    pub fn b_spectrum(&self) -> Vec<f64> {
        self.s_eig.vals.iter().map(|&v| v.max(0.0).sqrt()).collect()
    }
}

/// Constants of the a-priori error estimate, recomputable from a workspace.
#[derive(Debug, Clone)]
pub struct BoundConstants {
    /// spectral norms ||A_j A^{-1}||
    pub part_ratios: Vec<f64>,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub nu: f64,
    /// nu^{-1/2} * lipschitz_a
    pub c: f64,
    pub gamma0: f64,
    pub gamma1: f64,
}

impl BoundConstants {
    pub fn new(ws: &OracleWorkspace, lipschitz_a: f64) -> Self {
        let a_inv = ws.a_pow(-1.0);
        let part_ratios: Vec<f64> = ws.parts.iter().map(|p| spectral_norm(&(p * &a_inv))).collect();
        let m = ws.m() as f64;
        let c0: f64 = part_ratios
            .iter()
            .zip(&ws.etas)
            .map(|(&aj, &eta)| aj / eta.sqrt())
            .sum();
        let c1: f64 = part_ratios
            .iter()
            .zip(&ws.etas)
            .map(|(&aj, &eta)| (aj / eta + 1.0) / eta.powf(1.5))
            .sum();
        let c2 = m + c0;
        let c3 = 1.0 / ws.etas[0].sqrt() + m + c0;
        let nu = ws.nu();
        let c = lipschitz_a / nu.sqrt();
        Self {
            part_ratios,
            c0,
            c1,
            c2,
            c3,
            nu,
            c,
            gamma0: 1.0 / nu.sqrt() + c * ws.tau * ws.tau,
            gamma1: 1.0 + c * ws.tau,
        }
    }
}

/// One verification record: signed margin (negative or zero = satisfied,
/// already net of the slack policy).
#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub name: &'static str,
    pub margin: f64,
    pub pass: bool,
}

fn record(name: &'static str, lhs: f64, rhs: f64, scale: f64) -> CheckRecord {
    let allowance = REL_SLACK * rhs.abs().max(scale) + ABS_SLACK * scale.max(1.0);
    let margin = lhs - rhs - allowance;
    CheckRecord {
        name,
        margin,
        pass: margin <= 0.0,
    }
}

/// Identity for the resolvent difference:
/// S - L = tau^2 sum_j eta_j (I - S_j)(eta_j^{-1} A_j A^{-1} - I) A L.
/// Returns the Frobenius residual of left minus right.
pub fn resolvent_difference_residual(ws: &OracleWorkspace) -> f64 {
    let lhs = &ws.s - &ws.l;
    let a_inv = spd_inverse(&ws.a);
    let id = DMatrix::identity(ws.dim, ws.dim);
    let al = &ws.a * &ws.l;
    let mut rhs = DMatrix::zeros(ws.dim, ws.dim);
    for j in 0..ws.m() {
        let eta = ws.etas[j];
        let factor = (&id - &ws.s_parts[j]) * ((1.0 / eta) * (&ws.parts[j] * &a_inv) - &id);
        rhs += eta * factor * &al;
    }
    rhs *= ws.tau * ws.tau;
    (lhs - rhs).norm()
}

/// Checks the resolvent-difference identity within the slack policy. The
/// residual floor is eigensolver roundoff, which scales with the operator
/// norm rather than with ||S - L|| (itself O(tau^4)), so the allowance is
/// taken relative to ||A||.
pub fn check_resolvent_identity(ws: &OracleWorkspace) -> CheckRecord {
    let residual = resolvent_difference_residual(ws);
    let scale = ws.a.norm().max(1.0);
    record("resolvent_identity", residual, 0.0, scale)
}

fn random_vector(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.gen_range(-1.0..1.0)))
}

/// The four weighted-resolvent norm inequalities, sampled on random probes.
/// Returns the worst record per inequality.
pub fn check_resolvent_inequalities(
    ws: &OracleWorkspace,
    rng: &mut impl Rng,
    n_probes: usize,
) -> Vec<CheckRecord> {
    let k = BoundConstants::new(ws, 0.0);
    let m = ws.m() as f64;
    let tau = ws.tau;
    let w = ws.inv_sqrt_one_minus_s();
    let a_half = ws.a_pow(0.5);
    let a_neg_half = ws.a_pow(-0.5);
    let l_half = ws.a_eig.func(|v| (1.0 + tau * tau * v).sqrt().recip());
    let al = &ws.a * &ws.l;
    let s_minus_l = &ws.s - &ws.l;

    let mut worst: Vec<CheckRecord> = Vec::new();
    let mut push = |r: CheckRecord| {
        if let Some(existing) = worst.iter_mut().find(|e| e.name == r.name) {
            if r.margin > existing.margin {
                *existing = r;
            }
        } else {
            worst.push(r);
        }
    };
    for _ in 0..n_probes {
        let f = random_vector(rng, ws.dim);
        let scale = f.norm();
        // ||(I-S)^{-1/2} A L f|| <= tau^{-1} (m ||A^{1/2} L f|| + c0 ||A^{1/2} L^{1/2} f||)
        let lhs = (&w * &al * &f).norm();
        let rhs = (m * (&a_half * &ws.l * &f).norm() + k.c0 * (&a_half * &l_half * &f).norm()) / tau;
        push(record("resolvent_smoothing", lhs, rhs, scale));
        // ||(I-S)^{-1/2} (S-L) f|| <= tau^2 c1 ||A L f||
        let lhs = (&w * &s_minus_l * &f).norm();
        let rhs = tau * tau * k.c1 * (&al * &f).norm();
        push(record("resolvent_difference_bound", lhs, rhs, scale));
        // ||(I-S)^{-1/2} L A u|| <= tau^{-1} c2 ||A^{1/2} u||
        let lhs = (&w * &ws.l * &ws.a * &f).norm();
        let rhs = k.c2 / tau * (&a_half * &f).norm();
        push(record("resolvent_gradient_bound", lhs, rhs, scale));
        // ||(I-S)^{-1/2} L f|| <= tau^{-1} c2 ||A^{-1/2} f||
        let lhs = (&w * &ws.l * &f).norm();
        let rhs = k.c2 / tau * (&a_neg_half * &f).norm();
        push(record("resolvent_dual_bound", lhs, rhs, scale));
    }
    worst
}

/// Scalar second-kind Chebyshev values U_0..U_{k_max} at x, by recurrence.
fn chebyshev_row(k_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    let mut prev = 0.0;
    let mut cur = 1.0;
    for _ in 0..=k_max {
        out.push(cur);
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    out
}

/// Norm bounds for polynomials of the propagator, evaluated through the
/// spectrum of B, plus the spectral inclusion
/// Sp(B) in [0, (1 + tau^2 nu)^{-1/2}].
pub fn check_propagator_polynomial_bounds(ws: &OracleWorkspace, k_max: usize) -> Vec<CheckRecord> {
    let nu = ws.nu();
    let tau = ws.tau;
    let spectrum = ws.b_spectrum();
    let rows: Vec<Vec<f64>> = spectrum.iter().map(|&b| chebyshev_row(k_max, b)).collect();

    let sp_limit = (1.0 + tau * tau * nu).sqrt().recip();
    let max_b = spectrum.iter().fold(0.0_f64, |m, &b| m.max(b));
    let mut records = vec![record("spectral_inclusion", max_b, sp_limit, 1.0)];

    let mut worst = [f64::NEG_INFINITY; 4];
    let names = [
        "propagator_scaled_polynomial",
        "propagator_polynomial_damped",
        "propagator_polynomial_difference",
        "propagator_polynomial_difference_rev",
    ];
    let b1_limit = 1.0 / (tau * nu.sqrt());
    for (i, &b) in spectrum.iter().enumerate() {
        let damp = (1.0 - b * b).max(0.0).sqrt();
        for k in 0..=k_max {
            let uk = rows[i][k];
            let ukm1 = if k == 0 { 0.0 } else { rows[i][k - 1] };
            let checks = [
                (b * uk).abs() - b1_limit,
                uk.abs() * damp - 1.0,
                (uk - b * ukm1).abs() - 1.0,
                (b * uk - ukm1).abs() - 1.0,
            ];
            for (w, c) in worst.iter_mut().zip(checks) {
                *w = w.max(c);
            }
        }
    }
    for (name, w) in names.iter().zip(worst) {
        records.push(CheckRecord {
            name,
            margin: w - REL_SLACK - ABS_SLACK,
            pass: w <= REL_SLACK + ABS_SLACK,
        });
    }
    records
}

/// Part-vs-whole order relations: ||A_j^{1/2} u|| <= ||A^{1/2} u|| via
/// quadratic forms, inverse monotonicity (A^{-1} f, f) <= (A_j^{-1} f, f),
/// and the inclusion 0 < S <= (1 + tau^2 nu)^{-1} I.
pub fn check_order_relations(
    ws: &OracleWorkspace,
    rng: &mut impl Rng,
    n_probes: usize,
) -> Vec<CheckRecord> {
    let mut worst_part = f64::NEG_INFINITY;
    let mut worst_inv = f64::NEG_INFINITY;
    let inverses: Vec<DMatrix<f64>> = ws.parts.iter().map(|p| SymEig::new(p).func(|v| 1.0 / v)).collect();
    let a_inv = ws.a_pow(-1.0);
    for _ in 0..n_probes {
        let u = random_vector(rng, ws.dim);
        let n2 = u.norm_squared();
        let qa = (&ws.a * &u).dot(&u);
        let qinv_a = (&a_inv * &u).dot(&u);
        for (p, p_inv) in ws.parts.iter().zip(&inverses) {
            let qp = (p * &u).dot(&u);
            worst_part = worst_part.max((qp - qa) / n2);
            let qinv_p = (p_inv * &u).dot(&u);
            worst_inv = worst_inv.max((qinv_a - qinv_p) / n2);
        }
    }
    let slack = REL_SLACK * spectral_norm(&ws.a).max(1.0) + ABS_SLACK;
    let s_limit = (1.0 + ws.tau * ws.tau * ws.nu()).recip();
    let (s_min, s_max) = ws
        .s_eig
        .vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    vec![
        CheckRecord {
            name: "part_form_dominated",
            margin: worst_part - slack,
            pass: worst_part <= slack,
        },
        CheckRecord {
            name: "inverse_monotone",
            margin: worst_inv - slack,
            pass: worst_inv <= slack,
        },
        record("averaged_resolvent_inclusion_upper", s_max, s_limit, 1.0),
        record("averaged_resolvent_inclusion_lower", -s_min, 0.0, 1.0),
    ]
}

/// Closed-form error representation vs the three-layer recursion
/// z_{k+1} = 2 S z_k - S z_{k-1} + r_k. The closed form is
/// z_{k+1} = B^k U_k(B) z_1 - B^{k+1} U_{k-1}(B) z_0
///           + sum_{i=1}^k B^{k-i} U_{k-i}(B) r_i,
/// evaluated through the spectrum of S. Returns the largest relative
/// mismatch over all steps.
pub fn error_representation_residual(
    ws: &OracleWorkspace,
    z0: &DVector<f64>,
    z1: &DVector<f64>,
    residuals: &[DVector<f64>],
) -> f64 {
    let n = residuals.len();
    let spectrum = ws.b_spectrum();
    let q = &ws.s_eig.q;
    let to_modes = |v: &DVector<f64>| q.transpose() * v;
    let z0_hat = to_modes(z0);
    let z1_hat = to_modes(z1);
    let r_hat: Vec<DVector<f64>> = residuals.iter().map(to_modes).collect();

    // forward recursion in the original space
    let mut prev = z0.clone();
    let mut cur = z1.clone();
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        let next = 2.0 * (&ws.s * &cur) - &ws.s * &prev + &residuals[k - 1];
        // closed form for z_{k+1}
        let mut closed_hat = DVector::zeros(ws.dim);
        for (i, &b) in spectrum.iter().enumerate() {
            let row = chebyshev_row(k, b);
            let mut v = b.powi(k as i32) * row[k] * z1_hat[i];
            v -= b.powi(k as i32 + 1) * row[k - 1] * z0_hat[i];
            for step in 1..=k {
                v += b.powi((k - step) as i32) * row[k - step] * r_hat[step - 1][i];
            }
            closed_hat[i] = v;
        }
        let closed = q * closed_hat;
        let scale = next.norm().max(1.0);
        worst = worst.max((&next - &closed).norm() / scale);
        prev = cur;
        cur = next;
    }
    worst
}

/// A dense linear test problem with a manufactured trajectory, for the
/// a-priori bound check.
pub type TimeFn = std::sync::Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;
pub type StateFn = std::sync::Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

pub struct MatrixProblem {
    pub exact: TimeFn,
    pub exact_ddot: TimeFn,
    pub nonlinearity: StateFn,
    pub lipschitz_a: f64,
}

impl MatrixProblem {
    /// forcing f(t) = u''(t) + A u(t) + M(u(t))
    pub fn forcing(&self, ws: &OracleWorkspace, t: f64) -> DVector<f64> {
        let u = (self.exact)(t);
        (self.exact_ddot)(t) + &ws.a * &u + (self.nonlinearity)(&u)
    }

    /// f~(t) = f(t) - M(u(t)) = u''(t) + A u(t)
    pub fn reduced_forcing(&self, ws: &OracleWorkspace, t: f64) -> DVector<f64> {
        (self.exact_ddot)(t) + &ws.a * (self.exact)(t)
    }
}

/// The data-regularity sum of the a-priori estimate, assembled term by term
/// with trapezoidal quadrature for the modulus-of-continuity integrals.
pub fn error_budget(
    ws: &OracleWorkspace,
    problem: &MatrixProblem,
    consts: &BoundConstants,
    k: usize,
    substeps: usize,
) -> f64 {
    let tau = ws.tau;
    let a_half = ws.a_pow(0.5);
    let a_neg_half = ws.a_pow(-0.5);
    let t_at = |i: i64| i as f64 * tau;
    let a_half_u = |t: f64| &a_half * (problem.exact)(t);
    let a_neg_half_f = |t: f64| &a_neg_half * problem.reduced_forcing(ws, t);

    let mut total = 0.0;
    for i in 1..=k {
        let ti = t_at(i as i64);
        let au = (&ws.a * (problem.exact)(ti)).norm();
        let ft = problem.reduced_forcing(ws, ti).norm();
        total += tau * tau * (consts.c1 * au + consts.c3 * ft);

        let a_half_ui = a_half_u(ti);
        let j_prev = (&a_half_ui - a_half_u(t_at(i as i64 - 1))).norm();
        let j_next = (&a_half_ui - a_half_u(t_at(i as i64 + 1))).norm();
        total += tau * (consts.c1 * j_prev + consts.c2 * j_next);

        // c2 * integral over [t_{i-1}, t_{i+1}] of J_i(t, A^{1/2}u) + J_i(t, A^{-1/2}f~)
        let a_neg_half_fi = a_neg_half_f(ti);
        let lo = t_at(i as i64 - 1);
        let steps = 2 * substeps;
        let dt = 2.0 * tau / steps as f64;
        let integrand = |t: f64| {
            (&a_half_ui - a_half_u(t)).norm() + (&a_neg_half_fi - a_neg_half_f(t)).norm()
        };
        let mut integral = 0.5 * (integrand(lo) + integrand(lo + 2.0 * tau));
        for s in 1..steps {
            integral += integrand(lo + s as f64 * dt);
        }
        total += consts.c2 * integral * dt;
    }
    total
}

/// Outcome of checking the a-priori estimate against a measured trajectory.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    /// max over k of ||z_{k+1}|| / bound_k; <= 1 means the bound held
    pub worst_ratio: f64,
    pub pass: bool,
    /// measured error norms ||z_k||, k = 0..n
    pub errors: Vec<f64>,
    /// the bound value per k (index k-1 holds the bound for z_{k+1})
    pub bounds: Vec<f64>,
}

/// Runs the printed (fully implicit) split scheme on the workspace's
/// matrices and checks
/// ||z_{k+1}|| <= exp(c t_{k-1}) (gamma0 ||dz0/tau|| + gamma1 ||z0|| + budget_k)
/// for every k in 1..=k_max.
pub fn check_apriori_bound(
    ws: &OracleWorkspace,
    problem: &MatrixProblem,
    k_max: usize,
    substeps: usize,
) -> BoundCheck {
    use crate::dense::DenseOperator;
    use crate::scheme::{self, OperatorForm, SchemeConfig};
    use crate::splitting::{ProblemSpec, Splitting};
    use std::sync::Arc;

    let tau = ws.tau;
    let consts = BoundConstants::new(ws, problem.lipschitz_a);

    let parts: Vec<Arc<dyn crate::splitting::SubOperator>> = ws
        .parts
        .iter()
        .map(|p| Arc::new(DenseOperator::new(p.clone()).unwrap()) as Arc<_>)
        .collect();
    let splitting = Splitting::new(parts, ws.etas.clone()).unwrap();

    let u0 = (problem.exact)(0.0);
    let u1 = (problem.exact)(tau);
    // phi1 chosen so v_1 = u(tau) exactly; z_1 = 0 isolates the budget terms
    let phi1 = (&u1 - &u0) / tau;
    let exact = problem.exact.clone();
    let ddot = problem.exact_ddot.clone();
    let nl = problem.nonlinearity.clone();
    let nl2 = problem.nonlinearity.clone();
    let a_mat = ws.a.clone();
    let p = ProblemSpec {
        phi0: DenseOperator::field(u0.as_slice().to_vec()),
        phi1: DenseOperator::field(phi1.as_slice().to_vec()),
        forcing: Box::new(move |t| {
            let u = exact(t);
            let f = ddot(t) + &a_mat * &u + nl(&u);
            DenseOperator::field(f.as_slice().to_vec())
        }),
        nonlinearity: Box::new(move |v| {
            let vec = DVector::from_column_slice(v.values());
            let out = nl2(&vec);
            crate::grid::GridFunction::new(out.as_slice().to_vec(), v.dims(), v.spacing())
        }),
        lipschitz_a: problem.lipschitz_a,
    };
    let cfg = SchemeConfig::new(tau, k_max + 1)
        .unwrap()
        .form(OperatorForm::Implicit);
    let traj = scheme::run(&splitting, &p, &cfg).unwrap();

    let errors: Vec<f64> = traj
        .layers
        .iter()
        .enumerate()
        .map(|(k, layer)| {
            let u = (problem.exact)(k as f64 * tau);
            let diff = DVector::from_column_slice(layer.values()) - u;
            diff.norm()
        })
        .collect();

    // z0 = 0 by construction, so ||z1 - z0|| / tau reduces to ||z1|| / tau
    let dz0_over_tau = errors[1] / tau;
    let z0_norm = errors[0];
    let mut bounds = Vec::with_capacity(k_max);
    let mut worst: f64 = 0.0;
    for k in 1..=k_max {
        let budget = error_budget(ws, problem, &consts, k, substeps);
        let t_km1 = (k as f64 - 1.0) * tau;
        let bound = (consts.c * t_km1).exp()
            * (consts.gamma0 * dz0_over_tau + consts.gamma1 * z0_norm + budget);
        bounds.push(bound);
        worst = worst.max(errors[k + 1] / bound.max(f64::MIN_POSITIVE));
    }
    BoundCheck {
        worst_ratio: worst,
        pass: worst <= 1.0,
        errors,
        bounds,
    }
}

/// One record of the randomized verification suite.
#[derive(Debug, Clone)]
pub struct SuiteRecord {
    pub check: String,
    pub seed: u64,
    pub dim: usize,
    pub m: usize,
    pub tau: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Draws a random splitting: per part, a random orthogonal basis with a
/// positive spectrum in [0.2, 3]; weights from a normalized positive draw.
pub fn random_workspace(seed: u64, dim: usize, m: usize, tau: f64) -> OracleWorkspace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Vec::with_capacity(m);
    for _ in 0..m {
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0_f64));
        let q = g.qr().q();
        let spectrum = DVector::from_iterator(dim, (0..dim).map(|_| rng.gen_range(0.2..3.0_f64)));
        let p = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
        parts.push(0.5 * (&p + p.transpose()));
    }
    let etas = if m == 1 {
        vec![1.0]
    } else {
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0_f64)).collect();
        let sum: f64 = raw.iter().sum();
        let mut etas: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let partial: f64 = etas.iter().take(m - 1).sum();
        etas[m - 1] = 1.0 - partial;
        etas
    };
    build_workspace(parts, etas, tau).expect("random parts are SPD by construction")
}

/// Runs every oracle check over `count` randomized workspaces
/// (dims 2..=16, tau cycling {0.01, 0.1, 1, 10}, m cycling {1, 2, 3}).
pub fn run_suite(seed: u64, count: usize, k_max: usize) -> Vec<SuiteRecord> {
    let taus = [0.01, 0.1, 1.0, 10.0];
    (0..count as u64)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ws_seed = seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(ws_seed ^ 0x5eed);
            let dim = rng.gen_range(2..=16);
            let m = 1 + (i % 3) as usize;
            let tau = taus[(i / 3) as usize % taus.len()];
            let ws = random_workspace(ws_seed, dim, m, tau);
            let mut records: Vec<CheckRecord> = vec![check_resolvent_identity(&ws)];
            records.extend(check_resolvent_inequalities(&ws, &mut rng, 20));
            records.extend(check_propagator_polynomial_bounds(&ws, k_max));
            records.extend(check_order_relations(&ws, &mut rng, 20));
            // closed-form error representation on random residual data
            let z0 = random_vector(&mut rng, dim);
            let z1 = random_vector(&mut rng, dim);
            let rs: Vec<DVector<f64>> = (0..20).map(|_| random_vector(&mut rng, dim)).collect();
            let rep = error_representation_residual(&ws, &z0, &z1, &rs);
            records.push(CheckRecord {
                name: "error_representation",
                margin: rep - REL_SLACK,
                pass: rep <= REL_SLACK,
            });
            records
                .into_iter()
                .map(move |r| SuiteRecord {
                    check: r.name.to_string(),
                    seed: ws_seed,
                    dim,
                    m,
                    tau,
                    margin: r.margin,
                    pass: r.pass,
                })
                .collect::<Vec<_>>()
        })
        .collect()
}
