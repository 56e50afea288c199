//! Additive splitting A = sum A_j and the contract every operator backend
//! must satisfy.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// One self-adjoint, positive definite part A_j of the splitting.
///
/// Implementations must be usable from several threads at once for
/// `apply`/`solve_shifted`; no interior mutation during solves beyond
/// synchronized caches.
pub trait SubOperator: Send + Sync {
    /// Action of A_j on a field.
    fn apply(&self, u: &GridFunction) -> GridFunction;

    /// Exact solve of (I + shift * A_j) w = rhs, shift >= 0.
    fn solve_shifted(&self, shift: f64, rhs: &GridFunction) -> Result<GridFunction>;

    /// Lower spectral bound alpha_j with (A_j u, u) >= alpha_j ||u||^2.
    fn alpha(&self) -> f64;
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// The family {A_j, eta_j}: parts plus the weight simplex.
pub struct Splitting {
    parts: Vec<Arc<dyn SubOperator>>,
    etas: Vec<f64>,
}

impl Splitting {
    /// Builds a splitting, validating the weight simplex: sum eta_j = 1
    /// (to 1e-12), 0 < eta_j < 1 for m > 1, eta_1 = 1 for m = 1.
    pub fn new(parts: Vec<Arc<dyn SubOperator>>, etas: Vec<f64>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Config("splitting needs at least one part".into()));
        }
        if parts.len() != etas.len() {
            return Err(Error::Config(format!(
                "{} parts but {} weights",
                parts.len(),
                etas.len()
            )));
        }
        let m = parts.len();
        for (index, &eta) in etas.iter().enumerate() {
            let ok = if m == 1 {
                eta == 1.0
            } else {
                eta > 0.0 && eta < 1.0
            };
            if !ok {
                return Err(Error::InvalidWeights {
                    index,
                    reason: format!("eta = {eta} out of range for m = {m}"),
                });
            }
        }
        let sum: f64 = etas.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights {
                index: 0,
                reason: format!("weights sum to {sum}, residual {}", (sum - 1.0).abs()),
            });
        }
        Ok(Self { parts, etas })
    }

    /// Equal weights 1/m.
    pub fn uniform(parts: Vec<Arc<dyn SubOperator>>) -> Result<Self> {
        let m = parts.len();
        let mut etas = vec![1.0 / m as f64; m];
        // make the sum exactly 1 regardless of rounding
        let partial: f64 = etas.iter().take(m - 1).sum();
        etas[m - 1] = 1.0 - partial;
        Self::new(parts, etas)
    }

    pub fn m(&self) -> usize {
        self.parts.len()
    }

    pub fn part(&self, j: usize) -> &dyn SubOperator {
        self.parts[j].as_ref()
    }

    pub fn eta(&self, j: usize) -> f64 {
        self.etas[j]
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    /// nu = min_j alpha_j.
    pub fn nu(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.alpha())
            .fold(f64::INFINITY, f64::min)
    }

    /// Action of the whole operator A = sum A_j.
    pub fn apply_full(&self, u: &GridFunction) -> GridFunction {
        let mut out = self.parts[0].apply(u);
        for p in &self.parts[1..] {
            out.axpy(1.0, &p.apply(u)).expect("parts share the grid");
        }
        out
    }
}

/// Sampled residuals from checking a splitting against its contract.
#[derive(Debug, Clone)]
pub struct SplittingDiagnostics {
    pub weight_sum_residual: f64,
    /// max over samples of |(A_j u, v) - (u, A_j v)| / (||u|| ||v||), per part
    pub symmetry_residuals: Vec<f64>,
    /// min over samples of (A_j u, u)/||u||^2 - alpha_j, per part
    pub positivity_margins: Vec<f64>,
}

impl SplittingDiagnostics {
    pub fn passed(&self) -> bool {
        self.weight_sum_residual <= WEIGHT_SUM_TOL
            && self.symmetry_residuals.iter().all(|r| *r <= 1e-10)
            && self.positivity_margins.iter().all(|m| *m >= -1e-10)
    }
}

/// Samples random fields on the given grid and reports symmetry/positivity
/// residuals for every part. Weight violations were already rejected by
/// [`Splitting::new`]; the residual is reported for completeness.
pub fn validate_splitting(
    s: &Splitting,
    dims: [usize; 2],
    spacing: [f64; 2],
    rng: &mut impl Rng,
    n_samples: usize,
) -> SplittingDiagnostics {
    let random_field = |rng: &mut dyn rand::RngCore| {
        let values = (0..dims[0] * dims[1])
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        GridFunction::new(values, dims, spacing)
    };
    let mut symmetry_residuals = vec![0.0_f64; s.m()];
    let mut positivity_margins = vec![f64::INFINITY; s.m()];
    for _ in 0..n_samples {
        let u = random_field(rng);
        let v = random_field(rng);
        for j in 0..s.m() {
            let part = s.part(j);
            let au = part.apply(&u);
            let av = part.apply(&v);
            let lhs = au.inner_product(&v).unwrap();
            let rhs = u.inner_product(&av).unwrap();
            let scale = (u.norm() * v.norm()).max(1e-300) * part.alpha().max(1.0);
            let sym = (lhs - rhs).abs() / scale;
            symmetry_residuals[j] = symmetry_residuals[j].max(sym);
            let quad = au.inner_product(&u).unwrap();
            let nn = u.inner_product(&u).unwrap().max(1e-300);
            positivity_margins[j] = positivity_margins[j].min(quad / nn - part.alpha());
        }
    }
    SplittingDiagnostics {
        weight_sum_residual: (s.etas().iter().sum::<f64>() - 1.0).abs(),
        symmetry_residuals,
        positivity_margins,
    }
}

/// Problem data: initial layers, forcing, nonlinearity.
pub struct ProblemSpec {
    pub phi0: GridFunction,
    pub phi1: GridFunction,
    pub forcing: Box<dyn Fn(f64) -> GridFunction + Send + Sync>,
    pub nonlinearity: Box<dyn Fn(&GridFunction) -> GridFunction + Send + Sync>,
    pub lipschitz_a: f64,
}

impl ProblemSpec {
    /// Homogeneous problem on the shape of `phi0`: f = 0, M = 0.
    pub fn homogeneous(phi0: GridFunction, phi1: GridFunction) -> Self {
        let dims = phi0.dims();
        let spacing = phi0.spacing();
        Self {
            phi0,
            phi1,
            forcing: Box::new(move |_| GridFunction::zeros(dims, spacing)),
            nonlinearity: Box::new(GridFunction::zeros_like),
            lipschitz_a: 0.0,
        }
    }

    /// Advisory sampled check of the Lipschitz constant on random pairs.
    /// Returns the largest observed ratio ||M(u)-M(v)|| / ||u-v||.
    pub fn sampled_lipschitz_ratio(&self, rng: &mut impl Rng, n_samples: usize) -> f64 {
        let dims = self.phi0.dims();
        let spacing = self.phi0.spacing();
        let mut worst = 0.0_f64;
        for _ in 0..n_samples {
            let u = GridFunction::new(
                (0..dims[0] * dims[1]).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                dims,
                spacing,
            );
            let v = GridFunction::new(
                (0..dims[0] * dims[1]).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                dims,
                spacing,
            );
            let num = (self.nonlinearity)(&u)
                .sub(&(self.nonlinearity)(&v))
                .unwrap()
                .norm();
            let den = u.sub(&v).unwrap().norm();
            if den > 0.0 {
                worst = worst.max(num / den);
            }
        }
        worst
    }
}
