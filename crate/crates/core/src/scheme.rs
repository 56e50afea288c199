//! Three-layer parallel decomposition time stepper.
//!
//! Per step, m independent shifted sub-problems are solved (concurrently when
//! a thread pool is available) and combined as the eta-weighted average, in
//! ascending part order so results do not depend on thread count. The classic
//! unsplit implicit scheme is provided as a comparison baseline.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::splitting::{ProblemSpec, Splitting, SubOperator};

/// How the operator term of each sub-problem is treated.
///
/// `Implicit` applies A_j to the new layer only:
///   eta_j (y - 2 v_k + v_{k-1}) / tau^2 + A_j y = delta_{1j} (f(t_k) - M(v_k)),
/// which is globally first-order accurate. `Averaged` applies A_j to the
/// mean of the new and oldest layers,
///   eta_j (y - 2 v_k + v_{k-1}) / tau^2 + A_j (y + v_{k-1}) / 2 = delta_{1j} (...),
/// which restores second order while keeping the same resolvent family and
/// unconditional stability. `Averaged` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorForm {
    Implicit,
    #[default]
    Averaged,
}

/// Time discretization parameters.
#[derive(Debug, Clone, Copy)]
pub struct SchemeConfig {
    pub tau: f64,
    pub n_steps: usize,
    pub t_final: f64,
    pub form: OperatorForm,
    /// Replace the first-order start v_1 = phi0 + tau*phi1 by a Taylor
    /// correction using the equation at t = 0. Off by default.
    pub corrected_start: bool,
    /// Keep the whole trajectory (analysis mode) instead of a rolling pair.
    pub store_history: bool,
}

impl SchemeConfig {
    pub fn new(tau: f64, n_steps: usize) -> Result<Self> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        if n_steps < 2 {
            return Err(Error::Config(format!(
                "need more than one step, got {n_steps}"
            )));
        }
        Ok(Self {
            tau,
            n_steps,
            t_final: tau * n_steps as f64,
            form: OperatorForm::default(),
            corrected_start: false,
            store_history: true,
        })
    }

    /// As [`Self::new`] but checks tau * n = T to 1e-12.
    pub fn with_final_time(tau: f64, n_steps: usize, t_final: f64) -> Result<Self> {
        let cfg = Self::new(tau, n_steps)?;
        if (cfg.t_final - t_final).abs() > 1e-12 * t_final.abs().max(1.0) {
            return Err(Error::Config(format!(
                "tau * n = {} does not reach t_final = {t_final}",
                cfg.t_final
            )));
        }
        Ok(Self { t_final, ..cfg })
    }

    pub fn form(mut self, form: OperatorForm) -> Self {
        self.form = form;
        self
    }

    pub fn store_history(mut self, on: bool) -> Self {
        self.store_history = on;
        self
    }

    pub fn corrected_start(mut self, on: bool) -> Self {
        self.corrected_start = on;
        self
    }
}

/// Rolling three-layer state: v_{k-1}, v_k and the step index.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub v_prev: GridFunction,
    pub v_curr: GridFunction,
    pub k: usize,
}

impl SchemeState {
    pub fn time(&self, cfg: &SchemeConfig) -> f64 {
        self.k as f64 * cfg.tau
    }
}

/// v_0 = phi0, v_1 = phi0 + tau*phi1, k = 1.
pub fn initialize(p: &ProblemSpec, cfg: &SchemeConfig) -> SchemeState {
    let v_prev = p.phi0.clone();
    let mut v_curr = p.phi0.clone();
    v_curr
        .axpy(cfg.tau, &p.phi1)
        .expect("phi0/phi1 on the same grid");
    SchemeState {
        v_prev,
        v_curr,
        k: 1,
    }
}

/// Start with the optional Taylor-corrected first layer,
/// v_1 = phi0 + tau*phi1 + tau^2/2 * (f(0) - M(phi0) - A phi0).
pub fn initialize_with(p: &ProblemSpec, s: &Splitting, cfg: &SchemeConfig) -> SchemeState {
    let mut state = initialize(p, cfg);
    if cfg.corrected_start {
        let mut accel = (p.forcing)(0.0);
        accel.axpy(-1.0, &(p.nonlinearity)(&p.phi0)).unwrap();
        accel.axpy(-1.0, &s.apply_full(&p.phi0)).unwrap();
        state
            .v_curr
            .axpy(0.5 * cfg.tau * cfg.tau, &accel)
            .unwrap();
    }
    state
}

/// Solves the j-th sub-problem for the next layer. `rhs_source` is
/// f(t_k) - M(v_k), evaluated once per step; the Kronecker factor routes it
/// to part j = 0 only (1-based j = 1 in the scheme's notation).
pub fn sub_solve(
    j: usize,
    s: &Splitting,
    cfg: &SchemeConfig,
    state: &SchemeState,
    rhs_source: &GridFunction,
) -> Result<GridFunction> {
    debug_assert!(j < s.m());
    let part = s.part(j);
    let sigma = cfg.tau * cfg.tau / s.eta(j);
    let mut rhs = GridFunction::lin_comb(2.0, &state.v_curr, -1.0, &state.v_prev)?;
    let (shift, forced) = match cfg.form {
        OperatorForm::Implicit => (sigma, sigma),
        OperatorForm::Averaged => {
            rhs.axpy(-0.5 * sigma, &part.apply(&state.v_prev))?;
            (0.5 * sigma, sigma)
        }
    };
    if j == 0 {
        rhs.axpy(forced, rhs_source)?;
    }
    part.solve_shifted(shift, &rhs).map_err(|e| Error::Solve {
        part: j,
        step: state.k,
        reason: e.to_string(),
    })
}

/// One step of the parallel decomposition scheme: m independent sub-solves,
/// then the weighted average accumulated in ascending part order.
pub fn step(s: &Splitting, p: &ProblemSpec, cfg: &SchemeConfig, state: &SchemeState) -> Result<SchemeState> {
    let t_k = state.time(cfg);
    let mut rhs_source = (p.forcing)(t_k);
    rhs_source.axpy(-1.0, &(p.nonlinearity)(&state.v_curr))?;

    let solutions: Vec<GridFunction> = (0..s.m())
        .into_par_iter()
        .map(|j| sub_solve(j, s, cfg, state, &rhs_source))
        .collect::<Result<_>>()?;

    let mut v_next = GridFunction::zeros_like(&state.v_curr);
    for (j, y) in solutions.iter().enumerate() {
        v_next.axpy(s.eta(j), y)?;
    }
    Ok(SchemeState {
        v_prev: state.v_curr.clone(),
        v_curr: v_next,
        k: state.k + 1,
    })
}

/// One step of the classic unsplit implicit scheme with the whole operator A.
pub fn baseline_step(
    a: &dyn SubOperator,
    p: &ProblemSpec,
    cfg: &SchemeConfig,
    state: &SchemeState,
) -> Result<SchemeState> {
    let t_k = state.time(cfg);
    let tau2 = cfg.tau * cfg.tau;
    let mut rhs = GridFunction::lin_comb(2.0, &state.v_curr, -1.0, &state.v_prev)?;
    let mut source = (p.forcing)(t_k);
    source.axpy(-1.0, &(p.nonlinearity)(&state.v_curr))?;
    let shift = match cfg.form {
        OperatorForm::Implicit => tau2,
        OperatorForm::Averaged => {
            rhs.axpy(-0.5 * tau2, &a.apply(&state.v_prev))?;
            0.5 * tau2
        }
    };
    rhs.axpy(tau2, &source)?;
    let v_next = a.solve_shifted(shift, &rhs).map_err(|e| Error::Solve {
        part: 0,
        step: state.k,
        reason: e.to_string(),
    })?;
    Ok(SchemeState {
        v_prev: state.v_curr.clone(),
        v_curr: v_next,
        k: state.k + 1,
    })
}

/// Computed trajectory. In analysis mode all n+1 layers are retained,
/// otherwise only the final pair.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub layers: Vec<GridFunction>,
    pub tau: f64,
    pub full_history: bool,
}

impl Trajectory {
    pub fn final_layer(&self) -> &GridFunction {
        self.layers.last().expect("at least two layers")
    }
}

fn run_with(
    cfg: &SchemeConfig,
    init: SchemeState,
    mut advance: impl FnMut(&SchemeState) -> Result<SchemeState>,
) -> Result<Trajectory> {
    let mut layers = Vec::new();
    if cfg.store_history {
        layers.push(init.v_prev.clone());
        layers.push(init.v_curr.clone());
    }
    let mut state = init;
    while state.k < cfg.n_steps {
        state = advance(&state)?;
        if cfg.store_history {
            layers.push(state.v_curr.clone());
        }
    }
    if !cfg.store_history {
        layers.push(state.v_prev);
        layers.push(state.v_curr);
    }
    Ok(Trajectory {
        layers,
        tau: cfg.tau,
        full_history: cfg.store_history,
    })
}

/// Runs the split scheme for n steps from the standard (or corrected) start.
pub fn run(s: &Splitting, p: &ProblemSpec, cfg: &SchemeConfig) -> Result<Trajectory> {
    let init = initialize_with(p, s, cfg);
    run_with(cfg, init, |state| step(s, p, cfg, state))
}

/// Runs the unsplit baseline scheme.
pub fn run_baseline(a: &dyn SubOperator, p: &ProblemSpec, cfg: &SchemeConfig) -> Result<Trajectory> {
    let init = initialize(p, cfg);
    run_with(cfg, init, |state| baseline_step(a, p, cfg, state))
}
