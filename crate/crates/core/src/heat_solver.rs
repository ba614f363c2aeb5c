//! Forced heat equation `c_t = nu Δc + f` with Dirichlet (`c = g`) or
//! Neumann (`nu ∂c/∂n = g`) data, discretized in space by assembled
//! differentiation blocks and in time by BDF1 to BDF4.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::DiffOperator;
use crate::error::{Error, Result};
use crate::linalg::{bicgstab, gmres, ilu0, CsrMatrix, Ilu0Factors, KrylovConfig};
use crate::metrics::{error_norms, ErrorReport};
use crate::nodeset::NodeSet;

/// `f(x, t)`.
pub type ScalarField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
/// `g(x, n, t)` where `n` is the outward normal at `x`.
pub type BoundaryField = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone)]
pub struct HeatProblem {
    pub nu: f64,
    pub bc: BoundaryKind,
    pub forcing: ScalarField,
    pub boundary: BoundaryField,
    pub exact: Option<ScalarField>,
    /// Initial condition; defaults to the exact solution at `t = 0`.
    pub initial: Option<ScalarField>,
}

impl std::fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatProblem")
            .field("nu", &self.nu)
            .field("bc", &self.bc)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl HeatProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!("diffusivity must be positive, got {}", self.nu)));
        }
        if self.initial.is_none() && self.exact.is_none() {
            return Err(Error::InvalidParameter("problem needs an initial condition or an exact solution".into()));
        }
        Ok(())
    }

    pub fn initial_value(&self, x: &[f64]) -> f64 {
        match (&self.initial, &self.exact) {
            (Some(c0), _) => c0(x, 0.0),
            (None, Some(c)) => c(x, 0.0),
            (None, None) => unreachable!("validated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedDomain {
    /// Neumann data on the unit disk.
    Disk,
    /// Dirichlet data on the unit ball.
    Ball,
}

/// Smooth decaying solutions with matching forcing and boundary data.
pub fn manufactured_problem(domain: ManufacturedDomain, nu: f64) -> HeatProblem {
    match domain {
        ManufacturedDomain::Disk => {
            let c = |x: &[f64], t: f64| 1.0 + (PI * x[0]).sin() * (PI * x[1]).cos() * (-PI * t).exp();
            HeatProblem {
                nu,
                bc: BoundaryKind::Neumann,
                forcing: Arc::new(move |x, t| {
                    PI * (2.0 * PI * nu - 1.0) * (PI * x[0]).sin() * (PI * x[1]).cos() * (-PI * t).exp()
                }),
                boundary: Arc::new(move |x, n, t| {
                    let e = (-PI * t).exp();
                    let cx = PI * (PI * x[0]).cos() * (PI * x[1]).cos() * e;
                    let cy = -PI * (PI * x[0]).sin() * (PI * x[1]).sin() * e;
                    nu * (cx * n[0] + cy * n[1])
                }),
                exact: Some(Arc::new(c)),
                initial: None,
            }
        }
        ManufacturedDomain::Ball => {
            let c = |x: &[f64], t: f64| {
                1.0 + (PI * x[0]).sin() * (PI * x[1]).cos() * (PI * x[2]).sin() * (-PI * t).exp()
            };
            HeatProblem {
                nu,
                bc: BoundaryKind::Dirichlet,
                forcing: Arc::new(move |x, t| {
                    PI * (3.0 * PI * nu - 1.0)
                        * (PI * x[0]).sin()
                        * (PI * x[1]).cos()
                        * (PI * x[2]).sin()
                        * (-PI * t).exp()
                }),
                boundary: Arc::new(move |x, _n, t| c(x, t)),
                exact: Some(Arc::new(c)),
                initial: None,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bdf1,
    Bdf2,
    Bdf3,
    Bdf4,
}

impl Scheme {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Scheme::Bdf1),
            2 => Ok(Scheme::Bdf2),
            3 => Ok(Scheme::Bdf3),
            4 => Ok(Scheme::Bdf4),
            _ => Err(Error::InvalidParameter(format!("BDF order {order} not in 1..=4"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Scheme::Bdf1 => 1,
            Scheme::Bdf2 => 2,
            Scheme::Bdf3 => 3,
            Scheme::Bdf4 => 4,
        }
    }

    /// Coefficient of `Δt` times the right-hand side at the new level.
    pub fn beta(self) -> f64 {
        match self {
            Scheme::Bdf1 => 1.0,
            Scheme::Bdf2 => 2.0 / 3.0,
            Scheme::Bdf3 => 6.0 / 11.0,
            Scheme::Bdf4 => 12.0 / 25.0,
        }
    }

    /// Weights of `C^m, C^{m-1}, ...` in the new level.
    pub fn history(self) -> &'static [f64] {
        match self {
            Scheme::Bdf1 => &[1.0],
            Scheme::Bdf2 => &[4.0 / 3.0, -1.0 / 3.0],
            Scheme::Bdf3 => &[18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0],
            Scheme::Bdf4 => &[48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Unknowns are interior values only; Dirichlet data only.
    Reduced,
    /// Interior and boundary values solved together.
    FullBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Gmres,
    Bicgstab,
}

/// Left-hand side of one scheme, with its ILU(0) factors.
#[derive(Debug, Clone)]
pub struct SteppingMatrix {
    pub scheme: Scheme,
    pub dt: f64,
    pub nu: f64,
    pub bc: BoundaryKind,
    pub formulation: Formulation,
    pub matrix: CsrMatrix,
    pub ilu: Ilu0Factors,
}

/// Neumann problems always use the full block system. Dirichlet problems use
/// the reduced system unless `formulation` asks for the full one, in which
/// case the boundary rows are the identity.
pub fn build_stepping_matrix(
    d: &DiffOperator,
    nu: f64,
    dt: f64,
    scheme: Scheme,
    bc: BoundaryKind,
    formulation: Formulation,
) -> Result<SteppingMatrix> {
    if !(dt > 0.0) || !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and nu > 0 (got {dt}, {nu})")));
    }
    let a = -scheme.beta() * nu * dt;
    let formulation = match bc {
        BoundaryKind::Neumann => Formulation::FullBlock,
        BoundaryKind::Dirichlet => formulation,
    };
    let matrix = match (bc, formulation) {
        (BoundaryKind::Dirichlet, Formulation::Reduced) => d.l_ii.scaled_plus_identity(a, 1.0),
        (BoundaryKind::Dirichlet, Formulation::FullBlock) => CsrMatrix::from_blocks(
            &d.l_ii.scaled_plus_identity(a, 1.0),
            &d.l_ib.scaled(a),
            &CsrMatrix::zeros(d.n_boundary(), d.n_interior()),
            &CsrMatrix::identity(d.n_boundary()),
        )?,
        (BoundaryKind::Neumann, _) => CsrMatrix::from_blocks(
            &d.l_ii.scaled_plus_identity(a, 1.0),
            &d.l_ib.scaled(a),
            &d.b_bi,
            &d.b_bb,
        )?,
    };
    let ilu = ilu0(&matrix)?;
    Ok(SteppingMatrix {
        scheme,
        dt,
        nu,
        bc,
        formulation,
        matrix,
        ilu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub krylov: KrylovConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Gmres,
            krylov: KrylovConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperState {
    pub time: f64,
    pub dt: f64,
    /// Full-length solutions, newest first.
    pub history: Vec<Vec<f64>>,
    /// Krylov iterations of every step taken.
    pub iterations: Vec<usize>,
    /// Final relative residual of every step taken.
    pub residuals: Vec<f64>,
}

impl StepperState {
    pub fn new(initial: Vec<f64>, dt: f64) -> Self {
        Self {
            time: 0.0,
            dt,
            history: vec![initial],
            iterations: Vec::new(),
            residuals: Vec::new(),
        }
    }

    pub fn current(&self) -> &[f64] {
        &self.history[0]
    }
}

fn boundary_values(ns: &NodeSet, problem: &HeatProblem, t: f64) -> Vec<f64> {
    (ns.n_interior()..ns.len())
        .map(|b| (problem.boundary)(ns.point(b), ns.normal(b).unwrap(), t))
        .collect()
}

/// One step of `sm.scheme`, warm-started from the current solution.
pub fn advance(
    state: &mut StepperState,
    sm: &SteppingMatrix,
    problem: &HeatProblem,
    ns: &NodeSet,
    d: &DiffOperator,
    solver: &SolverConfig,
) -> Result<()> {
    let coeffs = sm.scheme.history();
    if state.history.len() < coeffs.len() {
        return Err(Error::InvalidParameter(format!(
            "BDF{} needs {} history levels, have {}",
            sm.scheme.order(),
            coeffs.len(),
            state.history.len()
        )));
    }
    if (state.dt - sm.dt).abs() > 1e-14 * sm.dt {
        return Err(Error::InvalidParameter("state and stepping matrix use different time steps".into()));
    }
    let ni = ns.n_interior();
    let t1 = state.time + sm.dt;
    let bdt = sm.scheme.beta() * sm.dt;
    let mut rhs_i = vec![0.0; ni];
    for (a, level) in coeffs.iter().zip(&state.history) {
        for (r, c) in rhs_i.iter_mut().zip(&level[..ni]) {
            *r += a * c;
        }
    }
    for (i, r) in rhs_i.iter_mut().enumerate() {
        *r += bdt * (problem.forcing)(ns.point(i), t1);
    }
    let g = boundary_values(ns, problem, t1);
    let full = sm.formulation == Formulation::FullBlock;
    let (rhs, x0) = if full {
        let mut rhs = rhs_i;
        rhs.extend_from_slice(&g);
        (rhs, state.current().to_vec())
    } else {
        let lg = d.l_ib.spmv(&g)?;
        for (r, v) in rhs_i.iter_mut().zip(&lg) {
            *r += bdt * sm.nu * v;
        }
        (rhs_i, state.current()[..ni].to_vec())
    };
    let solved = match solver.kind {
        SolverKind::Gmres => gmres(&sm.matrix, &sm.ilu, &rhs, &x0, &solver.krylov),
        SolverKind::Bicgstab => bicgstab(&sm.matrix, &sm.ilu, &rhs, &x0, &solver.krylov),
    };
    let (x, info) = solved.map_err(|e| Error::TimeStep {
        time: t1,
        source: Box::new(e),
    })?;
    let next = if full {
        x
    } else {
        let mut c = x;
        c.extend_from_slice(&g);
        c
    };
    state.history.insert(0, next);
    state.history.truncate(4);
    state.time = t1;
    state.iterations.push(info.iterations);
    state.residuals.push(info.final_residual());
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub time: f64,
    pub values: Vec<f64>,
    pub errors: Option<ErrorReport>,
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

/// How the first `order - 1` history levels are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// One step each of BDF1, BDF2, ... at the full step size.
    SingleStep,
    /// The same start on a step of `dt / k`, continued with the target scheme
    /// until the missing levels are reached. The start-up error shrinks by
    /// roughly `k^2`.
    Substeps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepping {
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub formulation: Formulation,
    pub solver: SolverConfig,
    pub bootstrap: Bootstrap,
}

impl TimeStepping {
    /// BDF4 with the reduced Dirichlet system and ILU(0)-preconditioned GMRES.
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            scheme: Scheme::Bdf4,
            formulation: Formulation::Reduced,
            solver: SolverConfig::default(),
            bootstrap: Bootstrap::SingleStep,
        }
    }
}

fn stepping_matrices(
    problem: &HeatProblem,
    d: &DiffOperator,
    dt: f64,
    order: usize,
    formulation: Formulation,
) -> Result<Vec<SteppingMatrix>> {
    (1..=order)
        .map(|o| build_stepping_matrix(d, problem.nu, dt, Scheme::from_order(o)?, problem.bc, formulation))
        .collect()
}

/// Integrates from the initial condition to `t_final`, taking one step each
/// of the lower-order schemes before switching to the target scheme.
pub fn solve_to(
    problem: &HeatProblem,
    ns: &NodeSet,
    d: &DiffOperator,
    cfg: &TimeStepping,
) -> Result<HeatSolution> {
    problem.validate()?;
    if d.n_interior() != ns.n_interior() || d.n_boundary() != ns.n_boundary() {
        return Err(Error::ShapeMismatch("operator and node set sizes differ".into()));
    }
    if !(cfg.dt > 0.0) || cfg.t_final < 0.0 {
        return Err(Error::InvalidParameter("need dt > 0 and T >= 0".into()));
    }
    let steps_f = cfg.t_final / cfg.dt;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "T = {} is not a whole number of steps of {}",
            cfg.t_final, cfg.dt
        )));
    }
    let order = cfg.scheme.order();
    if steps > 0 && steps < order {
        return Err(Error::InvalidParameter(format!(
            "{steps} steps cannot bootstrap BDF{order}"
        )));
    }
    let initial: Vec<f64> = (0..ns.len()).map(|i| problem.initial_value(ns.point(i))).collect();
    let mut state = StepperState::new(initial, cfg.dt);
    if steps > 0 {
        let matrices = stepping_matrices(problem, d, cfg.dt, order, cfg.formulation)?;
        let mut first = 0;
        if let Bootstrap::Substeps(k) = cfg.bootstrap {
            if k == 0 {
                return Err(Error::InvalidParameter("bootstrap needs at least one substep".into()));
            }
            let fine_dt = cfg.dt / k as f64;
            let fine = stepping_matrices(problem, d, fine_dt, order, cfg.formulation)?;
            let mut fs = StepperState::new(state.history[0].clone(), fine_dt);
            let mut levels = vec![state.history[0].clone()];
            for j in 0..(order - 1) * k {
                advance(&mut fs, &fine[j.min(order - 1)], problem, ns, d, &cfg.solver)?;
                if (j + 1) % k == 0 {
                    levels.insert(0, fs.history[0].clone());
                }
            }
            first = order - 1;
            state.history = levels;
            state.time = first as f64 * cfg.dt;
            state.iterations = fs.iterations;
            state.residuals = fs.residuals;
        }
        for step in first..steps {
            let sm = &matrices[step.min(order - 1)];
            advance(&mut state, sm, problem, ns, d, &cfg.solver)?;
        }
        // remove accumulated rounding in the clock
        state.time = steps as f64 * cfg.dt;
    }
    let values = state.history.swap_remove(0);
    let errors = match &problem.exact {
        Some(c) => {
            let exact: Vec<f64> = (0..ns.len()).map(|i| c(ns.point(i), state.time)).collect();
            Some(error_norms(&exact, &values)?)
        }
        None => None,
    };
    Ok(HeatSolution {
        time: state.time,
        values,
        errors,
        iterations: state.iterations,
        residuals: state.residuals,
    })
}
