//! Time stepping for Caputo systems D^α x = f(t, x), 0 < α < 1.
//!
//! The implicit schemes advance the full-term recursion
//!
//! ω₀ xₙ + Σ_{j=1}^{n−1} ω_{n−j} x_j + δₙ x₀ = h^α f(tₙ, xₙ),
//!
//! solving each step with a modified Newton iteration: the matrix
//! ω₀I − h^α ∂f/∂x is factorized once and reused across steps until the
//! iteration stalls, which makes constant-Jacobian problems (discretized
//! diffusion) cost one LU for the whole run. Damping by step halving and an
//! optional fixed-point fallback cover the rough spots; a singular Newton
//! matrix degrades to a damped fixed-point update instead of aborting.
//!
//! The explicit fractional Adams–Bashforth–Moulton method is included as
//! the fragile baseline: one predictor pass with rectangle weights, one
//! corrector pass with trapezoid-of-powers weights. Blow-up past
//! [`OVERFLOW_LIMIT`] is an expected, recorded outcome, not a panic.
//!
//! Every trajectory keeps its full history (desk-scale N, no windowing),
//! with tₙ = n·h formed by multiplication so grids do not drift.

use crate::weights::{
    bdf2_weights, gl_weights, l1_weights, Alpha, QiaTables, SchemeKind, SchemeWeights,
    WeightsError,
};
use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;
use thiserror::Error;

/// States whose Euclidean norm passes this threshold (or stop being
/// finite) are classified as numerical blow-up.
pub const OVERFLOW_LIMIT: f64 = 1e150;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("initial state has length {got}, problem dimension is {dim}")]
    DimensionMismatch { dim: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Right-hand side and optional structure metadata of one Caputo system.
///
/// The declared one-sided Lipschitz constant and dissipativity pair are
/// advisory: diagnostics and stability-ratio computations read them, the
/// stepper itself never assumes them.
pub struct FOdeProblem {
    dimension: usize,
    rhs: Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>,
    jacobian: Option<Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>>,
    lambda_one_sided: Option<f64>,
    dissipativity: Option<(f64, f64)>,
}

impl FOdeProblem {
    pub fn new(
        dimension: usize,
        rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(dimension >= 1, "dimension must be at least 1");
        Self {
            dimension,
            rhs: Box::new(rhs),
            jacobian: None,
            lambda_one_sided: None,
            dissipativity: None,
        }
    }

    /// Analytic Jacobian, written row-major into a d² slice.
    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(jac));
        self
    }

    /// Declares ⟨f(t,x)−f(t,y), x−y⟩ ≤ λ‖x−y‖².
    pub fn with_one_sided_lipschitz(mut self, lambda: f64) -> Self {
        assert!(lambda.is_finite());
        self.lambda_one_sided = Some(lambda);
        self
    }

    /// Declares ⟨f(t,x), x⟩ ≤ a − b‖x‖² with a ≥ 0, b > 0.
    pub fn with_dissipativity(mut self, a: f64, b: f64) -> Self {
        assert!(a >= 0.0 && b > 0.0, "need a ≥ 0 and b > 0, got ({a}, {b})");
        self.dissipativity = Some((a, b));
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval_rhs(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.rhs)(t, x, out);
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn lambda_one_sided(&self) -> Option<f64> {
        self.lambda_one_sided
    }

    pub fn dissipativity(&self) -> Option<(f64, f64)> {
        self.dissipativity
    }

    /// Analytic Jacobian when supplied, forward differences otherwise
    /// (step 1e−7·(1+|x_i|) per column).
    pub fn jacobian_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dimension;
        debug_assert_eq!(out.len(), d * d);
        if let Some(jac) = &self.jacobian {
            jac(t, x, out);
            return;
        }
        let mut base = vec![0.0; d];
        self.eval_rhs(t, x, &mut base);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        for j in 0..d {
            let step = 1e-7 * (1.0 + x[j].abs());
            xp[j] = x[j] + step;
            self.eval_rhs(t, &xp, &mut fp);
            xp[j] = x[j];
            for i in 0..d {
                out[i * d + j] = (fp[i] - base[i]) / step;
            }
        }
    }
}

/// What to do when the damped Newton iteration stalls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// keep Newton, but refresh the Jacobian aggressively
    DampedNewton,
    /// switch to x ← (h^α f(tₙ,x) − history)/ω₀
    FixedPoint,
}

/// Step size, horizon and inner-solve knobs.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub h: f64,
    pub n_steps: usize,
    /// residual tolerance, scaled internally by max(1, ‖x‖)
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub fallback: Fallback,
}

impl SolverConfig {
    pub fn new(h: f64, n_steps: usize) -> Self {
        Self {
            h,
            n_steps,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            fallback: Fallback::DampedNewton,
        }
    }

    pub fn with_fallback(mut self, fallback: Fallback) -> Self {
        self.fallback = fallback;
        self
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(SolverError::BadConfig(format!("h = {}", self.h)));
        }
        if self.n_steps == 0 {
            return Err(SolverError::BadConfig("n_steps = 0".into()));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(SolverError::BadConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Terminal condition of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Completed,
    /// the implicit solve at `step` did not converge
    NewtonFailure { step: usize },
    /// ‖x‖ crossed [`OVERFLOW_LIMIT`] at `step`
    Overflow { step: usize },
}

/// Counters and events from the inner solves.
#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    pub total_newton_iters: usize,
    pub jacobian_refreshes: usize,
    /// steps on which a fallback path (fixed point or singular-matrix
    /// damped update) was engaged
    pub fallback_steps: Vec<usize>,
}

/// Uniform-grid solution record. `times[n] = n·h`; `states` holds x₀ and
/// every accepted step; `residuals[n]` is the implicit residual norm of
/// step n (zero for x₀ and for explicit schemes).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub status: SolveStatus,
    pub diagnostics: SolveDiagnostics,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory always holds x0")
    }

    pub fn completed(&self) -> bool {
        self.status == SolveStatus::Completed
    }

    /// Euclidean norms ‖xₙ‖ along the trajectory.
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| norm(s)).collect()
    }
}

/// Convolution of a step-n row with the stored history, x_n term excluded:
///
/// out_i = Σ_{k=1}^{n−1} lag_weights[k−1]·x_{n−k,i} + x0_weight·x_{0,i},
///
/// where `history` is the flat concatenation of x_0..x_{n−1} (n·dim reals).
pub fn history_dot(
    lag_weights: &[f64],
    x0_weight: f64,
    history: &[f64],
    dim: usize,
    out: &mut [f64],
) {
    assert!(dim >= 1 && history.len() % dim == 0);
    let n = history.len() / dim;
    assert!(n >= 1, "history must contain at least x0");
    assert_eq!(lag_weights.len(), n - 1, "row tail must cover lags 1..n-1");
    assert_eq!(out.len(), dim);
    for (i, o) in out.iter_mut().enumerate() {
        *o = x0_weight * history[i];
    }
    for (k, &w) in lag_weights.iter().enumerate() {
        let j = n - 1 - k; // state index x_{n-1-k}, lag k+1
        let row = &history[j * dim..(j + 1) * dim];
        for i in 0..dim {
            out[i] += w * row[i];
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn blew_up(x: &[f64]) -> bool {
    let mut sq = 0.0;
    for &v in x {
        if !v.is_finite() {
            return true;
        }
        sq += v * v;
    }
    sq.sqrt() > OVERFLOW_LIMIT
}

/// Step-n coefficient row in lag order: `lead` multiplies xₙ,
/// `lags[k−1]` multiplies x_{n−k}, `x0` multiplies x₀.
enum RowSource {
    Convolution(SchemeWeights),
    Qia(QiaTables, Vec<f64>),
}

impl RowSource {
    fn prepare(scheme: SchemeKind, alpha: Alpha, n_steps: usize) -> Result<Self, WeightsError> {
        Ok(match scheme {
            SchemeKind::GrunwaldLetnikov => Self::Convolution(gl_weights(alpha, n_steps)?),
            SchemeKind::L1 => Self::Convolution(l1_weights(alpha, n_steps)?),
            SchemeKind::Bdf2 => Self::Convolution(bdf2_weights(alpha, n_steps)?),
            SchemeKind::Qia => Self::Qia(QiaTables::new(alpha), Vec::new()),
        })
    }

    fn row(&mut self, n: usize) -> (f64, &[f64], f64) {
        match self {
            Self::Convolution(w) => (w.conv()[0], &w.conv()[1..n], w.starting()[n]),
            Self::Qia(tables, buf) => {
                tables.row_into(n, buf);
                (buf[0], &buf[1..n], buf[n])
            }
        }
    }
}

/// Modified-Newton state shared across steps of one run.
struct NewtonWorkspace {
    dim: usize,
    /// LU of lead·I − h^α·J, tagged with the lead it was built for
    lu: Option<(f64, nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
    jac: Vec<f64>,
    fx: Vec<f64>,
    g: Vec<f64>,
    x_try: Vec<f64>,
    g_try: Vec<f64>,
}

enum StepOutcome {
    Converged { residual: f64, fell_back: bool },
    Failed,
}

impl NewtonWorkspace {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            lu: None,
            jac: vec![0.0; dim * dim],
            fx: vec![0.0; dim],
            g: vec![0.0; dim],
            x_try: vec![0.0; dim],
            g_try: vec![0.0; dim],
        }
    }

    /// g(x) = lead·x + hist − h^α f(t, x); returns ‖g‖.
    fn residual(
        problem: &FOdeProblem,
        t: f64,
        h_alpha: f64,
        lead: f64,
        hist: &[f64],
        x: &[f64],
        fx: &mut [f64],
        g: &mut [f64],
    ) -> f64 {
        problem.eval_rhs(t, x, fx);
        let mut sq = 0.0;
        for i in 0..x.len() {
            g[i] = lead * x[i] + hist[i] - h_alpha * fx[i];
            sq += g[i] * g[i];
        }
        sq.sqrt()
    }

    fn refresh_lu(
        &mut self,
        problem: &FOdeProblem,
        t: f64,
        h_alpha: f64,
        lead: f64,
        x: &[f64],
        diag: &mut SolveDiagnostics,
    ) {
        let d = self.dim;
        problem.jacobian_into(t, x, &mut self.jac);
        let mut m = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = -h_alpha * self.jac[i * d + j];
            }
            m[(i, i)] += lead;
        }
        self.lu = Some((lead, m.lu()));
        diag.jacobian_refreshes += 1;
    }

    /// Solve lead·x + hist − h^α f(tₙ, x) = 0 starting from `x` (warm
    /// start = previous state). On success `x` holds the root.
    #[allow(clippy::too_many_arguments)]
    fn solve_step(
        &mut self,
        problem: &FOdeProblem,
        t: f64,
        h_alpha: f64,
        lead: f64,
        hist: &[f64],
        tol: f64,
        max_iter: usize,
        fallback: Fallback,
        x: &mut [f64],
        diag: &mut SolveDiagnostics,
    ) -> StepOutcome {
        let d = self.dim;
        let mut fell_back = false;

        let mut fx = std::mem::take(&mut self.fx);
        let mut g = std::mem::take(&mut self.g);
        let mut x_try = std::mem::take(&mut self.x_try);
        let mut g_try = std::mem::take(&mut self.g_try);

        let mut gn = Self::residual(problem, t, h_alpha, lead, hist, x, &mut fx, &mut g);
        // whether the cached factorization was built at the present iterate
        let mut fresh_at_x = false;
        let mut converged = false;

        for _ in 0..max_iter {
            if gn <= tol * norm(x).max(1.0) && gn.is_finite() {
                converged = true;
                break;
            }
            diag.total_newton_iters += 1;

            // make sure a factorization for the current lead exists
            let lead_matches = matches!(&self.lu, Some((l, _)) if *l == lead);
            if !lead_matches {
                self.refresh_lu(problem, t, h_alpha, lead, x, diag);
                fresh_at_x = true;
            }

            let rhs = DVector::from_column_slice(&g);
            let direction = self
                .lu
                .as_ref()
                .and_then(|(_, lu)| lu.solve(&rhs))
                .filter(|dx| dx.iter().all(|v| v.is_finite()));

            let dx_owned;
            let dx: &[f64] = match &direction {
                Some(sol) => {
                    dx_owned = None::<Vec<f64>>;
                    let _ = dx_owned;
                    sol.as_slice()
                }
                None => {
                    // singular or broken Newton matrix: damped residual
                    // descent along g/lead is the only direction left
                    fell_back = true;
                    dx_owned = Some(g.iter().map(|v| v / lead).collect());
                    dx_owned.as_deref().unwrap()
                }
            };

            // damped update: halve until the residual decreases
            let mut theta = 1.0;
            let mut accepted = false;
            let gn_before = gn;
            for _ in 0..20 {
                for i in 0..d {
                    x_try[i] = x[i] - theta * dx[i];
                }
                let gn_try = Self::residual(
                    problem, t, h_alpha, lead, hist, &x_try, &mut fx, &mut g_try,
                );
                if gn_try.is_finite() && gn_try < gn {
                    x.copy_from_slice(&x_try);
                    g.copy_from_slice(&g_try);
                    gn = gn_try;
                    accepted = true;
                    break;
                }
                theta *= 0.5;
            }

            if accepted {
                // sluggish contraction means the cached Jacobian is stale;
                // rebuild it at the new iterate to restore fast convergence
                fresh_at_x = false;
                if gn > 0.3 * gn_before {
                    self.refresh_lu(problem, t, h_alpha, lead, x, diag);
                    fresh_at_x = true;
                }
            } else if fresh_at_x {
                // stalled with a current Jacobian: Newton is out of moves
                break;
            } else {
                self.refresh_lu(problem, t, h_alpha, lead, x, diag);
                fresh_at_x = true;
            }
        }

        if !converged && fallback == Fallback::FixedPoint {
            fell_back = true;
            for _ in 0..max_iter {
                problem.eval_rhs(t, x, &mut fx);
                for i in 0..d {
                    x_try[i] = (h_alpha * fx[i] - hist[i]) / lead;
                }
                x.copy_from_slice(&x_try);
                gn = Self::residual(problem, t, h_alpha, lead, hist, x, &mut fx, &mut g);
                if gn <= tol * norm(x).max(1.0) && gn.is_finite() {
                    converged = true;
                    break;
                }
            }
        }

        self.fx = fx;
        self.g = g;
        self.x_try = x_try;
        self.g_try = g_try;

        if converged {
            StepOutcome::Converged {
                residual: gn,
                fell_back,
            }
        } else {
            StepOutcome::Failed
        }
    }
}

/// Advance one of the implicit F-BDF schemes.
pub fn fbdf_solve(
    problem: &FOdeProblem,
    scheme: SchemeKind,
    alpha: Alpha,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<Trajectory, SolverError> {
    config.validate()?;
    let d = problem.dimension();
    if x0.len() != d {
        return Err(SolverError::DimensionMismatch {
            dim: d,
            got: x0.len(),
        });
    }
    let mut rows = RowSource::prepare(scheme, alpha, config.n_steps)?;
    let h_alpha = config.h.powf(alpha.get());

    let mut flat: Vec<f64> = Vec::with_capacity((config.n_steps + 1) * d);
    flat.extend_from_slice(x0);
    let mut residuals = vec![0.0];
    let mut diag = SolveDiagnostics::default();
    let mut ws = NewtonWorkspace::new(d);
    let mut hist = vec![0.0; d];
    let mut x = x0.to_vec();
    let mut status = SolveStatus::Completed;

    for n in 1..=config.n_steps {
        let t = n as f64 * config.h;
        let (lead, lags, x0w) = rows.row(n);
        history_dot(lags, x0w, &flat, d, &mut hist);
        match ws.solve_step(
            problem,
            t,
            h_alpha,
            lead,
            &hist,
            config.newton_tol,
            config.newton_max_iter,
            config.fallback,
            &mut x,
            &mut diag,
        ) {
            StepOutcome::Converged { residual, fell_back } => {
                if fell_back {
                    diag.fallback_steps.push(n);
                }
                if blew_up(&x) {
                    status = SolveStatus::Overflow { step: n };
                    break;
                }
                flat.extend_from_slice(&x);
                residuals.push(residual);
            }
            StepOutcome::Failed => {
                status = SolveStatus::NewtonFailure { step: n };
                break;
            }
        }
    }

    Ok(package(flat, residuals, status, diag, config.h, d))
}

/// Explicit fractional Adams–Bashforth–Moulton predictor-corrector.
///
/// Predictor uses the rectangle-rule weights
/// b_{j,n+1} = (n+1−j)^α − (n−j)^α with factor h^α/Γ(α+1); the single
/// corrector uses the trapezoid-of-powers weights a_{j,n+1} with factor
/// h^α/Γ(α+2) and coefficient 1 on f(t_{n+1}, x^P).
pub fn fabm_solve(
    problem: &FOdeProblem,
    alpha: Alpha,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<Trajectory, SolverError> {
    config.validate()?;
    let d = problem.dimension();
    if x0.len() != d {
        return Err(SolverError::DimensionMismatch {
            dim: d,
            got: x0.len(),
        });
    }
    let a = alpha.get();
    let n_steps = config.n_steps;
    let fac_pred = config.h.powf(a) / gamma(a + 1.0);
    let fac_corr = config.h.powf(a) / gamma(a + 2.0);
    // k^α and k^{α+1} for k = 0..n_steps+1
    let pow_a: Vec<f64> = (0..=n_steps + 1).map(|k| (k as f64).powf(a)).collect();
    let pow_a1: Vec<f64> = (0..=n_steps + 1)
        .map(|k| (k as f64).powf(a + 1.0))
        .collect();

    let mut fhist: Vec<f64> = Vec::with_capacity((n_steps + 1) * d);
    let mut fx = vec![0.0; d];
    problem.eval_rhs(0.0, x0, &mut fx);
    fhist.extend_from_slice(&fx);

    let mut flat: Vec<f64> = Vec::with_capacity((n_steps + 1) * d);
    flat.extend_from_slice(x0);
    let mut residuals = vec![0.0];
    let mut status = SolveStatus::Completed;

    let mut pred = vec![0.0; d];
    let mut corr_sum = vec![0.0; d];

    for n in 0..n_steps {
        let t_next = (n + 1) as f64 * config.h;

        pred.copy_from_slice(x0);
        corr_sum.fill(0.0);
        for j in 0..=n {
            let b = pow_a[n + 1 - j] - pow_a[n - j];
            let aw = if j == 0 {
                let nf = n as f64;
                pow_a1[n] - (nf - a) * pow_a[n + 1]
            } else {
                pow_a1[n - j + 2] + pow_a1[n - j] - 2.0 * pow_a1[n - j + 1]
            };
            let fj = &fhist[j * d..(j + 1) * d];
            for i in 0..d {
                pred[i] += fac_pred * b * fj[i];
                corr_sum[i] += aw * fj[i];
            }
        }

        problem.eval_rhs(t_next, &pred, &mut fx);
        let mut x_next = vec![0.0; d];
        for i in 0..d {
            x_next[i] = x0[i] + fac_corr * (corr_sum[i] + fx[i]);
        }

        if blew_up(&x_next) {
            status = SolveStatus::Overflow { step: n + 1 };
            break;
        }
        problem.eval_rhs(t_next, &x_next, &mut fx);
        fhist.extend_from_slice(&fx);
        flat.extend_from_slice(&x_next);
        residuals.push(0.0);
    }

    Ok(package(
        flat,
        residuals,
        status,
        SolveDiagnostics::default(),
        config.h,
        d,
    ))
}

fn package(
    flat: Vec<f64>,
    residuals: Vec<f64>,
    status: SolveStatus,
    diagnostics: SolveDiagnostics,
    h: f64,
    d: usize,
) -> Trajectory {
    let states: Vec<Vec<f64>> = flat.chunks(d).map(|c| c.to_vec()).collect();
    let times: Vec<f64> = (0..states.len()).map(|n| n as f64 * h).collect();
    Trajectory {
        times,
        states,
        residuals,
        status,
        diagnostics,
    }
}
