//! Long-time diagnostics over trajectories and scheme weights.
//!
//! Two kinds of question are answered here. First, given one or two
//! computed trajectories, what algebraic decay do they actually exhibit?
//! The index
//!
//! p_α(t) = (ln e(t₁) − ln e(t)) / ln t,   t > 1,
//!
//! with e(t) = ‖x(t) − y(t)‖ (contractivity) or e(t) = ‖x(t)‖
//! (dissipativity) reads the decay exponent off a single run: e ~ C·t^−α
//! makes the index exactly α for every t, and any constant C cancels.
//!
//! Second, given a scheme and the structural constants (λ, b) of the
//! problem, the convolution stability ratios
//!
//! ρ₁ = Σ|ω_j| / (ω₀ − 2λh^α),   ρ₂ = Σ|ω_j| / (ω₀ + 2bh^α)
//!
//! decide whether the decay theory applies; ρ < 1 is the contraction
//! margin of the underlying Volterra inequality. The two-step and
//! quadratic-interpolation rows carry one or two positive tail weights.
//! Shifting each positive weight into the lead turns the row back into a
//! sign-definite one, at the price of strengthened ratios
//!
//! ρ₃ = (μ₀ + 2s) / (μ₀ − 2s − 2λh^α),
//! ρ₄ = (μ₀ + 2s) / (μ₀ − 2s + 2bh^α),
//!
//! where s is the sum of the positive tail weights, together with the
//! step-size conditions h^αλ ≤ −2s and h^αb ≥ 2s.

use crate::solver::Trajectory;
use crate::weights::{bdf2_head, Alpha, QiaTables, SchemeKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trajectories live on different grids")]
    GridMismatch,
    #[error("baseline norm e(t₁) vanishes at t₁ = {t1}; decay index undefined")]
    DegenerateBaseline { t1: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("scalar diagnostic applied to a {dim}-dimensional trajectory")]
    NotScalar { dim: usize },
    #[error("radius must be positive, got {radius}")]
    BadRadius { radius: f64 },
}

/// Norm used to reduce a state vector to a scalar size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// plain ‖u‖₂
    Euclidean,
    /// grid-averaged (Σ u_i² / d)^{1/2}, the discrete L² norm of a
    /// mesh function on a uniform grid
    MeanSquare,
}

impl NormKind {
    pub fn apply(self, u: &[f64]) -> f64 {
        let sq: f64 = u.iter().map(|v| v * v).sum();
        match self {
            NormKind::Euclidean => sq.sqrt(),
            NormKind::MeanSquare => (sq / u.len() as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayKind {
    Contractivity,
    Dissipativity,
}

/// Times, error sizes and the observed decay index along a run.
///
/// `index[n]` is populated only where the index is defined: past the
/// normalization time and with t_n > 1 so the logarithm has a sign.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub kind: DecayKind,
    pub times: Vec<f64>,
    pub e: Vec<f64>,
    pub index: Vec<Option<f64>>,
    /// grid time actually used as t₁
    pub t1: f64,
}

impl DecayReport {
    /// Index at the grid time nearest `t`, if defined there.
    pub fn index_at(&self, t: f64) -> Option<f64> {
        let n = nearest_index(&self.times, t)?;
        self.index[n]
    }

    /// Error size at the grid time nearest `t`.
    pub fn e_at(&self, t: f64) -> Option<f64> {
        let n = nearest_index(&self.times, t)?;
        Some(self.e[n])
    }
}

fn nearest_index(times: &[f64], t: f64) -> Option<usize> {
    if times.is_empty() {
        return None;
    }
    let mut best = 0;
    let mut dist = f64::MAX;
    for (n, &tn) in times.iter().enumerate() {
        let d = (tn - t).abs();
        if d < dist {
            dist = d;
            best = n;
        }
    }
    Some(best)
}

fn decay_report(
    kind: DecayKind,
    times: &[f64],
    e: Vec<f64>,
    normalize_at: f64,
) -> Result<DecayReport, AnalysisError> {
    let n1 = nearest_index(times, normalize_at).ok_or(AnalysisError::EmptyTrajectory)?;
    let t1 = times[n1];
    let e1 = e[n1];
    if !(e1 > 0.0) {
        return Err(AnalysisError::DegenerateBaseline { t1 });
    }
    let ln_e1 = e1.ln();
    let index = times
        .iter()
        .zip(&e)
        .enumerate()
        .map(|(n, (&t, &en))| {
            if n > n1 && t > 1.0 && en > 0.0 {
                Some((ln_e1 - en.ln()) / t.ln())
            } else {
                None
            }
        })
        .collect();
    Ok(DecayReport {
        kind,
        times: times.to_vec(),
        e,
        index,
        t1,
    })
}

/// Observed contractivity index of a trajectory pair.
///
/// e(t_n) = ‖x_n − y_n‖ in the chosen norm, normalized at the grid time
/// nearest `normalize_at` (customarily 1).
pub fn contractivity_index(
    traj_x: &Trajectory,
    traj_y: &Trajectory,
    norm: NormKind,
    normalize_at: f64,
) -> Result<DecayReport, AnalysisError> {
    if traj_x.times != traj_y.times {
        return Err(AnalysisError::GridMismatch);
    }
    if traj_x.states.is_empty() {
        return Err(AnalysisError::EmptyTrajectory);
    }
    let e: Vec<f64> = traj_x
        .states
        .iter()
        .zip(&traj_y.states)
        .map(|(x, y)| {
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            norm.apply(&diff)
        })
        .collect();
    decay_report(DecayKind::Contractivity, &traj_x.times, e, normalize_at)
}

/// Observed dissipativity index: decay of ‖x_n‖ itself.
pub fn dissipativity_index(
    traj: &Trajectory,
    norm: NormKind,
    normalize_at: f64,
) -> Result<DecayReport, AnalysisError> {
    if traj.states.is_empty() {
        return Err(AnalysisError::EmptyTrajectory);
    }
    let e: Vec<f64> = traj.states.iter().map(|x| norm.apply(x)).collect();
    decay_report(DecayKind::Dissipativity, &traj.times, e, normalize_at)
}

/// First entry into the ball of the given radius, and whether the
/// trajectory stays inside from then on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbingEntry {
    pub entry: Option<usize>,
    pub stays_inside: bool,
}

pub fn absorbing_entry(
    traj: &Trajectory,
    radius: f64,
    norm: NormKind,
) -> Result<AbsorbingEntry, AnalysisError> {
    if !(radius > 0.0) {
        return Err(AnalysisError::BadRadius { radius });
    }
    let norms: Vec<f64> = traj.states.iter().map(|x| norm.apply(x)).collect();
    let entry = norms.iter().position(|&r| r <= radius);
    let stays_inside = match entry {
        Some(n) => norms[n..].iter().all(|&r| r <= radius),
        None => false,
    };
    Ok(AbsorbingEntry {
        entry,
        stays_inside,
    })
}

/// Whether a scalar trajectory stays (numerically) nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonnegativityReport {
    pub ok: bool,
    pub first_violation: Option<usize>,
}

pub fn nonnegativity_check(traj: &Trajectory) -> Result<NonnegativityReport, AnalysisError> {
    let dim = traj.states.first().map_or(0, |s| s.len());
    if dim != 1 {
        return Err(AnalysisError::NotScalar { dim });
    }
    let first_violation = traj.states.iter().position(|s| s[0] < -1e-12);
    Ok(NonnegativityReport {
        ok: first_violation.is_none(),
        first_violation,
    })
}

/// Convolution stability ratios of one scheme at given (h, λ, b).
///
/// ρ₁/ρ₂ use the full absolute tail mass Σ_{j≥1}|ω_j| = ω₀ + 2s; the
/// sharpened ρ₃/ρ₄ exist only for the two rows with positive tail
/// weights. `feasible` requires the step-size conditions and every
/// reported ρ < 1; the c-constants are meaningful only when it is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRatios {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: Option<f64>,
    pub rho4: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub feasible: bool,
}

impl std::fmt::Display for StabilityRatios {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rho1={:.16e}", self.rho1)?;
        writeln!(f, "rho2={:.16e}", self.rho2)?;
        match self.rho3 {
            Some(r) => writeln!(f, "rho3={r:.16e}")?,
            None => writeln!(f, "rho3=none")?,
        }
        match self.rho4 {
            Some(r) => writeln!(f, "rho4={r:.16e}")?,
            None => writeln!(f, "rho4=none")?,
        }
        writeln!(f, "c1={:.16e}", self.c1)?;
        writeln!(f, "c2={:.16e}", self.c2)?;
        writeln!(f, "c3={:.16e}", self.c3)?;
        write!(f, "feasible={}", self.feasible)
    }
}

/// Representative row index at which the quadratic-interpolation weights
/// are sampled; the head entries are settled well before this.
pub const QIA_REPRESENTATIVE_ROW: usize = 64;

/// Lead weight and positive tail mass s = Σ_{j≥1} max(ω_j, 0) of a scheme.
fn lead_and_positive_tail(scheme: SchemeKind, alpha: Alpha) -> (f64, f64) {
    match scheme {
        SchemeKind::GrunwaldLetnikov => (1.0, 0.0),
        SchemeKind::L1 => {
            let head = crate::weights::l1_weights(alpha, 2).expect("tiny table");
            (head.conv()[0], 0.0)
        }
        SchemeKind::Bdf2 => {
            let [mu0, _, mu2, mu3] = bdf2_head(alpha);
            (mu0, mu2.max(0.0) + mu3.max(0.0))
        }
        SchemeKind::Qia => {
            let mut tables = QiaTables::new(alpha);
            let mut row = Vec::new();
            tables.row_into(QIA_REPRESENTATIVE_ROW, &mut row);
            (row[0], row[2].max(0.0))
        }
    }
}

/// Evaluate the decay-theory ratios for a scheme on a problem with
/// one-sided constant λ and dissipativity constant b.
pub fn stability_ratios(
    scheme: SchemeKind,
    alpha: Alpha,
    h: f64,
    lambda: f64,
    b: f64,
) -> StabilityRatios {
    assert!(h > 0.0 && h.is_finite(), "step size must be positive");
    let ha = h.powf(alpha.get());
    let (lead, s) = lead_and_positive_tail(scheme, alpha);
    let tail_mass = lead + 2.0 * s;

    let den1 = lead - 2.0 * lambda * ha;
    let den2 = lead + 2.0 * b * ha;
    let rho1 = tail_mass / den1;
    let rho2 = tail_mass / den2;

    let (rho3, rho4, conditions_hold) = if matches!(scheme, SchemeKind::Bdf2 | SchemeKind::Qia) {
        let r3 = (lead + 2.0 * s) / (lead - 2.0 * s - 2.0 * lambda * ha);
        let r4 = (lead + 2.0 * s) / (lead - 2.0 * s + 2.0 * b * ha);
        let ok = ha * lambda <= -2.0 * s && ha * b >= 2.0 * s;
        (Some(r3), Some(r4), ok)
    } else {
        (None, None, true)
    };

    let c1 = 1.0 / ((1.0 - rho1) * den1);
    let c2 = 1.0 / (1.0 - rho2);
    let c3 = 1.0 / ((1.0 - rho2) * den2);

    let all_contracting = den1 > 0.0
        && rho1 < 1.0
        && rho2 < 1.0
        && rho3.map_or(true, |r| r < 1.0)
        && rho4.map_or(true, |r| r < 1.0);
    StabilityRatios {
        rho1,
        rho2,
        rho3,
        rho4,
        c1,
        c2,
        c3,
        feasible: conditions_hold && all_contracting,
    }
}
