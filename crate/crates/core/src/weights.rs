//! Convolution weights for implicit fractional multistep schemes.
//!
//! On a uniform grid tₙ = n·h every scheme here approximates the Caputo
//! derivative of order α ∈ (0, 1) by a weighted history sum
//!
//! ```text
//!   (D^α x)(tₙ) ≈ h^{-α} [ ω₀ xₙ + ω₁ xₙ₋₁ + ⋯ + ωₙ₋₁ x₁ + δₙ x₀ ],
//! ```
//!
//! where ω₀, ω₁, … are stationary convolution weights and δₙ is a starting
//! weight chosen so that the whole row annihilates constants (it sums to
//! zero). Stability of the resulting implicit methods rests on a sign
//! structure of the row:
//!
//! * ω₀ > 0,
//! * ω_j ≤ 0 for j ≥ 1,
//! * Σ_{j=0}^{m} ω_j ≥ 0 for every m.
//!
//! [`verify_assumption_a`] checks exactly these three conditions and reports
//! the first violating index of each. The families provided:
//!
//! * [`gl_weights`] — Grünwald–Letnikov: ω_k = (−1)^k C(α, k), first order.
//! * [`l1_weights`] — piecewise-linear interpolation of the Caputo integral.
//! * [`bdf2_weights`] — generated by (3/2 − 2ξ + ξ²/2)^α, second order.
//! * [`qia_row`] — piecewise-quadratic interpolation rows of order 3 − α;
//!   these depend on the step index and are produced row by row.
//!
//! [`decay_exponent`] fits the algebraic tail rate of a weight (or any
//! other) sequence, used to confirm ω_n = O(n^{-1-α}) and δ_n = O(n^{-α}).

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Largest weight-table capacity a builder will allocate. Tables are O(n)
/// in memory; this cap (~256 MB of f64 for the two tables) guards against
/// runaway requests rather than real workloads, which stay below 10⁶.
pub const MAX_CAPACITY: usize = 16_000_000;

/// Minimum number of points accepted by [`decay_exponent`].
pub const MIN_FIT_WINDOW: usize = 10;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("requested capacity {requested} exceeds the weight-table budget {max}")]
    CapacityExceeded { requested: usize, max: usize },
    #[error("{kind:?} needs capacity at least {min}, got {got}")]
    CapacityTooSmall {
        kind: SchemeKind,
        min: usize,
        got: usize,
    },
    #[error("step index {step} exceeds table capacity {capacity}")]
    StepOutOfRange { step: usize, capacity: usize },
    #[error("step index must be at least 1")]
    InvalidStep,
    #[error("fit window must hold at least {MIN_FIT_WINDOW} points starting at index 1")]
    FitWindowTooSmall,
    #[error("fit window end {end} exceeds sequence length {len}")]
    FitWindowOutOfRange { end: usize, len: usize },
    #[error("sequence entry {index} is zero; log-log fit undefined")]
    ZeroInFitWindow { index: usize },
}

/// Caputo derivative order, validated to lie strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self, WeightsError> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Alpha(value))
        } else {
            Err(WeightsError::AlphaOutOfRange(value))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// The four discretizations of the Caputo derivative provided here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    GrunwaldLetnikov,
    L1,
    Bdf2,
    Qia,
}

impl SchemeKind {
    /// Quadratic-interpolation rows change with the step index; the other
    /// three families are pure convolutions plus a starting weight.
    pub fn is_row_dependent(self) -> bool {
        matches!(self, SchemeKind::Qia)
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::GrunwaldLetnikov => "gl",
            SchemeKind::L1 => "l1",
            SchemeKind::Bdf2 => "bdf2",
            SchemeKind::Qia => "qia",
        }
    }

    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::GrunwaldLetnikov,
        SchemeKind::L1,
        SchemeKind::Bdf2,
        SchemeKind::Qia,
    ];
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gl" | "grunwald-letnikov" => Ok(SchemeKind::GrunwaldLetnikov),
            "l1" => Ok(SchemeKind::L1),
            "bdf2" => Ok(SchemeKind::Bdf2),
            "qia" => Ok(SchemeKind::Qia),
            other => Err(format!(
                "unknown scheme '{other}' (expected gl, l1, bdf2, or qia)"
            )),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One step's weight row: `conv[j]` multiplies x_{n-j} for j < n, and `x0`
/// multiplies x₀. `conv[0]` is the leading (implicit) coefficient.
#[derive(Debug, Clone, Copy)]
pub struct StepRow<'a> {
    pub conv: &'a [f64],
    pub x0: f64,
}

impl StepRow<'_> {
    #[inline]
    pub fn lead(&self) -> f64 {
        self.conv[0]
    }

    /// Row length n: the row couples x_n, …, x_1 through `conv` and x₀
    /// through `x0`.
    #[inline]
    pub fn step(&self) -> usize {
        self.conv.len()
    }

    /// Σ over the whole row; analytically zero for every scheme here.
    pub fn sum(&self) -> f64 {
        self.conv.iter().sum::<f64>() + self.x0
    }
}

/// Precomputed weight table of a convolution scheme.
///
/// `conv` holds ω₀..ω_cap and `starting` holds δ₀..δ_cap with δ₀ = 0. The
/// step-n row is ω₀..ω_{n−1} on x_n..x_1 plus δₙ on x₀. For the L1 family
/// δₙ is stored from its closed form; for the other families it is the
/// cumulative sum δₙ = −Σ_{j<n} ω_j. Both agree analytically because every
/// row sums to zero.
#[derive(Debug, Clone)]
pub struct SchemeWeights {
    kind: SchemeKind,
    alpha: Alpha,
    conv: Vec<f64>,
    starting: Vec<f64>,
}

impl SchemeWeights {
    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    /// Largest step index whose row this table can produce.
    pub fn capacity(&self) -> usize {
        self.conv.len() - 1
    }

    /// Convolution weights ω₀..ω_cap.
    pub fn conv(&self) -> &[f64] {
        &self.conv
    }

    /// Starting weights δ₀..δ_cap (δ₀ = 0).
    pub fn starting(&self) -> &[f64] {
        &self.starting
    }

    pub fn row(&self, n: usize) -> Result<StepRow<'_>, WeightsError> {
        if n == 0 {
            return Err(WeightsError::InvalidStep);
        }
        if n > self.capacity() {
            return Err(WeightsError::StepOutOfRange {
                step: n,
                capacity: self.capacity(),
            });
        }
        Ok(StepRow {
            conv: &self.conv[..n],
            x0: self.starting[n],
        })
    }
}

fn check_capacity(kind: SchemeKind, n_max: usize, min: usize) -> Result<(), WeightsError> {
    if n_max < min {
        return Err(WeightsError::CapacityTooSmall {
            kind,
            min,
            got: n_max,
        });
    }
    if n_max > MAX_CAPACITY {
        return Err(WeightsError::CapacityExceeded {
            requested: n_max,
            max: MAX_CAPACITY,
        });
    }
    Ok(())
}

/// Grünwald–Letnikov weights ω_k = (−1)^k C(α, k) up to k = n_max, via the
/// stable ratio recurrence ω₀ = 1, ω_k = ω_{k−1} (k − 1 − α)/k.
pub fn gl_weights(alpha: Alpha, n_max: usize) -> Result<SchemeWeights, WeightsError> {
    check_capacity(SchemeKind::GrunwaldLetnikov, n_max, 1)?;
    let a = alpha.get();
    let mut conv = Vec::with_capacity(n_max + 1);
    conv.push(1.0);
    for k in 1..=n_max {
        let k_f = k as f64;
        let prev = conv[k - 1];
        conv.push(prev * (k_f - 1.0 - a) / k_f);
    }
    let starting = cumulative_starting(&conv);
    Ok(SchemeWeights {
        kind: SchemeKind::GrunwaldLetnikov,
        alpha,
        conv,
        starting,
    })
}

/// L1 weights from piecewise-linear interpolation of the Caputo integral:
/// γ₀ = 1/Γ(2−α), γ_k = ((k+1)^{1−α} − 2k^{1−α} + (k−1)^{1−α})/Γ(2−α), and
/// step-n starting weight δₙ = ((n−1)^{1−α} − n^{1−α})/Γ(2−α) on x₀.
pub fn l1_weights(alpha: Alpha, n_max: usize) -> Result<SchemeWeights, WeightsError> {
    check_capacity(SchemeKind::L1, n_max, 2)?;
    let a = alpha.get();
    let s = 1.0 - a;
    let g = (-ln_gamma(2.0 - a)).exp();
    let pow: Vec<f64> = (0..=n_max + 1).map(|k| (k as f64).powf(s)).collect();
    let mut conv = Vec::with_capacity(n_max + 1);
    conv.push(g);
    for k in 1..=n_max {
        conv.push((pow[k + 1] - 2.0 * pow[k] + pow[k - 1]) * g);
    }
    let mut starting = Vec::with_capacity(n_max + 1);
    starting.push(0.0);
    for n in 1..=n_max {
        starting.push((pow[n - 1] - pow[n]) * g);
    }
    Ok(SchemeWeights {
        kind: SchemeKind::L1,
        alpha,
        conv,
        starting,
    })
}

/// Fractional BDF2 weights: the Taylor coefficients of the generating
/// function (3/2 − 2ξ + ξ²/2)^α. Using the factorization
/// 3/2 − 2ξ + ξ²/2 = (3/2)(1 − ξ)(1 − ξ/3), the coefficients are the
/// convolution μ_j = (3/2)^α Σ_l 3^{−l} ω_l ω_{j−l} of two Grünwald
/// sequences. The 3^{−l} factor underflows past l ≈ 650, which truncates
/// the inner sum exactly in double precision.
pub fn bdf2_weights(alpha: Alpha, n_max: usize) -> Result<SchemeWeights, WeightsError> {
    check_capacity(SchemeKind::Bdf2, n_max, 4)?;
    let a = alpha.get();
    let gl = gl_weights(alpha, n_max)?;
    let w = gl.conv();
    let scale = 1.5_f64.powf(a);

    let mut damped = Vec::with_capacity(n_max + 1);
    let mut p = 1.0_f64;
    for &wl in w {
        damped.push(p * wl);
        p /= 3.0;
        if p == 0.0 {
            break;
        }
    }

    let mut conv = Vec::with_capacity(n_max + 1);
    for j in 0..=n_max {
        let lmax = j.min(damped.len() - 1);
        let mut acc = 0.0;
        for (l, &dl) in damped[..=lmax].iter().enumerate() {
            acc += dl * w[j - l];
        }
        conv.push(scale * acc);
    }
    let starting = cumulative_starting(&conv);
    Ok(SchemeWeights {
        kind: SchemeKind::Bdf2,
        alpha,
        conv,
        starting,
    })
}

fn cumulative_starting(conv: &[f64]) -> Vec<f64> {
    let mut starting = Vec::with_capacity(conv.len());
    starting.push(0.0);
    for n in 1..conv.len() {
        let prev = starting[n - 1];
        starting.push(prev - conv[n - 1]);
    }
    starting
}

/// Closed forms of the first four BDF2 weights, used as cross-checks and in
/// step-size feasibility conditions: μ₂ and μ₃ are the only possibly
/// positive weights past the lead.
pub fn bdf2_head(alpha: Alpha) -> [f64; 4] {
    let a = alpha.get();
    let s = 1.5_f64.powf(a);
    [
        s,
        s * (-4.0 * a / 3.0),
        s * (a * (8.0 * a - 5.0) / 9.0),
        s * (4.0 * a * (a - 1.0) * (7.0 - 8.0 * a) / 81.0),
    ]
}

/// Step-n weight row μ⁽ⁿ⁾₀..μ⁽ⁿ⁾ₙ of the quadratic-interpolation scheme,
/// lag-ordered (μ₀ multiplies xₙ, μₙ multiplies x₀).
///
/// The derivative inside the Caputo integral is replaced by the derivative
/// of piecewise-quadratic interpolants: on [t_{j−1}, t_j] with j ≤ n−2 the
/// parabola through (t_{j−1}, t_j, t_{j+1}); on the final two intervals the
/// parabola through (t_{n−2}, t_{n−1}, tₙ). Every integral is evaluated in
/// closed form, so the row is exact for quadratic trajectories. Rows with
/// n ≤ 3 fall back to the L1 row, which keeps the startup well defined
/// before a three-point stencil history exists.
pub fn qia_row(alpha: Alpha, n: usize) -> Result<Vec<f64>, WeightsError> {
    if n == 0 {
        return Err(WeightsError::InvalidStep);
    }
    if n > MAX_CAPACITY {
        return Err(WeightsError::CapacityExceeded {
            requested: n,
            max: MAX_CAPACITY,
        });
    }
    let mut tables = QiaTables::new(alpha);
    let mut row = Vec::new();
    tables.row_into(n, &mut row);
    Ok(row)
}

/// Reusable power tables for quadratic-interpolation rows. Building a row
/// needs s^{1−α} and s^{2−α} at integers s ≤ n; a stepper that asks for
/// every row in turn reuses these instead of recomputing powers.
#[derive(Debug, Clone)]
pub struct QiaTables {
    alpha: Alpha,
    /// s^{1−α} for s = 0..len
    p1: Vec<f64>,
    /// s^{2−α} for s = 0..len
    p2: Vec<f64>,
    /// 1/Γ(2−α)
    c1: f64,
    /// 2(1−α)/Γ(3−α)
    c2: f64,
    /// γ-row constants of the L1 fallback for n ≤ 3
    l1_scale: f64,
}

impl QiaTables {
    pub fn new(alpha: Alpha) -> Self {
        let a = alpha.get();
        QiaTables {
            alpha,
            p1: vec![0.0],
            p2: vec![0.0],
            c1: (-ln_gamma(2.0 - a)).exp(),
            c2: 2.0 * (1.0 - a) * (-ln_gamma(3.0 - a)).exp(),
            l1_scale: (-ln_gamma(2.0 - a)).exp(),
        }
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    fn ensure(&mut self, n: usize) {
        let a = self.alpha.get();
        while self.p1.len() <= n {
            let s = self.p1.len() as f64;
            self.p1.push(s.powf(1.0 - a));
            self.p2.push(s.powf(2.0 - a));
        }
    }

    /// ∫_a^b (c − 2s) s^{−α} ds, scaled by 1/Γ(1−α).
    #[inline]
    fn elem(&self, c: f64, a: usize, b: usize) -> f64 {
        c * (self.p1[b] - self.p1[a]) * self.c1 - (self.p2[b] - self.p2[a]) * self.c2
    }

    /// Writes the step-n row into `row`, lag-ordered with n+1 entries.
    pub fn row_into(&mut self, n: usize, row: &mut Vec<f64>) {
        assert!(n >= 1, "step index must be at least 1");
        row.clear();
        row.resize(n + 1, 0.0);
        if n <= 3 {
            self.l1_row_into(n, row);
            return;
        }
        self.ensure(n);

        // coeff[m] accumulates the weight on x_m; converted to lags at the end.
        let coeff = row;
        for j in 1..=n {
            // Stencil through (t_{k−1}, t_k, t_{k+1}); the last two
            // intervals share the stencil ending at t_n.
            let k = if j <= n - 2 { j } else { n - 1 };
            let (lo, hi) = (n - j, n - j + 1);
            let base = 2.0 * (n as f64 - k as f64);
            coeff[k - 1] += 0.5 * self.elem(base - 1.0, lo, hi);
            coeff[k] -= self.elem(base, lo, hi);
            coeff[k + 1] += 0.5 * self.elem(base + 1.0, lo, hi);
        }
        coeff[..=n].reverse();
    }

    fn l1_row_into(&self, n: usize, row: &mut [f64]) {
        let a = self.alpha.get();
        let s = 1.0 - a;
        let g = self.l1_scale;
        let pw = |k: usize| (k as f64).powf(s);
        row[0] = g;
        for k in 1..n {
            row[k] = (pw(k + 1) - 2.0 * pw(k) + pw(k - 1)) * g;
        }
        row[n] = (pw(n - 1) - pw(n)) * g;
    }
}

/// Outcome of a single structural condition: `ok`, or the index of the
/// first entry violating it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PropertyCheck {
    pub ok: bool,
    pub first_violation: Option<usize>,
}

impl PropertyCheck {
    fn pass() -> Self {
        PropertyCheck {
            ok: true,
            first_violation: None,
        }
    }

    fn fail(index: usize) -> Self {
        PropertyCheck {
            ok: false,
            first_violation: Some(index),
        }
    }
}

/// Report of the three sign/partial-sum conditions that make a convolution
/// scheme contractivity-preserving.
#[derive(Debug, Clone, Copy)]
pub struct PropertyReport {
    /// ω₀ > 0
    pub lead_positive: PropertyCheck,
    /// ω_j ≤ 0 for every j ≥ 1
    pub tail_nonpositive: PropertyCheck,
    /// Σ_{j=0}^{m} ω_j ≥ 0 for every m up to capacity
    pub partial_sums_nonnegative: PropertyCheck,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.lead_positive.ok && self.tail_nonpositive.ok && self.partial_sums_nonnegative.ok
    }
}

/// Checks the three structural conditions on a weight table's convolution
/// part. Partial sums are accumulated left to right; for all families here
/// they stay of order m^{−α}, far above accumulation noise, so the checks
/// use exact comparisons.
pub fn verify_assumption_a(w: &SchemeWeights) -> PropertyReport {
    let conv = w.conv();
    let lead_positive = if conv[0] > 0.0 {
        PropertyCheck::pass()
    } else {
        PropertyCheck::fail(0)
    };

    let mut tail_nonpositive = PropertyCheck::pass();
    for (j, &c) in conv.iter().enumerate().skip(1) {
        if c > 0.0 {
            tail_nonpositive = PropertyCheck::fail(j);
            break;
        }
    }

    let mut partial_sums_nonnegative = PropertyCheck::pass();
    let mut acc = 0.0;
    for (m, &c) in conv.iter().enumerate() {
        acc += c;
        if acc < 0.0 {
            partial_sums_nonnegative = PropertyCheck::fail(m);
            break;
        }
    }

    PropertyReport {
        lead_positive,
        tail_nonpositive,
        partial_sums_nonnegative,
    }
}

/// Least-squares slope of log |seq_n| against log n over `window`, negated,
/// so a sequence ~ c·n^{−p} returns ≈ p. The window must start at index ≥ 1
/// and contain at least [`MIN_FIT_WINDOW`] nonzero entries.
pub fn decay_exponent(
    seq: &[f64],
    window: std::ops::Range<usize>,
) -> Result<f64, WeightsError> {
    let start = window.start.max(1);
    let end = window.end;
    if end > seq.len() {
        return Err(WeightsError::FitWindowOutOfRange {
            end,
            len: seq.len(),
        });
    }
    if end <= start || end - start < MIN_FIT_WINDOW {
        return Err(WeightsError::FitWindowTooSmall);
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let m = (end - start) as f64;
    for i in start..end {
        let v = seq[i].abs();
        if v == 0.0 {
            return Err(WeightsError::ZeroInFitWindow { index: i });
        }
        let x = (i as f64).ln();
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    Ok(-slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    const ALPHAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

    fn alpha(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    /// Direct binomial route: ω_k = Γ(k−α) / (Γ(k+1) Γ(−α)), evaluated
    /// through log-gamma. Independent of the ratio recurrence.
    fn gl_binomial_oracle(a: f64, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let log_mag = ln_gamma(k as f64 - a) - ln_gamma(k as f64 + 1.0);
        // 1/Γ(−α) = −α/Γ(1−α)
        log_mag.exp() * (-a / gamma(1.0 - a))
    }

    #[test]
    fn alpha_validation() {
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN, f64::INFINITY] {
            assert!(Alpha::new(bad).is_err(), "alpha {bad} should be rejected");
        }
        assert_eq!(Alpha::new(0.5).unwrap().get(), 0.5);
    }

    #[test]
    fn gl_first_weights_match_hand_values() {
        let w = gl_weights(alpha(0.5), 8).unwrap();
        assert_eq!(w.conv()[0], 1.0);
        assert!((w.conv()[1] + 0.5).abs() < 1e-15);
        assert!((w.conv()[2] + 0.125).abs() < 1e-15);
        assert!((w.starting()[1] + 1.0).abs() < 1e-15);
        assert!((w.starting()[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gl_matches_binomial_oracle() {
        for &a in &ALPHAS {
            let w = gl_weights(alpha(a), 64).unwrap();
            for k in 0..=64 {
                let expect = gl_binomial_oracle(a, k);
                let got = w.conv()[k];
                // the oracle exponentiates a difference of log-gammas, which
                // amplifies ulp-level noise; 1e-11 still separates the true
                // value from any neighbouring coefficient by ~10 orders
                assert!(
                    (got - expect).abs() <= 1e-11 * expect.abs().max(1e-30),
                    "alpha {a}, k {k}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn gl_structure_and_tail_rates() {
        for &a in &[0.3, 0.5, 0.7] {
            let n = 20_000;
            let w = gl_weights(alpha(a), n).unwrap();
            assert!(verify_assumption_a(&w).all_pass());

            // tail constants: n^{1+α} ω_n → −α/Γ(1−α), n^α δ_n → −1/Γ(1−α)
            let c_conv = (n as f64).powf(1.0 + a) * w.conv()[n];
            let c_start = (n as f64).powf(a) * w.starting()[n];
            let g = 1.0 / gamma(1.0 - a);
            assert!(
                (c_conv + a * g).abs() < 0.01 * (a * g),
                "alpha {a}: conv tail constant {c_conv} vs {}",
                -a * g
            );
            assert!(
                (c_start + g).abs() < 0.01 * g,
                "alpha {a}: starting tail constant {c_start} vs {}",
                -g
            );

            // δ_n = −Σ_{j<n} ω_j, so −δ_n is the n-th partial sum: positive
            // (assumption (A)) and decaying like n^{−α} toward zero
            let partial = -w.starting()[n];
            assert!(partial > 0.0, "partial sums must stay nonnegative");
            assert!(partial < 0.1, "partial sum {partial} should have decayed");

            let p_conv = decay_exponent(w.conv(), 1_000..20_000).unwrap();
            let p_start = decay_exponent(w.starting(), 1_000..20_000).unwrap();
            assert!((p_conv - (1.0 + a)).abs() < 0.02, "conv rate {p_conv}");
            assert!((p_start - a).abs() < 0.02, "starting rate {p_start}");
        }
    }

    #[test]
    fn l1_values_and_structure() {
        let w = l1_weights(alpha(0.5), 10_000).unwrap();
        // γ₀ = 1/Γ(1.5) = 2/√π (tolerance allows ulp noise in the gamma call)
        assert!((w.conv()[0] - 1.1283791670955126).abs() < 1e-13);
        assert!((w.starting()[1] + 1.1283791670955126).abs() < 1e-13);
        assert!(verify_assumption_a(&w).all_pass());

        for &a in &[0.2, 0.6, 0.9] {
            let n = 10_000;
            let w = l1_weights(alpha(a), n).unwrap();
            assert!(verify_assumption_a(&w).all_pass());
            let g = 1.0 / gamma(1.0 - a);

            let k = n;
            let c_conv = (k as f64).powf(1.0 + a) * w.conv()[k];
            assert!(
                (c_conv + a * g).abs() < 0.01 * (a * g),
                "alpha {a}: k^(1+a) gamma_k = {c_conv} vs {}",
                -a * g
            );
            let c_start = (n as f64).powf(a) * w.starting()[n];
            assert!(
                (c_start + g).abs() < 0.01 * g,
                "alpha {a}: n^a start_n = {c_start} vs {}",
                -g
            );
        }
    }

    #[test]
    fn l1_starting_equals_minus_partial_sum() {
        for &a in &[0.25, 0.5, 0.75] {
            let w = l1_weights(alpha(a), 512).unwrap();
            let mut acc = 0.0;
            for n in 1..=512usize {
                acc += w.conv()[n - 1];
                let direct = w.starting()[n];
                assert!(
                    (direct + acc).abs() <= 1e-12 * acc.abs().max(1e-12),
                    "alpha {a}, n {n}: closed form {direct} vs cumulative {}",
                    -acc
                );
            }
        }
    }

    /// J.C.P. Miller recurrence for the coefficients of p(ξ)^α with
    /// p = 3/2 − 2ξ + ξ²/2: an algebraic route independent of the
    /// factor-convolution used by `bdf2_weights`.
    fn bdf2_miller_oracle(a: f64, n: usize) -> Vec<f64> {
        let p = [1.5f64, -2.0, 0.5];
        let mut w = vec![0.0; n + 1];
        w[0] = p[0].powf(a);
        for m in 1..=n {
            let mut acc = 0.0;
            for k in 1..=m.min(2) {
                acc += ((a + 1.0) * k as f64 - m as f64) * p[k] * w[m - k];
            }
            w[m] = acc / (m as f64 * p[0]);
        }
        w
    }

    #[test]
    fn bdf2_matches_miller_series_oracle() {
        for &a in &ALPHAS {
            let w = bdf2_weights(alpha(a), 64).unwrap();
            let oracle = bdf2_miller_oracle(a, 64);
            for j in 0..=64 {
                let scale = oracle[j].abs().max(1e-30);
                assert!(
                    (w.conv()[j] - oracle[j]).abs() <= 1e-12 * scale,
                    "alpha {a}, j {j}: {} vs {}",
                    w.conv()[j],
                    oracle[j]
                );
            }
            assert!(w.conv()[5] < 0.0);
        }
    }

    #[test]
    fn bdf2_head_closed_forms() {
        for &a in &ALPHAS {
            let w = bdf2_weights(alpha(a), 8).unwrap();
            let head = bdf2_head(alpha(a));
            for j in 0..4 {
                assert!(
                    (w.conv()[j] - head[j]).abs() <= 1e-12 * head[j].abs().max(1e-15),
                    "alpha {a}, j {j}"
                );
            }
        }
    }

    #[test]
    fn bdf2_tail_negative_and_sum_vanishes() {
        for &a in &[0.3, 0.5, 0.9] {
            let n = 10_000;
            let w = bdf2_weights(alpha(a), n).unwrap();
            for j in 4..=n {
                assert!(w.conv()[j] < 0.0, "alpha {a}: mu_{j} = {}", w.conv()[j]);
            }
            // |Σ_{j≤N} μ_j| = |δ_{N+1}| → 0 at the starting-weight rate α
            let p = decay_exponent(w.starting(), 1_000..n + 1).unwrap();
            assert!((p - a).abs() < 0.05, "alpha {a}: tail-sum rate {p}");
            let conv_rate = decay_exponent(w.conv(), 1_000..n + 1).unwrap();
            assert!((conv_rate - (1.0 + a)).abs() < 0.05);
        }
    }

    #[test]
    fn qia_row_lead_and_zero_sum() {
        for &a in &ALPHAS {
            let d0 = 1.0 / gamma(3.0 - a);
            let lead_expected = 2f64.powf(1.0 - a) * (1.0 + a / 2.0) * d0;
            for n in [4usize, 5, 6, 17, 64, 200] {
                let row = qia_row(alpha(a), n).unwrap();
                assert_eq!(row.len(), n + 1);
                assert!(
                    (row[0] - lead_expected).abs() <= 1e-12 * lead_expected,
                    "alpha {a}, n {n}: lead {} vs {lead_expected}",
                    row[0]
                );
                let scale: f64 = row.iter().map(|x| x.abs()).sum();
                let sum: f64 = row.iter().sum();
                assert!(
                    sum.abs() <= 1e-12 * scale,
                    "alpha {a}, n {n}: row sum {sum}"
                );
            }
        }
    }

    #[test]
    fn qia_row_property_gates() {
        for &a in &ALPHAS {
            let d0 = 1.0 / gamma(3.0 - a);
            for n in 4..=200usize {
                let row = qia_row(alpha(a), n).unwrap();
                assert!(row[0] > 0.0);
                // μ₁ is bounded relative to the lead: −(4/3)μ₀ < μ₁ < 0.
                // The ratio bound is sharp: as α → 1 the row collapses onto
                // the classical three-point difference (3/2, −2, 1/2) where
                // μ₁/μ₀ = −4/3 exactly, so no absolute multiple of
                // d₀ = 1/Γ(3−α) below 2d₀ can hold across all α.
                assert!(
                    row[1] > -4.0 / 3.0 * row[0] && row[1] < 0.0,
                    "alpha {a}, n {n}: mu1 {} lead {}",
                    row[1],
                    row[0]
                );
                assert!(
                    row[2] > -d0 / 3.0 && row[2] < 0.5 * d0,
                    "alpha {a}, n {n}: mu2 {}",
                    row[2]
                );
                for (j, &m) in row.iter().enumerate().skip(3) {
                    assert!(m < 0.0, "alpha {a}, n {n}, j {j}: mu {m}");
                }
            }
        }
    }

    #[test]
    fn qia_row_exact_on_quadratics() {
        // The row integrates quadratic interpolants exactly, so applied to
        // x(t) = t² it must reproduce the Caputo derivative
        // D^α t² = 2 t^{2−α} / Γ(3−α) at machine accuracy. h enters only
        // through scaling; take h = 1 so the row applies to x_j = j².
        for &a in &[0.2, 0.5, 0.8] {
            for n in [4usize, 9, 33, 150] {
                let row = qia_row(alpha(a), n).unwrap();
                let mut acc = 0.0;
                for (lag, &mu) in row.iter().enumerate() {
                    let j = n - lag;
                    acc += mu * (j as f64).powi(2);
                }
                let exact = 2.0 * (n as f64).powf(2.0 - a) / gamma(3.0 - a);
                assert!(
                    (acc - exact).abs() <= 1e-10 * exact,
                    "alpha {a}, n {n}: {acc} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn qia_small_steps_use_l1_rows() {
        let a = alpha(0.37);
        let l1 = l1_weights(a, 8).unwrap();
        for n in 1..=3usize {
            let row = qia_row(a, n).unwrap();
            let l1_row = l1.row(n).unwrap();
            for j in 0..n {
                assert_eq!(row[j], l1_row.conv[j], "n {n}, lag {j}");
            }
            assert_eq!(row[n], l1_row.x0, "n {n} starting weight");
        }
        assert!(qia_row(a, 0).is_err());
    }

    #[test]
    fn qia_starting_weight_decays_like_n_to_minus_alpha() {
        for &a in &[0.3, 0.6, 0.9] {
            let mut tables = QiaTables::new(alpha(a));
            let mut row = Vec::new();
            let mut scaled = Vec::new();
            for &n in &[100usize, 1_000, 10_000] {
                tables.row_into(n, &mut row);
                let tail = row[n];
                assert!(tail < 0.0);
                scaled.push((n as f64).powf(a) * tail.abs());
            }
            let bound = 5.0 / gamma(1.0 - a);
            for &s in &scaled {
                assert!(s < bound, "alpha {a}: n^a mu_n = {s} exceeds {bound}");
            }
        }
    }

    #[test]
    fn row_accessor_and_errors() {
        let w = gl_weights(alpha(0.5), 16).unwrap();
        let row = w.row(5).unwrap();
        assert_eq!(row.step(), 5);
        assert_eq!(row.lead(), 1.0);
        assert!((row.sum()).abs() < 1e-14);
        assert!(matches!(w.row(0), Err(WeightsError::InvalidStep)));
        assert!(matches!(
            w.row(17),
            Err(WeightsError::StepOutOfRange { .. })
        ));
        assert!(matches!(
            gl_weights(alpha(0.5), MAX_CAPACITY + 1),
            Err(WeightsError::CapacityExceeded { .. })
        ));
        assert!(matches!(
            bdf2_weights(alpha(0.5), 3),
            Err(WeightsError::CapacityTooSmall { .. })
        ));
    }

    #[test]
    fn decay_exponent_recovers_pure_powers() {
        let seq: Vec<f64> = (0..2_000).map(|n| {
            if n == 0 {
                0.0
            } else {
                3.0 / (n as f64).powi(2)
            }
        })
        .collect();
        let p = decay_exponent(&seq, 100..2_000).unwrap();
        assert!((p - 2.0).abs() < 1e-10);

        let mut with_zero = seq.clone();
        with_zero[500] = 0.0;
        assert!(matches!(
            decay_exponent(&with_zero, 100..2_000),
            Err(WeightsError::ZeroInFitWindow { index: 500 })
        ));
        assert!(matches!(
            decay_exponent(&seq, 10..15),
            Err(WeightsError::FitWindowTooSmall)
        ));
        assert!(matches!(
            decay_exponent(&seq, 100..3_000),
            Err(WeightsError::FitWindowOutOfRange { .. })
        ));
    }

    /// Weighted-history inequality behind unconditional contractivity:
    /// Σ_j row_j ‖x_{n−j}‖² ≤ 2 ⟨x_n, Σ_j row_j x_{n−j}⟩ whenever the row
    /// satisfies the sign and partial-sum conditions.
    fn leibniz_gap(row: &StepRow<'_>, states: &[Vec<f64>]) -> f64 {
        let n = row.step();
        let d = states[0].len();
        let mut lhs = 0.0;
        let mut conv_vec = vec![0.0; d];
        for lag in 0..n {
            let x = &states[n - lag];
            let c = row.conv[lag];
            lhs += c * x.iter().map(|v| v * v).sum::<f64>();
            for i in 0..d {
                conv_vec[i] += c * x[i];
            }
        }
        lhs += row.x0 * states[0].iter().map(|v| v * v).sum::<f64>();
        for i in 0..d {
            conv_vec[i] += row.x0 * states[0][i];
        }
        let rhs = 2.0
            * states[n]
                .iter()
                .zip(conv_vec.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        rhs - lhs
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn leibniz_inequality_holds_for_gl_and_l1(
            a in 0.05f64..0.95,
            seed_states in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 1..4), 2..24),
        ) {
            let d = seed_states[0].len();
            let states: Vec<Vec<f64>> = seed_states
                .iter()
                .map(|s| {
                    let mut v = s.clone();
                    v.resize(d, 0.0);
                    v
                })
                .collect();
            let n_max = states.len() - 1;
            if n_max >= 1 {
                let al = Alpha::new(a).unwrap();
                for w in [gl_weights(al, n_max).unwrap(), l1_weights(al, n_max.max(2)).unwrap()] {
                    for n in 1..=n_max {
                        let row = w.row(n).unwrap();
                        let gap = leibniz_gap(&row, &states[..=n].to_vec());
                        let scale: f64 = states
                            .iter()
                            .map(|x| x.iter().map(|v| v * v).sum::<f64>())
                            .sum();
                        proptest::prop_assert!(
                            gap >= -1e-11 * scale.max(1.0),
                            "scheme {:?}, n {}: gap {}", w.kind(), n, gap
                        );
                    }
                }
            }
        }
    }
}
