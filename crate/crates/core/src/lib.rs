//! Implicit multistep integration for fractional ordinary differential
//! systems
//!
//! ```text
//!     D^α x(t) = f(t, x(t)),   x(0) = x₀,   0 < α < 1,
//! ```
//!
//! where `D^α` is the Caputo derivative. The integrators discretize the
//! derivative with convolution weights on a uniform grid and solve one
//! nonlinear system per step, so contractive and dissipative model problems
//! keep those properties at any step size when the weights satisfy the sign
//! and partial-sum conditions checked in [`weights`].
//!
//! Module map:
//!
//! * [`weights`] — convolution weight families (Grünwald–Letnikov, L1,
//!   fractional BDF2, quadratic-interpolation rows) and their structural
//!   property checks.
//! * [`mlf`] — the two-parameter Mittag–Leffler function, the exact decay
//!   profile of scalar linear problems.
//! * [`volterra`] — scalar Volterra difference equations, kernel summability
//!   diagnostics, and asymptotic-rate estimates.
//! * [`solver`] — the implicit stepper (damped Newton inner solve), plus an
//!   explicit predictor–corrector reference integrator.
//! * [`problems`] — benchmark right-hand sides: a quadratic chaotic system,
//!   a discretized sub-diffusion equation, and two dissipative toy systems.
//! * [`analysis`] — step-size/stability ratios and observed algebraic decay
//!   indices extracted from computed trajectories.

pub mod analysis;
pub mod mlf;
pub mod problems;
pub mod solver;
pub mod volterra;
pub mod weights;
