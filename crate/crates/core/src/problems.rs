//! Benchmark systems with known structural constants.
//!
//! Each constructor returns an [`FOdeProblem`] whose right-hand side comes
//! with the metadata the stability machinery reads: a one-sided Lipschitz
//! constant λ where one is available, and a dissipativity pair (a, b) with
//! ⟨f(x), x⟩ ≤ a − b‖x‖². The constants are not estimated, they follow from
//! short energy computations:
//!
//! * quadratic Lorenz-type flow: the cross terms cancel in ⟨f(x), x⟩,
//!   leaving −c₁x₁² + x₂ − c₂x₂² − c₃x₃² ≤ 1/2 − b‖x‖² with
//!   b = min{c₁, c₂ − 1/2, c₃},
//! * sub-diffusion: f(U) = −kAU with A the 5-point Dirichlet Laplacian on
//!   the unit square, so λ = −kλ₁ where λ₁ is known in closed form,
//! * the scalar cubic −x³ − x and the rotation-coupled pair
//!   (−10xy² − x, 10x²y − y), both with ⟨f(z), z⟩ ≤ −‖z‖².

use crate::solver::FOdeProblem;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemsError {
    #[error("need c1 > 0, c2 > 1/2, c3 > 0, got ({c1}, {c2}, {c3})")]
    BadLorenzParams { c1: f64, c2: f64, c3: f64 },
    #[error("grid needs nx, ny ≥ 2 and k > 0, got nx {nx}, ny {ny}, k {k}")]
    BadGrid { nx: usize, ny: usize, k: f64 },
}

/// Coefficients of the quadratic three-component flow
/// ẋ-like system f(x) = (x₃ + (x₂−c₁)x₁, 1 − c₂x₂ − x₁², −x₁ − c₃x₃).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzParams {
    c1: f64,
    c2: f64,
    c3: f64,
}

impl LorenzParams {
    /// Requires c₁, c₃ > 0 and c₂ > 1/2 so that the absorbing-ball
    /// constant b = min{c₁, c₂ − 1/2, c₃} is positive.
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self, ProblemsError> {
        if c1 > 0.0 && c2 > 0.5 && c3 > 0.0 {
            Ok(Self { c1, c2, c3 })
        } else {
            Err(ProblemsError::BadLorenzParams { c1, c2, c3 })
        }
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn c3(&self) -> f64 {
        self.c3
    }

    /// (a, b) of the energy inequality ⟨f(x), x⟩ ≤ a − b‖x‖².
    pub fn dissipativity(&self) -> (f64, f64) {
        let b = self.c1.min(self.c2 - 0.5).min(self.c3);
        (0.5, b)
    }
}

/// Quadratic dissipative flow in three components.
///
/// ⟨f(x), x⟩ = −c₁x₁² + x₂ − c₂x₂² − c₃x₃² after the cubic cross terms
/// cancel; bounding x₂ ≤ 1/2 + x₂²/2 gives the attached (a, b).
pub fn lorenz_problem(params: LorenzParams) -> FOdeProblem {
    let (a, b) = params.dissipativity();
    let LorenzParams { c1, c2, c3 } = params;
    FOdeProblem::new(3, move |_t, x, out| {
        out[0] = x[2] + (x[1] - c1) * x[0];
        out[1] = 1.0 - c2 * x[1] - x[0] * x[0];
        out[2] = -x[0] - c3 * x[2];
    })
    .with_jacobian(move |_t, x, out| {
        out[0] = x[1] - c1;
        out[1] = x[0];
        out[2] = 1.0;
        out[3] = -2.0 * x[0];
        out[4] = -c2;
        out[5] = 0.0;
        out[6] = -1.0;
        out[7] = 0.0;
        out[8] = -c3;
    })
    .with_dissipativity(a, b)
}

/// 5-point Dirichlet Laplacian on the unit square, stored as its stencil.
///
/// Row/column index of interior node (i, j), 1 ≤ i ≤ nx, 1 ≤ j ≤ ny, is
/// (j−1)·nx + (i−1); the operator is A = −Δ_h (positive definite).
#[derive(Debug, Clone)]
pub struct Laplacian {
    nx: usize,
    ny: usize,
    /// 1/Δx²
    cx: f64,
    /// 1/Δy²
    cy: f64,
}

impl Laplacian {
    fn new(nx: usize, ny: usize) -> Self {
        let dx = 1.0 / (nx as f64 + 1.0);
        let dy = 1.0 / (ny as f64 + 1.0);
        Self {
            nx,
            ny,
            cx: 1.0 / (dx * dx),
            cy: 1.0 / (dy * dy),
        }
    }

    pub fn dimension(&self) -> usize {
        self.nx * self.ny
    }

    /// out = A·u.
    pub fn matvec(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        debug_assert_eq!(u.len(), nx * ny);
        debug_assert_eq!(out.len(), nx * ny);
        let diag = 2.0 * self.cx + 2.0 * self.cy;
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                let mut v = diag * u[idx];
                if i > 0 {
                    v -= self.cx * u[idx - 1];
                }
                if i + 1 < nx {
                    v -= self.cx * u[idx + 1];
                }
                if j > 0 {
                    v -= self.cy * u[idx - nx];
                }
                if j + 1 < ny {
                    v -= self.cy * u[idx + nx];
                }
                out[idx] = v;
            }
        }
    }

    /// Dense row-major copy, for small-grid oracles and Jacobian assembly.
    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dimension();
        let mut m = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for jcol in 0..d {
            e[jcol] = 1.0;
            self.matvec(&e, &mut col);
            e[jcol] = 0.0;
            for (irow, &v) in col.iter().enumerate() {
                m[irow * d + jcol] = v;
            }
        }
        m
    }

    /// Gershgorin lower bounds per row: diagonal minus the sum of
    /// off-diagonal magnitudes. For this stencil each bound is ≥ 0, and
    /// rows touching the boundary are strictly positive.
    pub fn gershgorin_lower_bounds(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let diag = 2.0 * self.cx + 2.0 * self.cy;
        let mut bounds = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let mut radius = 0.0;
                if i > 0 {
                    radius += self.cx;
                }
                if i + 1 < nx {
                    radius += self.cx;
                }
                if j > 0 {
                    radius += self.cy;
                }
                if j + 1 < ny {
                    radius += self.cy;
                }
                bounds.push(diag - radius);
            }
        }
        bounds
    }
}

/// Semi-discrete diffusion metadata: grid, coefficient, spectrum bound.
#[derive(Debug, Clone)]
pub struct SubdiffusionGrid {
    nx: usize,
    ny: usize,
    k: f64,
    laplacian: Arc<Laplacian>,
    lambda1: f64,
}

impl SubdiffusionGrid {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dimension(&self) -> usize {
        self.nx * self.ny
    }

    pub fn laplacian(&self) -> &Laplacian {
        &self.laplacian
    }

    /// Smallest eigenvalue of A, known in closed form for the product
    /// eigenfunctions sin(πx)sin(πy):
    /// λ₁ = (2 − 2cos(πΔx))/Δx² + (2 − 2cos(πΔy))/Δy².
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// One-sided Lipschitz constant of U ↦ −kAU, i.e. μ = −kλ₁ < 0.
    pub fn mu(&self) -> f64 {
        -self.k * self.lambda1
    }

    /// Samples a function of (x, y) at the interior nodes.
    pub fn project(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let dx = 1.0 / (self.nx as f64 + 1.0);
        let dy = 1.0 / (self.ny as f64 + 1.0);
        let mut u = Vec::with_capacity(self.dimension());
        for j in 1..=self.ny {
            for i in 1..=self.nx {
                u.push(f(i as f64 * dx, j as f64 * dy));
            }
        }
        u
    }

    /// u₀(x, y) = sin(2πx)·sin(2πy): smooth, mean-zero, one sign per
    /// quadrant of the square.
    pub fn initial_sine(&self) -> Vec<f64> {
        self.project(|x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).sin())
    }

    /// u₀(x, y) = 10·x y (1−x)(1−y): a positive polynomial bump.
    pub fn initial_bump(&self) -> Vec<f64> {
        self.project(|x, y| 10.0 * x * y * (1.0 - x) * (1.0 - y))
    }
}

/// Semi-discrete sub-diffusion system D^α U = −kAU on nx×ny interior
/// nodes of the unit square, homogeneous Dirichlet boundary.
///
/// The Jacobian is the constant matrix −kA, so implicit runs factorize
/// exactly once. Returns the problem plus the grid metadata.
pub fn subdiffusion_problem(
    nx: usize,
    ny: usize,
    k: f64,
) -> Result<(FOdeProblem, SubdiffusionGrid), ProblemsError> {
    if nx < 2 || ny < 2 || !(k > 0.0) || !k.is_finite() {
        return Err(ProblemsError::BadGrid { nx, ny, k });
    }
    let laplacian = Arc::new(Laplacian::new(nx, ny));
    let dx = 1.0 / (nx as f64 + 1.0);
    let dy = 1.0 / (ny as f64 + 1.0);
    let lambda1 = (2.0 - 2.0 * (PI * dx).cos()) / (dx * dx)
        + (2.0 - 2.0 * (PI * dy).cos()) / (dy * dy);
    let grid = SubdiffusionGrid {
        nx,
        ny,
        k,
        laplacian: Arc::clone(&laplacian),
        lambda1,
    };

    let d = nx * ny;
    let lap_rhs = Arc::clone(&laplacian);
    let lap_jac = Arc::clone(&laplacian);
    let problem = FOdeProblem::new(d, move |_t, u, out| {
        lap_rhs.matvec(u, out);
        for v in out.iter_mut() {
            *v = -k * *v;
        }
    })
    .with_jacobian(move |_t, _u, out| {
        // constant −kA, assembled column by column through the stencil
        let d = lap_jac.dimension();
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for jcol in 0..d {
            e[jcol] = 1.0;
            lap_jac.matvec(&e, &mut col);
            e[jcol] = 0.0;
            for irow in 0..d {
                out[irow * d + jcol] = -k * col[irow];
            }
        }
    })
    .with_one_sided_lipschitz(-k * lambda1);
    Ok((problem, grid))
}

/// Scalar cubic contraction D^α x = −x³ − x.
///
/// (f(x) − f(y))(x − y) = −(x² + xy + y² + 1)(x − y)² ≤ −(x − y)², so
/// λ = −1; also ⟨f(x), x⟩ = −x⁴ − x² ≤ −x², giving (a, b) = (0, 1).
pub fn scalar_cubic_problem() -> FOdeProblem {
    FOdeProblem::new(1, |_t, x, out| out[0] = -x[0].powi(3) - x[0])
        .with_jacobian(|_t, x, out| out[0] = -3.0 * x[0] * x[0] - 1.0)
        .with_one_sided_lipschitz(-1.0)
        .with_dissipativity(0.0, 1.0)
}

/// Rotation-coupled pair f(x, y) = (−10xy² − x, 10x²y − y).
///
/// The cubic cross terms cancel exactly in the energy product:
/// ⟨f(z), z⟩ = −10x²y² − x² + 10x²y² − y² = −‖z‖², so (a, b) = (0, 1).
pub fn coupled_problem() -> FOdeProblem {
    FOdeProblem::new(2, |_t, z, out| {
        let (x, y) = (z[0], z[1]);
        out[0] = -10.0 * x * y * y - x;
        out[1] = 10.0 * x * x * y - y;
    })
    .with_jacobian(|_t, z, out| {
        let (x, y) = (z[0], z[1]);
        out[0] = -10.0 * y * y - 1.0;
        out[1] = -20.0 * x * y;
        out[2] = 20.0 * x * y;
        out[3] = 10.0 * x * x - 1.0;
    })
    .with_dissipativity(0.0, 1.0)
}
