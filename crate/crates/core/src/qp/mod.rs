//! Sparse convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀ P x + qᵀ x + c
//! subject to  l ≤ A x ≤ u
//! ```
//!
//! with `P` symmetric positive semidefinite and bounds that may be infinite.
//! [`solve`] runs a primal-dual interior point method whose Newton systems are
//! reduced to the normal equations `P + Aᵀ W A` and factorized with an envelope
//! Cholesky, so banded programs (trajectory smoothing) solve in time linear in
//! the number of variables.

mod ipm;
pub mod skyline;
pub mod sparse;

use std::fmt;

use thiserror::Error;

pub use ipm::solve_with_warm_start;
pub use sparse::CsrMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("quadratic term ({0}, {1}) is below the diagonal; pass the upper triangle only")]
    LowerTriangle(usize, usize),
    #[error("objective matrix has negative diagonal entry {value} at {index}")]
    NotPositiveSemidefinite { index: usize, value: f64 },
    #[error("constraint row {row} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { row: usize, lower: f64, upper: f64 },
    #[error("constraint row {0} is an equality; only inequality rows are supported")]
    EqualityRow(usize),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
}

/// A validated quadratic program.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    n: usize,
    /// Full symmetric storage (both triangles).
    p: CsrMatrix,
    q: Vec<f64>,
    a: CsrMatrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constant: f64,
}

impl ConvexProgram {
    /// `p_upper` holds the upper triangle of `P` as `(row, col, value)` with
    /// `row <= col`; `a` holds the constraint matrix triplets.
    pub fn new(
        n: usize,
        p_upper: &[(usize, usize, f64)],
        q: Vec<f64>,
        a: &[(usize, usize, f64)],
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, QpError> {
        if q.len() != n {
            return Err(QpError::Dimension(format!("q has {} entries, expected {n}", q.len())));
        }
        if lower.len() != upper.len() {
            return Err(QpError::Dimension(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        let m = lower.len();
        let mut sym = Vec::with_capacity(2 * p_upper.len());
        for &(i, j, v) in p_upper {
            if i >= n || j >= n {
                return Err(QpError::Dimension(format!("P entry ({i}, {j}) outside {n}x{n}")));
            }
            if i > j {
                return Err(QpError::LowerTriangle(i, j));
            }
            if !v.is_finite() {
                return Err(QpError::NonFinite("P"));
            }
            sym.push((i, j, v));
            if i != j {
                sym.push((j, i, v));
            }
        }
        for &(r, c, v) in a {
            if r >= m || c >= n {
                return Err(QpError::Dimension(format!("A entry ({r}, {c}) outside {m}x{n}")));
            }
            if !v.is_finite() {
                return Err(QpError::NonFinite("A"));
            }
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite("q"));
        }
        for (row, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(QpError::NonFinite("bounds"));
            }
            if lo > hi {
                return Err(QpError::InvertedBounds { row, lower: lo, upper: hi });
            }
            if lo == hi {
                return Err(QpError::EqualityRow(row));
            }
        }
        let p = CsrMatrix::from_triplets(n, n, &sym);
        for (i, j, v) in p.iter() {
            if i == j && v < 0.0 {
                return Err(QpError::NotPositiveSemidefinite { index: i, value: v });
            }
        }
        Ok(Self {
            n,
            p,
            q,
            a: CsrMatrix::from_triplets(m, n, a),
            lower,
            upper,
            constant: 0.0,
        })
    }

    /// Adds a constant offset to the objective (reported, not optimized).
    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.lower.len()
    }

    pub fn p(&self) -> &CsrMatrix {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.p.mul_vec(x);
        let quad: f64 = px.iter().zip(x).map(|(a, b)| a * b).sum();
        let lin: f64 = self.q.iter().zip(x).map(|(a, b)| a * b).sum();
        0.5 * quad + lin + self.constant
    }

    /// Largest absolute bound violation of `A x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x);
        ax.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Incremental assembly of a [`ConvexProgram`].
#[derive(Debug, Default, Clone)]
pub struct ProgramBuilder {
    n: usize,
    p: Vec<(usize, usize, f64)>,
    q: Vec<f64>,
    a: Vec<(usize, usize, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constant: f64,
}

impl ProgramBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            q: vec![0.0; n],
            ..Default::default()
        }
    }

    /// Adds `v` to `P[i][j]` (and `P[j][i]`). Diagonal entries add `v` once.
    pub fn add_quadratic(&mut self, i: usize, j: usize, v: f64) {
        self.p.push((i.min(j), i.max(j), v));
    }

    pub fn add_linear(&mut self, i: usize, v: f64) {
        self.q[i] += v;
    }

    pub fn add_constant(&mut self, v: f64) {
        self.constant += v;
    }

    /// Adds `(x_i - target)²` to the objective.
    pub fn add_squared_deviation(&mut self, i: usize, target: f64) {
        self.add_quadratic(i, i, 2.0);
        self.add_linear(i, -2.0 * target);
        self.add_constant(target * target);
    }

    /// Adds the row `lower ≤ Σ coeff·x ≤ upper`; returns its index.
    pub fn add_row(&mut self, terms: &[(usize, f64)], lower: f64, upper: f64) -> usize {
        let row = self.lower.len();
        self.a.extend(terms.iter().filter(|t| t.1 != 0.0).map(|&(c, v)| (row, c, v)));
        self.lower.push(lower);
        self.upper.push(upper);
        row
    }

    pub fn num_rows(&self) -> usize {
        self.lower.len()
    }

    pub fn build(self) -> Result<ConvexProgram, QpError> {
        Ok(ConvexProgram::new(self.n, &self.p, self.q, &self.a, self.lower, self.upper)?
            .with_constant(self.constant))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Solved,
    MaxIters,
    Infeasible,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Solved => "solved",
            Status::MaxIters => "max-iters",
            Status::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub max_iters: usize,
    /// Keep per-iteration residuals in [`Solution::trace`].
    pub record_trace: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            max_iters: 20_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mu: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub step: f64,
}

/// Result of a solve.
///
/// `primal_residual` is the largest absolute violation of `l ≤ A x ≤ u` at `x`.
/// `dual_residual` is the stationarity error `‖P x + q + Aᵀ y‖∞` normalized by
/// the magnitude of its terms, and `gap` the complementarity normalized by the
/// objective. All three are at most `eps_abs` when `status` is `Solved`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Constraint multipliers (positive on active upper bounds).
    pub y: Vec<f64>,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<IterationRecord>,
}

/// Solves `prog` to tolerance `eps_abs` within `max_iters` iterations.
pub fn solve(prog: &ConvexProgram, eps_abs: f64, max_iters: usize) -> Solution {
    solve_with_warm_start(
        prog,
        &SolverSettings {
            eps_abs,
            max_iters,
            record_trace: false,
        },
        None,
    )
}

/// Residual trace as CSV (`iteration,mu,primal_residual,dual_residual,gap,step`).
pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,mu,primal_residual,dual_residual,gap,step\n");
    for r in trace {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{}\n",
            r.iteration, r.mu, r.primal_residual, r.dual_residual, r.gap, r.step
        ));
    }
    out
}
