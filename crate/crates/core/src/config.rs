//! Numeric tolerances and enumeration budgets.
//!
//! The underlying analysis assumes exact arithmetic; every floating-point
//! cutoff it leaves open is collected here so callers can see and override
//! each one.

/// Tolerances shared by all modules.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Multiplier on the `sigma_max * max(rows, cols) * eps` rank cutoff.
    pub rank_scale: f64,
    /// Relative tolerance for testing whether a point lies in a subspace:
    /// `dist(u, T) <= membership * ||u||`.
    pub membership: f64,
    /// Support threshold for kernel vectors, relative to the sup norm.
    pub support: f64,
    /// Relative residual allowed for a kernel vector: `||A_V u|| <= kernel_residual * ||u||`.
    pub kernel_residual: f64,
    /// Sign tolerance on the minimized Edmonds gap in membership answers.
    pub polytope: f64,
    /// Tolerance on `sum x_i = n` for basis-polytope queries.
    pub polytope_sum: f64,
    /// Termination tolerance for the min-norm-point procedure.
    pub minnorm_gap: f64,
    /// A basis determinant `d_I` counts as zero when below `det_zero * max_I d_I`.
    pub det_zero: f64,
    /// Hard cap on the number of subsets any enumeration is allowed to visit.
    pub subset_budget: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_scale: 100.0,
            membership: 1e-8,
            support: 1e-8,
            kernel_residual: 1e-8,
            polytope: 1e-7,
            polytope_sum: 1e-7,
            minnorm_gap: 1e-9,
            det_zero: 1e-12,
            subset_budget: 1_000_000,
        }
    }
}
