//! Barthe's concave program and radial isotropic position.
//!
//! For a point set `A = [u_1 .. u_m]` and coefficients `c`, maximize
//! `<c, t> - log det(sum_j e^{t_j} u_j u_j^T)`. The supremum is finite
//! exactly when `c` lies in the basis polytope, and an optimizer yields the
//! transform `R = (A e^T A^*)^{-1/2}` placing the points in radial
//! isotropic position. Effective bounds derived from the smallest nonzero
//! basis determinant confine the gauge-fixed optimizer to a box, so a
//! damped Newton iteration replaces the cutting-plane machinery while
//! meeting the same residual contract.

use itertools::Itertools;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::config::Tolerances;
use crate::error::Error;
use crate::instance::{self, PointSet};
use crate::linalg;
use crate::matroid::{self, Polytope, SfmMode};
use crate::Result;

/// A Barthe program instance: points plus a coefficient vector with
/// `sum c_i = n` and `0 <= c_i <= 1`.
#[derive(Debug, Clone)]
pub struct BartheProblem<'a> {
    pub points: &'a PointSet,
    pub c: DVector<f64>,
}

impl<'a> BartheProblem<'a> {
    pub fn new(points: &'a PointSet, c: DVector<f64>, tol: &Tolerances) -> Result<Self> {
        if c.len() != points.m() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has {} entries for {} points",
                c.len(),
                points.m()
            )));
        }
        let sum: f64 = c.iter().sum();
        if (sum - points.n() as f64).abs() > tol.polytope_sum {
            return Err(Error::InvalidArgument(format!(
                "coefficients must sum to n = {}, got {sum}",
                points.n()
            )));
        }
        if c.iter().any(|&v| v < -tol.polytope || v > 1.0 + tol.polytope) {
            return Err(Error::InvalidArgument(
                "coefficients must lie in [0, 1]".into(),
            ));
        }
        Ok(BartheProblem { points, c })
    }
}

/// Solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    /// `c` is outside the basis polytope, so the supremum is infinite.
    OutsidePolytope,
    IterationCap,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::OutsidePolytope => "outside_polytope",
            SolverStatus::IterationCap => "iteration_cap",
        }
    }
}

/// A solution to the Barthe program: the gauge-fixed coefficient vector,
/// the objective value, the isotropizing transform, and the verified
/// isotropy defect.
#[derive(Debug, Clone)]
pub struct BartheSolution {
    /// Optimizer with `min_j t_j = 0`.
    pub t: DVector<f64>,
    pub value: f64,
    /// Symmetric positive-definite `(A e^T A^*)^{-1/2}`.
    pub r: DMatrix<f64>,
    /// Entrywise sup norm of the isotropy defect `J`.
    pub residual_norm: f64,
    pub status: SolverStatus,
}

/// Box and value bounds for the optimizer, from the smallest nonzero
/// basis determinant `D` and the dilation slack `alpha`.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveBounds {
    pub alpha: f64,
    /// Smallest nonzero `d_I = det(A_I A_I^*)`.
    pub d_min: f64,
    /// `log(1/D)`: the optimal value stays strictly below this.
    pub value_bound: f64,
    /// `(2/alpha) log(1/D)`, clamped at zero: sup-norm box for the
    /// gauge-fixed optimizer.
    pub norm_bound: f64,
}

/// Compute the effective bounds for slack `alpha` in `(0, 1]`.
pub fn effective_bounds(points: &PointSet, alpha: f64, tol: &Tolerances) -> Result<EffectiveBounds> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1]".into()));
    }
    let (d_min, _) = instance::smallest_nonzero_basis_determinant(points, tol)?;
    let value_bound = (1.0 / d_min).ln();
    let norm_bound = ((2.0 / alpha) * value_bound).max(0.0);
    Ok(EffectiveBounds { alpha, d_min, value_bound, norm_bound })
}

/// `M(t) = sum_j e^{t_j} u_j u_j^T`.
fn weighted_gram(points: &PointSet, t: &DVector<f64>) -> DMatrix<f64> {
    let n = points.n();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..points.m() {
        let u = points.column(j);
        let w = t[j].exp();
        m.syger(w, &u, &u, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    for a in 0..n {
        for b in (a + 1)..n {
            m[(a, b)] = m[(b, a)];
        }
    }
    m
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<(f64, Cholesky<f64, nalgebra::Dyn>)> {
    let chol = Cholesky::new(m.clone()).ok_or_else(|| {
        Error::Evaluation(format!(
            "weighted Gram matrix is numerically singular (diagonal scale {:.3e})",
            m.diagonal().amax()
        ))
    })?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((logdet, chol))
}

/// Objective `<c, t> - log det(M(t))`.
pub fn objective(problem: &BartheProblem, t: &DVector<f64>) -> Result<f64> {
    let m = weighted_gram(problem.points, t);
    let (logdet, _) = log_det_spd(&m)?;
    Ok(problem.c.dot(t) - logdet)
}

/// Gradient `g_j = c_j - e^{t_j} <u_j, M(t)^{-1} u_j>`, sharing one
/// factorization across coordinates.
pub fn gradient(problem: &BartheProblem, t: &DVector<f64>) -> Result<DVector<f64>> {
    let m = weighted_gram(problem.points, t);
    let (_, chol) = log_det_spd(&m)?;
    let mut g = DVector::zeros(problem.points.m());
    for j in 0..problem.points.m() {
        let u = problem.points.column(j);
        let solved = chol.solve(&u);
        g[j] = problem.c[j] - t[j].exp() * u.dot(&solved);
    }
    Ok(g)
}

/// Hessian of `phi_A(t) = log det M(t)`:
/// `H_jk = delta_jk e^{t_j} P_jj - e^{t_j} e^{t_k} P_jk^2` with
/// `P = U^T M^{-1} U`.
fn hessian_phi(problem: &BartheProblem, t: &DVector<f64>) -> Result<DMatrix<f64>> {
    let points = problem.points;
    let m_count = points.m();
    let m = weighted_gram(points, t);
    let (_, chol) = log_det_spd(&m)?;
    let solved = chol.solve(points.matrix());
    let p = points.matrix().transpose() * solved;
    let mut h = DMatrix::zeros(m_count, m_count);
    for j in 0..m_count {
        for k in 0..m_count {
            let cross = (t[j].exp() * t[k].exp()).sqrt().powi(2) * p[(j, k)].powi(2);
            h[(j, k)] = if j == k {
                t[j].exp() * p[(j, j)] - cross
            } else {
                -cross
            };
        }
    }
    Ok(h)
}

/// The Cauchy-Binet expansion `sum_{|I|=n} e^{sum_{j in I} t_j} d_I`,
/// an independent route to `det(M(t))`.
pub fn cauchy_binet_expand(points: &PointSet, t: &DVector<f64>, tol: &Tolerances) -> Result<f64> {
    let (n, m) = (points.n(), points.m());
    let count = linalg::binomial(m as u64, n as u64);
    if count > tol.subset_budget {
        return Err(Error::Budget(format!(
            "Cauchy-Binet expansion over {count} subsets exceeds the budget"
        )));
    }
    let mut total = 0.0;
    for subset in (0..m).combinations(n) {
        let d_i = points.submatrix(&subset).determinant().powi(2);
        let t_i: f64 = subset.iter().map(|&j| t[j]).sum();
        total += t_i.exp() * d_i;
    }
    Ok(total)
}

/// Test `c in (1 - alpha) K_A` under the shifted-dilation semantics:
/// coordinates in `[0, 1]` summing to `n`, and for every nonnegative
/// direction with a zero coordinate the support function of `K_A` shrunk
/// by `1 - alpha` still dominates. Over the generating directions this
/// reduces to `sum_{i in S} c_i <= (1 - alpha) rank(S)` for every proper
/// subset `S`.
pub fn dilation_inside(
    points: &PointSet,
    c: &DVector<f64>,
    alpha: f64,
    tol: &Tolerances,
) -> Result<bool> {
    let m = points.m();
    if m > 22 {
        return Err(Error::Budget(format!(
            "dilation test enumerates 2^{m} subsets; supported up to m = 22"
        )));
    }
    let sum: f64 = c.iter().sum();
    if (sum - points.n() as f64).abs() > tol.polytope_sum {
        return Ok(false);
    }
    if c.iter().any(|&v| v < -tol.polytope || v > 1.0 + tol.polytope) {
        return Ok(false);
    }
    let scale = 1.0 - alpha;
    let ranker = matroid::MatroidRank::new(points, (0..m).collect(), tol)?;
    let full: u64 = if m == 64 { u64::MAX } else { (1 << m) - 1 };
    for mask in 1u64..full {
        let c_sum: f64 = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| c[i])
            .sum();
        if c_sum > scale * ranker.rank_mask(mask) as f64 + tol.polytope {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Isotropy defect of a candidate transform:
/// `J = sum_i c_i (Ru_i / ||Ru_i||) (Ru_i / ||Ru_i||)^T - Id`.
pub fn verify_radial_isotropy(
    points: &PointSet,
    c: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>)> {
    let n = points.n();
    let mut j = DMatrix::<f64>::identity(n, n) * -1.0;
    for i in 0..points.m() {
        let u = points.column(i);
        let v = r * &u;
        let norm = v.norm();
        if norm <= f64::EPSILON.sqrt() * u.norm() {
            return Err(Error::DegenerateDirection(format!(
                "R u_{i} is numerically zero (norm {norm:.3e})"
            )));
        }
        let w = v / norm;
        j.syger(c[i], &w, &w, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    for a in 0..n {
        for b in (a + 1)..n {
            j[(a, b)] = j[(b, a)];
        }
    }
    Ok((j.amax(), j))
}

/// Inverse square root of an SPD matrix via symmetric eigendecomposition,
/// flooring eigenvalues at `1e-14 * lambda_max`.
fn inverse_sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let lambda_max = eig.eigenvalues.amax();
    let floor = 1e-14 * lambda_max;
    let inv_sqrt = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.max(floor).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose()
}

fn gauge_fix_and_clamp(t: &mut DVector<f64>, ceiling: f64) {
    let min = t.min();
    for v in t.iter_mut() {
        *v = (*v - min).clamp(0.0, ceiling);
    }
}

/// Maximize the Barthe objective over the gauge-fixed box by damped
/// Newton with backtracking, then extract the isotropizing transform and
/// verify the residual.
pub fn solve_barthe(
    problem: &BartheProblem,
    tolerance: f64,
    bounds: &EffectiveBounds,
    tol: &Tolerances,
) -> Result<BartheSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let points = problem.points;
    let m_count = points.m();

    // A membership certificate settles infeasibility up front when the
    // submodular backend can afford it.
    if m_count <= 64 {
        let query = matroid::MembershipQuery {
            x: problem.c.iter().copied().collect(),
            polytope: Polytope::Basis,
        };
        let answer = match matroid::polytope_membership(points, &query, SfmMode::MinNorm, tol) {
            Ok(a) => Some(a),
            Err(Error::Convergence { .. }) if m_count <= 22 => Some(matroid::polytope_membership(
                points,
                &query,
                SfmMode::Exhaustive,
                tol,
            )?),
            Err(e) => return Err(e),
        };
        if let Some(answer) = answer {
            if !answer.inside {
                return finish(problem, DVector::zeros(m_count), SolverStatus::OutsidePolytope);
            }
        }
    }

    let ceiling = bounds.norm_bound + 1.0 + 0.1 * bounds.norm_bound;
    let mut t = DVector::<f64>::zeros(m_count);
    let iteration_cap = 10_000;

    for _ in 0..iteration_cap {
        let g = gradient(problem, &t)?;
        if g.amax() <= tolerance {
            return finish(problem, t, SolverStatus::Converged);
        }
        // Pinned to the box ceiling with an outward gradient: the iterate
        // wants to escape the region the bounds guarantee for feasible c.
        let pinned = (0..m_count).any(|j| t[j] >= ceiling - 1e-9 && g[j] > tolerance);
        if pinned {
            return finish(problem, t, SolverStatus::OutsidePolytope);
        }

        let direction = newton_direction(problem, &t, &g)?;
        let f0 = objective(problem, &t)?;
        let slope = g.dot(&direction);
        let (dir, slope) = if slope > 0.0 {
            (direction, slope)
        } else {
            (g.clone(), g.dot(&g))
        };

        let mut step = 1.0;
        let mut advanced = false;
        for _ in 0..60 {
            let mut candidate = &t + &dir * step;
            gauge_fix_and_clamp(&mut candidate, ceiling);
            match objective(problem, &candidate) {
                Ok(f) if f >= f0 + 1e-4 * step * slope => {
                    t = candidate;
                    advanced = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !advanced {
            // No ascent step left at this scale.
            return finish(problem, t, SolverStatus::IterationCap);
        }
    }
    finish(problem, t, SolverStatus::IterationCap)
}

/// Damped Newton direction for the concave objective: solve
/// `(H_phi + lambda I) dir = g`. The Hessian is singular along the gauge
/// direction, so a small ridge is always added.
fn newton_direction(
    problem: &BartheProblem,
    t: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    let h = hessian_phi(problem, t)?;
    let m = h.nrows();
    let scale = h.diagonal().amax().max(1e-30);
    let mut ridge = 1e-10 * scale;
    for _ in 0..20 {
        let mut damped = h.clone();
        for i in 0..m {
            damped[(i, i)] += ridge;
        }
        if let Some(chol) = Cholesky::new(damped) {
            return Ok(chol.solve(g));
        }
        ridge *= 10.0;
    }
    Ok(g.clone())
}

fn finish(problem: &BartheProblem, mut t: DVector<f64>, status: SolverStatus) -> Result<BartheSolution> {
    let min = t.min();
    for v in t.iter_mut() {
        *v -= min;
    }
    let value = objective(problem, &t).unwrap_or(f64::NEG_INFINITY);
    let m = weighted_gram(problem.points, &t);
    let r = inverse_sqrt_spd(&m);
    let residual_norm = verify_radial_isotropy(problem.points, &problem.c, &r)
        .map(|(norm, _)| norm)
        .unwrap_or(f64::INFINITY);
    Ok(BartheSolution { t, value, r, residual_norm, status })
}

/// Midpoint concavity diagnostics for `phi_A`.
#[derive(Debug, Clone, Copy)]
pub struct MidpointGap {
    /// `(phi(s) + phi(t))/2 - phi((s+t)/2)`, nonnegative by convexity.
    pub gap: f64,
    /// The explicit strict-convexity lower bound
    /// `b^2 exp(-(n+1)(||s|| + ||t||)) min_I d_I^2 / det(A A^*)`.
    pub lower_bound: f64,
    /// Shift-invariant separation of `s` and `t`.
    pub separation: f64,
    /// Whether the pairwise-support precondition of the quantitative
    /// bound holds for this point set.
    pub precondition_holds: bool,
}

/// Evaluate the midpoint convexity gap of `phi_A` together with the
/// quantitative lower bound.
pub fn concavity_midpoint_gap(
    points: &PointSet,
    s: &DVector<f64>,
    t: &DVector<f64>,
    tol: &Tolerances,
) -> Result<MidpointGap> {
    let m = points.m();
    if s.len() != m || t.len() != m {
        return Err(Error::InvalidArgument("s and t must have one entry per point".into()));
    }
    if s.iter().chain(t.iter()).any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("s and t must be componentwise nonnegative".into()));
    }
    let phi = |v: &DVector<f64>| -> Result<f64> {
        let (logdet, _) = log_det_spd(&weighted_gram(points, v))?;
        Ok(logdet)
    };
    let mid = (s + t) * 0.5;
    let gap = 0.5 * (phi(s)? + phi(t)?) - phi(&mid)?;

    let diff = s - t;
    let separation = 0.5 * (diff.max() - diff.min());
    let (d_min, _) = instance::smallest_nonzero_basis_determinant(points, tol)?;
    let gram_full = points.matrix() * points.matrix().transpose();
    let det_full = gram_full.determinant();
    let n = points.n() as f64;
    let lower_bound = separation.powi(2)
        * (-(n + 1.0) * (s.amax() + t.amax())).exp()
        * d_min.powi(2)
        / det_full;

    Ok(MidpointGap {
        gap,
        lower_bound,
        separation,
        precondition_holds: pairwise_support_condition(points, tol)?,
    })
}

/// The strict-convexity precondition: for every pair `i, j` there is a
/// common `(n-1)`-set `S` with both `d_{S + i}` and `d_{S + j}` nonzero.
pub fn pairwise_support_condition(points: &PointSet, tol: &Tolerances) -> Result<bool> {
    let (n, m) = (points.n(), points.m());
    if n == 1 {
        // S is empty; d_{{i}} != 0 means a nonzero column.
        let ok = (0..m).all(|i| points.column(i).norm() > 0.0);
        return Ok(ok);
    }
    let per_pair = linalg::binomial((m - 2) as u64, (n - 1) as u64);
    let total = per_pair.saturating_mul((m * m / 2) as u64);
    if total > tol.subset_budget {
        return Err(Error::Budget(format!(
            "pairwise support check needs {total} subset tests"
        )));
    }
    let full_rank = |subset: &[usize]| linalg::numerical_rank(&points.submatrix(subset), tol) == n;
    for i in 0..m {
        for j in (i + 1)..m {
            let rest: Vec<usize> = (0..m).filter(|&k| k != i && k != j).collect();
            let mut found = false;
            for s in rest.iter().copied().combinations(n - 1) {
                let mut with_i = s.clone();
                with_i.push(i);
                let mut with_j = s;
                with_j.push(j);
                if full_rank(&with_i) && full_rank(&with_j) {
                    found = true;
                    break;
                }
            }
            if !found {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
