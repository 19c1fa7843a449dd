//! The linear matroid of columns: rank oracle, submodular function
//! minimization (exhaustive and Fujishige-Wolfe min-norm point), and
//! certified membership testing for the independent-set polytope `P` and
//! the basis polytope `K_A`.
//!
//! Membership reduces to minimizing the Edmonds gap
//! `rank({u_i : i in U}) - sum_{i in U} x_i`; the minimum is nonnegative
//! exactly when `x` lies in `P`, and the minimizing set is a violation
//! certificate otherwise.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::Error;
use crate::instance::{LabeledInstance, PointSet};
use crate::linalg;
use crate::Result;

/// Numerical rank of the columns of `points` indexed by `u`.
pub fn rank(points: &PointSet, u: &[usize], tol: &Tolerances) -> usize {
    if u.is_empty() {
        return 0;
    }
    linalg::numerical_rank(&points.submatrix(u), tol)
}

/// Rank oracle over a fixed active column set, memoized by subset bitmask.
///
/// Ground element `i` refers to `cols[i]`; the Wolfe procedure re-queries
/// the same prefix chains many times, so ranks are cached per mask.
pub struct MatroidRank<'a> {
    points: &'a PointSet,
    cols: Vec<usize>,
    tol: Tolerances,
    cache: RefCell<HashMap<u64, usize>>,
}

impl<'a> MatroidRank<'a> {
    pub fn new(points: &'a PointSet, cols: Vec<usize>, tol: &Tolerances) -> Result<Self> {
        if cols.len() > 64 {
            return Err(Error::Budget(format!(
                "mask-based rank oracle supports at most 64 columns, got {}",
                cols.len()
            )));
        }
        if cols.iter().any(|&c| c >= points.m()) {
            return Err(Error::InvalidArgument("column index out of range".into()));
        }
        Ok(MatroidRank {
            points,
            cols,
            tol: tol.clone(),
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn ground_size(&self) -> usize {
        self.cols.len()
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn rank_mask(&self, mask: u64) -> usize {
        if mask == 0 {
            return 0;
        }
        if let Some(&r) = self.cache.borrow().get(&mask) {
            return r;
        }
        let subset: Vec<usize> = (0..self.cols.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.cols[i])
            .collect();
        let r = rank(self.points, &subset, &self.tol);
        self.cache.borrow_mut().insert(mask, r);
        r
    }
}

/// A normalized submodular set function on a ground set of at most 64
/// elements: `eval_mask(0) = 0`.
pub trait SubmodularOracle {
    fn ground_size(&self) -> usize;
    fn eval_mask(&self, mask: u64) -> f64;
}

/// The Edmonds gap `rank(U) - sum_{i in U} x_i` as a submodular oracle.
pub struct EdmondsOracle<'a, 'b> {
    pub rank: &'b MatroidRank<'a>,
    pub x: Vec<f64>,
}

impl SubmodularOracle for EdmondsOracle<'_, '_> {
    fn ground_size(&self) -> usize {
        self.rank.ground_size()
    }

    fn eval_mask(&self, mask: u64) -> f64 {
        let mut s = 0.0;
        for (i, xi) in self.x.iter().enumerate() {
            if mask & (1 << i) != 0 {
                s += xi;
            }
        }
        self.rank.rank_mask(mask) as f64 - s
    }
}

/// Minimization backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfmMode {
    /// Exact subset enumeration; ground sets of at most 22 elements.
    Exhaustive,
    /// Fujishige-Wolfe minimum-norm point over the base polytope.
    MinNorm,
}

/// Result of a submodular minimization.
#[derive(Debug, Clone)]
pub struct SfmOutcome {
    /// Minimizing subset, as sorted ground positions.
    pub subset: Vec<usize>,
    pub value: f64,
    /// `||x||^2` after each major cycle of the Wolfe procedure (empty for
    /// the exhaustive backend); non-increasing.
    pub norm_trace: Vec<f64>,
}

/// Minimize a normalized submodular function; the empty set makes the
/// minimum at most zero.
pub fn submodular_minimize(
    oracle: &dyn SubmodularOracle,
    mode: SfmMode,
    tol: &Tolerances,
) -> Result<SfmOutcome> {
    match mode {
        SfmMode::Exhaustive => minimize_exhaustive(oracle),
        SfmMode::MinNorm => minimize_minnorm(oracle, tol),
    }
}

fn mask_to_subset(mask: u64, g: usize) -> Vec<usize> {
    (0..g).filter(|i| mask & (1 << i) != 0).collect()
}

fn minimize_exhaustive(oracle: &dyn SubmodularOracle) -> Result<SfmOutcome> {
    let g = oracle.ground_size();
    if g > 22 {
        return Err(Error::Budget(format!(
            "exhaustive minimization over 2^{g} subsets exceeds the 2^22 cap"
        )));
    }
    let mut best_mask = 0u64;
    let mut best = 0.0f64;
    for mask in 1u64..(1 << g) {
        let v = oracle.eval_mask(mask);
        if v < best {
            best = v;
            best_mask = mask;
        }
    }
    Ok(SfmOutcome {
        subset: mask_to_subset(best_mask, g),
        value: best,
        norm_trace: Vec::new(),
    })
}

/// Greedy linear optimization over the base polytope: for weights `w`,
/// visit elements in ascending weight order and take telescoping
/// marginals. Returns the minimizing vertex of `<w, q>`.
fn greedy_vertex(oracle: &dyn SubmodularOracle, w: &[f64]) -> Vec<f64> {
    let g = oracle.ground_size();
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap().then(a.cmp(&b)));
    let mut q = vec![0.0; g];
    let mut mask = 0u64;
    let mut prev = 0.0;
    for &i in &order {
        mask |= 1 << i;
        let cur = oracle.eval_mask(mask);
        q[i] = cur - prev;
        prev = cur;
    }
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Affine minimizer of `||S lambda||` subject to `sum lambda = 1`, via the
/// KKT system on the Gram matrix. Falls back to a ridge when singular.
fn affine_minimizer(corral: &[Vec<f64>]) -> Vec<f64> {
    let k = corral.len();
    if k == 1 {
        return vec![1.0];
    }
    let mut ridge = 0.0;
    loop {
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        for i in 0..k {
            for j in 0..k {
                kkt[(i, j)] = dot(&corral[i], &corral[j]) + if i == j { ridge } else { 0.0 };
            }
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        if let Some(sol) = kkt.full_piv_lu().solve(&rhs) {
            let lambda: Vec<f64> = sol.iter().take(k).copied().collect();
            if lambda.iter().all(|v| v.is_finite()) {
                return lambda;
            }
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
        if ridge > 1.0 {
            // Degenerate corral; spread the weight evenly.
            return vec![1.0 / k as f64; k];
        }
    }
}

fn combination(corral: &[Vec<f64>], mu: &[f64], g: usize) -> Vec<f64> {
    let mut x = vec![0.0; g];
    for (s, &c) in corral.iter().zip(mu) {
        for i in 0..g {
            x[i] += c * s[i];
        }
    }
    x
}

/// Read the minimizing set off the min-norm point: scan prefixes in
/// ascending coordinate order and keep the best one.
fn best_prefix(oracle: &dyn SubmodularOracle, x: &[f64]) -> (Vec<usize>, f64) {
    let g = oracle.ground_size();
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
    let mut best_mask = 0u64;
    let mut best = 0.0;
    let mut mask = 0u64;
    for &i in &order {
        mask |= 1 << i;
        let v = oracle.eval_mask(mask);
        if v < best {
            best = v;
            best_mask = mask;
        }
    }
    (mask_to_subset(best_mask, g), best)
}

fn minimize_minnorm(oracle: &dyn SubmodularOracle, tol: &Tolerances) -> Result<SfmOutcome> {
    let g = oracle.ground_size();
    if g == 0 {
        return Ok(SfmOutcome { subset: vec![], value: 0.0, norm_trace: vec![] });
    }
    let coeff_eps = 1e-12;
    let major_cap = 10 * g * g + 20;

    let mut corral: Vec<Vec<f64>> = vec![greedy_vertex(oracle, &vec![0.0; g])];
    let mut mu: Vec<f64> = vec![1.0];
    let mut x = corral[0].clone();
    let mut norm_trace = Vec::new();

    for _ in 0..major_cap {
        let q = greedy_vertex(oracle, &x);
        let xx = dot(&x, &x);
        let gap = xx - dot(&x, &q);
        norm_trace.push(xx);
        if gap <= tol.minnorm_gap * (1.0 + xx) {
            let (subset, value) = best_prefix(oracle, &x);
            return Ok(SfmOutcome { subset, value, norm_trace });
        }
        corral.push(q);
        mu.push(0.0);

        // Minor cycles: project onto the affine hull of the corral, walking
        // back to the simplex boundary whenever a coefficient goes negative.
        loop {
            let lambda = affine_minimizer(&corral);
            if lambda.iter().all(|&l| l > coeff_eps) {
                mu = lambda;
                x = combination(&corral, &mu, g);
                break;
            }
            let mut theta = 1.0f64;
            for i in 0..corral.len() {
                if lambda[i] < coeff_eps {
                    let denom = mu[i] - lambda[i];
                    if denom > 0.0 {
                        theta = theta.min(mu[i] / denom);
                    }
                }
            }
            let theta = theta.clamp(0.0, 1.0);
            for i in 0..mu.len() {
                mu[i] = (1.0 - theta) * mu[i] + theta * lambda[i];
            }
            // Drop vanished vertices.
            let mut keep_corral = Vec::new();
            let mut keep_mu = Vec::new();
            for (s, &c) in corral.iter().zip(&mu) {
                if c > coeff_eps {
                    keep_corral.push(s.clone());
                    keep_mu.push(c);
                }
            }
            if keep_corral.is_empty() {
                keep_corral.push(corral.last().unwrap().clone());
                keep_mu.push(1.0);
            }
            let total: f64 = keep_mu.iter().sum();
            for c in &mut keep_mu {
                *c /= total;
            }
            corral = keep_corral;
            mu = keep_mu;
            x = combination(&corral, &mu, g);
            if corral.len() == 1 {
                break;
            }
        }
    }
    let (_, best) = best_prefix(oracle, &x);
    Err(Error::Convergence { best })
}

/// Which polytope a membership query targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polytope {
    /// Independent-set polytope `P`.
    IndependentSet,
    /// Basis polytope `K_A`: the facet of `P` with `sum x_i = n`.
    Basis,
}

/// A membership query: a vector in `[0,1]^m` and the target polytope.
#[derive(Debug, Clone)]
pub struct MembershipQuery {
    pub x: Vec<f64>,
    pub polytope: Polytope,
}

/// How a violation was detected. The Edmonds certificate semantics
/// (`rank(U) < sum_{i in U} x_i`) apply to `EdmondsGap`, `Box`, and the
/// oversum case; a negative coordinate or an undersum basis query is
/// outside for reasons the rank function cannot witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    Inside,
    EdmondsGap,
    BoxViolation,
    NegativeCoordinate,
    SumMismatch,
}

/// Membership verdict with the minimized Edmonds gap and its certificate.
#[derive(Debug, Clone)]
pub struct MembershipAnswer {
    pub inside: bool,
    pub min_value: f64,
    /// Ground positions achieving `min_value`; when outside with an
    /// Edmonds-style kind, `rank(U) - sum_{i in U} x_i = min_value`.
    pub certificate: Vec<usize>,
    pub kind: AnswerKind,
}

/// Membership for the columns `cols` of `points`; bases are size-`n`
/// independent sets in the ambient space, so the basis facet is
/// `sum x_i = n` even on restricted column sets.
pub fn polytope_membership_on(
    points: &PointSet,
    cols: &[usize],
    x: &[f64],
    polytope: Polytope,
    mode: SfmMode,
    tol: &Tolerances,
) -> Result<MembershipAnswer> {
    if x.len() != cols.len() {
        return Err(Error::InvalidArgument(format!(
            "query has {} coordinates for {} columns",
            x.len(),
            cols.len()
        )));
    }
    let n = points.n() as f64;

    for (i, &xi) in x.iter().enumerate() {
        if xi < -tol.polytope {
            return Ok(MembershipAnswer {
                inside: false,
                min_value: xi,
                certificate: vec![i],
                kind: AnswerKind::NegativeCoordinate,
            });
        }
    }
    let ranker = MatroidRank::new(points, cols.to_vec(), tol)?;
    for (i, &xi) in x.iter().enumerate() {
        if xi > 1.0 + tol.polytope {
            let r = ranker.rank_mask(1 << i) as f64;
            return Ok(MembershipAnswer {
                inside: false,
                min_value: r - xi,
                certificate: vec![i],
                kind: AnswerKind::BoxViolation,
            });
        }
    }
    if polytope == Polytope::Basis {
        let sum: f64 = x.iter().sum();
        if (sum - n).abs() > tol.polytope_sum {
            let (min_value, certificate) = if sum > n {
                let full: Vec<usize> = (0..cols.len()).collect();
                let r = rank(points, cols, tol) as f64;
                (r - sum, full)
            } else {
                (sum - n, Vec::new())
            };
            return Ok(MembershipAnswer {
                inside: false,
                min_value,
                certificate,
                kind: AnswerKind::SumMismatch,
            });
        }
    }

    let oracle = EdmondsOracle { rank: &ranker, x: x.to_vec() };
    let outcome = submodular_minimize(&oracle, mode, tol)?;
    let inside = outcome.value >= -tol.polytope;
    Ok(MembershipAnswer {
        inside,
        min_value: outcome.value,
        certificate: outcome.subset,
        kind: if inside { AnswerKind::Inside } else { AnswerKind::EdmondsGap },
    })
}

/// Membership of `query.x` for the full column set.
pub fn polytope_membership(
    points: &PointSet,
    query: &MembershipQuery,
    mode: SfmMode,
    tol: &Tolerances,
) -> Result<MembershipAnswer> {
    let cols: Vec<usize> = (0..points.m()).collect();
    polytope_membership_on(points, &cols, &query.x, query.polytope, mode, tol)
}

/// Closed-form membership for instances in general position: the polytope
/// collapses to the box constraints, the total-sum constraint, and the
/// inlier-sum constraint `sum_{i in L} x_i <= d`.
pub fn closed_form_membership(
    instance: &LabeledInstance,
    x: &[f64],
    polytope: Polytope,
    tol: &Tolerances,
) -> Result<MembershipAnswer> {
    let points = &instance.points;
    if x.len() != points.m() {
        return Err(Error::InvalidArgument(format!(
            "query has {} coordinates for {} columns",
            x.len(),
            points.m()
        )));
    }
    let n = points.n() as f64;
    for (i, &xi) in x.iter().enumerate() {
        if xi < -tol.polytope {
            return Ok(MembershipAnswer {
                inside: false,
                min_value: xi,
                certificate: vec![i],
                kind: AnswerKind::NegativeCoordinate,
            });
        }
    }
    for (i, &xi) in x.iter().enumerate() {
        if xi > 1.0 + tol.polytope {
            let r = rank(points, &[i], tol) as f64;
            return Ok(MembershipAnswer {
                inside: false,
                min_value: r - xi,
                certificate: vec![i],
                kind: AnswerKind::BoxViolation,
            });
        }
    }
    let sum: f64 = x.iter().sum();
    match polytope {
        Polytope::Basis => {
            if (sum - n).abs() > tol.polytope_sum {
                let (min_value, certificate) = if sum > n {
                    (n - sum, (0..points.m()).collect())
                } else {
                    (sum - n, Vec::new())
                };
                return Ok(MembershipAnswer {
                    inside: false,
                    min_value,
                    certificate,
                    kind: AnswerKind::SumMismatch,
                });
            }
        }
        Polytope::IndependentSet => {
            if sum - n > tol.polytope {
                return Ok(MembershipAnswer {
                    inside: false,
                    min_value: n - sum,
                    certificate: (0..points.m()).collect(),
                    kind: AnswerKind::EdmondsGap,
                });
            }
        }
    }
    let inlier_sum: f64 = instance.inliers.iter().map(|&i| x[i]).sum();
    let inlier_rank = rank(points, &instance.inliers, tol) as f64;
    if inlier_sum - inlier_rank > tol.polytope {
        return Ok(MembershipAnswer {
            inside: false,
            min_value: inlier_rank - inlier_sum,
            certificate: instance.inliers.clone(),
            kind: AnswerKind::EdmondsGap,
        });
    }
    Ok(MembershipAnswer {
        inside: true,
        min_value: 0.0,
        certificate: Vec::new(),
        kind: AnswerKind::Inside,
    })
}
