//! Problem instances: point sets, planted labeled instances, the
//! general-position condition checkers, and the dependence-witness machinery
//! that turns a sparse linear dependence into the inlier set.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Tolerances;
use crate::error::Error;
use crate::linalg;
use crate::Result;

/// A matrix `A = [u_1 .. u_m]` of `m` points in `R^n`, stored column-major.
///
/// Invariants: `m >= n` and `A` has full numerical row rank `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    columns: DMatrix<f64>,
}

impl PointSet {
    pub fn new(columns: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let (n, m) = (columns.nrows(), columns.ncols());
        if n == 0 || m < n {
            return Err(Error::InvalidArgument(format!(
                "point set needs m >= n >= 1, got n={n}, m={m}"
            )));
        }
        let rank = linalg::numerical_rank(&columns, tol);
        if rank < n {
            return Err(Error::InvalidArgument(format!(
                "point set must have full row rank {n}, numerical rank is {rank}"
            )));
        }
        Ok(PointSet { columns })
    }

    /// Ambient dimension `n`.
    pub fn n(&self) -> usize {
        self.columns.nrows()
    }

    /// Number of points `m`.
    pub fn m(&self) -> usize {
        self.columns.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.columns.column(i).into_owned()
    }

    /// Submatrix of the columns indexed by `cols`.
    pub fn submatrix(&self, cols: &[usize]) -> DMatrix<f64> {
        linalg::select_columns(&self.columns, cols)
    }
}

/// A point set with planted ground truth: the hidden subspace, the inlier
/// set, and the noise scale used when generating it.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub points: PointSet,
    /// Planted subspace dimension, `1 <= d < n`.
    pub d: usize,
    /// Orthonormal `n x d` basis of the planted subspace.
    pub subspace_basis: DMatrix<f64>,
    /// Inlier indices (0-based), sorted.
    pub inliers: Vec<usize>,
    /// Maximum relative distance of an inlier from the subspace.
    pub noise_scale: f64,
}

impl LabeledInstance {
    pub fn is_inlier(&self, i: usize) -> bool {
        self.inliers.binary_search(&i).is_ok()
    }

    /// Whether the planted inlier count exceeds the `(d/n) m` recovery
    /// threshold.
    pub fn is_recoverable(&self) -> bool {
        let (n, m) = (self.points.n(), self.points.m());
        self.inliers.len() * n > self.d * m
    }
}

/// A size-`n` subset together with a kernel vector certifying that its
/// columns are linearly dependent.
#[derive(Debug, Clone)]
pub struct DependenceWitness {
    /// Index set `V` with `|V| = n`, sorted.
    pub subset: Vec<usize>,
    /// Vector in `R^m` supported on `subset` with `A u ~ 0`.
    pub kernel_vector: DVector<f64>,
    /// Indices whose kernel coordinate exceeds the support threshold.
    pub support: Vec<usize>,
}

/// Which algorithm produced a recovery result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Randomized,
    RandomizedDet,
    Derandomized,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Randomized => "randomized",
            Method::RandomizedDet => "randomized-det",
            Method::Derandomized => "derandomized",
        }
    }
}

/// Output of a recovery algorithm: the inlier set and an orthonormal basis
/// of their span.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Recovered inlier indices (0-based), sorted.
    pub inlier_indices: Vec<usize>,
    /// Orthonormal `n x d'` basis, `d'` the rank of the inlier columns.
    pub subspace_basis: DMatrix<f64>,
    /// Sampling rounds used; zero for the deterministic path.
    pub iterations: u64,
    pub method: Method,
}

fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| {
            // Box-Muller; avoids pulling in a distributions crate for one use.
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// Generate a planted instance: `k_inliers` points in a uniformly random
/// `d`-dimensional subspace and `m - k_inliers` normalized Gaussian
/// outliers, all rescaled by random factors in `[1/2, 2]`. Deterministic in
/// `seed`.
pub fn generate_planted(
    n: usize,
    d: usize,
    m: usize,
    k_inliers: usize,
    noise_scale: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<LabeledInstance> {
    if !(1 <= d && d < n && n <= m) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= d < n <= m, got n={n}, d={d}, m={m}"
        )));
    }
    if !(d < k_inliers && k_inliers <= m) {
        return Err(Error::InvalidArgument(format!(
            "need d < k_inliers <= m, got d={d}, k={k_inliers}, m={m}"
        )));
    }
    if !(noise_scale >= 0.0) {
        return Err(Error::InvalidArgument("noise_scale must be nonnegative".into()));
    }
    // Too few outliers leave the columns inside a proper subspace.
    if m - k_inliers < n - d {
        return Err(Error::InvalidArgument(format!(
            "degenerate: {} outliers cannot complete rank {n} from a {d}-dimensional subspace",
            m - k_inliers
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Random d-dimensional subspace via QR of a Gaussian n x d matrix.
    let g = DMatrix::from_fn(n, d, |_, _| {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });
    let basis = g.qr().q().columns(0, d).into_owned();

    // Scatter the inlier positions.
    let mut positions: Vec<usize> = (0..m).collect();
    for i in 0..k_inliers {
        let j = rng.gen_range(i..m);
        positions.swap(i, j);
    }
    let mut inliers: Vec<usize> = positions[..k_inliers].to_vec();
    inliers.sort_unstable();

    let mut columns = DMatrix::zeros(n, m);
    for i in 0..m {
        if inliers.binary_search(&i).is_ok() {
            let dir = random_unit_vector(&mut rng, d);
            let scale: f64 = rng.gen_range(0.5..2.0);
            let mut v: DVector<f64> = (&basis * dir) * scale;
            if noise_scale > 0.0 {
                let frac: f64 = rng.gen_range(0.1..0.5);
                let w = random_unit_vector(&mut rng, n) * (frac * noise_scale * v.norm());
                v += w;
            }
            columns.set_column(i, &v);
        } else {
            // Resample outliers that stray within the inlier noise band.
            let mut attempts = 0;
            loop {
                let dir = random_unit_vector(&mut rng, n);
                let scale: f64 = rng.gen_range(0.5..2.0);
                let v = dir * scale;
                let dist = linalg::dist_to_span(&basis, &v);
                if dist > noise_scale * v.norm() {
                    columns.set_column(i, &v);
                    break;
                }
                attempts += 1;
                if attempts > 1000 {
                    return Err(Error::InvalidArgument(
                        "noise_scale too large: cannot place outliers outside the noise band"
                            .into(),
                    ));
                }
            }
        }
    }

    let points = PointSet::new(columns, tol)?;
    Ok(LabeledInstance {
        points,
        d,
        subspace_basis: basis,
        inliers,
        noise_scale,
    })
}

fn check_subset_budget(count: u64, tol: &Tolerances, what: &str) -> Result<()> {
    if count > tol.subset_budget {
        Err(Error::Budget(format!(
            "{what} would enumerate {count} subsets (budget {})",
            tol.subset_budget
        )))
    } else {
        Ok(())
    }
}

/// Check the general-position condition: every size-`n` column set is
/// independent iff it contains at most `d` inliers. Exhaustive over all
/// `C(m, n)` subsets.
pub fn check_condition_general(instance: &LabeledInstance, tol: &Tolerances) -> Result<bool> {
    let (n, m) = (instance.points.n(), instance.points.m());
    check_subset_budget(linalg::binomial(m as u64, n as u64), tol, "condition check")?;
    for subset in (0..m).combinations(n) {
        let inlier_count = subset.iter().filter(|&&i| instance.is_inlier(i)).count();
        let sub = instance.points.submatrix(&subset);
        let independent = linalg::numerical_rank(&sub, tol) == n;
        if independent != (inlier_count <= instance.d) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of the determinant-gap check: the two sides of the gap and
/// whether a separating threshold exists.
#[derive(Debug, Clone, Copy)]
pub struct ConditionGap {
    pub holds: bool,
    /// Smallest Gram determinant over subsets with at most `d` inliers.
    pub det_low_side: f64,
    /// Largest Gram determinant over subsets with at least `d + 1` inliers.
    pub det_high_side: f64,
}

impl ConditionGap {
    /// A threshold strictly between the two sides, usable as `C^2`.
    pub fn mid_gap(&self) -> f64 {
        0.5 * (self.det_low_side + self.det_high_side)
    }
}

/// Check the determinant-gap condition over all subsets of size at most
/// `n`: subsets with at most `d` inliers must have strictly larger Gram
/// determinants than subsets with at least `d + 1`.
pub fn check_condition_general2(instance: &LabeledInstance, tol: &Tolerances) -> Result<ConditionGap> {
    let (n, m) = (instance.points.n(), instance.points.m());
    let total: u64 = (1..=n as u64).map(|k| linalg::binomial(m as u64, k)).sum();
    check_subset_budget(total, tol, "determinant-gap check")?;
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for size in 1..=n {
        for subset in (0..m).combinations(size) {
            let det = linalg::gram_determinant(instance.points.matrix(), &subset);
            let inlier_count = subset.iter().filter(|&&i| instance.is_inlier(i)).count();
            if inlier_count <= instance.d {
                low = low.min(det);
            } else {
                high = high.max(det);
            }
        }
    }
    if high == f64::NEG_INFINITY {
        // k_inliers > d guarantees at least one inlier-heavy subset.
        return Err(Error::Internal("no subset with d+1 inliers enumerated".into()));
    }
    Ok(ConditionGap {
        holds: high < low,
        det_low_side: low,
        det_high_side: high,
    })
}

/// Extract a dependence witness from a size-`n` subset whose columns are
/// numerically rank deficient.
pub fn extract_witness(points: &PointSet, subset: &[usize], tol: &Tolerances) -> Result<DependenceWitness> {
    let n = points.n();
    if subset.len() != n {
        return Err(Error::Witness(format!(
            "witness subset must have {} elements, got {}",
            n,
            subset.len()
        )));
    }
    let mut subset = subset.to_vec();
    subset.sort_unstable();
    let sub = points.submatrix(&subset);
    let (v, residual) = linalg::smallest_right_singular_vector(&sub);
    if residual > tol.kernel_residual * v.norm() {
        return Err(Error::Witness(format!(
            "kernel residual {residual:.3e} exceeds tolerance; columns are not dependent"
        )));
    }
    let vmax = v.amax();
    let mut kernel_vector = DVector::zeros(points.m());
    let mut support = Vec::new();
    for (k, &i) in subset.iter().enumerate() {
        kernel_vector[i] = v[k];
        if v[k].abs() > tol.support * vmax {
            support.push(i);
        }
    }
    if support.is_empty() {
        return Err(Error::Witness("kernel vector has empty support".into()));
    }
    Ok(DependenceWitness {
        subset,
        kernel_vector,
        support,
    })
}

/// Recover the inlier set from a dependence witness: the support columns
/// span the hidden subspace, and every point close to that span (in
/// relative distance) is reported as an inlier.
pub fn recover_from_dependence(
    points: &PointSet,
    witness: &DependenceWitness,
    tol: &Tolerances,
) -> Result<RecoveryResult> {
    if witness.support.is_empty() {
        return Err(Error::Witness("witness support is empty".into()));
    }
    if !witness.support.iter().all(|i| witness.subset.contains(i)) {
        return Err(Error::Witness("witness support is not contained in its subset".into()));
    }
    let u = &witness.kernel_vector;
    let restricted = points.submatrix(&witness.subset);
    let u_restricted = DVector::from_iterator(
        witness.subset.len(),
        witness.subset.iter().map(|&i| u[i]),
    );
    let residual = (&restricted * &u_restricted).norm();
    if residual > tol.kernel_residual * u.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Witness(format!(
            "kernel residual {residual:.3e} is inconsistent with the witness"
        )));
    }

    // Every support column must lie in the span of the others; a genuine
    // kernel vector forces this, so a violation means the support contains
    // a point that takes no part in the dependence.
    for (k, &i) in witness.support.iter().enumerate() {
        let others: Vec<usize> = witness
            .support
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &c)| c)
            .collect();
        let col = points.column(i);
        if others.is_empty() {
            if col.norm() > tol.membership {
                return Err(Error::Witness(
                    "singleton support on a nonzero column is not a dependence".into(),
                ));
            }
            continue;
        }
        let span = linalg::span_basis(&points.submatrix(&others), tol);
        if linalg::dist_to_span(&span, &col) > tol.membership * col.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Witness(format!(
                "support column {i} does not lie in the span of the remaining support"
            )));
        }
    }

    let basis = linalg::span_basis(&points.submatrix(&witness.support), tol);
    let mut inlier_indices = Vec::new();
    for i in 0..points.m() {
        let col = points.column(i);
        let norm = col.norm();
        if norm == 0.0 || linalg::dist_to_span(&basis, &col) <= tol.membership * norm {
            inlier_indices.push(i);
        }
    }
    Ok(RecoveryResult {
        inlier_indices,
        subspace_basis: basis,
        iterations: 0,
        method: Method::Randomized,
    })
}

/// The smallest nonzero basis determinant `D = min { d_I : d_I != 0 }`,
/// where `d_I = det(A_I A_I^T)` over size-`n` subsets, plus the argmin set.
pub fn smallest_nonzero_basis_determinant(
    points: &PointSet,
    tol: &Tolerances,
) -> Result<(f64, Vec<usize>)> {
    let (n, m) = (points.n(), points.m());
    check_subset_budget(linalg::binomial(m as u64, n as u64), tol, "basis determinant scan")?;
    let mut dets: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut max_det: f64 = 0.0;
    for subset in (0..m).combinations(n) {
        // For |I| = n the Gram determinant is det(A_I)^2.
        let d = points.submatrix(&subset).determinant().powi(2);
        max_det = max_det.max(d);
        dets.push((d, subset));
    }
    let cutoff = tol.det_zero * max_det;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (d, subset) in dets {
        if d > cutoff && best.as_ref().map_or(true, |(b, _)| d < *b) {
            best = Some((d, subset));
        }
    }
    best.ok_or_else(|| Error::Internal("all basis determinants vanish on a full-rank point set".into()))
}
