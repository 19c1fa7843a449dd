//! The two Las Vegas recovery algorithms: repeatedly sample `n` points and
//! exploit the first sparse linear dependence, either exactly (rank test)
//! or through a determinant-gap threshold when inliers carry noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Tolerances;
use crate::error::Error;
use crate::instance::{self, Method, PointSet, RecoveryResult};
use crate::linalg;
use crate::Result;

/// Lower bounds on the per-iteration probability of sampling a size-`n`
/// set with at least `d + 1` inliers.
#[derive(Debug, Clone, Copy)]
pub struct SamplingBound {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// `1 / (2 n^2 m)`, valid whenever the inlier fraction exceeds `d/n`.
    pub generic_bound: f64,
    /// `(d/n)^2 / 2`, valid when `m >= 6n + 2` and `n >= 3`.
    pub improved_bound: Option<f64>,
    /// The best applicable bound.
    pub effective: f64,
}

/// Compute the sampling-probability lower bounds for the given shape.
pub fn success_probability_lower_bound(n: usize, d: usize, m: usize) -> Result<SamplingBound> {
    if !(1 <= d && d < n && n <= m) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= d < n <= m, got n={n}, d={d}, m={m}"
        )));
    }
    let generic = 1.0 / (2.0 * (n * n) as f64 * m as f64);
    let improved = if m >= 6 * n + 2 && n >= 3 {
        Some((d as f64 / n as f64).powi(2) / 2.0)
    } else {
        None
    };
    Ok(SamplingBound {
        n,
        d,
        m,
        generic_bound: generic,
        improved_bound: improved,
        effective: improved.map_or(generic, |b| b.max(generic)),
    })
}

/// Threshold `C^2` separating the Gram determinants of outlier-dominated
/// subsets from inlier-heavy ones.
#[derive(Debug, Clone, Copy)]
pub struct NoiseGapConfig {
    pub c_squared: f64,
}

/// Default iteration cap: `100 * 2 n^2 m` keeps the timeout probability
/// negligible under the sampling bound.
pub fn default_max_iterations(n: usize, m: usize) -> u64 {
    200 * (n * n) as u64 * m as u64
}

/// Sample a uniformly random size-`n` subset of `[m]` without replacement
/// (partial Fisher-Yates), returned sorted.
fn sample_subset(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..m).collect();
    for i in 0..n {
        let j = rng.gen_range(i..m);
        indices.swap(i, j);
    }
    let mut subset = indices[..n].to_vec();
    subset.sort_unstable();
    subset
}

/// Las Vegas recovery: sample size-`n` subsets until one is rank
/// deficient, then read the inlier set off a kernel vector.
pub fn randomized_find(
    points: &PointSet,
    seed: u64,
    max_iterations: Option<u64>,
    tol: &Tolerances,
) -> Result<RecoveryResult> {
    let (n, m) = (points.n(), points.m());
    let cap = max_iterations.unwrap_or_else(|| default_max_iterations(n, m));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for iteration in 1..=cap {
        let subset = sample_subset(&mut rng, m, n);
        let sub = points.submatrix(&subset);
        if linalg::numerical_rank(&sub, tol) < n {
            let witness = instance::extract_witness(points, &subset, tol)?;
            let mut result = instance::recover_from_dependence(points, &witness, tol)?;
            result.iterations = iteration;
            result.method = Method::Randomized;
            return Ok(result);
        }
    }
    Err(Error::Timeout { iterations: cap })
}

/// Noise-stable Las Vegas recovery: accept a sample when its Gram
/// determinant falls below `C^2`, peel it down to `d + 1` elements, then
/// collect every point whose swap keeps the determinant below threshold.
pub fn randomized_find_noisy(
    points: &PointSet,
    d: usize,
    gap: NoiseGapConfig,
    seed: u64,
    max_iterations: Option<u64>,
    _tol: &Tolerances,
) -> Result<RecoveryResult> {
    let (n, m) = (points.n(), points.m());
    if !(1 <= d && d < n) {
        return Err(Error::InvalidArgument(format!("need 1 <= d < n, got d={d}, n={n}")));
    }
    let c2 = gap.c_squared;
    let cap = max_iterations.unwrap_or_else(|| default_max_iterations(n, m));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = points.matrix();

    for iteration in 1..=cap {
        let mut v = sample_subset(&mut rng, m, n);
        if !(linalg::gram_determinant(a, &v) < c2) {
            continue;
        }
        // Peel down to d + 1 elements, removing the lowest-index element
        // whose removal keeps the determinant below threshold.
        while v.len() > d + 1 {
            let mut removed = None;
            for k in 0..v.len() {
                let mut candidate = v.clone();
                candidate.remove(k);
                if linalg::gram_determinant(a, &candidate) < c2 {
                    removed = Some(k);
                    break;
                }
            }
            match removed {
                Some(k) => {
                    v.remove(k);
                }
                None => {
                    return Err(Error::GapViolation(format!(
                        "no removable element at |V| = {} with C^2 = {c2:.6e}",
                        v.len()
                    )));
                }
            }
        }
        // Swap test: a point outside V is an inlier when exchanging it for
        // some element of V keeps the determinant below threshold.
        let mut inliers = v.clone();
        for candidate in 0..m {
            if v.contains(&candidate) {
                continue;
            }
            let accepted = (0..v.len()).any(|k| {
                let mut swapped = v.clone();
                swapped[k] = candidate;
                swapped.sort_unstable();
                linalg::gram_determinant(a, &swapped) < c2
            });
            if accepted {
                inliers.push(candidate);
            }
        }
        inliers.sort_unstable();

        // Best-fit rank-d basis of the recovered columns: dominant
        // eigenvectors of the outer-product matrix.
        let sub = points.submatrix(&inliers);
        let eig = nalgebra::SymmetricEigen::new(&sub * sub.transpose());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut basis = nalgebra::DMatrix::zeros(n, d);
        for (col, &idx) in order.iter().take(d).enumerate() {
            basis.set_column(col, &eig.eigenvectors.column(idx));
        }
        return Ok(RecoveryResult {
            inlier_indices: inliers,
            subspace_basis: basis,
            iterations: iteration,
            method: Method::RandomizedDet,
        });
    }
    Err(Error::Timeout { iterations: cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{check_condition_general, check_condition_general2, generate_planted};
    use nalgebra::DMatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn bound_values_match_the_formulas() {
        let b = success_probability_lower_bound(6, 3, 40).unwrap();
        assert!((b.generic_bound - 1.0 / 2880.0).abs() < 1e-15);
        assert_eq!(b.improved_bound, Some(0.125));
        assert_eq!(b.effective, 0.125);

        let b = success_probability_lower_bound(2, 1, 10).unwrap();
        assert!(b.improved_bound.is_none());
        assert!((b.effective - 1.0 / 80.0).abs() < 1e-15);

        let b = success_probability_lower_bound(3, 2, 20).unwrap();
        assert!((b.generic_bound - 1.0 / 360.0).abs() < 1e-15);
        assert!((b.improved_bound.unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!((b.effective - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_planted_inliers() {
        let inst = generate_planted(3, 1, 6, 3, 0.0, 7, &tol()).unwrap();
        assert!(check_condition_general(&inst, &tol()).unwrap());
        let result = randomized_find(&inst.points, 11, None, &tol()).unwrap();
        assert_eq!(result.inlier_indices, inst.inliers);
        assert!(result.iterations >= 1);
    }

    #[test]
    fn generic_points_time_out() {
        // Gaussian points: every size-3 subset is independent, so no
        // dependent sample exists.
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(5);
        let cols = DMatrix::from_fn(3, 6, |_, _| rng.gen_range(-1.0..1.0));
        let points = PointSet::new(cols, &tol()).unwrap();
        let err = randomized_find(&points, 3, Some(200), &tol()).unwrap_err();
        assert!(matches!(err, Error::Timeout { iterations: 200 }));
    }

    #[test]
    fn determinism_in_seed() {
        let inst = generate_planted(4, 2, 10, 6, 0.0, 3, &tol()).unwrap();
        let a = randomized_find(&inst.points, 17, None, &tol()).unwrap();
        let b = randomized_find(&inst.points, 17, None, &tol()).unwrap();
        assert_eq!(a.inlier_indices, b.inlier_indices);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn noisy_variant_matches_exact_on_clean_instance() {
        let inst = generate_planted(3, 1, 6, 3, 0.0, 7, &tol()).unwrap();
        let gap = check_condition_general2(&inst, &tol()).unwrap();
        let c2 = NoiseGapConfig {
            c_squared: gap.det_low_side / 2.0,
        };
        let exact = randomized_find(&inst.points, 11, None, &tol()).unwrap();
        let noisy = randomized_find_noisy(&inst.points, 1, c2, 11, None, &tol()).unwrap();
        assert_eq!(noisy.inlier_indices, exact.inlier_indices);
        assert_eq!(noisy.inlier_indices, inst.inliers);
    }

    #[test]
    fn noisy_variant_recovers_under_small_noise() {
        let inst = generate_planted(5, 2, 10, 5, 1e-8, 1, &tol()).unwrap();
        let gap = check_condition_general2(&inst, &tol()).unwrap();
        assert!(gap.holds);
        let cfg = NoiseGapConfig { c_squared: gap.mid_gap() };
        let result = randomized_find_noisy(&inst.points, 2, cfg, 23, None, &tol()).unwrap();
        assert_eq!(result.inlier_indices, inst.inliers);
        assert_eq!(result.subspace_basis.ncols(), 2);
    }

    #[test]
    fn unattainable_threshold_times_out() {
        // A floating-point Gram determinant of a singular subset can land
        // a hair below zero, so the guaranteed-rejection threshold must be
        // strictly negative with margin.
        let inst = generate_planted(3, 1, 6, 3, 0.0, 7, &tol()).unwrap();
        let cfg = NoiseGapConfig { c_squared: -1.0 };
        let err = randomized_find_noisy(&inst.points, 1, cfg, 11, Some(100), &tol()).unwrap_err();
        assert!(matches!(err, Error::Timeout { iterations: 100 }));
    }
}
