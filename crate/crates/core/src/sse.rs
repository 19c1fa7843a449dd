//! Reduction from small-set edge expansion to inlier recovery.
//!
//! A `Delta`-regular graph maps to a point set in `R^{|V|}`: each edge
//! `{i, j}` becomes `alpha e_i + beta e_j` with generic coefficients in
//! `(0, 1)`. A small vertex set with poor expansion keeps many of its
//! edges internal, and those points live in the coordinate subspace of the
//! set — a planted-inlier structure. Conversely the span of any edge
//! subset is pinched between half the touched vertices and all of them.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Tolerances;
use crate::error::Error;
use crate::instance::PointSet;
use crate::linalg;
use crate::Result;

/// A simple `degree`-regular graph on `vertex_count` vertices.
#[derive(Debug, Clone)]
pub struct RegularGraph {
    vertex_count: usize,
    degree: usize,
    edges: Vec<(usize, usize)>,
}

impl RegularGraph {
    /// Validate regularity, simplicity, and endpoint ranges. Edges are
    /// normalized to `(min, max)` order and sorted.
    pub fn new(
        vertex_count: usize,
        degree: usize,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidArgument("graph needs at least one vertex".into()));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {a}")));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) leaves the vertex range 0..{vertex_count}"
                )));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("parallel edges are not allowed".into()));
        }
        let mut degrees = vec![0usize; vertex_count];
        for &(a, b) in &normalized {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        if let Some(v) = degrees.iter().position(|&d| d != degree) {
            return Err(Error::InvalidArgument(format!(
                "vertex {v} has degree {}, expected {degree}",
                degrees[v]
            )));
        }
        Ok(RegularGraph { vertex_count, degree, edges: normalized })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn membership_mask(&self, s: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.vertex_count];
        for &v in s {
            if v >= self.vertex_count {
                return Err(Error::InvalidArgument(format!(
                    "vertex {v} out of range 0..{}",
                    self.vertex_count
                )));
            }
            if mask[v] {
                return Err(Error::InvalidArgument(format!("vertex {v} listed twice")));
            }
            mask[v] = true;
        }
        Ok(mask)
    }

    /// `|E(S, V - S)|`.
    pub fn cut_size(&self, s: &[usize]) -> Result<usize> {
        let mask = self.membership_mask(s)?;
        Ok(self.edges.iter().filter(|&&(a, b)| mask[a] != mask[b]).count())
    }

    /// Number of edges with both endpoints in `S`.
    pub fn internal_edge_count(&self, s: &[usize]) -> Result<usize> {
        let mask = self.membership_mask(s)?;
        Ok(self.edges.iter().filter(|&&(a, b)| mask[a] && mask[b]).count())
    }

    /// Edge expansion `phi(S) = |E(S, V - S)| / (degree * |S|)` for a
    /// nonempty proper vertex subset.
    pub fn expansion(&self, s: &[usize]) -> Result<f64> {
        if s.is_empty() || s.len() >= self.vertex_count {
            return Err(Error::InvalidArgument(
                "expansion needs a nonempty proper vertex subset".into(),
            ));
        }
        let cut = self.cut_size(s)?;
        Ok(cut as f64 / (self.degree * s.len()) as f64)
    }
}

/// The minimum expansion over all vertex sets of size `delta * |V|`.
#[derive(Debug, Clone)]
pub struct ExpansionProfile {
    pub set_size: usize,
    pub min_expansion: f64,
    pub argmin: Vec<usize>,
}

/// Exhaustive small-set expansion at density `delta`; `delta * |V|` must
/// be a nonzero integer and the enumeration must fit the subset budget.
pub fn expansion_profile(
    graph: &RegularGraph,
    delta: f64,
    tol: &Tolerances,
) -> Result<ExpansionProfile> {
    let v = graph.vertex_count();
    let size_f = delta * v as f64;
    let set_size = size_f.round() as usize;
    if (size_f - set_size as f64).abs() > 1e-9 || set_size == 0 || set_size >= v {
        return Err(Error::InvalidArgument(format!(
            "delta * |V| = {size_f} must be an integer in 1..{v}"
        )));
    }
    let count = linalg::binomial(v as u64, set_size as u64);
    if count > tol.subset_budget {
        return Err(Error::Budget(format!(
            "expansion profile enumerates {count} subsets, over the budget"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for s in (0..v).combinations(set_size) {
        let phi = graph.expansion(&s)?;
        if best.as_ref().map_or(true, |(b, _)| phi < *b) {
            best = Some((phi, s));
        }
    }
    let (min_expansion, argmin) = best.expect("at least one subset of the requested size");
    Ok(ExpansionProfile { set_size, min_expansion, argmin })
}

/// The point set produced from a graph: point `e` for edge `(i, j)` is
/// `alpha e_i + beta e_j`.
#[derive(Debug, Clone)]
pub struct ReductionInstance {
    pub graph: RegularGraph,
    points: DMatrix<f64>,
    /// Edge endpoints for each point, in column order.
    pub edge_of_point: Vec<(usize, usize)>,
    /// `(alpha, beta)` per point.
    pub coefficients: Vec<(f64, f64)>,
}

impl ReductionInstance {
    /// Raw `|V| x |E|` column matrix. Always available, even when the
    /// graph has fewer edges than vertices.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// The validated point set; fails when `|E| < |V|` or the columns do
    /// not span `R^{|V|}` (e.g. a disconnected sparse graph).
    pub fn point_set(&self, tol: &Tolerances) -> Result<PointSet> {
        PointSet::new(self.points.clone(), tol)
    }
}

/// Build the reduction instance with seeded generic coefficients drawn
/// from the open interval `(0, 1)`.
pub fn reduce_sse_to_inlier(graph: &RegularGraph, seed: u64) -> ReductionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let x: f64 = rng.gen_range(0.0..1.0);
        if x > 1e-6 && x < 1.0 - 1e-6 {
            return x;
        }
    };
    let v = graph.vertex_count();
    let mut points = DMatrix::zeros(v, graph.edge_count());
    let mut coefficients = Vec::with_capacity(graph.edge_count());
    for (col, &(a, b)) in graph.edges().iter().enumerate() {
        let alpha = draw(&mut rng);
        let beta = draw(&mut rng);
        points[(a, col)] = alpha;
        points[(b, col)] = beta;
        coefficients.push((alpha, beta));
    }
    ReductionInstance {
        graph: graph.clone(),
        points,
        edge_of_point: graph.edges().to_vec(),
        coefficients,
    }
}

/// Span diagnostics for an edge subset `F`.
#[derive(Debug, Clone)]
pub struct DimSpanCheck {
    /// Numerical rank of the corresponding point columns.
    pub dim: usize,
    /// `|N(F)|`: vertices touched by `F`.
    pub touched: usize,
    /// Connected components of the subgraph `(N(F), F)`.
    pub components: usize,
    pub is_forest: bool,
    /// `|N(F)|/2 <= dim <= |N(F)|`, and `dim = |N(F)| - components` when
    /// `F` is a forest.
    pub bounds_hold: bool,
}

/// Check the span bounds for the points of the edge subset `edge_cols`
/// (column indices into the instance).
pub fn dim_span_bounds_check(
    instance: &ReductionInstance,
    edge_cols: &[usize],
    tol: &Tolerances,
) -> Result<DimSpanCheck> {
    let m = instance.edge_of_point.len();
    for &c in edge_cols {
        if c >= m {
            return Err(Error::InvalidArgument(format!("edge column {c} out of range 0..{m}")));
        }
    }
    if edge_cols.is_empty() {
        return Ok(DimSpanCheck {
            dim: 0,
            touched: 0,
            components: 0,
            is_forest: true,
            bounds_hold: true,
        });
    }

    let sub = linalg::select_columns(&instance.points, edge_cols);
    let dim = linalg::numerical_rank(&sub, tol);

    // Union-find over touched vertices.
    let v = instance.graph.vertex_count();
    let mut parent: Vec<usize> = (0..v).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut touched_mask = vec![false; v];
    for &c in edge_cols {
        let (a, b) = instance.edge_of_point[c];
        touched_mask[a] = true;
        touched_mask[b] = true;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let touched = touched_mask.iter().filter(|&&t| t).count();
    let components = (0..v)
        .filter(|&x| touched_mask[x] && find(&mut parent, x) == x)
        .count();
    let is_forest = edge_cols.len() == touched - components;

    let mut bounds_hold = 2 * dim >= touched && dim <= touched;
    if is_forest {
        bounds_hold &= dim == touched - components;
    }
    Ok(DimSpanCheck { dim, touched, components, is_forest, bounds_hold })
}

/// Completeness side of the reduction for a vertex set `S`: the points of
/// the internal edges lie in the coordinate subspace of `S`, their count
/// equals `(degree |S| - |E(S, V - S)|) / 2` by double counting, and so a
/// sparse cut plants at least `(1 - phi) degree |S| / 2` points in a
/// `|S|`-dimensional subspace.
#[derive(Debug, Clone)]
pub struct CompletenessCheck {
    pub set_size: usize,
    pub expansion: f64,
    pub internal_edges: usize,
    /// Rank of the internal-edge points; at most `set_size`.
    pub span_dim: usize,
    /// `(1 - phi) degree |S| / 2`, the guaranteed inlier count.
    pub planted_lower_bound: f64,
    pub holds: bool,
}

pub fn completeness_check(
    instance: &ReductionInstance,
    s: &[usize],
    tol: &Tolerances,
) -> Result<CompletenessCheck> {
    let graph = &instance.graph;
    let phi = graph.expansion(s)?;
    let cut = graph.cut_size(s)?;
    let mut mask = vec![false; graph.vertex_count()];
    for &v in s {
        mask[v] = true;
    }
    let internal_cols: Vec<usize> = instance
        .edge_of_point
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| mask[a] && mask[b])
        .map(|(c, _)| c)
        .collect();
    let internal_edges = internal_cols.len();
    let span_dim = if internal_cols.is_empty() {
        0
    } else {
        linalg::numerical_rank(&linalg::select_columns(&instance.points, &internal_cols), tol)
    };

    let degree_sum = graph.degree() * s.len();
    let double_counting_ok = 2 * internal_edges + cut == degree_sum;
    let planted_lower_bound = (1.0 - phi) * degree_sum as f64 / 2.0;
    let holds = double_counting_ok
        && span_dim <= s.len()
        && internal_edges as f64 >= planted_lower_bound - 1e-9;
    Ok(CompletenessCheck {
        set_size: s.len(),
        expansion: phi,
        internal_edges,
        span_dim,
        planted_lower_bound,
        holds,
    })
}
