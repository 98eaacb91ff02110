//! Graph construction and Laplacian algebra.
//!
//! Three generator families cover the experiment suite — 2D lattices,
//! random geometric graphs in the unit square, and random geometric graphs
//! on a C-shaped region (the unit square minus a rectangular notch
//! `(0.25, 1] × (0.25, 0.75)` entering from the right edge). Geometric
//! families resample the whole point set until the graph is connected, so a
//! returned graph is always usable by the solvers; generation is
//! deterministic given the seed.
//!
//! Matrices are dense (`nalgebra::DMatrix`). The networks of interest have
//! at most a few thousand nodes and every downstream algorithm works with
//! dense inverses, so sparse storage would buy nothing here.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Retry budget for resampling geometric point sets until connected.
const MAX_CONNECTIVITY_RETRIES: usize = 1000;

/// An undirected, connected graph with optional node coordinates.
///
/// Invariants enforced at construction: no self-loops, no duplicate edges,
/// all endpoints in range, and the graph is connected (every solver in this
/// crate requires a simple zero Laplacian eigenvalue).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    coords: Option<Vec<[f64; 2]>>,
}

impl NetworkGraph {
    /// Validates and builds a graph from an edge list.
    ///
    /// Edges are stored with the smaller endpoint first and sorted, so two
    /// graphs with the same edge set compare equal entry-wise.
    pub fn new(n: usize, edges: Vec<(usize, usize)>, coords: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!("need at least 2 nodes, got {n}")));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "coordinate count {} does not match node count {n}",
                    c.len()
                )));
            }
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a},{b}) out of range for n={n}"
                )));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if norm.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph("duplicate edge".into()));
        }
        let g = NetworkGraph { n, edges: norm, coords };
        if !g.is_connected() {
            return Err(Error::Disconnected(String::new()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as (min, max) pairs in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }
}

/// Declarative description of a graph, parseable from experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSpec {
    Lattice { rows: usize, cols: usize },
    RandomGeometric { n: usize, radius: f64, seed: u64 },
    CShape { n: usize, radius: f64, seed: u64 },
    Explicit { n: usize, edges: Vec<(usize, usize)> },
}

impl GraphSpec {
    /// Instantiates the graph. Identical specs (including seeds) produce
    /// bit-identical edge sets.
    pub fn build(&self) -> Result<NetworkGraph> {
        match *self {
            GraphSpec::Lattice { rows, cols } => build_lattice(rows, cols),
            GraphSpec::RandomGeometric { n, radius, seed } => build_random_geometric(n, radius, seed),
            GraphSpec::CShape { n, radius, seed } => build_c_shape(n, radius, seed),
            GraphSpec::Explicit { n, ref edges } => NetworkGraph::new(n, edges.clone(), None),
        }
    }
}

/// 4-neighbor grid on `rows × cols` nodes, indexed row-major: node
/// `(r, c)` is `r*cols + c`.
pub fn build_lattice(rows: usize, cols: usize) -> Result<NetworkGraph> {
    if rows * cols < 2 {
        return Err(Error::InvalidGraph(format!(
            "lattice needs at least 2 nodes, got {rows}x{cols}"
        )));
    }
    let mut edges = Vec::new();
    let mut coords = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
            // Unit-square embedding, purely for plotting.
            let denom = |k: usize| (k.max(2) - 1) as f64;
            coords.push([c as f64 / denom(cols), r as f64 / denom(rows)]);
        }
    }
    NetworkGraph::new(rows * cols, edges, Some(coords))
}

fn geometric_sample(
    n: usize,
    radius: f64,
    seed: u64,
    accept: impl Fn(f64, f64) -> bool,
) -> Result<NetworkGraph> {
    if n < 2 {
        return Err(Error::InvalidGraph(format!("need at least 2 nodes, got {n}")));
    }
    // Any positive radius is meaningful; values above √2 simply produce
    // complete graphs on the unit square.
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    // One generator drives all retries, so the sequence of candidate point
    // sets is a pure function of the seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CONNECTIVITY_RETRIES {
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let x: f64 = rng.gen();
            let y: f64 = rng.gen();
            if accept(x, y) {
                pts.push([x, y]);
            }
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pts[i][0] - pts[j][0];
                let dy = pts[i][1] - pts[j][1];
                if (dx * dx + dy * dy).sqrt() <= radius {
                    edges.push((i, j));
                }
            }
        }
        match NetworkGraph::new(n, edges, Some(pts)) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SamplingExhausted { n, radius, retries: MAX_CONNECTIVITY_RETRIES })
}

/// Random geometric graph: `n` points uniform in the unit square, edge iff
/// Euclidean distance ≤ `radius`. Resamples the whole point set until the
/// graph is connected (preserving the uniform-placement model), up to 1000
/// attempts.
pub fn build_random_geometric(n: usize, radius: f64, seed: u64) -> Result<NetworkGraph> {
    geometric_sample(n, radius, seed, |_, _| true)
}

/// Membership test for the C-shaped region: the unit square minus the open
/// notch `(0.25, 1] × (0.25, 0.75)`. The notch enters from the right edge,
/// leaving a "C" with arm thickness 0.25.
pub fn in_c_region(x: f64, y: f64) -> bool {
    !(x > 0.25 && y > 0.25 && y < 0.75)
}

/// Random geometric graph on the C-shaped region. Same edge rule and
/// connectivity retry policy as [`build_random_geometric`]; candidate points
/// falling inside the notch are rejected and redrawn.
pub fn build_c_shape(n: usize, radius: f64, seed: u64) -> Result<NetworkGraph> {
    geometric_sample(n, radius, seed, in_c_region)
}

/// Random connected graph: a spanning tree over a random node permutation
/// plus up to `extra_edges` additional random edges. Connected by
/// construction, so it never retries — the instance source for oracle
/// sweeps and property tests.
pub fn build_random_connected(n: usize, extra_edges: usize, seed: u64) -> Result<NetworkGraph> {
    if n < 2 {
        return Err(Error::InvalidGraph(format!("need at least 2 nodes, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for k in 1..n {
        let p = perm[rng.gen_range(0..k)];
        edges.push((perm[k].min(p), perm[k].max(p)));
    }
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    NetworkGraph::new(n, edges, None)
}

/// Symmetric PSD graph Laplacian `L = D − A` with zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    m: DMatrix<f64>,
}

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// Degree of node `i` (the diagonal entry).
    pub fn degree(&self, i: usize) -> f64 {
        self.m[(i, i)]
    }

    /// Wraps an explicit matrix. Intended for tests and for callers that
    /// already hold `D − A`; validates symmetry and zero row sums.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidArgument("Laplacian must be square".into()));
        }
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("Laplacian must be symmetric".into()));
                }
            }
            let row_sum: f64 = m.row(i).iter().sum();
            if row_sum.abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "Laplacian row {i} sums to {row_sum}, expected 0"
                )));
            }
        }
        Ok(Laplacian { m })
    }
}

/// Builds `L = D − A` from a graph. Row sums are exactly zero because each
/// edge contributes `+1` to two diagonal entries and `−1` to the two
/// matching off-diagonal entries.
pub fn laplacian(g: &NetworkGraph) -> Laplacian {
    let n = g.n();
    let mut m = DMatrix::zeros(n, n);
    for &(a, b) in g.edges() {
        m[(a, a)] += 1.0;
        m[(b, b)] += 1.0;
        m[(a, b)] -= 1.0;
        m[(b, a)] -= 1.0;
    }
    Laplacian { m }
}

/// Moore–Penrose pseudo-inverse of a connected-graph Laplacian via
/// `L† = (L + 𝟙𝟙ᵀ/n)⁻¹ − 𝟙𝟙ᵀ/n`.
///
/// The identity holds because `L` and `𝟙𝟙ᵀ/n` act on complementary
/// invariant subspaces: the rank-one term carries the nullspace, and
/// inverting it contributes exactly `𝟙𝟙ᵀ/n`, which is subtracted back out.
pub fn pseudo_inverse(l: &Laplacian) -> Result<DMatrix<f64>> {
    let n = l.n();
    let shift = 1.0 / n as f64;
    let mut m = l.m.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += shift;
        }
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular("L + 11'/n not PD; graph is disconnected".into()))?;
    let mut inv = chol.inverse();
    for i in 0..n {
        for j in 0..n {
            inv[(i, j)] -= shift;
        }
    }
    Ok(inv)
}

/// Deletes the rows and columns in `removed`, returning the grounded
/// matrix on the remaining indices (in ascending order).
///
/// For a connected-graph Laplacian and a nonempty proper subset this is
/// positive definite — the grounded Laplacian.
pub fn principal_submatrix(l: &Laplacian, removed: &[usize]) -> Result<DMatrix<f64>> {
    submatrix_of(l.matrix(), removed)
}

/// [`principal_submatrix`] for a plain symmetric matrix (used by the
/// low-rank kernels, which chain submatrices of already-grounded matrices).
pub fn submatrix_of(m: &DMatrix<f64>, removed: &[usize]) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut drop = vec![false; n];
    for &r in removed {
        if r >= n {
            return Err(Error::InvalidArgument(format!("index {r} out of range for n={n}")));
        }
        drop[r] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !drop[i]).collect();
    if keep.len() == n {
        return Err(Error::InvalidArgument("removal set is empty".into()));
    }
    if keep.is_empty() {
        return Err(Error::InvalidArgument("cannot remove every node".into()));
    }
    let k = keep.len();
    let mut out = DMatrix::zeros(k, k);
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            out[(a, b)] = m[(i, j)];
        }
    }
    Ok(out)
}
