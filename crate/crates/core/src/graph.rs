//! Graphs, stochastic block model generation and shift operators.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{power_iteration, RealMatrix, RealVector};
use crate::rng::Rng;

/// Power-iteration settings used for every shift-operator normalization.
pub const SHIFT_TOL: f64 = 1e-14;
pub const SHIFT_MAX_ITERS: usize = 200_000;

/// Number of consecutive disconnected SBM draws tolerated before giving up.
pub const SBM_MAX_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: RealMatrix,
    communities: Option<Vec<usize>>,
    directed: bool,
    self_loops: bool,
}

impl Graph {
    pub fn new(
        adjacency: RealMatrix,
        communities: Option<Vec<usize>>,
        directed: bool,
        self_loops: bool,
    ) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::dims("adjacency (square)", adjacency.rows(), adjacency.cols()));
        }
        let n = adjacency.rows();
        if !adjacency.is_finite() {
            return Err(Error::invalid("adjacency has non-finite entries"));
        }
        if !directed && !adjacency.is_symmetric(0.0) {
            return Err(Error::invalid("undirected graph with asymmetric adjacency"));
        }
        if !self_loops && (0..n).any(|i| adjacency.get(i, i) != 0.0) {
            return Err(Error::invalid(
                "non-zero diagonal but self-loops were not requested",
            ));
        }
        if let Some(c) = &communities {
            if c.len() != n {
                return Err(Error::dims("community labels", n, c.len()));
            }
        }
        Ok(Graph {
            n,
            adjacency,
            communities,
            directed,
            self_loops,
        })
    }

    /// Undirected graph from an unweighted edge list.
    pub fn undirected(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = RealMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range")));
            }
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        let loops = edges.iter().any(|(i, j)| i == j);
        Graph::new(a, None, false, loops)
    }

    pub fn complete(n: usize) -> Self {
        let a = RealMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        Graph::new(a, None, false, false).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::undirected(n, &edges).expect("path graph is valid")
    }

    pub fn with_communities(mut self, communities: Vec<usize>) -> Result<Self> {
        if communities.len() != self.n {
            return Err(Error::dims("community labels", self.n, communities.len()));
        }
        self.communities = Some(communities);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &RealMatrix {
        &self.adjacency
    }

    pub fn communities(&self) -> Option<&[usize]> {
        self.communities.as_deref()
    }

    pub fn community_count(&self) -> Option<usize> {
        self.communities
            .as_ref()
            .map(|c| c.iter().max().map_or(0, |m| m + 1))
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of undirected edges (or directed arcs when directed), self-loops included once.
    pub fn edge_count(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.adjacency.get(i, j) != 0.0 && (self.directed || j >= i) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Weighted out-degrees (row sums).
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.adjacency.row(i).iter().sum()).collect()
    }

    pub fn to_file(&self, meta: Option<serde_json::Value>) -> GraphFile {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let w = self.adjacency.get(i, j);
                if w != 0.0 && (self.directed || j >= i) {
                    edges.push((i, j, w));
                }
            }
        }
        GraphFile {
            n: self.n,
            directed: self.directed,
            self_loops: self.self_loops,
            edges,
            communities: self.communities.clone(),
            meta,
        }
    }

    pub fn save(&self, path: &Path, meta: Option<serde_json::Value>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file(meta))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text)?;
        Graph::try_from(file)
    }
}

/// On-disk graph document.
///
/// `{"n": int, "directed": bool, "edges": [[i, j, weight], ...], "communities": [int, ...] | null}`.
/// Undirected edges are listed once and mirrored on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub directed: bool,
    #[serde(default)]
    pub self_loops: bool,
    pub edges: Vec<(usize, usize, f64)>,
    pub communities: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl TryFrom<GraphFile> for Graph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Graph> {
        let n = file.n;
        let mut a = RealMatrix::zeros(n, n);
        for (idx, &(i, j, w)) in file.edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::Parse {
                    location: format!("edges[{idx}]"),
                    message: format!("node index out of range for n = {n}"),
                });
            }
            if !w.is_finite() {
                return Err(Error::Parse {
                    location: format!("edges[{idx}]"),
                    message: "non-finite weight".into(),
                });
            }
            a.set(i, j, w);
            if !file.directed {
                a.set(j, i, w);
            }
        }
        Graph::new(a, file.communities, file.directed, file.self_loops)
    }
}

/// Undirected SBM with `c` equal blocks of size `n / c`, redrawn until connected.
pub fn sbm_generate(n: usize, c: usize, p: f64, q: f64, rng: &mut Rng) -> Result<Graph> {
    if c == 0 || n == 0 || !n.is_multiple_of(c) {
        return Err(Error::invalid(format!(
            "community count {c} must divide node count {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) || q > p {
        return Err(Error::invalid(format!(
            "SBM probabilities must satisfy 0 <= q <= p <= 1 (p = {p}, q = {q})"
        )));
    }
    let block = n / c;
    let labels: Vec<usize> = (0..n).map(|i| i / block).collect();
    for _ in 0..SBM_MAX_ATTEMPTS {
        let mut a = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let prob = if labels[i] == labels[j] { p } else { q };
                if rng.bernoulli(prob) {
                    a.set(i, j, 1.0);
                    a.set(j, i, 1.0);
                }
            }
        }
        let g = Graph::new(a, Some(labels.clone()), false, false)?;
        if is_connected(&g) {
            return Ok(g);
        }
    }
    Err(Error::Disconnected {
        attempts: SBM_MAX_ATTEMPTS,
    })
}

/// Breadth-first reachability over the undirected skeleton.
pub fn is_connected(g: &Graph) -> bool {
    let n = g.n();
    if n == 0 {
        return true;
    }
    let a = g.adjacency();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && (a.get(i, j) != 0.0 || a.get(j, i) != 0.0) {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == n
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::dims("permutation", n, perm.len()));
    }
    let mut hit = vec![false; n];
    for &p in perm {
        if p >= n || hit[p] {
            return Err(Error::invalid("permutation is not a bijection"));
        }
        hit[p] = true;
    }
    Ok(())
}

/// Relabel nodes: node `i` becomes node `perm[i]`, so the adjacency becomes `P A Pᵀ`.
pub fn permute_graph(g: &Graph, perm: &[usize]) -> Result<Graph> {
    check_permutation(perm, g.n())?;
    let n = g.n();
    let mut a = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(perm[i], perm[j], g.adjacency().get(i, j));
        }
    }
    let communities = g.communities().map(|c| {
        let mut out = vec![0; n];
        for i in 0..n {
            out[perm[i]] = c[i];
        }
        out
    });
    Graph::new(a, communities, g.directed, g.self_loops)
}

/// `P x` for the same node relabeling as [`permute_graph`].
pub fn permute_vector(x: &[f64], perm: &[usize]) -> Result<RealVector> {
    check_permutation(perm, x.len())?;
    let mut out = RealVector::zeros(x.len());
    for (i, &p) in perm.iter().enumerate() {
        out[p] = x[i];
    }
    Ok(out)
}

pub fn invert_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm, perm.len())?;
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    Ok(inv)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    BySpectralRadius,
}

/// Graph shift operator together with its transpose (used by the backward passes).
#[derive(Clone, Debug)]
pub struct ShiftOperator {
    matrix: RealMatrix,
    transpose: RealMatrix,
    normalization: Normalization,
    spectral_radius_estimate: f64,
}

impl ShiftOperator {
    /// Use the matrix as-is.
    pub fn unnormalized(matrix: RealMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims("shift operator (square)", matrix.rows(), matrix.cols()));
        }
        let rho = power_iteration(&matrix, SHIFT_TOL, SHIFT_MAX_ITERS)?.magnitude;
        Ok(Self::with_estimate(matrix, Normalization::None, rho))
    }

    /// Raw matrix without a spectral estimate; for small synthetic test operators
    /// whose radius is irrelevant (possibly non-convergent power iteration).
    pub fn raw(matrix: RealMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims("shift operator (square)", matrix.rows(), matrix.cols()));
        }
        Ok(Self::with_estimate(matrix, Normalization::None, f64::NAN))
    }

    fn with_estimate(matrix: RealMatrix, normalization: Normalization, rho: f64) -> Self {
        ShiftOperator {
            transpose: matrix.transpose(),
            matrix,
            normalization,
            spectral_radius_estimate: rho,
        }
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }

    pub fn transpose(&self) -> &RealMatrix {
        &self.transpose
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Spectral radius of the stored (possibly normalized) matrix; NaN for [`ShiftOperator::raw`].
    pub fn spectral_radius_estimate(&self) -> f64 {
        self.spectral_radius_estimate
    }
}

/// `S = A / ρ(A)`.
pub fn normalize_shift(g: &Graph) -> Result<ShiftOperator> {
    let rho = power_iteration(g.adjacency(), SHIFT_TOL, SHIFT_MAX_ITERS)?.magnitude;
    if rho < 1e-12 {
        return Err(Error::EmptyGraph(rho));
    }
    let s = g.adjacency().scaled(1.0 / rho);
    let rho_s = power_iteration(&s, SHIFT_TOL, SHIFT_MAX_ITERS)?.magnitude;
    if (rho_s - 1.0).abs() > 1e-6 {
        return Err(Error::NumericalAbort(format!(
            "normalized shift has spectral radius {rho_s}"
        )));
    }
    Ok(ShiftOperator::with_estimate(
        s,
        Normalization::BySpectralRadius,
        rho_s,
    ))
}
