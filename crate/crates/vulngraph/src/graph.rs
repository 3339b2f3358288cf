//! Dense matrix views of a CFG and Node2Vec-style biased random walks.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::java::ControlFlowGraph;
use crate::tensor::Matrix;

/// Adjacency, degree and Laplacian views of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    /// Directed 0/1 adjacency.
    pub adjacency: Matrix,
    /// Diagonal out-degree matrix of `adjacency`.
    pub out_degree: Matrix,
    /// `D − A` on the directed adjacency.
    pub laplacian: Matrix,
    /// `max(A, Aᵀ)`.
    pub sym_adjacency: Matrix,
    /// `I − D̃^(−1/2) Ã D̃^(−1/2)` on the symmetrized adjacency.
    pub sym_laplacian: Matrix,
}

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Matrix {
    let mut a = Matrix::zeros((n, n));
    for &(s, d) in edges {
        a[[s, d]] = 1.0;
    }
    a
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    let mut s = a.clone();
    s.zip_mut_with(&a.t(), |x, &y| *x = x.max(y));
    s
}

/// `D − A` where `D` holds the row sums of `a`.
pub fn laplacian_of(a: &Matrix) -> Matrix {
    let mut l = -a.clone();
    for i in 0..a.nrows() {
        l[[i, i]] += a.row(i).sum();
    }
    l
}

/// `D^(−1/2)` entries with 0 for zero-degree rows.
fn inv_sqrt_degrees(a: &Matrix) -> Vec<f64> {
    a.rows()
        .into_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

pub fn build_matrices(g: &ControlFlowGraph) -> GraphMatrices {
    matrices_from_edges(g.len(), &g.edges)
}

pub fn matrices_from_edges(n: usize, edges: &[(usize, usize)]) -> GraphMatrices {
    let a = adjacency(n, edges);
    let mut d = Matrix::zeros((n, n));
    for i in 0..n {
        d[[i, i]] = a.row(i).sum();
    }
    let l = &d - &a;
    let sym = symmetrize(&a);
    let inv = inv_sqrt_degrees(&sym);
    let mut l_sym = Matrix::eye(n);
    for i in 0..n {
        for j in 0..n {
            l_sym[[i, j]] -= inv[i] * sym[[i, j]] * inv[j];
        }
    }
    GraphMatrices {
        adjacency: a,
        out_degree: d,
        laplacian: l,
        sym_adjacency: sym,
        sym_laplacian: l_sym,
    }
}

/// Neighborhood used by message passing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    /// Predecessors and successors.
    #[default]
    Symmetric,
    /// Predecessors only.
    Incoming,
}

/// `nbr[v][u] = 1` when `u` sends messages to `v`.
pub fn neighbor_matrix(n: usize, edges: &[(usize, usize)], mode: Neighborhood) -> Matrix {
    let a = adjacency(n, edges);
    match mode {
        Neighborhood::Symmetric => symmetrize(&a),
        Neighborhood::Incoming => a.t().to_owned(),
    }
}

/// GCN propagation operator `D̃^(−1/2) (Ã + I) D̃^(−1/2)`, where the self
/// loop is set (not added) on the diagonal.
pub fn gcn_operator(n: usize, edges: &[(usize, usize)], mode: Neighborhood) -> Matrix {
    let mut a = neighbor_matrix(n, edges, mode);
    for i in 0..n {
        a[[i, i]] = 1.0;
    }
    let inv = inv_sqrt_degrees(&a);
    let mut out = a;
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] *= inv[i] * inv[j];
        }
    }
    out
}

/// Row-normalized neighbor matrix (mean aggregation). Isolated rows are zero.
pub fn mean_operator(n: usize, edges: &[(usize, usize)], mode: Neighborhood) -> Matrix {
    let mut a = neighbor_matrix(n, edges, mode);
    for i in 0..n {
        a[[i, i]] = 0.0;
    }
    for mut row in a.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Nodes per walk, including the start node.
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walk_length: 10,
            walks_per_node: 10,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 1 {
            return Err(Error::Config("walk_length must be at least 1".into()));
        }
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::Config(
                "walk parameters p and q must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Second-order biased walks on the symmetrized graph. Rounds of one walk
/// per start node are repeated `walks_per_node` times.
pub fn random_walks(g: &ControlFlowGraph, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    walks_on_edges(g.len(), &g.edges, cfg)
}

pub fn walks_on_edges(
    n: usize,
    edges: &[(usize, usize)],
    cfg: &WalkConfig,
) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let sym = symmetrize(&adjacency(n, edges));
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|v| (0..n).filter(|&u| sym[[v, u]] > 0.0).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut walks = Vec::with_capacity(n * cfg.walks_per_node);
    for _ in 0..cfg.walks_per_node {
        for start in 0..n {
            let mut walk = vec![start];
            while walk.len() < cfg.walk_length {
                let cur = *walk.last().expect("non-empty walk");
                let nbrs = &neighbors[cur];
                if nbrs.is_empty() {
                    break;
                }
                let next = match walk.len() {
                    1 => nbrs[rand::Rng::random_range(&mut rng, 0..nbrs.len())],
                    len => {
                        let prev = walk[len - 2];
                        let weights: Vec<f64> = nbrs
                            .iter()
                            .map(|&x| {
                                if x == prev {
                                    1.0 / cfg.p
                                } else if sym[[x, prev]] > 0.0 {
                                    1.0
                                } else {
                                    1.0 / cfg.q
                                }
                            })
                            .collect();
                        let dist = WeightedIndex::new(&weights).expect("positive walk weights");
                        nbrs[dist.sample(&mut rng)]
                    }
                };
                walk.push(next);
            }
            walks.push(walk);
        }
    }
    Ok(walks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_edge_matrices() {
        let m = matrices_from_edges(2, &[(0, 1)]);
        assert_eq!(m.adjacency, array![[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(m.out_degree, array![[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(m.laplacian, array![[1.0, -1.0], [0.0, 0.0]]);
        assert_eq!(m.sym_laplacian, array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn isolated_node_conventions() {
        let m = matrices_from_edges(1, &[]);
        assert_eq!(m.laplacian, array![[0.0]]);
        assert_eq!(m.sym_laplacian, array![[1.0]]);
    }

    #[test]
    fn gcn_operator_single_node_is_identity() {
        assert_eq!(gcn_operator(1, &[], Neighborhood::Symmetric), array![[1.0]]);
        assert_eq!(
            gcn_operator(2, &[], Neighborhood::Symmetric),
            Matrix::eye(2)
        );
    }

    #[test]
    fn two_node_walk_alternates() {
        let cfg = WalkConfig {
            walk_length: 3,
            walks_per_node: 1,
            p: 0.5,
            q: 2.0,
            seed: 9,
        };
        let walks = walks_on_edges(2, &[(0, 1)], &cfg).unwrap();
        assert_eq!(walks, vec![vec![0, 1, 0], vec![1, 0, 1]]);
    }

    #[test]
    fn walks_are_seeded() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)];
        let cfg = WalkConfig {
            walk_length: 8,
            walks_per_node: 3,
            p: 0.7,
            q: 1.9,
            seed: 42,
        };
        let a = walks_on_edges(4, &edges, &cfg).unwrap();
        assert_eq!(a, walks_on_edges(4, &edges, &cfg).unwrap());
        assert_eq!(a.len(), 12);
        assert!(a.iter().all(|w| w.len() == 8 && w.iter().all(|&v| v < 4)));
    }

    #[test]
    fn invalid_walk_config() {
        let cfg = WalkConfig {
            q: 0.0,
            ..Default::default()
        };
        assert!(walks_on_edges(2, &[(0, 1)], &cfg).is_err());
    }
}
