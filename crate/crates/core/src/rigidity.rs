//! Rigidity matrix, rigidity tests, vertex connectivity and conics at infinity.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Framework, Graph};
use crate::linalg;
use crate::stress;

/// Half squared edge lengths `½‖p_i − p_j‖²` in canonical edge order.
pub fn edge_length_map(f: &Framework) -> Vec<f64> {
    f.graph()
        .edges()
        .iter()
        .map(|e| 0.5 * f.squared_distance(e.i(), e.j()))
        .collect()
}

/// Jacobian of [`edge_length_map`]: `e × (v·d)`, columns vertex-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityMatrix(DMatrix<f64>);

impl RigidityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

pub fn rigidity_matrix(f: &Framework) -> RigidityMatrix {
    let d = f.dimension();
    let g = f.graph();
    let mut m = DMatrix::zeros(g.num_edges(), g.num_vertices() * d);
    for (row, e) in g.edges().iter().enumerate() {
        let (i, j) = e.pair();
        for k in 0..d {
            let diff = f.point(i)[k] - f.point(j)[k];
            m[(row, i * d + k)] = diff;
            m[(row, j * d + k)] = -diff;
        }
    }
    RigidityMatrix(m)
}

/// Rank of the rigidity matrix of an infinitesimally rigid framework on `v`
/// vertices in `R^d`. For `v <= d+1` the points span only a `(v−1)`-flat and
/// the rigid-motion count shrinks accordingly.
pub fn generic_rank_target(v: usize, d: usize) -> usize {
    if v > d {
        v * d - d * (d + 1) / 2
    } else {
        v * (v - 1) / 2
    }
}

pub fn rigidity_rank(f: &Framework, tol: f64) -> usize {
    linalg::rank(rigidity_matrix(f).matrix(), tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankReport {
    pub rank: usize,
    pub target: usize,
    pub rigid: bool,
}

pub fn is_infinitesimally_rigid(f: &Framework, tol: f64) -> RankReport {
    let rank = rigidity_rank(f, tol);
    let target = generic_rank_target(f.num_vertices(), f.dimension());
    RankReport {
        rank,
        target,
        rigid: rank == target,
    }
}

/// Per-edge redundancy computed two independent ways.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedundancyReport {
    /// Edge `k` can be removed without losing infinitesimal rigidity.
    pub by_rank: Vec<bool>,
    /// Some equilibrium stress is nonzero on edge `k`.
    pub by_stress: Vec<bool>,
    pub redundant: bool,
    pub methods_agree: bool,
}

/// Edge support threshold: edge `k` carries stress when the projection of the
/// unit vector `e_k` onto the stress space has at least this norm.
const STRESS_SUPPORT_THRESHOLD: f64 = 1e-6;

pub fn is_redundantly_rigid(f: &Framework, tol: f64) -> Result<RedundancyReport> {
    if !is_infinitesimally_rigid(f, tol).rigid {
        return Err(Error::PreconditionViolation(
            "framework is not infinitesimally rigid".into(),
        ));
    }
    let g = f.graph();
    let by_rank: Vec<bool> = g
        .edges()
        .iter()
        .map(|e| {
            let reduced = g.without_edge(e.i(), e.j()).expect("edge from own list");
            let sub = f.with_graph(reduced).expect("same vertex count");
            is_infinitesimally_rigid(&sub, tol).rigid
        })
        .collect();

    let basis = stress::stress_space_basis(f, tol);
    let by_stress: Vec<bool> = (0..g.num_edges())
        .map(|k| {
            let weight: f64 = basis.iter().map(|w| w.values()[k] * w.values()[k]).sum();
            linalg::sqrt(weight) > STRESS_SUPPORT_THRESHOLD
        })
        .collect();

    let redundant = by_rank.iter().all(|&r| r);
    Ok(RedundancyReport {
        methods_agree: by_rank == by_stress,
        redundant,
        by_rank,
        by_stress,
    })
}

/// Largest `n` such that deleting any `n − 1` vertices leaves a connected
/// graph; `K_n` has connectivity `n − 1`.
///
/// Uses Menger's theorem: the minimum over non-adjacent pairs of the maximum
/// number of internally disjoint paths, each found as a unit-capacity flow on
/// the vertex-split digraph.
pub fn vertex_connectivity(g: &Graph) -> usize {
    let n = g.num_vertices();
    let adj = g.adjacency();
    let mut best = n.saturating_sub(1);
    for s in 0..n {
        for t in s + 1..n {
            if !adj[s][t] {
                best = best.min(local_connectivity(&adj, s, t, best));
            }
        }
    }
    best
}

/// Internally vertex-disjoint `s`–`t` paths, stopping early at `cap`.
fn local_connectivity(adj: &[Vec<bool>], s: usize, t: usize, cap: usize) -> usize {
    let n = adj.len();
    // Node 2i is the entry of vertex i, node 2i+1 its exit.
    let nodes = 2 * n;
    let inf = n as i64;
    let mut capacity = vec![vec![0_i64; nodes]; nodes];
    for v in 0..n {
        capacity[2 * v][2 * v + 1] = if v == s || v == t { inf } else { 1 };
        for w in 0..n {
            if adj[v][w] {
                capacity[2 * v + 1][2 * w] = inf;
            }
        }
    }
    let (source, sink) = (2 * s + 1, 2 * t);
    let mut flow = 0;
    while flow < cap {
        let mut parent = vec![usize::MAX; nodes];
        parent[source] = source;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for w in 0..nodes {
                if parent[w] == usize::MAX && capacity[u][w] > 0 {
                    parent[w] = u;
                    queue.push_back(w);
                }
            }
        }
        if parent[sink] == usize::MAX {
            break;
        }
        let mut w = sink;
        while w != source {
            let u = parent[w];
            capacity[u][w] -= 1;
            capacity[w][u] += 1;
            w = u;
        }
        flow += 1;
    }
    flow
}

/// A nonzero symmetric `Q` with `xᵀQx = 0` for every edge direction `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicWitness {
    q: DMatrix<f64>,
}

impl ConicWitness {
    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `max |xᵀQx| / (‖Q‖_F ‖x‖²)` over nonzero edges of `f`.
    pub fn max_relative_residual(&self, f: &Framework) -> f64 {
        let qn = self.q.norm();
        f.graph()
            .edges()
            .iter()
            .filter_map(|e| {
                let x = nalgebra::DVector::from_vec(f.difference(e.i(), e.j()));
                let len2 = x.norm_squared();
                (len2 > 0.0).then(|| (x.transpose() * &self.q * &x)[(0, 0)].abs() / (qn * len2))
            })
            .fold(0.0, f64::max)
    }
}

/// Searches for a conic at infinity containing all edge directions.
///
/// Each nonzero edge contributes the row `(x_k², …, 2 x_k x_l, …)` of the
/// linear system in the `d(d+1)/2` entries of `Q`; a numerical kernel yields
/// the witness (smallest singular direction, unit Frobenius norm).
pub fn conic_at_infinity(f: &Framework, tol: f64) -> Result<Option<ConicWitness>> {
    let d = f.dimension();
    let unknowns = d * (d + 1) / 2;
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|k| (k + 1..d).map(move |l| (k, l)))
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for e in f.graph().edges() {
        let x = f.difference(e.i(), e.j());
        let len = linalg::norm(&x);
        if len == 0.0 {
            continue;
        }
        let x: Vec<f64> = x.iter().map(|c| c / len).collect();
        let mut row = Vec::with_capacity(unknowns);
        row.extend(x.iter().map(|c| c * c));
        row.extend(pairs.iter().map(|&(k, l)| 2.0 * x[k] * x[l]));
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::DegenerateInput("every edge has zero length".into()));
    }
    let system = DMatrix::from_row_iterator(rows.len(), unknowns, rows.into_iter().flatten());
    let kernel = linalg::right_null_space(&system, tol);
    let Some(sol) = kernel.last() else {
        return Ok(None);
    };
    let mut q = DMatrix::zeros(d, d);
    for k in 0..d {
        q[(k, k)] = sol[k];
    }
    for (idx, &(k, l)) in pairs.iter().enumerate() {
        q[(k, l)] = sol[d + idx];
        q[(l, k)] = sol[d + idx];
    }
    let norm = q.norm();
    Ok(Some(ConicWitness { q: q / norm }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_complete, sample_generic_framework};

    fn line(graph: Graph, xs: &[f64]) -> Framework {
        Framework::from_flat(graph, 1, xs.to_vec()).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    fn path(n: usize) -> Graph {
        Graph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn edge_lengths() {
        let single = Graph::new(2, [(0, 1)]).unwrap();
        assert_eq!(edge_length_map(&line(single.clone(), &[0.0, 1.0])), [0.5]);
        assert_eq!(edge_length_map(&line(single, &[0.0, 0.0])), [0.0]);
        let k3 = make_complete(3).unwrap();
        assert_eq!(
            edge_length_map(&line(k3, &[0.0, 1.0, 2.0])),
            [0.5, 2.0, 0.5]
        );
    }

    #[test]
    fn single_edge_row() {
        let f = line(Graph::new(2, [(0, 1)]).unwrap(), &[0.0, 1.0]);
        assert_eq!(rigidity_matrix(&f).matrix().as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn rank_formula_for_complete_graphs() {
        for d in 1..=4 {
            let f = sample_generic_framework(&make_complete(d + 2).unwrap(), d, 5).unwrap();
            let rm = rigidity_matrix(&f);
            let target = (d + 2) * d - d * (d + 1) / 2;
            assert_eq!(linalg::rank(rm.matrix(), 1e-9), target);
            // corank of the transpose is one
            assert_eq!(f.graph().num_edges() - target, 1);
            assert_eq!(
                linalg::right_null_space(&rm.matrix().transpose(), 1e-9).len(),
                1
            );
        }
    }

    #[test]
    fn infinitesimal_rigidity_examples() {
        let k4 = sample_generic_framework(&make_complete(4).unwrap(), 2, 1).unwrap();
        let r = is_infinitesimally_rigid(&k4, 1e-9);
        assert_eq!((r.rank, r.target, r.rigid), (5, 5, true));

        let c4_plane = sample_generic_framework(&cycle(4), 2, 1).unwrap();
        assert!(!is_infinitesimally_rigid(&c4_plane, 1e-9).rigid);

        let c4_line = sample_generic_framework(&cycle(4), 1, 1).unwrap();
        let r = is_infinitesimally_rigid(&c4_line, 1e-9);
        assert_eq!((r.rank, r.rigid), (3, true));
    }

    #[test]
    fn triangle_in_plane_uses_reduced_target() {
        let f = sample_generic_framework(&make_complete(3).unwrap(), 2, 4).unwrap();
        let r = is_infinitesimally_rigid(&f, 1e-9);
        assert_eq!((r.rank, r.target), (3, 3));
    }

    #[test]
    fn redundancy_examples() {
        let k4 = sample_generic_framework(&make_complete(4).unwrap(), 1, 2).unwrap();
        let r = is_redundantly_rigid(&k4, 1e-9).unwrap();
        assert!(r.redundant && r.methods_agree);

        let k3 = sample_generic_framework(&make_complete(3).unwrap(), 2, 2).unwrap();
        let r = is_redundantly_rigid(&k3, 1e-9).unwrap();
        assert!(!r.redundant && r.methods_agree);
        assert!(r.by_rank.iter().all(|&b| !b));

        let c4 = sample_generic_framework(&cycle(4), 1, 2).unwrap();
        let r = is_redundantly_rigid(&c4, 1e-9).unwrap();
        assert!(r.redundant && r.methods_agree);
    }

    #[test]
    fn redundancy_mixed_edges() {
        // Triangle with a pendant edge on a line: the pendant edge is a bridge.
        let g = Graph::new(4, [(0, 1), (0, 2), (1, 2), (2, 3)]).unwrap();
        let f = sample_generic_framework(&g, 1, 9).unwrap();
        let r = is_redundantly_rigid(&f, 1e-9).unwrap();
        assert_eq!(r.by_rank, [true, true, true, false]);
        assert!(r.methods_agree && !r.redundant);
    }

    #[test]
    fn redundancy_needs_rigidity() {
        let f = sample_generic_framework(&cycle(4), 2, 2).unwrap();
        assert!(matches!(
            is_redundantly_rigid(&f, 1e-9),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn connectivity_examples() {
        for n in 1..7 {
            assert_eq!(vertex_connectivity(&make_complete(n).unwrap()), n - 1);
        }
        for n in 3..9 {
            assert_eq!(vertex_connectivity(&cycle(n)), 2);
            assert_eq!(vertex_connectivity(&path(n)), 1);
        }
        let disconnected = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(vertex_connectivity(&disconnected), 0);
    }

    #[test]
    fn line_frameworks_have_no_conic() {
        let f = line(make_complete(3).unwrap(), &[0.0, 1.0, 3.0]);
        assert!(conic_at_infinity(&f, 1e-9).unwrap().is_none());
    }

    #[test]
    fn parallel_edges_lie_on_a_conic() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let f = Framework::new(
            g,
            2,
            &[
                alloc::vec![0.0, 0.0],
                alloc::vec![1.0, 0.0],
                alloc::vec![0.0, 1.0],
                alloc::vec![3.0, 1.0],
            ],
        )
        .unwrap();
        let w = conic_at_infinity(&f, 1e-9).unwrap().expect("witness");
        assert!(w.q_matrix()[(0, 0)].abs() < 1e-12);
        assert!((w.q_matrix().norm() - 1.0).abs() < 1e-12);
        assert!(w.max_relative_residual(&f) <= 1e-9);
    }

    #[test]
    fn generic_frameworks_avoid_conics() {
        for d in 1..=3 {
            let f = sample_generic_framework(&make_complete(d + 2).unwrap(), d, 3).unwrap();
            assert!(conic_at_infinity(&f, 1e-9).unwrap().is_none());
        }
    }

    #[test]
    fn zero_length_edges_are_degenerate() {
        let f = line(Graph::new(2, [(0, 1)]).unwrap(), &[2.0, 2.0]);
        assert!(matches!(
            conic_at_infinity(&f, 1e-9),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn sparse_frameworks_in_3d_have_conics() {
        // Three edges give three equations in six unknowns.
        let g = make_complete(3).unwrap();
        let f = sample_generic_framework(&g, 3, 1).unwrap();
        let w = conic_at_infinity(&f, 1e-9)
            .unwrap()
            .expect("underdetermined");
        assert!(w.max_relative_residual(&f) <= 1e-9);
    }
}
