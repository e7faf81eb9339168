//! Graphs, frameworks and pseudo-generic sampling.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rigidity;
use crate::tolerance::Tolerances;

/// An undirected edge `{i, j}` stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(usize, usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        match a.cmp(&b) {
            core::cmp::Ordering::Less => Ok(Edge(a, b)),
            core::cmp::Ordering::Greater => Ok(Edge(b, a)),
            core::cmp::Ordering::Equal => {
                Err(Error::invalid(alloc::format!("self-loop at vertex {a}")))
            }
        }
    }

    pub fn i(self) -> usize {
        self.0
    }

    pub fn j(self) -> usize {
        self.1
    }

    pub fn pair(self) -> (usize, usize) {
        (self.0, self.1)
    }

    pub fn contains(self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// A finite simple graph with a canonical (sorted) edge list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph, orienting each pair as `i < j` and sorting the list.
    /// Self-loops, duplicates and out-of-range indices are rejected.
    pub fn new(
        num_vertices: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            if a >= num_vertices || b >= num_vertices {
                return Err(Error::invalid(alloc::format!(
                    "edge ({a}, {b}) out of range for {num_vertices} vertices"
                )));
            }
            edges.push(Edge::new(a, b)?);
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(alloc::format!("duplicate edge {}", w[0])));
        }
        Ok(Self {
            num_vertices,
            edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Position of `{a, b}` in the canonical edge order.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let e = Edge::new(a, b).ok()?;
        self.edges.binary_search(&e).ok()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|e| match e.pair() {
                (i, j) if i == v => Some(j),
                (i, j) if j == v => Some(i),
                _ => None,
            })
            .collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.contains(v)).count()
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.num_vertices]; self.num_vertices];
        for e in &self.edges {
            adj[e.i()][e.j()] = true;
            adj[e.j()][e.i()] = true;
        }
        adj
    }

    pub fn with_edge(&self, a: usize, b: usize) -> Result<Self> {
        if self.has_edge(a, b) {
            return Err(Error::invalid(alloc::format!(
                "edge ({a}, {b}) already present"
            )));
        }
        let pairs = self
            .edges
            .iter()
            .map(|e| e.pair())
            .chain(core::iter::once((a, b)));
        Graph::new(self.num_vertices, pairs)
    }

    pub fn without_edge(&self, a: usize, b: usize) -> Result<Self> {
        let idx = self
            .edge_index(a, b)
            .ok_or_else(|| Error::invalid(alloc::format!("edge ({a}, {b}) not present")))?;
        let mut g = self.clone();
        g.edges.remove(idx);
        Ok(g)
    }
}

/// `K_n` in canonical order.
pub fn make_complete(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("complete graph needs at least one vertex"));
    }
    let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    Graph::new(n, pairs)
}

/// A graph placed in `R^d`. Coordinates are stored vertex-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Framework {
    graph: Graph,
    dimension: usize,
    coords: Vec<f64>,
}

impl Framework {
    pub fn new(graph: Graph, dimension: usize, points: &[Vec<f64>]) -> Result<Self> {
        if points.len() != graph.num_vertices() {
            return Err(Error::invalid(alloc::format!(
                "{} points for {} vertices",
                points.len(),
                graph.num_vertices()
            )));
        }
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| p.len() != dimension)
        {
            return Err(Error::invalid(alloc::format!(
                "point {i} has {} coordinates, expected {dimension}",
                p.len()
            )));
        }
        Self::from_flat(graph, dimension, points.concat())
    }

    pub fn from_flat(graph: Graph, dimension: usize, coords: Vec<f64>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if coords.len() != graph.num_vertices() * dimension {
            return Err(Error::invalid(
                "coordinate count does not match vertices times dimension",
            ));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(Self {
            graph,
            dimension,
            coords,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.coords
            .chunks(self.dimension)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `p_i - p_j`.
    pub fn difference(&self, i: usize, j: usize) -> Vec<f64> {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn shortest_edge_length(&self) -> Option<f64> {
        self.graph
            .edges()
            .iter()
            .map(|e| linalg::sqrt(self.squared_distance(e.i(), e.j())))
            .reduce(f64::min)
    }

    pub fn longest_edge_length(&self) -> f64 {
        self.graph
            .edges()
            .iter()
            .map(|e| linalg::sqrt(self.squared_distance(e.i(), e.j())))
            .fold(0.0, f64::max)
    }

    /// The same configuration on a different graph with the same vertex count.
    pub fn with_graph(&self, graph: Graph) -> Result<Self> {
        if graph.num_vertices() != self.num_vertices() {
            return Err(Error::invalid("vertex count mismatch"));
        }
        Ok(Self {
            graph,
            dimension: self.dimension,
            coords: self.coords.clone(),
        })
    }

    /// Coordinate projection `p^m`: the `m`-th coordinate of every vertex.
    pub fn coordinate_projection(&self, m: usize) -> Vec<f64> {
        self.coords
            .iter()
            .skip(m)
            .step_by(self.dimension)
            .copied()
            .collect()
    }
}

/// Checks that every `min(v, d+1)` vertices are affinely independent.
pub fn in_general_position(f: &Framework, tol: f64) -> bool {
    let d = f.dimension();
    let v = f.num_vertices();
    let k = v.min(d + 1);
    if k <= 1 {
        return true;
    }
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        if !subset_independent(f, &subset, tol) {
            return false;
        }
        if !next_combination(&mut subset, v) {
            return true;
        }
    }
}

fn subset_independent(f: &Framework, subset: &[usize], tol: f64) -> bool {
    let d = f.dimension();
    if subset.len() == d + 1 {
        let pts: Vec<&[f64]> = subset.iter().map(|&i| f.point(i)).collect();
        return linalg::affinely_independent(&pts, tol);
    }
    let base = f.point(subset[0]);
    let rows = subset.len() - 1;
    let mut m = DMatrix::zeros(rows, d);
    for (r, &i) in subset[1..].iter().enumerate() {
        for c in 0..d {
            m[(r, c)] = f.point(i)[c] - base[c];
        }
    }
    linalg::rank(&m, tol) == rows
}

/// Advances `subset` (strictly increasing indices below `n`) to the next
/// combination in lexicographic order.
pub(crate) fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SAMPLE_DENOMINATOR: f64 = (1u64 << 20) as f64;
const SAMPLE_NUMERATOR_BOUND: i64 = 1 << 40;

fn draw_coordinates(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count)
        .map(|_| {
            rng.random_range(-SAMPLE_NUMERATOR_BOUND..=SAMPLE_NUMERATOR_BOUND) as f64
                / SAMPLE_DENOMINATOR
        })
        .collect()
}

/// Samples an operationally generic framework: dyadic coordinates `k / 2^20`
/// with `|k| <= 2^40`, redrawn until the rigidity matrix attains the largest
/// rank seen and all `d+1`-subsets are affinely independent.
pub fn sample_generic_framework(graph: &Graph, dimension: usize, seed: u64) -> Result<Framework> {
    sample_generic_framework_with(graph, dimension, seed, &Tolerances::default())
}

pub fn sample_generic_framework_with(
    graph: &Graph,
    dimension: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Framework> {
    if graph.num_vertices() == 0 {
        return Err(Error::invalid("graph has no vertices"));
    }
    if dimension == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut rng = rng(seed);
    let count = graph.num_vertices() * dimension;
    let upper = graph.num_edges().min(rigidity::generic_rank_target(
        graph.num_vertices(),
        dimension,
    ));

    let mut target = 0;
    let mut last_rank = 0;
    for attempt in 0..tol.retries.max(1) {
        let candidate =
            Framework::from_flat(graph.clone(), dimension, draw_coordinates(&mut rng, count))?;
        let r = rigidity::rigidity_rank(&candidate, tol.rank);
        last_rank = r;
        target = target.max(r);
        if attempt == 0 && r < upper {
            // Rank below the counting bound: a second draw tells us whether
            // that is the graph's generic rank or a degenerate sample.
            let probe =
                Framework::from_flat(graph.clone(), dimension, draw_coordinates(&mut rng, count))?;
            target = target.max(rigidity::rigidity_rank(&probe, tol.rank));
        }
        if r == target && in_general_position(&candidate, tol.rank) {
            return Ok(candidate);
        }
    }
    Err(Error::SamplingFailure {
        attempts: tol.retries.max(1),
        last_rank,
        target_rank: target,
    })
}

/// Which distances [`compare_frameworks`] compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// Squared edge lengths agree.
    Equivalent,
    /// Squared distances between all vertex pairs agree.
    Congruent,
}

/// Compares two frameworks. Frameworks of different dimension are compared
/// as if the lower-dimensional one were padded with zero coordinates.
pub fn compare_frameworks(
    a: &Framework,
    b: &Framework,
    mode: Comparison,
    tol: f64,
) -> Result<bool> {
    if a.num_vertices() != b.num_vertices() {
        return Err(Error::invalid("frameworks have different vertex counts"));
    }
    match mode {
        Comparison::Equivalent => {
            if a.graph() != b.graph() {
                return Err(Error::invalid("equivalence needs the same graph"));
            }
            Ok(a.graph().edges().iter().all(|e| {
                (a.squared_distance(e.i(), e.j()) - b.squared_distance(e.i(), e.j())).abs() <= tol
            }))
        }
        Comparison::Congruent => {
            let n = a.num_vertices();
            Ok((0..n).all(|i| {
                (i + 1..n)
                    .all(|j| (a.squared_distance(i, j) - b.squared_distance(i, j)).abs() <= tol)
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(graph: Graph, xs: &[f64]) -> Framework {
        Framework::from_flat(graph, 1, xs.to_vec()).unwrap()
    }

    fn four_cycle() -> Graph {
        Graph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    #[test]
    fn complete_graphs() {
        assert_eq!(make_complete(1).unwrap().num_edges(), 0);
        let k3 = make_complete(3).unwrap();
        let pairs: Vec<_> = k3.edges().iter().map(|e| e.pair()).collect();
        assert_eq!(pairs, [(0, 1), (0, 2), (1, 2)]);
        // enumeration oracle for binomial(4, 2)
        let mut count = 0;
        for i in 0..4 {
            for j in 0..4 {
                if i < j {
                    count += 1;
                }
            }
        }
        assert_eq!(make_complete(4).unwrap().num_edges(), count);
        assert!(matches!(make_complete(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let g = Graph::new(4, [(3, 2), (1, 0), (2, 0)]).unwrap();
        let again = Graph::new(4, g.edges().iter().map(|e| e.pair())).unwrap();
        assert_eq!(g, again);
        assert_eq!(g.edges()[0].pair(), (0, 1));
    }

    #[test]
    fn sampling_is_deterministic() {
        let k4 = make_complete(4).unwrap();
        let a = sample_generic_framework(&k4, 2, 7).unwrap();
        let b = sample_generic_framework(&k4, 2, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_generic_framework(&k4, 2, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_coordinates_are_dyadic() {
        let f = sample_generic_framework(&make_complete(3).unwrap(), 2, 1).unwrap();
        for &x in f.coordinates() {
            let k = x * SAMPLE_DENOMINATOR;
            assert_eq!(k, libm::trunc(k));
            assert!(k.abs() <= SAMPLE_NUMERATOR_BOUND as f64);
        }
    }

    #[test]
    fn sampled_k3_on_a_line_is_distinct() {
        let f = sample_generic_framework(&make_complete(3).unwrap(), 1, 3).unwrap();
        let xs = f.coordinates();
        assert!(xs[0] != xs[1] && xs[1] != xs[2] && xs[0] != xs[2]);
    }

    #[test]
    fn sampled_k4_in_plane_has_no_collinear_triple() {
        for seed in 0..10 {
            let f = sample_generic_framework(&make_complete(4).unwrap(), 2, seed).unwrap();
            // determinant oracle over every vertex triple
            for a in 0..4 {
                for b in a + 1..4 {
                    for c in b + 1..4 {
                        let (p, q, r) = (f.point(a), f.point(b), f.point(c));
                        let det = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
                        assert!(det.abs() > 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_flexible_graph_still_succeeds() {
        // Rank of a 4-cycle in the plane is 4, below the counting bound 5.
        let f = sample_generic_framework(&four_cycle(), 2, 11).unwrap();
        assert_eq!(rigidity::rigidity_rank(&f, 1e-9), 4);
    }

    #[test]
    fn sampling_retries_are_bounded() {
        let tol = Tolerances::default().with_retries(1);
        assert!(sample_generic_framework_with(&make_complete(3).unwrap(), 2, 0, &tol).is_ok());
        let err = sample_generic_framework_with(
            &make_complete(3).unwrap(),
            2,
            0,
            &Tolerances { rank: 2.0, ..tol },
        )
        .unwrap_err();
        assert!(matches!(err, Error::SamplingFailure { attempts: 1, .. }));
    }

    #[test]
    fn identity_and_reflection_are_congruent() {
        let f = line(four_cycle(), &[0.0, 1.0, 3.0, 2.0]);
        assert!(compare_frameworks(&f, &f, Comparison::Congruent, 0.0).unwrap());
        let reflected = line(four_cycle(), &[0.0, -1.0, -3.0, -2.0]);
        assert!(compare_frameworks(&f, &reflected, Comparison::Congruent, 0.0).unwrap());
    }

    #[test]
    fn folded_cycle_is_equivalent_but_not_congruent() {
        // Folding vertex 1 across the line keeps every edge length.
        let f = line(four_cycle(), &[0.0, 1.0, 3.0, 2.0]);
        let g = line(four_cycle(), &[0.0, -1.0, 1.0, 2.0]);
        assert!(compare_frameworks(&f, &g, Comparison::Equivalent, 0.0).unwrap());
        assert!(!compare_frameworks(&f, &g, Comparison::Congruent, 0.0).unwrap());
    }

    #[test]
    fn congruence_pads_lower_dimension() {
        let g = make_complete(3).unwrap();
        let a = line(g.clone(), &[0.0, 1.0, 3.0]);
        let b = Framework::new(g, 2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert!(compare_frameworks(&a, &b, Comparison::Congruent, 0.0).unwrap());
    }

    #[test]
    fn vertex_mismatch_is_rejected() {
        let a = line(make_complete(3).unwrap(), &[0.0, 1.0, 2.0]);
        let b = line(four_cycle(), &[0.0, 1.0, 2.0, 3.0]);
        assert!(compare_frameworks(&a, &b, Comparison::Congruent, 0.0).is_err());
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let mut s = vec![0, 1];
        let mut n = 1;
        while next_combination(&mut s, 5) {
            n += 1;
        }
        assert_eq!(n, 10);
    }
}
