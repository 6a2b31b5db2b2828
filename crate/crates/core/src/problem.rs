//! MaxCut instances as diagonal Ising cost Hamiltonians.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QlsError, Result};

/// Largest qubit count the dense diagonal and statevector routines accept.
pub const MAX_QUBITS: usize = 24;

/// Spin of qubit `qubit` in basis state `z`: +1 for bit 0, -1 for bit 1.
#[inline]
pub fn spin(z: usize, qubit: usize) -> f64 {
    1.0 - 2.0 * ((z >> qubit) & 1) as f64
}

/// Product of spins over the qubits set in `mask`.
#[inline]
pub fn spin_product(z: usize, mask: usize) -> f64 {
    if (z & mask).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn mask(&self) -> usize {
        (1 << self.u) | (1 << self.v)
    }
}

/// A weighted simple graph with canonically ordered edges (`u < v`, sorted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct ProblemGraph {
    num_vertices: usize,
    edges: Vec<Edge>,
    seed: Option<u64>,
    weighted: bool,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    seed: Option<u64>,
    weighted: bool,
}

impl TryFrom<GraphFile> for ProblemGraph {
    type Error = QlsError;

    fn try_from(file: GraphFile) -> Result<Self> {
        let edges = file.edges.into_iter().map(|(u, v, weight)| Edge { u, v, weight }).collect();
        let mut graph = ProblemGraph::new(file.n, edges)?;
        graph.seed = file.seed;
        graph.weighted = file.weighted;
        Ok(graph)
    }
}

impl From<ProblemGraph> for GraphFile {
    fn from(g: ProblemGraph) -> Self {
        GraphFile {
            n: g.num_vertices,
            edges: g.edges.iter().map(|e| (e.u, e.v, e.weight)).collect(),
            seed: g.seed,
            weighted: g.weighted,
        }
    }
}

impl ProblemGraph {
    /// Validates and canonicalizes an edge list. Endpoints may be given in
    /// either order; duplicates, self-loops and zero or non-finite weights
    /// are rejected.
    pub fn new(num_vertices: usize, edges: Vec<Edge>) -> Result<Self> {
        if num_vertices < 2 {
            return Err(QlsError::InvalidInput(format!("graph needs at least 2 vertices, got {num_vertices}")));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for e in edges {
            let (u, v) = if e.u < e.v { (e.u, e.v) } else { (e.v, e.u) };
            if u == v {
                return Err(QlsError::InvalidInput(format!("self-loop on vertex {u}")));
            }
            if v >= num_vertices {
                return Err(QlsError::InvalidInput(format!(
                    "edge ({u}, {v}) out of range for {num_vertices} vertices"
                )));
            }
            if !e.weight.is_finite() || e.weight == 0.0 {
                return Err(QlsError::InvalidInput(format!("edge ({u}, {v}) has invalid weight {}", e.weight)));
            }
            if !seen.insert((u, v)) {
                return Err(QlsError::InvalidInput(format!("duplicate edge ({u}, {v})")));
            }
            canonical.push(Edge { u, v, weight: e.weight });
        }
        if canonical.is_empty() {
            return Err(QlsError::InvalidInput("graph has no edges".into()));
        }
        canonical.sort_by_key(|e| (e.u, e.v));
        let weighted = canonical.iter().any(|e| e.weight != 1.0);
        Ok(Self { num_vertices, edges: canonical, seed: None, weighted })
    }

    /// Unit-weight graph from vertex pairs.
    pub fn unweighted(num_vertices: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs.iter().map(|&(u, v)| Edge { u, v, weight: 1.0 }).collect();
        Self::new(num_vertices, edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.edges.iter().filter(|e| e.u == vertex || e.v == vertex).count()
    }

    pub fn is_regular(&self, degree: usize) -> bool {
        (0..self.num_vertices).all(|v| self.degree(v) == degree)
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let edges = self.edges.iter().map(|e| Edge { weight: e.weight * factor, ..*e }).collect();
        let mut g = Self::new(self.num_vertices, edges)?;
        g.seed = self.seed;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QlsError::InvalidInput(e.to_string()))
    }
}

/// Random simple `degree`-regular graph from the pairing model.
///
/// Stubs are shuffled and paired; pairings with loops or repeated edges are
/// rejected and redrawn, up to `10 * n` attempts. Weighted graphs draw
/// weights uniformly from (0, 1].
pub fn generate_regular_graph(n: usize, degree: usize, weighted: bool, seed: u64) -> Result<ProblemGraph> {
    if degree == 0 || n <= degree || !(n * degree).is_multiple_of(2) {
        return Err(QlsError::InvalidInput(format!("no simple {degree}-regular graph on {n} vertices")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    let budget = 10 * n;
    for _ in 0..budget {
        stubs.shuffle(&mut rng);
        let mut pairs = BTreeSet::new();
        let simple = stubs.chunks_exact(2).all(|pair| {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            a != b && pairs.insert((a, b))
        });
        if !simple {
            continue;
        }
        let edges = pairs
            .into_iter()
            .map(|(u, v)| Edge { u, v, weight: if weighted { 1.0 - rng.random::<f64>() } else { 1.0 } })
            .collect();
        let mut graph = ProblemGraph::new(n, edges)?;
        graph.seed = Some(seed);
        graph.weighted = weighted;
        return Ok(graph);
    }
    Err(QlsError::GenerationFailed { attempts: budget })
}

/// Distinct diagonal values with a per-state index, used to tabulate phases.
#[derive(Debug, Clone)]
pub(crate) struct LevelTable {
    pub levels: Vec<f64>,
    pub index: Vec<u16>,
}

const MAX_LEVELS: usize = 4096;

/// Full diagonal of the cost Hamiltonian `H_C = Σ J_ij s_i s_j`.
#[derive(Debug, Clone)]
pub struct CostDiagonal {
    num_qubits: usize,
    values: Vec<f64>,
    n_c: f64,
    ground_energy: f64,
    ground_index: usize,
    levels: Option<LevelTable>,
}

impl CostDiagonal {
    pub fn build(graph: &ProblemGraph) -> Result<Self> {
        Self::build_with_cap(graph, MAX_QUBITS)
    }

    pub fn build_with_cap(graph: &ProblemGraph, cap: usize) -> Result<Self> {
        let n = graph.num_vertices();
        if n > cap {
            return Err(QlsError::ResourceRefused { what: "cost diagonal", requested: n, cap });
        }
        let masks: Vec<(usize, f64)> = graph.edges().iter().map(|e| (e.mask(), e.weight)).collect();
        let mut values = vec![0.0; 1 << n];
        values.par_iter_mut().enumerate().for_each(|(z, value)| {
            *value = masks.iter().map(|&(m, w)| w * spin_product(z, m)).sum();
        });
        let n_c = graph.edges().iter().map(|e| e.weight * e.weight).sum();
        Ok(Self::from_values(n, values, n_c))
    }

    /// Wraps an explicit diagonal; `n_c` is taken as `Σ J²` of the source.
    pub(crate) fn from_values(num_qubits: usize, values: Vec<f64>, n_c: f64) -> Self {
        let (ground_index, ground_energy) = values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (z, v)| if v < best.1 { (z, v) } else { best });
        let levels = Self::tabulate(&values);
        Self { num_qubits, values, n_c, ground_energy, ground_index, levels }
    }

    fn tabulate(values: &[f64]) -> Option<LevelTable> {
        let mut levels = Vec::new();
        for &v in values {
            if let Err(pos) = levels.binary_search_by(|l: &f64| l.total_cmp(&v)) {
                if levels.len() == MAX_LEVELS {
                    return None;
                }
                levels.insert(pos, v);
            }
        }
        let index = values.iter().map(|v| levels.binary_search_by(|l: &f64| l.total_cmp(v)).unwrap() as u16).collect();
        Some(LevelTable { levels, index })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ J_ij²`, equal to `⟨+|H_C²|+⟩`.
    pub fn n_c(&self) -> f64 {
        self.n_c
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    /// Smallest basis index attaining the ground energy.
    pub fn ground_index(&self) -> usize {
        self.ground_index
    }

    /// Number of basis states attaining the ground energy.
    pub fn ground_degeneracy(&self) -> usize {
        self.values.iter().filter(|&&v| v == self.ground_energy).count()
    }

    pub(crate) fn levels(&self) -> Option<&LevelTable> {
        self.levels.as_ref()
    }
}

/// `1 - r = (E₀ - energy) / E₀`.
pub fn approximation_ratio(energy: f64, cost: &CostDiagonal) -> Result<f64> {
    let e0 = cost.ground_energy();
    if e0 == 0.0 {
        return Err(QlsError::UndefinedRatio);
    }
    Ok((e0 - energy) / e0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub support: Vec<usize>,
    pub coefficient: f64,
}

impl PauliTerm {
    pub fn mask(&self) -> usize {
        self.support.iter().fold(0, |m, &q| m | (1 << q))
    }
}

/// Weighted sum of `σᶻ` products.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PauliTermSum {
    pub terms: Vec<PauliTerm>,
}

impl PauliTermSum {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, z: usize) -> f64 {
        self.terms.iter().map(|t| t.coefficient * spin_product(z, t.mask())).sum()
    }

    /// Diagonal over all `2^num_qubits` basis states.
    pub fn diagonal(&self, num_qubits: usize) -> Vec<f64> {
        let masks: Vec<(usize, f64)> = self.terms.iter().map(|t| (t.mask(), t.coefficient)).collect();
        let mut out = vec![0.0; 1 << num_qubits];
        out.par_iter_mut().enumerate().for_each(|(z, value)| {
            *value = masks.iter().map(|&(m, c)| c * spin_product(z, m)).sum();
        });
        out
    }
}

/// `H_C² = constant + T₂ + T₄`, one term per ordered pair of edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcSquared {
    pub constant: f64,
    pub t2: PauliTermSum,
    pub t4: PauliTermSum,
}

pub fn hc_squared_decomposition(graph: &ProblemGraph) -> HcSquared {
    let edges = graph.edges();
    let mut constant = 0.0;
    let mut t2 = PauliTermSum::default();
    let mut t4 = PauliTermSum::default();
    for (a, e) in edges.iter().enumerate() {
        for (b, f) in edges.iter().enumerate() {
            let coefficient = e.weight * f.weight;
            if a == b {
                constant += coefficient;
                continue;
            }
            let mask = e.mask() ^ f.mask();
            let support: Vec<usize> = (0..graph.num_vertices()).filter(|q| mask >> q & 1 == 1).collect();
            let term = PauliTerm { support, coefficient };
            match term.support.len() {
                0 => constant += coefficient,
                2 => t2.terms.push(term),
                _ => t4.terms.push(term),
            }
        }
    }
    HcSquared { constant, t2, t4 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k4() -> ProblemGraph {
        ProblemGraph::unweighted(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn single_edge_diagonal() {
        let g = ProblemGraph::unweighted(2, &[(0, 1)]).unwrap();
        let c = CostDiagonal::build(&g).unwrap();
        assert_eq!(c.values(), &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(c.ground_energy(), -1.0);
        assert_eq!(c.ground_index(), 1);
        assert_eq!(c.n_c(), 1.0);
    }

    #[test]
    fn k4_ground_energy() {
        let c = CostDiagonal::build(&k4()).unwrap();
        assert_eq!(c.ground_energy(), -2.0);
        assert_eq!(c.values().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn regular_generator_gives_k4() {
        for seed in 0..5 {
            let g = generate_regular_graph(4, 3, false, seed).unwrap();
            assert_eq!(g.num_edges(), 6);
            assert!(g.edges().iter().all(|e| e.weight == 1.0));
        }
    }

    #[test]
    fn regular_generator_is_deterministic() {
        let a = generate_regular_graph(10, 3, false, 7).unwrap();
        let b = generate_regular_graph(10, 3, false, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weighted_generator_degrees_and_weights() {
        let g = generate_regular_graph(12, 3, true, 3).unwrap();
        assert!(g.is_regular(3));
        assert!(g.edges().iter().all(|e| e.weight > 0.0 && e.weight <= 1.0));
        assert!(g.is_weighted());
    }

    #[test]
    fn infeasible_parameters_rejected() {
        assert!(matches!(generate_regular_graph(5, 3, false, 0), Err(QlsError::InvalidInput(_))));
        assert!(matches!(generate_regular_graph(3, 3, false, 0), Err(QlsError::InvalidInput(_))));
    }

    #[test]
    fn cap_is_enforced() {
        let g = generate_regular_graph(10, 3, false, 1).unwrap();
        assert!(matches!(CostDiagonal::build_with_cap(&g, 8), Err(QlsError::ResourceRefused { .. })));
    }

    #[test]
    fn loader_rejects_bad_edges() {
        assert!(
            ProblemGraph::from_json(r#"{"n":3,"edges":[[0,1,1.0],[1,0,1.0]],"seed":null,"weighted":false}"#).is_err()
        );
        assert!(ProblemGraph::from_json(r#"{"n":3,"edges":[[0,3,1.0]],"seed":null,"weighted":false}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = generate_regular_graph(8, 3, true, 11).unwrap();
        let back = ProblemGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn ratio_examples() {
        let c = CostDiagonal::build(&k4()).unwrap();
        assert_eq!(approximation_ratio(-2.0, &c).unwrap(), 0.0);
        assert_eq!(approximation_ratio(0.0, &c).unwrap(), 1.0);
        let shifted = CostDiagonal::from_values(1, vec![-10.0, 0.0], 1.0);
        assert!((approximation_ratio(-9.0, &shifted).unwrap() - 0.1).abs() < 1e-15);
        let zero = CostDiagonal::from_values(1, vec![0.0, 1.0], 1.0);
        assert_eq!(approximation_ratio(0.0, &zero), Err(QlsError::UndefinedRatio));
    }

    #[test]
    fn single_edge_square_is_identity() {
        let g = ProblemGraph::unweighted(2, &[(0, 1)]).unwrap();
        let d = hc_squared_decomposition(&g);
        assert_eq!(d.constant, 1.0);
        assert!(d.t2.is_empty() && d.t4.is_empty());
    }

    #[test]
    fn pairing_counts_on_triangle_free_cubic_graph() {
        // The 3-cube is triangle free and 3-regular.
        let cube: Vec<(usize, usize)> =
            (0..8usize).flat_map(|v| (0..3).map(move |b| (v, v ^ (1 << b)))).filter(|(u, v)| u < v).collect();
        let g = ProblemGraph::unweighted(8, &cube).unwrap();
        let n_e = g.num_edges();
        let d = hc_squared_decomposition(&g);
        assert_eq!(d.t2.len(), 4 * n_e);
        assert_eq!(d.t4.len(), n_e * (n_e - 5));
        assert_eq!(d.constant as usize + d.t2.len() + d.t4.len(), n_e * n_e);
    }

    #[test]
    fn level_table_only_for_few_levels() {
        let g = generate_regular_graph(8, 3, false, 2).unwrap();
        assert!(CostDiagonal::build(&g).unwrap().levels().is_some());
        let c = CostDiagonal::build(&k4()).unwrap();
        let table = c.levels().unwrap();
        for (z, &v) in c.values().iter().enumerate() {
            assert_eq!(table.levels[table.index[z] as usize], v);
        }
    }
}
