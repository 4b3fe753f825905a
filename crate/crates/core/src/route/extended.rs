use std::collections::HashMap;

use super::{check_nodes, RouteError};
use crate::numeric::{DenseMatrix, SparseAdjacency};
use crate::road::RoadGraph;
use crate::scalar::Scalar;

/// The road graph with one virtual vertex per distinct route appended.
///
/// Vertices `0..base_n` are the original segments with their adjacency and
/// features untouched. Vertex `base_n + k` stands for the `k`-th distinct route
/// (in first-appearance order); it is linked to each distinct member of that
/// route and its feature row is the mean of the members' rows. Virtual vertices
/// are never linked to each other.
#[derive(Debug, Clone)]
pub struct ExtendedGraph {
    base_n: usize,
    adjacency: SparseAdjacency<f64>,
    features: DenseMatrix<f64>,
    routes: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl ExtendedGraph {
    pub fn new<'a>(graph: &RoadGraph, routes: impl IntoIterator<Item = &'a [usize]>) -> Result<Self, RouteError> {
        Self::from_parts(graph.adjacency(), graph.features(), routes)
    }

    pub fn from_parts<'a>(
        adjacency: &SparseAdjacency<f64>,
        features: &DenseMatrix<f64>,
        routes: impl IntoIterator<Item = &'a [usize]>,
    ) -> Result<Self, RouteError> {
        let base_n = adjacency.n();
        assert_eq!(features.rows(), base_n, "one feature row per vertex");
        let mut distinct: Vec<Vec<usize>> = Vec::new();
        let mut lookup = HashMap::new();
        for (k, route) in routes.into_iter().enumerate() {
            if route.is_empty() {
                return Err(RouteError::EmptyRoute { route: k });
            }
            check_nodes(route, base_n)?;
            if !lookup.contains_key(route) {
                lookup.insert(route.to_vec(), distinct.len());
                distinct.push(route.to_vec());
            }
        }

        let n_ext = base_n + distinct.len();
        let mut lists: Vec<Vec<usize>> = (0..base_n).map(|i| adjacency.neighbors(i).to_vec()).collect();
        lists.resize(n_ext, Vec::new());
        let mut feat = Vec::with_capacity(n_ext * features.cols());
        feat.extend_from_slice(features.as_slice());
        for (k, route) in distinct.iter().enumerate() {
            let virt = base_n + k;
            let mut members = route.clone();
            members.sort_unstable();
            members.dedup();
            let inv = 1.0 / members.len() as f64;
            let mut row = vec![0.0; features.cols()];
            for &v in &members {
                lists[v].push(virt);
                for (r, &x) in row.iter_mut().zip(features.row(v)) {
                    *r += x;
                }
            }
            row.iter_mut().for_each(|r| *r *= inv);
            feat.extend(row);
            lists[virt] = members;
        }
        let adjacency = SparseAdjacency::from_lists(lists, true);
        let features = DenseMatrix::from_vec(n_ext, features.cols(), feat)?;
        Ok(Self { base_n, adjacency, features, routes: distinct, lookup })
    }

    pub fn base_n(&self) -> usize {
        self.base_n
    }

    /// Total vertex count `n + #S`.
    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn num_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn adjacency(&self) -> &SparseAdjacency<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &DenseMatrix<f64> {
        &self.features
    }

    pub fn is_virtual(&self, vertex: usize) -> bool {
        vertex >= self.base_n && vertex < self.n()
    }

    /// `f`: the route a virtual vertex stands for.
    pub fn route_of(&self, vertex: usize) -> Option<&[usize]> {
        vertex.checked_sub(self.base_n).and_then(|k| self.routes.get(k)).map(Vec::as_slice)
    }

    /// `f⁻¹`: the virtual vertex of a route.
    pub fn virtual_vertex(&self, route: &[usize]) -> Result<usize, RouteError> {
        self.lookup.get(route).map(|&k| self.base_n + k).ok_or(RouteError::RouteNotInExtension)
    }

    /// The distinct routes in virtual-vertex order.
    pub fn routes(&self) -> impl Iterator<Item = &[usize]> {
        self.routes.iter().map(Vec::as_slice)
    }
}

/// Embedding rows of the virtual vertices of `routes`, stacked in order.
/// `embeddings` must be computed on the extended graph.
pub fn virtual_node_embeddings<T: Scalar>(
    ext: &ExtendedGraph,
    embeddings: &DenseMatrix<T>,
    routes: &[&[usize]],
) -> Result<DenseMatrix<T>, RouteError> {
    assert_eq!(embeddings.rows(), ext.n(), "embeddings must cover the extended graph");
    let rows: Vec<usize> = routes.iter().map(|r| ext.virtual_vertex(r)).collect::<Result<_, _>>()?;
    Ok(embeddings.select_rows(&rows))
}
