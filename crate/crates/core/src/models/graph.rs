use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{dist, Cube};
use crate::point_process::MarkedPointCloud;

/// Undirected simple graph over a point cloud, stored in compressed
/// adjacency form with sorted neighbour lists.
#[derive(Clone, Debug)]
pub struct SpatialGraph {
    cloud: MarkedPointCloud,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    edge_count: usize,
}

impl SpatialGraph {
    /// Builds the graph from an unordered edge list; duplicates are merged
    /// and self-loops rejected.
    pub fn from_edges(cloud: MarkedPointCloud, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = cloud.len();
        let mut list: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::usage(format!("edge ({a},{b}) references a missing vertex")));
            }
            if a == b {
                return Err(Error::usage(format!("self-loop at vertex {a}")));
            }
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            list.push((a as u32, b as u32));
        }
        list.sort_unstable();
        list.dedup();
        let mut degree = vec![0usize; n + 1];
        for &(a, b) in &list {
            degree[a as usize + 1] += 1;
            degree[b as usize + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree.clone();
        let mut fill = degree;
        let mut neighbors = vec![0u32; 2 * list.len()];
        for &(a, b) in &list {
            neighbors[fill[a as usize]] = b;
            fill[a as usize] += 1;
            neighbors[fill[b as usize]] = a;
            fill[b as usize] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok(SpatialGraph {
            cloud,
            offsets,
            neighbors,
            edge_count: list.len(),
        })
    }

    pub fn empty(cloud: MarkedPointCloud) -> Self {
        SpatialGraph::from_edges(cloud, std::iter::empty()).expect("empty edge list is valid")
    }

    pub fn cloud(&self) -> &MarkedPointCloud {
        &self.cloud
    }

    pub fn vertex_count(&self) -> usize {
        self.cloud.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    #[inline]
    pub fn location(&self, v: usize) -> &[f64] {
        self.cloud.location(v)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    /// Edges as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.vertex_count()).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .map(|&b| b as usize)
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
        })
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        dist(self.location(a), self.location(b))
    }

    /// Induced subgraph on the vertices inside `cube`; returns the subgraph
    /// and the original index of each of its vertices.
    pub fn restrict_to(&self, cube: &Cube) -> (SpatialGraph, Vec<usize>) {
        let keep = self.cloud.indices_in(cube);
        self.induced(&keep)
    }

    pub fn induced(&self, keep: &[usize]) -> (SpatialGraph, Vec<usize>) {
        let mut new_id = vec![usize::MAX; self.vertex_count()];
        for (k, &v) in keep.iter().enumerate() {
            new_id[v] = k;
        }
        let edges: Vec<(usize, usize)> = self
            .edges()
            .filter_map(|(a, b)| {
                let (x, y) = (new_id[a], new_id[b]);
                (x != usize::MAX && y != usize::MAX).then_some((x, y))
            })
            .collect();
        let sub = SpatialGraph::from_edges(self.cloud.select(keep), edges).expect("valid induced edges");
        (sub, keep.to_vec())
    }

    /// Graph on the same cloud keeping only edges accepted by `keep`.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> SpatialGraph {
        let edges: Vec<(usize, usize)> = self.edges().filter(|&(a, b)| keep(a, b)).collect();
        SpatialGraph::from_edges(self.cloud.clone(), edges).expect("subset of valid edges")
    }

    /// Graph on the same cloud with extra edges.
    pub fn with_edges(&self, extra: &[(usize, usize)]) -> Result<SpatialGraph> {
        let edges: Vec<(usize, usize)> = self.edges().chain(extra.iter().copied()).collect();
        SpatialGraph::from_edges(self.cloud.clone(), edges)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.vertex_count() == 0 {
            0.0
        } else {
            2.0 * self.edge_count as f64 / self.vertex_count() as f64
        }
    }

    /// Structural invariants: symmetric adjacency, no loops, valid ids.
    pub fn check_invariants(&self) -> bool {
        let n = self.vertex_count();
        (0..n).all(|v| {
            self.neighbors(v).iter().all(|&w| {
                let w = w as usize;
                w < n && w != v && self.has_edge(w, v)
            })
        })
    }

    /// Writes the edge CSV `id_a,id_b` with `id_a < id_b`.
    pub fn write_edges_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "id_a,id_b")?;
        for (a, b) in self.edges() {
            writeln!(out, "{a},{b}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;

    fn line_cloud(n: usize) -> MarkedPointCloud {
        let w = Window::new(1, 2.0 * n as f64 + 2.0, 0.0).unwrap();
        let coords: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let marks = vec![0.5; n];
        MarkedPointCloud::from_parts(w, 0, coords, marks, None, true).unwrap()
    }

    #[test]
    fn builds_symmetric_adjacency() {
        let g = SpatialGraph::from_edges(line_cloud(4), vec![(0, 1), (2, 1), (1, 0), (3, 2)]).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(g.check_invariants());
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn rejects_loops_and_bad_ids() {
        assert!(SpatialGraph::from_edges(line_cloud(3), vec![(1, 1)]).is_err());
        assert!(SpatialGraph::from_edges(line_cloud(3), vec![(0, 5)]).is_err());
    }

    #[test]
    fn edge_csv() {
        let g = SpatialGraph::from_edges(line_cloud(3), vec![(2, 0)]).unwrap();
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id_a,id_b\n0,2\n");
    }
}
