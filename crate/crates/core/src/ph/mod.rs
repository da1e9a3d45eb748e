//! Vietoris–Rips filtrations and persistent homology.
//!
//! [`build_rips`] enumerates all simplices up to dimension `max_dim + 1`
//! whose appearance value (max pairwise vertex distance) stays below a
//! threshold, sorted by `(value, dimension, lexicographic vertex order)`.
//! [`persistence`] pairs them: dimension 0 by a union-find sweep over the
//! edges (elder rule), dimensions ≥ 1 by left-to-right column reduction of
//! the boundary matrix over Z/2 with a pivot cache. Zero-persistence pairs
//! are dropped from the output.
//!
//! [`oracle`] holds an independent full-matrix reduction used to validate
//! this module; [`dist`] the diagram and point-set matching distances.

pub mod dist;
pub mod oracle;

pub use dist::{bottleneck, pointset_wasserstein1, pointset_wasserstein1_sum, wasserstein1};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhError {
    #[error(
        "{count} points with max_dim=2 exceeds the cap of {cap}; \
         lower the threshold or reduce max_dim"
    )]
    TooManyPoints { count: usize, cap: usize },
    #[error("max_dim must be 0, 1 or 2, got {0}")]
    BadMaxDim(usize),
}

/// Point cap for two-dimensional homology; the dimension-3 skeleton above
/// this is too large to reduce.
pub const DIM2_POINT_CAP: usize = 512;

/// Multiset of (birth, death) pairs for one homology dimension. Infinite
/// deaths are `f64::INFINITY`; pairs are sorted by (birth, death).
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub pairs: Vec<(f64, f64)>,
}

impl PersistenceDiagram {
    pub fn empty(dim: usize) -> Self {
        PersistenceDiagram { dim, pairs: Vec::new() }
    }

    pub fn finite_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pairs.iter().copied().filter(|p| p.1.is_finite())
    }

    pub fn infinite_births(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().filter(|p| p.1.is_infinite()).map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn sort(&mut self) {
        self.pairs
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
}

/// A simplex with its filtration appearance value (view type; the
/// filtration itself stores flat per-dimension arrays).
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub vertices: Vec<u32>, // sorted ascending
    pub value: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// All simplices of a Rips complex up to dimension `max_dim + 1`, grouped
/// by dimension, each group in filtration order `(value, lex)`.
#[derive(Debug, Clone)]
pub struct Filtration {
    pub vertex_count: usize,
    pub max_dim: usize,
    pub threshold: f64,
    pub edges: Vec<(f64, u32, u32)>,
    pub triangles: Vec<(f64, u32, u32, u32)>,
    pub tets: Vec<(f64, u32, u32, u32, u32)>,
}

impl Filtration {
    pub fn simplex_count(&self) -> usize {
        self.vertex_count + self.edges.len() + self.triangles.len() + self.tets.len()
    }

    /// Every simplex in global filtration order
    /// `(value, dimension, lexicographic)`.
    pub fn all_simplices(&self) -> Vec<Simplex> {
        let mut out: Vec<Simplex> = Vec::with_capacity(self.simplex_count());
        for v in 0..self.vertex_count as u32 {
            out.push(Simplex { vertices: vec![v], value: 0.0 });
        }
        out.extend(self.edges.iter().map(|&(val, i, j)| Simplex {
            vertices: vec![i, j],
            value: val,
        }));
        out.extend(self.triangles.iter().map(|&(val, i, j, k)| Simplex {
            vertices: vec![i, j, k],
            value: val,
        }));
        out.extend(self.tets.iter().map(|&(val, i, j, k, l)| Simplex {
            vertices: vec![i, j, k, l],
            value: val,
        }));
        out.sort_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then(a.vertices.len().cmp(&b.vertices.len()))
                .then_with(|| a.vertices.cmp(&b.vertices))
        });
        out
    }
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// `min_x max_y d(x, y)` — past this scale the complex is a cone, so all
/// homology of dimension ≤ max_dim is dead and the diagrams are complete.
pub fn enclosing_radius(cloud: &[[f64; 3]]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, p) in cloud.iter().enumerate() {
        let mut far = 0.0f64;
        for (j, q) in cloud.iter().enumerate() {
            if i != j {
                far = far.max(dist3(p, q));
            }
        }
        best = best.min(far);
    }
    if best.is_infinite() {
        0.0 // single point
    } else {
        best
    }
}

/// Builds the Rips filtration of `cloud` up to simplex dimension
/// `max_dim + 1`, keeping simplices with appearance value ≤ `threshold`
/// (defaults to the enclosing radius).
pub fn build_rips(
    cloud: &[[f64; 3]],
    max_dim: usize,
    threshold: Option<f64>,
) -> Result<Filtration, PhError> {
    if max_dim > 2 {
        return Err(PhError::BadMaxDim(max_dim));
    }
    let m = cloud.len();
    if max_dim == 2 && m > DIM2_POINT_CAP {
        return Err(PhError::TooManyPoints { count: m, cap: DIM2_POINT_CAP });
    }
    let threshold = threshold.unwrap_or_else(|| enclosing_radius(cloud));

    let mut dist = vec![0.0f64; m * m];
    let mut neigh: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut edges: Vec<(f64, u32, u32)> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let d = dist3(&cloud[i], &cloud[j]);
            dist[i * m + j] = d;
            dist[j * m + i] = d;
            if d <= threshold {
                neigh[i].push(j as u32);
                edges.push((d, i as u32, j as u32));
            }
        }
    }
    edges.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut triangles: Vec<(f64, u32, u32, u32)> = Vec::new();
    if max_dim >= 1 {
        for i in 0..m {
            for (a, &j) in neigh[i].iter().enumerate() {
                let dij = dist[i * m + j as usize];
                let jm = j as usize * m;
                for &k in &neigh[i][(a + 1)..] {
                    let djk = dist[jm + k as usize];
                    if djk <= threshold {
                        let v = dij.max(dist[i * m + k as usize]).max(djk);
                        triangles.push((v, i as u32, j, k));
                    }
                }
            }
        }
        triangles.sort_unstable_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
    }

    let mut tets: Vec<(f64, u32, u32, u32, u32)> = Vec::new();
    if max_dim == 2 {
        for i in 0..m {
            for (a, &j) in neigh[i].iter().enumerate() {
                for (b, &k) in neigh[i][(a + 1)..].iter().enumerate() {
                    let (ju, ku) = (j as usize, k as usize);
                    if dist[ju * m + ku] > threshold {
                        continue;
                    }
                    let base = dist[i * m + ju].max(dist[i * m + ku]).max(dist[ju * m + ku]);
                    for &l in &neigh[i][(a + 1 + b + 1)..] {
                        let lu = l as usize;
                        if dist[ju * m + lu] <= threshold && dist[ku * m + lu] <= threshold {
                            let v = base
                                .max(dist[i * m + lu])
                                .max(dist[ju * m + lu])
                                .max(dist[ku * m + lu]);
                            tets.push((v, i as u32, j, k, l));
                        }
                    }
                }
            }
        }
        tets.sort_unstable_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
                .then(a.4.cmp(&b.4))
        });
    }

    Ok(Filtration { vertex_count: m, max_dim, threshold, edges, triangles, tets })
}

/// Union-find with the elder rule: on a merge the component whose minimal
/// vertex is larger dies.
struct ElderForest {
    parent: Vec<u32>,
    min_vertex: Vec<u32>,
}

impl ElderForest {
    fn new(n: usize) -> Self {
        ElderForest {
            parent: (0..n as u32).collect(),
            min_vertex: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            self.parent[x as usize] = self.parent[self.parent[x as usize] as usize];
            x = self.parent[x as usize];
        }
        x
    }

    /// Returns false when already connected; otherwise merges, keeping the
    /// elder (smaller minimal vertex) as the surviving representative.
    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (keep, kill) = if self.min_vertex[ra as usize] <= self.min_vertex[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[kill as usize] = keep;
        true
    }
}

/// Sparse Z/2 boundary-matrix reduction with a pivot cache. Columns arrive
/// as sorted row-index lists in filtration order; reduced owner columns are
/// kept in a flat arena. Returns `Some(pivot_row)` for negative columns.
struct ColumnReduction {
    pivot_owner: Vec<u32>, // row -> owner column id, u32::MAX when free
    arena: Vec<u32>,
    cols: Vec<(u32, u32)>, // (arena offset, len) per stored column
    work: Vec<u32>,
    scratch: Vec<u32>,
}

impl ColumnReduction {
    fn new(row_count: usize) -> Self {
        ColumnReduction {
            pivot_owner: vec![u32::MAX; row_count],
            arena: Vec::new(),
            cols: Vec::new(),
            work: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// Reduces one column (sorted ascending); returns its final pivot row.
    fn reduce(&mut self, column: &[u32]) -> Option<u32> {
        self.work.clear();
        self.work.extend_from_slice(column);
        loop {
            let Some(&piv) = self.work.last() else { break };
            let owner = self.pivot_owner[piv as usize];
            if owner == u32::MAX {
                break;
            }
            // work ^= stored[owner]
            let (off, len) = self.cols[owner as usize];
            self.scratch.clear();
            let other = &self.arena[off as usize..(off + len) as usize];
            let (mut i, mut j) = (0usize, 0usize);
            while i < self.work.len() && j < other.len() {
                match self.work[i].cmp(&other[j]) {
                    std::cmp::Ordering::Less => {
                        self.scratch.push(self.work[i]);
                        i += 1;
                    }
                    std::cmp::Ordering::Greater => {
                        self.scratch.push(other[j]);
                        j += 1;
                    }
                    std::cmp::Ordering::Equal => {
                        i += 1;
                        j += 1;
                    }
                }
            }
            self.scratch.extend_from_slice(&self.work[i..]);
            self.scratch.extend_from_slice(&other[j..]);
            std::mem::swap(&mut self.work, &mut self.scratch);
        }
        let piv = self.work.last().copied();
        if let Some(p) = piv {
            self.pivot_owner[p as usize] = self.cols.len() as u32;
        }
        let off = self.arena.len() as u32;
        self.arena.extend_from_slice(&self.work);
        self.cols.push((off, self.work.len() as u32));
        piv
    }
}

/// Computes persistence diagrams in dimensions `0..=max_dim`.
///
/// Dimension 0 uses union-find; dimensions ≥ 1 reduce the coboundary matrix
/// in reverse filtration order with clearing (columns = k-simplices,
/// rows = (k+1)-cofacets), which pairs identically to the boundary
/// reduction but keeps the column count at the k-simplex count. The
/// independent oracle in [`oracle`] reduces the plain boundary matrix.
pub fn persistence(filtration: &Filtration) -> Vec<PersistenceDiagram> {
    let max_dim = filtration.max_dim;
    let m = filtration.vertex_count;
    let mut diagrams: Vec<PersistenceDiagram> =
        (0..=max_dim).map(PersistenceDiagram::empty).collect();

    // dimension 0: union-find over the edges (elder rule)
    let mut forest = ElderForest::new(m);
    let mut positive_edge = vec![false; filtration.edges.len()];
    for (e, &(value, i, j)) in filtration.edges.iter().enumerate() {
        if forest.union(i, j) {
            if value > 0.0 {
                diagrams[0].pairs.push((0.0, value));
            }
        } else {
            positive_edge[e] = true;
        }
    }
    let mut seen_roots = vec![false; m];
    for v in 0..m as u32 {
        let r = forest.find(v) as usize;
        if !seen_roots[r] {
            seen_roots[r] = true;
            diagrams[0].pairs.push((0.0, f64::INFINITY));
        }
    }

    // dimension 1: edge columns over triangle-cofacet rows, reverse order.
    // Negative (merging) edges are cleared — their columns are zero in a
    // valid reduction.
    let n_tri = filtration.triangles.len();
    let mut negative_tri = vec![false; n_tri];
    if max_dim >= 1 {
        let mut edge_index = vec![u32::MAX; m * m];
        for (e, &(_, i, j)) in filtration.edges.iter().enumerate() {
            edge_index[i as usize * m + j as usize] = e as u32;
        }
        // cofacet lists in ascending triangle order
        let mut cofacets: Vec<Vec<u32>> = vec![Vec::new(); filtration.edges.len()];
        for (t, &(_, i, j, k)) in filtration.triangles.iter().enumerate() {
            let (iu, ju, ku) = (i as usize, j as usize, k as usize);
            cofacets[edge_index[iu * m + ju] as usize].push(t as u32);
            cofacets[edge_index[iu * m + ku] as usize].push(t as u32);
            cofacets[edge_index[ju * m + ku] as usize].push(t as u32);
        }
        let mut red = ColumnReduction::new(n_tri);
        let mut col_buf: Vec<u32> = Vec::new();
        for e in (0..filtration.edges.len()).rev() {
            if !positive_edge[e] {
                continue; // cleared
            }
            // reversed row indices, ascending
            col_buf.clear();
            col_buf.extend(cofacets[e].iter().rev().map(|&t| (n_tri - 1) as u32 - t));
            match red.reduce(&col_buf) {
                Some(r) => {
                    let t = n_tri - 1 - r as usize;
                    negative_tri[t] = true;
                    let birth = filtration.edges[e].0;
                    let death = filtration.triangles[t].0;
                    if death > birth {
                        diagrams[1].pairs.push((birth, death));
                    }
                }
                None => {
                    diagrams[1].pairs.push((filtration.edges[e].0, f64::INFINITY));
                }
            }
        }
    }

    // dimension 2: triangle columns over tetrahedron-cofacet rows.
    if max_dim == 2 && n_tri > 0 {
        let tri_index: std::collections::HashMap<(u32, u32, u32), u32> = filtration
            .triangles
            .iter()
            .enumerate()
            .map(|(t, &(_, i, j, k))| ((i, j, k), t as u32))
            .collect();
        let n_tet = filtration.tets.len();
        let mut cofacets: Vec<Vec<u32>> = vec![Vec::new(); n_tri];
        for (x, &(_, i, j, k, l)) in filtration.tets.iter().enumerate() {
            cofacets[tri_index[&(i, j, k)] as usize].push(x as u32);
            cofacets[tri_index[&(i, j, l)] as usize].push(x as u32);
            cofacets[tri_index[&(i, k, l)] as usize].push(x as u32);
            cofacets[tri_index[&(j, k, l)] as usize].push(x as u32);
        }
        let mut red = ColumnReduction::new(n_tet);
        let mut col_buf: Vec<u32> = Vec::new();
        for t in (0..n_tri).rev() {
            if negative_tri[t] {
                continue; // cleared
            }
            col_buf.clear();
            if n_tet > 0 {
                col_buf.extend(cofacets[t].iter().rev().map(|&x| (n_tet - 1) as u32 - x));
            }
            match red.reduce(&col_buf) {
                Some(r) => {
                    let x = n_tet - 1 - r as usize;
                    let birth = filtration.triangles[t].0;
                    let death = filtration.tets[x].0;
                    if death > birth {
                        diagrams[2].pairs.push((birth, death));
                    }
                }
                None => {
                    diagrams[2].pairs.push((filtration.triangles[t].0, f64::INFINITY));
                }
            }
        }
    }

    for d in &mut diagrams {
        d.sort();
    }
    diagrams
}

/// Convenience: Rips diagrams of a cloud at the default threshold.
pub fn rips_diagrams(
    cloud: &[[f64; 3]],
    max_dim: usize,
) -> Result<Vec<PersistenceDiagram>, PhError> {
    let f = build_rips(cloud, max_dim, None)?;
    Ok(persistence(&f))
}
