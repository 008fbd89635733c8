//! Simplicial partition of the dynamic range and its quadrature weights.
//!
//! [`build_mesh`] triangulates the sampled states (Delaunay), and every
//! simplex then hands an equal `1 / (n + 1)` share of its volume to each of
//! its vertices. The resulting node volumes are the weights of a vertex-average
//! Riemann sum over the convex hull of the samples.

mod delaunay;
mod geom;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};

pub use geom::simplex_volume;
pub(crate) use geom::orient;

/// Relative volume below which a simplex is treated as a sliver and dropped.
pub const SLIVER_REL_VOLUME: f64 = 1e-12;
/// Duplicate-merge radius relative to the bounding-box diagonal.
pub const DEDUP_REL_TOLERANCE: f64 = 1e-10;
/// Dimension above which Delaunay meshing is known to become unreliable.
pub const HIGH_DIM_WARNING: usize = 8;

/// Sample locations with the radius used to merge near-duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
    dedup_tolerance: f64,
}

/// Result of merging near-duplicate points.
#[derive(Debug, Clone)]
pub struct Dedup {
    pub cloud: PointCloud,
    /// `groups[k]` lists the original indices merged into node `k`, in input order.
    pub groups: Vec<Vec<usize>>,
}

impl PointCloud {
    /// Wraps points, using the default tolerance (`1e-10` × bounding-box diagonal).
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Spec("point dimension must be positive".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        let tol = Bounds::enclosing(points.iter().map(Vec::as_slice))
            .map_or(0.0, |b| b.diagonal() * DEDUP_REL_TOLERANCE);
        Ok(PointCloud {
            dim,
            points,
            dedup_tolerance: tol,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.dedup_tolerance = tol.max(0.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dedup_tolerance(&self) -> f64 {
        self.dedup_tolerance
    }

    /// Merges points closer than the tolerance. The first point of each group
    /// is kept as the representative.
    pub fn dedup(&self) -> Dedup {
        let tol = self.dedup_tolerance;
        let mut reps: Vec<usize> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();

        if tol == 0.0 {
            let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
            for (i, p) in self.points.iter().enumerate() {
                let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
                match seen.get(&key) {
                    Some(&g) => groups[g].push(i),
                    None => {
                        seen.insert(key, groups.len());
                        reps.push(i);
                        groups.push(vec![i]);
                    }
                }
            }
        } else {
            let cell = |v: f64| (v / tol).floor() as i64;
            let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
            let offsets = neighbour_offsets(self.dim);
            for (i, p) in self.points.iter().enumerate() {
                let key: Vec<i64> = p.iter().map(|&v| cell(v)).collect();
                let mut found = None;
                'search: for off in &offsets {
                    let probe: Vec<i64> = key.iter().zip(off).map(|(a, b)| a + b).collect();
                    if let Some(list) = buckets.get(&probe) {
                        for &g in list {
                            if geom::dist2(&self.points[reps[g]], p) <= tol * tol {
                                found = Some(g);
                                break 'search;
                            }
                        }
                    }
                }
                match found {
                    Some(g) => groups[g].push(i),
                    None => {
                        buckets.entry(key).or_default().push(groups.len());
                        reps.push(i);
                        groups.push(vec![i]);
                    }
                }
            }
        }

        let points = reps.iter().map(|&r| self.points[r].clone()).collect();
        Dedup {
            cloud: PointCloud {
                dim: self.dim,
                points,
                dedup_tolerance: tol,
            },
            groups,
        }
    }
}

fn neighbour_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-1..=1).map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                })
            })
            .collect();
    }
    out
}

/// A supporting hyperplane of the hull, oriented so the hull is on the non-negative side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullFacet {
    pub vertices: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
}

impl HullFacet {
    fn signed_distance(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }
}

/// Delaunay partition of the convex hull of a point cloud.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    nodes: PointCloud,
    /// Original index → node index, for clouds that contained duplicates.
    node_of_point: Vec<usize>,
    simplices: Vec<Vec<usize>>,
    simplex_volumes: Vec<f64>,
    node_volumes: Vec<f64>,
    hull_volume: f64,
    hull_facets: Vec<HullFacet>,
    dropped_slivers: usize,
}

/// Per-simplex max centroid-to-vertex distance and its global maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementMetric {
    pub per_simplex: Vec<f64>,
    pub global_max: f64,
}

/// Triangulates the cloud (after merging duplicates) and fills in volumes.
pub fn build_mesh(cloud: &PointCloud) -> Result<SimplicialMesh> {
    let n = cloud.dim();
    if n > HIGH_DIM_WARNING {
        log::warn!(
            "meshing in {n} dimensions; Delaunay partitions are unreliable from eighth order upward"
        );
    }
    let dedup = cloud.dedup();
    if dedup.cloud.len() < n + 1 {
        return Err(Error::TooFewPoints {
            needed: n + 1,
            got: dedup.cloud.len(),
        });
    }
    let mut node_of_point = vec![0; cloud.len()];
    for (k, g) in dedup.groups.iter().enumerate() {
        for &i in g {
            node_of_point[i] = k;
        }
    }
    let nodes = dedup.cloud;

    let tri = delaunay::Triangulation::build(n, nodes.points())?;
    let raw = tri.finite_cells();
    let raw_volumes: Vec<f64> = raw
        .iter()
        .map(|s| simplex_volume(&s.iter().map(|&v| nodes.points[v].as_slice()).collect::<Vec<_>>()))
        .collect();
    let hull_volume: f64 = raw_volumes.iter().sum();
    if !(hull_volume > 0.0) {
        return Err(Error::DegenerateInput { dim: n });
    }

    // drop slivers, hand their volume back proportionally
    let cutoff = SLIVER_REL_VOLUME * hull_volume;
    let raw_count = raw.len();
    let mut simplices = Vec::with_capacity(raw.len());
    let mut simplex_volumes = Vec::with_capacity(raw.len());
    for (s, v) in raw.into_iter().zip(raw_volumes) {
        if v >= cutoff {
            simplices.push(s);
            simplex_volumes.push(v);
        }
    }
    let dropped_slivers = raw_count - simplices.len();
    let kept: f64 = simplex_volumes.iter().sum();
    if kept != hull_volume {
        let scale = hull_volume / kept;
        simplex_volumes.iter_mut().for_each(|v| *v *= scale);
    }

    let hull_facets = tri
        .hull_facets()
        .into_iter()
        .map(|(facet, inner)| hull_facet(&nodes, facet, inner))
        .collect();

    let mut mesh = SimplicialMesh {
        nodes,
        node_of_point,
        simplices,
        simplex_volumes,
        node_volumes: Vec::new(),
        hull_volume,
        hull_facets,
        dropped_slivers,
    };
    mesh.node_volumes = node_volumes(&mesh);
    Ok(mesh)
}

fn hull_facet(nodes: &PointCloud, vertices: Vec<usize>, inner: usize) -> HullFacet {
    let n = nodes.dim();
    let base = &nodes.points[vertices[0]];
    // normal_k = orient(facet, base + e_k): the cofactor expansion of the facet hyperplane
    let mut normal = Vec::with_capacity(n);
    for k in 0..n {
        let mut probe = base.clone();
        probe[k] += 1.0;
        let mut pts: Vec<&[f64]> = vertices.iter().map(|&v| nodes.points[v].as_slice()).collect();
        pts.push(&probe);
        normal.push(orient(&pts));
    }
    let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    normal.iter_mut().for_each(|v| *v /= norm);
    let mut offset: f64 = normal.iter().zip(base).map(|(a, b)| a * b).sum();
    let side: f64 = normal
        .iter()
        .zip(&nodes.points[inner])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        - offset;
    if side < 0.0 {
        normal.iter_mut().for_each(|v| *v = -*v);
        offset = -offset;
    }
    HullFacet {
        vertices,
        normal,
        offset,
    }
}

/// Spreads each simplex volume equally over its `n + 1` vertices.
pub fn node_volumes(mesh: &SimplicialMesh) -> Vec<f64> {
    let mut out = vec![0.0; mesh.nodes.len()];
    for (s, &v) in mesh.simplices.iter().zip(&mesh.simplex_volumes) {
        let share = v / s.len() as f64;
        for &k in s {
            out[k] += share;
        }
    }
    out
}

/// Largest centroid-to-vertex distance per simplex, and over the mesh.
pub fn refinement_metric(mesh: &SimplicialMesh) -> RefinementMetric {
    let n = mesh.dim();
    let per_simplex: Vec<f64> = mesh
        .simplices
        .iter()
        .map(|s| {
            let mut centroid = vec![0.0; n];
            for &k in s {
                for (c, x) in centroid.iter_mut().zip(&mesh.nodes.points[k]) {
                    *c += x;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= s.len() as f64);
            s.iter()
                .map(|&k| geom::dist2(&centroid, &mesh.nodes.points[k]).sqrt())
                .fold(0.0, f64::max)
        })
        .collect();
    let global_max = per_simplex.iter().copied().fold(0.0, f64::max);
    RefinementMetric {
        per_simplex,
        global_max,
    }
}

impl SimplicialMesh {
    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    pub fn nodes(&self) -> &PointCloud {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_of_point(&self) -> &[usize] {
        &self.node_of_point
    }

    pub fn simplices(&self) -> &[Vec<usize>] {
        &self.simplices
    }

    pub fn simplex_volumes(&self) -> &[f64] {
        &self.simplex_volumes
    }

    pub fn node_volumes(&self) -> &[f64] {
        &self.node_volumes
    }

    pub fn hull_volume(&self) -> f64 {
        self.hull_volume
    }

    pub fn hull_facets(&self) -> &[HullFacet] {
        &self.hull_facets
    }

    pub fn dropped_slivers(&self) -> usize {
        self.dropped_slivers
    }

    /// Whether `x` lies in the convex hull, allowing `tol` outside each facet
    /// (absolute, in state units).
    pub fn hull_contains(&self, x: &[f64], tol: f64) -> bool {
        self.hull_facets
            .iter()
            .all(|f| f.signed_distance(x) >= -tol)
    }

    /// Default containment slack: `1e-9` × bounding-box diagonal.
    pub fn hull_tolerance(&self) -> f64 {
        Bounds::enclosing(self.nodes.points.iter().map(Vec::as_slice))
            .map_or(0.0, |b| 1e-9 * b.diagonal())
    }

    /// Σ weight_k · h(x_k) over the nodes.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, h: F) -> f64 {
        self.nodes
            .points
            .iter()
            .zip(&self.node_volumes)
            .map(|(x, w)| w * h(x))
            .sum()
    }

    pub fn to_dump(&self) -> MeshDump {
        MeshDump {
            dim: self.dim(),
            nodes: self.nodes.points.clone(),
            simplices: self.simplices.clone(),
            simplex_volumes: self.simplex_volumes.clone(),
            node_volumes: self.node_volumes.clone(),
            hull_volume: self.hull_volume,
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_dump())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Debug/plot export of a mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshDump {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
    pub simplex_volumes: Vec<f64>,
    pub node_volumes: Vec<f64>,
    pub hull_volume: f64,
}
