//! Incremental Bowyer–Watson Delaunay triangulation in any dimension.
//!
//! The convex hull is closed off with a single vertex at infinity, so every
//! hull facet carries an "infinite" cell. A point conflicts with an infinite
//! cell when it lies strictly beyond the cell's finite facet; when it lies on
//! the facet's hyperplane the decision is delegated to the finite neighbour,
//! whose circumsphere cuts that hyperplane in the facet's circumsphere. The
//! finite cells therefore always tile the convex hull of the inserted points,
//! with no bootstrap super-simplex to strip afterwards.
//!
//! Cocircular ties are resolved as "no conflict". Before re-triangulating, the
//! conflict region is grown until every boundary facet is strictly visible
//! from the new point, which keeps the result a valid triangulation even when
//! the floating-point predicates disagree near ties.

use std::collections::HashMap;

use super::geom::{barycentric, circumsphere, dist2, orient};
use crate::error::{Error, Result};

pub(crate) const INF: u32 = u32::MAX;

const ORIENT_EPS: f64 = 1e-13;
const BARY_EPS: f64 = 1e-13;
const SPHERE_REL_EPS: f64 = 1e-12;

pub(crate) struct Triangulation {
    dim: usize,
    /// Normalized coordinates, `dim` per point.
    coords: Vec<f64>,
    /// `dim + 1` vertex ids per cell; `INF` marks the point at infinity.
    verts: Vec<u32>,
    /// `nbrs[c * (dim + 1) + i]` is the cell across the facet opposite vertex slot `i`.
    nbrs: Vec<u32>,
    centers: Vec<f64>,
    radii2: Vec<f64>,
    alive: Vec<bool>,
    stamp: Vec<u32>,
    generation: u32,
    last_finite: u32,
    rng_state: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    In,
    Out,
}

impl Triangulation {
    /// Triangulates `points` (all of dimension `dim`, pairwise distinct).
    pub(crate) fn build(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < dim + 1 {
            return Err(Error::TooFewPoints {
                needed: dim + 1,
                got: points.len(),
            });
        }
        let coords = normalize(dim, points);
        let order = spatial_order(dim, &coords);

        let mut tri = Triangulation {
            dim,
            coords,
            verts: Vec::new(),
            nbrs: Vec::new(),
            centers: Vec::new(),
            radii2: Vec::new(),
            alive: Vec::new(),
            stamp: Vec::new(),
            generation: 0,
            last_finite: 0,
            rng_state: 0x9e37_79b9_7f4a_7c15,
        };

        let initial = tri.initial_simplex(&order)?;
        tri.bootstrap(&initial);
        for &p in &order {
            if initial.contains(&p) {
                continue;
            }
            tri.insert(p)?;
        }
        Ok(tri)
    }

    #[inline]
    fn k(&self) -> usize {
        self.dim + 1
    }

    #[inline]
    fn point(&self, v: u32) -> &[f64] {
        let d = self.dim;
        &self.coords[v as usize * d..(v as usize + 1) * d]
    }

    #[inline]
    fn cell_verts(&self, c: u32) -> &[u32] {
        let k = self.k();
        &self.verts[c as usize * k..(c as usize + 1) * k]
    }

    #[inline]
    fn cell_nbrs(&self, c: u32) -> &[u32] {
        let k = self.k();
        &self.nbrs[c as usize * k..(c as usize + 1) * k]
    }

    fn is_infinite(&self, c: u32) -> bool {
        self.cell_verts(c).contains(&INF)
    }

    /// Finite cells as vertex-id tuples.
    pub(crate) fn finite_cells(&self) -> Vec<Vec<usize>> {
        (0..self.alive.len() as u32)
            .filter(|&c| self.alive[c as usize] && !self.is_infinite(c))
            .map(|c| self.cell_verts(c).iter().map(|&v| v as usize).collect())
            .collect()
    }

    /// Hull facets as (facet vertex ids, id of a vertex on the inner side).
    pub(crate) fn hull_facets(&self) -> Vec<(Vec<usize>, usize)> {
        let mut out = Vec::new();
        for c in 0..self.alive.len() as u32 {
            if !self.alive[c as usize] || !self.is_infinite(c) {
                continue;
            }
            let verts = self.cell_verts(c);
            let slot = verts.iter().position(|&v| v == INF).unwrap();
            let facet: Vec<usize> = verts
                .iter()
                .filter(|&&v| v != INF)
                .map(|&v| v as usize)
                .collect();
            let inner_cell = self.cell_nbrs(c)[slot];
            let inner = self
                .cell_verts(inner_cell)
                .iter()
                .find(|v| !verts.contains(v))
                .copied()
                .unwrap();
            out.push((facet, inner as usize));
        }
        out
    }

    fn initial_simplex(&self, order: &[u32]) -> Result<Vec<u32>> {
        let d = self.dim;
        let first = order[0];
        let origin = self.point(first).to_vec();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut chosen = vec![first];
        for &cand in &order[1..] {
            let mut r: Vec<f64> = self
                .point(cand)
                .iter()
                .zip(&origin)
                .map(|(a, b)| a - b)
                .collect();
            for b in &basis {
                let proj: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-9 {
                r.iter_mut().for_each(|v| *v /= norm);
                basis.push(r);
                chosen.push(cand);
                if chosen.len() == d + 1 {
                    return Ok(chosen);
                }
            }
        }
        Err(Error::DegenerateInput { dim: d })
    }

    fn new_cell(&mut self, verts: &[u32]) -> u32 {
        let id = self.alive.len() as u32;
        self.verts.extend_from_slice(verts);
        self.nbrs.extend(std::iter::repeat_n(INF, verts.len()));
        self.alive.push(true);
        self.stamp.push(0);
        if verts.contains(&INF) {
            self.centers.extend(std::iter::repeat_n(0.0, self.dim));
            self.radii2.push(f64::INFINITY);
        } else {
            let pts: Vec<&[f64]> = verts.iter().map(|&v| self.point(v)).collect();
            // flat cells never win a strict in-sphere test
            let (c, r2) = circumsphere(&pts).unwrap_or((vec![0.0; self.dim], f64::NEG_INFINITY));
            self.centers.extend(c);
            self.radii2.push(r2);
            self.last_finite = id;
        }
        id
    }

    fn set_nbr(&mut self, c: u32, slot: usize, other: u32) {
        let k = self.k();
        self.nbrs[c as usize * k + slot] = other;
    }

    fn bootstrap(&mut self, initial: &[u32]) {
        let k = self.k();
        let root = self.new_cell(initial);
        let mut ghosts = Vec::with_capacity(k);
        for i in 0..k {
            let mut v = initial.to_vec();
            v[i] = INF;
            let g = self.new_cell(&v);
            ghosts.push(g);
        }
        for i in 0..k {
            self.set_nbr(root, i, ghosts[i]);
            self.set_nbr(ghosts[i], i, root);
            for j in 0..k {
                if j != i {
                    self.set_nbr(ghosts[i], j, ghosts[j]);
                }
            }
        }
        self.last_finite = root;
    }

    fn orient_with(&self, facet: &[u32], p: &[f64]) -> f64 {
        let mut pts: Vec<&[f64]> = facet.iter().map(|&v| self.point(v)).collect();
        pts.push(p);
        orient(&pts)
    }

    fn in_sphere(&self, c: u32, p: &[f64]) -> bool {
        let d = self.dim;
        let center = &self.centers[c as usize * d..(c as usize + 1) * d];
        let r2 = self.radii2[c as usize];
        dist2(center, p) < r2 * (1.0 - SPHERE_REL_EPS)
    }

    fn conflicts(&self, c: u32, p: &[f64]) -> bool {
        let verts = self.cell_verts(c);
        let Some(slot) = verts.iter().position(|&v| v == INF) else {
            return self.in_sphere(c, p);
        };
        let facet: Vec<u32> = verts.iter().copied().filter(|&v| v != INF).collect();
        let inner_cell = self.cell_nbrs(c)[slot];
        let inner = self
            .cell_verts(inner_cell)
            .iter()
            .copied()
            .find(|v| !verts.contains(v))
            .unwrap();
        let sp = self.orient_with(&facet, p);
        if sp.abs() <= ORIENT_EPS {
            return self.in_sphere(inner_cell, p);
        }
        let sq = self.orient_with(&facet, self.point(inner));
        sp.signum() != sq.signum()
    }

    fn next_rand(&mut self) -> u64 {
        let mut x = self.rng_state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.rng_state = x;
        x
    }

    /// Walks from the last created cell to one that conflicts with `p`.
    fn locate(&mut self, p: &[f64]) -> u32 {
        let mut cur = self.last_finite;
        let max_steps = 4 * self.alive.len() + 64;
        for _ in 0..max_steps {
            let verts: Vec<&[f64]> = self.cell_verts(cur).iter().map(|&v| self.point(v)).collect();
            let Some(lambda) = barycentric(&verts, p) else {
                break;
            };
            let negative: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] < -BARY_EPS).collect();
            if negative.is_empty() {
                return cur;
            }
            let pick = negative[(self.next_rand() % negative.len() as u64) as usize];
            let next = self.cell_nbrs(cur)[pick];
            if self.is_infinite(next) {
                if self.conflicts(next, p) {
                    return next;
                }
                break;
            }
            cur = next;
        }
        // fall back to a scan
        (0..self.alive.len() as u32)
            .find(|&c| self.alive[c as usize] && self.conflicts(c, p))
            .expect("a new point always conflicts with some cell")
    }

    fn insert(&mut self, p_id: u32) -> Result<()> {
        let k = self.k();
        let p = self.point(p_id).to_vec();
        let seed = self.locate(&p);

        self.generation += 1;
        let gen = self.generation;
        let mut marks: HashMap<u32, Mark> = HashMap::new();
        let mut cavity = vec![seed];
        marks.insert(seed, Mark::In);
        let mut stack = vec![seed];
        while let Some(c) = stack.pop() {
            for i in 0..k {
                let nb = self.cell_nbrs(c)[i];
                if marks.contains_key(&nb) {
                    continue;
                }
                if self.conflicts(nb, &p) {
                    marks.insert(nb, Mark::In);
                    cavity.push(nb);
                    stack.push(nb);
                } else {
                    marks.insert(nb, Mark::Out);
                }
            }
        }

        // grow until star-shaped with respect to p
        loop {
            let mut grow = Vec::new();
            for &c in &cavity {
                for i in 0..k {
                    let out = self.cell_nbrs(c)[i];
                    if marks.get(&out) == Some(&Mark::In) {
                        continue;
                    }
                    if !self.boundary_facet_visible(c, i, out, &p) {
                        grow.push(out);
                    }
                }
            }
            if grow.is_empty() {
                break;
            }
            for c in grow {
                if marks.insert(c, Mark::In) != Some(Mark::In) {
                    cavity.push(c);
                    for i in 0..k {
                        let nb = self.cell_nbrs(c)[i];
                        marks.entry(nb).or_insert(Mark::Out);
                    }
                }
            }
        }
        for &c in &cavity {
            self.stamp[c as usize] = gen;
        }

        // re-triangulate: one new cell per boundary facet
        let mut boundary = Vec::new();
        for &c in &cavity {
            for i in 0..k {
                let out = self.cell_nbrs(c)[i];
                if self.stamp[out as usize] != gen {
                    boundary.push((c, i, out));
                }
            }
        }
        self.check_no_lost_vertex(&cavity, &boundary)?;

        let mut ridges: HashMap<Vec<u32>, (u32, usize)> = HashMap::with_capacity(boundary.len() * k);
        for &(c, i, out) in &boundary {
            let mut v = self.cell_verts(c).to_vec();
            v[i] = p_id;
            let fresh = self.new_cell(&v);
            self.set_nbr(fresh, i, out);
            let back = self
                .cell_nbrs(out)
                .iter()
                .position(|&x| x == c)
                .expect("adjacency is symmetric");
            self.set_nbr(out, back, fresh);
            for j in 0..k {
                if j == i {
                    continue;
                }
                let mut key: Vec<u32> = v
                    .iter()
                    .enumerate()
                    .filter(|&(s, _)| s != j)
                    .map(|(_, &x)| x)
                    .collect();
                key.sort_unstable();
                match ridges.remove(&key) {
                    Some((other, oslot)) => {
                        self.set_nbr(fresh, j, other);
                        self.set_nbr(other, oslot, fresh);
                    }
                    None => {
                        ridges.insert(key, (fresh, j));
                    }
                }
            }
        }
        debug_assert!(ridges.is_empty(), "cavity boundary is not a closed surface");
        for &c in &cavity {
            self.alive[c as usize] = false;
        }
        Ok(())
    }

    fn boundary_facet_visible(&self, c: u32, slot: usize, out: u32, p: &[f64]) -> bool {
        let verts = self.cell_verts(c);
        let facet: Vec<u32> = verts
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != slot)
            .map(|(_, &v)| v)
            .collect();
        if facet.contains(&INF) {
            return true;
        }
        let sp = self.orient_with(&facet, p);
        if sp.abs() <= ORIENT_EPS {
            return false;
        }
        let apex = verts[slot];
        if apex != INF {
            let sa = self.orient_with(&facet, self.point(apex));
            sp.signum() == sa.signum()
        } else {
            // p must be strictly beyond the hull facet
            let ov = self.cell_verts(out);
            let o = ov.iter().copied().find(|v| !facet.contains(v)).unwrap();
            let so = self.orient_with(&facet, self.point(o));
            sp.signum() != so.signum()
        }
    }

    fn check_no_lost_vertex(&self, cavity: &[u32], boundary: &[(u32, usize, u32)]) -> Result<()> {
        let mut kept: Vec<u32> = boundary
            .iter()
            .flat_map(|&(c, i, _)| {
                self.cell_verts(c)
                    .iter()
                    .enumerate()
                    .filter(move |&(s, _)| s != i)
                    .map(|(_, &v)| v)
            })
            .collect();
        kept.sort_unstable();
        kept.dedup();
        for &c in cavity {
            for &v in self.cell_verts(c) {
                if v != INF && kept.binary_search(&v).is_err() {
                    return Err(Error::DegenerateInput { dim: self.dim });
                }
            }
        }
        Ok(())
    }
}

/// Maps points into the unit box (uniform scale, so angles and spheres are preserved).
fn normalize(dim: usize, points: &[Vec<f64>]) -> Vec<f64> {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let scale = (0..dim).map(|d| hi[d] - lo[d]).fold(0.0, f64::max);
    let inv = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    points
        .iter()
        .flat_map(|p| (0..dim).map(|d| (p[d] - lo[d]) * inv).collect::<Vec<_>>())
        .collect()
}

/// Z-order insertion sequence; keeps successive points close so walks stay short.
fn spatial_order(dim: usize, coords: &[f64]) -> Vec<u32> {
    let n = coords.len() / dim;
    let bits = (63 / dim).min(21) as u32;
    let cells = ((1u64 << bits) - 1) as f64;
    let mut keyed: Vec<(u64, u32)> = (0..n)
        .map(|i| {
            let mut key = 0u64;
            let q: Vec<u64> = (0..dim)
                .map(|d| (coords[i * dim + d].clamp(0.0, 1.0) * cells) as u64)
                .collect();
            for b in (0..bits).rev() {
                for qd in &q {
                    key = (key << 1) | ((qd >> b) & 1);
                }
            }
            (key, i as u32)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}
