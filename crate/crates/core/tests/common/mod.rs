//! Independent geometric oracles shared by the mesh tests and the acceptance run.

#![allow(dead_code)]

use kdde::mesh::{build_mesh, PointCloud};
use kdde::Bounds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Andrew's monotone chain; returns the hull in counter-clockwise order.
pub fn hull_2d(points: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.iter().map(|v| [v[0], v[1]]).collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Empty-circumcircle check with the tolerance scaled to the bounding box.
pub fn delaunay_violation(points: &[Vec<f64>], simplices: &[Vec<usize>]) -> Option<String> {
    let b = Bounds::enclosing(points.iter().map(Vec::as_slice)).unwrap();
    let scale = b.diagonal();
    for s in simplices {
        let (a, bb, c) = (&points[s[0]], &points[s[1]], &points[s[2]]);
        let d = 2.0 * (a[0] * (bb[1] - c[1]) + bb[0] * (c[1] - a[1]) + c[0] * (a[1] - bb[1]));
        let sq = |p: &Vec<f64>| p[0] * p[0] + p[1] * p[1];
        let ux = (sq(a) * (bb[1] - c[1]) + sq(bb) * (c[1] - a[1]) + sq(c) * (a[1] - bb[1])) / d;
        let uy = (sq(a) * (c[0] - bb[0]) + sq(bb) * (a[0] - c[0]) + sq(c) * (bb[0] - a[0])) / d;
        let r = ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt();
        for (k, p) in points.iter().enumerate() {
            if s.contains(&k) {
                continue;
            }
            let dist = ((p[0] - ux).powi(2) + (p[1] - uy).powi(2)).sqrt();
            if dist < r - 1e-12 * scale.max(r) {
                return Some(format!("node {k} inside circumcircle of {s:?}: {dist} < {r}"));
            }
        }
    }
    None
}

pub fn locate(points: &[Vec<f64>], simplices: &[Vec<usize>], p: &[f64]) -> Option<usize> {
    simplices.iter().position(|s| {
        let (a, b, c) = (&points[s[0]], &points[s[1]], &points[s[2]]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        let eps = -1e-12;
        l1 >= eps && l2 >= eps && 1.0 - l1 - l2 >= eps
    })
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Volume conservation against the shoelace hull, empty circumcircles, and
/// permutation invariance on `trials` random clouds.
pub fn mesh_invariant_suite(seed: u64, trials: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let n = rng.random_range(10..400);
        let mut pts = random_cloud(&mut rng, n);
        // mix in grid points to create cocircular ties
        if trial % 3 == 0 {
            for i in 0..6 {
                for j in 0..6 {
                    pts.push(vec![i as f64 / 5.0, j as f64 / 5.0]);
                }
            }
        }
        let mesh = build_mesh(&PointCloud::new(2, pts.clone()).unwrap()).map_err(|e| format!("trial {trial}: {e}"))?;
        let hull = shoelace(&hull_2d(&pts));
        let sp: f64 = mesh.simplex_volumes().iter().sum();
        let sk: f64 = mesh.node_volumes().iter().sum();
        check(rel(sp, hull) < 1e-9, || format!("trial {trial}: simplex volumes {sp} vs hull {hull}"))?;
        check(rel(sk, hull) < 1e-9, || format!("trial {trial}: node volumes {sk} vs hull {hull}"))?;
        check(rel(mesh.hull_volume(), hull) < 1e-9, || format!("trial {trial}: hull volume"))?;
        for (s, v) in mesh.simplices().iter().zip(mesh.simplex_volumes()) {
            let mut ids = s.clone();
            ids.sort_unstable();
            ids.dedup();
            check(ids.len() == 3 && *v > 0.0, || format!("trial {trial}: bad simplex {s:?}"))?;
        }
        if let Some(msg) = delaunay_violation(mesh.nodes().points(), mesh.simplices()) {
            return Err(format!("trial {trial}: {msg}"));
        }

        // shuffled input gives the same hull volume and multiset of node volumes
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let other = build_mesh(&PointCloud::new(2, shuffled).unwrap()).map_err(|e| format!("trial {trial}: {e}"))?;
        check(rel(other.hull_volume(), mesh.hull_volume()) < 1e-9, || format!("trial {trial}: shuffled hull volume"))?;
        let mut a = mesh.node_volumes().to_vec();
        let mut b = other.node_volumes().to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            check((x - y).abs() <= 1e-9 * mesh.hull_volume(), || format!("trial {trial}: shuffled node volumes"))?;
        }
    }
    Ok(())
}
