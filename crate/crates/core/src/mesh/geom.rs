//! Small dense kernels for simplex geometry in arbitrary dimension.

/// Determinant of the `n × n` row-major matrix in `a` (destroyed).
pub(crate) fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for c in col + 1..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
            }
        }
    }
    det
}

/// Solves `a x = b` in place (`b` becomes `x`). Returns false for a singular matrix.
pub(crate) fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for c in col + 1..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s / a[col * n + col];
    }
    b.iter().all(|v| v.is_finite())
}

/// `det[v_1 - v_0, …, v_n - v_0]` for `n + 1` points of dimension `n`.
pub(crate) fn orient(points: &[&[f64]]) -> f64 {
    let n = points.len() - 1;
    let mut m = vec![0.0; n * n];
    let base = points[0];
    for (r, p) in points[1..].iter().enumerate() {
        for c in 0..n {
            m[r * n + c] = p[c] - base[c];
        }
    }
    det_in_place(&mut m, n)
}

/// n-dimensional volume of the simplex spanned by `n + 1` vertices.
pub fn simplex_volume(vertices: &[&[f64]]) -> f64 {
    let n = vertices.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    orient(vertices).abs() / fact
}

/// Circumcenter and squared circumradius, or `None` for a flat simplex.
pub(crate) fn circumsphere(vertices: &[&[f64]]) -> Option<(Vec<f64>, f64)> {
    let n = vertices.len() - 1;
    let base = vertices[0];
    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (r, p) in vertices[1..].iter().enumerate() {
        let mut sq = 0.0;
        for c in 0..n {
            let d = p[c] - base[c];
            a[r * n + c] = 2.0 * d;
            sq += d * d;
        }
        rhs[r] = sq;
    }
    if !solve_in_place(&mut a, &mut rhs, n) {
        return None;
    }
    let r2 = rhs.iter().map(|v| v * v).sum();
    let center = rhs.iter().zip(base).map(|(o, b)| o + b).collect();
    Some((center, r2))
}

/// Barycentric coordinates of `p` with respect to the simplex.
pub(crate) fn barycentric(vertices: &[&[f64]], p: &[f64]) -> Option<Vec<f64>> {
    let n = vertices.len() - 1;
    let base = vertices[0];
    // columns are edge vectors: a[r][c] = (v_{c+1} - v_0)[r]
    let mut a = vec![0.0; n * n];
    for (c, v) in vertices[1..].iter().enumerate() {
        for r in 0..n {
            a[r * n + c] = v[r] - base[r];
        }
    }
    let mut rhs: Vec<f64> = p.iter().zip(base).map(|(x, b)| x - b).collect();
    if !solve_in_place(&mut a, &mut rhs, n) {
        return None;
    }
    let l0 = 1.0 - rhs.iter().sum::<f64>();
    let mut out = Vec::with_capacity(n + 1);
    out.push(l0);
    out.extend(rhs);
    Some(out)
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
