use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `lo[i] <= x[i] <= hi[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let b = Bounds { lo, hi };
        b.check_nondegenerate()?;
        Ok(b)
    }

    /// The pendulum benchmark range: angle in [-0.8, 0.8], angular rate in [-2, 2].
    pub fn pendulum_default() -> Self {
        Bounds {
            lo: vec![-0.8, -2.0],
            hi: vec![0.8, 2.0],
        }
    }

    /// Tight box around a set of points.
    pub fn enclosing<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in iter {
            for (d, &v) in p.iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        Some(Bounds { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    pub fn diagonal(&self) -> f64 {
        (0..self.dim())
            .map(|d| self.width(d).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn check_nondegenerate(&self) -> Result<()> {
        match (0..self.dim()).find(|&d| !(self.width(d) > 0.0)) {
            Some(axis) => Err(Error::DegenerateBounds { axis }),
            None => Ok(()),
        }
    }

    /// `count` evenly spaced values from lo to hi along `axis`, endpoints included.
    /// A single sample sits at the midpoint.
    pub fn linspace(&self, axis: usize, count: usize) -> Vec<f64> {
        let (lo, hi) = (self.lo[axis], self.hi[axis]);
        match count {
            0 => Vec::new(),
            1 => vec![0.5 * (lo + hi)],
            _ => {
                let step = (hi - lo) / (count - 1) as f64;
                (0..count)
                    .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
                    .collect()
            }
        }
    }

    /// Midpoints of `shape[d]` equal cells per axis, in the same order as [`Bounds::grid`].
    pub fn cell_centers(&self, shape: &[usize]) -> Vec<Vec<f64>> {
        let inner = Bounds {
            lo: (0..self.dim()).map(|d| self.lo[d] + 0.5 * self.width(d) / shape[d] as f64).collect(),
            hi: (0..self.dim()).map(|d| self.hi[d] - 0.5 * self.width(d) / shape[d] as f64).collect(),
        };
        inner.grid(shape)
    }

    /// Row-major tensor grid with `shape[d]` samples on axis `d`; the last axis varies fastest.
    pub fn grid(&self, shape: &[usize]) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = shape
            .iter()
            .enumerate()
            .map(|(d, &c)| self.linspace(d, c))
            .collect();
        let total: usize = shape.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..total {
            out.push(idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect());
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }
}
