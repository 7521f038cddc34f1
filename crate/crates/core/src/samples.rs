use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::PointSet;

/// Row-major collection of `dim`-dimensional points.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Shape { expected: dim, got: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut data = Vec::new();
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Shape { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn from_points3(points: &[Vector3<f64>]) -> Self {
        Self { dim: 3, data: points.iter().flat_map(|p| [p.x, p.y, p.z]).collect() }
    }

    pub fn from_points2(points: &[Vector2<f64>]) -> Self {
        Self { dim: 2, data: points.iter().flat_map(|p| [p.x, p.y]).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, data }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Per-axis population standard deviation.
    pub fn std_dev(&self) -> Vec<f64> {
        let m = self.mean();
        let n = self.len() as f64;
        let mut s = vec![0.0; self.dim];
        for r in self.rows() {
            for k in 0..self.dim {
                s[k] += (r[k] - m[k]).powi(2);
            }
        }
        s.iter().map(|v| (v / n).sqrt()).collect()
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for r in self.rows() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(r[k]);
                hi[k] = hi[k].max(r[k]);
            }
        }
        (lo, hi)
    }
}

impl From<&PointSet> for Samples {
    fn from(set: &PointSet) -> Self {
        Samples::from_points3(set.points())
    }
}
