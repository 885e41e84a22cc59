//! Sparse spatial weights: contiguity, k-nearest-neighbor and distance band.
//!
//! Indices refer to canonical (sorted tract id) order, so breaking ties by
//! index is the same as breaking them by tract id.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, shared_length, BBox, MultiPolygon, Point};
use crate::ingest::TractId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    Binary,
    RowStandardized,
    /// Arbitrary non-negative weights, e.g. imported from a file.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsMatrix {
    pub n: usize,
    /// Per row, `(column, weight)` sorted by column.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub standardization: Standardization,
    pub includes_self: bool,
    /// Rows without any neighbor other than themselves.
    pub islands: Vec<usize>,
    pub w_sum: f64,
}

impl WeightsMatrix {
    /// Builds a matrix from adjacency lists, validating indices and weights.
    pub fn from_neighbors(
        n: usize,
        mut neighbors: Vec<Vec<(usize, f64)>>,
        standardization: Standardization,
        includes_self: bool,
    ) -> Result<Self> {
        if neighbors.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: neighbors.len() });
        }
        for (i, row) in neighbors.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidArgument(format!("row {i} lists neighbor {} twice", w[0].0)));
                }
            }
            for &(j, w) in row.iter() {
                if j >= n {
                    return Err(Error::InvalidArgument(format!("row {i} refers to index {j} >= {n}")));
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidArgument(format!("weight {w} in row {i} is not >= 0")));
                }
                if j == i && !includes_self {
                    return Err(Error::InvalidArgument(format!("self-loop in row {i}")));
                }
            }
        }
        let islands = (0..n)
            .filter(|&i| !neighbors[i].iter().any(|&(j, w)| j != i && w > 0.0))
            .collect();
        let w_sum = neighbors.iter().flatten().map(|&(_, w)| w).sum();
        Ok(WeightsMatrix { n, neighbors, standardization, includes_self, islands, w_sum })
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| self.neighbors[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Directed edges `(i, j)` with positive weight, excluding self-loops.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&(j, w)| j != i && w > 0.0).map(move |&(j, _)| (i, j)))
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.neighbors[i].iter().all(|&(j, w)| self.weight(j, i) == w))
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                m[i][j] = w;
            }
        }
        m
    }

    /// Copy with `w_ii = 1` added to every row (binary only).
    pub fn with_self_loops(&self) -> Result<Self> {
        if self.standardization != Standardization::Binary {
            return Err(Error::InvalidArgument("self-loops can only be added to binary weights".into()));
        }
        let rows = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r: Vec<(usize, f64)> = row.iter().copied().filter(|&(j, _)| j != i).collect();
                r.push((i, 1.0));
                r
            })
            .collect();
        WeightsMatrix::from_neighbors(self.n, rows, Standardization::Binary, true)
    }

    /// Copy with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidArgument("scale factor must be positive".into()));
        }
        let rows = self
            .neighbors
            .iter()
            .map(|row| row.iter().map(|&(j, w)| (j, w * factor)).collect())
            .collect();
        WeightsMatrix::from_neighbors(self.n, rows, Standardization::General, self.includes_self)
    }

    /// Adjacency-list JSON: `[{"id", "neighbors": [{"id", "weight"}]}]`.
    pub fn to_json(&self, ids: &[TractId]) -> Result<serde_json::Value> {
        if ids.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: ids.len() });
        }
        let entries: Vec<AdjacencyEntry> = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, row)| AdjacencyEntry {
                id: ids[i].clone(),
                neighbors: row.iter().map(|&(j, weight)| AdjacencyLink { id: ids[j].clone(), weight }).collect(),
            })
            .collect();
        Ok(serde_json::to_value(entries)?)
    }

    /// Inverse of [`WeightsMatrix::to_json`]. `ids` fixes the index order.
    pub fn from_json(value: &serde_json::Value, ids: &[TractId]) -> Result<Self> {
        let entries: Vec<AdjacencyEntry> = serde_json::from_value(value.clone())?;
        let index = |id: &TractId| {
            ids.binary_search(id)
                .map_err(|_| Error::InvalidArgument(format!("unknown tract id `{id}` in weights")))
        };
        let mut rows = vec![Vec::new(); ids.len()];
        let mut includes_self = false;
        for e in &entries {
            let i = index(&e.id)?;
            for link in &e.neighbors {
                let j = index(&link.id)?;
                includes_self |= i == j;
                rows[i].push((j, link.weight));
            }
        }
        let all_binary = rows.iter().flatten().all(|&(_, w)| w == 1.0);
        let all_unit_rows = rows.iter().filter(|r| !r.is_empty()).all(|r| {
            let s: f64 = r.iter().map(|&(_, w)| w).sum();
            (s - 1.0).abs() <= 1e-12
        });
        let standardization = if all_binary {
            Standardization::Binary
        } else if all_unit_rows {
            Standardization::RowStandardized
        } else {
            Standardization::General
        };
        WeightsMatrix::from_neighbors(ids.len(), rows, standardization, includes_self)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AdjacencyLink {
    id: TractId,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdjacencyEntry {
    id: TractId,
    neighbors: Vec<AdjacencyLink>,
}

/// Rescales each row to sum to one. Rows with zero total weight are left
/// as they are and remain listed as islands.
pub fn row_standardize(w: &WeightsMatrix) -> WeightsMatrix {
    if w.standardization == Standardization::RowStandardized {
        return w.clone();
    }
    let rows = w
        .neighbors
        .iter()
        .map(|row| {
            let s: f64 = row.iter().map(|&(_, x)| x).sum();
            if s > 0.0 {
                row.iter().map(|&(j, x)| (j, x / s)).collect()
            } else {
                row.clone()
            }
        })
        .collect();
    WeightsMatrix::from_neighbors(w.n, rows, Standardization::RowStandardized, w.includes_self)
        .expect("rescaling keeps a valid matrix")
}

/// Default snapping tolerance: 1e-9 of the dataset's bounding-box diagonal.
pub fn default_snap_tolerance(geoms: &[MultiPolygon]) -> f64 {
    let mut b = BBox::empty();
    for g in geoms {
        b.merge(&g.bbox());
    }
    1e-9 * b.diagonal()
}

fn touches(a: &MultiPolygon, b: &MultiPolygon, tol: f64) -> bool {
    let hits = |p: &MultiPolygon, q: &MultiPolygon| {
        p.vertices().any(|v| q.segments().any(|(s, t)| point_segment_distance(v, s, t) <= tol))
    };
    hits(a, b) || hits(b, a)
}

fn shares_edge(a: &MultiPolygon, b: &MultiPolygon, tol: f64) -> bool {
    a.segments()
        .any(|s| b.segments().any(|t| shared_length(s, t, tol) > tol))
}

fn contiguity(
    geoms: &[MultiPolygon],
    snap_tol: Option<f64>,
    adjacent: fn(&MultiPolygon, &MultiPolygon, f64) -> bool,
) -> Result<WeightsMatrix> {
    if geoms.is_empty() {
        return Err(Error::Geometry("empty geometry set".into()));
    }
    let tol = snap_tol.unwrap_or_else(|| default_snap_tolerance(geoms));
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument("snap tolerance must be >= 0".into()));
    }
    let n = geoms.len();
    let boxes: Vec<BBox> = geoms.iter().map(MultiPolygon::bbox).collect();
    // Each unordered pair is decided once (i < j) so the result is symmetric.
    let upper: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter(|&j| boxes[i].intersects(&boxes[j], tol) && adjacent(&geoms[i], &geoms[j], tol))
                .collect()
        })
        .collect();
    let mut rows = vec![Vec::new(); n];
    for (i, js) in upper.iter().enumerate() {
        for &j in js {
            rows[i].push((j, 1.0));
            rows[j].push((i, 1.0));
        }
    }
    WeightsMatrix::from_neighbors(n, rows, Standardization::Binary, false)
}

/// Neighbors share at least one boundary point (within `snap_tol`).
pub fn queen_contiguity(geoms: &[MultiPolygon], snap_tol: Option<f64>) -> Result<WeightsMatrix> {
    contiguity(geoms, snap_tol, touches)
}

/// Neighbors share a boundary stretch longer than `snap_tol`.
pub fn rook_contiguity(geoms: &[MultiPolygon], snap_tol: Option<f64>) -> Result<WeightsMatrix> {
    contiguity(geoms, snap_tol, shares_edge)
}

fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Directed k nearest neighbors; ties broken by (distance, index).
pub fn knn_weights(centroids: &[Point], k: usize) -> Result<WeightsMatrix> {
    let n = centroids.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("k must satisfy 1 <= k < n (k = {k}, n = {n})")));
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist2(centroids[i], centroids[j]), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.iter().take(k).map(|&(_, j)| (j, 1.0)).collect()
        })
        .collect();
    WeightsMatrix::from_neighbors(n, rows, Standardization::Binary, false)
}

/// Binary neighbors within Euclidean distance `d`; optionally `w_ii = 1`.
pub fn distance_band_weights(centroids: &[Point], d: f64, include_self: bool) -> Result<WeightsMatrix> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("distance band must be positive".into()));
    }
    let n = centroids.len();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| if j == i { include_self } else { dist2(centroids[i], centroids[j]).sqrt() <= d })
                .map(|j| (j, 1.0))
                .collect()
        })
        .collect();
    WeightsMatrix::from_neighbors(n, rows, Standardization::Binary, include_self)
}

/// Largest nearest-neighbor distance; a band this wide leaves no islands.
pub fn max_nearest_neighbor_distance(centroids: &[Point]) -> Result<f64> {
    let n = centroids.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 points".into()));
    }
    Ok((0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| dist2(centroids[i], centroids[j]))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .fold(0.0, f64::max))
}
