//! Box boundaries, uniform partitions and safe-set containment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{IBox, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

/// A box with one dimension pinned to an endpoint of its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub region: IBox,
    pub fixed_dim: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceSet {
    pub parent: IBox,
    pub faces: Vec<Face>,
}

impl FaceSet {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn regions(&self) -> impl Iterator<Item = &IBox> {
        self.faces.iter().map(|f| &f.region)
    }
}

/// Faces ordered by `(fixed_dim, side)`; degenerate dimensions contribute none.
pub fn faces(x: &IBox) -> Result<FaceSet> {
    let mut out = Vec::with_capacity(2 * x.dim());
    for (i, d) in x.dims().iter().enumerate() {
        if d.is_degenerate() {
            continue;
        }
        for (side, v) in [(Side::Low, d.lo), (Side::High, d.hi)] {
            out.push(Face {
                region: x.with_dim(i, Interval::point(v)),
                fixed_dim: i,
                side,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateBox);
    }
    Ok(FaceSet {
        parent: x.clone(),
        faces: out,
    })
}

/// Grid edges `lo = e_0 < … < e_k = hi`; neighbours share edges exactly.
fn edges(d: Interval, k: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..=k)
        .map(|j| d.lo + d.width() * (j as f64) / (k as f64))
        .collect();
    e[0] = d.lo;
    e[k] = d.hi;
    for j in 1..k {
        e[j] = e[j].clamp(d.lo, d.hi).max(e[j - 1]);
    }
    e
}

/// Lazily enumerates the `k`-per-dimension grid over `x` in row-major order
/// (last dimension fastest). Degenerate dimensions are not split.
#[derive(Debug, Clone)]
pub struct Cells {
    edges: Vec<Vec<f64>>,
    counts: Vec<usize>,
    next: usize,
    total: usize,
}

impl Cells {
    pub fn new(x: &IBox, k: usize) -> Cells {
        let k = k.max(1);
        let edges: Vec<Vec<f64>> = x
            .dims()
            .iter()
            .map(|d| {
                if d.is_degenerate() {
                    vec![d.lo, d.hi]
                } else {
                    edges(*d, k)
                }
            })
            .collect();
        let counts: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
        let total = counts.iter().product();
        Cells {
            edges,
            counts,
            next: 0,
            total,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Multi-index of the linear cell index.
    pub fn index_of(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for d in (0..self.counts.len()).rev() {
            idx[d] = linear % self.counts[d];
            linear /= self.counts[d];
        }
        idx
    }

    pub fn cell(&self, linear: usize) -> IBox {
        let idx = self.index_of(linear);
        IBox::from_dims_unchecked(
            idx.iter()
                .zip(&self.edges)
                .map(|(&j, e)| Interval {
                    lo: e[j],
                    hi: e[j + 1],
                })
                .collect(),
        )
    }
}

impl Iterator for Cells {
    type Item = IBox;

    fn next(&mut self) -> Option<IBox> {
        if self.next >= self.total {
            return None;
        }
        let c = self.cell(self.next);
        self.next += 1;
        Some(c)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Cells {}

pub fn partition_box(x: &IBox, k: usize) -> Vec<IBox> {
    Cells::new(x, k).collect()
}

/// Every face split on the `k`-grid of its free dimensions, in face order.
pub fn partition_faces(fs: &FaceSet, k: usize) -> Vec<IBox> {
    fs.faces
        .iter()
        .flat_map(|f| Cells::new(&f.region, k))
        .collect()
}

/// Cells covering the topological boundary of `x` in ℝⁿ.
///
/// For a full-dimensional box these are the partitioned faces. A box with a
/// degenerate dimension has empty interior, so it is its own boundary and
/// the whole box is partitioned instead.
pub fn boundary_cells(x: &IBox, k: usize) -> Vec<IBox> {
    if x.non_degenerate_dims() == x.dim() {
        let fs = faces(x).expect("full-dimensional box has faces");
        partition_faces(&fs, k)
    } else {
        partition_box(x, k)
    }
}

/// Per-dimension optional closed constraint; `None` leaves a dimension free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SafeSet {
    dims: Vec<Option<Interval>>,
}

impl SafeSet {
    pub fn new(dims: Vec<Option<Interval>>) -> Result<Self> {
        if dims.iter().all(Option::is_none) {
            return Err(Error::UnconstrainedSafeSet);
        }
        for d in dims.iter().flatten() {
            Interval::new(d.lo, d.hi)?;
        }
        Ok(SafeSet { dims })
    }

    pub fn from_box(b: &IBox) -> SafeSet {
        SafeSet {
            dims: b.dims().iter().copied().map(Some).collect(),
        }
    }

    pub fn dims(&self) -> &[Option<Interval>] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn contains_point(&self, y: &[f64]) -> bool {
        self.dims
            .iter()
            .zip(y)
            .all(|(c, &v)| c.is_none_or(|c| c.contains(v)))
    }
}

pub fn contained_in_safe(hull: &IBox, s: &SafeSet) -> Result<bool> {
    if hull.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            context: "safe set",
            expected: s.dim(),
            found: hull.dim(),
        });
    }
    Ok(hull
        .dims()
        .iter()
        .zip(s.dims())
        .all(|(h, c)| c.is_none_or(|c| h.is_subset_of(&c))))
}
