//! Sound interval arithmetic and interval bound propagation.
//!
//! Arithmetic bounds are rounded outward by one ulp whenever the floating
//! point result is inexact; libm transcendentals are widened by a relative
//! `1e-12`. Everything here encloses the exact real result.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Activation, Network};
use crate::round::{
    add_down, add_up, mul_down, mul_up, recip_down, recip_up, widen_down, widen_up,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    pub const fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub const ZERO: Interval = Interval::point(0.0);
    pub const ONE: Interval = Interval::point(1.0);

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Smallest absolute value over the interval.
    pub fn mignitude(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    /// Largest absolute value over the interval.
    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn checked(self) -> Result<Interval> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn checked_add(self, rhs: Interval) -> Result<Interval> {
        (self + rhs).checked()
    }

    pub fn checked_mul(self, rhs: Interval) -> Result<Interval> {
        (self * rhs).checked()
    }

    /// Product with a real scalar.
    pub fn scale(self, w: f64) -> Interval {
        if w >= 0.0 {
            Interval {
                lo: mul_down(w, self.lo),
                hi: mul_up(w, self.hi),
            }
        } else {
            Interval {
                lo: mul_down(w, self.hi),
                hi: mul_up(w, self.lo),
            }
        }
    }

    /// `self / rhs`; `None` when the divisor contains zero.
    pub fn checked_div(self, rhs: Interval) -> Option<Interval> {
        if rhs.contains_zero() {
            return None;
        }
        let inv = Interval {
            lo: recip_down(rhs.hi),
            hi: recip_up(rhs.lo),
        };
        Some(self * inv)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;

    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;

    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;

    fn mul(self, rhs: Interval) -> Interval {
        let (a, b) = (self, rhs);
        let lo = mul_down(a.lo, b.lo)
            .min(mul_down(a.lo, b.hi))
            .min(mul_down(a.hi, b.lo))
            .min(mul_down(a.hi, b.hi));
        let hi = mul_up(a.lo, b.lo)
            .max(mul_up(a.lo, b.hi))
            .max(mul_up(a.hi, b.lo))
            .max(mul_up(a.hi, b.hi));
        Interval { lo, hi }
    }
}

pub fn iv_add(a: Interval, b: Interval) -> Result<Interval> {
    a.checked_add(b)
}

pub fn iv_mul(a: Interval, b: Interval) -> Result<Interval> {
    a.checked_mul(b)
}

pub fn iv_neg(a: Interval) -> Interval {
    -a
}

/// Axis-aligned box, one interval per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IBox {
    dims: Vec<Interval>,
}

impl IBox {
    pub fn new(dims: Vec<Interval>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::EmptyBox);
        }
        for d in &dims {
            Interval::new(d.lo, d.hi)?;
        }
        Ok(IBox { dims })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        IBox::new(dims)
    }

    /// `[c - eps, c + eps]` around every coordinate of `center`.
    pub fn around(center: &[f64], eps: f64) -> Result<Self> {
        IBox::new(
            center
                .iter()
                .map(|&c| Interval::new(c - eps, c + eps))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn point(p: &[f64]) -> Result<Self> {
        IBox::new(p.iter().map(|&x| Interval::point(x)).collect())
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.lo).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.hi).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::midpoint).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().map(Interval::width).product()
    }

    pub fn non_degenerate_dims(&self) -> usize {
        self.dims.iter().filter(|d| !d.is_degenerate()).count()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.dims.len() && self.dims.iter().zip(p).all(|(d, &x)| d.contains(x))
    }

    pub fn is_subset_of(&self, other: &IBox) -> bool {
        self.dims.len() == other.dims.len()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|(a, b)| a.is_subset_of(b))
    }

    /// Union hull; both boxes must share a dimension.
    pub fn hull(&self, other: &IBox) -> IBox {
        debug_assert_eq!(self.dim(), other.dim());
        IBox {
            dims: self
                .dims
                .iter()
                .zip(&other.dims)
                .map(|(a, b)| a.hull(b))
                .collect(),
        }
    }

    pub fn intersect(&self, other: &IBox) -> Option<IBox> {
        if self.dim() != other.dim() {
            return None;
        }
        let dims = self
            .dims
            .iter()
            .zip(&other.dims)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()?;
        Some(IBox { dims })
    }

    pub(crate) fn with_dim(&self, i: usize, v: Interval) -> IBox {
        let mut dims = self.dims.clone();
        dims[i] = v;
        IBox { dims }
    }

    pub(crate) fn from_dims_unchecked(dims: Vec<Interval>) -> IBox {
        IBox { dims }
    }
}

impl std::ops::Index<usize> for IBox {
    type Output = Interval;

    fn index(&self, i: usize) -> &Interval {
        &self.dims[i]
    }
}

impl fmt::Display for IBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                f.write_str("x")?;
            }
            write!(f, "[{},{}]", d.lo, d.hi)?;
        }
        Ok(())
    }
}

pub type IntervalMatrix = Array2<Interval>;

/// Pre- and post-activation boxes of every layer, as seen by IBP.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub pre_activation: Vec<IBox>,
    pub post_activation: Vec<IBox>,
}

pub fn affine_image(w: &Array2<f64>, b: &[f64], x: &IBox) -> Result<IBox> {
    if w.ncols() != x.dim() {
        return Err(Error::DimensionMismatch {
            context: "affine image",
            expected: w.ncols(),
            found: x.dim(),
        });
    }
    if w.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "affine bias",
            expected: w.nrows(),
            found: b.len(),
        });
    }
    let mut out = Vec::with_capacity(w.nrows());
    for (row, &bi) in w.rows().into_iter().zip(b) {
        let mut acc = Interval::point(bi);
        for (&wij, xj) in row.iter().zip(x.dims()) {
            if wij != 0.0 {
                acc = acc + xj.scale(wij);
            }
        }
        out.push(acc.checked()?);
    }
    Ok(IBox { dims: out })
}

/// Image of an interval under a (monotone increasing) activation.
pub fn act_interval(a: Activation, x: Interval) -> Interval {
    match a {
        Activation::Identity => x,
        Activation::LeakyRelu { slope } => {
            let f = |v: f64| {
                if v >= 0.0 {
                    Interval::point(v)
                } else {
                    Interval::point(v).scale(slope)
                }
            };
            Interval {
                lo: f(x.lo).lo,
                hi: f(x.hi).hi,
            }
        }
        _ => Interval {
            lo: widen_down(a.eval(x.lo)),
            hi: widen_up(a.eval(x.hi)),
        },
    }
}

/// Enclosure of `{σ′(t) : t ∈ x}`.
pub fn act_deriv_interval(a: Activation, x: Interval) -> Interval {
    match a {
        Activation::Identity => Interval::ONE,
        Activation::Tanh | Activation::Sigmoid => {
            let dl = a.derivative(x.lo);
            let dh = a.derivative(x.hi);
            let hi = if x.contains_zero() {
                a.derivative(0.0)
            } else {
                dl.max(dh)
            };
            Interval {
                lo: widen_down(dl.min(dh)),
                hi: widen_up(hi),
            }
        }
        Activation::LeakyRelu { slope } => {
            if x.lo >= 0.0 {
                Interval::ONE
            } else if x.hi < 0.0 {
                Interval::point(slope)
            } else {
                Interval {
                    lo: slope.min(1.0),
                    hi: slope.max(1.0),
                }
            }
        }
        Activation::Elu { alpha } => {
            if x.lo >= 0.0 {
                Interval::ONE
            } else {
                // α·eᵗ on the negative part, increasing in t
                let lo = widen_down(alpha * x.lo.exp());
                if x.hi < 0.0 {
                    Interval {
                        lo,
                        hi: widen_up(alpha * x.hi.exp()),
                    }
                } else {
                    Interval {
                        lo: lo.min(1.0),
                        hi: widen_up(alpha).max(1.0),
                    }
                }
            }
        }
    }
}

pub fn ibp_forward(net: &Network, x: &IBox) -> Result<(IBox, LayerBounds)> {
    check_input(net, x)?;
    let mut pre_activation = Vec::with_capacity(net.len());
    let mut post_activation = Vec::with_capacity(net.len());
    let mut cur = x.clone();
    for layer in net.layers() {
        let pre = affine_image(layer.weights(), layer.bias().as_slice().unwrap(), &cur)?;
        let act = layer.activation();
        let post = IBox {
            dims: pre.dims.iter().map(|&d| act_interval(act, d)).collect(),
        };
        pre_activation.push(pre);
        post_activation.push(post.clone());
        cur = post;
    }
    Ok((
        cur,
        LayerBounds {
            pre_activation,
            post_activation,
        },
    ))
}

/// Output box only; skips recording the per-layer bounds.
pub fn ibp_output(net: &Network, x: &IBox) -> Result<IBox> {
    check_input(net, x)?;
    let mut cur = x.clone();
    for layer in net.layers() {
        let pre = affine_image(layer.weights(), layer.bias().as_slice().unwrap(), &cur)?;
        let act = layer.activation();
        cur = IBox {
            dims: pre.dims.into_iter().map(|d| act_interval(act, d)).collect(),
        };
    }
    Ok(cur)
}

fn check_input(net: &Network, x: &IBox) -> Result<()> {
    if x.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input box",
            expected: net.input_dim(),
            found: x.dim(),
        });
    }
    Ok(())
}

/// Enclosure of every Jacobian `∂N(x₀)/∂x₀` with `x₀ ∈ x`, assembled as
/// `D_l W_l ⋯ D_1 W_1` from IBP pre-activation bounds.
pub fn interval_jacobian(net: &Network, x: &IBox) -> Result<IntervalMatrix> {
    let (_, bounds) = ibp_forward(net, x)?;
    let n = net.input_dim();
    let mut acc: IntervalMatrix = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Interval::ONE
        } else {
            Interval::ZERO
        }
    });
    for (layer, pre) in net.layers().iter().zip(&bounds.pre_activation) {
        let w = layer.weights();
        let mut next = Array2::from_elem((w.nrows(), n), Interval::ZERO);
        for i in 0..w.nrows() {
            let d = act_deriv_interval(layer.activation(), pre[i]);
            for j in 0..n {
                let mut s = Interval::ZERO;
                for k in 0..w.ncols() {
                    let wik = w[[i, k]];
                    if wik != 0.0 {
                        s = s + acc[[k, j]].scale(wik);
                    }
                }
                next[[i, j]] = (d * s).checked()?;
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Largest matrix for which determinants are enclosed.
pub const MAX_DET_DIM: usize = 8;

/// Enclosure of `det(M)` over all real `M ∈ j`.
///
/// Up to 4x4 this is a cofactor expansion. From 5x5 to 8x8 it is interval
/// Gaussian elimination with mignitude pivoting; if some pivot column only
/// offers zero-containing pivots, a Hadamard bound `[-B, B]` is returned.
pub fn interval_det(j: &IntervalMatrix) -> Result<Interval> {
    let (r, c) = j.dim();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    if r == 0 || r > MAX_DET_DIM {
        return Err(Error::UnsupportedSize(r));
    }
    let det = if r <= 4 {
        let idx: Vec<usize> = (0..r).collect();
        cofactor(j, 0, &idx)
    } else {
        elimination(j)
    };
    det.checked()
}

fn cofactor(m: &IntervalMatrix, row: usize, cols: &[usize]) -> Interval {
    if cols.len() == 1 {
        return m[[row, cols[0]]];
    }
    let mut acc = Interval::ZERO;
    for (pos, &c) in cols.iter().enumerate() {
        let rest: Vec<usize> = cols.iter().copied().filter(|&k| k != c).collect();
        let term = m[[row, c]] * cofactor(m, row + 1, &rest);
        acc = if pos % 2 == 0 { acc + term } else { acc - term };
    }
    acc
}

fn elimination(j: &IntervalMatrix) -> Interval {
    let n = j.nrows();
    let mut a = j.clone();
    let mut det = Interval::ONE;
    for k in 0..n {
        let (p, mig) = (k..n)
            .map(|i| (i, a[[i, k]].mignitude()))
            .fold(
                (k, -1.0),
                |best, cand| if cand.1 > best.1 { cand } else { best },
            );
        if mig <= 0.0 {
            return hadamard_bound(j);
        }
        if p != k {
            for col in 0..n {
                a.swap([k, col], [p, col]);
            }
            det = -det;
        }
        let pivot = a[[k, k]];
        det = det * pivot;
        for i in (k + 1)..n {
            let factor = a[[i, k]].checked_div(pivot).expect("pivot excludes zero");
            for col in (k + 1)..n {
                let t = factor * a[[k, col]];
                a[[i, col]] = a[[i, col]] - t;
            }
        }
    }
    det
}

/// `|det M| ≤ Π_i ‖row_i‖₂` over the entrywise magnitudes.
fn hadamard_bound(j: &IntervalMatrix) -> Interval {
    let mut bound = 1.0f64;
    for row in j.rows() {
        let sq = row
            .iter()
            .map(|e| mul_up(e.magnitude(), e.magnitude()))
            .fold(0.0, add_up);
        // sqrt is correctly rounded; one step up covers it
        bound = mul_up(bound, sq.sqrt().next_up());
    }
    Interval {
        lo: -bound,
        hi: bound,
    }
}
