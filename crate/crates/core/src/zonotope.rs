//! Zonotope domain `{c + Gε : ε ∈ [-1,1]^g}` with affine and
//! sigmoid/tanh transformers.
//!
//! Floating-point rounding is tracked: every entry is computed as an
//! enclosing interval, its midpoint is stored, and the leftover radius is
//! carried by one fresh generator per affected dimension. When all
//! arithmetic is exact no extra generator appears.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{act_deriv_interval, act_interval, IBox, Interval};
use crate::model::{Activation, Network};
use crate::round::{add_down, add_up, mul_down, mul_up, sub_down, sub_up};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    center: Array1<f64>,
    generators: Array2<f64>,
}

/// Midpoint of an enclosing interval plus a radius covering the whole
/// interval around it.
fn split(e: Interval) -> (f64, f64) {
    let m = e.midpoint();
    let r = sub_up(e.hi, m).max(sub_up(m, e.lo));
    (m, r.max(0.0))
}

impl Zonotope {
    pub fn new(center: Array1<f64>, generators: Array2<f64>) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::EmptyBox);
        }
        if generators.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                context: "zonotope generators",
                expected: center.len(),
                found: generators.nrows(),
            });
        }
        Ok(Zonotope { center, generators })
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    pub fn generators(&self) -> &Array2<f64> {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn order(&self) -> usize {
        self.generators.ncols()
    }

    /// `c + Gε` for a given noise vector.
    pub fn point(&self, eps: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                self.center[i]
                    + self
                        .generators
                        .row(i)
                        .iter()
                        .zip(eps)
                        .map(|(g, e)| g * e)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Append one diagonal generator per nonzero entry of `radius`.
    fn push_error_terms(&mut self, radius: &[f64]) {
        let rows: Vec<usize> = (0..radius.len()).filter(|&i| radius[i] > 0.0).collect();
        if rows.is_empty() {
            return;
        }
        let g = self.order();
        let mut grown = Array2::zeros((self.dim(), g + rows.len()));
        grown
            .slice_mut(ndarray::s![.., ..g])
            .assign(&self.generators);
        for (k, &i) in rows.iter().enumerate() {
            grown[[i, g + k]] = radius[i];
        }
        self.generators = grown;
    }
}

pub fn from_box(x: &IBox) -> Zonotope {
    let n = x.dim();
    let mut center = Array1::zeros(n);
    let mut radius = Vec::with_capacity(n);
    for (i, d) in x.dims().iter().enumerate() {
        let (m, r) = split(*d);
        center[i] = m;
        radius.push(r);
    }
    let axes: Vec<usize> = (0..n).filter(|&i| radius[i] > 0.0).collect();
    let mut generators = Array2::zeros((n, axes.len()));
    for (k, &i) in axes.iter().enumerate() {
        generators[[i, k]] = radius[i];
    }
    Zonotope { center, generators }
}

/// Dimension `i` spans `c_i ± Σ_j |G_ij|`, rounded outward.
pub fn interval_hull(z: &Zonotope) -> IBox {
    let dims = (0..z.dim())
        .map(|i| {
            let r = z
                .generators
                .row(i)
                .iter()
                .fold(0.0, |acc, g| add_up(acc, g.abs()));
            Interval {
                lo: sub_down(z.center[i], r),
                hi: add_up(z.center[i], r),
            }
        })
        .collect();
    IBox::from_dims_unchecked(dims)
}

fn dot_enclosure(
    row: ndarray::ArrayView1<'_, f64>,
    v: ndarray::ArrayView1<'_, f64>,
    bias: f64,
) -> Interval {
    let mut lo = bias;
    let mut hi = bias;
    for (&w, &x) in row.iter().zip(v.iter()) {
        lo = add_down(lo, mul_down(w, x));
        hi = add_up(hi, mul_up(w, x));
    }
    Interval { lo, hi }
}

pub fn zono_affine(z: &Zonotope, w: &Array2<f64>, b: &[f64]) -> Result<Zonotope> {
    if w.ncols() != z.dim() {
        return Err(Error::DimensionMismatch {
            context: "zonotope affine",
            expected: w.ncols(),
            found: z.dim(),
        });
    }
    if w.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "zonotope affine bias",
            expected: w.nrows(),
            found: b.len(),
        });
    }
    let d = w.nrows();
    let g = z.order();
    let mut center = Array1::zeros(d);
    let mut generators = Array2::zeros((d, g));
    let mut err = vec![0.0; d];
    for i in 0..d {
        let row = w.row(i);
        let (m, r) = split(dot_enclosure(row, z.center.view(), b[i]));
        center[i] = m;
        let mut e = r;
        for k in 0..g {
            let (m, r) = split(dot_enclosure(row, z.generators.column(k), 0.0));
            generators[[i, k]] = m;
            e = add_up(e, r);
        }
        err[i] = e;
    }
    if center
        .iter()
        .chain(generators.iter())
        .chain(err.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite);
    }
    let mut out = Zonotope { center, generators };
    out.push_error_terms(&err);
    Ok(out)
}

/// Min-slope parallelogram relaxation of sigmoid/tanh, per dimension:
/// `σ(x) ∈ λx + [μ-δ, μ+δ]` on the concretization interval `[l, u]`.
pub fn zono_sigmoid_tanh(z: &Zonotope, a: Activation) -> Result<Zonotope> {
    match a {
        Activation::Identity => return Ok(z.clone()),
        Activation::Sigmoid | Activation::Tanh => {}
        other => {
            return Err(Error::UnsupportedActivation {
                engine: "zonotope",
                activation: other.name().to_string(),
            })
        }
    }
    let hull = interval_hull(z);
    let d = z.dim();
    let mut out = z.clone();
    let mut fresh = vec![0.0; d];
    for i in 0..d {
        let x = hull[i];
        if x.is_degenerate() {
            // the dimension is a single point (no generator mass)
            let (m, r) = split(act_interval(a, x));
            out.center[i] = m;
            out.generators.row_mut(i).fill(0.0);
            fresh[i] = r;
            continue;
        }
        // lower bound of σ′ on [l,u]; σ(t) - λt is then nondecreasing there
        let lambda = act_deriv_interval(a, x).lo.max(0.0);
        let s_lo = act_interval(a, Interval::point(x.lo)).lo;
        let s_hi = act_interval(a, Interval::point(x.hi)).hi;
        let g_lo = sub_down(s_lo, mul_up(lambda, x.lo));
        let g_hi = sub_up(s_hi, mul_down(lambda, x.hi));
        let (mu, mut delta) = split(Interval { lo: g_lo, hi: g_hi });

        let (c, r) = split(Interval::point(z.center[i]).scale(lambda) + Interval::point(mu));
        out.center[i] = c;
        delta = add_up(delta, r);
        for k in 0..z.order() {
            let (m, r) = split(Interval::point(z.generators[[i, k]]).scale(lambda));
            out.generators[[i, k]] = m;
            delta = add_up(delta, r);
        }
        fresh[i] = delta;
    }
    out.push_error_terms(&fresh);
    Ok(out)
}

pub fn zono_forward(net: &Network, x: &IBox) -> Result<(IBox, Zonotope)> {
    if x.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input box",
            expected: net.input_dim(),
            found: x.dim(),
        });
    }
    for layer in net.layers() {
        let a = layer.activation();
        if !matches!(
            a,
            Activation::Identity | Activation::Sigmoid | Activation::Tanh
        ) {
            return Err(Error::UnsupportedActivation {
                engine: "zonotope",
                activation: a.name().to_string(),
            });
        }
    }
    let mut z = from_box(x);
    for layer in net.layers() {
        z = zono_affine(&z, layer.weights(), layer.bias().as_slice().unwrap())?;
        z = zono_sigmoid_tanh(&z, layer.activation())?;
    }
    Ok((interval_hull(&z), z))
}
