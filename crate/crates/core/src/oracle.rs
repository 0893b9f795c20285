//! Ground truth by sampling and by the chain rule. Used by tests and by
//! `compare`/`mc`; never by certificates.
//!
//! Samples come from ChaCha8 streams: chunk `i` of `CHUNK` samples draws
//! from stream `i` of the seed, so results do not depend on thread count.

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SafeSet;
use crate::interval::{IBox, Interval};
use crate::model::Network;

pub const RNG_ALGORITHM: &str = "chacha8-stream";
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCloud {
    pub seed: u64,
    pub rng: String,
    pub count: usize,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub hull: IBox,
}

impl SampleCloud {
    /// CSV with columns `x1..xn,y1..ym`, one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.inputs.first().map_or(0, Vec::len);
        let m = self.outputs.first().map_or(0, Vec::len);
        let header: Vec<String> = (1..=n)
            .map(|i| format!("x{i}"))
            .chain((1..=m).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header)?;
        for (x, y) in self.inputs.iter().zip(&self.outputs) {
            w.write_record(x.iter().chain(y).map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn stream(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

#[inline]
fn sample_into(rng: &mut ChaCha8Rng, x: &IBox, out: &mut Vec<f64>) {
    out.clear();
    for d in x.dims() {
        let v = if d.is_degenerate() {
            d.lo
        } else {
            (d.lo + d.width() * rng.gen::<f64>()).clamp(d.lo, d.hi)
        };
        out.push(v);
    }
}

fn chunk_len(n: usize, c: usize) -> usize {
    CHUNK.min(n - c * CHUNK)
}

/// Evaluates `f(index, input, output)` over the sampled stream in parallel,
/// chunk by chunk; each chunk returns its results in sample order.
fn sampled<T: Send>(
    net: &Network,
    x: &IBox,
    n: usize,
    seed: u64,
    f: impl Fn(usize, &[f64], &[f64]) -> Option<T> + Sync,
) -> Vec<Vec<T>> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c);
            let mut input = Vec::with_capacity(x.dim());
            let mut cur = Vec::new();
            let mut scratch = Vec::new();
            let mut found = Vec::new();
            for j in 0..chunk_len(n, c) {
                sample_into(&mut rng, x, &mut input);
                cur.clear();
                cur.extend_from_slice(&input);
                net.forward_with(&mut cur, &mut scratch);
                if let Some(t) = f(c * CHUNK + j, &input, &cur) {
                    found.push(t);
                }
            }
            found
        })
        .collect()
}

fn check_dim(net: &Network, x: &IBox) -> Result<()> {
    if x.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input box",
            expected: net.input_dim(),
            found: x.dim(),
        });
    }
    Ok(())
}

pub fn mc_reach(net: &Network, x: &IBox, n: usize, seed: u64) -> Result<SampleCloud> {
    check_dim(net, x)?;
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> =
        sampled(net, x, n, seed, |_, i, o| Some((i.to_vec(), o.to_vec())))
            .into_iter()
            .flatten()
            .collect();
    let (inputs, outputs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let m = net.output_dim();
    let mut dims = vec![
        Interval {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY
        };
        m
    ];
    for y in &outputs {
        for (d, &v) in dims.iter_mut().zip(y) {
            d.lo = d.lo.min(v);
            d.hi = d.hi.max(v);
        }
    }
    Ok(SampleCloud {
        seed,
        rng: RNG_ALGORITHM.to_string(),
        count: n,
        inputs,
        outputs,
        hull: IBox::new(dims)?,
    })
}

/// Counts sampled outputs that fall outside `hull` (exact comparison),
/// without materialising the cloud.
pub fn count_escapes(net: &Network, x: &IBox, hull: &IBox, n: usize, seed: u64) -> Result<usize> {
    check_dim(net, x)?;
    Ok(sampled(net, x, n, seed, |_, _, o| {
        (!hull.contains_point(o)).then_some(())
    })
    .iter()
    .map(Vec::len)
    .sum())
}

/// First sampled input (in stream order) whose output leaves `s`.
pub fn falsify(
    net: &Network,
    x: &IBox,
    s: &SafeSet,
    n: usize,
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    check_dim(net, x)?;
    if s.dim() != net.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "safe set",
            expected: net.output_dim(),
            found: s.dim(),
        });
    }
    let hits = sampled(net, x, n, seed, |idx, i, o| {
        (!s.contains_point(o)).then(|| (idx, i.to_vec()))
    });
    Ok(hits
        .into_iter()
        .flatten()
        .min_by_key(|(idx, _)| *idx)
        .map(|(_, p)| p))
}

/// Chain-rule Jacobian `D_l W_l ⋯ D_1 W_1` at a point.
pub fn point_jacobian(net: &Network, x: &[f64]) -> Result<Array2<f64>> {
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "point jacobian",
            expected: net.input_dim(),
            found: x.len(),
        });
    }
    let n = x.len();
    let mut jac = Array2::<f64>::eye(n);
    let mut cur = x.to_vec();
    let mut pre = Vec::new();
    for layer in net.layers() {
        layer.affine_into(&cur, &mut pre);
        let act = layer.activation();
        let mut next = layer.weights().dot(&jac);
        for (i, mut row) in next.rows_mut().into_iter().enumerate() {
            row *= act.derivative(pre[i]);
        }
        jac = next;
        cur = pre.iter().map(|&v| act.eval(v)).collect();
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Layer};
    use ndarray::{array, Array1};

    fn unit_square() -> IBox {
        IBox::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn identity_cloud_spans_the_box() {
        let c = mc_reach(&Network::identity(2), &unit_square(), 10_000, 1).unwrap();
        assert!(c.hull.is_subset_of(&unit_square()));
        assert!(c.hull.widths().iter().all(|&w| w >= 0.95));
        assert_eq!(c.outputs.len(), 10_000);
    }

    #[test]
    fn point_box_gives_identical_outputs() {
        let net = Network::new(vec![Layer::new(
            array![[0.3, -2.0], [1.0, 1.0]],
            array![0.1, 0.2],
            Activation::Tanh,
        )
        .unwrap()])
        .unwrap();
        let c = mc_reach(&net, &IBox::point(&[0.4, -0.2]).unwrap(), 50, 9).unwrap();
        assert!(c.outputs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn same_seed_same_cloud() {
        let net = Network::identity(3);
        let b = IBox::around(&[0.0, 1.0, 2.0], 0.5).unwrap();
        assert_eq!(
            mc_reach(&net, &b, 9000, 4).unwrap(),
            mc_reach(&net, &b, 9000, 4).unwrap()
        );
        assert_ne!(
            mc_reach(&net, &b, 100, 4).unwrap().inputs,
            mc_reach(&net, &b, 100, 5).unwrap().inputs
        );
    }

    #[test]
    fn falsification() {
        let net = Network::identity(2);
        let s = SafeSet::from_box(&unit_square());
        assert_eq!(falsify(&net, &unit_square(), &s, 10_000, 1).unwrap(), None);
        let tight = SafeSet::from_box(&IBox::from_bounds(&[(0.2, 0.8), (0.2, 0.8)]).unwrap());
        let cex = falsify(&net, &unit_square(), &tight, 10_000, 1)
            .unwrap()
            .unwrap();
        assert!(!tight.contains_point(&cex));
    }

    #[test]
    fn jacobian_examples() {
        let j = point_jacobian(&Network::identity(2), &[0.3, 0.4]).unwrap();
        assert_eq!(j, Array2::<f64>::eye(2));
        let net = Network::new(vec![Layer::new(
            array![[1.0]],
            Array1::zeros(1),
            Activation::Sigmoid,
        )
        .unwrap()])
        .unwrap();
        assert_eq!(point_jacobian(&net, &[0.0]).unwrap(), array![[0.25]]);
    }

    #[test]
    fn csv_export() {
        let c = mc_reach(&Network::identity(2), &unit_square(), 3, 2).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,x2,y1,y2\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
