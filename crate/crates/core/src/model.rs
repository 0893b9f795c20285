//! Feedforward networks: layers, activations, point evaluation and the
//! on-disk network document.
//!
//! A network computes `σ_l(W_l ⋯ σ_1(W_1 x + b_1) ⋯ + b_l)`. Every supported
//! activation is continuous and strictly increasing, which is what the
//! open-map certificate relies on.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NETWORK_FORMAT: &str = "topoverify-network/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    LeakyRelu { slope: f64 },
    Elu { alpha: f64 },
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn leaky_relu(slope: f64) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0 && slope != 1.0) {
            return Err(Error::InvalidActivation(format!(
                "leaky_relu slope must be positive and not 1, got {slope}"
            )));
        }
        Ok(Activation::LeakyRelu { slope })
    }

    pub fn elu(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidActivation(format!(
                "elu alpha must be positive, got {alpha}"
            )));
        }
        Ok(Activation::Elu { alpha })
    }

    /// Lowercase name used in network documents and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::LeakyRelu { .. } => "leaky_relu",
            Activation::Elu { .. } => "elu",
        }
    }

    /// Parse a lowercase name; `purelin`/`linear` and `logsig` are accepted
    /// as aliases. Parametrised kinds take their parameter separately.
    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "identity" | "purelin" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" | "logsig" => Ok(Activation::Sigmoid),
            "leaky_relu" | "leakyrelu" => Activation::leaky_relu(param.unwrap_or(0.01)),
            "elu" => Activation::elu(param.unwrap_or(1.0)),
            other => Err(Error::UnknownActivation(other.to_string())),
        }
    }

    pub fn is_strictly_monotone(&self) -> bool {
        // every kind the registry admits is strictly increasing
        true
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Elu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
        }
    }

    /// σ′(x). At the kink of LeakyReLU/ELU the right derivative is used.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            // 1/cosh² keeps full relative accuracy in the tails where
            // 1 - tanh² cancels.
            Activation::Tanh => {
                let c = x.abs().cosh();
                1.0 / (c * c)
            }
            Activation::Sigmoid => sigmoid(x) * sigmoid(-x),
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Elu { alpha } => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha * x.exp()
                }
            }
        }
    }
}

pub fn activation_derivative(a: Activation, x: f64) -> f64 {
    a.derivative(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.nrows() {
            return Err(Error::LayerShape {
                layer: 0,
                detail: format!(
                    "bias length {} does not match {} weight rows",
                    bias.len(),
                    weights.nrows()
                ),
            });
        }
        if weights.ncols() == 0 || weights.nrows() == 0 {
            return Err(Error::LayerShape {
                layer: 0,
                detail: "weight matrix is empty".into(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::LayerShape {
                layer: 0,
                detail: "non-finite parameter".into(),
            });
        }
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Pre-activation `W x + b` written into `out`.
    #[inline]
    pub(crate) fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.rows().into_iter().zip(self.bias.iter()) {
            let mut acc = *b;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::LayerShape {
                layer: 0,
                detail: "network has no layers".into(),
            });
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::LayerShape {
                    layer: i + 1,
                    detail: format!(
                        "weights take {} inputs but the previous layer has width {}",
                        pair[1].input_dim(),
                        pair[0].output_dim()
                    ),
                });
            }
        }
        Ok(Network { layers })
    }

    /// `dim`-dimensional identity map as a single layer.
    pub fn identity(dim: usize) -> Self {
        let layer = Layer::new(Array2::eye(dim), Array1::zeros(dim), Activation::Identity)
            .expect("identity layer is well-formed");
        Network {
            layers: vec![layer],
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Input width followed by every layer's output width.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "forward",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        self.forward_with(&mut cur, &mut next);
        Ok(cur)
    }

    /// Evaluates in place on `cur`, using `scratch` as the second buffer.
    /// The caller guarantees `cur.len() == input_dim()`.
    #[inline]
    pub(crate) fn forward_with(&self, cur: &mut Vec<f64>, scratch: &mut Vec<f64>) {
        for layer in &self.layers {
            layer.affine_into(cur, scratch);
            let act = layer.activation;
            for v in scratch.iter_mut() {
                *v = act.eval(*v);
            }
            std::mem::swap(cur, scratch);
        }
    }

    /// Sub-network made of layers `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Network> {
        if from > to || to >= self.layers.len() {
            return Err(Error::SliceOutOfRange {
                from,
                to,
                len: self.layers.len(),
            });
        }
        Ok(Network {
            layers: self.layers[from..=to].to_vec(),
        })
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            format: NETWORK_FORMAT.to_string(),
            layers: self
                .layers
                .iter()
                .map(|l| {
                    let (slope, alpha) = match l.activation {
                        Activation::LeakyRelu { slope } => (Some(slope), None),
                        Activation::Elu { alpha } => (None, Some(alpha)),
                        _ => (None, None),
                    };
                    LayerRecord {
                        weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                        bias: l.bias.to_vec(),
                        activation: l.activation.name().to_string(),
                        slope,
                        alpha,
                    }
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        let text = std::fs::read_to_string(path)?;
        Network::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Network> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        load_network(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network document serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Serialized network: row-major weights, activation by name.
///
/// Floats are written in shortest round-trip decimal form, so a
/// save/load cycle reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub format: String,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

pub fn load_network(doc: &NetworkDocument) -> Result<Network> {
    if doc.format != NETWORK_FORMAT {
        return Err(Error::Parse(format!(
            "unsupported network format `{}` (expected `{NETWORK_FORMAT}`)",
            doc.format
        )));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    let mut prev_width: Option<usize> = None;
    for (i, rec) in doc.layers.iter().enumerate() {
        let shape_err = |detail: String| Error::LayerShape { layer: i, detail };
        let rows = rec.weights.len();
        let cols = rec.weights.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(shape_err("weight matrix is empty".into()));
        }
        if let Some(r) = rec.weights.iter().position(|r| r.len() != cols) {
            return Err(shape_err(format!(
                "weight row {r} has {} entries, expected {cols}",
                rec.weights[r].len()
            )));
        }
        if let Some(w) = prev_width {
            if cols != w {
                return Err(shape_err(format!(
                    "weights are {rows}x{cols} but the previous layer has width {w}"
                )));
            }
        }
        if rec.bias.len() != rows {
            return Err(shape_err(format!(
                "bias length {} does not match {rows} weight rows",
                rec.bias.len()
            )));
        }
        let param = rec.slope.or(rec.alpha);
        let activation = Activation::from_name(&rec.activation, param)?;
        let flat: Vec<f64> = rec.weights.iter().flatten().copied().collect();
        let weights =
            Array2::from_shape_vec((rows, cols), flat).map_err(|e| shape_err(e.to_string()))?;
        let layer = Layer::new(weights, Array1::from(rec.bias.clone()), activation).map_err(
            |e| match e {
                Error::LayerShape { detail, .. } => shape_err(detail),
                other => other,
            },
        )?;
        prev_width = Some(rows);
        layers.push(layer);
    }
    Network::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single(w: Array2<f64>, b: Array1<f64>, a: Activation) -> Network {
        Network::new(vec![Layer::new(w, b, a).unwrap()]).unwrap()
    }

    #[test]
    fn identity_forward() {
        let net = Network::identity(2);
        assert_eq!(net.forward(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn tanh_at_zero() {
        let net = single(array![[1.0]], array![0.0], Activation::Tanh);
        assert_eq!(net.forward(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = Network::identity(2);
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn derivatives() {
        assert_eq!(Activation::Tanh.derivative(0.0), 1.0);
        assert_eq!(Activation::Sigmoid.derivative(0.0), 0.25);
        let t = 1.0f64.tanh();
        let d = Activation::Tanh.derivative(1.0);
        assert!((d - (1.0 - t * t)).abs() < 1e-15);
        assert!((d - 0.41997434161402614).abs() < 1e-12);
        // right derivative at the kink
        assert_eq!(Activation::LeakyRelu { slope: 0.1 }.derivative(0.0), 1.0);
        assert_eq!(Activation::Elu { alpha: 0.5 }.derivative(0.0), 1.0);
        assert_eq!(
            Activation::Elu { alpha: 0.5 }.derivative(-1.0),
            0.5 * (-1.0f64).exp()
        );
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let acts = [
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::LeakyRelu { slope: 0.2 },
            Activation::Elu { alpha: 1.5 },
        ];
        let h = 1e-6;
        for a in acts {
            for &x in &[-2.3, -0.4, 0.7, 3.1] {
                let fd = (a.eval(x + h) - a.eval(x - h)) / (2.0 * h);
                assert!((fd - a.derivative(x)).abs() < 1e-8, "{a:?} at {x}");
            }
        }
    }

    #[test]
    fn activation_parameters_are_validated() {
        assert!(Activation::leaky_relu(1.0).is_err());
        assert!(Activation::leaky_relu(-0.1).is_err());
        assert!(Activation::elu(0.0).is_err());
        assert!(matches!(
            Activation::from_name("relu", None),
            Err(Error::UnknownActivation(_))
        ));
        assert_eq!(
            Activation::from_name("purelin", None).unwrap(),
            Activation::Identity
        );
    }

    #[test]
    fn slicing() {
        let l0 = Layer::new(Array2::ones((4, 2)), Array1::zeros(4), Activation::Tanh).unwrap();
        let l1 = Layer::new(Array2::ones((3, 4)), Array1::zeros(3), Activation::Tanh).unwrap();
        let l2 = Layer::new(Array2::ones((2, 3)), Array1::zeros(2), Activation::Identity).unwrap();
        let net = Network::new(vec![l0, l1, l2]).unwrap();
        assert_eq!(net.slice(1, 2).unwrap().widths(), vec![4, 3, 2]);
        assert_eq!(net.slice(0, 0).unwrap().widths(), vec![2, 4]);
        assert_eq!(net.slice(0, 2).unwrap(), net);
        assert!(net.slice(2, 1).is_err());
        assert!(net.slice(0, 3).is_err());
    }

    #[test]
    fn mismatched_chain_is_rejected() {
        let doc = NetworkDocument {
            format: NETWORK_FORMAT.into(),
            layers: vec![
                LayerRecord {
                    weights: vec![vec![1.0, 0.0]; 4],
                    bias: vec![0.0; 4],
                    activation: "sigmoid".into(),
                    slope: None,
                    alpha: None,
                },
                LayerRecord {
                    weights: vec![vec![1.0; 5]; 3],
                    bias: vec![0.0; 3],
                    activation: "sigmoid".into(),
                    slope: None,
                    alpha: None,
                },
            ],
        };
        match load_network(&doc) {
            Err(Error::LayerShape { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_activation_in_document() {
        let text = r#"{"format":"topoverify-network/1","layers":[
            {"weights":[[1.0]],"bias":[0.0],"activation":"relu"}]}"#;
        assert!(matches!(
            Network::from_json(text),
            Err(Error::UnknownActivation(_))
        ));
    }

    #[test]
    fn identity_document() {
        let text = r#"{"format":"topoverify-network/1","layers":[
            {"weights":[[1]],"bias":[0],"activation":"identity"}]}"#;
        let net = Network::from_json(text).unwrap();
        assert_eq!(net, Network::identity(1));
    }
}
