#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topoverify::{check_homeomorphism, Activation, IBox, Layer, Network};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
        .join(name)
}

pub fn net2432() -> Network {
    Network::load(data("net2432.json")).unwrap()
}

pub fn net2432_input() -> IBox {
    IBox::from_bounds(&[(-0.5, 0.5), (-0.5, 0.5)]).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}

pub fn assert_box_close(got: &IBox, want: &[(f64, f64)], tol: f64) {
    assert_eq!(got.dim(), want.len());
    for (i, (d, &(lo, hi))) in got.dims().iter().zip(want).enumerate() {
        assert_close(d.lo, lo, tol, &format!("dim {} lo", i + 1));
        assert_close(d.hi, hi, tol, &format!("dim {} hi", i + 1));
    }
}

/// Plain-loop evaluation used as an oracle against `Network::forward`.
pub fn naive_forward(net: &Network, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for l in net.layers() {
        let w = l.weights();
        let mut next = vec![0.0; w.nrows()];
        for i in 0..w.nrows() {
            let mut z = l.bias()[i];
            for j in 0..w.ncols() {
                z += w[[i, j]] * cur[j];
            }
            next[i] = match l.activation() {
                Activation::Identity => z,
                Activation::Tanh => z.tanh(),
                Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                Activation::LeakyRelu { slope } => {
                    if z >= 0.0 {
                        z
                    } else {
                        slope * z
                    }
                }
                Activation::Elu { alpha } => {
                    if z >= 0.0 {
                        z
                    } else {
                        alpha * z.exp_m1()
                    }
                }
            };
        }
        cur = next;
    }
    cur
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[[i, c]].abs().total_cmp(&a[[j, c]].abs()))
            .unwrap();
        if a[[p, c]] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                a.swap([p, j], [c, j]);
            }
            d = -d;
        }
        d *= a[[c, c]];
        for r in c + 1..n {
            let f = a[[r, c]] / a[[c, c]];
            for j in c..n {
                a[[r, j]] -= f * a[[c, j]];
            }
        }
    }
    d
}

pub fn sample_point(rng: &mut ChaCha8Rng, x: &IBox) -> Vec<f64> {
    x.dims()
        .iter()
        .map(|d| {
            if d.is_degenerate() {
                d.lo
            } else {
                rng.gen_range(d.lo..=d.hi)
            }
        })
        .collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..=1.0) * scale)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.gen_range(-1.0..=1.0) * scale)
}

/// Square tanh/sigmoid network over a small box, redrawn until the
/// homeomorphism certificate holds.
pub fn certified_square_instance(rng: &mut ChaCha8Rng) -> (Network, IBox) {
    loop {
        let n = rng.gen_range(2..=4);
        let depth = rng.gen_range(1..=2);
        let layers = (0..depth)
            .map(|_| {
                let act = if rng.gen_bool(0.5) {
                    Activation::Tanh
                } else {
                    Activation::Sigmoid
                };
                let w = random_matrix(rng, n, n, 1.0) + Array2::<f64>::eye(n) * 1.5;
                Layer::new(w, random_vector(rng, n, 0.5), act).unwrap()
            })
            .collect();
        let net = Network::new(layers).unwrap();
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let x = IBox::around(&center, rng.gen_range(0.01..=0.1)).unwrap();
        if check_homeomorphism(&net, &x).unwrap().is_verified() {
            return (net, x);
        }
    }
}

/// tanh with a singular weight: no cell ever gets a certificate.
pub fn nowhere_certified() -> Network {
    Network::new(vec![Layer::new(
        array![[1.0, 1.0], [1.0, 1.0]],
        array![0.0, 0.0],
        Activation::Tanh,
    )
    .unwrap()])
    .unwrap()
}

pub fn inflate(b: &IBox, frac: f64) -> IBox {
    IBox::from_bounds(
        &b.dims()
            .iter()
            .map(|d| {
                let pad = d.width().max(1e-12) * frac;
                (d.lo - pad, d.hi + pad)
            })
            .collect::<Vec<_>>(),
    )
    .unwrap()
}
