//! Trainable tensors of the parser.

use ndarray::{Array1, Array2, Array3, ArrayViewD, ArrayViewMutD};
use rand::Rng;

use super::hyper::Hyperparams;
use super::vocab::PAD;

/// Scalar type the network is instantiated with (`f32` for training and
/// inference, `f64` for gradient checks).
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

impl Float for f32 {}
impl Float for f64 {}

/// Weights of one LSTM direction. Gate order is input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<F> {
    /// 4H x input
    pub w_ih: Array2<F>,
    /// 4H x H
    pub w_hh: Array2<F>,
    /// 4H
    pub bias: Array1<F>,
}

/// Affine projection followed by a leaky ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<F> {
    /// out x in
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    /// vocabulary x embedding_dim
    pub embed: Array2<F>,
    /// `[forward, backward]` per layer.
    pub lstm: Vec<[LstmWeights<F>; 2]>,
    pub edge_head: Projection<F>,
    pub edge_dep: Projection<F>,
    pub label_head: Projection<F>,
    pub label_dep: Projection<F>,
    /// (d_edge + 1) x (d_edge + 1)
    pub u_edge: Array2<F>,
    /// labels x (d_label + 1) x (d_label + 1)
    pub u_label: Array3<F>,
}

/// Tensor names and shapes implied by the hyperparameters.
pub fn expected_shapes(hp: &Hyperparams, num_words: usize, num_labels: usize) -> Vec<(String, Vec<usize>)> {
    let h = hp.recurrent_hidden_dim;
    let mut out = vec![("embed".to_string(), vec![num_words, hp.embedding_dim])];
    for layer in 0..hp.recurrent_layers {
        let input = if layer == 0 { hp.embedding_dim } else { 2 * h };
        for dir in ["fwd", "bwd"] {
            out.push((format!("lstm.{}.{}.w_ih", layer, dir), vec![4 * h, input]));
            out.push((format!("lstm.{}.{}.w_hh", layer, dir), vec![4 * h, h]));
            out.push((format!("lstm.{}.{}.bias", layer, dir), vec![4 * h]));
        }
    }
    for (name, d) in [
        ("edge_head", hp.projection_dim_edge),
        ("edge_dep", hp.projection_dim_edge),
        ("label_head", hp.projection_dim_label),
        ("label_dep", hp.projection_dim_label),
    ] {
        out.push((format!("{}.weight", name), vec![d, 2 * h]));
        out.push((format!("{}.bias", name), vec![d]));
    }
    let (de, dl) = (hp.projection_dim_edge + 1, hp.projection_dim_label + 1);
    out.push(("u_edge".to_string(), vec![de, de]));
    out.push(("u_label".to_string(), vec![num_labels, dl, dl]));
    out
}

fn uniform<F: Float, R: Rng>(rng: &mut R, shape: (usize, usize), bound: f64) -> Array2<F> {
    Array2::from_shape_simple_fn(shape, || F::lit(rng.random_range(-bound..=bound)))
}

impl<F: Float> Params<F> {
    /// Initialize from a seeded generator.
    ///
    /// Embeddings are uniform with unit-scale variance per row (the padding
    /// row is zero), LSTM weights uniform in ±1/sqrt(H) with the forget
    /// bias at 1, projections Glorot-uniform with zero bias, and both
    /// biaffine tensors zero.
    pub fn init<R: Rng>(hp: &Hyperparams, num_words: usize, num_labels: usize, rng: &mut R) -> Self {
        let h = hp.recurrent_hidden_dim;
        let mut embed = uniform(
            rng,
            (num_words, hp.embedding_dim),
            (3.0 / hp.embedding_dim as f64).sqrt(),
        );
        embed.row_mut(PAD).fill(F::zero());

        let k = 1.0 / (h as f64).sqrt();
        let lstm = (0..hp.recurrent_layers)
            .map(|layer| {
                let input = if layer == 0 { hp.embedding_dim } else { 2 * h };
                let mut dir = || {
                    let mut bias = Array1::zeros(4 * h);
                    bias.slice_mut(ndarray::s![h..2 * h]).fill(F::one());
                    LstmWeights {
                        w_ih: uniform(rng, (4 * h, input), k),
                        w_hh: uniform(rng, (4 * h, h), k),
                        bias,
                    }
                };
                [dir(), dir()]
            })
            .collect();

        let mut proj = |out: usize| Projection {
            weight: uniform(rng, (out, 2 * h), (6.0 / (out + 2 * h) as f64).sqrt()),
            bias: Array1::zeros(out),
        };
        let edge_head = proj(hp.projection_dim_edge);
        let edge_dep = proj(hp.projection_dim_edge);
        let label_head = proj(hp.projection_dim_label);
        let label_dep = proj(hp.projection_dim_label);

        let (de, dl) = (hp.projection_dim_edge + 1, hp.projection_dim_label + 1);
        Params {
            embed,
            lstm,
            edge_head,
            edge_dep,
            label_head,
            label_dep,
            u_edge: Array2::zeros((de, de)),
            u_label: Array3::zeros((num_labels, dl, dl)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut t) in z.named_mut() {
            t.fill(F::zero());
        }
        z
    }

    /// Every tensor with its checkpoint name, in a fixed order.
    pub fn named(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        let mut out = vec![("embed".to_string(), self.embed.view().into_dyn())];
        for (layer, dirs) in self.lstm.iter().enumerate() {
            for (dir, w) in ["fwd", "bwd"].iter().zip(dirs) {
                out.push((format!("lstm.{}.{}.w_ih", layer, dir), w.w_ih.view().into_dyn()));
                out.push((format!("lstm.{}.{}.w_hh", layer, dir), w.w_hh.view().into_dyn()));
                out.push((format!("lstm.{}.{}.bias", layer, dir), w.bias.view().into_dyn()));
            }
        }
        for (name, p) in [
            ("edge_head", &self.edge_head),
            ("edge_dep", &self.edge_dep),
            ("label_head", &self.label_head),
            ("label_dep", &self.label_dep),
        ] {
            out.push((format!("{}.weight", name), p.weight.view().into_dyn()));
            out.push((format!("{}.bias", name), p.bias.view().into_dyn()));
        }
        out.push(("u_edge".to_string(), self.u_edge.view().into_dyn()));
        out.push(("u_label".to_string(), self.u_label.view().into_dyn()));
        out
    }

    /// Mutable counterpart of [`Params::named`], same order.
    pub fn named_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let Params {
            embed,
            lstm,
            edge_head,
            edge_dep,
            label_head,
            label_dep,
            u_edge,
            u_label,
        } = self;
        let mut out = vec![("embed".to_string(), embed.view_mut().into_dyn())];
        for (layer, dirs) in lstm.iter_mut().enumerate() {
            for (dir, w) in ["fwd", "bwd"].iter().zip(dirs.iter_mut()) {
                out.push((format!("lstm.{}.{}.w_ih", layer, dir), w.w_ih.view_mut().into_dyn()));
                out.push((format!("lstm.{}.{}.w_hh", layer, dir), w.w_hh.view_mut().into_dyn()));
                out.push((format!("lstm.{}.{}.bias", layer, dir), w.bias.view_mut().into_dyn()));
            }
        }
        for (name, p) in [
            ("edge_head", edge_head),
            ("edge_dep", edge_dep),
            ("label_head", label_head),
            ("label_dep", label_dep),
        ] {
            out.push((format!("{}.weight", name), p.weight.view_mut().into_dyn()));
            out.push((format!("{}.bias", name), p.bias.view_mut().into_dyn()));
        }
        out.push(("u_edge".to_string(), u_edge.view_mut().into_dyn()));
        out.push(("u_label".to_string(), u_label.view_mut().into_dyn()));
        out
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Params<F>, scale: F) {
        for ((_, mut a), (_, b)) in self.named_mut().into_iter().zip(other.named()) {
            a.scaled_add(scale, &b);
        }
    }

    /// Convert to another precision.
    pub fn cast<G: Float>(&self) -> Params<G> {
        let c1 = |a: &Array1<F>| a.mapv(|x| G::from(x).unwrap());
        let c2 = |a: &Array2<F>| a.mapv(|x| G::from(x).unwrap());
        let proj = |p: &Projection<F>| Projection {
            weight: c2(&p.weight),
            bias: c1(&p.bias),
        };
        Params {
            embed: c2(&self.embed),
            lstm: self
                .lstm
                .iter()
                .map(|dirs| {
                    let d = |w: &LstmWeights<F>| LstmWeights {
                        w_ih: c2(&w.w_ih),
                        w_hh: c2(&w.w_hh),
                        bias: c1(&w.bias),
                    };
                    [d(&dirs[0]), d(&dirs[1])]
                })
                .collect(),
            edge_head: proj(&self.edge_head),
            edge_dep: proj(&self.edge_dep),
            label_head: proj(&self.label_head),
            label_dep: proj(&self.label_dep),
            u_edge: c2(&self.u_edge),
            u_label: self.u_label.mapv(|x| G::from(x).unwrap()),
        }
    }
}
