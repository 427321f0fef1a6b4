//! The sub-pixel convolutional network: LR-space feature extraction followed
//! by a convolution with `C * r^2` outputs and a periodic shuffle.

mod io;
mod loss;
mod train;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use loss::{mse_grad, mse_loss};
pub use train::{
    canonical_order, train, train_observed, train_with_validation, EpochRecord, Sgd, TrainConfig, TrainHistory,
    PRNG_NAME,
};

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::tensor::{
    apply_activation, conv2d_backward, conv2d_forward, pixel_shuffle, Activation, ConvKernel, Padding,
    Tensor3,
};

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub kernel: ConvKernel,
    pub activation: Activation,
}

/// Layer sizes of a network: hidden `(k, n)` pairs, then the final kernel size.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub hidden: Vec<(usize, usize)>,
    pub final_k: usize,
    pub activation: Activation,
    pub upscale_ratio: usize,
    pub channels: usize,
}

impl Architecture {
    /// The 5-3-3 network: (5, 64), (3, 32), final 3x3 with `C * r^2` outputs.
    pub fn espcn(upscale_ratio: usize, channels: usize, activation: Activation) -> Self {
        Architecture {
            hidden: vec![(5, 64), (3, 32)],
            final_k: 3,
            activation,
            upscale_ratio,
            channels,
        }
    }

    /// HR-space 9-5-5 network (64, 32 features) that runs after a bicubic upscale.
    pub fn hr_space_955(channels: usize, activation: Activation) -> Self {
        Architecture {
            hidden: vec![(9, 64), (5, 32)],
            final_k: 5,
            activation,
            upscale_ratio: 1,
            channels,
        }
    }

    /// Kernel sizes of every layer in order, e.g. `[5, 3, 3]`.
    pub fn filter_sizes(&self) -> Vec<usize> {
        self.hidden.iter().map(|&(k, _)| k).chain([self.final_k]).collect()
    }
}

/// Layer stack plus upscale ratio `r` and colour channel count `C`.
///
/// The final layer has `C * r^2` outputs and no nonlinearity; its output is
/// periodically shuffled into the `rH x rW x C` result.
#[derive(Clone, Debug)]
pub struct EspcnModel {
    layers: Vec<Layer>,
    upscale_ratio: usize,
    channels: usize,
    // Identifies the current parameter values; forward caches record it.
    revision: u64,
}

impl PartialEq for EspcnModel {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
            && self.upscale_ratio == other.upscale_ratio
            && self.channels == other.channels
    }
}

impl EspcnModel {
    pub fn new(layers: Vec<Layer>, upscale_ratio: usize, channels: usize) -> Result<Self> {
        if upscale_ratio == 0 {
            return Err(Error::InvalidModel("upscale ratio must be >= 1".into()));
        }
        if channels == 0 {
            return Err(Error::InvalidModel("channel count must be >= 1".into()));
        }
        let Some(last) = layers.last() else {
            return Err(Error::InvalidModel("model has no layers".into()));
        };
        if layers[0].kernel.in_channels() != channels {
            return Err(Error::InvalidModel(format!(
                "first layer takes {} channels, model has {channels}",
                layers[0].kernel.in_channels()
            )));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].kernel.out_channels() != pair[1].kernel.in_channels() {
                return Err(Error::InvalidModel(format!(
                    "layer {} outputs {} channels but layer {} takes {}",
                    l + 1,
                    pair[0].kernel.out_channels(),
                    l + 2,
                    pair[1].kernel.in_channels()
                )));
            }
        }
        let expected = channels * upscale_ratio * upscale_ratio;
        if last.kernel.out_channels() != expected {
            return Err(Error::InvalidModel(format!(
                "final layer outputs {} channels, expected C*r^2 = {expected}",
                last.kernel.out_channels()
            )));
        }
        if last.activation != Activation::Identity {
            return Err(Error::InvalidModel(format!(
                "final layer activation must be identity, got {}",
                last.activation
            )));
        }
        Ok(EspcnModel {
            layers,
            upscale_ratio,
            channels,
            revision: fresh_revision(),
        })
    }

    /// Zero-mean Gaussian weights with standard deviation `(in * k^2)^-1/2`
    /// and zero biases, drawn layer by layer in `(o, i, ky, kx)` order.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(arch.hidden.len() + 1);
        let mut in_ch = arch.channels;
        let final_out = arch.channels * arch.upscale_ratio * arch.upscale_ratio;
        let shapes = arch
            .hidden
            .iter()
            .map(|&(k, n)| (k, n, arch.activation))
            .chain([(arch.final_k, final_out, Activation::Identity)]);
        for (k, out_ch, activation) in shapes {
            let std = 1.0 / ((in_ch * k * k) as f64).sqrt();
            let weights = (0..out_ch * in_ch * k * k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * std
                })
                .collect();
            let kernel = ConvKernel::new(out_ch, in_ch, k, weights, vec![0.0; out_ch])?;
            layers.push(Layer { kernel, activation });
            in_ch = out_ch;
        }
        Self::new(layers, arch.upscale_ratio, arch.channels)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to one layer's parameters. Invalidates earlier forward caches.
    pub fn layer_mut(&mut self, index: usize) -> &mut Layer {
        self.revision = fresh_revision();
        &mut self.layers[index]
    }

    pub fn upscale_ratio(&self) -> usize {
        self.upscale_ratio
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.kernel.parameter_count()).sum()
    }

    pub fn filter_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.kernel.k()).collect()
    }

    /// Rows of context each output row depends on, on either side.
    pub fn receptive_radius(&self) -> usize {
        self.layers.iter().map(|l| (l.kernel.k() - 1) / 2).sum()
    }

    fn check_input(&self, input: &Tensor3) -> Result<()> {
        if input.channels() != self.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                found: input.channels(),
            });
        }
        Ok(())
    }

    /// Full network: convolutions with same-zero padding, then the shuffle.
    pub fn forward(&self, lr_image: &Tensor3, keep_cache: bool) -> Result<(Tensor3, Option<ForwardCache>)> {
        let (pre, cache) = if keep_cache {
            let (pre, cache) = self.forward_preshuffle_cached(lr_image)?;
            (pre, Some(cache))
        } else {
            (self.forward_preshuffle(lr_image)?, None)
        };
        Ok((pixel_shuffle(&pre, self.upscale_ratio)?, cache))
    }

    /// Network output before the periodic shuffle: `H x W x C*r^2`.
    pub fn forward_preshuffle(&self, lr_image: &Tensor3) -> Result<Tensor3> {
        self.check_input(lr_image)?;
        let mut act = None;
        for layer in &self.layers {
            let input = act.as_ref().unwrap_or(lr_image);
            let mut z = conv2d_forward(input, &layer.kernel, Padding::Same)?;
            if layer.activation != Activation::Identity {
                z.data_mut().iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            }
            act = Some(z);
        }
        Ok(act.expect("model has at least one layer"))
    }

    pub fn forward_preshuffle_cached(&self, lr_image: &Tensor3) -> Result<(Tensor3, ForwardCache)> {
        self.check_input(lr_image)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut act = lr_image.clone();
        for layer in &self.layers {
            let z = conv2d_forward(&act, &layer.kernel, Padding::Same)?;
            let next = apply_activation(&z, layer.activation);
            inputs.push(std::mem::replace(&mut act, next));
            preacts.push(z);
        }
        let cache = ForwardCache {
            revision: self.revision,
            inputs,
            preacts,
        };
        Ok((act, cache))
    }

    /// Gradients of a loss given its gradient with respect to the
    /// pre-shuffle output.
    pub fn backward(&self, cache: Option<&ForwardCache>, grad_preshuffle: &Tensor3) -> Result<ModelGradients> {
        let cache = cache.ok_or(Error::MissingCache)?;
        if cache.revision != self.revision || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let out = cache.preacts.last().expect("non-empty cache");
        out.same_shape(grad_preshuffle)?;

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        let mut grad = grad_preshuffle.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation != Activation::Identity {
                let z = &cache.preacts[l];
                for (g, &zv) in grad.data_mut().iter_mut().zip(z.data()) {
                    *g *= layer.activation.derivative(zv);
                }
            }
            let g = conv2d_backward(&cache.inputs[l], &layer.kernel, &grad, Padding::Same)?;
            layer_grads.push(LayerGradients {
                weights: g.weights,
                bias: g.bias,
            });
            grad = g.input;
        }
        layer_grads.reverse();
        Ok(ModelGradients {
            layers: layer_grads,
            input: grad,
        })
    }

    /// Same result as [`forward`](Self::forward), computed in horizontal
    /// strips of `strip_rows` input rows so that peak memory is bounded by
    /// the strip size. Each strip carries a halo of
    /// [`receptive_radius`](Self::receptive_radius) rows; rows inside the
    /// halo see the same zero padding as the full image and are discarded.
    pub fn forward_tiled(&self, lr_image: &Tensor3, strip_rows: usize) -> Result<Tensor3> {
        self.check_input(lr_image)?;
        let strip_rows = strip_rows.max(1);
        let (h, w, c) = lr_image.shape();
        let r = self.upscale_ratio;
        let halo = self.receptive_radius();
        let mut out = Tensor3::zeros(h * r, w * r, c);
        let out_row = w * r * c;
        let mut y0 = 0;
        while y0 < h {
            let y1 = (y0 + strip_rows).min(h);
            let e0 = y0.saturating_sub(halo);
            let e1 = (y1 + halo).min(h);
            let pre = self.forward_preshuffle(&lr_image.rows(e0, e1))?;
            let kept = pre.rows(y0 - e0, y1 - e0);
            let hr = pixel_shuffle(&kept, r)?;
            out.data_mut()[y0 * r * out_row..y1 * r * out_row].copy_from_slice(hr.data());
            y0 = y1;
        }
        Ok(out)
    }
}

/// Per-layer inputs and pre-activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    revision: u64,
    inputs: Vec<Tensor3>,
    preacts: Vec<Tensor3>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradients {
    pub layers: Vec<LayerGradients>,
    /// Gradient with respect to the LR input.
    pub input: Tensor3,
}

impl ModelGradients {
    /// Parameter-shaped zeros; the input gradient is a 1x1 placeholder.
    pub fn zeros_like(model: &EspcnModel) -> Self {
        ModelGradients {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.kernel.weights().len()],
                    bias: vec![0.0; l.kernel.out_channels()],
                })
                .collect(),
            input: Tensor3::zeros(1, 1, 1),
        }
    }

    /// `self += scale * other` over the parameter gradients.
    pub fn add_scaled(&mut self, other: &ModelGradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }

    pub(crate) fn matches(&self, model: &EspcnModel) -> bool {
        self.layers.len() == model.layers.len()
            && self.layers.iter().zip(&model.layers).all(|(g, l)| {
                g.weights.len() == l.kernel.weights().len() && g.bias.len() == l.kernel.bias().len()
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::pixel_unshuffle;
    use rand::Rng;

    fn random_tensor(seed: u64, h: usize, w: usize, c: usize) -> Tensor3 {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        Tensor3::from_fn(h, w, c, |_, _, _| rng.gen_range(0.0..1.0))
    }

    fn zero_model(r: usize) -> EspcnModel {
        let mut m = EspcnModel::init(&Architecture::espcn(r, 1, Activation::Tanh), 0).unwrap();
        for l in 0..m.layers().len() {
            let layer = m.layer_mut(l);
            layer.kernel.weights_mut().fill(0.0);
            layer.kernel.bias_mut().fill(0.0);
        }
        m
    }

    fn identity_model() -> EspcnModel {
        EspcnModel::new(
            vec![Layer {
                kernel: ConvKernel::identity(1),
                activation: Activation::Identity,
            }],
            1,
            1,
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs_zeros() {
        let (out, _) = zero_model(3).forward(&random_tensor(1, 6, 5, 1), false).unwrap();
        assert_eq!(out.shape(), (18, 15, 1));
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_network_passes_through() {
        let x = random_tensor(2, 7, 4, 1);
        let (out, _) = identity_model().forward(&x, false).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn espcn_shapes() {
        let m = EspcnModel::init(&Architecture::espcn(3, 1, Activation::Tanh), 7).unwrap();
        let x = random_tensor(3, 17, 17, 1);
        let (out, _) = m.forward(&x, false).unwrap();
        assert_eq!(out.shape(), (51, 51, 1));
        let pre = m.forward_preshuffle(&x).unwrap();
        assert_eq!(pre.shape(), (17, 17, 9));
        assert_eq!(pixel_shuffle(&pre, 3).unwrap(), out);
        assert_eq!(m.parameter_count(), 22_729);
    }

    #[test]
    fn ratio_one_preshuffle_equals_forward() {
        let m = EspcnModel::init(&Architecture::espcn(1, 1, Activation::Relu), 9).unwrap();
        let x = random_tensor(4, 9, 8, 1);
        assert_eq!(m.forward(&x, false).unwrap().0, m.forward_preshuffle(&x).unwrap());
    }

    #[test]
    fn constructor_rejects_broken_invariants() {
        let good = EspcnModel::init(&Architecture::espcn(2, 1, Activation::Tanh), 1).unwrap();
        let mut layers = good.layers().to_vec();
        layers[2].activation = Activation::Tanh;
        assert!(matches!(EspcnModel::new(layers, 2, 1), Err(Error::InvalidModel(_))));
        assert!(matches!(EspcnModel::new(good.layers().to_vec(), 3, 1), Err(Error::InvalidModel(_))));
        assert!(matches!(EspcnModel::new(vec![], 1, 1), Err(Error::InvalidModel(_))));
        let mut layers = good.layers().to_vec();
        layers.remove(1);
        assert!(matches!(EspcnModel::new(layers, 2, 1), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn forward_rejects_wrong_channels() {
        let m = identity_model();
        assert!(matches!(
            m.forward(&Tensor3::zeros(3, 3, 2), false),
            Err(Error::ChannelMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn backward_cache_checks() {
        let mut m = EspcnModel::init(&Architecture::espcn(2, 1, Activation::Tanh), 3).unwrap();
        let x = random_tensor(5, 5, 5, 1);
        let (pre, cache) = m.forward_preshuffle_cached(&x).unwrap();
        let g = Tensor3::filled(pre.height(), pre.width(), pre.channels(), 1.0);
        assert!(matches!(m.backward(None, &g), Err(Error::MissingCache)));
        assert!(m.backward(Some(&cache), &g).is_ok());
        assert!(matches!(
            m.backward(Some(&cache), &Tensor3::zeros(5, 5, 1)),
            Err(Error::ShapeMismatch { .. })
        ));
        m.layer_mut(0).kernel.bias_mut()[0] += 1.0;
        assert!(matches!(m.backward(Some(&cache), &g), Err(Error::StaleCache)));
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradients() {
        let m = EspcnModel::init(&Architecture::espcn(2, 1, Activation::Tanh), 4).unwrap();
        let x = random_tensor(6, 6, 6, 1);
        let (pre, cache) = m.forward_preshuffle_cached(&x).unwrap();
        let g = m.backward(Some(&cache), &Tensor3::zeros(pre.height(), pre.width(), pre.channels())).unwrap();
        for lg in &g.layers {
            assert!(lg.weights.iter().chain(&lg.bias).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_layer_backward_reduces_to_conv_backward() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        let w = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let kernel = ConvKernel::new(1, 1, 3, w, vec![0.1]).unwrap();
        let m = EspcnModel::new(
            vec![Layer {
                kernel: kernel.clone(),
                activation: Activation::Identity,
            }],
            1,
            1,
        )
        .unwrap();
        let x = random_tensor(9, 5, 6, 1);
        let go = random_tensor(10, 5, 6, 1);
        let (_, cache) = m.forward_preshuffle_cached(&x).unwrap();
        let g = m.backward(Some(&cache), &go).unwrap();
        let direct = conv2d_backward(&x, &kernel, &go, Padding::Same).unwrap();
        assert_eq!(g.layers[0].weights, direct.weights);
        assert_eq!(g.layers[0].bias, direct.bias);
        assert_eq!(g.input, direct.input);
    }

    #[test]
    fn tiled_forward_matches_whole_image() {
        let m = EspcnModel::init(&Architecture::espcn(3, 1, Activation::Tanh), 5).unwrap();
        let x = random_tensor(11, 23, 13, 1);
        let (whole, _) = m.forward(&x, false).unwrap();
        for strip in [1, 4, 7, 23, 50] {
            let tiled = m.forward_tiled(&x, strip).unwrap();
            let diff = whole
                .data()
                .iter()
                .zip(tiled.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "strip {strip}: {diff}");
        }
    }

    #[test]
    fn init_is_seeded() {
        let arch = Architecture::espcn(3, 1, Activation::Tanh);
        assert_eq!(EspcnModel::init(&arch, 11).unwrap(), EspcnModel::init(&arch, 11).unwrap());
        assert_ne!(EspcnModel::init(&arch, 11).unwrap(), EspcnModel::init(&arch, 12).unwrap());
    }

    #[test]
    fn preshuffle_training_loss_equivalence() {
        let p = random_tensor(20, 4, 5, 9);
        let hr = random_tensor(21, 12, 15, 1);
        let a = mse_loss(&pixel_shuffle(&p, 3).unwrap(), &hr).unwrap();
        let b = mse_loss(&p, &pixel_unshuffle(&hr, 3).unwrap()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
