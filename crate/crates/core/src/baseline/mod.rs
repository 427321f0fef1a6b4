//! Bicubic resampling, the HR-space deconvolution reference and an
//! SRCNN-style HR-space pipeline used as a cost and accuracy baseline.

mod bicubic;
mod deconv;

pub use bicubic::{bicubic_resize, bicubic_upscale, keys_kernel};
pub use deconv::{
    activation_patterns, deconv_oracle, rearrange_filter, rearranged_kernel_size, zero_insertion_upsample,
    BigFilter, PhasePattern,
};

use crate::data::{gaussian_degrade, patch_stride, window_count, PatchPair, Plane};
use crate::error::{Error, Result};
use crate::model::{Architecture, EspcnModel};
use crate::tensor::{Activation, Tensor3};

/// HR rows per strip when running the HR-space network.
const HR_STRIP_ROWS: usize = 256;

/// Bicubic upscaling followed by a ratio-1 network in HR space.
#[derive(Clone, Debug, PartialEq)]
pub struct HrSpacePipeline {
    model: EspcnModel,
    upscale_ratio: usize,
}

impl HrSpacePipeline {
    pub fn new(model: EspcnModel, upscale_ratio: usize) -> Result<Self> {
        if model.upscale_ratio() != 1 {
            return Err(Error::InvalidModel(format!(
                "HR-space network must have ratio 1, got {}",
                model.upscale_ratio()
            )));
        }
        if upscale_ratio == 0 {
            return Err(Error::InvalidShape("upscale ratio must be >= 1".into()));
        }
        Ok(HrSpacePipeline { model, upscale_ratio })
    }

    /// Randomly initialised 9-5-5 network.
    pub fn init(upscale_ratio: usize, channels: usize, activation: Activation, seed: u64) -> Result<Self> {
        let model = EspcnModel::init(&Architecture::hr_space_955(channels, activation), seed)?;
        HrSpacePipeline::new(model, upscale_ratio)
    }

    pub fn model(&self) -> &EspcnModel {
        &self.model
    }

    pub fn upscale_ratio(&self) -> usize {
        self.upscale_ratio
    }

    /// Runs the network on an already upscaled, network-range tensor.
    pub fn refine(&self, upscaled: &Tensor3) -> Result<Tensor3> {
        self.model.forward_tiled(upscaled, HR_STRIP_ROWS)
    }

    pub fn upscale(&self, lr: &Plane) -> Result<Plane> {
        let up = bicubic_upscale(lr, self.upscale_ratio)?;
        let out = self.refine(&up.to_network_tensor())?;
        Ok(Plane::from_network_tensor(&out))
    }
}

/// Training pairs for the HR-space network: bicubic-upscaled LR windows
/// against the matching HR windows, both `patch` HR pixels square.
pub fn hr_space_patch_pairs(
    hr: &Plane,
    r: usize,
    filter_sizes: &[usize],
    patch: usize,
    sigma: f64,
    source: &str,
) -> Result<Vec<PatchPair>> {
    let lr = gaussian_degrade(hr, r, sigma)?;
    let up = bicubic_upscale(&lr, r)?;
    if up.height() < patch || up.width() < patch {
        return Err(Error::PatchTooLarge {
            height: up.height(),
            width: up.width(),
            patch,
        });
    }
    let stride = patch_stride(filter_sizes, patch);
    let mut pairs = Vec::new();
    for wy in 0..window_count(up.height(), patch, stride) {
        for wx in 0..window_count(up.width(), patch, stride) {
            let (y0, x0) = (wy * stride, wx * stride);
            pairs.push(PatchPair {
                lr_patch: up.crop(y0, x0, patch, patch).to_network_tensor(),
                target_preshuffled: hr.crop(y0, x0, patch, patch).to_network_tensor(),
                source: source.to_string(),
                offset: (y0, x0),
            });
        }
    }
    Ok(pairs)
}
