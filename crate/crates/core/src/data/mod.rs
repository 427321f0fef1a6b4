//! Image codecs, colour conversion, the degradation model and training patches.

mod color;
mod degrade;
mod patches;
mod plane;
mod pnm;

pub use color::{rgb_to_ycbcr, ycbcr_to_rgb, YCbCr};
pub use degrade::{default_sigma, gaussian_degrade, modcrop, SIGMA_EPSILON};
pub use patches::{
    extract_patch_pairs, ingest_dataset, ingest_with, list_images, load_luma, patch_stride, window_count, Dataset,
    IngestSummary, PatchPair, PATCH_SIZE,
};
pub use plane::{quantize, Plane, RgbImage, NETWORK_OFFSET};
pub use pnm::{decode_pnm, encode_pnm, Image};

/// The plane the network sees: grayscale as-is, colour reduced to Y.
pub fn luminance(image: &Image) -> Plane {
    match image {
        Image::Gray(p) => p.clone(),
        Image::Rgb(rgb) => rgb_to_ycbcr(rgb).y,
    }
}
