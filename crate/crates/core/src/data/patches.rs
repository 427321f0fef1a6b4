use std::fs;
use std::path::{Path, PathBuf};

use super::{decode_pnm, gaussian_degrade, luminance, modcrop, Plane};
use crate::error::{Error, Result};
use crate::tensor::{pixel_unshuffle, Tensor3};

pub const PATCH_SIZE: usize = 17;

/// One LR training window and its HR target in pre-shuffle layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    /// `p x p x C`, values scaled to `[0, 1]`.
    pub lr_patch: Tensor3,
    /// `pixel_unshuffle` of the aligned `pr x pr` HR crop: `p x p x C*r^2`.
    pub target_preshuffled: Tensor3,
    pub source: String,
    /// Top-left corner of the window in LR coordinates `(y, x)`.
    pub offset: (usize, usize),
}

/// LR window stride `patch - sum(f mod 2)`; 14 for the 5-3-3 network.
pub fn patch_stride(filter_sizes: &[usize], patch: usize) -> usize {
    let odd = filter_sizes.iter().filter(|&&f| f % 2 == 1).count();
    patch.saturating_sub(odd).max(1)
}

/// Number of whole windows along one axis of length `len`.
pub fn window_count(len: usize, patch: usize, stride: usize) -> usize {
    if len < patch {
        0
    } else {
        (len - patch) / stride + 1
    }
}

/// Degrades `hr` (already modcropped) and cuts aligned LR/HR windows.
/// Windows that would overrun the image are dropped.
pub fn extract_patch_pairs(
    hr: &Plane,
    r: usize,
    filter_sizes: &[usize],
    patch: usize,
    sigma: f64,
    source: &str,
) -> Result<Vec<PatchPair>> {
    let lr = gaussian_degrade(hr, r, sigma)?;
    if lr.height() < patch || lr.width() < patch {
        return Err(Error::PatchTooLarge {
            height: lr.height(),
            width: lr.width(),
            patch,
        });
    }
    let stride = patch_stride(filter_sizes, patch);
    let mut pairs = Vec::new();
    for wy in 0..window_count(lr.height(), patch, stride) {
        for wx in 0..window_count(lr.width(), patch, stride) {
            let (y0, x0) = (wy * stride, wx * stride);
            let lr_patch = lr.crop(y0, x0, patch, patch).to_network_tensor();
            let hr_crop = hr.crop(y0 * r, x0 * r, patch * r, patch * r).to_network_tensor();
            pairs.push(PatchPair {
                lr_patch,
                target_preshuffled: pixel_unshuffle(&hr_crop, r)?,
                source: source.to_string(),
                offset: (y0, x0),
            });
        }
    }
    Ok(pairs)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestSummary {
    /// `(file name, patch count)` for every image that contributed.
    pub images: Vec<(String, usize)>,
    /// `(file name, reason)` for every image that was skipped.
    pub skipped: Vec<(String, String)>,
}

impl IngestSummary {
    pub fn patch_count(&self) -> usize {
        self.images.iter().map(|(_, n)| n).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub pairs: Vec<PatchPair>,
    pub summary: IngestSummary,
}

/// `.pgm` / `.ppm` files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::file(dir, e))?.path();
        let is_pnm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("ppm"));
        if is_pnm && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_luma(path: &Path) -> Result<Plane> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    Ok(luminance(&decode_pnm(&bytes)?))
}

/// Patch pairs from every image in `dir`, in file-name order. Unreadable or
/// too-small images are skipped and listed in the summary.
pub fn ingest_dataset(dir: &Path, r: usize, filter_sizes: &[usize], patch: usize, sigma: f64) -> Result<Dataset> {
    ingest_with(dir, r, |hr, name| extract_patch_pairs(hr, r, filter_sizes, patch, sigma, name))
}

/// Like [`ingest_dataset`] with a custom extractor, which receives each
/// modcropped luminance plane and its file name.
pub fn ingest_with(
    dir: &Path,
    r: usize,
    mut extract: impl FnMut(&Plane, &str) -> Result<Vec<PatchPair>>,
) -> Result<Dataset> {
    let mut pairs = Vec::new();
    let mut summary = IngestSummary::default();
    for path in list_images(dir)? {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let extracted = load_luma(&path)
            .and_then(|luma| modcrop(&luma, r))
            .and_then(|hr| extract(&hr, &name));
        match extracted {
            Ok(p) => {
                summary.images.push((name, p.len()));
                pairs.extend(p);
            }
            Err(e) => summary.skipped.push((name, e.to_string())),
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoTrainingPatches(dir.to_path_buf()));
    }
    Ok(Dataset { pairs, summary })
}
