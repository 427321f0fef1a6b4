//! Filter visualisation: layer weights tiled into a grayscale mosaic.

use crate::data::Plane;
use crate::error::{Error, Result};
use crate::model::EspcnModel;

/// Value drawn for a tile whose weights are all equal.
pub const FLAT_TILE: f64 = 128.0;

/// Row-major square tile of weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Tile {
    pub side: usize,
    pub values: Vec<f64>,
}

impl Tile {
    fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }

    /// Min-max stretch to [0, 255].
    pub fn normalized(&self) -> Vec<f64> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return vec![FLAT_TILE; self.values.len()];
        }
        self.values.iter().map(|v| 255.0 * (v - lo) / (hi - lo)).collect()
    }
}

/// One tile per (output, input) channel pair of layer `layer` (1-based).
/// The first layer is ordered by descending variance; other layers keep
/// the stored order.
pub fn layer_tiles(model: &EspcnModel, layer: usize) -> Result<Vec<Tile>> {
    let n = model.layers().len();
    if layer == 0 || layer > n {
        return Err(Error::Config(format!("layer {layer} out of range 1..={n}")));
    }
    let kernel = &model.layers()[layer - 1].kernel;
    let k = kernel.k();
    let mut tiles = Vec::new();
    for o in 0..kernel.out_channels() {
        for i in 0..kernel.in_channels() {
            let values = (0..k * k).map(|t| kernel.weight(o, i, t / k, t % k)).collect();
            tiles.push(Tile { side: k, values });
        }
    }
    if layer == 1 {
        let variances: Vec<f64> = tiles.iter().map(Tile::variance).collect();
        let mut order: Vec<usize> = (0..tiles.len()).collect();
        order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]));
        tiles = order.into_iter().map(|i| tiles[i].clone()).collect();
    }
    Ok(tiles)
}

/// The last layer after the periodic shuffle: for each input feature map and
/// colour channel, a `k*r` square tile where tap `(ty, tx)` of phase
/// `(dy, dx)` lands at `(ty*r + dy, tx*r + dx)`.
pub fn shuffled_last_layer_tiles(model: &EspcnModel) -> Vec<Tile> {
    let kernel = &model.layers().last().expect("models have at least one layer").kernel;
    let (k, r, c) = (kernel.k(), model.upscale_ratio(), model.channels());
    let side = k * r;
    let mut tiles = Vec::new();
    for i in 0..kernel.in_channels() {
        for colour in 0..c {
            let mut values = vec![0.0; side * side];
            for dy in 0..r {
                for dx in 0..r {
                    let o = c * r * dy + c * dx + colour;
                    for ty in 0..k {
                        for tx in 0..k {
                            values[(ty * r + dy) * side + tx * r + dx] = kernel.weight(o, i, ty, tx);
                        }
                    }
                }
            }
            tiles.push(Tile { side, values });
        }
    }
    tiles
}

/// Grid of normalised tiles, `ceil(sqrt(n))` per row, separated by 1-pixel
/// black lines. Unused cells stay black.
pub fn mosaic(tiles: &[Tile]) -> Result<Plane> {
    let side = tiles.first().map(|t| t.side).ok_or_else(|| Error::InvalidShape("no tiles".into()))?;
    if tiles.iter().any(|t| t.side != side) {
        return Err(Error::InvalidShape("tiles differ in size".into()));
    }
    let n = tiles.len();
    let cols = (1..=n).find(|c| c * c >= n).unwrap_or(1);
    let rows = n.div_ceil(cols);
    let (h, w) = (rows * (side + 1) - 1, cols * (side + 1) - 1);
    let mut out = vec![0.0; h * w];
    for (idx, tile) in tiles.iter().enumerate() {
        let (y0, x0) = ((idx / cols) * (side + 1), (idx % cols) * (side + 1));
        for (t, v) in tile.normalized().into_iter().enumerate() {
            out[(y0 + t / side) * w + x0 + t % side] = v;
        }
    }
    Plane::new(h, w, out)
}
