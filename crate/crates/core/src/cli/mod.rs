//! Command-line front end: run configuration, Y4M streams, filter mosaics
//! and the subcommands built on them.

mod commands;
mod config;
mod mosaic;
mod y4m;

pub use commands::{
    cmd_bench, cmd_dump_filters, cmd_eval, cmd_sr, cmd_train, cmd_video, run_training, super_resolve_image,
    super_resolve_stream, upscale_plane, BenchArgs, EvalArgs, VideoSummary,
};
pub use config::{Overrides, RunConfig};
pub use mosaic::{layer_tiles, mosaic, shuffled_last_layer_tiles, Tile, FLAT_TILE};
pub use y4m::{Y4mFrame, Y4mHeader, Y4mReader, Y4mWriter};
