//! Subcommand implementations. Each takes parsed arguments and writers for
//! its primary output and progress log, so it can be driven from tests.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{Overrides, RunConfig};
use super::mosaic::{layer_tiles, mosaic, shuffled_last_layer_tiles};
use super::y4m::{Y4mFrame, Y4mReader, Y4mWriter};
use crate::baseline::{bicubic_upscale, hr_space_patch_pairs, HrSpacePipeline};
use crate::data::{
    decode_pnm, default_sigma, encode_pnm, ingest_dataset, ingest_with, rgb_to_ycbcr, ycbcr_to_rgb, Dataset, Image,
    Plane,
};
use crate::error::{Error, Result};
use crate::eval::{bench_csv, benchmark_forward, evaluate_dataset, median, BenchSpec, EvalSetup, Method, Pipeline};
use crate::model::{
    load_model, save_model, train_observed, train_with_validation, Architecture, EpochRecord, EspcnModel, TrainHistory,
};

/// LR rows per strip for whole-image inference.
const STRIP_ROWS: usize = 64;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

fn check_scale(model: &EspcnModel, requested: Option<usize>) -> Result<()> {
    match requested {
        Some(r) if r != model.upscale_ratio() => Err(Error::ScaleMismatch {
            model: model.upscale_ratio(),
            requested: r,
        }),
        _ => Ok(()),
    }
}

/// Runs the network over a whole 8-bit-range plane.
pub fn upscale_plane(model: &EspcnModel, lr: &Plane) -> Result<Plane> {
    let out = model.forward_tiled(&lr.to_network_tensor(), STRIP_ROWS)?;
    Ok(Plane::from_network_tensor(&out))
}

/// Grayscale goes through the network directly; colour runs Y through the
/// network and upscales Cb and Cr bicubically.
pub fn super_resolve_image(model: &EspcnModel, image: &Image) -> Result<Image> {
    let r = model.upscale_ratio();
    match image {
        Image::Gray(p) => Ok(Image::Gray(upscale_plane(model, p)?)),
        Image::Rgb(rgb) => {
            let ycc = rgb_to_ycbcr(rgb);
            let y = upscale_plane(model, &ycc.y)?;
            let cb = bicubic_upscale(&ycc.cb, r)?;
            let cr = bicubic_upscale(&ycc.cr, r)?;
            Ok(Image::Rgb(ycbcr_to_rgb(&y, &cb, &cr)?))
        }
    }
}

fn load_training_set(config: &RunConfig, dir: &Path, filter_sizes: &[usize]) -> Result<Dataset> {
    let (r, sigma, patch) = (config.scale, config.sigma(), config.patch_size);
    match config.pipeline {
        Pipeline::EspcnLrSpace => ingest_dataset(dir, r, filter_sizes, patch, sigma),
        Pipeline::HrSpace955 => ingest_with(dir, r, |hr, name| {
            hr_space_patch_pairs(hr, r, filter_sizes, patch * r, sigma, name)
        }),
    }
}

fn report_dataset(log: &mut dyn Write, label: &str, dir: &Path, data: &Dataset) {
    let _ = writeln!(
        log,
        "{label}: {} patches from {} images in {}",
        data.pairs.len(),
        data.summary.images.len(),
        dir.display()
    );
    for (name, why) in &data.summary.skipped {
        let _ = writeln!(log, "  skipped {name}: {why}");
    }
}

/// Trains per `config`, writing the best model and the loss history.
pub fn run_training(config: &RunConfig, log: &mut dyn Write) -> Result<TrainHistory> {
    config.validate()?;
    let arch = match config.pipeline {
        Pipeline::EspcnLrSpace => Architecture::espcn(config.scale, 1, config.activation),
        Pipeline::HrSpace955 => Architecture::hr_space_955(1, config.activation),
    };
    let filter_sizes = arch.filter_sizes();
    let model = EspcnModel::init(&arch, config.train.rng_seed)?;
    let train_set = load_training_set(config, &config.train_dir, &filter_sizes)?;
    report_dataset(log, "train", &config.train_dir, &train_set);

    let mut print = |rec: &EpochRecord| {
        let _ = writeln!(
            log,
            "epoch {:>4}  train_loss {:.6e}  val_loss {:.6e}  lr {:.3e}",
            rec.epoch, rec.train_loss, rec.val_loss, rec.lr
        );
    };
    let (best, history) = match &config.val_dir {
        Some(dir) => {
            let val_set = load_training_set(config, dir, &filter_sizes)?;
            train_with_validation(&model, &train_set.pairs, &val_set.pairs, &config.train, &mut print)?
        }
        None => train_observed(&model, &train_set.pairs, &config.train, &mut print)?,
    };
    save_model(&best, &config.model_out)?;
    write_file(&config.history_path(), history.to_csv().as_bytes())?;
    let _ = writeln!(
        log,
        "best epoch {} (val_loss {:.6e}); model written to {}",
        history.best_epoch,
        history.best_val_loss,
        config.model_out.display()
    );
    Ok(history)
}

pub fn cmd_train(config_path: &Path, overrides: &Overrides, log: &mut dyn Write) -> Result<()> {
    let mut config = RunConfig::load(config_path)?;
    config.apply(overrides);
    run_training(&config, log).map(|_| ())
}

pub fn cmd_sr(model_path: &Path, input: &Path, output: &Path, scale: Option<usize>) -> Result<()> {
    let model = load_model(model_path)?;
    check_scale(&model, scale)?;
    let bytes = fs::read(input).map_err(|e| Error::file(input, e))?;
    let image = decode_pnm(&bytes)?;
    let out = super_resolve_image(&model, &image)?;
    write_file(output, &encode_pnm(&out))
}

#[derive(Clone, Debug, Default)]
pub struct EvalArgs {
    pub dir: PathBuf,
    pub model: Option<PathBuf>,
    pub hr_model: Option<PathBuf>,
    /// Defaults to the model's ratio.
    pub scale: Option<usize>,
    pub sigma: Option<f64>,
    pub shave: Option<usize>,
    /// Defaults to bicubic plus every method with a model.
    pub methods: Option<Vec<Method>>,
    pub out: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let espcn = args.model.as_deref().map(load_model).transpose()?;
    let hr_model = args.hr_model.as_deref().map(load_model).transpose()?;
    let scale = args
        .scale
        .or(espcn.as_ref().map(EspcnModel::upscale_ratio))
        .ok_or_else(|| Error::MissingInput("--scale is required without --model".into()))?;
    let mut setup = EvalSetup::new(scale, args.sigma.unwrap_or_else(|| default_sigma(scale)));
    if let Some(s) = args.shave {
        setup.shave = s;
    }
    let methods = args.methods.clone().unwrap_or_else(|| {
        let mut m = vec![Method::Bicubic];
        m.extend(espcn.as_ref().map(|_| Method::Espcn));
        m.extend(hr_model.as_ref().map(|_| Method::HrPipeline));
        m
    });
    setup.espcn = espcn;
    setup.hr_pipeline = hr_model.map(|m| HrSpacePipeline::new(m, scale)).transpose()?;
    let report = evaluate_dataset(&args.dir, &setup, &methods)?;
    emit(args.out.as_deref(), report.to_csv().as_bytes(), stdout)
}

fn emit(path: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => Ok(stdout.write_all(bytes)?),
    }
}

#[derive(Clone, Debug)]
pub struct BenchArgs {
    /// LR inputs as (height, width).
    pub sizes: Vec<(usize, usize)>,
    pub scale: usize,
    pub reps: usize,
    pub warmup: usize,
    pub pipelines: Vec<Pipeline>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for BenchArgs {
    fn default() -> Self {
        BenchArgs {
            sizes: vec![(540, 960)],
            scale: 3,
            reps: 10,
            warmup: 1,
            pipelines: vec![Pipeline::EspcnLrSpace, Pipeline::HrSpace955],
            seed: 0,
            out: None,
        }
    }
}

pub fn cmd_bench(args: &BenchArgs, stdout: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    if args.sizes.is_empty() || args.pipelines.is_empty() {
        return Err(Error::Config("bench needs at least one size and one pipeline".into()));
    }
    let mut results = Vec::new();
    for &(height, width) in &args.sizes {
        let first = results.len();
        for &pipeline in &args.pipelines {
            let r = benchmark_forward(&BenchSpec {
                pipeline,
                height,
                width,
                scale: args.scale,
                reps: args.reps,
                warmup: args.warmup,
                seed: args.seed,
            })?;
            let _ = writeln!(log, "{pipeline} {width}x{height} x{}: median {:.4} s", args.scale, r.median);
            results.push(r);
        }
        if let [base, rest @ ..] = &results[first..] {
            for r in rest {
                let _ = writeln!(log, "  {} / {}: {:.2}x", r.pipeline, base.pipeline, r.ratio_to(base));
            }
        }
    }
    emit(args.out.as_deref(), bench_csv(&results).as_bytes(), stdout)
}

/// Per-frame wall-clock times of a video run.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSummary {
    pub frames: usize,
    pub seconds: Vec<f64>,
}

impl VideoSummary {
    pub fn total(&self) -> f64 {
        self.seconds.iter().sum()
    }
}

/// Super-resolves a Y4M stream one frame at a time.
pub fn super_resolve_stream<R: std::io::BufRead, W: Write>(
    model: &EspcnModel,
    input: R,
    output: W,
    mut on_frame: impl FnMut(usize, f64),
) -> Result<VideoSummary> {
    let r = model.upscale_ratio();
    let mut reader = Y4mReader::new(input)?;
    let header = reader.header().clone();
    let mut writer = Y4mWriter::new(output, header.scaled(r))?;
    let (h, w) = (header.height, header.width);
    let mut seconds = Vec::new();
    while let Some(frame) = reader.next_frame()? {
        let start = Instant::now();
        let y = upscale_plane(model, &Plane::from_bytes(h, w, &frame.y)?)?;
        let cb = bicubic_upscale(&Plane::from_bytes(h / 2, w / 2, &frame.cb)?, r)?;
        let cr = bicubic_upscale(&Plane::from_bytes(h / 2, w / 2, &frame.cr)?, r)?;
        writer.write_frame(&Y4mFrame {
            y: y.to_bytes(),
            cb: cb.to_bytes(),
            cr: cr.to_bytes(),
        })?;
        let t = start.elapsed().as_secs_f64();
        on_frame(seconds.len(), t);
        seconds.push(t);
    }
    writer.finish()?;
    Ok(VideoSummary {
        frames: seconds.len(),
        seconds,
    })
}

pub fn cmd_video(
    model_path: &Path,
    input: &Path,
    output: &Path,
    scale: Option<usize>,
    log: &mut dyn Write,
) -> Result<()> {
    let model = load_model(model_path)?;
    check_scale(&model, scale)?;
    let reader = BufReader::new(File::open(input).map_err(|e| Error::file(input, e))?);
    let writer = BufWriter::new(File::create(output).map_err(|e| Error::file(output, e))?);
    let summary = super_resolve_stream(&model, reader, writer, |i, t| {
        let _ = writeln!(log, "frame {:>5}  {:.4} s", i + 1, t);
    })?;
    if summary.frames == 0 {
        let _ = writeln!(log, "0 frames");
    } else {
        let _ = writeln!(
            log,
            "{} frames in {:.3} s (mean {:.4} s, median {:.4} s per frame)",
            summary.frames,
            summary.total(),
            summary.total() / summary.frames as f64,
            median(&summary.seconds)
        );
    }
    Ok(())
}

pub fn cmd_dump_filters(model_path: &Path, layer: usize, output: &Path, shuffled: bool) -> Result<()> {
    let model = load_model(model_path)?;
    let last = model.layers().len();
    let tiles = if shuffled {
        if layer != last {
            return Err(Error::Config(format!(
                "the shuffled view applies to the last layer ({last}), not layer {layer}"
            )));
        }
        shuffled_last_layer_tiles(&model)
    } else {
        layer_tiles(&model, layer)?
    };
    write_file(output, &encode_pnm(&Image::Gray(mosaic(&tiles)?)))
}
