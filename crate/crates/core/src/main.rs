use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use espcn::cli::{self, BenchArgs, EvalArgs, Overrides};
use espcn::eval::{Method, Pipeline};
use espcn::tensor::Activation;
use espcn::Result;

#[derive(Parser)]
#[command(name = "espcn", version, about = "Sub-pixel convolutional super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a key=value config file.
    Train {
        config: PathBuf,
        #[arg(long)]
        scale: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        activation: Option<Activation>,
        /// Model output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Super-resolve a PGM or PPM image.
    Sr {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fail unless the model upscales by this factor.
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Score methods on a directory of HR images; CSV to --out or stdout.
    Eval {
        dir: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Ratio-1 model used after bicubic upscaling.
        #[arg(long)]
        hr_model: Option<PathBuf>,
        #[arg(long)]
        scale: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        shave: Option<usize>,
        /// Comma-separated: espcn, bicubic, hr-pipeline, identity.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time forward passes of the LR-space and HR-space pipelines.
    Bench {
        /// Comma-separated LR input sizes, WIDTHxHEIGHT.
        #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "960x540")]
        sizes: Vec<(usize, usize)>,
        #[arg(long, default_value_t = 3)]
        scale: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long, value_delimiter = ',', default_value = "espcn-lr-space,hr-space-9-5-5")]
        pipelines: Vec<Pipeline>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Super-resolve a 4:2:0 Y4M stream frame by frame.
    Video {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Render one layer's filters as a PGM mosaic.
    DumpFilters {
        #[arg(long)]
        model: PathBuf,
        /// 1-based layer index.
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
        /// Show the last layer after the pixel shuffle.
        #[arg(long)]
        shuffled: bool,
    },
}

/// `WxH` as (height, width).
fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
    let dim = |v: &str| v.parse::<usize>().map_err(|_| format!("bad dimension in '{s}'"));
    Ok((dim(h)?, dim(w)?))
}

fn run(command: Command) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut err = io::stderr();
    match command {
        Command::Train {
            config,
            scale,
            seed,
            sigma,
            activation,
            out: model_out,
        } => {
            let o = Overrides {
                scale,
                seed,
                sigma,
                activation,
                model_out,
            };
            cli::cmd_train(&config, &o, &mut out)
        }
        Command::Sr {
            input,
            model,
            out: path,
            scale,
        } => cli::cmd_sr(&model, &input, &path, scale),
        Command::Eval {
            dir,
            model,
            hr_model,
            scale,
            sigma,
            shave,
            methods,
            out: path,
        } => {
            let args = EvalArgs {
                dir,
                model,
                hr_model,
                scale,
                sigma,
                shave,
                methods,
                out: path,
            };
            cli::cmd_eval(&args, &mut out)
        }
        Command::Bench {
            sizes,
            scale,
            reps,
            warmup,
            pipelines,
            seed,
            out: path,
        } => {
            let args = BenchArgs {
                sizes,
                scale,
                reps,
                warmup,
                pipelines,
                seed,
                out: path,
            };
            cli::cmd_bench(&args, &mut out, &mut err)
        }
        Command::Video {
            input,
            model,
            out: path,
            scale,
        } => cli::cmd_video(&model, &input, &path, scale, &mut out),
        Command::DumpFilters {
            model,
            layer,
            out: path,
            shuffled,
        } => cli::cmd_dump_filters(&model, layer, &path, shuffled),
    }?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
