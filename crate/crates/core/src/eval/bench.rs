use std::fmt::{self, Write as _};
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::baseline::{bicubic_upscale, HrSpacePipeline};
use crate::data::Plane;
use crate::error::{Error, Result};
use crate::model::{Architecture, EspcnModel};
use crate::tensor::Activation;

const LR_STRIP_ROWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pipeline {
    /// 5-3-3 network in LR space followed by the pixel shuffle.
    EspcnLrSpace,
    /// Bicubic upscale followed by a 9-5-5 network in HR space.
    HrSpace955,
}

impl Pipeline {
    pub fn id(self) -> &'static str {
        match self {
            Pipeline::EspcnLrSpace => "espcn-lr-space",
            Pipeline::HrSpace955 => "hr-space-9-5-5",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Pipeline::EspcnLrSpace, Pipeline::HrSpace955]
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown pipeline '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub pipeline: Pipeline,
    /// LR input height.
    pub height: usize,
    pub width: usize,
    pub scale: usize,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub pipeline: Pipeline,
    pub height: usize,
    pub width: usize,
    pub scale: usize,
    pub times: Vec<f64>,
    pub median: f64,
    /// Sum of every timed output, reported so the work cannot be elided.
    pub checksum: f64,
}

impl BenchResult {
    /// `self.median / faster.median`.
    pub fn ratio_to(&self, faster: &BenchResult) -> f64 {
        self.median / faster.median
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Times full LR-to-HR forward passes of randomly initialised networks on a
/// random input. Warmup runs are discarded.
pub fn benchmark_forward(spec: &BenchSpec) -> Result<BenchResult> {
    if spec.reps < 3 {
        return Err(Error::InvalidConfig(format!("benchmark needs at least 3 reps, got {}", spec.reps)));
    }
    if spec.height == 0 || spec.width == 0 || spec.scale == 0 {
        return Err(Error::InvalidConfig("benchmark input and scale must be non-zero".into()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let lr = Plane::from_fn(spec.height, spec.width, |_, _| rng.gen_range(0.0..255.0));
    let runner: Box<dyn Fn() -> Result<f64>> = match spec.pipeline {
        Pipeline::EspcnLrSpace => {
            let model = EspcnModel::init(&Architecture::espcn(spec.scale, 1, Activation::Tanh), spec.seed)?;
            let input = lr.to_network_tensor();
            Box::new(move || Ok(model.forward_tiled(&input, LR_STRIP_ROWS)?.data().iter().sum()))
        }
        Pipeline::HrSpace955 => {
            let pipeline = HrSpacePipeline::init(spec.scale, 1, Activation::Tanh, spec.seed)?;
            let lr = lr.clone();
            let scale = spec.scale;
            Box::new(move || {
                let up = bicubic_upscale(&lr, scale)?.to_network_tensor();
                Ok(pipeline.refine(&up)?.data().iter().sum())
            })
        }
    };
    for _ in 0..spec.warmup {
        black_box(runner()?);
    }
    let mut times = Vec::with_capacity(spec.reps);
    let mut checksum = 0.0;
    for _ in 0..spec.reps {
        let start = Instant::now();
        let sum = black_box(runner()?);
        times.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
        checksum += sum;
    }
    Ok(BenchResult {
        pipeline: spec.pipeline,
        height: spec.height,
        width: spec.width,
        scale: spec.scale,
        median: median(&times),
        times,
        checksum,
    })
}

pub fn bench_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("pipeline,height,width,scale,rep,seconds\n");
    for r in results {
        for (i, t) in r.times.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{},{t:.6}", r.pipeline, r.height, r.width, r.scale, i + 1);
        }
    }
    out
}
