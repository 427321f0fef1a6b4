//! PSNR scoring, dataset reports with paired significance tests, and
//! forward-pass timing of the LR-space and HR-space pipelines.

mod bench;
mod metrics;
mod report;

pub use bench::{bench_csv, benchmark_forward, median, BenchResult, BenchSpec, Pipeline};
pub use metrics::{paired_t_test, psnr, two_sided_p, TTest};
pub use report::{evaluate_dataset, evaluate_planes, Comparison, EvalReport, EvalRow, EvalSetup, Method};
