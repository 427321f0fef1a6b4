use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use super::metrics::{paired_t_test, psnr, TTest};
use crate::baseline::{bicubic_upscale, HrSpacePipeline};
use crate::data::{gaussian_degrade, list_images, load_luma, modcrop, Plane};
use crate::error::{Error, Result};
use crate::model::EspcnModel;

/// LR rows per strip when running the network over a whole image.
const LR_STRIP_ROWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Espcn,
    Bicubic,
    HrPipeline,
    /// Ground-truth pass-through.
    Identity,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Espcn, Method::Bicubic, Method::HrPipeline, Method::Identity];

    pub fn id(self) -> &'static str {
        match self {
            Method::Espcn => "espcn",
            Method::Bicubic => "bicubic",
            Method::HrPipeline => "hr-pipeline",
            Method::Identity => "identity",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Models and protocol settings shared by every image.
#[derive(Clone, Debug)]
pub struct EvalSetup {
    pub scale: usize,
    pub sigma: f64,
    pub shave: usize,
    pub espcn: Option<EspcnModel>,
    pub hr_pipeline: Option<HrSpacePipeline>,
}

impl EvalSetup {
    /// Shave equal to the scale.
    pub fn new(scale: usize, sigma: f64) -> Self {
        EvalSetup {
            scale,
            sigma,
            shave: scale,
            espcn: None,
            hr_pipeline: None,
        }
    }

    fn check(&self, methods: &[Method]) -> Result<()> {
        if methods.is_empty() {
            return Err(Error::Config("no evaluation methods selected".into()));
        }
        for m in methods {
            match m {
                Method::Espcn => {
                    let model = self.espcn.as_ref().ok_or_else(|| Error::MissingInput("espcn needs a model".into()))?;
                    if model.upscale_ratio() != self.scale {
                        return Err(Error::ScaleMismatch {
                            model: model.upscale_ratio(),
                            requested: self.scale,
                        });
                    }
                    if model.channels() != 1 {
                        return Err(Error::ChannelMismatch {
                            expected: 1,
                            found: model.channels(),
                        });
                    }
                }
                Method::HrPipeline => {
                    let p = self
                        .hr_pipeline
                        .as_ref()
                        .ok_or_else(|| Error::MissingInput("hr-pipeline needs a model".into()))?;
                    if p.upscale_ratio() != self.scale {
                        return Err(Error::ScaleMismatch {
                            model: p.upscale_ratio(),
                            requested: self.scale,
                        });
                    }
                }
                Method::Bicubic | Method::Identity => {}
            }
        }
        Ok(())
    }

    fn reconstruct(&self, method: Method, hr: &Plane, lr: &Plane) -> Result<Plane> {
        match method {
            Method::Espcn => {
                let model = self.espcn.as_ref().expect("checked");
                Ok(Plane::from_network_tensor(&model.forward_tiled(&lr.to_network_tensor(), LR_STRIP_ROWS)?))
            }
            Method::Bicubic => bicubic_upscale(lr, self.scale),
            Method::HrPipeline => self.hr_pipeline.as_ref().expect("checked").upscale(lr),
            Method::Identity => Ok(hr.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub image: String,
    pub method: Method,
    pub scale: usize,
    pub psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub method: Method,
    pub baseline: Method,
    /// Per-image `psnr(method) - psnr(baseline)`.
    pub diffs: Vec<f64>,
    /// `Err` holds the reason no test could be run.
    pub test: std::result::Result<TTest, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub scale: usize,
    pub methods: Vec<Method>,
    pub rows: Vec<EvalRow>,
    pub comparisons: Vec<Comparison>,
}

impl EvalReport {
    pub fn psnrs(&self, method: Method) -> Vec<f64> {
        self.rows.iter().filter(|r| r.method == method).map(|r| r.psnr_db).collect()
    }

    pub fn mean(&self, method: Method) -> Option<f64> {
        let v = self.psnrs(method);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn comparison(&self, method: Method, baseline: Method) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.method == method && c.baseline == baseline)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,method,scale,psnr_db\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.image, r.method, r.scale, fmt_db(r.psnr_db));
        }
        out.push('\n');
        out.push_str("method,images,mean_psnr_db\n");
        for &m in &self.methods {
            let n = self.psnrs(m).len();
            let _ = writeln!(out, "{m},{n},{}", fmt_db(self.mean(m).unwrap_or(f64::NAN)));
        }
        if !self.comparisons.is_empty() {
            out.push('\n');
            out.push_str("comparison,mean_diff_db,t,p_value,note\n");
            for c in &self.comparisons {
                let mean = c.diffs.iter().sum::<f64>() / c.diffs.len().max(1) as f64;
                let label = format!("{}-vs-{}", c.method, c.baseline);
                match &c.test {
                    Ok(t) => {
                        let _ = writeln!(out, "{label},{},{:.6},{:.6e},", fmt_db(mean), t.t, t.p);
                    }
                    Err(why) => {
                        let _ = writeln!(out, "{label},{},,,{why}", fmt_db(mean));
                    }
                }
            }
        }
        out
    }
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.6}")
    }
}

/// Scores in-memory HR luminance planes. Each is modcropped, degraded,
/// reconstructed by every method and scored with the configured shave.
pub fn evaluate_planes(images: &[(String, Plane)], setup: &EvalSetup, methods: &[Method]) -> Result<EvalReport> {
    setup.check(methods)?;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let mut rows = Vec::new();
    for (name, plane) in images {
        let hr = modcrop(plane, setup.scale)?;
        let lr = gaussian_degrade(&hr, setup.scale, setup.sigma)?;
        for &method in &methods {
            let sr = setup.reconstruct(method, &hr, &lr)?;
            rows.push(EvalRow {
                image: name.clone(),
                method,
                scale: setup.scale,
                psnr_db: psnr(&sr, &hr, setup.shave)?,
            });
        }
    }
    let mut report = EvalReport {
        scale: setup.scale,
        methods: methods.clone(),
        rows,
        comparisons: Vec::new(),
    };
    if methods.contains(&Method::Bicubic) {
        for &m in methods.iter().filter(|&&m| m != Method::Bicubic) {
            let diffs: Vec<f64> = report
                .psnrs(m)
                .iter()
                .zip(report.psnrs(Method::Bicubic))
                .map(|(a, b)| a - b)
                .collect();
            let test = paired_t_test(&diffs).map_err(|e| e.to_string());
            report.comparisons.push(Comparison {
                method: m,
                baseline: Method::Bicubic,
                diffs,
                test,
            });
        }
    }
    Ok(report)
}

/// [`evaluate_planes`] over every decodable image in `dir`, in file-name order.
pub fn evaluate_dataset(dir: &Path, setup: &EvalSetup, methods: &[Method]) -> Result<EvalReport> {
    setup.check(methods)?;
    let paths = list_images(dir)?;
    if paths.is_empty() {
        return Err(Error::EmptyDirectory(dir.to_path_buf()));
    }
    let mut images = Vec::with_capacity(paths.len());
    for p in paths {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        images.push((name, load_luma(&p)?));
    }
    evaluate_planes(&images, setup, methods)
}
