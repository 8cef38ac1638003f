//! Depth accuracy metrics and model evaluation.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{colorize, write_image, DatasetSample, SyntheticScene};
use crate::geometry::{disparity_to_depth, DisparityMap, ImagePlane, StereoCalibration};
use crate::networks::{NetworkBundle, Spectrum};
use crate::{Error, Result};

/// Ground-truth depths outside this range are ignored and predictions are
/// clamped into it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub min_m: f64,
    pub max_m: f64,
}

impl Default for DepthRange {
    fn default() -> Self {
        Self { min_m: 0.1, max_m: 80.0 }
    }
}

impl DepthRange {
    pub fn new(min_m: f64, max_m: f64) -> Result<Self> {
        let r = Self { min_m, max_m };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_m > 0.0 && self.min_m < self.max_m && self.max_m.is_finite()) {
            return Err(Error::Config(format!(
                "depth range needs 0 < min < max, got [{}, {}]",
                self.min_m, self.max_m
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub valid_pixels: usize,
    pub num_images: usize,
}

impl MetricsReport {
    /// The seven accuracy values in table order.
    pub fn values(&self) -> [f64; 7] {
        [
            self.abs_rel,
            self.sq_rel,
            self.rmse,
            self.rmse_log,
            self.delta1,
            self.delta2,
            self.delta3,
        ]
    }

    /// Unweighted mean of per-image reports; pixel and image counts add up.
    pub fn mean(reports: &[MetricsReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::NoValidPixels);
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            abs_rel: avg(|r| r.abs_rel),
            sq_rel: avg(|r| r.sq_rel),
            rmse: avg(|r| r.rmse),
            rmse_log: avg(|r| r.rmse_log),
            delta1: avg(|r| r.delta1),
            delta2: avg(|r| r.delta2),
            delta3: avg(|r| r.delta3),
            valid_pixels: reports.iter().map(|r| r.valid_pixels).sum(),
            num_images: reports.iter().map(|r| r.num_images).sum(),
        })
    }

    pub fn table_header() -> &'static str {
        "   abs_rel |    sq_rel |      rmse |  rmse_log |        a1 |        a2 |        a3"
    }

    pub fn table_row(&self) -> String {
        self.values().iter().map(|v| format!("{v:10.4}")).collect::<Vec<_>>().join(" |")
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::table_header())?;
        write!(f, "{}", self.table_row())
    }
}

/// Standard depth metrics over pixels whose ground truth lies in `range`.
/// Predictions are clamped into `range`; no rescaling is applied.
pub fn compute_depth_metrics(pred: &ImagePlane, gt: &ImagePlane, range: DepthRange) -> Result<MetricsReport> {
    range.validate()?;
    if pred.dims() != gt.dims() || pred.channels() != 1 {
        return Err(Error::contract(
            "compute_depth_metrics",
            format!("need two 1-channel maps of one size, got {:?} and {:?}", pred.dims(), gt.dims()),
        ));
    }
    let mut sums = [0.0; 7];
    let mut count = 0usize;
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if !(g >= range.min_m && g <= range.max_m) {
            continue;
        }
        let p = p.clamp(range.min_m, range.max_m);
        let diff = p - g;
        let ratio = (p / g).max(g / p);
        sums[0] += diff.abs() / g;
        sums[1] += diff * diff / g;
        sums[2] += diff * diff;
        sums[3] += (p.ln() - g.ln()).powi(2);
        sums[4] += f64::from(u8::from(ratio < 1.25));
        sums[5] += f64::from(u8::from(ratio < 1.25f64.powi(2)));
        sums[6] += f64::from(u8::from(ratio < 1.25f64.powi(3)));
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoValidPixels);
    }
    let n = count as f64;
    Ok(MetricsReport {
        abs_rel: sums[0] / n,
        sq_rel: sums[1] / n,
        rmse: (sums[2] / n).sqrt(),
        rmse_log: (sums[3] / n).sqrt(),
        delta1: sums[4] / n,
        delta2: sums[5] / n,
        delta3: sums[6] / n,
        valid_pixels: count,
        num_images: 1,
    })
}

/// Mean relative disparity error over pixels with positive ground truth.
pub fn disparity_abs_rel(pred: &DisparityMap, gt: &DisparityMap) -> Result<f64> {
    if pred.plane().dims() != gt.plane().dims() {
        return Err(Error::contract("disparity_abs_rel", "shape mismatch"));
    }
    let (sum, n) = pred
        .plane()
        .data()
        .iter()
        .zip(gt.plane().data())
        .filter(|(_, &g)| g > 0.0)
        .fold((0.0, 0usize), |(s, n), (p, g)| (s + (p - g).abs() / g, n + 1));
    if n == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(sum / n as f64)
}

/// Which images feed the depth network at evaluation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalView {
    /// Left thermal image through the thermal encoder.
    #[default]
    CrossSpectrum,
    /// Left visible image through the visible encoder; needs `vis_left`.
    Vis,
}

/// Finest-scale left disparity for one sample.
pub fn predict_left_disparity(bundle: &NetworkBundle, sample: &DatasetSample, view: EvalView) -> Result<DisparityMap> {
    match view {
        EvalView::CrossSpectrum => bundle.predict_disparity(Spectrum::Tir, &sample.tir_left),
        EvalView::Vis => {
            let vis = sample.vis_left.as_ref().ok_or_else(|| Error::Load {
                entry: sample.id.clone(),
                msg: "the vis view needs vis_left".into(),
            })?;
            bundle.predict_disparity(Spectrum::Vis, vis)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub metrics: MetricsReport,
    pub mean_disparity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub aggregate: MetricsReport,
    pub per_image: Vec<ImageRecord>,
}

impl EvaluationReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let json = serde_json::to_string_pretty(self).expect("report serialises");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions<'a> {
    pub range: DepthRange,
    pub view: EvalView,
    /// Writes one colour-mapped inverse-depth PNG per image here.
    pub dump_dir: Option<&'a Path>,
}

/// Evaluates any disparity predictor; images whose mask is empty are
/// skipped and an all-empty dataset is a [`Error::NoValidPixels`].
pub fn evaluate_with(
    samples: &[DatasetSample],
    calib: &StereoCalibration,
    opts: &EvalOptions<'_>,
    mut predict: impl FnMut(&DatasetSample) -> Result<DisparityMap>,
) -> Result<EvaluationReport> {
    opts.range.validate()?;
    let mut per_image = Vec::with_capacity(samples.len());
    for sample in samples {
        let gt = sample.depth.as_ref().ok_or_else(|| Error::Load {
            entry: sample.id.clone(),
            msg: "no ground-truth depth".into(),
        })?;
        let disparity = predict(sample)?;
        let pred = disparity_to_depth(&disparity, calib, disparity.width() as u32)?;
        if let Some(dir) = opts.dump_dir {
            let inverse = pred.map(|z| if z > 0.0 { 1.0 / z.max(opts.range.min_m) } else { 0.0 })?;
            write_image(&colorize(&inverse)?, &dir.join(format!("{}.png", sample.id)))?;
        }
        match compute_depth_metrics(&pred, gt, opts.range) {
            Ok(metrics) => per_image.push(ImageRecord {
                id: sample.id.clone(),
                metrics,
                mean_disparity: disparity.mean(),
            }),
            Err(Error::NoValidPixels) => continue,
            Err(e) => return Err(e),
        }
    }
    let aggregate = MetricsReport::mean(&per_image.iter().map(|r| r.metrics).collect::<Vec<_>>())?;
    Ok(EvaluationReport { aggregate, per_image })
}

/// Evaluates a trained bundle on samples carrying ground-truth depth.
pub fn evaluate_model(
    bundle: &NetworkBundle,
    samples: &[DatasetSample],
    calib: &StereoCalibration,
    opts: &EvalOptions<'_>,
) -> Result<EvaluationReport> {
    evaluate_with(samples, calib, opts, |s| predict_left_disparity(bundle, s, opts.view))
}

impl DatasetSample {
    /// Wraps an in-memory synthetic scene, ground-truth depth included.
    pub fn from_scene(id: impl Into<String>, scene: &SyntheticScene) -> Self {
        Self {
            id: id.into(),
            tir_left: scene.tir_left.clone(),
            vis_right: scene.vis_right.clone(),
            vis_left: Some(scene.vis_left.clone()),
            tir_right: Some(scene.tir_right.clone()),
            depth: Some(scene.depth_left.clone()),
            native_width: scene.vis_left.width(),
        }
    }
}
