//! Datasets, membership splits, and the synthetic generators used by the
//! experiments.
//!
//! A [`Sample`] is a feature vector plus an integer class label. Membership
//! of each sample in the training set is described by a [`SplitSpec`]: a
//! boolean mask together with the prior probability `lambda` that any one
//! bit is set. Everything here is a pure function of its arguments and the
//! seed.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// One data point: a feature vector and a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Sample { features, label }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// An ordered collection of samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_classes: usize,
}

impl Dataset {
    /// Build a dataset, validating that it is nonempty, that all samples
    /// share one dimension, and that labels are below `num_classes`.
    pub fn new(samples: Vec<Sample>, num_classes: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("dataset must be nonempty".into()));
        }
        if num_classes == 0 {
            return Err(Error::Data("num_classes must be >= 1".into()));
        }
        let d = samples[0].dim();
        for (i, s) in samples.iter().enumerate() {
            if s.dim() != d {
                return Err(Error::Data(format!(
                    "sample {i} has dimension {} but the dataset has dimension {d}",
                    s.dim()
                )));
            }
            if s.label >= num_classes {
                return Err(Error::Data(format!(
                    "sample {i} has label {} but num_classes is {num_classes}",
                    s.label
                )));
            }
            if !s.features.iter().all(|x| x.is_finite()) {
                return Err(Error::Data(format!("sample {i} has non-finite features")));
            }
        }
        Ok(Dataset {
            samples,
            num_classes,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample(&self, index: usize) -> &Sample {
        &self.samples[index]
    }

    /// The contiguous sub-dataset `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Dataset> {
        if start >= end || end > self.len() {
            return Err(Error::Data(format!(
                "invalid slice [{start}, {end}) of dataset with {} samples",
                self.len()
            )));
        }
        Dataset::new(self.samples[start..end].to_vec(), self.num_classes)
    }
}

/// How membership masks are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Each bit is an independent Bernoulli(lambda) draw.
    Bernoulli,
    /// Exactly round(lambda * n) bits are set, chosen uniformly.
    Exact,
}

/// A train/held-out partition: membership mask plus the prior `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    mask: Vec<bool>,
    lambda: f64,
}

impl SplitSpec {
    pub fn new(mask: Vec<bool>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if mask.is_empty() {
            return Err(Error::Config("split mask must be nonempty".into()));
        }
        Ok(SplitSpec { mask, lambda })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn is_member(&self, index: usize) -> bool {
        self.mask[index]
    }

    /// Number of members, the n' that the closed forms take.
    pub fn member_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn member_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn non_member_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| !self.mask[i]).collect()
    }

    /// Compact "0101" encoding used by manifests.
    pub fn mask_string(&self) -> String {
        self.mask.iter().map(|&m| if m { '1' } else { '0' }).collect()
    }

    pub fn from_mask_string(s: &str, lambda: f64) -> Result<Self> {
        let mask: Result<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Data(format!("invalid mask character {other:?}"))),
            })
            .collect();
        SplitSpec::new(mask?, lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!(
            "lambda must lie strictly in (0, 1), got {lambda}"
        )));
    }
    Ok(())
}

/// Draw a Bernoulli(lambda) membership mask of length `n`.
///
/// Bit `i` is set when the i-th uniform draw is `< lambda`, so the mask is
/// a pure function of `(n, lambda, seed)`.
pub fn draw_split(n: usize, lambda: f64, seed: RngSeed) -> Result<SplitSpec> {
    check_lambda(lambda)?;
    if n < 2 {
        return Err(Error::Config(format!("split needs n >= 2, got {n}")));
    }
    let mut rng = seed.rng();
    let mask = (0..n).map(|_| rng.random::<f64>() < lambda).collect();
    SplitSpec::new(mask, lambda)
}

/// Draw a mask with exactly `round(lambda * n)` members, chosen uniformly.
///
/// The fixed-count variant of [`draw_split`], for experiments that pin the
/// training-set size instead of sampling it.
pub fn draw_split_exact(n: usize, lambda: f64, seed: RngSeed) -> Result<SplitSpec> {
    check_lambda(lambda)?;
    if n < 2 {
        return Err(Error::Config(format!("split needs n >= 2, got {n}")));
    }
    let k = (lambda * n as f64).round() as usize;
    let k = k.clamp(1, n - 1);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = seed.rng();
    // partial Fisher-Yates: the first k entries end up a uniform k-subset
    for i in 0..k {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    let mut mask = vec![false; n];
    for &i in &indices[..k] {
        mask[i] = true;
    }
    SplitSpec::new(mask, lambda)
}

/// Sample `n` points from a spherical unit-variance Gaussian centered at
/// `mu`. All labels are 0.
pub fn gen_gaussian_dataset(n: usize, d: usize, mu: &[f64], seed: RngSeed) -> Result<Dataset> {
    if mu.len() != d {
        return Err(Error::Config(format!(
            "mean has dimension {} but d = {d}",
            mu.len()
        )));
    }
    if n < 1 || d < 1 {
        return Err(Error::Config(format!("need n >= 1 and d >= 1, got n={n} d={d}")));
    }
    let mut rng = seed.rng();
    let samples = (0..n)
        .map(|_| {
            let features = mu
                .iter()
                .map(|&m| m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            Sample::new(features, 0)
        })
        .collect();
    Dataset::new(samples, 1)
}

/// Synthetic two-class features: class c is a unit Gaussian centered at
/// +-(separation/2) along the first axis. Labels alternate 0, 1, 0, 1, ...
/// so any prefix is class-balanced; `n` must be even.
pub fn gen_two_class_features(
    n: usize,
    d: usize,
    separation: f64,
    seed: RngSeed,
) -> Result<Dataset> {
    if n % 2 != 0 || n == 0 {
        return Err(Error::Config(format!(
            "two-class generation needs a positive even n, got {n}"
        )));
    }
    if d < 1 {
        return Err(Error::Config("need d >= 1".into()));
    }
    if !(separation >= 0.0) {
        return Err(Error::Config(format!(
            "separation must be >= 0, got {separation}"
        )));
    }
    let mut rng = seed.rng();
    let half = separation / 2.0;
    let samples = (0..n)
        .map(|i| {
            let label = i % 2;
            let center = if label == 0 { -half } else { half };
            let mut features: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            features[0] += center;
            Sample::new(features, label)
        })
        .collect();
    Dataset::new(samples, 2)
}

// ---------------------------------------------------------------------------
// Dataset file format: CSV with header f0..f{d-1},label
// ---------------------------------------------------------------------------

/// Format a float with 17 significant digits, enough for exact round-trip.
pub(crate) fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a dataset in the text table format: one row per sample, feature
/// columns `f0..f{d-1}` then a `label` column, header mandatory.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let d = data.dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    writer
        .write_record(&header)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    for s in data.samples() {
        let mut row: Vec<String> = s.features.iter().map(|&x| format_float(x)).collect();
        row.push(s.label.to_string());
        writer
            .write_record(&row)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Read a dataset written by [`write_dataset_csv`].
///
/// The number of classes is inferred as `max(label) + 1`.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader
        .headers()
        .map_err(|e| Error::format(&display, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().last() != Some("label") {
        return Err(Error::format(&display, "last column must be `label`"));
    }
    let d = header.len() - 1;
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::format(
                &display,
                format!("expected feature column f{j}, found {name:?}"),
            ));
        }
    }
    let mut samples = Vec::new();
    let mut max_label = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&display, e.to_string()))?;
        if record.len() != d + 1 {
            return Err(Error::format(
                &display,
                format!("row {i} has {} fields, expected {}", record.len(), d + 1),
            ));
        }
        let features: std::result::Result<Vec<f64>, _> =
            record.iter().take(d).map(|v| v.parse::<f64>()).collect();
        let features =
            features.map_err(|e| Error::format(&display, format!("row {i}: {e}")))?;
        let label: usize = record[d]
            .parse()
            .map_err(|e| Error::format(&display, format!("row {i} label: {e}")))?;
        max_label = max_label.max(label);
        samples.push(Sample::new(features, label));
    }
    Dataset::new(samples, max_label + 1)
}
