//! Datasets, PGM images, PCA export and reconstruction metrics.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qnn::{LabeledState, StateLoader};

pub const DIGIT_FEATURES: usize = 64;
pub const DIGIT_MAX_PIXEL: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Unit L2 norm.
    pub features: Vec<f64>,
    /// 0 for the first requested digit, 1 for the second.
    pub label: u8,
    pub digit: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub source: String,
    pub filter: String,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn states(&self, loader: StateLoader) -> Result<Vec<LabeledState>> {
        self.samples
            .iter()
            .map(|s| {
                Ok(LabeledState {
                    state: loader.load(&s.features)?,
                    label: s.label,
                })
            })
            .collect()
    }
}

/// One raw row: 64 pixel values in `[0, 16]` and the digit.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitRow {
    pub pixels: Vec<f64>,
    pub digit: u8,
}

fn parse_integral(field: &str, line: usize, lo: f64, hi: f64) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("`{field}` is not a number"),
    })?;
    if !v.is_finite() || v.fract() != 0.0 || v < lo || v > hi {
        return Err(Error::MalformedRow {
            line,
            reason: format!("`{field}` is not an integer in [{lo}, {hi}]"),
        });
    }
    Ok(v)
}

/// Reads the header-less digits CSV: 64 pixel columns then the label column.
pub fn read_digit_rows(path: &Path) -> Result<Vec<DigitRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record?;
        if record.len() != DIGIT_FEATURES + 1 {
            return Err(Error::MalformedRow {
                line,
                reason: format!(
                    "expected {} columns, found {}",
                    DIGIT_FEATURES + 1,
                    record.len()
                ),
            });
        }
        let pixels = record
            .iter()
            .take(DIGIT_FEATURES)
            .map(|f| parse_integral(f, line, 0.0, DIGIT_MAX_PIXEL))
            .collect::<Result<Vec<_>>>()?;
        let digit = parse_integral(&record[DIGIT_FEATURES], line, 0.0, 9.0)? as u8;
        rows.push(DigitRow { pixels, digit });
    }
    Ok(rows)
}

pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(values.iter().map(|v| v / norm).collect())
}

/// Keeps `digit_a` (label 0) and `digit_b` (label 1), normalizes, shuffles
/// with `seed` and puts `round(split_ratio · total)` samples in the
/// training set.
pub fn split_digits(
    rows: &[DigitRow],
    digit_a: u8,
    digit_b: u8,
    split_ratio: f64,
    seed: u64,
    source: &str,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if digit_a == digit_b {
        return Err(Error::InvalidParameter(format!(
            "digits must differ, got {digit_a} twice"
        )));
    }
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(Error::InvalidParameter(format!(
            "split ratio {split_ratio} outside [0, 1]"
        )));
    }
    let mut samples = Vec::new();
    for row in rows {
        let label = if row.digit == digit_a {
            0
        } else if row.digit == digit_b {
            1
        } else {
            continue;
        };
        samples.push(Sample {
            features: normalize(&row.pixels)?,
            label,
            digit: row.digit,
        });
    }
    for d in [digit_a, digit_b] {
        if !samples.iter().any(|s| s.digit == d) {
            return Err(Error::DigitAbsent(d));
        }
    }
    let n_train = (split_ratio * samples.len() as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit {
            ratio: split_ratio,
            side: "training",
        });
    }
    if n_train == samples.len() {
        return Err(Error::EmptySplit {
            ratio: split_ratio,
            side: "test",
        });
    }
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = samples.split_off(n_train);
    let filter = format!("digits {digit_a}->0, {digit_b}->1, ratio {split_ratio}, seed {seed}");
    Ok((
        LabeledDataset {
            samples,
            source: source.to_string(),
            filter: format!("{filter}, train"),
        },
        LabeledDataset {
            samples: test,
            source: source.to_string(),
            filter: format!("{filter}, test"),
        },
    ))
}

pub fn load_digits(
    path: &Path,
    digit_a: u8,
    digit_b: u8,
    split_ratio: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let rows = read_digit_rows(path)?;
    split_digits(
        &rows,
        digit_a,
        digit_b,
        split_ratio,
        seed,
        &path.display().to_string(),
    )
}

/// Grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if maxval == 0 {
            return Err(Error::MalformedPgm("maxval must be at least 1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if let Some(p) = pixels.iter().find(|&&p| p > maxval) {
            return Err(Error::MalformedPgm(format!(
                "pixel {p} exceeds maxval {maxval}"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            maxval,
            pixels,
        })
    }

    /// Linear min-max rescale of arbitrary values to `[0, maxval]`. A
    /// constant nonzero input maps to `maxval`, an all-zero one to 0.
    pub fn from_values_rescaled(
        width: usize,
        height: usize,
        values: &[f64],
        maxval: u16,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let m = f64::from(maxval);
        let pixels = values
            .iter()
            .map(|&v| {
                let t = if span > 0.0 {
                    (v - lo) / span
                } else if hi == 0.0 {
                    0.0
                } else {
                    1.0
                };
                (t * m).round().clamp(0.0, m) as u16
            })
            .collect();
        GrayImage::new(width, height, maxval, pixels)
    }

    /// Row-major pixel values.
    pub fn to_vector(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    /// Both sides must be powers of two so that the flattened vector has
    /// length `2^n`.
    pub fn check_encodable(&self) -> Result<usize> {
        if self.width == 0
            || self.height == 0
            || !self.width.is_power_of_two()
            || !self.height.is_power_of_two()
        {
            return Err(Error::ImageNotPowerOfTwo {
                width: self.width,
                height: self.height,
                padded_width: self.width.max(1).next_power_of_two(),
                padded_height: self.height.max(1).next_power_of_two(),
            });
        }
        Ok((self.width * self.height).trailing_zeros() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Plain,
    Raw,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .filter(|s| !s.is_empty())
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .token()
            .ok_or_else(|| Error::MalformedPgm(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::MalformedPgm(format!("bad {what} `{tok}`")))
    }
}

/// Parses a P2 or P5 image.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let format = match cur.token() {
        Some("P2") => PgmFormat::Plain,
        Some("P5") => PgmFormat::Raw,
        other => {
            return Err(Error::MalformedPgm(format!(
                "unsupported magic {:?}",
                other.unwrap_or("")
            )))
        }
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedPgm(format!(
            "maxval {maxval} outside 1..=65535"
        )));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedPgm("image too large".into()))?;
    let pixels = match format {
        PgmFormat::Plain => (0..count)
            .map(|_| {
                let v = cur.number("pixel")?;
                u16::try_from(v).map_err(|_| Error::MalformedPgm(format!("pixel {v} out of range")))
            })
            .collect::<Result<Vec<_>>>()?,
        PgmFormat::Raw => {
            // exactly one whitespace byte separates header and raster
            let start = cur.pos + 1;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            let raster = bytes.get(start..start + need).ok_or_else(|| {
                Error::MalformedPgm(format!("raster truncated: need {need} bytes"))
            })?;
            if wide {
                raster
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]))
                    .collect()
            } else {
                raster.iter().map(|&b| u16::from(b)).collect()
            }
        }
    };
    GrayImage::new(width, height, maxval as u16, pixels)
}

pub fn load_image(path: &Path) -> Result<GrayImage> {
    parse_pgm(&std::fs::read(path)?)
}

pub fn encode_pgm(image: &GrayImage, format: PgmFormat) -> Vec<u8> {
    let magic = match format {
        PgmFormat::Plain => "P2",
        PgmFormat::Raw => "P5",
    };
    let mut out = format!(
        "{magic}\n{} {}\n{}\n",
        image.width, image.height, image.maxval
    )
    .into_bytes();
    match format {
        PgmFormat::Plain => {
            for row in image.pixels.chunks(image.width.max(1)) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmFormat::Raw => {
            for &p in &image.pixels {
                if image.maxval > 255 {
                    out.extend_from_slice(&p.to_be_bytes());
                } else {
                    out.push(p as u8);
                }
            }
        }
    }
    out
}

pub fn save_image(path: &Path, image: &GrayImage, format: PgmFormat) -> Result<()> {
    std::fs::write(path, encode_pgm(image, format))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityMetrics {
    /// `|⟨x̂|x⟩|²` of the normalized vectors.
    pub state_fidelity: f64,
    /// `‖x/‖x‖ − x̂/‖x̂‖‖₂`
    pub l2_error: f64,
    /// dB against `peak`; infinite for identical inputs.
    pub psnr: f64,
}

/// Compares two raw vectors; `peak` is the largest representable value.
pub fn compare_vectors(
    original: &[f64],
    reconstructed: &[f64],
    peak: f64,
) -> Result<FidelityMetrics> {
    if original.len() != reconstructed.len() {
        return Err(Error::DimensionMismatch {
            expected: original.len(),
            actual: reconstructed.len(),
        });
    }
    if original.is_empty() {
        return Err(Error::EmptyInput);
    }
    let a = normalize(original)?;
    let b = normalize(reconstructed)?;
    let overlap: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let l2_error = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let mse = original
        .iter()
        .zip(reconstructed)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / original.len() as f64;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    };
    Ok(FidelityMetrics {
        state_fidelity: overlap * overlap,
        l2_error,
        psnr,
    })
}

/// Image comparison. The reconstruction is brought to the original's
/// `maxval` before the PSNR is taken.
pub fn fidelity_metrics(
    original: &GrayImage,
    reconstructed: &GrayImage,
) -> Result<FidelityMetrics> {
    if (original.width, original.height) != (reconstructed.width, reconstructed.height) {
        return Err(Error::DimensionMismatch {
            expected: original.pixels.len(),
            actual: reconstructed.pixels.len(),
        });
    }
    let scale = f64::from(original.maxval) / f64::from(reconstructed.maxval);
    let rec: Vec<f64> = reconstructed
        .to_vector()
        .iter()
        .map(|v| v * scale)
        .collect();
    compare_vectors(&original.to_vector(), &rec, f64::from(original.maxval))
}

/// Principal components of a sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal, ordered by decreasing eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Per-sample projections onto `components`.
    pub coordinates: Vec<Vec<f64>>,
}

pub const PCA_TOLERANCE: f64 = 1e-10;
const PCA_MAX_ITERATIONS: usize = 100_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

fn unit(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Top-`k` principal components by power iteration with deflation.
pub fn pca(samples: &[Vec<f64>], k: usize) -> Result<Pca> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "PCA needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let d = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    if k > d || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be in 1..={d}"
        )));
    }
    let m = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (a, v) in mean.iter_mut().zip(s) {
            *a += v / m;
        }
    }
    let centered: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(v, a)| v - a).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for s in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i][j] += s[i] * s[j] / (m - 1.0);
            }
        }
    }
    for i in 1..d {
        let (upper, lower) = cov.split_at_mut(i);
        for (j, row) in upper.iter().enumerate() {
            lower[0][j] = row[i];
        }
    }
    let mat_vec = |v: &[f64]| -> Vec<f64> { cov.iter().map(|row| dot(row, v)).collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &components);
        unit(&mut v);
        let mut lambda = 0.0;
        for _ in 0..PCA_MAX_ITERATIONS {
            let mut w = mat_vec(&v);
            orthogonalize(&mut w, &components);
            lambda = dot(&v, &w);
            let residual = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual < PCA_TOLERANCE * lambda.abs().max(1.0) {
                break;
            }
            if unit(&mut w) == 0.0 {
                // v spans the null space of the deflated matrix
                break;
            }
            v = w;
        }
        // Sign convention: largest-magnitude entry positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        // re-orthogonalize against accumulated round-off
        orthogonalize(&mut v, &components);
        unit(&mut v);
        components.push(v);
        eigenvalues.push(lambda.max(0.0));
    }
    let coordinates = centered
        .iter()
        .map(|s| {
            components
                .iter()
                .zip(&eigenvalues)
                .map(|(c, &l)| if l > PCA_TOLERANCE { dot(s, c) } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(Pca {
        mean,
        components,
        eigenvalues,
        coordinates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coordinates: Vec<Vec<f64>>,
    pub true_labels: Vec<u8>,
    pub predicted_labels: Vec<u8>,
}

/// PCA coordinates of the dataset together with true and predicted labels.
pub fn pca_embed(dataset: &LabeledDataset, k: usize, predicted: &[u8]) -> Result<Embedding> {
    if predicted.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            actual: predicted.len(),
        });
    }
    let p = pca(&dataset.features(), k)?;
    Ok(Embedding {
        coordinates: p.coordinates,
        true_labels: dataset.labels(),
        predicted_labels: predicted.to_vec(),
    })
}

impl Embedding {
    /// Columns `x, y, true_label, predicted_label` for two components,
    /// `pc1 … pck, true_label, predicted_label` otherwise.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let k = self.coordinates.first().map_or(0, Vec::len);
        let mut header: Vec<String> = if k == 2 {
            vec!["x".into(), "y".into()]
        } else {
            (1..=k).map(|i| format!("pc{i}")).collect()
        };
        header.push("true_label".into());
        header.push("predicted_label".into());
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&header)?;
        for ((c, t), p) in self
            .coordinates
            .iter()
            .zip(&self.true_labels)
            .zip(&self.predicted_labels)
        {
            let mut rec: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            rec.push(t.to_string());
            rec.push(p.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
