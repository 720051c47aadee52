//! CIFAR-10 binary batches and per-channel colour histograms.
//!
//! Binary records are 3073 bytes: one label byte followed by the 1024 red,
//! 1024 green and 1024 blue pixel values of a 32×32 image.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

pub const CIFAR_RECORD_LEN: usize = 3073;
pub const CIFAR_PIXELS: usize = 1024;
pub const DEFAULT_BINS: usize = 40;

pub const CIFAR_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CifarImage {
    pub label: u8,
    /// R, G, B planes of 1024 bytes each.
    pub pixels: Vec<u8>,
}

impl CifarImage {
    pub fn channel(&self, c: usize) -> &[u8] {
        &self.pixels[c * CIFAR_PIXELS..(c + 1) * CIFAR_PIXELS]
    }
}

pub fn parse_cifar_batch(bytes: &[u8]) -> Result<Vec<CifarImage>> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        let offset = bytes.len() - bytes.len() % CIFAR_RECORD_LEN;
        return Err(Error::Format {
            offset,
            message: format!(
                "truncated record: {} trailing bytes, records are {CIFAR_RECORD_LEN} bytes",
                bytes.len() - offset
            ),
        });
    }
    bytes
        .chunks_exact(CIFAR_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            if rec[0] > 9 {
                return Err(Error::Format {
                    offset: i * CIFAR_RECORD_LEN,
                    message: format!("label {} out of range 0..=9", rec[0]),
                });
            }
            Ok(CifarImage {
                label: rec[0],
                pixels: rec[1..].to_vec(),
            })
        })
        .collect()
}

/// Reads and concatenates the named batch files (e.g. `data_batch_1.bin`) from `dir`.
pub fn load_cifar_files(dir: &Path, names: &[String]) -> Result<Vec<CifarImage>> {
    let mut out = Vec::new();
    for name in names {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        out.extend(parse_cifar_batch(&bytes)?);
    }
    Ok(out)
}

/// Normalized per-channel histograms, `3 × bins` values, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramFeatures {
    pub values: Vec<f64>,
}

impl HistogramFeatures {
    pub fn bins(&self) -> usize {
        self.values.len() / 3
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let b = self.bins();
        &self.values[c * b..(c + 1) * b]
    }
}

/// Pixel value `v` lands in bin `floor(v * bins / 256)`; counts are divided by
/// the 1024 pixels per channel.
pub fn featurize(img: &CifarImage, bins: usize) -> HistogramFeatures {
    assert!((1..=256).contains(&bins), "bins must be in 1..=256");
    let mut values = vec![0.0; 3 * bins];
    for c in 0..3 {
        let mut counts = vec![0u32; bins];
        for &v in img.channel(c) {
            counts[v as usize * bins / 256] += 1;
        }
        for (b, n) in counts.into_iter().enumerate() {
            values[c * bins + b] = f64::from(n) / CIFAR_PIXELS as f64;
        }
    }
    HistogramFeatures { values }
}

/// Two-class dataset: label `class_a` → target 0, `class_b` → target 1.
/// The holdout is drawn per class (stratified), then each split is shuffled.
pub fn make_pair_dataset(
    images: &[CifarImage],
    class_a: u8,
    class_b: u8,
    holdout_fraction: f64,
    bins: usize,
    rng: &mut Rng,
) -> Result<(Dataset<f64>, Dataset<f64>)> {
    if class_a == class_b {
        return Err(Error::invalid("pair classes must differ"));
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::invalid(format!(
            "holdout fraction {holdout_fraction} outside [0, 1)"
        )));
    }
    let mut train_idx = Vec::new();
    let mut hold_idx = Vec::new();
    for class in [class_a, class_b] {
        let mut idx: Vec<usize> = images
            .iter()
            .enumerate()
            .filter(|(_, im)| im.label == class)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(Error::invalid(format!(
                "class {class} not present in input"
            )));
        }
        rng.shuffle(&mut idx);
        let n_hold = (idx.len() as f64 * holdout_fraction).round() as usize;
        hold_idx.extend_from_slice(&idx[..n_hold]);
        train_idx.extend_from_slice(&idx[n_hold..]);
    }
    rng.shuffle(&mut train_idx);
    rng.shuffle(&mut hold_idx);

    let build = |idx: &[usize], split: Split| -> Result<Dataset<f64>> {
        let feats: Vec<HistogramFeatures> = idx
            .par_iter()
            .map(|&i| featurize(&images[i], bins))
            .collect();
        let mut x = Vec::with_capacity(idx.len() * 3 * bins);
        for f in &feats {
            x.extend_from_slice(&f.values);
        }
        let y = idx
            .iter()
            .map(|&i| if images[i].label == class_a { 0.0 } else { 1.0 })
            .collect();
        Dataset::new(
            Matrix::from_vec(idx.len(), 3 * bins, x)?,
            Matrix::from_vec(idx.len(), 1, y)?,
            split,
        )
    };
    Ok((
        build(&train_idx, Split::Train)?,
        build(&hold_idx, Split::Holdout)?,
    ))
}

const CACHE_MAGIC: &[u8; 8] = b"SANNHIST";
const CACHE_VERSION: u32 = 1;

/// Binary feature cache: magic, version, record count and bin count as
/// little-endian `u32`, then per record a label byte and `3 × bins` LE `f64`s.
pub fn write_feature_cache(path: &Path, records: &[(u8, HistogramFeatures)]) -> Result<()> {
    let bins = records.first().map_or(DEFAULT_BINS, |(_, f)| f.bins());
    let mut buf = Vec::with_capacity(16 + records.len() * (1 + 24 * bins));
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(bins as u32).to_le_bytes());
    for (label, f) in records {
        if f.values.len() != 3 * bins {
            return Err(Error::invalid(
                "all cached records must share one bin count",
            ));
        }
        buf.push(*label);
        for v in &f.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_feature_cache(path: &Path) -> Result<Vec<(u8, HistogramFeatures)>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let fmt = |offset, message: &str| Error::Format {
        offset,
        message: message.to_string(),
    };
    if bytes.len() < 20 || &bytes[..8] != CACHE_MAGIC {
        return Err(fmt(0, "not a histogram feature cache"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    if u32_at(8) != CACHE_VERSION {
        return Err(fmt(8, "unsupported cache version"));
    }
    let count = u32_at(12) as usize;
    let bins = u32_at(16) as usize;
    let rec_len = 1 + 24 * bins;
    if bytes.len() != 20 + count * rec_len {
        return Err(fmt(20, "record section length does not match header"));
    }
    Ok(bytes[20..]
        .chunks_exact(rec_len)
        .map(|rec| {
            let values = rec[1..]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            (rec[0], HistogramFeatures { values })
        })
        .collect())
}
