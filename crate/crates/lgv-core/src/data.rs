//! Deterministic synthetic datasets and IDX payload parsing.
//!
//! Generators produce a [`Dataset`] with disjoint train/validation/test
//! splits, exactly balanced class counts per split, and all inputs inside
//! `[0, 1]^d`. Regeneration from the same `(generator, seed, sizes)` is
//! bit-identical.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::model::{Batch, Matrix, Model};
use crate::rng;

/// Which generator produced a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Blobs,
    Spirals,
    IdxFile,
}

/// Train/validation/test splits plus provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Batch,
    pub val: Batch,
    pub test: Batch,
    pub generator: Generator,
    pub seed: u64,
}

impl Dataset {
    pub fn class_count(&self) -> usize {
        self.train.labels().iter().max().map_or(0, |m| m + 1)
    }

    pub fn input_dim(&self) -> usize {
        self.train.input_dim()
    }
}

/// Per-split example counts, per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
}

impl SplitSizes {
    pub fn new(train_per_class: usize, val_per_class: usize, test_per_class: usize) -> Self {
        SplitSizes {
            train_per_class,
            val_per_class,
            test_per_class,
        }
    }

    fn total_per_class(&self) -> usize {
        self.train_per_class + self.val_per_class + self.test_per_class
    }
}

/// Rescale every column of the pooled inputs into `[0, 1]` (min-max over
/// all splits jointly, so the three splits share one map). Columns with no
/// spread collapse to 0.5.
fn rescale_unit_box(inputs: &mut Matrix) {
    let (rows, cols) = (inputs.rows(), inputs.cols());
    for c in 0..cols {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..rows {
            let v = inputs.get(r, c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        for r in 0..rows {
            let v = inputs.get(r, c);
            let scaled = if range > 1e-12 { (v - lo) / range } else { 0.5 };
            inputs.set(r, c, scaled);
        }
    }
}

/// Split a pooled per-class sample block into the three batches. Points for
/// each class are generated contiguously; the first `train_per_class` go to
/// train, the next to val, the rest to test, which keeps splits disjoint by
/// construction.
fn split(inputs: Matrix, labels: Vec<usize>, classes: usize, sizes: SplitSizes) -> (Batch, Batch, Batch) {
    let per_class = sizes.total_per_class();
    let d = inputs.cols();
    let mut parts: Vec<(Matrix, Vec<usize>)> = [
        sizes.train_per_class,
        sizes.val_per_class,
        sizes.test_per_class,
    ]
    .iter()
    .map(|&n| (Matrix::zeros(n * classes, d), Vec::with_capacity(n * classes)))
    .collect();

    for class in 0..classes {
        let base = class * per_class;
        let mut cursor = 0;
        for (part, &n) in parts.iter_mut().zip(&[
            sizes.train_per_class,
            sizes.val_per_class,
            sizes.test_per_class,
        ]) {
            for i in 0..n {
                let src = base + cursor + i;
                let dst = part.1.len();
                part.0.row_mut(dst).copy_from_slice(inputs.row(src));
                part.1.push(labels[src]);
            }
            cursor += n;
        }
    }

    let mut out = parts.into_iter().map(|(m, l)| Batch::new(m, l).unwrap());
    (
        out.next().unwrap(),
        out.next().unwrap(),
        out.next().unwrap(),
    )
}

/// Gaussian blobs around deterministic simplex-vertex centers, rescaled
/// into `[0, 1]^dim`.
///
/// Centers sit on scaled standard-basis vectors (a seeded permutation picks
/// which axes), spaced so their pairwise distance is at least `4 * spread`;
/// each class contributes `n_per_class` points per split drawn i.i.d.
/// `N(center, spread^2 I)`.
pub fn make_blobs(
    classes: usize,
    dim: usize,
    sizes: SplitSizes,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(invalid("blobs need at least 2 classes"));
    }
    if dim < 2 {
        return Err(invalid("blobs need dim >= 2"));
    }
    if dim < classes {
        return Err(invalid("blobs need dim >= classes (one simplex axis per class)"));
    }
    if !(spread > 0.0) {
        return Err(invalid("spread must be > 0"));
    }
    if sizes.total_per_class() == 0 {
        return Err(invalid("at least one example per class required"));
    }

    let mut r = rng::rng_from(seed);

    // pairwise center distance is scale * sqrt(2); keep it >= 4 * spread
    let scale = (4.0 * spread / core::f64::consts::SQRT_2).max(1.0);
    let mut axes: Vec<usize> = (0..dim).collect();
    rand::seq::SliceRandom::shuffle(&mut axes[..], &mut r);

    let per_class = sizes.total_per_class();
    let total = per_class * classes;
    let mut inputs = Matrix::zeros(total, dim);
    let mut labels = Vec::with_capacity(total);
    for class in 0..classes {
        let axis = axes[class];
        for i in 0..per_class {
            let row = class * per_class + i;
            for c in 0..dim {
                let noise: f64 = r.sample(StandardNormal);
                let center = if c == axis { scale } else { 0.0 };
                inputs.set(row, c, center + spread * noise);
            }
            labels.push(class);
        }
    }

    rescale_unit_box(&mut inputs);
    let (train, val, test) = split(inputs, labels, classes, sizes);
    Ok(Dataset {
        train,
        val,
        test,
        generator: Generator::Blobs,
        seed,
    })
}

/// Interleaved Archimedean spiral arms in `[0, 1]^2`.
///
/// Arm `c` follows `r(t) = r0 + (r1 - r0) t`, `theta(t) = sweep * t + 2 pi
/// c / classes` for `t` drawn uniformly; the radius is strictly increasing
/// so arms of different phases never intersect at `noise = 0`.
pub fn make_spirals(classes: usize, sizes: SplitSizes, noise: f64, seed: u64) -> Result<Dataset> {
    if !(classes == 2 || classes == 3) {
        return Err(invalid("spirals support 2 or 3 classes"));
    }
    if noise < 0.0 {
        return Err(invalid("noise must be >= 0"));
    }
    if sizes.total_per_class() == 0 {
        return Err(invalid("at least one example per class required"));
    }

    let mut r = rng::rng_from(seed);
    let (r0, r1) = (0.25, 2.0);
    let sweep = 3.5 * core::f64::consts::PI;

    let per_class = sizes.total_per_class();
    let total = per_class * classes;
    let mut inputs = Matrix::zeros(total, 2);
    let mut labels = Vec::with_capacity(total);
    for class in 0..classes {
        let phase = 2.0 * core::f64::consts::PI * class as f64 / classes as f64;
        for i in 0..per_class {
            let row = class * per_class + i;
            let t: f64 = r.random_range(0.0..1.0);
            let radius = r0 + (r1 - r0) * t;
            let theta = sweep * t + phase;
            let nx: f64 = r.sample(StandardNormal);
            let ny: f64 = r.sample(StandardNormal);
            inputs.set(row, 0, radius * libm::cos(theta) + noise * nx);
            inputs.set(row, 1, radius * libm::sin(theta) + noise * ny);
            labels.push(class);
        }
    }

    rescale_unit_box(&mut inputs);
    let (train, val, test) = split(inputs, labels, classes, sizes);
    Ok(Dataset {
        train,
        val,
        test,
        generator: Generator::Spirals,
        seed,
    })
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Format(alloc::format!("truncated IDX data reading {what}")));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an IDX image payload (magic 0x00000803, big-endian dims) into a
/// flattened `n x (rows*cols)` matrix with pixels scaled into `[0, 1]`
/// (255 maps to exactly 1.0).
pub fn parse_idx_images(bytes: &[u8]) -> Result<Matrix> {
    let magic = read_u32_be(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(alloc::format!(
            "bad IDX image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(bytes, 4, "image count")? as usize;
    let rows = read_u32_be(bytes, 8, "row count")? as usize;
    let cols = read_u32_be(bytes, 12, "column count")? as usize;
    let pixels = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format(String::from("IDX image dimensions overflow")))?;
    let body = &bytes[16.min(bytes.len())..];
    if body.len() != pixels {
        return Err(Error::Format(alloc::format!(
            "IDX image payload has {} bytes, header promises {pixels}",
            body.len()
        )));
    }
    let data = body.iter().map(|&b| b as f64 / 255.0).collect();
    Matrix::from_vec(n, rows * cols, data)
}

/// Parse an IDX label payload (magic 0x00000801).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32_be(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(alloc::format!(
            "bad IDX label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(bytes, 4, "label count")? as usize;
    let body = &bytes[8.min(bytes.len())..];
    if body.len() != n {
        return Err(Error::Format(alloc::format!(
            "IDX label payload has {} bytes, header promises {n}",
            body.len()
        )));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

/// Combine parsed IDX images and labels into a batch, checking alignment.
pub fn idx_batch(images: Matrix, labels: Vec<usize>) -> Result<Batch> {
    if images.rows() != labels.len() {
        return Err(Error::Format(alloc::format!(
            "{} images but {} labels",
            images.rows(),
            labels.len()
        )));
    }
    Batch::new(images, labels)
}

/// Encode a batch back into IDX payloads (`rows x cols` image geometry).
/// Mostly useful for tests and for writing small fixture files.
pub fn encode_idx(batch: &Batch, rows: usize, cols: usize) -> Result<(Vec<u8>, Vec<u8>)> {
    if rows * cols != batch.input_dim() {
        return Err(invalid("image geometry does not match input dimension"));
    }
    let n = batch.len();
    let mut images = Vec::with_capacity(16 + n * rows * cols);
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(n as u32).to_be_bytes());
    images.extend_from_slice(&(rows as u32).to_be_bytes());
    images.extend_from_slice(&(cols as u32).to_be_bytes());
    for v in batch.inputs().as_slice() {
        images.push(libm::round(v * 255.0).clamp(0.0, 255.0) as u8);
    }
    let mut labels = Vec::with_capacity(8 + n);
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(n as u32).to_be_bytes());
    for &y in batch.labels() {
        labels.push(y as u8);
    }
    Ok((images, labels))
}

/// Random subset of `n` examples that every target classifies correctly,
/// deterministic per seed. Fails with the available count when fewer than
/// `n` examples survive the filter.
pub fn select_correct(targets: &[Model], b: &Batch, n: usize, seed: u64) -> Result<Batch> {
    if targets.is_empty() {
        return Err(invalid("select_correct needs at least one target"));
    }
    let mut correct: Vec<usize> = Vec::new();
    'rows: for (i, (x, &y)) in b.inputs().iter_rows().zip(b.labels()).enumerate() {
        for t in targets {
            if t.predict(x)? != y {
                continue 'rows;
            }
        }
        correct.push(i);
    }
    if correct.len() < n {
        return Err(Error::InsufficientExamples {
            requested: n,
            available: correct.len(),
        });
    }
    let mut r = rng::rng_from(seed);
    rand::seq::SliceRandom::shuffle(&mut correct[..], &mut r);
    let mut chosen = correct[..n].to_vec();
    chosen.sort_unstable();
    b.select(&chosen)
}
