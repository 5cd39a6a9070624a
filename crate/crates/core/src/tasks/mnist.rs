//! Loader for the MNIST IDX binary format.
//!
//! Images file: magic `0x00000803`, then count, rows, cols as
//! big-endian u32, then row-major unsigned bytes. Labels file: magic
//! `0x00000801`, then count, then one unsigned byte per label.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Dataset, Split};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw IDX image records as flat byte rows.
pub fn read_idx_images<R: Read>(mut r: R) -> Result<Vec<Vec<u8>>> {
    let magic = r.read_u32::<BigEndian>()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::IdxFormat(format!(
            "bad images magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = r.read_u32::<BigEndian>()? as usize;
    let rows = r.read_u32::<BigEndian>()? as usize;
    let cols = r.read_u32::<BigEndian>()? as usize;
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pixels = vec![0u8; rows * cols];
        r.read_exact(&mut pixels)?;
        images.push(pixels);
    }
    Ok(images)
}

pub fn read_idx_labels<R: Read>(mut r: R) -> Result<Vec<u8>> {
    let magic = r.read_u32::<BigEndian>()?;
    if magic != LABELS_MAGIC {
        return Err(Error::IdxFormat(format!(
            "bad labels magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = r.read_u32::<BigEndian>()? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels)?;
    Ok(labels)
}

/// Load a class-balanced subset: after a seeded shuffle of the example
/// order, take the first `per_class` examples of each listed class.
/// Pixels are scaled to `[0, 1]`.
pub fn load_mnist_subset(
    images_path: &Path,
    labels_path: &Path,
    classes: &[u8],
    per_class: usize,
    seed: u64,
) -> Result<Dataset> {
    let images = read_idx_images(BufReader::new(File::open(images_path)?))?;
    let labels = read_idx_labels(BufReader::new(File::open(labels_path)?))?;
    if images.len() != labels.len() {
        return Err(Error::IdxFormat(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut features = Vec::with_capacity(classes.len() * per_class);
    let mut out_labels = Vec::with_capacity(classes.len() * per_class);
    for &class in classes {
        let mut taken = 0;
        for &idx in &order {
            if labels[idx] != class {
                continue;
            }
            features.push(images[idx].iter().map(|&b| b as f64 / 255.0).collect());
            out_labels.push(class);
            taken += 1;
            if taken == per_class {
                break;
            }
        }
        if taken < per_class {
            return Err(Error::InsufficientData {
                class,
                needed: per_class,
                found: taken,
            });
        }
    }
    Ok(Dataset {
        features,
        labels: out_labels,
        split: Split::Train,
    })
}
