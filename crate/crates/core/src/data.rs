//! Dataset generation, client partitioning, and IDX file ingestion.

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::shuffle;

/// One labeled example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// One client's local dataset.
#[derive(Debug, Clone)]
pub struct Shard {
    pub client_id: usize,
    pub samples: Vec<Sample>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Class-conditional Gaussian blobs with unit noise.
///
/// Class means sit at pairwise distance `separation`: mean_c lies along
/// axis c scaled by separation/sqrt(2) for c < dim, and along a seeded
/// random unit direction for any surplus classes. Labels are assigned
/// round-robin (balanced within one) and the sample order is shuffled.
pub fn gen_synthetic(
    seed: u64,
    n: usize,
    dim: usize,
    classes: usize,
    separation: f64,
) -> Result<Vec<Sample>> {
    if dim < 1 {
        return Err(Error::InvalidInput("dim must be >= 1".into()));
    }
    if classes < 1 {
        return Err(Error::InvalidInput("classes must be >= 1".into()));
    }
    if n < classes {
        return Err(Error::InvalidInput(format!("n={n} must be >= classes={classes}")));
    }
    if !(separation >= 0.0) {
        return Err(Error::InvalidInput("separation must be non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = separation / std::f64::consts::SQRT_2;
    let mut means = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut mean = vec![0.0; dim];
        if c < dim {
            mean[c] = radius;
        } else {
            let mut norm = 0.0;
            for m in mean.iter_mut() {
                *m = StandardNormal.sample(&mut rng);
                norm += *m * *m;
            }
            let norm = norm.sqrt().max(1e-12);
            mean.iter_mut().for_each(|m| *m *= radius / norm);
        }
        means.push(mean);
    }

    let noise = Normal::new(0.0, 1.0).expect("valid stddev");
    let mut samples: Vec<Sample> = (0..n)
        .map(|i| {
            let label = i % classes;
            let features = means[label]
                .iter()
                .map(|m| m + noise.sample(&mut rng))
                .collect();
            Sample { features, label }
        })
        .collect();
    shuffle(&mut samples, &mut rng);
    Ok(samples)
}

/// Shuffles by seed and deals near-equal shards (sizes differ by at most
/// one; earlier shards absorb the remainder).
pub fn partition_iid(dataset: &[Sample], num_clients: usize, seed: u64) -> Result<Vec<Shard>> {
    if num_clients < 1 {
        return Err(Error::InvalidInput("num_clients must be >= 1".into()));
    }
    if dataset.len() < num_clients {
        return Err(Error::InvalidInput(format!(
            "dataset of {} cannot cover {} clients",
            dataset.len(),
            num_clients
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut order, &mut rng);

    let base = dataset.len() / num_clients;
    let rem = dataset.len() % num_clients;
    let mut shards = Vec::with_capacity(num_clients);
    let mut cursor = 0;
    for client_id in 0..num_clients {
        let size = base + usize::from(client_id < rem);
        let samples = order[cursor..cursor + size]
            .iter()
            .map(|&i| dataset[i].clone())
            .collect();
        cursor += size;
        shards.push(Shard { client_id, samples });
    }
    Ok(shards)
}

/// Shards with sizes proportional to `weights` (largest-remainder
/// apportionment, every shard at least one sample). This is the
/// size-multiplier mechanism for exercising data-weighted sampling.
pub fn partition_weighted(dataset: &[Sample], weights: &[f64], seed: u64) -> Result<Vec<Shard>> {
    let num_clients = weights.len();
    if num_clients < 1 {
        return Err(Error::InvalidInput("need at least one weight".into()));
    }
    if dataset.len() < num_clients {
        return Err(Error::InvalidInput(format!(
            "dataset of {} cannot cover {} clients",
            dataset.len(),
            num_clients
        )));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be positive and finite".into()));
    }

    let total: f64 = weights.iter().sum();
    let n = dataset.len();
    let mut sizes: Vec<usize> = weights
        .iter()
        .map(|w| (n as f64 * w / total).floor() as usize)
        .collect();
    let mut fractions: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (i, n as f64 * w / total - sizes[i] as f64))
        .collect();
    fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let assigned: usize = sizes.iter().sum();
    for k in 0..n - assigned {
        sizes[fractions[k % num_clients].0] += 1;
    }
    // Every shard must be non-empty.
    for i in 0..num_clients {
        while sizes[i] == 0 {
            let donor = (0..num_clients).max_by_key(|&j| sizes[j]).unwrap();
            if sizes[donor] <= 1 {
                return Err(Error::InvalidInput("cannot give every client a sample".into()));
            }
            sizes[donor] -= 1;
            sizes[i] += 1;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut order, &mut rng);
    let mut shards = Vec::with_capacity(num_clients);
    let mut cursor = 0;
    for (client_id, &size) in sizes.iter().enumerate() {
        let samples = order[cursor..cursor + size]
            .iter()
            .map(|&i| dataset[i].clone())
            .collect();
        cursor += size;
        shards.push(Shard { client_id, samples });
    }
    Ok(shards)
}

/// Label-skew partition: the dataset is sorted by label and cut into
/// num_clients * labels_per_client label-pure contiguous blocks (block
/// counts per label apportioned by label frequency); each client is dealt
/// `labels_per_client` blocks by striding the label-major block list, so
/// a client holds at most `labels_per_client` distinct labels.
pub fn partition_label_skew(
    dataset: &[Sample],
    num_clients: usize,
    labels_per_client: usize,
    seed: u64,
) -> Result<Vec<Shard>> {
    if num_clients < 1 {
        return Err(Error::InvalidInput("num_clients must be >= 1".into()));
    }
    let classes = dataset.iter().map(|s| s.label).max().map_or(0, |m| m + 1);
    if labels_per_client < 1 || labels_per_client > classes {
        return Err(Error::InvalidInput(format!(
            "labels_per_client={labels_per_client} out of [1, {classes}]"
        )));
    }

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, s) in dataset.iter().enumerate() {
        by_label[s.label].push(i);
    }
    let present: Vec<usize> = (0..classes).filter(|&l| !by_label[l].is_empty()).collect();
    let num_blocks = num_clients * labels_per_client;
    if num_blocks < present.len() {
        return Err(Error::InvalidInput(format!(
            "cannot form {num_blocks} label-pure blocks over {} labels",
            present.len()
        )));
    }

    // Apportion block counts to labels by frequency (largest remainder),
    // at least one block per present label.
    let n = dataset.len() as f64;
    let mut blocks_per: Vec<usize> = present
        .iter()
        .map(|&l| (num_blocks as f64 * by_label[l].len() as f64 / n).floor() as usize)
        .collect();
    let mut fractions: Vec<(usize, f64)> = present
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            (k, num_blocks as f64 * by_label[l].len() as f64 / n - blocks_per[k] as f64)
        })
        .collect();
    fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let assigned: usize = blocks_per.iter().sum();
    for k in 0..num_blocks - assigned {
        blocks_per[fractions[k % present.len()].0] += 1;
    }
    for k in 0..present.len() {
        while blocks_per[k] == 0 {
            let donor = (0..present.len()).max_by_key(|&j| blocks_per[j]).unwrap();
            if blocks_per[donor] <= 1 {
                return Err(Error::InvalidInput("infeasible block count".into()));
            }
            blocks_per[donor] -= 1;
            blocks_per[k] += 1;
        }
    }
    for (k, &l) in present.iter().enumerate() {
        if blocks_per[k] > by_label[l].len() {
            return Err(Error::InvalidInput(format!(
                "infeasible block count: label {l} has {} samples for {} blocks",
                by_label[l].len(),
                blocks_per[k]
            )));
        }
    }

    // Label-major block list; the seed shuffles sample order within labels.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(num_blocks);
    for (k, &l) in present.iter().enumerate() {
        let mut idx = by_label[l].clone();
        shuffle(&mut idx, &mut rng);
        let count = blocks_per[k];
        let base = idx.len() / count;
        let rem = idx.len() % count;
        let mut cursor = 0;
        for b in 0..count {
            let size = base + usize::from(b < rem);
            blocks.push(idx[cursor..cursor + size].to_vec());
            cursor += size;
        }
    }

    let mut shards = Vec::with_capacity(num_clients);
    for client_id in 0..num_clients {
        let mut samples = Vec::new();
        for k in 0..labels_per_client {
            for &i in &blocks[client_id + k * num_clients] {
                samples.push(dataset[i].clone());
            }
        }
        shards.push(Shard { client_id, samples });
    }
    Ok(shards)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Parse(format!(
            "{what} truncated: need {end} bytes, file has {}",
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Parses an MNIST-style IDX image/label file pair. Pixels are scaled to
/// [0, 1]; features are row-major flattened images.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<Sample>> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    parse_idx(&images, &labels)
}

/// Parses IDX bytes directly; see [`load_idx`].
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Vec<Sample>> {
    let magic = read_u32_be(images, 0, "images header")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse(format!(
            "images magic: unexpected magic {magic:#010x}, want {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let n_images = read_u32_be(images, 4, "images count")? as usize;
    let rows = read_u32_be(images, 8, "images rows")? as usize;
    let cols = read_u32_be(images, 12, "images cols")? as usize;
    let pixels = n_images * rows * cols;
    if images.len() < 16 + pixels {
        return Err(Error::Parse(format!(
            "images payload truncated: expected {pixels} bytes after header, found {}",
            images.len() - 16
        )));
    }

    let magic = read_u32_be(labels, 0, "labels header")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse(format!(
            "labels magic: unexpected magic {magic:#010x}, want {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let n_labels = read_u32_be(labels, 4, "labels count")? as usize;
    if labels.len() < 8 + n_labels {
        return Err(Error::Parse(format!(
            "labels payload truncated: expected {n_labels} bytes after header, found {}",
            labels.len() - 8
        )));
    }
    if n_images != n_labels {
        return Err(Error::Parse(format!(
            "count mismatch: {n_images} images vs {n_labels} labels"
        )));
    }

    let dim = rows * cols;
    Ok((0..n_images)
        .map(|i| Sample {
            features: images[16 + i * dim..16 + (i + 1) * dim]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect(),
            label: labels[8 + i] as usize,
        })
        .collect())
}

/// Serializes samples back to IDX byte pairs (images, labels). Features
/// must be `rows * cols` values in [0, 1]; pixel bytes are recovered by
/// rounding, so parse -> serialize reproduces the original file.
pub fn idx_bytes(samples: &[Sample], rows: usize, cols: usize) -> Result<(Vec<u8>, Vec<u8>)> {
    let dim = rows * cols;
    let mut images = Vec::with_capacity(16 + samples.len() * dim);
    images.extend(IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend((samples.len() as u32).to_be_bytes());
    images.extend((rows as u32).to_be_bytes());
    images.extend((cols as u32).to_be_bytes());
    let mut labels = Vec::with_capacity(8 + samples.len());
    labels.extend(IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend((samples.len() as u32).to_be_bytes());
    for s in samples {
        if s.features.len() != dim {
            return Err(Error::InvalidInput(format!(
                "sample has {} features, expected {dim}",
                s.features.len()
            )));
        }
        for &f in &s.features {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidInput("pixel features must lie in [0,1]".into()));
            }
            images.push((f * 255.0).round() as u8);
        }
        if s.label > u8::MAX as usize {
            return Err(Error::InvalidInput("label does not fit in a byte".into()));
        }
        labels.push(s.label as u8);
    }
    Ok((images, labels))
}
